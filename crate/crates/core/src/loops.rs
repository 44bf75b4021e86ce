//! Pulse sequences, interaction Hamiltonians and loop composition.
//!
//! Steps are listed in the order their factors are written in the operator
//! product, so `[(P,+1), (X,-1), (P,-1), (X,+1)]` is
//! `e^{iH_P} e^{-iH_X} e^{-iH_P} e^{iH_X}`; the last step acts first on the
//! state. A step `(axis, s)` contributes `e^{i s H_axis}`.
//!
//! Steps may be grouped into segments (sub-loops). Each segment is composed
//! to the requested BCH order on its own; the segment exponents are then
//! merged with a separate, lower BCH order. Because closed segments start at
//! second order in the coupling, a third-order merge is exact through
//! seventh order.

use crate::algebra::coeff::*;
use crate::algebra::{
    bch_combine, exp_poly, log_poly, Basis, Central, Ctx, Model, Mono, OperatorPoly, Truncation,
    MAX_BCH_ORDER, PARAM0,
};
use crate::error::{Error, Result};
use crate::params::ExperimentParams;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    P,
}

/// One pulse `e^{i s H_axis}` with `s = scale + sum_j t_j * symbolic[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseStep {
    pub axis: Axis,
    pub scale: Q,
    /// linear dependence on free parameters `(parameter index, coefficient)`
    pub symbolic: Vec<(usize, Q)>,
    pub segment: u32,
}

impl PulseStep {
    pub fn new(axis: Axis, scale: Q) -> Self {
        PulseStep { axis, scale, symbolic: Vec::new(), segment: 0 }
    }
    pub fn int(axis: Axis, s: i64) -> Self {
        Self::new(axis, qi(s))
    }
    pub fn frac(axis: Axis, n: i64, d: i64) -> Self {
        Self::new(axis, q(n, d))
    }
    pub fn in_segment(mut self, seg: u32) -> Self {
        self.segment = seg;
        self
    }
    pub fn negated(&self) -> Self {
        PulseStep {
            axis: self.axis,
            scale: -self.scale.clone(),
            symbolic: self.symbolic.iter().map(|(i, c)| (*i, -c.clone())).collect(),
            segment: self.segment,
        }
    }
    pub fn is_zero(&self) -> bool {
        self.scale.is_zero() && self.symbolic.iter().all(|(_, c)| c.is_zero())
    }
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    axis: Axis,
    #[serde(rename = "scale-numerator")]
    num: i64,
    #[serde(rename = "scale-denominator", default = "one_i64")]
    den: i64,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    segment: u32,
}

fn one_i64() -> i64 {
    1
}
fn is_zero_u32(x: &u32) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSpec {
    pub name: String,
    pub steps: Vec<PulseStep>,
    /// permit paths with nonzero net displacement
    pub allow_open: bool,
}

impl LoopSpec {
    pub fn new(name: &str, steps: Vec<PulseStep>) -> Self {
        LoopSpec { name: name.to_string(), steps, allow_open: false }
    }

    pub fn from_pairs(name: &str, pairs: &[(Axis, i64, i64)]) -> Self {
        Self::new(name, pairs.iter().map(|&(a, n, d)| PulseStep::frac(a, n, d)).collect())
    }

    /// Reversed, sign-flipped sequence (the Hermitian adjoint of the loop unitary).
    pub fn dagger(&self) -> LoopSpec {
        LoopSpec {
            name: format!("{}^dag", self.name),
            steps: self.steps.iter().rev().map(|s| s.negated()).collect(),
            allow_open: self.allow_open,
        }
    }

    /// Concatenates loops as consecutive segments.
    pub fn chain(name: &str, parts: &[LoopSpec]) -> LoopSpec {
        let mut steps = Vec::new();
        for (i, p) in parts.iter().enumerate() {
            steps.extend(p.steps.iter().cloned().map(|s| s.in_segment(i as u32)));
        }
        LoopSpec { name: name.to_string(), steps, allow_open: parts.iter().any(|p| p.allow_open) }
    }

    /// Net displacement per axis: constant part and per-parameter parts.
    pub fn net_displacement(&self) -> BTreeMap<(Axis, Option<usize>), Q> {
        let mut m: BTreeMap<(Axis, Option<usize>), Q> = BTreeMap::new();
        for s in &self.steps {
            *m.entry((s.axis, None)).or_insert_with(Q::zero) += &s.scale;
            for (i, c) in &s.symbolic {
                *m.entry((s.axis, Some(*i))).or_insert_with(Q::zero) += c;
            }
        }
        m.retain(|_, v| !v.is_zero());
        m
    }

    pub fn is_closed(&self) -> bool {
        self.net_displacement().is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidLoop(format!("loop '{}' has no steps", self.name)));
        }
        if let Some(i) = self.steps.iter().position(|s| s.is_zero()) {
            return Err(Error::InvalidLoop(format!("step {} of '{}' has zero scale", i, self.name)));
        }
        if !self.allow_open && !self.is_closed() {
            return Err(Error::InvalidLoop(format!(
                "loop '{}' does not close: {:?}",
                self.name,
                self.net_displacement()
            )));
        }
        Ok(())
    }

    pub fn segments(&self) -> Vec<Vec<PulseStep>> {
        let mut out: Vec<Vec<PulseStep>> = Vec::new();
        let mut cur: Option<u32> = None;
        for s in &self.steps {
            if cur != Some(s.segment) {
                out.push(Vec::new());
                cur = Some(s.segment);
            }
            out.last_mut().unwrap().push(s.clone());
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<StepJson> = self
            .steps
            .iter()
            .map(|s| StepJson {
                axis: s.axis,
                num: s.scale.numer().to_i64().unwrap_or(0),
                den: s.scale.denom().to_i64().unwrap_or(1),
                segment: s.segment,
            })
            .collect();
        serde_json::to_value(steps).expect("serializable")
    }

    /// Accepts a bare list of steps or `{"name": .., "steps": [..]}`.
    pub fn from_json(v: &serde_json::Value) -> Result<LoopSpec> {
        let (name, list) = match v {
            serde_json::Value::Array(_) => ("inline".to_string(), v.clone()),
            serde_json::Value::Object(o) => (
                o.get("name").and_then(|n| n.as_str()).unwrap_or("inline").to_string(),
                o.get("steps").cloned().ok_or_else(|| Error::Config("loop object needs 'steps'".into()))?,
            ),
            _ => return Err(Error::Config("loop must be a list or an object".into())),
        };
        let raw: Vec<StepJson> =
            serde_json::from_value(list).map_err(|e| Error::Config(format!("bad loop step: {}", e)))?;
        let mut steps = Vec::new();
        for s in raw {
            if s.den == 0 {
                return Err(Error::Config("scale-denominator must be nonzero".into()));
            }
            steps.push(PulseStep::frac(s.axis, s.num, s.den).in_segment(s.segment));
        }
        let l = LoopSpec::new(&name, steps);
        l.validate()?;
        Ok(l)
    }
}

/// `e^{iH_P} e^{-iH_X} e^{-iH_P} e^{iH_X}`
pub fn square_loop() -> LoopSpec {
    use Axis::*;
    LoopSpec::from_pairs("square", &[(P, 1, 1), (X, -1, 1), (P, -1, 1), (X, 1, 1)])
}

/// Building blocks of the four-loop path, in written order.
pub fn gamma_components() -> [LoopSpec; 4] {
    use Axis::*;
    [
        LoopSpec::from_pairs("U1", &[(X, -2, 1), (P, -1, 1), (X, 1, 1), (P, 1, 1), (X, 1, 1)]),
        LoopSpec::from_pairs("U2", &[(X, -7, 3), (P, -1, 1), (X, 1, 1), (P, 1, 1), (X, 4, 3)]),
        LoopSpec::from_pairs("U3", &[(P, 2, 3), (X, -1, 1), (P, -1, 1), (X, 1, 1), (P, 1, 3)]),
        LoopSpec::from_pairs("U4", &[(P, 1, 1), (X, -1, 1), (P, -1, 1), (X, 1, 1)]),
    ]
}

/// `U1 U2^dag U3^dag U4`
pub fn gamma_fourloop() -> LoopSpec {
    let [u1, u2, u3, u4] = gamma_components();
    LoopSpec::chain("gamma-fourloop", &[u1, u2.dagger(), u3.dagger(), u4])
}

/// `e^{-iH_X} e^{-iH_P} e^{iH_X} e^{iH_P}`
pub fn vertex_loop(name: &str) -> LoopSpec {
    use Axis::*;
    LoopSpec::from_pairs(name, &[(X, -1, 1), (P, -1, 1), (X, 1, 1), (P, 1, 1)])
}

pub fn preset_loop(name: &str) -> Option<LoopSpec> {
    match name {
        "square" => Some(square_loop()),
        "gamma-fourloop" => Some(gamma_fourloop()),
        "beta-vertex" => Some(vertex_loop("beta-vertex")),
        "mu-vertex" => Some(vertex_loop("mu-vertex")),
        _ => None,
    }
}

pub const LOOP_PRESETS: [&str; 4] = ["square", "gamma-fourloop", "beta-vertex", "mu-vertex"];

/// `H_X = n lambda0 (X - k X^2 + k^2 X^3 - ...)` and the same in `P`.
pub fn build_hamiltonians(ctx: Ctx, k_order: u8) -> (OperatorPoly, OperatorPoly) {
    let qctx = Ctx { basis: Basis::Quadrature, ..ctx };
    let mut hx = OperatorPoly::zero(qctx);
    let mut hp = OperatorPoly::zero(qctx);
    for s in 0..=k_order {
        let c = Central::new(1, 1, s, 0);
        let sign = if s % 2 == 0 { c_one() } else { -c_one() };
        hx.add_term(Mono::new(0, s + 1, c), sign.clone());
        hp.add_term(Mono::new(s + 1, 0, c), sign);
    }
    if ctx.basis == Basis::Ladder {
        (hx.to_ladder(), hp.to_ladder())
    } else {
        (hx, hp)
    }
}

/// `i s H_axis` for one step, including symbolic scale parts.
pub fn step_exponent(step: &PulseStep, hx: &OperatorPoly, hp: &OperatorPoly) -> OperatorPoly {
    let h = match step.axis {
        Axis::X => hx,
        Axis::P => hp,
    };
    let mut out = h.scale(&(c_i() * from_q(step.scale.clone())));
    for (idx, c) in &step.symbolic {
        let shift = Central::default().with(PARAM0 + idx, 1);
        let part = h.shift_central(&shift).scale(&(c_i() * from_q(c.clone())));
        out = out.add(&part).expect("same context");
    }
    out
}

/// How steps inside a segment are combined. Both are exact through the
/// segment's coupling order; `ExpLog` multiplies truncated exponentials and
/// takes the logarithm, `Bch` folds the steps with the BCH series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentRoute {
    ExpLog,
    Bch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub model: Model,
    /// BCH order inside each segment; also bounds the coupling order of a segment.
    pub bch_order: usize,
    pub k_order: u8,
    /// BCH order used to merge segment exponents.
    pub segment_order: usize,
    pub trunc: Truncation,
    pub route: SegmentRoute,
}

impl ComposeOptions {
    pub fn new(model: Model, bch_order: usize, k_order: u8) -> Self {
        ComposeOptions { model, bch_order, k_order, segment_order: 3, trunc: Truncation::default(), route: SegmentRoute::ExpLog }
    }
    pub fn with_route(mut self, route: SegmentRoute) -> Self {
        self.route = route;
        self
    }
    pub fn with_trunc(mut self, trunc: Truncation) -> Self {
        self.trunc = trunc;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedTerm {
    pub term: String,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub bch_order: usize,
    pub k_order: u8,
    pub segment_order: usize,
    pub pruned: Vec<PrunedTerm>,
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LoopExponent {
    pub loop_name: String,
    pub exponent: OperatorPoly,
    pub provenance: Provenance,
}

impl LoopExponent {
    /// Photon-number and qg-free linear ladder content: the part that the
    /// Zassenhaus split and the mean-field formulas consume.
    pub fn splittable_part(&self) -> OperatorPoly {
        self.exponent
            .to_ladder()
            .filter(|m, _| m.word_len() == 0 || (m.word_len() == 1 && m.c.qg() == 0))
    }

    pub fn ladder(&self) -> OperatorPoly {
        self.exponent.to_ladder()
    }
}

fn compose_segment(steps: &[PulseStep], ctx: Ctx, opts: &ComposeOptions) -> Result<OperatorPoly> {
    let (hx, hp) = build_hamiltonians(ctx, opts.k_order);
    match opts.route {
        SegmentRoute::Bch => {
            let mut z = OperatorPoly::zero(ctx);
            for s in steps {
                z = bch_combine(&z, &step_exponent(s, &hx, &hp), opts.bch_order)?;
            }
            Ok(z)
        }
        SegmentRoute::ExpLog => {
            let mut u = OperatorPoly::one(ctx);
            for s in steps {
                u = u.mul(&exp_poly(&step_exponent(s, &hx, &hp))?)?;
            }
            log_poly(&u)
        }
    }
}

pub fn compose(lp: &LoopSpec, opts: &ComposeOptions) -> Result<LoopExponent> {
    lp.validate()?;
    if opts.bch_order == 0 || opts.bch_order > MAX_BCH_ORDER {
        return Err(Error::OrderOutOfRange { requested: opts.bch_order, supported: MAX_BCH_ORDER });
    }
    if opts.segment_order == 0 || opts.segment_order > MAX_BCH_ORDER {
        return Err(Error::OrderOutOfRange { requested: opts.segment_order, supported: MAX_BCH_ORDER });
    }
    let outer = Ctx::quadrature(opts.model, opts.trunc);
    let inner_trunc = Truncation {
        max_lambda: (opts.bch_order as u8).min(opts.trunc.max_lambda),
        ..opts.trunc
    };
    let inner = Ctx::quadrature(opts.model, inner_trunc);
    let mut total = OperatorPoly::zero(outer);
    for seg in lp.segments() {
        let z = compose_segment(&seg, inner, opts)?;
        let z = crate::algebra::zassenhaus::recontext(&z, outer);
        total = bch_combine(&total, &z, opts.segment_order)?;
    }
    Ok(LoopExponent {
        loop_name: lp.name.clone(),
        exponent: total,
        provenance: Provenance {
            bch_order: opts.bch_order,
            k_order: opts.k_order,
            segment_order: opts.segment_order,
            pruned: Vec::new(),
            threshold: None,
        },
    })
}

/// Numeric scale of a term: coefficient with `lambda0`, `k`, the deformation
/// strength substituted, `n -> N_p`, `sqrt(nbar + 1)` per physical ladder
/// factor (scaled basis carries an extra `1/sqrt 2` each). Central terms are
/// scored by their phase contribution `m |c| N_p^(m-1)`.
pub fn term_magnitude(m: &Mono, c: &Cq, model: Model, params: &ExperimentParams) -> f64 {
    let cen = &m.c;
    let mut v = cq_to_c64(c).norm();
    v *= params.lambda0().powi(cen.lam() as i32) * params.k().powi(cen.k() as i32);
    if cen.qg() > 0 {
        v *= params.qg_value(model);
    }
    let n = cen.n() as i32;
    if m.is_central() {
        v * n as f64 * params.n_p.powi(n - 1)
    } else {
        let ladder = (0.5 * (params.nbar + 1.0)).sqrt();
        v * params.n_p.powi(n) * ladder.powi(m.word_len() as i32)
    }
}

/// Drops terms below `threshold` (ladder basis). Central deformation terms are
/// the signal and are always kept. For any positive threshold, words of
/// degree two or more are dropped as well: they reach the optical phase only
/// through nested commutators with the displacement terms and admit no
/// finite split. `threshold = 0` keeps everything.
pub fn prune(exp: &LoopExponent, params: &ExperimentParams, threshold: f64) -> LoopExponent {
    let lad = exp.exponent.to_ladder();
    let model = lad.model();
    let mut kept = OperatorPoly::zero(lad.ctx());
    let mut pruned = exp.provenance.pruned.clone();
    for (m, c) in lad.iter() {
        let mag = term_magnitude(m, c, model, params);
        let signal = m.is_central() && m.c.qg() > 0;
        let nonlinear = threshold > 0.0 && m.word_len() >= 2;
        if signal || (mag >= threshold && !nonlinear) {
            kept.add_term(*m, c.clone());
        } else {
            pruned.push(PrunedTerm {
                term: format!("{}", OperatorPoly::term(lad.ctx(), *m, c.clone())),
                magnitude: mag,
            });
        }
    }
    LoopExponent {
        loop_name: exp.loop_name.clone(),
        exponent: kept,
        provenance: Provenance { pruned, threshold: Some(threshold), ..exp.provenance.clone() },
    }
}

/// Smallest `m >= 2` with `k^(m-2) lambda0^m N_p^(m-1) < 1/(2 sqrt(N_p N_r))`.
pub fn required_orders(params: &ExperimentParams, n_runs: f64) -> Result<(usize, usize)> {
    let (k, l, n) = (params.k(), params.lambda0(), params.n_p);
    let bound = 0.5 / (n * n_runs).sqrt();
    let mut m = 2usize;
    loop {
        let lhs = (m as f64 - 2.0) * k.ln() + m as f64 * l.ln() + (m as f64 - 1.0) * n.ln();
        if lhs < bound.ln() {
            break;
        }
        m += 1;
        if m > 10_000 {
            return Err(Error::Config("truncation heuristic does not converge".into()));
        }
    }
    if m > MAX_BCH_ORDER {
        return Err(Error::OrderOutOfRange { requested: m, supported: MAX_BCH_ORDER });
    }
    Ok((m, m - 2))
}

/// Rational step scales as f64 (for the numeric oracle).
pub fn scale_f64(s: &PulseStep) -> f64 {
    q_to_f64(&s.scale)
}

pub fn max_abs_scale(lp: &LoopSpec) -> f64 {
    lp.steps.iter().map(|s| q_to_f64(&s.scale.abs())).fold(0.0, f64::max)
}
