//! Loop design: rectangle families with free dimensions, ranking of exponent
//! terms and solving for dimensions that cancel the leading QM terms.

use crate::algebra::coeff::*;
use crate::algebra::{fmt_central, Central, Model, Mono, OperatorPoly, Truncation, MAX_PARAMS, PARAM0};
use crate::error::{Error, Result};
use crate::loops::{compose, square_loop, Axis, ComposeOptions, LoopExponent, LoopSpec, PulseStep};
use crate::params::ExperimentParams;
use nalgebra::{DMatrix, DVector};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MAX_DESIGN_LOOPS: usize = 4;
/// Exponent size above which symbolic composition is abandoned.
pub const TERM_BUDGET: usize = 400_000;
pub const N_STARTS: usize = 64;
pub const START_RANGE: f64 = 3.0;
pub const MAX_DENOMINATOR: i64 = 24;
pub const SEED: u64 = 0x5eed_1005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `e^{-iaH_X} e^{-icH_P} e^{ibH_X} e^{icH_P} e^{-i(b-a)H_X}`
    UX,
    /// `e^{iaH_P} e^{-icH_X} e^{-ibH_P} e^{icH_X} e^{i(b-a)H_P}`
    UP,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dim {
    Fixed(Q),
    Free,
}

impl Dim {
    pub fn int(v: i64) -> Dim {
        Dim::Fixed(qi(v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamLoop {
    pub family: Family,
    pub a: Dim,
    pub b: Dim,
    pub c: Dim,
    pub dagger: bool,
}

impl ParamLoop {
    pub fn new(family: Family, a: Dim, b: Dim, c: Dim) -> Self {
        ParamLoop { family, a, b, c, dagger: false }
    }
    pub fn free(family: Family) -> Self {
        Self::new(family, Dim::Free, Dim::Free, Dim::Free)
    }
    pub fn daggered(mut self) -> Self {
        self.dagger = true;
        self
    }
}

/// A linear form `constant + sum coef * t_j`.
#[derive(Clone, Debug, Default)]
struct Lin {
    constant: Q,
    coefs: Vec<(usize, Q)>,
}

impl Lin {
    fn from_dim(d: &Dim, next: &mut usize) -> Lin {
        match d {
            Dim::Fixed(v) => Lin { constant: v.clone(), coefs: Vec::new() },
            Dim::Free => {
                let i = *next;
                *next += 1;
                Lin { constant: Q::zero(), coefs: vec![(i, qi(1))] }
            }
        }
    }
    fn scaled(&self, s: i64) -> Lin {
        Lin { constant: &self.constant * qi(s), coefs: self.coefs.iter().map(|(i, c)| (*i, c * qi(s))).collect() }
    }
    fn sub(&self, o: &Lin) -> Lin {
        let mut coefs = self.coefs.clone();
        coefs.extend(o.coefs.iter().map(|(i, c)| (*i, -c.clone())));
        Lin { constant: &self.constant - &o.constant, coefs }
    }
    fn step(&self, axis: Axis) -> PulseStep {
        let mut m: BTreeMap<usize, Q> = BTreeMap::new();
        for (i, c) in &self.coefs {
            *m.entry(*i).or_insert_with(Q::zero) += c;
        }
        PulseStep { axis, scale: self.constant.clone(), symbolic: m.into_iter().filter(|(_, c)| !c.is_zero()).collect(), segment: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct DesignProblem {
    pub model: Model,
    pub loops: Vec<ParamLoop>,
    pub m_targets: usize,
    pub ordering_params: ExperimentParams,
    pub bch_order: usize,
    pub k_order: u8,
}

impl DesignProblem {
    pub fn new(model: Model, loops: Vec<ParamLoop>, m_targets: usize, ordering_params: ExperimentParams) -> Self {
        DesignProblem { model, loops, m_targets, ordering_params, bch_order: 4, k_order: 2 }
    }

    pub fn n_free(&self) -> usize {
        self.loops.iter().map(|l| [&l.a, &l.b, &l.c].iter().filter(|d| matches!(d, Dim::Free)).count()).sum()
    }

    /// Step sequence with free dimensions as symbolic parameters `t0, t1, ...`
    /// numbered loop by loop in `(a, b, c)` order.
    pub fn loop_spec(&self) -> LoopSpec {
        let mut next = 0usize;
        let mut parts = Vec::new();
        for (i, l) in self.loops.iter().enumerate() {
            let a = Lin::from_dim(&l.a, &mut next);
            let b = Lin::from_dim(&l.b, &mut next);
            let c = Lin::from_dim(&l.c, &mut next);
            let steps = match l.family {
                Family::UX => vec![
                    a.scaled(-1).step(Axis::X),
                    c.scaled(-1).step(Axis::P),
                    b.step(Axis::X),
                    c.step(Axis::P),
                    a.sub(&b).step(Axis::X),
                ],
                Family::UP => vec![
                    a.step(Axis::P),
                    c.scaled(-1).step(Axis::X),
                    b.scaled(-1).step(Axis::P),
                    c.step(Axis::X),
                    b.sub(&a).step(Axis::P),
                ],
            };
            let steps = steps.into_iter().filter(|s| !s.is_zero()).collect();
            let mut lp = LoopSpec::new(&format!("L{}", i + 1), steps);
            if l.dagger {
                lp = lp.dagger();
            }
            parts.push(lp);
        }
        LoopSpec::chain("design", &parts)
    }

    /// Loop with the free dimensions replaced by `values`.
    pub fn instantiate(&self, values: &[Q]) -> LoopSpec {
        let mut lp = self.loop_spec();
        for s in &mut lp.steps {
            for (i, c) in s.symbolic.drain(..) {
                s.scale += c * &values[i];
            }
        }
        lp.steps.retain(|s| !s.is_zero());
        lp.name = "designed".into();
        lp
    }
}

pub fn compose_parametric(problem: &DesignProblem, bch_order: usize, k_order: u8) -> Result<LoopExponent> {
    if problem.loops.len() > MAX_DESIGN_LOOPS {
        return Err(Error::SymbolicBudgetExceeded(format!(
            "{} loops requested, at most {} are composed symbolically",
            problem.loops.len(),
            MAX_DESIGN_LOOPS
        )));
    }
    if problem.n_free() > MAX_PARAMS {
        return Err(Error::SymbolicBudgetExceeded(format!("{} free dimensions, at most {}", problem.n_free(), MAX_PARAMS)));
    }
    let trunc = Truncation { max_lambda: bch_order as u8, ..Truncation::default() };
    let opts = ComposeOptions::new(problem.model, bch_order, k_order).with_trunc(trunc);
    let exp = compose(&problem.loop_spec(), &opts)?;
    if exp.exponent.len() > TERM_BUDGET {
        return Err(Error::SymbolicBudgetExceeded(format!("{} exponent terms", exp.exponent.len())));
    }
    Ok(exp)
}

/// Coefficient polynomial in the free dimensions: `(exponents, value)`.
pub type ParamPoly = Vec<([u8; MAX_PARAMS], Cq)>;

fn strip_params(c: &Central) -> (Central, [u8; MAX_PARAMS]) {
    let mut e = [0u8; MAX_PARAMS];
    let mut base = *c;
    for (i, ei) in e.iter_mut().enumerate() {
        *ei = c.param(i);
        base = base.with(PARAM0 + i, 0);
    }
    (base, e)
}

/// Groups a (ladder-basis) exponent by monomial with the free dimensions
/// factored out of the central part.
pub fn coefficient_polys(exp: &OperatorPoly) -> BTreeMap<Mono, ParamPoly> {
    let lad = exp.to_ladder();
    let mut out: BTreeMap<Mono, ParamPoly> = BTreeMap::new();
    for (m, c) in lad.iter() {
        let (base, e) = strip_params(&m.c);
        out.entry(Mono { w: m.w, c: base }).or_default().push((e, c.clone()));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedTerm {
    pub rank: usize,
    pub descriptor: String,
    pub magnitude: f64,
    pub qg: bool,
    pub word_len: u32,
    #[serde(skip)]
    pub mono: Option<Mono>,
}

fn scale_of(c: &Central, model: Model, params: &ExperimentParams) -> f64 {
    let mut v = params.lambda0().powi(c.lam() as i32) * params.k().powi(c.k() as i32);
    if c.qg() > 0 {
        v *= params.qg_value(model);
    }
    v
}

/// Estimated contribution of one exponent term to the output phase, with
/// `n -> N_p`. Pure terms `c n^m` give `m |c| N^(m-1)`; a displacement term
/// `c n^p` enters through cross products, scored as `p |c|^2 N^(2p-1)`;
/// longer words are scored by their size with `sqrt((nbar+1)/2)` per ladder
/// factor. Coefficients that still depend on free dimensions count as 1.
pub fn phase_weight(m: &Mono, coef: f64, model: Model, params: &ExperimentParams) -> f64 {
    let s = coef * scale_of(&m.c, model, params);
    let n = m.c.n() as i32;
    let np = params.n_p;
    match m.word_len() {
        0 => s * n as f64 * np.powi(n - 1),
        1 => s * s * n as f64 * np.powi(2 * n - 1),
        l => s * np.powi(n) * (0.5 * (params.nbar + 1.0)).sqrt().powi(l as i32),
    }
}

/// Terms ranked by descending phase weight; equal weights keep monomial order.
pub fn order_terms(exp: &LoopExponent, params: &ExperimentParams) -> Vec<RankedTerm> {
    let model = exp.exponent.model();
    let polys = coefficient_polys(&exp.exponent);
    let mut v: Vec<(Mono, f64, String)> = polys
        .iter()
        .map(|(m, poly)| {
            let symbolic = poly.iter().any(|(e, _)| e.iter().any(|&x| x > 0));
            let coef = if symbolic { 1.0 } else { poly.iter().map(|(_, c)| cq_to_c64(c).norm()).sum() };
            let desc = if symbolic {
                format!("[{} terms] {} {}", poly.len(), fmt_word(m.w), fmt_central(&m.c, model))
            } else {
                format!("{}", OperatorPoly::term(exp.exponent.to_ladder().ctx(), *m, poly[0].1.clone()))
            };
            (*m, phase_weight(m, coef, model, params), desc)
        })
        .collect();
    // stable sort keeps the BTreeMap (lexicographic) order among ties
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    v.into_iter()
        .enumerate()
        .map(|(i, (m, mag, d))| RankedTerm { rank: i + 1, descriptor: d, magnitude: mag, qg: m.c.qg() > 0, word_len: m.word_len(), mono: Some(m) })
        .collect()
}

fn fmt_word(w: [u8; 2]) -> String {
    match w {
        [0, 0] => "1".into(),
        [l, r] => format!("c^{} d^{}", l, r),
    }
}

fn eval_poly(p: &ParamPoly, x: &[f64]) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (e, c) in p {
        let mut t = 1.0;
        for (i, &ei) in e.iter().enumerate() {
            if ei > 0 {
                t *= x[i].powi(ei as i32);
            }
        }
        re += q_to_f64(&c.re) * t;
        im += q_to_f64(&c.im) * t;
    }
    (re, im)
}

fn eval_grad(p: &ParamPoly, x: &[f64], j: usize) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (e, c) in p {
        if e[j] == 0 {
            continue;
        }
        let mut t = e[j] as f64;
        for (i, &ei) in e.iter().enumerate() {
            let pw = if i == j { ei - 1 } else { ei };
            if pw > 0 {
                t *= x[i].powi(pw as i32);
            }
        }
        re += q_to_f64(&c.re) * t;
        im += q_to_f64(&c.im) * t;
    }
    (re, im)
}

fn eval_exact(p: &ParamPoly, x: &[Q]) -> Cq {
    let mut acc = cq(Q::zero(), Q::zero());
    for (e, c) in p {
        let mut t = qi(1);
        for (i, &ei) in e.iter().enumerate() {
            if ei > 0 {
                t *= num_traits::pow(x[i].clone(), ei as usize);
            }
        }
        acc = acc + c.clone() * from_q(t);
    }
    acc
}

/// Residual components: real and imaginary parts of every target that is
/// not identically zero in that component.
struct System {
    polys: Vec<ParamPoly>,
    comps: Vec<(usize, bool)>,
    n: usize,
}

impl System {
    fn new(polys: Vec<ParamPoly>, n: usize) -> Self {
        let mut comps = Vec::new();
        for (i, p) in polys.iter().enumerate() {
            if p.iter().any(|(_, c)| !c.re.is_zero()) {
                comps.push((i, false));
            }
            if p.iter().any(|(_, c)| !c.im.is_zero()) {
                comps.push((i, true));
            }
        }
        System { polys, comps, n }
    }
    fn residual(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.comps.len(),
            self.comps.iter().map(|&(i, im)| {
                let (r, m) = eval_poly(&self.polys[i], x);
                if im {
                    m
                } else {
                    r
                }
            }),
        )
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.comps.len(), self.n, |row, j| {
            let (i, im) = self.comps[row];
            let (r, m) = eval_grad(&self.polys[i], x, j);
            if im {
                m
            } else {
                r
            }
        })
    }
}

/// Levenberg-Marquardt with multiplicative damping.
fn levenberg_marquardt(sys: &System, x0: &[f64]) -> (Vec<f64>, f64) {
    let mut x = DVector::from_column_slice(x0);
    let mut r = sys.residual(x.as_slice());
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..300 {
        if cost < 1e-30 {
            break;
        }
        let j = sys.jacobian(x.as_slice());
        let jt = j.transpose();
        let g = &jt * &r;
        let a = &jt * &j;
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = a.clone();
            for d in 0..sys.n {
                damped[(d, d)] += mu * (1.0 + a[(d, d)]);
            }
            let Some(step) = damped.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let xn = &x + &step;
            let rn = sys.residual(xn.as_slice());
            let cn = rn.norm_squared();
            if cn < cost {
                x = xn;
                r = rn;
                cost = cn;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x.as_slice().to_vec(), cost.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub values: Vec<f64>,
    /// exact dimensions when rationalization verified symbolically
    #[serde(skip)]
    pub rational: Option<Vec<Q>>,
    pub rational_text: Option<Vec<String>>,
    pub residual: f64,
    /// numeric coefficient of the leading deformation term
    pub qg_coefficient: f64,
}

impl Solution {
    pub fn is_exact(&self) -> bool {
        self.rational.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct DesignOutcome {
    pub targets: Vec<RankedTerm>,
    pub solutions: Vec<Solution>,
}

/// Numerical tolerance for accepting a non-rational solution.
pub const RESIDUAL_TOL: f64 = 1e-12;

struct Prepared {
    ranked: Vec<RankedTerm>,
    polys: BTreeMap<Mono, ParamPoly>,
    qg_mono: Mono,
    qg_floor: f64,
}

fn prepare(problem: &DesignProblem) -> Result<Prepared> {
    let exp = compose_parametric(problem, problem.bch_order, problem.k_order)?;
    let ranked = order_terms(&exp, &problem.ordering_params);
    let polys = coefficient_polys(&exp.exponent);
    let qg_mono = ranked
        .iter()
        .find(|t| t.qg && t.word_len == 0)
        .and_then(|t| t.mono)
        .ok_or_else(|| Error::NoSolution { max_m: 0 })?;
    // reference: the same coefficient for the plain square loop
    let trunc = Truncation { max_lambda: problem.bch_order as u8, ..Truncation::default() };
    let sq = compose(&square_loop(), &ComposeOptions::new(problem.model, problem.bch_order, problem.k_order).with_trunc(trunc))?;
    let sq_polys = coefficient_polys(&sq.exponent);
    let reference = sq_polys.get(&qg_mono).map(|p| eval_poly(p, &[0.0; MAX_PARAMS])).map(|(r, i)| r.hypot(i)).unwrap_or(1.0);
    Ok(Prepared { ranked, polys, qg_mono, qg_floor: 1e-2 * reference })
}

fn targets_for(prep: &Prepared, m: usize) -> Vec<RankedTerm> {
    prep.ranked.iter().filter(|t| !t.qg && t.word_len <= 1).take(m).cloned().collect()
}

fn solve_with(problem: &DesignProblem, prep: &Prepared, m: usize) -> Result<DesignOutcome> {
    let targets = targets_for(prep, m);
    let nfree = problem.n_free();
    let polys: Vec<ParamPoly> = targets.iter().map(|t| prep.polys[&t.mono.unwrap()].clone()).collect();
    let sys = System::new(polys, nfree);
    let qg_poly = &prep.polys[&prep.qg_mono];

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; nfree]];
    for _ in 1..N_STARTS {
        starts.push((0..nfree).map(|_| rng.gen_range(-START_RANGE..=START_RANGE)).collect());
    }
    let runs: Vec<(Vec<f64>, f64)> = starts.par_iter().map(|s| levenberg_marquardt(&sys, s)).collect();

    let pad = |v: &[f64]| {
        let mut x = [0.0; MAX_PARAMS];
        x[..v.len()].copy_from_slice(v);
        x
    };
    let mut found: Vec<Solution> = Vec::new();
    for (x, res) in runs {
        if res > 1e-8 {
            continue;
        }
        // try an exact rational point first
        let rat: Option<Vec<Q>> = x.iter().map(|&v| rationalize(v, MAX_DENOMINATOR)).collect();
        let exact = rat.filter(|r| {
            let mut xr = r.clone();
            xr.resize(MAX_PARAMS, Q::zero());
            sys.polys.iter().all(|p| eval_exact(p, &xr).is_zero())
        });
        let values: Vec<f64> = match &exact {
            Some(r) => r.iter().map(q_to_f64).collect(),
            None => x.clone(),
        };
        let residual = if exact.is_some() { 0.0 } else { res };
        if exact.is_none() && residual > RESIDUAL_TOL {
            continue;
        }
        let (qr, qi_) = eval_poly(qg_poly, &pad(&values));
        let qg = qr.hypot(qi_);
        if qg < prep.qg_floor {
            continue;
        }
        if found.iter().any(|s| s.values.iter().zip(&values).all(|(a, b)| (a - b).abs() < 1e-6)) {
            continue;
        }
        found.push(Solution {
            rational_text: exact.as_ref().map(|r| r.iter().map(fmt_q).collect()),
            rational: exact,
            values,
            residual,
            qg_coefficient: qg,
        });
    }
    // exact solutions first, then by parameter tuple
    found.sort_by(|a, b| {
        b.is_exact().cmp(&a.is_exact()).then_with(|| a.values.partial_cmp(&b.values).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(DesignOutcome { targets, solutions: found })
}

/// Solutions zeroing the `m_targets` leading QM coefficients. On failure the
/// error reports the largest `m` that still has solutions.
pub fn solve_cancellation(problem: &DesignProblem) -> Result<DesignOutcome> {
    let prep = prepare(problem)?;
    let out = solve_with(problem, &prep, problem.m_targets)?;
    if !out.solutions.is_empty() {
        return Ok(out);
    }
    let mut max_m = 0;
    for m in (0..problem.m_targets).rev() {
        if !solve_with(problem, &prep, m)?.solutions.is_empty() {
            max_m = m;
            break;
        }
    }
    Err(Error::NoSolution { max_m })
}

/// Target coefficients evaluated exactly at rational dimensions.
pub fn verify_exact(problem: &DesignProblem, targets: &[RankedTerm], values: &[Q]) -> Result<Vec<Cq>> {
    let exp = compose_parametric(problem, problem.bch_order, problem.k_order)?;
    let idx: Vec<(usize, Q)> = values.iter().cloned().enumerate().collect();
    let sub = exp.exponent.substitute_params(&idx).to_ladder();
    Ok(targets.iter().map(|t| sub.coeff(&t.mono.unwrap())).collect())
}

/// Largest number of leading QM terms that can be cancelled.
pub fn max_cancellable(problem: &DesignProblem, limit: usize) -> Result<usize> {
    let prep = prepare(problem)?;
    let mut best = 0;
    for m in 1..=limit {
        if solve_with(problem, &prep, m)?.solutions.is_empty() {
            break;
        }
        best = m;
    }
    Ok(best)
}

pub fn to_f64_values(v: &[Q]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_dimensions_give_a_square() {
        let p = DesignProblem::new(
            Model::Gamma,
            vec![ParamLoop::new(Family::UX, Dim::int(0), Dim::int(1), Dim::int(1))],
            0,
            ExperimentParams::default(),
        );
        let lp = p.instantiate(&[]);
        assert_eq!(lp.steps.len(), 4);
        assert!(lp.is_closed());
    }

    #[test]
    fn zero_dimensions_leave_no_loop() {
        let p = DesignProblem::new(
            Model::Gamma,
            vec![ParamLoop::new(Family::UP, Dim::int(0), Dim::int(0), Dim::int(0))],
            0,
            ExperimentParams::default(),
        );
        assert!(matches!(compose_parametric(&p, 4, 2), Err(Error::InvalidLoop(_))));
    }

    #[test]
    fn too_many_loops_is_refused() {
        let p = DesignProblem::new(Model::Gamma, vec![ParamLoop::free(Family::UX); 5], 1, ExperimentParams::default());
        assert!(matches!(compose_parametric(&p, 4, 2), Err(Error::SymbolicBudgetExceeded(_))));
    }
}
