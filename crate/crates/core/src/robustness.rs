//! Loop-edge fluctuations and imperfect mechanical state preparation.

use crate::algebra::coeff::*;
use crate::algebra::{fmt_central, Central, Model, Truncation, PARAM0};
use crate::error::{Error, Result};
use crate::loops::{compose, gamma_components, vertex_loop, Axis, ComposeOptions, LoopExponent, LoopSpec, PulseStep};
use crate::meanfield::{central_value, exponent_parts, PhasePoly};
use crate::params::ExperimentParams;
use crate::precision::{pruned_preset, Inversion};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Edge deformations of a rectangular loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    /// loop starting along X, deformed on the opposite X edge
    OppositeX,
    /// loop starting along P, deformed on an adjacent X edge
    AdjacentX,
    /// loop starting along P, deformed on the opposite P edge
    OppositeP,
    /// loop starting along X, deformed on a P edge
    PSide,
}

/// One bump-notch edit: on the step at `step` (index within the loop as
/// executed), a bump of height `eps` and width `eps` followed by a notch of
/// the same size, starting at fraction `position` of the edge. Orientation
/// `+1` puts the bump outside the loop, `-1` inside.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeEdit {
    pub loop_index: usize,
    pub archetype: Archetype,
    pub step: usize,
    pub orientation: i64,
    pub position: Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasePath {
    /// `U1 U2^dag U3^dag U4`
    FourLoop,
    /// single vertex loop
    Vertex,
}

impl BasePath {
    pub fn name(&self) -> &'static str {
        match self {
            BasePath::FourLoop => "gamma-fourloop",
            BasePath::Vertex => "vertex",
        }
    }

    /// Component loops as executed (daggers applied).
    pub fn components(&self) -> Vec<LoopSpec> {
        match self {
            BasePath::FourLoop => {
                let [u1, u2, u3, u4] = gamma_components();
                vec![u1, u2.dagger(), u3.dagger(), u4]
            }
            BasePath::Vertex => vec![vertex_loop("vertex")],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationCase {
    pub name: String,
    pub base: BasePath,
    pub edits: Vec<EdgeEdit>,
    pub epsilon: f64,
    /// coupling order needed to reach the leading deviation
    pub lambda_order: usize,
    /// order of the Hamiltonian expansion in `k`
    pub k_order: u8,
}

/// Symbol index used for `eps` in the composed exponent.
const EPS: usize = 0;
/// Highest power of `eps` kept; every case studied starts at `eps^3`.
pub const MAX_EPS_POWER: u8 = 3;

fn eps_step(axis: Axis, n: i64) -> PulseStep {
    PulseStep { axis, scale: Q::zero(), symbolic: vec![(EPS, qi(n))], segment: 0 }
}

/// Sign of the enclosed area `sum x dp` (+1 for an empty or degenerate path).
pub fn circulation(steps: &[PulseStep]) -> i64 {
    let mut x = Q::zero();
    let mut area = Q::zero();
    for s in steps {
        match s.axis {
            Axis::X => x += &s.scale,
            Axis::P => area += &x * &s.scale,
        }
    }
    if area.is_negative() {
        -1
    } else {
        1
    }
}

/// Replaces one edge step by the bump-notch sequence. Net displacement and
/// enclosed area are unchanged.
pub fn bump_notch(steps: &[PulseStep], edit: &EdgeEdit) -> Result<Vec<PulseStep>> {
    let s = steps.get(edit.step).ok_or_else(|| Error::InvalidLoop(format!("no step {} to deform", edit.step)))?;
    let ax = s.axis;
    let other = if ax == Axis::X { Axis::P } else { Axis::X };
    let sg = if s.scale.is_positive() { 1 } else { -1 };
    let o = edit.orientation * circulation(steps);
    let first = &s.scale * &edit.position;
    let mut rest = PulseStep::new(ax, &s.scale - &first);
    rest.symbolic = vec![(EPS, qi(-2 * sg))];
    let mut new = vec![
        PulseStep::new(ax, first),
        eps_step(other, o),
        eps_step(ax, sg),
        eps_step(other, -2 * o),
        eps_step(ax, sg),
        eps_step(other, o),
        rest,
    ];
    new.retain(|p| !p.is_zero());
    let mut out = steps[..edit.step].to_vec();
    out.extend(new);
    out.extend_from_slice(&steps[edit.step + 1..]);
    Ok(out)
}

impl FluctuationCase {
    pub fn deformed_loop(&self) -> Result<LoopSpec> {
        let mut comps = self.base.components();
        for e in &self.edits {
            let c = comps.get_mut(e.loop_index).ok_or_else(|| Error::InvalidLoop(format!("no loop {}", e.loop_index)))?;
            c.steps = bump_notch(&c.steps, e)?;
        }
        let lp = LoopSpec::chain(&self.name, &comps);
        lp.validate()?;
        Ok(lp)
    }
    pub fn base_loop(&self) -> LoopSpec {
        LoopSpec::chain("base", &self.base.components())
    }
}

fn edit(loop_index: usize, archetype: Archetype, step: usize, orientation: i64) -> EdgeEdit {
    EdgeEdit { loop_index, archetype, step, orientation, position: q(1, 2) }
}

/// Single vertex loop deformed on its second (P) edge; the row-2 analogue
/// for models probed with the vertex loop.
pub fn vertex_case() -> FluctuationCase {
    FluctuationCase {
        name: "vertex, P edge".into(),
        base: BasePath::Vertex,
        edits: vec![edit(0, Archetype::OppositeP, 1, 1)],
        epsilon: 0.0,
        lambda_order: 4,
        k_order: 2,
    }
}

/// Fluctuation summary rows, four-loop path. Rows 1-3 and 5 need coupling
/// order 4; in row 4 everything below `lambda0^7` cancels.
pub fn table_case(row: usize) -> Option<FluctuationCase> {
    use Archetype::*;
    let (name, base, edits, lambda_order) = match row {
        1 => ("U1, opposite X edge", BasePath::FourLoop, vec![edit(0, OppositeX, 2, 1)], 3),
        2 => ("U4, opposite P edge", BasePath::FourLoop, vec![edit(3, OppositeP, 2, 1)], 4),
        3 => (
            "all loops, opposite edges",
            BasePath::FourLoop,
            vec![edit(0, OppositeX, 2, 1), edit(1, OppositeX, 2, 1), edit(2, OppositeP, 2, 1), edit(3, OppositeP, 2, 1)],
            4,
        ),
        4 => (
            "all loops, X edges",
            BasePath::FourLoop,
            vec![edit(0, OppositeX, 2, 1), edit(1, OppositeX, 2, 1), edit(2, AdjacentX, 1, 1), edit(3, AdjacentX, 3, 1)],
            7,
        ),
        5 => (
            "all loops, P edges",
            BasePath::FourLoop,
            vec![edit(0, PSide, 1, 1), edit(1, PSide, 3, 1), edit(2, OppositeP, 2, 1), edit(3, OppositeP, 2, 1)],
            4,
        ),
        _ => return None,
    };
    Some(FluctuationCase { name: name.into(), base, edits, epsilon: 0.0, lambda_order, k_order: 2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationTerm {
    /// powers of `n`, `lambda0`, `k`
    pub powers: (u8, u8, u8),
    pub eps_power: u8,
    /// coefficient of `eps^p n^a lambda0^b k^c` in `w(n)`
    pub coefficient: String,
    #[serde(skip)]
    pub exact: Q,
    /// phase contribution `a * coefficient * N^(a-1)` at the case's eps
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    pub case: String,
    /// lowest power of eps with a nonzero deviation
    pub eps_power: Option<u8>,
    /// all deviation terms at that power, largest phase first
    pub terms: Vec<DeviationTerm>,
    pub phase_deviation: f64,
}

impl FluctuationResult {
    pub fn leading(&self) -> Option<&DeviationTerm> {
        self.terms.first()
    }
    pub fn coefficient_of(&self, n: u8, lam: u8, k: u8) -> Q {
        self.terms.iter().filter(|t| t.powers == (n, lam, k)).map(|t| t.exact.clone()).sum()
    }
}

/// Pure-photon-number deviation `w_deformed - w_base` with eps kept symbolic.
pub fn deviation_poly(model: Model, case: &FluctuationCase) -> Result<BTreeMap<Central, Q>> {
    let trunc = Truncation { max_lambda: case.lambda_order as u8, max_param_degree: MAX_EPS_POWER, ..Truncation::default() };
    let opts = ComposeOptions::new(model, case.lambda_order, case.k_order).with_trunc(trunc);
    let def = compose(&case.deformed_loop()?, &opts)?.exponent.to_ladder();
    let base = compose(&case.base_loop(), &opts)?.exponent.to_ladder();
    let diff = def.sub(&base)?;
    let mut out = BTreeMap::new();
    for (m, c) in diff.iter() {
        if m.is_central() && m.c.qg() == 0 && !c.im.is_zero() {
            // exponent -i w(n)
            out.insert(m.c, -c.im.clone());
        }
    }
    Ok(out)
}

/// Leading-order phase deviation of a deformed loop against the undeformed one.
pub fn fluctuation_phase(model: Model, case: &FluctuationCase, params: &ExperimentParams) -> Result<FluctuationResult> {
    let dev = deviation_poly(model, case)?;
    let eps_power = dev.keys().map(|c| c.param(EPS)).min();
    let mut terms = Vec::new();
    if let Some(p) = eps_power {
        for (c, v) in dev.iter().filter(|(c, _)| c.param(EPS) == p) {
            let plain = c.with(PARAM0 + EPS, 0);
            let a = plain.n();
            let scale = central_value(&plain.with(0, 0), model, params)?;
            let phase = a as f64 * q_to_f64(v) * scale * params.n_p.powi(a as i32 - 1) * case.epsilon.powi(p as i32);
            terms.push(DeviationTerm { powers: (a, plain.lam(), plain.k()), eps_power: p, coefficient: fmt_q(v), exact: v.clone(), phase });
        }
    }
    terms.sort_by(|x, y| y.phase.abs().partial_cmp(&x.phase.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let phase_deviation = terms.iter().map(|t| t.phase).sum();
    Ok(FluctuationResult { case: case.name.clone(), eps_power, terms, phase_deviation })
}

/// Loop whose deformation signal the fluctuations are compared against.
pub fn signal_loop(model: Model) -> &'static str {
    match model {
        Model::Gamma => "gamma-fourloop",
        Model::Beta => "beta-vertex",
        Model::Mu | Model::None => "mu-vertex",
    }
}

/// Largest eps with |deviation| below the deformation phase at
/// `qg_strength`, inverting the leading power of eps.
pub fn epsilon_threshold(model: Model, case: &FluctuationCase, params: &ExperimentParams) -> Result<f64> {
    let exp = pruned_preset(signal_loop(model), model, params)?;
    let inv = Inversion::from_exponent(&exp)?;
    let signal = (params.qg_strength * inv.sensitivity(params, params.n_p)?).abs();
    let unit = FluctuationCase { epsilon: 1.0, ..case.clone() };
    let r = fluctuation_phase(model, &unit, params)?;
    match r.eps_power {
        Some(p) if r.phase_deviation != 0.0 => Ok((signal / r.phase_deviation.abs()).powf(1.0 / p as f64)),
        _ => Ok(f64::INFINITY),
    }
}

/// `rho = (rho_th + eps |psi><psi|) / (1 + eps)` with `psi = (|0> + |1>)/sqrt 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpurityState {
    pub epsilon: f64,
}

impl ImpurityState {
    pub fn density_matrix(&self, nbar: f64, dim: usize) -> Vec<Vec<f64>> {
        let mut rho = vec![vec![0.0; dim]; dim];
        let r = nbar / (nbar + 1.0);
        for (m, row) in rho.iter_mut().enumerate() {
            row[m] = r.powi(m as i32) / (nbar + 1.0) / (1.0 + self.epsilon);
        }
        let w = self.epsilon / (1.0 + self.epsilon) * 0.5;
        for i in 0..2.min(dim) {
            for j in 0..2.min(dim) {
                rho[i][j] += w;
            }
        }
        rho
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpurityResult {
    /// `alpha_0 / alpha'`
    pub amplitude_ratio: f64,
    /// `Theta_0 - Phi_QM`
    pub offset: f64,
    /// `(Theta_0 - Phi_QM) / sqrt 2` as a polynomial in `N`
    #[serde(skip)]
    pub offset_over_sqrt2: PhasePoly,
    /// first-order correction `eps (alpha_0/alpha') sin(Theta_0 - Phi_QM)`
    pub correction: f64,
    /// phase of `1 + r e^{-i(Theta_0 - Phi_QM)}` without linearization
    pub correction_exact: f64,
    pub qg_phase: f64,
    pub admissible: bool,
}

/// Phase shift from a pure-state admixture in the mechanical preparation.
/// With displacement amplitudes `x_p` (exponent `x_p^* n^p a^dag - x_p n^p a`)
/// the offset is `sum_p p Im(x_p) N^(p-1)` and the amplitude ratio is
/// `exp(|sum_p p x_p N^(p-1)|^2 (nbar - 1/2))`.
pub fn impure_thermal_phase(model: Model, impurity: &ImpurityState, exp: &LoopExponent, params: &ExperimentParams) -> Result<ImpurityResult> {
    let parts = exponent_parts(exp)?;
    if parts.model != model {
        return Err(Error::Config(format!("exponent built for model {}, asked for {}", parts.model.symbol(), model.symbol())));
    }
    let n = params.n_p;
    let mut offset_poly = PhasePoly::default();
    for (&p, m) in &parts.annihilation {
        if p == 0 {
            continue;
        }
        for (c, v) in m {
            if c.qg() > 0 {
                continue;
            }
            // Im(x_p) = -Im(v_p)/sqrt 2 = sqrt 2 * (-Im(v_p)/2)
            offset_poly.add_term(c.with(0, p - 1), -v.im.clone() * qi(p as i64) / qi(2));
        }
    }
    let offset = std::f64::consts::SQRT_2 * offset_poly.eval(model, params, n)?;
    let xs = parts.x_numeric(params)?;
    let mut d = num_complex::Complex64::zero();
    for (p, x) in &xs {
        if *p > 0 {
            d += x * (*p as f64) * n.powi(*p as i32 - 1);
        }
    }
    let amplitude_ratio = (d.norm_sqr() * (params.nbar - 0.5)).exp();
    let r = impurity.epsilon * amplitude_ratio;
    let correction = r * offset.sin();
    let correction_exact = (r * offset.sin()).atan2(1.0 + r * offset.cos());
    let inv = Inversion::from_exponent(exp)?;
    let qg_phase = (params.qg_strength * inv.sensitivity(params, n)?).abs();
    Ok(ImpurityResult {
        amplitude_ratio,
        offset,
        offset_over_sqrt2: offset_poly,
        correction,
        correction_exact,
        qg_phase,
        admissible: correction.abs() < qg_phase,
    })
}

pub fn describe(c: &Central, model: Model) -> String {
    fmt_central(c, model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_notch_preserves_closure() {
        let case = table_case(1).unwrap();
        let lp = case.deformed_loop().unwrap();
        assert!(lp.is_closed());
        assert_eq!(lp.steps.len(), case.base_loop().steps.len() + 6);
    }

    #[test]
    fn impurity_density_has_unit_trace() {
        let rho = ImpurityState { epsilon: 0.3 }.density_matrix(0.0, 4);
        let tr: f64 = (0..4).map(|i| rho[i][i]).sum();
        assert!((tr - 1.0).abs() < 1e-12);
    }
}
