//! Noise models and first-order error propagation onto the deformation
//! strength.

use crate::algebra::{Model, Truncation};
use crate::error::{Error, Result};
use crate::loops::{compose, preset_loop, prune, ComposeOptions, LoopExponent};
use crate::meanfield::{distortion_spread_sq, phase_poly, PhasePoly};
use crate::params::{ExperimentParams, NoiseScheme};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Orders used for the preset loops: sixth-order BCH on the cubic Hamiltonian.
pub const DEFAULT_BCH_ORDER: usize = 6;
pub const DEFAULT_K_ORDER: u8 = 2;

/// Loop and model pairs with a registered inversion.
pub const REGISTERED: [(&str, Model); 6] = [
    ("square", Model::Mu),
    ("square", Model::Gamma),
    ("square", Model::Beta),
    ("gamma-fourloop", Model::Gamma),
    ("beta-vertex", Model::Beta),
    ("mu-vertex", Model::Mu),
];

type CacheKey = (String, Model, usize, u8);
static EXPONENTS: Lazy<Mutex<HashMap<CacheKey, Arc<LoopExponent>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Unpruned exponent of a preset loop, composed once per process.
pub fn preset_exponent(loop_name: &str, model: Model, bch_order: usize, k_order: u8) -> Result<Arc<LoopExponent>> {
    let key = (loop_name.to_string(), model, bch_order, k_order);
    if let Some(e) = EXPONENTS.lock().unwrap().get(&key) {
        return Ok(e.clone());
    }
    let lp = preset_loop(loop_name).ok_or_else(|| Error::Config(format!("unknown loop preset '{}'", loop_name)))?;
    let trunc = Truncation { max_lambda: Truncation::default().max_lambda.max(bch_order as u8), ..Truncation::default() };
    let opts = ComposeOptions::new(model, bch_order, k_order).with_trunc(trunc);
    let e = Arc::new(compose(&lp, &opts)?);
    EXPONENTS.lock().unwrap().insert(key, e.clone());
    Ok(e)
}

/// Preset exponent pruned at the minimum phase uncertainty of `params`.
pub fn pruned_preset(loop_name: &str, model: Model, params: &ExperimentParams) -> Result<LoopExponent> {
    let e = preset_exponent(loop_name, model, DEFAULT_BCH_ORDER, DEFAULT_K_ORDER)?;
    Ok(prune(&e, params, params.min_phase_uncertainty()))
}

/// `Delta N_p` for the configured scheme.
///
/// Quantum scheme: shot noise of the (possibly squeezed) state over `R`
/// repetitions. Classical scheme: drift `eps N_p`, reduced by the same
/// squeezing factor as the number fluctuations.
pub fn photon_noise(params: &ExperimentParams) -> f64 {
    let squeezed = squeezed_number_variance(params.n_p, params.r);
    match params.scheme {
        NoiseScheme::QuantumNoise => (squeezed / params.repetitions).sqrt(),
        NoiseScheme::ClassicalNoise => params.epsilon * params.n_p * (squeezed / params.n_p).sqrt(),
    }
}

/// `1/2 sinh^2 2r + |alpha|^2 e^{-2r}` with `|alpha|^2 = N_p - sinh^2 r`.
fn squeezed_number_variance(n_p: f64, r: f64) -> f64 {
    let a2 = n_p - r.sinh().powi(2);
    0.5 * (2.0 * r).sinh().powi(2) + a2 * (-2.0 * r).exp()
}

/// `e^{2r} / (4 (N_p - sinh^2 r))`
fn squeezed_phase_variance(n_p: f64, r: f64) -> f64 {
    (2.0 * r).exp() / (4.0 * (n_p - r.sinh().powi(2)))
}

/// `Delta Phi_T`: squeezed readout spread plus state distortion.
pub fn phase_noise(params: &ExperimentParams, exp: &LoopExponent) -> Result<f64> {
    let distortion = distortion_spread_sq(exp, params)?;
    Ok((squeezed_phase_variance(params.n_p, params.r) + distortion).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedMoments {
    pub n_p: f64,
    pub delta_np: f64,
    pub delta_phi: f64,
}

/// Moments of `D(alpha) S(r) |0>` for arbitrary displacement phase.
pub fn squeezed_moments(alpha: Complex64, r: f64) -> SqueezedMoments {
    let a2 = alpha.norm_sqr();
    let phi = alpha.arg();
    let s = r.sinh();
    let var = 0.5 * (2.0 * r).sinh().powi(2) + a2 * ((2.0 * r).exp() * phi.sin().powi(2) + (-2.0 * r).exp() * phi.cos().powi(2));
    SqueezedMoments { n_p: a2 + s * s, delta_np: var.sqrt(), delta_phi: r.exp() / (2.0 * alpha.norm()) }
}

/// `Phi_T(N) = param * q(N) + Phi_QM(N)`, solved for the parameter.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub model: Model,
    /// deformation part of the phase with the strength symbol stripped
    pub qg: PhasePoly,
    pub qm: PhasePoly,
}

impl Inversion {
    pub fn from_exponent(exp: &LoopExponent) -> Result<Inversion> {
        let model = exp.exponent.model();
        let poly = phase_poly(exp)?;
        let qg = poly.qg_part();
        if qg.is_zero() {
            return Err(Error::UnknownLoopInversion { loop_name: exp.loop_name.clone(), model: model.symbol().into() });
        }
        Ok(Inversion { model, qg, qm: poly.qm_part() })
    }

    /// `q(N)` per unit dimensionless strength.
    pub fn sensitivity(&self, params: &ExperimentParams, n: f64) -> Result<f64> {
        let unit = ExperimentParams { qg_strength: 1.0, ..params.clone() };
        self.qg.eval(self.model, &unit, n)
    }

    pub fn forward(&self, params: &ExperimentParams, strength: f64, n: f64) -> Result<f64> {
        Ok(strength * self.sensitivity(params, n)? + self.qm.eval(self.model, params, n)?)
    }

    pub fn invert(&self, params: &ExperimentParams, phi: f64, n: f64) -> Result<f64> {
        Ok((phi - self.qm.eval(self.model, params, n)?) / self.sensitivity(params, n)?)
    }

    /// `(d param / d Phi, d param / d N)` at `param = 0`.
    pub fn partials(&self, params: &ExperimentParams, n: f64) -> Result<(f64, f64)> {
        let q = self.sensitivity(params, n)?;
        let dqm = self.qm.derivative().eval(self.model, params, n)?;
        Ok((1.0 / q, -dqm / q))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub loop_name: String,
    pub model: Model,
    pub scheme: NoiseScheme,
    pub r: f64,
    pub bch_order: usize,
    pub k_order: u8,
    pub delta_phi: f64,
    pub delta_np: f64,
    pub d_param_d_phi: f64,
    pub d_param_d_np: f64,
    pub variance_per_run: f64,
    /// `ceil(variance / target)`; stored as f64 since values reach 1e25
    pub n_runs_unit_precision: f64,
}

pub fn check_registered(model: Model, loop_name: &str) -> Result<()> {
    if REGISTERED.iter().any(|(l, m)| *l == loop_name && *m == model) {
        Ok(())
    } else {
        Err(Error::UnknownLoopInversion { loop_name: loop_name.into(), model: model.symbol().into() })
    }
}

/// Propagates `(Delta Phi_T, Delta N_p)` into the variance of the strength
/// at the null point, phase and intensity errors uncorrelated.
pub fn propagate(model: Model, loop_name: &str, params: &ExperimentParams) -> Result<PrecisionReport> {
    check_registered(model, loop_name)?;
    params.validate().map_err(Error::Config)?;
    let exp = pruned_preset(loop_name, model, params)?;
    propagate_exponent(&exp, params, 1.0)
}

/// Same as [`propagate`] for an arbitrary splittable exponent.
pub fn propagate_exponent(exp: &LoopExponent, params: &ExperimentParams, target: f64) -> Result<PrecisionReport> {
    let inv = Inversion::from_exponent(exp)?;
    let (dphi, dn) = inv.partials(params, params.n_p)?;
    let delta_phi = phase_noise(params, exp)?;
    let delta_np = photon_noise(params);
    let variance = (dphi * delta_phi).powi(2) + (dn * delta_np).powi(2);
    Ok(PrecisionReport {
        loop_name: exp.loop_name.clone(),
        model: inv.model,
        scheme: params.scheme,
        r: params.r,
        bch_order: exp.provenance.bch_order,
        k_order: exp.provenance.k_order,
        delta_phi,
        delta_np,
        d_param_d_phi: dphi,
        d_param_d_np: dn,
        variance_per_run: variance,
        n_runs_unit_precision: (variance / target).ceil(),
    })
}

/// Required runs as a function of the squeezing parameter.
pub fn nr_vs_squeezing(model: Model, loop_name: &str, params: &ExperimentParams, r_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_registered(model, loop_name)?;
    let exp = pruned_preset(loop_name, model, params)?;
    r_grid
        .iter()
        .map(|&r| {
            let p = params.with_r(r);
            p.validate().map_err(Error::Config)?;
            Ok((r, propagate_exponent(&exp, &p, 1.0)?.n_runs_unit_precision))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_moments() {
        let m = squeezed_moments(Complex64::new(3.0, 0.0), 0.0);
        assert!((m.n_p - 9.0).abs() < 1e-12);
        assert!((m.delta_np - 3.0).abs() < 1e-12);
        assert!((m.delta_phi - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn shot_and_drift_noise() {
        let p = ExperimentParams { n_p: 1e8, ..Default::default() };
        assert!((photon_noise(&p) - 1e4).abs() < 1e-8);
        let c = ExperimentParams { n_p: 5e10, epsilon: 1e-4, scheme: NoiseScheme::ClassicalNoise, ..Default::default() };
        assert!((photon_noise(&c) / 5e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_noise_large_np() {
        let p = ExperimentParams { n_p: 1e12, r: 1.2, ..Default::default() };
        let approx = 1e6 * (-1.2f64).exp();
        assert!((photon_noise(&p) / approx - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unregistered_pair_is_rejected() {
        let p = ExperimentParams::default();
        assert!(matches!(propagate(Model::Beta, "gamma-fourloop", &p), Err(Error::UnknownLoopInversion { .. })));
    }
}
