//! Physical parameters, derived couplings and named presets.

use crate::algebra::Model;
use serde::{Deserialize, Serialize};

/// CODATA values used everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
    pub planck_mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.054571817e-34, c: 2.99792458e8, planck_mass: 2.176434e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScheme {
    QuantumNoise,
    ClassicalNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    pub finesse: f64,
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega_m: f64,
    /// m
    pub lambda_l: f64,
    /// m
    pub cavity_length: f64,
    pub n_p: f64,
    pub nbar: f64,
    pub scheme: NoiseScheme,
    /// relative intensity drift of the classical scheme
    pub epsilon: f64,
    /// squeezing parameter, 0 = coherent light
    pub r: f64,
    /// photon-number measurement repetitions (quantum scheme)
    pub repetitions: f64,
    /// planned number of runs; sets the minimum phase uncertainty
    pub n_runs: f64,
    /// dimensionless deformation strength (beta0, gamma0 or mu0)
    pub qg_strength: f64,
    pub constants: PhysicalConstants,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            finesse: 1e5,
            mass: 1e-11,
            omega_m: 2.0 * std::f64::consts::PI * 1e5,
            lambda_l: 1064e-9,
            cavity_length: 4e-6,
            n_p: 1e8,
            nbar: 0.0,
            scheme: NoiseScheme::QuantumNoise,
            epsilon: 1e-4,
            r: 0.0,
            repetitions: 1.0,
            n_runs: 1.0,
            qg_strength: 1.0,
            constants: PhysicalConstants::default(),
        }
    }
}

impl ExperimentParams {
    /// `sqrt(hbar / (m omega))`
    pub fn x0(&self) -> f64 {
        (self.constants.hbar / (self.mass * self.omega_m)).sqrt()
    }
    pub fn lambda0(&self) -> f64 {
        4.0 * self.finesse * self.x0() / self.lambda_l
    }
    pub fn k(&self) -> f64 {
        self.x0() / self.cavity_length
    }
    /// `1 / (2 sqrt(N_p N_r))`
    pub fn min_phase_uncertainty(&self) -> f64 {
        0.5 / (self.n_p * self.n_runs).sqrt()
    }
    pub fn constants_for(&self) -> ModelConstants {
        ModelConstants::new(self)
    }
    /// Dimensionless deformation strength entering the commutator.
    pub fn qg_value(&self, model: Model) -> f64 {
        self.qg_strength * self.constants_for().unit(model)
    }
    pub fn with_scheme(&self, scheme: NoiseScheme) -> Self {
        ExperimentParams { scheme, ..self.clone() }
    }
    pub fn with_r(&self, r: f64) -> Self {
        ExperimentParams { r, ..self.clone() }
    }
    /// Adjusts finesse and cavity length so that `lambda0` and `k` take the
    /// given values; `k = 0` means an infinitely long cavity.
    pub fn with_couplings(&self, lambda0: f64, k: f64) -> Self {
        let x0 = self.x0();
        ExperimentParams {
            finesse: lambda0 * self.lambda_l / (4.0 * x0),
            cavity_length: if k == 0.0 { f64::INFINITY } else { x0 / k },
            ..self.clone()
        }
    }
    /// Sets the dimensionless strength so that the commutator coefficient equals `value`.
    pub fn with_qg_value(&self, model: Model, value: f64) -> Self {
        let unit = self.constants_for().unit(model);
        ExperimentParams { qg_strength: if unit == 0.0 { 0.0 } else { value / unit }, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = [
            ("finesse", self.finesse),
            ("mass", self.mass),
            ("omega_m", self.omega_m),
            ("lambda_l", self.lambda_l),
            ("n_p", self.n_p),
            ("repetitions", self.repetitions),
            ("n_runs", self.n_runs),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{} must be positive, got {}", name, v));
            }
        }
        if !(self.cavity_length > 0.0) {
            return Err(format!("cavity_length must be positive, got {}", self.cavity_length));
        }
        if !(self.nbar >= 0.0) || !(self.epsilon >= 0.0) {
            return Err("nbar and epsilon must be non-negative".into());
        }
        if self.r.sinh().powi(2) >= self.n_p {
            return Err(format!("sinh^2 r = {:e} must stay below N_p", self.r.sinh().powi(2)));
        }
        Ok(())
    }
}

/// Conversion factors from the dimensionless strengths to the commutator
/// coefficients: `beta = beta0 * hbar m omega / (M_p c)`,
/// `gamma = gamma0 * sqrt(hbar m omega) / (M_p c)`, `mu = mu0 * m^2 / M_p^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub kappa_gamma: f64,
    /// `3/2` multiple of `kappa_gamma`, the prefactor of the square-loop gamma phase
    pub kappa_gamma_square: f64,
    pub kappa_beta: f64,
    pub kappa_mu: f64,
}

impl ModelConstants {
    pub fn new(p: &ExperimentParams) -> Self {
        let pc = p.constants;
        let hmw = pc.hbar * p.mass * p.omega_m;
        let kappa_gamma = hmw.sqrt() / (pc.planck_mass * pc.c);
        ModelConstants {
            kappa_gamma,
            kappa_gamma_square: 1.5 * kappa_gamma,
            kappa_beta: hmw / (pc.planck_mass * pc.c),
            kappa_mu: (p.mass / pc.planck_mass).powi(2),
        }
    }
    pub fn unit(&self, model: Model) -> f64 {
        match model {
            Model::None => 0.0,
            Model::Beta => self.kappa_beta,
            Model::Gamma => self.kappa_gamma,
            Model::Mu => self.kappa_mu,
        }
    }
}

/// Named parameter sets.
pub fn preset(name: &str) -> Option<(Model, ExperimentParams)> {
    let base = ExperimentParams::default();
    match name {
        "pikovski-mu" => Some((
            Model::Mu,
            ExperimentParams { finesse: 1e5, mass: 1e-11, lambda_l: 1064e-9, n_p: 1e8, n_runs: 1.0, ..base },
        )),
        "pikovski-gamma" => Some((
            Model::Gamma,
            ExperimentParams { finesse: 2e5, mass: 1e-9, lambda_l: 1064e-9, n_p: 5e10, n_runs: 1e5, ..base },
        )),
        "pikovski-beta" => Some((
            Model::Beta,
            ExperimentParams { finesse: 4e5, mass: 1e-7, lambda_l: 532e-9, n_p: 1e14, n_runs: 1e6, ..base },
        )),
        "improved-mu" => Some((
            Model::Mu,
            ExperimentParams { finesse: 1e5, mass: 1e-10, lambda_l: 1064e-9, n_p: 1e9, n_runs: 1.0, ..base },
        )),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["pikovski-mu", "pikovski-gamma", "pikovski-beta", "improved-mu"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_couplings_are_positive() {
        for name in PRESET_NAMES {
            let (_, p) = preset(name).unwrap();
            assert!(p.x0() > 0.0 && p.lambda0() > 0.0 && p.k() > 0.0);
            p.validate().unwrap();
        }
    }

    #[test]
    fn min_uncertainty_matches_table_one() {
        let (_, p) = preset("pikovski-gamma").unwrap();
        let v = p.min_phase_uncertainty();
        assert!((v / 1e-8 - 1.0).abs() < 0.5, "{}", v);
    }
}
