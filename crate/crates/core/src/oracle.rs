//! Brute-force truncated Fock-space simulation for desk-scale checks.
//!
//! The pulse Hamiltonians commute with the photon number, so the joint
//! unitary is block diagonal: `U = sum_n |n><n| (x) U_n`. Each block acts on a
//! dense mechanical space of dimension `dim_mech`.

use crate::algebra::coeff::{q, Q};
use crate::algebra::{Model, Truncation};
use crate::error::{Error, Result};
use crate::loops::{compose, max_abs_scale, prune, scale_f64, Axis, ComposeOptions, LoopExponent, LoopSpec, PulseStep};
use crate::meanfield::{exact_sum, wrap_phase, MeanFieldResult, Method, DEFAULT_WINDOW_SIGMAS};
use crate::params::ExperimentParams;
use crate::precision::SqueezedMoments;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// Thermal population left out of the evolved mechanical levels.
pub const THERMAL_MASS_CUT: f64 = 1e-12;
/// Photon numbers with smaller coherent weight are skipped.
pub const PHOTON_WEIGHT_CUT: f64 = 1e-20;

/// Population allowed in the top two levels of a truncated space.
pub const TAIL_TOLERANCE: f64 = 1e-8;
/// Looser bound for evolved mechanical columns: the first-order beta
/// generators leave a flat ~1e-8 residue at the top of any cutoff.
pub const MECH_TAIL_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    pub dim_light: usize,
    pub dim_mech: usize,
    pub model: Model,
    /// numeric commutator coefficient (beta, gamma or mu)
    pub strength: f64,
    pub lambda0: f64,
    pub k: f64,
    pub k_order: u8,
}

impl FockConfig {
    pub fn new(dim_light: usize, dim_mech: usize, lambda0: f64) -> Self {
        FockConfig { dim_light, dim_mech, model: Model::None, strength: 0.0, lambda0, k: 0.0, k_order: 0 }
    }
    pub fn with_model(mut self, model: Model, strength: f64) -> Self {
        self.model = model;
        self.strength = strength;
        self
    }
    pub fn with_k(mut self, k: f64, k_order: u8) -> Self {
        self.k = k;
        self.k_order = k_order;
        self
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) })
}

/// `(x, p)` with the first-order deformed representation of the model.
pub fn quadratures(dim: usize, model: Model, strength: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = annihilation(dim);
    let ad = a.adjoint();
    let s2 = std::f64::consts::SQRT_2;
    let x0 = (&a + &ad) / c(s2);
    let p0 = (&a - &ad) / Complex64::new(0.0, s2);
    match model {
        Model::None => (x0, p0),
        Model::Beta => {
            let p3 = &p0 * &p0 * &p0;
            (x0, &p0 + p3 * c(strength / 3.0))
        }
        Model::Gamma => {
            let p2 = &p0 * &p0;
            (x0, &p0 - p2 * c(strength / 2.0))
        }
        Model::Mu => (x0 * c(1.0 + strength), p0),
    }
}

/// `q - k q^2 + k^2 q^3 - ...` up to `k^k_order`.
fn pulse_shape(q: &DMatrix<Complex64>, k: f64, k_order: u8) -> DMatrix<Complex64> {
    let mut out = q.clone();
    let mut pow = q.clone();
    for s in 1..=k_order {
        pow = &pow * q;
        out += &pow * c((-k).powi(s as i32));
    }
    out
}

/// `x0` in the Fock basis (real symmetric).
fn position_real(dim: usize) -> DMatrix<f64> {
    let s2 = std::f64::consts::SQRT_2;
    DMatrix::from_fn(dim, dim, |i, j| if i + 1 == j || j + 1 == i { (i.max(j) as f64).sqrt() / s2 } else { 0.0 })
}

/// Real pulse shape `q - k q^2 + ...` for a real symmetric `q`.
fn pulse_shape_real(q: &DMatrix<f64>, k: f64, k_order: u8) -> DMatrix<f64> {
    let mut out = q.clone();
    let mut pow = q.clone();
    for s in 1..=k_order {
        pow = &pow * q;
        out += &pow * (-k).powi(s as i32);
    }
    out
}

/// Spectral form `h = F W diag(e) W^T F^dag` of a pulse shape, with `W` real
/// orthogonal and `F = diag(i^n)` for the P axis (identity for X). With
/// `F x0 F^dag = p0` both shapes become real symmetric matrices, so the
/// evolution runs on real products.
struct Spectral {
    w: DMatrix<f64>,
    e: DVector<f64>,
    rotate: bool,
}

/// `i^n`
fn quarter_turn(n: usize) -> Complex64 {
    [c(1.0), Complex64::new(0.0, 1.0), c(-1.0), Complex64::new(0.0, -1.0)][n % 4]
}

impl Spectral {
    fn new(h: DMatrix<f64>, rotate: bool) -> Self {
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        Spectral { w: eig.eigenvectors, e: eig.eigenvalues, rotate }
    }

    /// `exp(i t h)` applied to every column of `re + i im`.
    fn apply_block(&self, t: f64, re: &mut DMatrix<f64>, im: &mut DMatrix<f64>) {
        if self.rotate {
            rotate_rows(re, im, false);
        }
        let mut a = self.w.tr_mul(re);
        let mut b = self.w.tr_mul(im);
        for (i, ei) in self.e.iter().enumerate() {
            let (sn, cs) = (t * ei).sin_cos();
            for j in 0..a.ncols() {
                let (x, y) = (a[(i, j)], b[(i, j)]);
                a[(i, j)] = cs * x - sn * y;
                b[(i, j)] = sn * x + cs * y;
            }
        }
        *re = &self.w * a;
        *im = &self.w * b;
        if self.rotate {
            rotate_rows(re, im, true);
        }
    }

    fn matrix(&self, t: f64) -> DMatrix<Complex64> {
        let dim = self.e.len();
        let w = self.w.map(c);
        let d = DMatrix::from_diagonal(&self.e.map(|ei| Complex64::from_polar(1.0, t * ei)));
        let mut u = &w * d * w.transpose();
        if self.rotate {
            for i in 0..dim {
                for j in 0..dim {
                    u[(i, j)] *= quarter_turn(i) * quarter_turn(j).conj();
                }
            }
        }
        u
    }
}

/// Multiplies row `n` by `i^n` (`forward`) or `i^-n`.
fn rotate_rows(re: &mut DMatrix<f64>, im: &mut DMatrix<f64>, forward: bool) {
    for n in 0..re.nrows() {
        let f = if forward { quarter_turn(n) } else { quarter_turn(n).conj() };
        for j in 0..re.ncols() {
            let z = Complex64::new(re[(n, j)], im[(n, j)]) * f;
            re[(n, j)] = z.re;
            im[(n, j)] = z.im;
        }
    }
}

struct Shapes {
    x: Spectral,
    p: Spectral,
}

impl Shapes {
    fn new(cfg: &FockConfig) -> Self {
        let x0 = position_real(cfg.dim_mech);
        let g = cfg.strength;
        // P-axis deformation written on x0; F maps it onto p0
        let (qx, qp) = match cfg.model {
            Model::None => (x0.clone(), x0.clone()),
            Model::Beta => (x0.clone(), &x0 + &x0 * &x0 * &x0 * (g / 3.0)),
            Model::Gamma => (x0.clone(), &x0 - &x0 * &x0 * (g / 2.0)),
            Model::Mu => (&x0 * (1.0 + g), x0.clone()),
        };
        Shapes {
            x: Spectral::new(pulse_shape_real(&qx, cfg.k, cfg.k_order), false),
            p: Spectral::new(pulse_shape_real(&qp, cfg.k, cfg.k_order), true),
        }
    }
    fn get(&self, axis: Axis) -> &Spectral {
        match axis {
            Axis::X => &self.x,
            Axis::P => &self.p,
        }
    }
}

/// Mechanical block `U_n` as a dense matrix.
pub fn loop_block(lp: &LoopSpec, cfg: &FockConfig, n: usize) -> DMatrix<Complex64> {
    let shapes = Shapes::new(cfg);
    let mut u = DMatrix::identity(cfg.dim_mech, cfg.dim_mech);
    for s in &lp.steps {
        let t = scale_f64(s) * n as f64 * cfg.lambda0;
        u = &u * shapes.get(s.axis).matrix(t);
    }
    u
}

/// Same block with each step exponentiated by Pade scaling and squaring.
pub fn loop_block_pade(lp: &LoopSpec, cfg: &FockConfig, n: usize) -> DMatrix<Complex64> {
    let (x, p) = quadratures(cfg.dim_mech, cfg.model, cfg.strength);
    let hx = pulse_shape(&x, cfg.k, cfg.k_order);
    let hp = pulse_shape(&p, cfg.k, cfg.k_order);
    let mut u = DMatrix::identity(cfg.dim_mech, cfg.dim_mech);
    for s in &lp.steps {
        let h = if s.axis == Axis::X { &hx } else { &hp };
        let t = scale_f64(s) * n as f64 * cfg.lambda0;
        u = &u * (h * Complex64::new(0.0, t)).exp();
    }
    u
}

/// `max |U^dag U - 1|`
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let d = u.adjoint() * u - DMatrix::identity(u.nrows(), u.ncols());
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn thermal_weights(nbar: f64, dim: usize) -> Result<Vec<f64>> {
    if nbar == 0.0 {
        return Ok(vec![1.0]);
    }
    let r = nbar / (nbar + 1.0);
    let mut w = Vec::new();
    let mut pm = 1.0 / (nbar + 1.0);
    let mut acc = 0.0;
    while acc < 1.0 - THERMAL_MASS_CUT && w.len() < dim {
        w.push(pm);
        acc += pm;
        pm *= r;
    }
    let tail: f64 = w.iter().skip(dim.saturating_sub(2)).sum::<f64>() + (1.0 - acc).max(0.0);
    if w.len() >= dim.saturating_sub(1) && tail > TAIL_TOLERANCE {
        return Err(Error::CutoffExceeded { dim, tail });
    }
    Ok(w)
}

/// `<a> = Tr(U^dag a U |alpha><alpha| (x) rho_th)` by direct evolution.
pub fn simulate_loop(lp: &LoopSpec, cfg: &FockConfig, alpha: Complex64, nbar: f64) -> Result<MeanFieldResult> {
    if cfg.dim_light < 2 || cfg.dim_mech < 2 {
        return Err(Error::Config("Fock dimensions must be at least 2".into()));
    }
    let shapes = Shapes::new(cfg);
    let weights = thermal_weights(nbar, cfg.dim_mech)?;

    // coherent amplitudes, computed in log space
    let a2 = alpha.norm_sqr();
    let amp: Vec<Complex64> = (0..cfg.dim_light)
        .map(|n| {
            if alpha.norm() == 0.0 {
                return if n == 0 { c(1.0) } else { c(0.0) };
            }
            let logm = -0.5 * a2 + n as f64 * alpha.norm().ln() - 0.5 * statrs::function::gamma::ln_gamma(n as f64 + 1.0);
            Complex64::from_polar(logm.exp(), n as f64 * alpha.arg())
        })
        .collect();
    let light_tail: f64 = amp.iter().skip(cfg.dim_light - 2).map(|z| z.norm_sqr()).sum::<f64>()
        + (1.0 - amp.iter().map(|z| z.norm_sqr()).sum::<f64>()).max(0.0);
    if light_tail > TAIL_TOLERANCE {
        return Err(Error::CutoffExceeded { dim: cfg.dim_light, tail: light_tail });
    }

    let levels = weights.len();
    // columns: thermal basis states |m>, evolved through U_n
    let evolve = |n: usize| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut re = DMatrix::from_fn(cfg.dim_mech, levels, |i, j| if i == j { 1.0 } else { 0.0 });
        let mut im = DMatrix::zeros(cfg.dim_mech, levels);
        for s in lp.steps.iter().rev() {
            let t = scale_f64(s) * n as f64 * cfg.lambda0;
            shapes.get(s.axis).apply_block(t, &mut re, &mut im);
            if amp[n].norm_sqr() > 1e-12 {
                let top = cfg.dim_mech.saturating_sub(2);
                for j in 0..levels {
                    let tail: f64 = (top..cfg.dim_mech).map(|i| re[(i, j)].powi(2) + im[(i, j)].powi(2)).sum();
                    if tail > MECH_TAIL_TOLERANCE {
                        return Err(Error::CutoffExceeded { dim: cfg.dim_mech, tail });
                    }
                }
            }
        }
        Ok((re, im))
    };

    let live: Vec<usize> = (0..cfg.dim_light).filter(|&n| amp[n].norm_sqr() >= PHOTON_WEIGHT_CUT).collect();
    let (lo, hi) = (live.first().copied().unwrap_or(0), live.last().copied().unwrap_or(0).min(cfg.dim_light - 1));
    let mut mean = c(0.0);
    let mut prev = evolve(lo)?;
    for n in lo..hi {
        let next = evolve(n + 1)?;
        let mut overlap = c(0.0);
        for (m, w) in weights.iter().enumerate() {
            // <prev_m | next_m>
            let (pr, pi) = (prev.0.column(m), prev.1.column(m));
            let (nr, ni) = (next.0.column(m), next.1.column(m));
            overlap += Complex64::new(pr.dot(&nr) + pi.dot(&ni), pr.dot(&ni) - pi.dot(&nr)) * *w;
        }
        mean += amp[n].conj() * amp[n + 1] * ((n + 1) as f64).sqrt() * overlap;
        prev = next;
    }
    // <a> = |alpha'| e^{-i Phi} relative to the input phase
    let phase = if alpha.norm() == 0.0 { 0.0 } else { -(mean / alpha).arg() };
    Ok(MeanFieldResult {
        amplitude: mean.norm(),
        phase,
        principal_phase: wrap_phase(phase),
        method: Method::FockOracle,
        window: Some((0, cfg.dim_light as u64 - 1)),
    })
}

/// Largest entry of `[x, p] - i(1 + correction)` over the lower 80% of
/// levels, with the correction built from the undeformed quadratures
/// (first order in the strength).
pub fn commutator_check(cfg: &FockConfig) -> f64 {
    let dim = cfg.dim_mech;
    let (x, p) = quadratures(dim, cfg.model, cfg.strength);
    let (_, p0) = quadratures(dim, Model::None, 0.0);
    let id: DMatrix<Complex64> = DMatrix::identity(dim, dim);
    let corr = match cfg.model {
        Model::None => DMatrix::zeros(dim, dim),
        Model::Beta => &p0 * &p0 * c(cfg.strength),
        Model::Gamma => &p0 * c(-cfg.strength),
        Model::Mu => &id * c(cfg.strength),
    };
    let target = (id + corr) * Complex64::new(0.0, 1.0);
    let comm = &x * &p - &p * &x;
    let bulk = (dim as f64 * 0.8).floor() as usize;
    let mut dev = 0.0f64;
    for i in 0..bulk {
        for j in 0..bulk {
            dev = dev.max((comm[(i, j)] - target[(i, j)]).norm());
        }
    }
    dev
}

/// Weighted tail `dim^2 * (top two populations)` allowed for moment checks;
/// second moments weight level `n` by `n^2`.
pub const MOMENT_TAIL_TOLERANCE: f64 = 1e-12;

/// `exp(A) v` for a sparse generator, by Taylor series over unit-norm slices.
fn expm_action(apply: impl Fn(&[Complex64]) -> Vec<Complex64>, norm: f64, v: Vec<Complex64>) -> Vec<Complex64> {
    let slices = norm.ceil().max(1.0) as usize;
    let inv = 1.0 / slices as f64;
    let mut out = v;
    for _ in 0..slices {
        let mut term = out.clone();
        let mut acc = out.clone();
        for j in 1..200 {
            term = apply(&term).into_iter().map(|z| z * (inv / j as f64)).collect();
            let size: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if size < 1e-18 {
                break;
            }
        }
        out = acc;
    }
    out
}

fn lower(v: &[Complex64]) -> Vec<Complex64> {
    (0..v.len()).map(|n| if n + 1 < v.len() { v[n + 1] * ((n + 1) as f64).sqrt() } else { c(0.0) }).collect()
}

fn raise(v: &[Complex64]) -> Vec<Complex64> {
    (0..v.len()).map(|n| if n > 0 { v[n - 1] * (n as f64).sqrt() } else { c(0.0) }).collect()
}

/// Moments of `D(alpha) S(r)|0>` evolved numerically in a truncated Fock space.
pub fn squeezed_state_moments(alpha: Complex64, r: f64, dim: usize) -> Result<SqueezedMoments> {
    if dim < 4 {
        return Err(Error::Config("Fock dimension must be at least 4".into()));
    }
    let mut vac = vec![c(0.0); dim];
    vac[0] = c(1.0);
    // S(r) = exp(r/2 (a^2 - a^dag^2))
    let squeeze = |v: &[Complex64]| {
        let (aa, dd) = (lower(&lower(v)), raise(&raise(v)));
        aa.iter().zip(&dd).map(|(x, y)| (x - y) * (0.5 * r)).collect()
    };
    let psi = expm_action(squeeze, r.abs() * dim as f64, vac);
    let displace = |v: &[Complex64]| {
        let (a, d) = (lower(v), raise(v));
        a.iter().zip(&d).map(|(x, y)| y * alpha - x * alpha.conj()).collect()
    };
    let psi = expm_action(displace, 2.0 * alpha.norm() * (dim as f64).sqrt(), psi);
    let tail = psi[dim - 2..].iter().map(|z| z.norm_sqr()).sum::<f64>() * (dim * dim) as f64;
    if tail > MOMENT_TAIL_TOLERANCE {
        return Err(Error::CutoffExceeded { dim, tail });
    }
    let pop = |n: usize| psi[n].norm_sqr();
    let n1: f64 = (0..dim).map(|n| n as f64 * pop(n)).sum();
    let n2: f64 = (0..dim).map(|n| (n * n) as f64 * pop(n)).sum();
    let mean_a: Complex64 = psi.iter().zip(lower(&psi)).map(|(x, y)| x.conj() * y).sum();
    let mean_aa: Complex64 = psi.iter().zip(lower(&lower(&psi))).map(|(x, y)| x.conj() * y).sum();
    // quadrature transverse to the mean field, p = (a e^{-i th} - h.c.) / 2i
    let rot = Complex64::from_polar(1.0, -mean_a.arg());
    let p1 = (rot * mean_a).im;
    let p2 = 0.25 * (2.0 * n1 + 1.0 - 2.0 * (rot * rot * mean_aa).re);
    Ok(SqueezedMoments { n_p: n1, delta_np: (n2 - n1 * n1).max(0.0).sqrt(), delta_phi: (p2 - p1 * p1).max(0.0).sqrt() / mean_a.norm() })
}

/// Oracle against exact-sum phase for one loop at desk-scale parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub loop_name: String,
    pub model: Model,
    pub bch_order: usize,
    pub k_order: u8,
    pub dim_light: usize,
    pub dim_mech: usize,
    pub oracle_phase: f64,
    pub exact_sum_phase: f64,
    /// wrapped `oracle - exact_sum`
    pub difference: f64,
    pub oracle_amplitude: f64,
    pub exact_sum_amplitude: f64,
    /// pruned magnitudes plus the first neglected coupling order
    pub error_bound: f64,
}

impl OracleComparison {
    pub fn within_bound(&self) -> bool {
        self.difference.abs() <= self.error_bound
    }
}

/// Roundoff allowance added to every bound.
pub const NUMERIC_FLOOR: f64 = 1e-9;
/// Mechanical dimension grows by half up to this size on `CutoffExceeded`.
pub const MAX_DIM_MECH: usize = 1024;

/// Truncation error estimate for a composed loop: the terms the pruning
/// dropped, scored at `N + 3 sqrt N + 1` to cover photon-number spread, the
/// next BCH order `k^(m-2) lambda0^m N^(m-1)` at `m = bch_order + 1` (scaled
/// by the loop size), and a second-order deformation term.
pub fn truncation_bound(full: &LoopExponent, lp: &LoopSpec, params: &ExperimentParams) -> f64 {
    let n = params.n_p;
    let n_eff = n + 3.0 * n.sqrt() + 1.0;
    let spread = ExperimentParams { n_p: n_eff, ..params.clone() };
    let pruned: f64 = prune(full, &spread, f64::MIN_POSITIVE).provenance.pruned.iter().map(|p| p.magnitude).sum();
    let m = full.provenance.bch_order as i32 + 1;
    let (k, l) = (params.k(), params.lambda0());
    let size = max_abs_scale(lp) * lp.steps.len() as f64;
    let next = k.powi(m - 2) * (size * l).powi(m) * n_eff.powi(m - 1);
    let g = params.qg_value(full.exponent.model());
    let second = g * g * (size * l).powi(2) * n_eff.powi(3).max(1.0);
    pruned + next + second + NUMERIC_FLOOR
}

/// Largest photon number with coherent weight above the cut.
fn top_photon_number(n_mean: f64, dim_light: usize) -> usize {
    let cut = PHOTON_WEIGHT_CUT.ln();
    (0..dim_light)
        .rev()
        .find(|&k| -n_mean + k as f64 * n_mean.max(1e-300).ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0) >= cut)
        .unwrap_or(0)
}

/// Mechanical cutoff covering the largest displacement of the loop at the
/// top photon number plus the thermal spread, rounded up to a multiple of 16.
pub fn mech_dim_estimate(lp: &LoopSpec, lambda0: f64, n_top: usize, nbar: f64) -> usize {
    let (mut x, mut p, mut far) = (0.0f64, 0.0f64, 0.0f64);
    for s in &lp.steps {
        match s.axis {
            Axis::X => p += scale_f64(s),
            Axis::P => x += scale_f64(s),
        }
        far = far.max(x.hypot(p));
    }
    let radius = lambda0 * n_top as f64 * far / std::f64::consts::SQRT_2;
    let levels = if nbar > 0.0 { THERMAL_MASS_CUT.ln() / (nbar / (nbar + 1.0)).ln() } else { 1.0 };
    let d = (radius + levels.sqrt() + 3.0).powi(2);
    ((d / 16.0).ceil() as usize * 16).max(32)
}

/// Runs the Fock oracle and the exact photon-number sum on the same loop.
/// The light cutoff is `N + 10 sqrt N + 12`; the mechanical cutoff starts at
/// the larger of `dim_mech` and a displacement estimate, and grows until the
/// tail check passes.
pub fn oracle_comparison(
    lp: &LoopSpec,
    model: Model,
    params: &ExperimentParams,
    bch_order: usize,
    k_order: u8,
    dim_mech: usize,
) -> Result<OracleComparison> {
    params.validate().map_err(Error::Config)?;
    let trunc = Truncation { max_lambda: Truncation::default().max_lambda.max(bch_order as u8), ..Truncation::default() };
    let full = compose(lp, &ComposeOptions::new(model, bch_order, k_order).with_trunc(trunc))?;
    // positive threshold: drop only the unsplittable words
    let exp = prune(&full, params, f64::MIN_POSITIVE);
    let ex = exact_sum(&exp, params, DEFAULT_WINDOW_SIGMAS)?;
    let n = params.n_p;
    let dim_light = (n + 10.0 * n.sqrt()).ceil() as usize + 12;
    let alpha = Complex64::new(n.sqrt(), 0.0);
    let k = if params.k().is_finite() { params.k() } else { 0.0 };
    let mut dm = dim_mech.max(mech_dim_estimate(lp, params.lambda0(), top_photon_number(n, dim_light), params.nbar));
    let oracle = loop {
        let cfg = FockConfig::new(dim_light, dm, params.lambda0()).with_k(k, k_order).with_model(model, params.qg_value(model));
        match simulate_loop(lp, &cfg, alpha, params.nbar) {
            Err(Error::CutoffExceeded { .. }) if dm < MAX_DIM_MECH => dm = (dm * 3 / 2).div_ceil(16).saturating_mul(16).min(MAX_DIM_MECH),
            r => break r?,
        }
    };
    Ok(OracleComparison {
        loop_name: lp.name.clone(),
        model,
        bch_order,
        k_order,
        dim_light,
        dim_mech: dm,
        oracle_phase: oracle.phase,
        exact_sum_phase: ex.phase,
        difference: wrap_phase(oracle.phase - ex.phase),
        oracle_amplitude: oracle.amplitude,
        exact_sum_amplitude: ex.amplitude,
        error_bound: truncation_bound(&full, lp, params),
    })
}

/// One randomized desk-scale comparison: a closed loop of two or three
/// X/P pairs with edges in `{+-1/2, +-1}`, random model and couplings.
#[derive(Clone, Debug)]
pub struct RandomCase {
    pub index: usize,
    pub loop_spec: LoopSpec,
    pub model: Model,
    pub params: ExperimentParams,
}

/// Commutator coefficient used for the deformed random cases.
pub const RANDOM_CASE_STRENGTH: f64 = 1e-3;

pub fn random_case(seed: u64, index: usize) -> RandomCase {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
    let pairs = rng.gen_range(2..=3);
    let edge = |rng: &mut rand_chacha::ChaCha8Rng| q(rng.gen_range(1..=2) * if rng.gen() { 1 } else { -1 }, 2);
    let (mut sx, mut sp) = (Q::zero(), Q::zero());
    let mut steps = Vec::new();
    for _ in 0..pairs - 1 {
        let (a, b) = (edge(&mut rng), edge(&mut rng));
        sx += &a;
        sp += &b;
        steps.push(PulseStep::new(Axis::X, a));
        steps.push(PulseStep::new(Axis::P, b));
    }
    steps.push(PulseStep::new(Axis::X, -sx));
    steps.push(PulseStep::new(Axis::P, -sp));
    steps.retain(|s| !s.is_zero());
    let model = [Model::None, Model::Beta, Model::Gamma, Model::Mu][rng.gen_range(0..4)];
    let lambda0 = rng.gen_range(0.01..0.1);
    let k = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.05) };
    let n_p = rng.gen_range(1.0..=25.0f64).round();
    let nbar = rng.gen_range(0.0..=2.0);
    let strength = if model == Model::None { 0.0 } else { RANDOM_CASE_STRENGTH };
    let params = ExperimentParams { n_p, nbar, ..Default::default() }.with_couplings(lambda0, k).with_qg_value(model, strength);
    RandomCase { index, loop_spec: LoopSpec::new(&format!("random-{}", index), steps), model, params }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::square_loop;

    #[test]
    fn squeezed_moments_from_fock_space() {
        let (a, r) = (2.0, 0.5f64);
        let m = squeezed_state_moments(Complex64::new(a, 0.0), r, 64).unwrap();
        let var = 0.5 * (2.0 * r).sinh().powi(2) + a * a * (-2.0 * r).exp();
        assert!((m.n_p - (a * a + r.sinh().powi(2))).abs() < 1e-8);
        assert!((m.delta_np - var.sqrt()).abs() < 1e-8);
        assert!((m.delta_phi - r.exp() / (2.0 * a)).abs() < 1e-8);
    }

    #[test]
    fn canonical_commutator_in_bulk() {
        let cfg = FockConfig::new(4, 40, 0.1);
        assert!(commutator_check(&cfg) < 1e-12);
        let mu = cfg.with_model(Model::Mu, 0.3);
        assert!(commutator_check(&mu) < 1e-12);
    }

    #[test]
    fn beta_representation_first_order() {
        let cfg = FockConfig::new(4, 200, 0.1).with_model(Model::Beta, 1e-4);
        assert!(commutator_check(&cfg) <= 1e-6);
    }

    #[test]
    fn eigen_and_pade_blocks_agree() {
        let cfg = FockConfig::new(4, 30, 0.05).with_k(0.02, 2).with_model(Model::Gamma, 1e-3);
        let a = loop_block(&square_loop(), &cfg, 3);
        let b = loop_block_pade(&square_loop(), &cfg, 3);
        let d = (&a - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{}", d);
        assert!(unitarity_defect(&a) < 1e-9);
    }

    #[test]
    fn zero_coupling_is_identity() {
        let cfg = FockConfig::new(40, 8, 0.0);
        let r = simulate_loop(&square_loop(), &cfg, Complex64::new(3.0, 0.0), 0.0).unwrap();
        assert!(r.phase.abs() < 1e-12);
        assert!((r.amplitude - 3.0).abs() < 1e-9);
    }

    #[test]
    fn square_loop_closed_form() {
        let lam: f64 = 0.05;
        let np = 9.0;
        let cfg = FockConfig::new(45, 40, lam);
        let r = simulate_loop(&square_loop(), &cfg, Complex64::new(3.0, 0.0), 0.0).unwrap();
        let l2 = lam * lam;
        let z = Complex64::new(0.0, -l2).exp() * (-(c(1.0) - Complex64::new(0.0, -2.0 * l2).exp()) * np).exp();
        assert!((r.phase + z.arg()).abs() < 1e-8, "{} vs {}", r.phase, -z.arg());
    }
}
