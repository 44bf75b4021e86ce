//! Outgoing mean optical field from a loop exponent.
//!
//! After pruning, a loop exponent has the form `z = -i w(n) + sum_p n^p (u_p c + v_p d)`
//! in the scaled ladder basis (`c = a^dag/sqrt2`, `d = a/sqrt2`), i.e.
//! `U = e^{-i w(n)} D(beta_n)` with `beta_n = sum_p x_p^* n^p`, `x_p = -v_p/sqrt2`.
//! Then `<a> = alpha sum_n p_n e^{-i(w(n+1) - w(n))} <D(beta_n)^dag D(beta_{n+1})>_th`.

use crate::algebra::coeff::*;
use crate::algebra::{zassenhaus_split, Central, Model, N_IDX};
use crate::error::{Error, Result};
use crate::loops::LoopExponent;
use crate::params::ExperimentParams;
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Term-count guard for `exact_sum`.
pub const MAX_WINDOW_TERMS: u64 = 500_000_000;
pub const DEFAULT_WINDOW_SIGMAS: f64 = 10.0;
const CHUNK: u64 = 1 << 15;

/// Real polynomial in the photon number with symbolic coefficients; the `n`
/// slot of each key holds the power of `N`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhasePoly {
    pub terms: BTreeMap<Central, Q>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOrigin {
    Pure,
    Cross,
}

impl PhasePoly {
    pub fn add_term(&mut self, c: Central, v: Q) {
        let e = self.terms.entry(c).or_insert_with(Q::zero);
        *e += v;
        if e.is_zero() {
            self.terms.remove(&c);
        }
    }

    pub fn add(&self, o: &PhasePoly) -> PhasePoly {
        let mut r = self.clone();
        for (c, v) in &o.terms {
            r.add_term(*c, v.clone());
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, c: &Central) -> Q {
        self.terms.get(c).cloned().unwrap_or_else(Q::zero)
    }

    /// Coefficient of `N^n lambda0^lam k^k` (qg-free).
    pub fn coeff_of(&self, n: u8, lam: u8, k: u8) -> Q {
        self.coeff(&Central::new(n, lam, k, 0))
    }

    pub fn qg_part(&self) -> PhasePoly {
        self.filter(|c| c.qg() > 0)
    }

    pub fn qm_part(&self) -> PhasePoly {
        self.filter(|c| c.qg() == 0)
    }

    pub fn filter(&self, f: impl Fn(&Central) -> bool) -> PhasePoly {
        PhasePoly { terms: self.terms.iter().filter(|(c, _)| f(c)).map(|(c, v)| (*c, v.clone())).collect() }
    }

    /// `d/dN`
    pub fn derivative(&self) -> PhasePoly {
        let mut r = PhasePoly::default();
        for (c, v) in &self.terms {
            let p = c.n();
            if p > 0 {
                r.add_term(c.with(N_IDX, p - 1), v * qi(p as i64));
            }
        }
        r
    }

    /// Discrete rule `n^m -> (n+1)^m - n^m`.
    pub fn forward_difference(&self) -> PhasePoly {
        let mut r = PhasePoly::default();
        for (c, v) in &self.terms {
            let m = c.n();
            for j in 0..m {
                let b = Q::from_integer(binom(m as u32, j as u32));
                r.add_term(c.with(N_IDX, j), v * b);
            }
        }
        r
    }

    /// Antiderivative in `N` with zero constant term.
    pub fn integral(&self) -> PhasePoly {
        let mut r = PhasePoly::default();
        for (c, v) in &self.terms {
            let p = c.n();
            r.add_term(c.with(N_IDX, p + 1), v / qi(p as i64 + 1));
        }
        r
    }

    /// Numeric coefficients per power of `N`.
    pub fn numeric_coeffs(&self, model: Model, params: &ExperimentParams) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = Vec::new();
        for (c, v) in &self.terms {
            let p = c.n() as usize;
            if out.len() <= p {
                out.resize(p + 1, 0.0);
            }
            out[p] += q_to_f64(v) * central_value(c, model, params)?;
        }
        Ok(out)
    }

    pub fn eval(&self, model: Model, params: &ExperimentParams, n: f64) -> Result<f64> {
        Ok(horner(&self.numeric_coeffs(model, params)?, n))
    }

    /// Value of each term at `N = n`, in key order.
    pub fn term_values(&self, model: Model, params: &ExperimentParams, n: f64) -> Result<Vec<(Central, Q, f64)>> {
        self.terms
            .iter()
            .map(|(c, v)| Ok((*c, v.clone(), q_to_f64(v) * central_value(c, model, params)? * n.powi(c.n() as i32))))
            .collect()
    }

    pub fn describe_term(c: &Central, v: &Q, model: Model) -> String {
        let mut s = fmt_q(v);
        if c.qg() > 0 {
            let _ = write!(s, " {}", model.symbol());
        }
        if c.lam() > 0 {
            let _ = write!(s, " lambda0^{}", c.lam());
        }
        if c.k() > 0 {
            let _ = write!(s, " k^{}", c.k());
        }
        if c.n() > 0 {
            let _ = write!(s, " N^{}", c.n());
        }
        s
    }
}

impl std::fmt::Display for PhasePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(c, v)| PhasePoly::describe_term(c, v, Model::None)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// `lambda0^a k^b (strength)^c` for a central key, ignoring its `n` slot.
pub fn central_value(c: &Central, model: Model, params: &ExperimentParams) -> Result<f64> {
    if c.has_params() {
        return Err(Error::Config("numeric evaluation of an exponent with free parameters".into()));
    }
    let mut v = params.lambda0().powi(c.lam() as i32) * params.k().powi(c.k() as i32);
    if c.qg() > 0 {
        v *= params.qg_value(model).powi(c.qg() as i32);
    }
    Ok(v)
}

fn mul_keys(a: &Central, b: &Central) -> Central {
    a.mul(b)
}

/// Symbolic pieces of a splittable exponent.
#[derive(Clone, Debug)]
pub struct ExponentParts {
    pub model: Model,
    /// `w(n)` with `z_pure = -i w(n)`
    pub w: PhasePoly,
    /// real part of the pure exponent (zero for a unitary loop)
    pub w_real: PhasePoly,
    /// `v_p` per photon-number power, keyed by full central monomials
    pub annihilation: BTreeMap<u8, BTreeMap<Central, Cq>>,
}

pub fn exponent_parts(exp: &LoopExponent) -> Result<ExponentParts> {
    let split = zassenhaus_split(&exp.exponent)?;
    let mut w = PhasePoly::default();
    let mut w_real = PhasePoly::default();
    for (m, c) in split.pure.iter() {
        w.add_term(m.c, -c.im.clone());
        w_real.add_term(m.c, c.re.clone());
    }
    let annihilation = split.linear_parts.iter().map(|lp| (lp.n_power, lp.annihilation.clone())).collect();
    Ok(ExponentParts { model: exp.exponent.model(), w, w_real, annihilation })
}

impl ExponentParts {
    fn trunc_ok(&self, exp: &LoopExponent, c: &Central) -> bool {
        c.qg() <= 1 && exp.exponent.truncation().admits(c)
    }

    /// `Im(x_p^* x_q)` as a polynomial; the `n` slot holds `p + q`.
    fn im_xx(&self, exp: &LoopExponent, p: u8, q: u8) -> PhasePoly {
        let mut r = PhasePoly::default();
        let (vp, vq) = (&self.annihilation[&p], &self.annihilation[&q]);
        for (ca, a) in vp {
            for (cb, b) in vq {
                let key = mul_keys(ca, cb);
                if !self.trunc_ok(exp, &key) {
                    continue;
                }
                // x_p^* x_q = v_p^* v_q / 2
                let prod = a.conj() * b;
                r.add_term(key, prod.im / qi(2));
            }
        }
        r
    }

    /// Phase from the displacement factors:
    /// `sum_{p<q} (q - p) Im(x_p^* x_q) N^{p+q-1}`.
    pub fn cross_phase(&self, exp: &LoopExponent) -> PhasePoly {
        let powers: Vec<u8> = self.annihilation.keys().copied().collect();
        let mut r = PhasePoly::default();
        for (i, &p) in powers.iter().enumerate() {
            for &q in &powers[i + 1..] {
                for (c, v) in self.im_xx(exp, p, q).terms {
                    let s = c.n();
                    r.add_term(c.with(N_IDX, s - 1), v * qi((q - p) as i64));
                }
            }
        }
        r
    }

    /// `sum_m m a_m N^{m-1}` for `w = sum a_m n^m`.
    pub fn pure_phase(&self) -> PhasePoly {
        self.w.derivative()
    }

    /// Numeric `x_p` per power.
    pub fn x_numeric(&self, params: &ExperimentParams) -> Result<Vec<(u8, Complex64)>> {
        let mut out = Vec::new();
        for (&p, m) in &self.annihilation {
            let mut v = Complex64::zero();
            for (c, coef) in m {
                v += cq_to_c64(coef) * central_value(c, self.model, params)?;
            }
            out.push((p, -v / 2f64.sqrt()));
        }
        Ok(out)
    }
}

/// Closed-form saddle-point phase `Phi_T(N)`: pure part plus displacement cross phases.
pub fn phase_poly(exp: &LoopExponent) -> Result<PhasePoly> {
    let parts = exponent_parts(exp)?;
    Ok(parts.pure_phase().add(&parts.cross_phase(exp)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetTerm {
    pub descriptor: String,
    /// powers of `N`, `lambda0`, `k`
    pub powers: (u8, u8, u8),
    pub origin: PhaseOrigin,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBudget {
    pub loop_name: String,
    pub model: Model,
    /// `(model, phase)` of the deformation term, summed over its monomials
    pub qg_term: f64,
    pub qg_terms: Vec<BudgetTerm>,
    pub qm_terms: Vec<BudgetTerm>,
    pub min_uncertainty: f64,
    pub total: f64,
    /// `|alpha'| / |alpha|`
    pub amplitude_ratio: f64,
    /// rough size of the first neglected saddle-point correction
    pub next_order_estimate: f64,
}

impl PhaseBudget {
    /// Summed QM phase of the `N^n lambda0^lam k^k` monomial.
    pub fn qm_phase_of(&self, n: u8, lam: u8, k: u8) -> f64 {
        self.qm_terms.iter().filter(|t| t.powers == (n, lam, k)).map(|t| t.phase).sum()
    }

    pub fn qm_total(&self) -> f64 {
        self.qm_terms.iter().map(|t| t.phase).sum()
    }
}

pub fn saddle_phase(exp: &LoopExponent, params: &ExperimentParams) -> Result<PhaseBudget> {
    let parts = exponent_parts(exp)?;
    let model = parts.model;
    let n = params.n_p;
    let mut qg_terms = Vec::new();
    let mut qm_terms = Vec::new();
    for (origin, poly) in [(PhaseOrigin::Pure, parts.pure_phase()), (PhaseOrigin::Cross, parts.cross_phase(exp))] {
        for (c, v, val) in poly.term_values(model, params, n)? {
            let t = BudgetTerm {
                descriptor: PhasePoly::describe_term(&c, &v, model),
                powers: (c.n(), c.lam(), c.k()),
                origin,
                phase: val,
            };
            if c.qg() > 0 {
                qg_terms.push(t);
            } else {
                qm_terms.push(t);
            }
        }
    }
    let qg_term: f64 = qg_terms.iter().map(|t| t.phase).sum();
    let total = qg_term + qm_terms.iter().map(|t| t.phase).sum::<f64>();

    // amplitude: |alpha| exp(-|sum_p p x_p^* N^(p-1)|^2 (nbar + 1/2))
    let xs = parts.x_numeric(params)?;
    let mut db = Complex64::zero();
    for (p, x) in &xs {
        if *p > 0 {
            db += x.conj() * (*p as f64) * n.powi(*p as i32 - 1);
        }
    }
    let amplitude_ratio = (-db.norm_sqr() * (params.nbar + 0.5)).exp();

    // first neglected terms: w''(N)/2 and the Poisson-averaged curvature N w'''(N)/2
    let w1 = parts.pure_phase().add(&parts.cross_phase(exp));
    let w2 = w1.derivative();
    let w3 = w2.derivative();
    let next_order_estimate = 0.5 * w2.eval(model, params, n)?.abs() + 0.5 * n * w3.eval(model, params, n)?.abs();

    Ok(PhaseBudget {
        loop_name: exp.loop_name.clone(),
        model,
        qg_term,
        qg_terms,
        qm_terms,
        min_uncertainty: params.min_phase_uncertainty(),
        total,
        amplitude_ratio,
        next_order_estimate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSum,
    SaddlePoint,
    FockOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldResult {
    pub amplitude: f64,
    /// `Phi_T` with `<a> = |alpha'| e^{-i Phi_T}`, branch fixed by the window centre
    pub phase: f64,
    /// `phase` wrapped into `(-pi, pi]`
    pub principal_phase: f64,
    pub method: Method,
    pub window: Option<(u64, u64)>,
}

pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Real polynomial coefficients (by power of `n`) of `theta(n) = -(w(n+1)-w(n)) + Im(beta_n^* (beta_{n+1}-beta_n))`
/// and complex coefficients of `beta_{n+1} - beta_n`.
fn numeric_kernels(parts: &ExponentParts, params: &ExperimentParams) -> Result<(Vec<f64>, Vec<Complex64>, Vec<Complex64>)> {
    let dw = parts.w.forward_difference().numeric_coeffs(parts.model, params)?;
    let xs = parts.x_numeric(params)?;
    let maxp = xs.iter().map(|(p, _)| *p as usize).max().unwrap_or(0);
    let mut beta = vec![Complex64::zero(); maxp + 1];
    for (p, x) in &xs {
        beta[*p as usize] += x.conj();
    }
    let mut dbeta = vec![Complex64::zero(); maxp + 1];
    for (p, b) in beta.iter().enumerate() {
        for j in 0..p {
            dbeta[j] += b * binom_f64(p, j);
        }
    }
    let mut theta = vec![0.0; (dw.len()).max(2 * maxp + 1)];
    for (i, c) in dw.iter().enumerate() {
        theta[i] -= c;
    }
    for (i, b) in beta.iter().enumerate() {
        for (j, d) in dbeta.iter().enumerate() {
            theta[i + j] += (b.conj() * d).im;
        }
    }
    Ok((theta, beta, dbeta))
}

/// Taylor coefficients of `f(n0 + j) - f(n0)` in `j`.
fn shift_real(c: &[f64], n0: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (m, cm) in c.iter().enumerate() {
        for i in 1..=m {
            out[i] += cm * binom_f64(m, i) * n0.powi((m - i) as i32);
        }
    }
    out
}

fn shift_complex(c: &[Complex64], n0: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::zero(); c.len()];
    for (m, cm) in c.iter().enumerate() {
        for i in 0..=m {
            out[i] += cm * binom_f64(m, i) * n0.powi((m - i) as i32);
        }
    }
    out
}

fn binom_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
struct CompSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

fn two_sum(s: &mut f64, c: &mut f64, x: f64) {
    let t = *s + x;
    if s.abs() >= x.abs() {
        *c += (*s - t) + x;
    } else {
        *c += (x - t) + *s;
    }
    *s = t;
}

impl CompSum {
    fn add(&mut self, z: Complex64) {
        two_sum(&mut self.re, &mut self.re_c, z.re);
        two_sum(&mut self.im, &mut self.im_c, z.im);
    }
    fn merge(mut self, o: CompSum) -> CompSum {
        self.add(Complex64::new(o.re, o.im));
        self.add(Complex64::new(o.re_c, o.im_c));
        self
    }
    fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn pairwise(mut v: Vec<CompSum>) -> CompSum {
    if v.is_empty() {
        return CompSum::default();
    }
    while v.len() > 1 {
        v = v.chunks(2).map(|p| if p.len() == 2 { p[0].merge(p[1]) } else { p[0] }).collect();
    }
    v[0]
}

/// Windowed Poisson sum over the photon number.
pub fn exact_sum(exp: &LoopExponent, params: &ExperimentParams, window_sigmas: f64) -> Result<MeanFieldResult> {
    let n_p = params.n_p;
    if n_p <= 0.0 {
        return Ok(MeanFieldResult {
            amplitude: 0.0,
            phase: 0.0,
            principal_phase: 0.0,
            method: Method::ExactSum,
            window: Some((0, 0)),
        });
    }
    let parts = exponent_parts(exp)?;
    let half = (window_sigmas * n_p.sqrt()).ceil().max(window_sigmas);
    let lo = (n_p - half).floor().max(0.0) as u64;
    let hi = (n_p + half).ceil() as u64;
    let terms = hi - lo + 1;
    if terms > MAX_WINDOW_TERMS {
        return Err(Error::WindowTooLarge { terms, limit: MAX_WINDOW_TERMS });
    }
    let (theta, _beta, dbeta) = numeric_kernels(&parts, params)?;
    let n0 = n_p.round();
    let theta0 = horner(&theta, n0);
    let dtheta = shift_real(&theta, n0);
    let dbeta_s = shift_complex(&dbeta, n0);
    let damp = params.nbar + 0.5;
    let ln_n = n_p.ln();
    let lw = |n: u64| n as f64 * ln_n - n_p - ln_gamma(n as f64 + 1.0);
    let lmax = lw(n0 as u64);

    let chunks: Vec<(u64, u64)> = (0..terms.div_ceil(CHUNK))
        .map(|i| (lo + i * CHUNK, (lo + (i + 1) * CHUNK - 1).min(hi)))
        .collect();
    let sums: Vec<(CompSum, CompSum)> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = CompSum::default();
            let mut wsum = CompSum::default();
            for n in a..=b {
                let j = n as f64 - n0;
                let wgt = (lw(n) - lmax).exp();
                let th = horner(&dtheta, j);
                let db = dbeta_s.iter().rev().fold(Complex64::zero(), |acc, c| acc * j + c);
                let amp = (-db.norm_sqr() * damp).exp();
                acc.add(Complex64::from_polar(wgt * amp, th));
                wsum.add(Complex64::new(wgt, 0.0));
            }
            (acc, wsum)
        })
        .collect();
    let (acc, wsum): (Vec<CompSum>, Vec<CompSum>) = sums.into_iter().unzip();
    let s = pairwise(acc).value();
    let norm = pairwise(wsum).value().re;
    let s = s / norm;
    // <a> = alpha S e^{i theta0}, Phi_T = -(theta0 + arg S)
    let phase = -(theta0 + s.arg());
    Ok(MeanFieldResult {
        amplitude: n_p.sqrt() * s.norm(),
        phase,
        principal_phase: wrap_phase(phase),
        method: Method::ExactSum,
        window: Some((lo, hi)),
    })
}

/// Saddle-point result in the same shape as `exact_sum`.
pub fn saddle_result(exp: &LoopExponent, params: &ExperimentParams) -> Result<MeanFieldResult> {
    let b = saddle_phase(exp, params)?;
    Ok(MeanFieldResult {
        amplitude: params.n_p.sqrt() * b.amplitude_ratio,
        phase: b.total,
        principal_phase: wrap_phase(b.total),
        method: Method::SaddlePoint,
        window: None,
    })
}

/// `Theta(n)`: the discrete rule applied twice to the effective phase
/// exponent (pure part plus the integrated cross phase).
pub fn theta_poly(exp: &LoopExponent) -> Result<PhasePoly> {
    let parts = exponent_parts(exp)?;
    let w_eff = parts.w.add(&parts.cross_phase(exp).integral());
    Ok(w_eff.forward_difference().forward_difference())
}

/// `sin^2(Theta(N_p)/2)`, the distortion contribution to the phase variance.
pub fn distortion_spread_sq(exp: &LoopExponent, params: &ExperimentParams) -> Result<f64> {
    let th = theta_poly(exp)?.eval(exp.exponent.model(), params, params.n_p)?;
    Ok((0.5 * th).sin().powi(2))
}

/// `sqrt(1/(4 N_p) + sin^2(Theta(N_p)/2))`
pub fn distortion_spread(exp: &LoopExponent, params: &ExperimentParams) -> Result<f64> {
    Ok((0.25 / params.n_p + distortion_spread_sq(exp, params)?).sqrt())
}

/// Generalized Laguerre polynomial `L_n^(a)(x)` by upward recurrence.
pub fn laguerre(n: u64, a: u64, x: f64) -> f64 {
    let a = a as f64;
    if n == 0 {
        return 1.0;
    }
    let (mut l0, mut l1) = (1.0, 1.0 + a - x);
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// `<m| D(g) |m'>`
pub fn displacement_element(g: Complex64, m: u64, mp: u64) -> Complex64 {
    let x = g.norm_sqr();
    let (hi, lo) = if m >= mp { (m, mp) } else { (mp, m) };
    let d = hi - lo;
    // sqrt(lo!/hi!) |g|^d e^{-x/2} L_lo^(d)(x)
    let log_mag = 0.5 * (ln_gamma(lo as f64 + 1.0) - ln_gamma(hi as f64 + 1.0)) - 0.5 * x
        + if d > 0 { d as f64 * g.norm().ln() } else { 0.0 };
    let lag = laguerre(lo, d, x);
    if d > 0 && g.norm() == 0.0 {
        return Complex64::zero();
    }
    let dir = if m >= mp { g / g.norm() } else { -g.conj() / g.norm() };
    let phase = if d > 0 { dir.powu(d as u32) } else { Complex64::one() };
    phase * log_mag.exp() * lag
}

/// `<-chi^*, m | upsilon^*, m'>` for displaced Fock states `D(z)|m>`.
pub fn displaced_fock_overlap(chi: Complex64, upsilon: Complex64, m: u64, mprime: u64) -> Complex64 {
    // D(-chi^*)^dag D(upsilon^*) = D(chi^*) D(upsilon^*) = e^{(chi^* upsilon - chi upsilon^*)/2} D(chi^* + upsilon^*)
    let a = chi.conj();
    let b = upsilon.conj();
    let ph = ((a * b.conj() - a.conj() * b) * 0.5).exp();
    ph * displacement_element(a + b, m, mprime)
}

/// Thermal average `sum_m p_m <-chi^*, m | upsilon^*, m>` in closed form.
pub fn thermal_overlap(chi: Complex64, upsilon: Complex64, nbar: f64) -> Complex64 {
    (-chi * upsilon.conj() - 0.5 * (chi.norm_sqr() + upsilon.norm_sqr())).exp()
        * (-(chi + upsilon).norm_sqr() * nbar).exp()
}

/// Same average by direct summation over `terms` phonon levels.
pub fn thermal_overlap_direct(chi: Complex64, upsilon: Complex64, nbar: f64, terms: u64) -> Complex64 {
    let r = nbar / (nbar + 1.0);
    let mut acc = CompSum::default();
    let mut p = 1.0 / (nbar + 1.0);
    for m in 0..terms {
        acc.add(displaced_fock_overlap(chi, upsilon, m, m) * p);
        p *= r;
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_fock_overlaps() {
        let z = Complex64::zero();
        assert!((displaced_fock_overlap(z, z, 3, 3) - Complex64::one()).norm() < 1e-15);
        assert!(displaced_fock_overlap(z, z, 3, 2).norm() < 1e-15);
    }

    #[test]
    fn vacuum_overlap_matches_closed_form() {
        let chi = Complex64::new(0.3, -0.2);
        let ups = Complex64::new(-0.1, 0.4);
        let direct = displaced_fock_overlap(chi, ups, 0, 0);
        let closed = (-chi * ups.conj() - 0.5 * (chi.norm_sqr() + ups.norm_sqr())).exp();
        assert!((direct - closed).norm() < 1e-14);
    }

    #[test]
    fn forward_difference_of_square() {
        let mut p = PhasePoly::default();
        p.add_term(Central::new(2, 0, 0, 0), q(1, 1));
        let d = p.forward_difference();
        assert_eq!(d.coeff(&Central::new(1, 0, 0, 0)), q(2, 1));
        assert_eq!(d.coeff(&Central::new(0, 0, 0, 0)), q(1, 1));
    }

    #[test]
    fn wrap_is_principal() {
        assert!((wrap_phase(7.0) - (7.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
    }
}
