//! Truncated noncommutative polynomials in one mechanical mode, with central
//! symbols for the photon number `n`, the pulse coupling `lambda0`, the
//! nonlinearity ratio `k`, the deformation strength and free parameters.
//!
//! Every term is stored in a single canonical normal order per basis:
//! `P^a X^b` (quadrature) or `c^i d^j` (scaled ladder: `c = a_m^dagger/sqrt 2`,
//! `d = a_m/sqrt 2`, creators left).

pub mod bch;
pub mod coeff;
mod tables;
pub mod zassenhaus;

use crate::error::{Error, Result};
use coeff::*;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub use bch::{bch_combine, bch_combine_terms, exp_poly, goldberg_table, log_poly, MAX_BCH_ORDER};
pub use zassenhaus::{zassenhaus_split, LinearPart, SplitFactors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    None,
    Beta,
    Gamma,
    Mu,
}

impl Model {
    pub fn symbol(&self) -> &'static str {
        match self {
            Model::None => "qg",
            Model::Beta => "beta",
            Model::Gamma => "gamma",
            Model::Mu => "mu",
        }
    }

    pub fn parse(s: &str) -> Option<Model> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Model::None),
            "beta" => Some(Model::Beta),
            "gamma" => Some(Model::Gamma),
            "mu" => Some(Model::Mu),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Quadrature,
    Ladder,
}

/// Generators as they appear in rendered words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    X,
    P,
    /// Mechanical annihilation operator; stored scaled as `a_m / sqrt 2`.
    Am,
    /// Mechanical creation operator; stored scaled as `a_m^dagger / sqrt 2`.
    AmDagger,
    NPhoton,
    Identity,
}

pub const N_IDX: usize = 0;
pub const LAM_IDX: usize = 1;
pub const K_IDX: usize = 2;
pub const QG_IDX: usize = 3;
pub const PARAM0: usize = 4;
pub const NCENT: usize = 16;
pub const MAX_PARAMS: usize = NCENT - PARAM0;

/// Exponent vector of commuting symbols: n, lambda0, k, qg, params...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Central(pub [u8; NCENT]);

impl Central {
    pub fn new(n: u8, lam: u8, k: u8, qg: u8) -> Self {
        let mut c = [0u8; NCENT];
        c[N_IDX] = n;
        c[LAM_IDX] = lam;
        c[K_IDX] = k;
        c[QG_IDX] = qg;
        Central(c)
    }
    pub fn n(&self) -> u8 {
        self.0[N_IDX]
    }
    pub fn lam(&self) -> u8 {
        self.0[LAM_IDX]
    }
    pub fn k(&self) -> u8 {
        self.0[K_IDX]
    }
    pub fn qg(&self) -> u8 {
        self.0[QG_IDX]
    }
    pub fn param(&self, i: usize) -> u8 {
        self.0[PARAM0 + i]
    }
    pub fn param_degree(&self) -> u32 {
        self.0[PARAM0..].iter().map(|&x| x as u32).sum()
    }
    pub fn with(mut self, idx: usize, v: u8) -> Self {
        self.0[idx] = v;
        self
    }
    pub fn mul(&self, o: &Central) -> Central {
        let mut c = [0u8; NCENT];
        for i in 0..NCENT {
            c[i] = self.0[i].saturating_add(o.0[i]);
        }
        Central(c)
    }
    pub fn has_params(&self) -> bool {
        self.0[PARAM0..].iter().any(|&x| x > 0)
    }
}

/// Grading bounds. `max_lambda` bounds the power of the pulse coupling
/// (equivalently the number of pulse factors a term came from).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    pub max_lambda: u8,
    pub max_k: u8,
    pub max_param_degree: u8,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { max_lambda: 7, max_k: 5, max_param_degree: u8::MAX }
    }
}

impl Truncation {
    pub fn new(max_lambda: u8, max_k: u8) -> Self {
        Truncation { max_lambda, max_k, ..Default::default() }
    }
    pub fn admits(&self, c: &Central) -> bool {
        c.lam() <= self.max_lambda
            && c.k() <= self.max_k
            && c.qg() <= 1
            && c.param_degree() <= self.max_param_degree as u32
    }
}

/// Shared context of an operand: deformation model, basis and truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ctx {
    pub model: Model,
    pub basis: Basis,
    pub trunc: Truncation,
}

impl Ctx {
    pub fn new(model: Model, basis: Basis, trunc: Truncation) -> Self {
        Ctx { model, basis, trunc }
    }
    pub fn quadrature(model: Model, trunc: Truncation) -> Self {
        Ctx { model, basis: Basis::Quadrature, trunc }
    }
}

/// Normal-ordered word `(left power, right power)` plus its central monomial.
/// Quadrature: left = P, right = X. Ladder: left = c (creation), right = d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mono {
    pub w: [u8; 2],
    pub c: Central,
}

impl Mono {
    pub fn new(left: u8, right: u8, c: Central) -> Self {
        Mono { w: [left, right], c }
    }
    pub fn word_len(&self) -> u32 {
        self.w[0] as u32 + self.w[1] as u32
    }
    pub fn is_central(&self) -> bool {
        self.w == [0, 0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPoly {
    ctx: Ctx,
    terms: BTreeMap<Mono, Cq>,
}

impl OperatorPoly {
    pub fn zero(ctx: Ctx) -> Self {
        OperatorPoly { ctx, terms: BTreeMap::new() }
    }

    pub fn one(ctx: Ctx) -> Self {
        Self::term(ctx, Mono::new(0, 0, Central::default()), c_one())
    }

    pub fn term(ctx: Ctx, m: Mono, c: Cq) -> Self {
        let mut p = Self::zero(ctx);
        p.add_term(m, c);
        p
    }

    /// Single generator in the requested basis, converted if needed.
    pub fn generator(ctx: Ctx, g: Generator) -> Self {
        let c0 = Central::default();
        let native = |m: Mono| Self::term(ctx, m, c_one());
        match (ctx.basis, g) {
            (_, Generator::Identity) => Self::one(ctx),
            (_, Generator::NPhoton) => native(Mono::new(0, 0, c0.with(N_IDX, 1))),
            (Basis::Quadrature, Generator::P) => native(Mono::new(1, 0, c0)),
            (Basis::Quadrature, Generator::X) => native(Mono::new(0, 1, c0)),
            (Basis::Ladder, Generator::AmDagger) => native(Mono::new(1, 0, c0)),
            (Basis::Ladder, Generator::Am) => native(Mono::new(0, 1, c0)),
            (Basis::Quadrature, _) => {
                let lad = Ctx { basis: Basis::Ladder, ..ctx };
                Self::generator(lad, g).to_quadrature()
            }
            (Basis::Ladder, _) => {
                let qd = Ctx { basis: Basis::Quadrature, ..ctx };
                Self::generator(qd, g).to_ladder()
            }
        }
    }

    pub fn ctx(&self) -> Ctx {
        self.ctx
    }
    pub fn model(&self) -> Model {
        self.ctx.model
    }
    pub fn basis(&self) -> Basis {
        self.ctx.basis
    }
    pub fn truncation(&self) -> Truncation {
        self.ctx.trunc
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Mono, &Cq)> {
        self.terms.iter()
    }
    pub fn coeff(&self, m: &Mono) -> Cq {
        self.terms.get(m).cloned().unwrap_or_else(Cq::zero)
    }

    /// Adds `c * m`, silently dropping it if it lies outside the truncation.
    pub fn add_term(&mut self, m: Mono, c: Cq) {
        if c.is_zero() || !self.ctx.trunc.admits(&m.c) {
            return;
        }
        let remove = {
            let e = self.terms.entry(m).or_insert_with(Cq::zero);
            *e += c;
            e.is_zero()
        };
        if remove {
            self.terms.remove(&m);
        }
    }

    fn check(&self, o: &OperatorPoly) -> Result<()> {
        if self.ctx != o.ctx {
            return Err(Error::Config(format!(
                "operand mismatch: {:?} vs {:?}",
                self.ctx, o.ctx
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &OperatorPoly) -> Result<OperatorPoly> {
        self.check(o)?;
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(*m, c.clone());
        }
        Ok(r)
    }

    pub fn sub(&self, o: &OperatorPoly) -> Result<OperatorPoly> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> OperatorPoly {
        self.scale(&-c_one())
    }

    pub fn scale(&self, s: &Cq) -> OperatorPoly {
        let mut r = Self::zero(self.ctx);
        if s.is_zero() {
            return r;
        }
        for (m, c) in &self.terms {
            r.terms.insert(*m, c * s);
        }
        r
    }

    /// Multiplies every term by a central monomial.
    pub fn shift_central(&self, by: &Central) -> OperatorPoly {
        let mut r = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            r.add_term(Mono { w: m.w, c: m.c.mul(by) }, c.clone());
        }
        r
    }

    pub fn mul(&self, o: &OperatorPoly) -> Result<OperatorPoly> {
        self.check(o)?;
        let ctx = self.ctx;
        let mut acc: BTreeMap<Mono, Cq> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let cen = m1.c.mul(&m2.c);
                if !ctx.trunc.admits(&cen) {
                    continue;
                }
                let prod = c1 * c2;
                let table = tables::reorder(ctx.model, ctx.basis, m1.w[1], m2.w[0]);
                for e in table.iter() {
                    let q = cen.qg() + e.qg;
                    if q > 1 {
                        continue;
                    }
                    let key = Mono::new(m1.w[0] + e.left, e.right + m2.w[1], cen.with(QG_IDX, q));
                    *acc.entry(key).or_insert_with(Cq::zero) += &prod * &e.coeff;
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(OperatorPoly { ctx, terms: acc })
    }

    pub fn commutator(&self, o: &OperatorPoly) -> Result<OperatorPoly> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    pub fn pow(&self, e: u32) -> Result<OperatorPoly> {
        let mut r = Self::one(self.ctx);
        for _ in 0..e {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    /// Re-truncates (only ever drops terms).
    pub fn truncate(&self, trunc: Truncation) -> OperatorPoly {
        let mut r = Self::zero(Ctx { trunc, ..self.ctx });
        for (m, c) in &self.terms {
            r.add_term(*m, c.clone());
        }
        r
    }

    pub fn with_truncation(&self, trunc: Truncation) -> OperatorPoly {
        self.truncate(trunc)
    }

    pub fn filter(&self, f: impl Fn(&Mono, &Cq) -> bool) -> OperatorPoly {
        let mut r = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            if f(m, c) {
                r.terms.insert(*m, c.clone());
            }
        }
        r
    }

    pub fn min_lambda(&self) -> Option<u8> {
        self.terms.keys().map(|m| m.c.lam()).min()
    }

    /// Hermitian adjoint. In the quadrature basis `(P^a X^b)^dag = X^b P^a`,
    /// which is reordered; in the ladder basis `(c^i d^j)^dag = c^j d^i`.
    pub fn adjoint(&self) -> OperatorPoly {
        match self.ctx.basis {
            Basis::Ladder => {
                let mut r = Self::zero(self.ctx);
                for (m, c) in &self.terms {
                    r.add_term(Mono::new(m.w[1], m.w[0], m.c), c.conj());
                }
                r
            }
            Basis::Quadrature => {
                let mut r = Self::zero(self.ctx);
                for (m, c) in &self.terms {
                    for e in tables::reorder(self.ctx.model, Basis::Quadrature, m.w[1], m.w[0]).iter() {
                        let q = m.c.qg() + e.qg;
                        if q > 1 {
                            continue;
                        }
                        r.add_term(
                            Mono::new(e.left, e.right, m.c.with(QG_IDX, q)),
                            c.conj() * &e.coeff,
                        );
                    }
                }
                r
            }
        }
    }

    /// Substitutes exact values for free parameters (index -> value).
    pub fn substitute_params(&self, values: &[(usize, Q)]) -> OperatorPoly {
        let mut r = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            let mut cen = m.c;
            let mut cf = c.clone();
            for (i, v) in values {
                let p = cen.param(*i);
                if p > 0 {
                    cf = cf * from_q(num_traits::pow(v.clone(), p as usize));
                    cen = cen.with(PARAM0 + i, 0);
                }
            }
            r.add_term(Mono { w: m.w, c: cen }, cf);
        }
        r
    }

    /// Quadrature -> scaled ladder (`X = c + d`, `P = -i(d - c)`).
    pub fn to_ladder(&self) -> OperatorPoly {
        if self.ctx.basis == Basis::Ladder {
            return self.clone();
        }
        let lctx = Ctx { basis: Basis::Ladder, ..self.ctx };
        let c0 = Central::default();
        let a = OperatorPoly::term(lctx, Mono::new(1, 0, c0), c_one());
        let b = OperatorPoly::term(lctx, Mono::new(0, 1, c0), c_one());
        let x = a.add(&b).unwrap();
        let p = b.sub(&a).unwrap().scale(&-c_i());
        self.convert(lctx, &p, &x)
    }

    /// Scaled ladder -> quadrature (`c = (X - iP)/2`, `d = (X + iP)/2`).
    pub fn to_quadrature(&self) -> OperatorPoly {
        if self.ctx.basis == Basis::Quadrature {
            return self.clone();
        }
        let qctx = Ctx { basis: Basis::Quadrature, ..self.ctx };
        let c0 = Central::default();
        let x = OperatorPoly::term(qctx, Mono::new(0, 1, c0), cre(1, 2));
        let ip = OperatorPoly::term(qctx, Mono::new(1, 0, c0), cim(1, 2));
        let a = x.sub(&ip).unwrap();
        let b = x.add(&ip).unwrap();
        self.convert(qctx, &a, &b)
    }

    /// Rewrites `L^i R^j` as `left^i right^j` evaluated in `target`.
    fn convert(&self, target: Ctx, left: &OperatorPoly, right: &OperatorPoly) -> OperatorPoly {
        let wide = Ctx { trunc: Truncation { max_param_degree: u8::MAX, ..target.trunc }, ..target };
        let mut lp: Vec<OperatorPoly> = vec![OperatorPoly::one(wide)];
        let mut rp: Vec<OperatorPoly> = vec![OperatorPoly::one(wide)];
        let mut out = OperatorPoly::zero(target);
        let lw = |v: &mut Vec<OperatorPoly>, g: &OperatorPoly, e: usize| {
            while v.len() <= e {
                let nxt = v.last().unwrap().mul(&g.with_truncation(wide.trunc)).unwrap();
                v.push(nxt);
            }
        };
        for (m, c) in &self.terms {
            lw(&mut lp, left, m.w[0] as usize);
            lw(&mut rp, right, m.w[1] as usize);
            let word = lp[m.w[0] as usize].mul(&rp[m.w[1] as usize]).unwrap();
            let word = word.shift_central(&m.c).scale(c);
            for (wm, wc) in word.terms {
                out.add_term(wm, wc);
            }
        }
        out
    }

    /// Coefficients of central monomials (word `[0,0]`).
    pub fn central_part(&self) -> BTreeMap<Central, Cq> {
        self.terms
            .iter()
            .filter(|(m, _)| m.is_central())
            .map(|(m, c)| (m.c, c.clone()))
            .collect()
    }

    pub fn max_word_len(&self) -> u32 {
        self.terms.keys().map(|m| m.word_len()).max().unwrap_or(0)
    }

    /// Numeric magnitude estimate of each term, used for ranking and pruning.
    pub fn terms_vec(&self) -> Vec<(Mono, Cq)> {
        self.terms.iter().map(|(m, c)| (*m, c.clone())).collect()
    }
}

pub fn commutator(a: &OperatorPoly, b: &OperatorPoly) -> Result<OperatorPoly> {
    a.commutator(b)
}

/// Human-readable central monomial, e.g. `n^3 lambda0^3 k gamma`.
pub fn fmt_central(c: &Central, model: Model) -> String {
    let mut parts = Vec::new();
    let mut put = |name: String, e: u8| {
        if e == 1 {
            parts.push(name);
        } else if e > 1 {
            parts.push(format!("{}^{}", name, e));
        }
    };
    put("n".into(), c.n());
    put("lambda0".into(), c.lam());
    put("k".into(), c.k());
    put(model.symbol().into(), c.qg());
    for i in 0..MAX_PARAMS {
        put(format!("t{}", i), c.param(i));
    }
    parts.join(" ")
}

fn fmt_word(w: [u8; 2], basis: Basis) -> String {
    let (l, r) = match basis {
        Basis::Quadrature => ("P", "X"),
        Basis::Ladder => ("c", "d"),
    };
    let mut s = Vec::new();
    for (name, e) in [(l, w[0]), (r, w[1])] {
        if e == 1 {
            s.push(name.to_string());
        } else if e > 1 {
            s.push(format!("{}^{}", name, e));
        }
    }
    s.join(" ")
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let cen = fmt_central(&m.c, self.ctx.model);
            let word = fmt_word(m.w, self.ctx.basis);
            let body: Vec<&str> = [cen.as_str(), word.as_str()]
                .into_iter()
                .filter(|s| !s.is_empty())
                .collect();
            if body.is_empty() {
                write!(f, "{}", fmt_cq(c))?;
            } else if c.is_one() {
                write!(f, "{}", body.join(" "))?;
            } else {
                write!(f, "{} {}", fmt_cq(c), body.join(" "))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(model: Model) -> Ctx {
        Ctx::quadrature(model, Truncation::default())
    }

    #[test]
    fn beta_commutator_of_quadratures() {
        let c = ctx(Model::Beta);
        let x = OperatorPoly::generator(c, Generator::X);
        let p = OperatorPoly::generator(c, Generator::P);
        let r = x.commutator(&p).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.coeff(&Mono::new(0, 0, Central::default())), c_i());
        assert_eq!(r.coeff(&Mono::new(2, 0, Central::new(0, 0, 0, 1))), c_i());
    }

    #[test]
    fn gamma_and_mu_commutators() {
        let g = ctx(Model::Gamma);
        let r = OperatorPoly::generator(g, Generator::X)
            .commutator(&OperatorPoly::generator(g, Generator::P))
            .unwrap();
        assert_eq!(r.coeff(&Mono::new(1, 0, Central::new(0, 0, 0, 1))), -c_i());
        let m = ctx(Model::Mu);
        let r = OperatorPoly::generator(m, Generator::X)
            .commutator(&OperatorPoly::generator(m, Generator::P))
            .unwrap();
        assert_eq!(r.coeff(&Mono::new(0, 0, Central::new(0, 0, 0, 1))), c_i());
    }

    #[test]
    fn photon_symbol_is_central() {
        let c = ctx(Model::Beta);
        let n = OperatorPoly::generator(c, Generator::NPhoton);
        let x = OperatorPoly::generator(c, Generator::X);
        assert!(n.commutator(&x).unwrap().is_zero());
    }

    #[test]
    fn x_squared_with_p() {
        let c = ctx(Model::None);
        let x = OperatorPoly::generator(c, Generator::X);
        let p = OperatorPoly::generator(c, Generator::P);
        let r = x.mul(&x).unwrap().commutator(&p).unwrap();
        assert_eq!(r, x.scale(&cim(2, 1)));
    }

    #[test]
    fn ladder_quadrature_round_trip() {
        for model in [Model::None, Model::Beta, Model::Gamma, Model::Mu] {
            let c = ctx(model);
            let x = OperatorPoly::generator(c, Generator::X);
            let p = OperatorPoly::generator(c, Generator::P);
            let poly = x.mul(&p).unwrap().mul(&x).unwrap().add(&p.pow(3).unwrap()).unwrap();
            let back = poly.to_ladder().to_quadrature();
            assert_eq!(back, poly, "{:?}", model);
        }
    }

    #[test]
    fn ladder_commutator_matches_quadrature() {
        for model in [Model::None, Model::Beta, Model::Gamma, Model::Mu] {
            let c = ctx(model);
            let x = OperatorPoly::generator(c, Generator::X);
            let p = OperatorPoly::generator(c, Generator::P);
            let lhs = x.to_ladder().commutator(&p.to_ladder()).unwrap().to_quadrature();
            assert_eq!(lhs, x.commutator(&p).unwrap(), "{:?}", model);
        }
    }
}
