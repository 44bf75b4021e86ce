//! Splitting a loop exponent into photon-number phase and mechanical
//! displacement factors.
//!
//! For `z = -i w(n) + sum_p L_p` with `L_p = n^p (u_p c + v_p d)` linear in
//! the ladder operators, all commutators `[L_p, L_q]` are central, so
//! `e^z = e^{L_p1} e^{L_p2} ... e^{-1/2 sum_{p<q} [L_p, L_q]} e^{-i w(n)}`.

use super::coeff::*;
use super::{Basis, Central, Ctx, Model, Mono, OperatorPoly, N_IDX};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Linear ladder content at one photon-number power: `c` and `d` coefficients
/// as central polynomials (scaled basis).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPart {
    pub n_power: u8,
    pub creation: BTreeMap<Central, Cq>,
    pub annihilation: BTreeMap<Central, Cq>,
}

#[derive(Clone, Debug)]
pub struct SplitFactors {
    /// Central (pure photon-number) part of the exponent.
    pub pure: OperatorPoly,
    /// One linear factor per photon-number power, increasing.
    pub linear: Vec<OperatorPoly>,
    pub linear_parts: Vec<LinearPart>,
    /// `-1/2 sum_{p<q} [L_p, L_q]` (central).
    pub cross: OperatorPoly,
}

impl SplitFactors {
    /// Factors in product order: linear factors, cross term, pure phase.
    pub fn factors(&self) -> Vec<OperatorPoly> {
        let mut v: Vec<OperatorPoly> = self.linear.clone();
        if !self.cross.is_zero() {
            v.push(self.cross.clone());
        }
        if !self.pure.is_zero() {
            v.push(self.pure.clone());
        }
        v
    }
}

pub(crate) fn recontext(p: &OperatorPoly, ctx: Ctx) -> OperatorPoly {
    let mut r = OperatorPoly::zero(ctx);
    for (m, c) in p.iter() {
        r.add_term(*m, c.clone());
    }
    r
}

pub fn zassenhaus_split(z: &OperatorPoly) -> Result<SplitFactors> {
    let z = z.to_ladder();
    let ctx = z.ctx();
    let mut pure = OperatorPoly::zero(ctx);
    let mut groups: BTreeMap<u8, OperatorPoly> = BTreeMap::new();
    for (m, c) in z.iter() {
        match m.word_len() {
            0 => pure.add_term(*m, c.clone()),
            1 => groups
                .entry(m.c.n())
                .or_insert_with(|| OperatorPoly::zero(ctx))
                .add_term(*m, c.clone()),
            _ => {
                return Err(Error::UnsupportedExponent(format!(
                    "mechanical word of degree {} at {}",
                    m.word_len(),
                    super::fmt_central(&m.c, ctx.model)
                )))
            }
        }
    }
    let linear: Vec<OperatorPoly> = groups.values().cloned().collect();
    let linear_parts = groups
        .iter()
        .map(|(&p, poly)| {
            let mut lp = LinearPart { n_power: p, creation: BTreeMap::new(), annihilation: BTreeMap::new() };
            for (m, c) in poly.iter() {
                let tgt = if m.w[0] == 1 { &mut lp.creation } else { &mut lp.annihilation };
                tgt.insert(m.c, c.clone());
            }
            lp
        })
        .collect();
    // cross terms use the undeformed ladder commutator [d, c] = 1/2
    let plain = Ctx { model: Model::None, basis: Basis::Ladder, ..ctx };
    let mut cross = OperatorPoly::zero(plain);
    for i in 0..linear.len() {
        for j in (i + 1)..linear.len() {
            let a = recontext(&linear[i], plain);
            let b = recontext(&linear[j], plain);
            cross = cross.add(&a.commutator(&b)?)?;
        }
    }
    let cross = recontext(&cross.scale(&cre(-1, 2)), ctx);
    Ok(SplitFactors { pure, linear, linear_parts, cross })
}

/// Convenience: photon-number power carried by a monomial.
pub fn n_power(m: &Mono) -> u8 {
    m.c.0[N_IDX]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Truncation;

    #[test]
    fn quadratic_content_is_rejected() {
        let ctx = Ctx::new(Model::None, Basis::Ladder, Truncation::default());
        let z = OperatorPoly::term(ctx, Mono::new(2, 0, Central::new(3, 3, 0, 0)), c_one());
        assert!(matches!(zassenhaus_split(&z), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn pure_exponent_is_single_factor() {
        let ctx = Ctx::new(Model::None, Basis::Ladder, Truncation::default());
        let z = OperatorPoly::term(ctx, Mono::new(0, 0, Central::new(2, 2, 0, 0)), cim(-1, 1));
        let s = zassenhaus_split(&z).unwrap();
        assert_eq!(s.factors(), vec![z]);
    }
}
