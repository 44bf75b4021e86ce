//! Baker-Campbell-Hausdorff composition and the exponential/logarithm
//! route used to cross-check it.
//!
//! The BCH coefficients are taken from `log(e^a e^b)` expanded in the free
//! associative algebra on two letters; the Dynkin-Specht-Wever map turns the
//! degree-`n` part `sum_w c_w w` into `(1/n) sum_w c_w [w]` with right-nested
//! brackets `[w1, [w2, ... [w_{n-1}, w_n]]]`.

use super::coeff::*;
use super::OperatorPoly;
use crate::error::{Error, Result};
use num_rational::BigRational;
use num_traits::{One, Zero};
use once_cell::sync::Lazy;
use std::collections::BTreeMap;

pub const MAX_BCH_ORDER: usize = 8;

type Word = Vec<u8>;
type Series = BTreeMap<Word, Q>;

fn series_mul(a: &Series, b: &Series, max_len: usize) -> Series {
    let mut out = Series::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            if wa.len() + wb.len() > max_len {
                continue;
            }
            let mut w = wa.clone();
            w.extend_from_slice(wb);
            *out.entry(w).or_insert_with(Q::zero) += ca * cb;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn exp_letter(letter: u8, max_len: usize) -> Series {
    let mut s = Series::new();
    for n in 0..=max_len {
        s.insert(vec![letter; n], BigRational::new(1.into(), factorial(n as u32)));
    }
    s
}

/// Coefficients `c_w` of `log(e^a e^b)` per degree (letters 0 = a, 1 = b).
fn compute_goldberg(max_len: usize) -> Vec<Vec<(Word, Q)>> {
    let prod = series_mul(&exp_letter(0, max_len), &exp_letter(1, max_len), max_len);
    let mut y = prod;
    y.remove(&Vec::new());
    let mut log = Series::new();
    let mut pw: Series = [(Vec::new(), Q::one())].into_iter().collect();
    for m in 1..=max_len {
        pw = series_mul(&pw, &y, max_len);
        let sign = if m % 2 == 1 { 1 } else { -1 };
        for (w, c) in &pw {
            *log.entry(w.clone()).or_insert_with(Q::zero) += c * q(sign, m as i64);
        }
    }
    let mut by_deg = vec![Vec::new(); max_len + 1];
    for (w, c) in log {
        if !c.is_zero() {
            by_deg[w.len()].push((w, c));
        }
    }
    by_deg
}

static GOLDBERG: Lazy<Vec<Vec<(Word, Q)>>> = Lazy::new(|| compute_goldberg(MAX_BCH_ORDER));

/// Words and coefficients of the homogeneous degree-`n` part of `log(e^a e^b)`.
pub fn goldberg_table(n: usize) -> &'static [(Vec<u8>, Q)] {
    &GOLDBERG[n.min(MAX_BCH_ORDER)]
}

/// `sum_w d_w [w]` by grouping words on their leading letter, so each
/// distinct prefix costs one commutator.
fn nested_sum(words: &[(&[u8], Q)], a: &OperatorPoly, b: &OperatorPoly) -> Result<OperatorPoly> {
    let letter = |x: u8| if x == 0 { a } else { b };
    let mut out = OperatorPoly::zero(a.ctx());
    let mut groups: [Vec<(&[u8], Q)>; 2] = [Vec::new(), Vec::new()];
    for (w, c) in words {
        if w.len() == 1 {
            out = out.add(&letter(w[0]).scale(&from_q(c.clone())))?;
        } else {
            groups[w[0] as usize].push((&w[1..], c.clone()));
        }
    }
    for (x, g) in groups.iter().enumerate() {
        if g.is_empty() {
            continue;
        }
        let inner = nested_sum(g, a, b)?;
        if inner.is_zero() {
            continue;
        }
        out = out.add(&letter(x as u8).commutator(&inner)?)?;
    }
    Ok(out)
}

/// `Z` with `e^Z = e^a e^b`, keeping BCH degrees `1..=bch_order`.
pub fn bch_combine(a: &OperatorPoly, b: &OperatorPoly, bch_order: usize) -> Result<OperatorPoly> {
    if bch_order == 0 || bch_order > MAX_BCH_ORDER {
        return Err(Error::OrderOutOfRange { requested: bch_order, supported: MAX_BCH_ORDER });
    }
    if a.ctx() != b.ctx() {
        return Err(Error::Config("bch operands differ in context".into()));
    }
    if a.is_zero() {
        return Ok(b.clone());
    }
    if b.is_zero() {
        return Ok(a.clone());
    }
    let mut words: Vec<(&[u8], Q)> = Vec::new();
    for n in 1..=bch_order {
        for (w, c) in goldberg_table(n) {
            // brackets ending in a repeated letter vanish
            if n >= 2 && w[n - 1] == w[n - 2] {
                continue;
            }
            words.push((w.as_slice(), c / BigRational::from_integer((n as i64).into())));
        }
    }
    nested_sum(&words, a, b)
}

/// Left-to-right BCH fold of several exponents.
pub fn bch_combine_terms(terms: &[OperatorPoly], bch_order: usize) -> Result<OperatorPoly> {
    let mut it = terms.iter();
    let first = match it.next() {
        Some(t) => t.clone(),
        None => return Err(Error::Config("empty exponent list".into())),
    };
    it.try_fold(first, |acc, t| bch_combine(&acc, t, bch_order))
}

fn require_nilpotent(p: &OperatorPoly) -> Result<()> {
    if p.iter().any(|(m, _)| m.c.lam() == 0) {
        return Err(Error::Config(
            "series needs every term to carry at least one power of lambda0".into(),
        ));
    }
    Ok(())
}

/// Truncated exponential; terminates because every term raises the lambda0 grade.
pub fn exp_poly(a: &OperatorPoly) -> Result<OperatorPoly> {
    require_nilpotent(a)?;
    let mut res = OperatorPoly::one(a.ctx());
    let mut term = OperatorPoly::one(a.ctx());
    for m in 1..=(a.truncation().max_lambda as i64 + 1) {
        term = term.mul(a)?.scale(&cre(1, m));
        if term.is_zero() {
            break;
        }
        res = res.add(&term)?;
    }
    Ok(res)
}

/// Truncated logarithm of `u = 1 + y` with `y` nilpotent in the grading.
pub fn log_poly(u: &OperatorPoly) -> Result<OperatorPoly> {
    let one = OperatorPoly::one(u.ctx());
    let y = u.sub(&one)?;
    require_nilpotent(&y)?;
    let mut res = OperatorPoly::zero(u.ctx());
    let mut pw = one;
    for m in 1..=(u.truncation().max_lambda as i64 + 1) {
        pw = pw.mul(&y)?;
        if pw.is_zero() {
            break;
        }
        let s = if m % 2 == 1 { 1 } else { -1 };
        res = res.add(&pw.scale(&cre(s, m)))?;
    }
    Ok(res)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn coeff_of(word: &[u8]) -> Q {
        goldberg_table(word.len())
            .iter()
            .find(|(w, _)| w.as_slice() == word)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Q::zero)
    }

    #[test]
    fn low_order_goldberg_coefficients() {
        // log(e^a e^b) = a + b + (ab - ba)/2 + (aab - 2aba + abb + baa - 2bab + bba)/12 + ...
        assert_eq!(coeff_of(&[0]), q(1, 1));
        assert_eq!(coeff_of(&[0, 1]), q(1, 2));
        assert_eq!(coeff_of(&[1, 0]), q(-1, 2));
        assert_eq!(coeff_of(&[0, 0, 1]), q(1, 12));
        assert_eq!(coeff_of(&[0, 1, 0]), q(-1, 6));
        assert_eq!(coeff_of(&[1, 1, 0]), q(1, 12));
        assert_eq!(coeff_of(&[0, 0, 1, 1]), q(1, 24));
        assert_eq!(coeff_of(&[1, 0, 1, 0]), q(1, 12));
        assert_eq!(coeff_of(&[0, 1, 1, 0]), q(0, 1));
        // the degree-n part of log(e^a e^b) has no pure-letter words for n >= 2
        assert_eq!(coeff_of(&[0, 0]), q(0, 1));
        assert_eq!(coeff_of(&[1, 1, 1, 1]), q(0, 1));
    }

    #[test]
    fn goldberg_degree_sums_vanish_for_commuting_letters() {
        // setting a = b = t makes log(e^t e^t) = 2t
        for n in 2..=MAX_BCH_ORDER {
            let s: Q = goldberg_table(n).iter().map(|(_, c)| c.clone()).sum();
            assert!(s.is_zero(), "degree {}", n);
        }
    }
}
