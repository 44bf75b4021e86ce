//! Reordering tables for the two normal-ordered bases.
//!
//! Quadrature basis: words are `P^a X^b`. Moving `X^b` past `P^c` uses the
//! Ore-extension rule `X^b P^c = sum_j C(b,j) delta^j(P^c) X^(b-j)` where
//! `delta(f) = i (1 + deformation) f'(P)`.
//!
//! Ladder basis: words are `c^i d^j` with `d = (X + iP)/2`, `c = (X - iP)/2`
//! (so `X = c + d`, `P = -i(d - c)`) and `[d, c] = 1/2 + qg*D`. These are the
//! physical ladder operators scaled by `1/sqrt 2`, which keeps all
//! coefficients rational.

use super::coeff::*;
use super::{Basis, Model};
use num_rational::BigRational;
use num_traits::Zero;
use once_cell::sync::Lazy;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

/// One entry of `R^b L^c` in normal form: `coeff * L^left R^right * qg^qg`.
#[derive(Clone, Debug)]
pub struct Entry {
    pub left: u8,
    pub right: u8,
    pub qg: u8,
    pub coeff: Cq,
}

type Key = (Model, Basis, u8, u8);
static CACHE: Lazy<RwLock<HashMap<Key, Arc<Vec<Entry>>>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

pub fn reorder(model: Model, basis: Basis, b: u8, c: u8) -> Arc<Vec<Entry>> {
    let key = (model, basis, b, c);
    if let Some(t) = CACHE.read().unwrap().get(&key) {
        return t.clone();
    }
    let t = Arc::new(match basis {
        Basis::Quadrature => quad_table(model, b, c),
        Basis::Ladder => ladder_table(model, b, c),
    });
    CACHE.write().unwrap().insert(key, t.clone());
    t
}

fn push(map: &mut BTreeMap<(u8, u8, u8), Cq>, key: (u8, u8, u8), v: Cq) {
    if key.2 > 1 || v.is_zero() {
        return;
    }
    let e = map.entry(key).or_insert_with(Cq::zero);
    *e += v;
}

fn finish(map: BTreeMap<(u8, u8, u8), Cq>) -> Vec<Entry> {
    map.into_iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|((left, right, qg), coeff)| Entry { left, right, qg, coeff })
        .collect()
}

/// `delta` on polynomials in P, keyed by (power, qg).
fn delta(model: Model, f: &BTreeMap<(u8, u8), Cq>) -> BTreeMap<(u8, u8), Cq> {
    let mut out: BTreeMap<(u8, u8), Cq> = BTreeMap::new();
    let mut add = |k: (u8, u8), v: Cq| {
        if k.1 > 1 || v.is_zero() {
            return;
        }
        *out.entry(k).or_insert_with(Cq::zero) += v;
    };
    for (&(p, s), c) in f {
        if p == 0 {
            continue;
        }
        let d = c * cre(p as i64, 1) * c_i();
        add((p - 1, s), d.clone());
        match model {
            Model::None => {}
            Model::Beta => add((p + 1, s + 1), d),
            Model::Gamma => add((p, s + 1), -d),
            Model::Mu => add((p - 1, s + 1), d),
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn quad_table(model: Model, b: u8, c: u8) -> Vec<Entry> {
    let mut map = BTreeMap::new();
    let mut dj: BTreeMap<(u8, u8), Cq> = BTreeMap::new();
    dj.insert((c, 0), c_one());
    for j in 0..=b {
        if j > 0 {
            dj = delta(model, &dj);
            if dj.is_empty() {
                break;
            }
        }
        let bin = from_q(BigRational::from_integer(binom(b as u32, j as u32)));
        for (&(p, s), cf) in &dj {
            push(&mut map, (p, b - j, s), cf * &bin);
        }
    }
    finish(map)
}

/// Deformation part `D` of `[d, c] = 1/2 + qg*D`, as normal-ordered (c-power, d-power, coeff).
fn ladder_d(model: Model) -> Vec<(u8, u8, Cq)> {
    match model {
        Model::None => vec![],
        // (beta/2) P^2 with P^2 = -(d - c)^2
        Model::Beta => vec![
            (0, 2, cre(-1, 2)),
            (1, 1, cre(1, 1)),
            (0, 0, cre(1, 4)),
            (2, 0, cre(-1, 2)),
        ],
        // -(gamma/2) P
        Model::Gamma => vec![(0, 1, cim(1, 2)), (1, 0, cim(-1, 2))],
        Model::Mu => vec![(0, 0, cre(1, 2))],
    }
}

/// Undeformed `d^f c^m` in normal form.
fn plain_ba(f: u8, m: u8) -> Vec<(u8, u8, Cq)> {
    let mut out = Vec::new();
    for l in 0..=f.min(m) {
        let n = factorial(l as u32) * binom(f as u32, l as u32) * binom(m as u32, l as u32);
        let c = BigRational::new(n, num_bigint::BigInt::from(1u64 << l));
        out.push((m - l, f - l, from_q(c)));
    }
    out
}

fn ladder_table(model: Model, b: u8, c: u8) -> Vec<Entry> {
    if b == 0 {
        return vec![Entry { left: c, right: 0, qg: 0, coeff: c_one() }];
    }
    let prev = ladder_table(model, b - 1, c);
    let d = ladder_d(model);
    let mut map = BTreeMap::new();
    for e in &prev {
        // d * c^i d^j = c^i d^(j+1) + [d, c^i] d^j
        push(&mut map, (e.left, e.right + 1, e.qg), e.coeff.clone());
        if e.left == 0 {
            continue;
        }
        let cp = e.left;
        push(
            &mut map,
            (cp - 1, e.right, e.qg),
            &e.coeff * cre(cp as i64, 2),
        );
        if e.qg == 1 {
            continue;
        }
        for i in 0..cp {
            let m = cp - 1 - i;
            for (da, db, dc) in &d {
                // c^i (c^da d^db) c^m
                for (ra, rb, rc) in plain_ba(*db, m) {
                    push(
                        &mut map,
                        (i + da + ra, rb + e.right, 1),
                        &e.coeff * dc * &rc,
                    );
                }
            }
        }
    }
    finish(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_quadrature_pair() {
        let t = reorder(Model::None, Basis::Quadrature, 1, 1);
        // X P = P X + i
        assert_eq!(t.len(), 2);
        assert!(t.iter().any(|e| e.left == 1 && e.right == 1 && e.coeff == c_one()));
        assert!(t.iter().any(|e| e.left == 0 && e.right == 0 && e.coeff == c_i()));
    }

    #[test]
    fn canonical_ladder_pair() {
        let t = reorder(Model::None, Basis::Ladder, 1, 1);
        assert!(t.iter().any(|e| e.left == 0 && e.right == 0 && e.coeff == cre(1, 2)));
    }

    #[test]
    fn mu_ladder_pair() {
        let t = reorder(Model::Mu, Basis::Ladder, 1, 1);
        assert!(t.iter().any(|e| e.left == 0 && e.right == 0 && e.qg == 1 && e.coeff == cre(1, 2)));
    }
}
