//! Exact complex-rational scalars.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;
pub type Cq = Complex<BigRational>;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn cq(re: Q, im: Q) -> Cq {
    Complex::new(re, im)
}

pub fn cre(n: i64, d: i64) -> Cq {
    Complex::new(q(n, d), Q::zero())
}

pub fn cim(n: i64, d: i64) -> Cq {
    Complex::new(Q::zero(), q(n, d))
}

pub fn c_one() -> Cq {
    Complex::new(Q::one(), Q::zero())
}

pub fn c_i() -> Cq {
    Complex::new(Q::zero(), Q::one())
}

pub fn from_q(x: Q) -> Cq {
    Complex::new(x, Q::zero())
}

pub fn q_to_f64(x: &Q) -> f64 {
    // numer/denom may individually overflow f64 while the ratio does not
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = (x.numer().bits() as i64).max(x.denom().bits() as i64) - 900;
            let shift = shift.max(0) as usize;
            let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (x.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

pub fn cq_to_c64(x: &Cq) -> Complex<f64> {
    Complex::new(q_to_f64(&x.re), q_to_f64(&x.im))
}

pub fn binom(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Renders a rational as `a` or `a/b`.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn fmt_cq(x: &Cq) -> String {
    match (x.re.is_zero(), x.im.is_zero()) {
        (true, true) => "0".into(),
        (false, true) => fmt_q(&x.re),
        (true, false) => format!("{}i", fmt_q(&x.im)),
        (false, false) => {
            let sign = if x.im.is_negative() { "-" } else { "+" };
            format!("({} {} {}i)", fmt_q(&x.re), sign, fmt_q(&x.im.abs()))
        }
    }
}

/// Best rational approximation with denominator at most `max_den`
/// (continued-fraction convergents and semiconvergents).
pub fn rationalize(x: f64, max_den: i64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den {
            // largest admissible semiconvergent
            let t = (max_den - q0) / q1;
            let ps = t * p1 + p0;
            let qs = t * q1 + q0;
            let best = if qs > 0
                && ((ps as f64 / qs as f64) - x).abs() < ((p1 as f64 / q1 as f64) - x).abs()
            {
                (ps, qs)
            } else {
                (p1, q1)
            };
            return Some(q(best.0, best.1));
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        None
    } else {
        Some(q(p1, q1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(7.0 / 3.0, 24), Some(q(7, 3)));
        assert_eq!(rationalize(-2.0 / 3.0, 24), Some(q(-2, 3)));
        assert_eq!(rationalize(0.0, 24), Some(q(0, 1)));
        assert_eq!(rationalize(5.0 / 24.0 + 1e-12, 24), Some(q(5, 24)));
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Q::new(BigInt::from(3) << 2000usize, BigInt::from(7) << 2000usize);
        assert!((q_to_f64(&big) - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(6, 2), BigInt::from(15));
        assert_eq!(binom(2, 3), BigInt::zero());
        assert_eq!(factorial(5), BigInt::from(120));
    }
}
