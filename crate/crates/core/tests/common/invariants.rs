//! Property suites shared by the invariants target and the acceptance report.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use qgloop::algebra::coeff::{q, Cq, Q};
use qgloop::algebra::{commutator, Central, Ctx, Model, Mono, OperatorPoly, Truncation};
use qgloop::loops::{compose, Axis, ComposeOptions, LoopSpec, PulseStep};
use qgloop::meanfield::{displaced_fock_overlap, displacement_element, exact_sum, thermal_overlap};
use qgloop::oracle::{loop_block, random_case, unitarity_defect, FockConfig};
use qgloop::params::preset;
use qgloop::precision::{pruned_preset, Inversion, REGISTERED};
use qgloop::robustness::ImpurityState;

pub type Suite = fn(u32) -> Result<(), String>;

pub const SUITES: [(&str, Suite); 8] = [
    ("commutator antisymmetry", antisymmetry),
    ("Jacobi identity", jacobi),
    ("loop closure", closure),
    ("loop reversal", reversal),
    ("block unitarity", unitarity),
    ("state normalization", normalization),
    ("inversion soundness", inversion),
    ("determinism", determinism),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn run<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::None), Just(Model::Beta), Just(Model::Gamma), Just(Model::Mu)]
}

fn rational() -> impl Strategy<Value = Q> {
    (-4i64..=4, 1i64..=3).prop_map(|(n, d)| q(n, d))
}

fn poly(model: Model) -> impl Strategy<Value = OperatorPoly> {
    let term = (0u8..=2, 0u8..=2, 0u8..=2, 0u8..=2, 0u8..=1, rational(), rational());
    prop::collection::vec(term, 1..=4).prop_map(move |ts| {
        let mut p = OperatorPoly::zero(Ctx::quadrature(model, Truncation::default()));
        for (l, r, n, lam, k, re, im) in ts {
            p.add_term(Mono::new(l, r, Central::new(n, lam, k, 0)), Cq::new(re, im));
        }
        p
    })
}

fn poly_pair() -> impl Strategy<Value = (OperatorPoly, OperatorPoly)> {
    model().prop_flat_map(|m| (poly(m), poly(m)))
}

fn poly_triple() -> impl Strategy<Value = (OperatorPoly, OperatorPoly, OperatorPoly)> {
    model().prop_flat_map(|m| (poly(m), poly(m), poly(m)))
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn antisymmetry(cases: u32) -> Result<(), String> {
    run(cases, poly_pair(), |(a, b)| {
        let s = commutator(&a, &b).unwrap().add(&commutator(&b, &a).unwrap()).unwrap();
        prop_assert!(s.is_zero(), "[a,b] + [b,a] has {} terms", s.len());
        Ok(())
    })
}

fn jacobi(cases: u32) -> Result<(), String> {
    run(cases, poly_triple(), |(a, b, c)| {
        let cyc = |x: &OperatorPoly, y: &OperatorPoly, z: &OperatorPoly| commutator(x, &commutator(y, z).unwrap()).unwrap();
        let s = cyc(&a, &b, &c).add(&cyc(&b, &c, &a)).unwrap().add(&cyc(&c, &a, &b)).unwrap();
        prop_assert!(s.is_zero(), "Jacobi sum has {} terms", s.len());
        Ok(())
    })
}

/// Closed polygon from interleaved X/P edges in half units.
fn closed_loop(max_pairs: usize) -> impl Strategy<Value = LoopSpec> {
    let edge = prop_oneof![-2i64..=-1, 1i64..=2];
    prop::collection::vec((edge.clone(), edge), 1..=max_pairs).prop_map(|pairs| {
        let (mut sx, mut sp) = (0i64, 0i64);
        let mut steps = Vec::new();
        for (x, p) in pairs {
            sx += x;
            sp += p;
            steps.push(PulseStep::frac(Axis::X, x, 2));
            steps.push(PulseStep::frac(Axis::P, p, 2));
        }
        steps.push(PulseStep::frac(Axis::X, -sx, 2));
        steps.push(PulseStep::frac(Axis::P, -sp, 2));
        steps.retain(|s| !s.is_zero());
        LoopSpec::new("prop", steps)
    })
}

/// `sum_{i<j} (x_i p_j - p_i x_j)` over the step scales.
fn pair_area(lp: &LoopSpec) -> Q {
    let v: Vec<(Q, Q)> = lp
        .steps
        .iter()
        .map(|s| match s.axis {
            Axis::X => (s.scale.clone(), q(0, 1)),
            Axis::P => (q(0, 1), s.scale.clone()),
        })
        .collect();
    let mut a = q(0, 1);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            a += &v[i].0 * &v[j].1 - &v[i].1 * &v[j].0;
        }
    }
    a
}

fn undeformed_exponent(lp: &LoopSpec) -> OperatorPoly {
    compose(lp, &ComposeOptions::new(Model::None, 4, 0)).unwrap().exponent
}

static AREA_UNIT: Lazy<Cq> = Lazy::new(|| {
    let sq = qgloop::loops::square_loop();
    let c = undeformed_exponent(&sq).coeff(&Mono::new(0, 0, Central::new(2, 2, 0, 0)));
    Cq::new(c.re / pair_area(&sq), c.im / pair_area(&sq))
});

/// Without cavity corrections a closed loop leaves only its area term.
fn closure(cases: u32) -> Result<(), String> {
    run(cases, closed_loop(3), |lp| {
        prop_assert!(lp.validate().is_ok());
        let e = undeformed_exponent(&lp);
        let area = pair_area(&lp);
        for (m, c) in e.iter() {
            prop_assert!(m.is_central(), "non-central residue {:?}", m);
            prop_assert_eq!(m.c, Central::new(2, 2, 0, 0));
            prop_assert_eq!(c, &Cq::new(&AREA_UNIT.re * &area, &AREA_UNIT.im * &area));
        }
        prop_assert_eq!(e.is_zero(), area == q(0, 1));
        Ok(())
    })
}

fn reversal(cases: u32) -> Result<(), String> {
    run(cases, (closed_loop(2), model(), 0u8..=1), |(lp, m, k)| {
        let opts = ComposeOptions::new(m, 3, k);
        let fwd = compose(&lp, &opts).map_err(|e| fail(e.to_string()))?.exponent;
        let back = compose(&lp.dagger(), &opts).map_err(|e| fail(e.to_string()))?.exponent;
        let s = fwd.add(&back).unwrap();
        prop_assert!(s.is_zero(), "log U + log U^dag has {} terms", s.len());
        Ok(())
    })
}

fn unitarity(cases: u32) -> Result<(), String> {
    let s = (closed_loop(2), model(), 0.01f64..0.2, 0.0f64..0.05, 0u8..=2, 0usize..4, 12usize..=24);
    run(cases, s, |(lp, m, lam, k, k_order, n, dm)| {
        let strength = if m == Model::None { 0.0 } else { 1e-3 };
        let cfg = FockConfig::new(4, dm, lam).with_k(k, k_order).with_model(m, strength);
        let d = unitarity_defect(&loop_block(&lp, &cfg, n));
        prop_assert!(d < 1e-9, "unitarity defect {:e}", d);
        Ok(())
    })
}

fn normalization(cases: u32) -> Result<(), String> {
    let s = (0.0f64..2.0, -1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, 0.0f64..0.5, 0u64..6);
    run(cases, s, |(nbar, a, b, c, d, eps, m)| {
        let (chi, ups) = (Complex64::new(a, b), Complex64::new(c, d));
        prop_assert!((thermal_overlap(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), nbar) - 1.0).norm() < 1e-12);
        prop_assert!(thermal_overlap(chi, ups, nbar).norm() <= 1.0 + 1e-12);
        prop_assert!((displaced_fock_overlap(chi, -chi, m, m) - 1.0).norm() < 1e-10);
        let row: f64 = (0..120).map(|mp| displacement_element(ups, m, mp).norm_sqr()).sum();
        prop_assert!((row - 1.0).abs() < 1e-10, "displacement row norm {}", row);
        let rho = ImpurityState { epsilon: eps }.density_matrix(nbar, 200);
        let tr: f64 = (0..200).map(|i| rho[i][i]).sum();
        prop_assert!((tr - 1.0).abs() < 1e-10, "trace {}", tr);
        Ok(())
    })
}

static INVERSIONS: Lazy<Vec<(Model, qgloop::params::ExperimentParams, Inversion)>> = Lazy::new(|| {
    REGISTERED
        .iter()
        .map(|&(lp, m)| {
            let name = match m {
                Model::Gamma => "pikovski-gamma",
                Model::Beta => "pikovski-beta",
                _ => "pikovski-mu",
            };
            let (_, p) = preset(name).unwrap();
            (m, p.clone(), Inversion::from_exponent(&pruned_preset(lp, m, &p).unwrap()).unwrap())
        })
        .collect()
});

fn inversion(cases: u32) -> Result<(), String> {
    run(cases, (0usize..REGISTERED.len(), -10.0f64..10.0, 0.5f64..2.0), |(i, s, scale)| {
        let (_, p, inv) = &INVERSIONS[i];
        let n = p.n_p * scale;
        let phi = inv.forward(p, s, n).unwrap();
        let back = inv.invert(p, phi, n).unwrap();
        let sens = inv.sensitivity(p, n).unwrap();
        // phi carries the QM phase, so recovery is limited by its rounding
        let tol = 1e-9 * (s.abs() + 1.0) + 4.0 * f64::EPSILON * phi.abs() / sens.abs();
        prop_assert!((back - s).abs() <= tol, "recovered {} from {} (tol {:e})", back, s, tol);
        Ok(())
    })
}

fn determinism(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0usize..1000), |(seed, i)| {
        let a = random_case(seed, i);
        let b = random_case(seed, i);
        prop_assert_eq!(&a.loop_spec, &b.loop_spec);
        prop_assert_eq!(&a.params, &b.params);
        let opts = ComposeOptions::new(a.model, 3, 1);
        let e1 = compose(&a.loop_spec, &opts).unwrap();
        let e2 = compose(&b.loop_spec, &opts).unwrap();
        prop_assert_eq!(&e1.exponent, &e2.exponent);
        let p = qgloop::loops::prune(&e1, &a.params, f64::MIN_POSITIVE);
        let (s1, s2) = (exact_sum(&p, &a.params, 10.0).unwrap(), exact_sum(&p, &a.params, 10.0).unwrap());
        prop_assert_eq!(s1.phase.to_bits(), s2.phase.to_bits());
        Ok(())
    })
}
