mod common;

use common::invariants::SUITES;

const CASES: u32 = 256;

fn suite(name: &str) {
    let (_, f) = SUITES.iter().find(|(n, _)| *n == name).expect("known suite");
    if let Err(e) = f(CASES) {
        panic!("{}: {}", name, e);
    }
}

#[test]
fn commutator_antisymmetry() {
    suite("commutator antisymmetry");
}

#[test]
fn jacobi_identity() {
    suite("Jacobi identity");
}

#[test]
fn closed_loops_leave_only_area() {
    suite("loop closure");
}

#[test]
fn reversed_loop_negates_exponent() {
    suite("loop reversal");
}

#[test]
fn loop_blocks_are_unitary() {
    suite("block unitarity");
}

#[test]
fn states_are_normalized() {
    suite("state normalization");
}

#[test]
fn inversion_recovers_strength() {
    suite("inversion soundness");
}

#[test]
fn results_are_deterministic() {
    suite("determinism");
}
