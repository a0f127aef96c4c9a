use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use adiaphase_core::adiabatic::{self, AdiabaticRunConfig};
use adiaphase_core::consistency;
use adiaphase_core::eigenflow::{fix_gauge_parallel, fix_gauge_periodic, track_flow, Gauge, SpectralFlow};
use adiaphase_core::linalg::wrap_phase;
use adiaphase_core::phases;
use adiaphase_core::propagator::{evolve, Integrator};
use adiaphase_core::schedule::{make_precessing_spin, HamiltonianSchedule, PrecessingSpinParams};
use proptest::prelude::*;

fn spin(omega: f64, theta: f64) -> HamiltonianSchedule {
    make_precessing_spin(PrecessingSpinParams::new(1.0, omega, theta)).unwrap()
}

fn raw_flow(omega: f64, theta: f64, steps: usize) -> SpectralFlow {
    track_flow(&spin(omega, theta), steps, None).unwrap()
}

#[test]
fn parallel_closure_matches_cyclic_phase() {
    for theta in [0.3, FRAC_PI_3, 1.2, 2.5] {
        let flow = fix_gauge_parallel(&raw_flow(0.02, theta, 8000)).unwrap();
        let closure = flow.vector(0, 1).dotc(&flow.vector(8000, 1)).arg();
        let gamma = phases::berry_phase_cyclic(&flow, 1).unwrap().value;
        assert!(wrap_phase(closure - gamma).abs() <= 1e-6, "θ={theta}");
        // and the solid-angle value −π(1 − cosθ)
        assert!(wrap_phase(gamma + PI * (1.0 - theta.cos())).abs() <= 1e-4, "θ={theta}");
    }
}

#[test]
fn level_sum_rule() {
    for theta in [0.4, FRAC_PI_3, 2.0, 2.9] {
        let flow = raw_flow(0.03, theta, 4000);
        let up = phases::berry_phase_cyclic(&flow, 1).unwrap().value;
        let down = phases::berry_phase_cyclic(&flow, 0).unwrap().value;
        assert!(wrap_phase(up + down).abs() <= 1e-6);
    }
}

#[test]
fn parallel_gauge_is_idempotent() {
    let once = fix_gauge_parallel(&raw_flow(0.05, 1.0, 1000)).unwrap();
    let twice = fix_gauge_parallel(&once).unwrap();
    for k in 0..=1000 {
        assert!((&once.vectors[k] - &twice.vectors[k]).norm() <= 1e-12);
    }
}

#[test]
fn residual_shrinks_monotonically_with_omega() {
    let mut previous = f64::INFINITY;
    for omega in [0.04, 0.02, 0.01, 0.005] {
        let s = spin(omega, FRAC_PI_3);
        let trace = evolve(&s, 8000).unwrap();
        let flow = fix_gauge_parallel(&track_flow(&s, 8000, None).unwrap()).unwrap();
        let ledger = phases::phase_ledger(&flow, 1).unwrap();
        let gamma = phases::berry_phase_cyclic(&flow, 1).unwrap();
        let r = consistency::berry_retention_test(&trace, &flow, &ledger, 1, gamma).unwrap();
        assert!(r.berry_residual_correct.abs() <= previous, "ω={omega}");
        previous = r.berry_residual_correct.abs();
    }
}

#[test]
fn double_counting_at_the_branch_point() {
    let s = spin(0.01, FRAC_PI_2);
    let trace = evolve(&s, 8000).unwrap();
    let flow = fix_gauge_parallel(&track_flow(&s, 8000, None).unwrap()).unwrap();
    let periodic = fix_gauge_periodic(&flow).unwrap();
    let ledger = phases::phase_ledger(&periodic, 1).unwrap();
    let spurious = consistency::double_count_demo(&flow, &ledger, 1).unwrap();
    let phi = consistency::cyclic_overlap_exact(&trace, &flow, 1).unwrap().arg();
    let discrepancy = wrap_phase(phi - spurious.arg()).abs();
    assert!((discrepancy - PI).abs() <= 0.05, "{discrepancy}");

    let gamma = phases::berry_phase_cyclic(&flow, 1).unwrap();
    assert!(gamma.on_branch);
    let report = consistency::retention_report(&trace, &flow, &phases::phase_ledger(&flow, 1).unwrap(), 1, gamma).unwrap();
    assert!(report.on_branch);
}

#[test]
fn remainder_is_gauge_independent() {
    let s = spin(0.02, 1.1);
    let config = AdiabaticRunConfig {
        tau: s.duration(),
        steps: 4000,
        level: 1,
        include_geometric: true,
    };
    let par = adiabatic::run_adiabatic(&s, &config, Gauge::Parallel, Integrator::Magnus4).unwrap();
    let per = adiabatic::run_adiabatic(&s, &config, Gauge::Periodic, Integrator::Magnus4).unwrap();
    assert!((par.error.infidelity - per.error.infidelity).abs() <= 1e-10);
    assert!((par.error.phase_gap - per.error.phase_gap).abs() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn gauge_changes_nothing_observable(
        omega in 0.02..0.2f64,
        theta in 0.2..3.0f64,
        twist in prop::collection::vec(-PI..PI, 301),
    ) {
        let raw = raw_flow(omega, theta, 300);
        let twisted = raw.with_phase_twist(1, &twist).unwrap();
        let reference = phases::berry_phase_cyclic(&raw, 1).unwrap().value;
        let par_ref = fix_gauge_parallel(&raw).unwrap();
        for flow in [twisted.clone(), fix_gauge_parallel(&twisted).unwrap(), fix_gauge_periodic(&twisted).unwrap()] {
            prop_assert_eq!(&flow.energies, &raw.energies);
            for k in 0..300 {
                prop_assert!((flow.link(1, k).norm() - raw.link(1, k).norm()).abs() <= 1e-12);
            }
            prop_assert!((phases::berry_phase_cyclic(&flow, 1).unwrap().value - reference).abs() <= 1e-10);
        }
        // after parallel transport only the starting phase survives a twist
        let par = fix_gauge_parallel(&twisted).unwrap();
        let start = par.vector(0, 1).dotc(&par_ref.vector(0, 1));
        for k in [0, 150, 300] {
            let rel = par.vector(k, 1).dotc(&par_ref.vector(k, 1));
            prop_assert!((rel - start).norm() <= 1e-9);
        }
    }

    #[test]
    fn retention_identity(phi in -PI..PI, delta in -1e3..1e3f64, gamma in -PI..PI) {
        let (r19, r22) = consistency::retention_residuals(phi, delta, gamma);
        prop_assert!(wrap_phase(r22 - r19 - gamma).abs() <= 1e-10);
        prop_assert!(r19 > -PI && r19 <= PI && r22 > -PI && r22 <= PI);
    }
}
