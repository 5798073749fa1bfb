use std::f64::consts::PI;

use flowtime::quadrature::QuadratureRule;
use flowtime::quantum::{evolve, expectation, flow_rate, uncertainty, EigenFrame, Hamiltonian, Propagator};
use flowtime::rng::keyed_rng;
use flowtime::tf::{
    audit_system, finite_difference_tf, probability_trace, random_hamiltonian, random_projector, random_state,
    tf_distribution, timing_statistics, SystemAudit, TimeGrid,
};
use flowtime::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn system(seed: u64, dim: usize) -> (Hamiltonian, flowtime::quantum::DensityMatrix, flowtime::quantum::Projector) {
    let mut rng = keyed_rng(seed, dim as u64);
    let h = random_hamiltonian(&mut rng, dim).unwrap();
    let (rho0, _) = random_state(&mut rng, dim).unwrap();
    let m = random_projector(&mut rng, dim).unwrap();
    (h, rho0, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn propagator_is_unitary(seed in any::<u64>(), dim in 2usize..=8, t in 0.0f64..50.0) {
        let (h, _, _) = system(seed, dim);
        let u = Propagator::new(&h).unwrap().unitary(t);
        let err = (&u * u.adjoint() - DMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evolution_keeps_state_valid_and_energy_fixed(seed in any::<u64>(), dim in 2usize..=6, t in 0.0f64..30.0) {
        let (h, rho0, _) = system(seed, dim);
        let rho = evolve(&h, &rho0, t).unwrap();
        prop_assert!((rho.op().trace().re - 1.0).abs() < 1e-10);
        prop_assert!(rho.op().hermiticity_error() < 1e-10);
        prop_assert!(rho.eigenvalues()[0] > -1e-10);
        let scale = h.op().max_abs();
        let (e0, e1) = (expectation(&rho0, h.op()).unwrap(), expectation(&rho, h.op()).unwrap());
        prop_assert!((e0 - e1).abs() < 1e-10 * scale.max(1.0));
        let (s0, s1) = (uncertainty(&rho0, h.op()).unwrap(), uncertainty(&rho, h.op()).unwrap());
        prop_assert!((s0 - s1).abs() < 1e-8 * scale.max(1.0));
    }

    #[test]
    fn flow_rate_obeys_spread_inequality(seed in any::<u64>(), dim in 2usize..=6, t in 0.0f64..30.0) {
        // |dp/dt| <= 2 dH dM / hbar with dM = sqrt(p (1 - p))
        let (h, rho0, m) = system(seed, dim);
        let frame = EigenFrame::new(&h, &rho0, &m).unwrap();
        let (p, r) = frame.probability_and_rate(t);
        let dh = uncertainty(&rho0, h.op()).unwrap();
        let cap = 2.0 * dh * (p * (1.0 - p)).max(0.0).sqrt() / h.hbar();
        prop_assert!(r.abs() <= cap + 1e-9 * cap.max(1.0), "{r} > {cap}");
    }

    #[test]
    fn eigenframe_matches_commutator(seed in any::<u64>(), dim in 2usize..=5, t in 0.0f64..10.0) {
        let (h, rho0, m) = system(seed, dim);
        let direct = flow_rate(&h, &evolve(&h, &rho0, t).unwrap(), &m).unwrap();
        let fast = EigenFrame::new(&h, &rho0, &m).unwrap().rate(t);
        prop_assert!((direct - fast).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn random_systems_satisfy_all_bounds(seed in any::<u64>(), dim in 2usize..=8) {
        let (h, rho0, m) = system(seed, dim);
        let spread = Propagator::new(&h).unwrap().spectrum().spread();
        let grid = TimeGrid::new(0.0, 2.0 * PI * dim as f64 / spread, 801).unwrap();
        let outcome = audit_system(&h, &rho0, &m, &grid).unwrap();
        for a in outcome.audits() {
            prop_assert!(a.passed, "{a:?}");
        }
    }
}

#[test]
fn energy_shift_leaves_distribution_unchanged() {
    for seed in 0..20 {
        let (h, rho0, m) = system(seed, 4);
        let grid = TimeGrid::new(0.0, 12.0, 401).unwrap();
        let a = tf_distribution(&h, &rho0, &m, &grid).unwrap();
        let b = tf_distribution(&h.shifted(17.3), &rho0, &m, &grid).unwrap();
        for (x, y) in a.density.iter().zip(&b.density) {
            assert!((x - y).abs() < 1e-9 * a.pi_max());
        }
        assert!((a.delta_theta - b.delta_theta).abs() < 1e-12);
    }
}

#[test]
fn time_rescaling_is_covariant() {
    let (h, rho0, m) = system(3, 3);
    let grid = TimeGrid::new(0.0, 10.0, 801).unwrap();
    let base = tf_distribution(&h, &rho0, &m, &grid).unwrap();
    let base_stats = timing_statistics(&base).unwrap();
    let dh = uncertainty(&rho0, h.op()).unwrap();
    for s in [0.5, 2.0, 10.0] {
        let scaled = tf_distribution(&h.scaled(s), &rho0, &m, &grid.rescaled(s).unwrap()).unwrap();
        for (x, y) in base.density.iter().zip(&scaled.density) {
            assert!((s * x - y).abs() < 1e-9 * s * base.pi_max(), "s {s}: {}", (s * x - y).abs() / (s * base.pi_max()));
        }
        let stats = timing_statistics(&scaled).unwrap();
        assert!((stats.stddev * s - base_stats.stddev).abs() < 1e-9 * base_stats.stddev);
        let product = stats.stddev * uncertainty(&rho0, h.scaled(s).op()).unwrap();
        assert!((product - base_stats.stddev * dh).abs() < 1e-9 * product);
    }
}

#[test]
fn finite_difference_is_second_order_at_midpoints() {
    for seed in 0..5 {
        let (h, rho0, m) = system(seed, 3);
        let frame = EigenFrame::new(&h, &rho0, &m).unwrap();
        let err = |n: usize| {
            let grid = TimeGrid::new(0.0, 6.0, n).unwrap();
            let trace = probability_trace(&h, &rho0, &m, &grid).unwrap();
            trace
                .p
                .windows(2)
                .zip(grid.midpoints())
                .map(|(w, t)| ((w[1] - w[0]) / grid.dt() - frame.rate(t)).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(101) / err(201)).log2();
        assert!(order >= 1.9, "seed {seed}: order {order}");
    }
}

#[test]
fn step_estimator_converges_to_exact_density() {
    let (h, rho0, m) = system(11, 4);
    let mut prev = f64::INFINITY;
    for n in [51, 101, 201, 401] {
        let grid = TimeGrid::new(0.0, 8.0, n).unwrap();
        let step = finite_difference_tf(&probability_trace(&h, &rho0, &m, &grid).unwrap()).unwrap();
        let exact = tf_distribution(&h, &rho0, &m, &TimeGrid::new(0.0, 8.0, 2 * n - 1).unwrap()).unwrap();
        // odd-indexed points of the refined grid are the midpoints
        let err = step.density.iter().enumerate().map(|(k, d)| (d - exact.density[2 * k + 1]).abs()).fold(0.0, f64::max);
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-2);
}

#[test]
fn quadrature_rules_converge_at_their_order() {
    let f = |x: f64| (3.0 * x).sin() + x * x;
    let exact = (1.0 - 3f64.cos()) / 3.0 + 1.0 / 3.0;
    let err = |rule: QuadratureRule, n: usize| {
        let h = 1.0 / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
        (rule.integrate(&v, h) - exact).abs()
    };
    let simpson = (err(QuadratureRule::Simpson, 21) / err(QuadratureRule::Simpson, 41)).log2();
    let trapezoid = (err(QuadratureRule::Trapezoid, 21) / err(QuadratureRule::Trapezoid, 41)).log2();
    assert!(simpson > 3.8, "{simpson}");
    assert!((trapezoid - 2.0).abs() < 0.1, "{trapezoid}");
}

#[test]
fn stationary_systems_are_skipped() {
    let (h, _, m) = system(5, 3);
    let eig = Propagator::new(&h).unwrap().spectrum().eigenvectors().column(1).iter().copied().collect::<Vec<_>>();
    let rho0 = flowtime::quantum::DensityMatrix::pure(&eig).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 101).unwrap();
    assert_eq!(audit_system(&h, &rho0, &m, &grid).unwrap(), SystemAudit::SkippedStationary);
    assert_eq!(tf_distribution(&h, &rho0, &m, &grid).unwrap_err(), Error::NoPopulationFlow);
}
