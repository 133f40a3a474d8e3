mod common;

use impasse_core::algebraic::{algebraic_jacobian, initialize_equilibrium, AlgebraicState};
use impasse_core::impasse::*;
use impasse_core::devices::motor_equiv_admittance;
use impasse_core::linalg::{det_r, sigma_max_c, sigma_min_c, CMatrix, RMatrix, C64};
use impasse_core::PowerSystem;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::Rng;

fn unit_state(n: usize) -> AlgebraicState {
    AlgebraicState { theta: vec![0.0; n], v: vec![1.0; n] }
}

#[test]
fn unit_voltage_snapshot_is_the_rated_load() {
    let case = common::ieee9();
    let sys = PowerSystem::new(case.clone()).unwrap();
    let (_, st) = initialize_equilibrium(&case).unwrap();
    let snap = equivalent_snapshot(&sys, &st.x, &unit_state(9)).unwrap();
    for l in &case.static_loads {
        assert_eq!(snap.g_stat[l.bus - 1], l.p0);
        assert_eq!(snap.b_stat[l.bus - 1], -l.q0);
    }
    assert_eq!(snap.g_stat[0], 0.0);
}

#[test]
fn snapshot_matches_per_bus_oracle_after_the_fault() {
    let case = common::ieee9();
    let tr = impasse_core::simulator::run_scenario(
        &case,
        &common::bus8_fault(0.0),
        &impasse_core::simulator::SimOptions::with_horizon(1.3),
    )
    .unwrap();
    let s = &tr.last().state;
    let sys = PowerSystem::new(tr.final_case.clone()).unwrap();
    let snap = equivalent_snapshot(&sys, &s.x, &s.y).unwrap();
    for l in &case.static_loads {
        let v = s.y.v[l.bus - 1];
        let p = l.p0 * v.powf(l.alpha);
        let q = l.q0 * v.powf(l.beta);
        assert!((snap.g_stat[l.bus - 1] - p / (v * v)).abs() < 1e-12);
        assert!((snap.b_stat[l.bus - 1] + q / (v * v)).abs() < 1e-12);
    }
    for (k, m) in case.motors.iter().enumerate() {
        let st = sys.motor_state(&s.x, k);
        assert_eq!(snap.y_mot[m.bus - 1], motor_equiv_admittance(st.sigma, m).unwrap());
    }
}

#[test]
fn y1_and_y2_special_cases() {
    let mut rng = common::rng(61);
    let mut case = common::random_case(&mut rng, 4, 1, false, false);
    let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
    let n = 4;

    // Constant power: Y₁ is the bare network.
    case = sys.case.clone();
    for l in &mut case.static_loads {
        l.alpha = 0.0;
        l.beta = 0.0;
    }
    let s0 = PowerSystem::new(case.clone()).unwrap();
    let snap = equivalent_snapshot(&s0, &x, &y).unwrap();
    let y1 = build_y1(&s0.adm, &snap);
    assert_eq!(y1, &s0.adm.y_bus + &s0.adm.y_gen);
    let y2 = build_y2(&snap);
    for i in 0..n {
        assert_eq!(y2[(i, i)], C64::new(snap.g_stat[i], snap.b_stat[i]));
    }

    // Impedance loads: Y₂ vanishes and Y₁ gains the full equivalent shunt.
    for l in &mut case.static_loads {
        l.alpha = 2.0;
        l.beta = 2.0;
    }
    let s2 = PowerSystem::new(case).unwrap();
    let snap = equivalent_snapshot(&s2, &x, &y).unwrap();
    let y1 = build_y1(&s2.adm, &snap);
    let y2 = build_y2(&snap);
    assert_eq!(y2, CMatrix::zeros(n, n));
    let bare = &s2.adm.y_bus + &s2.adm.y_gen;
    for i in 0..n {
        assert!((y1[(i, i)] - bare[(i, i)] - C64::new(snap.g_stat[i], snap.b_stat[i])).norm() < 1e-12);
        for j in (0..n).filter(|&j| j != i) {
            assert_eq!(y1[(i, j)], bare[(i, j)]);
        }
    }
    // With Y₂ = 0, Y′ is block diagonal with conjugate blocks.
    let yp = build_yprime(&y1, &y2, &y.theta);
    assert!((sigma_min_c(&yp) - sigma_min_c(&y1)).abs() < 1e-12);
}

#[test]
fn y1_matches_term_by_term_sum_on_nine_bus() {
    let (sys, st) = initialize_equilibrium(&common::ieee9()).unwrap();
    let snap = equivalent_snapshot(&sys, &st.x, &st.y).unwrap();
    let y1 = build_y1(&sys.adm, &snap);
    let mut oracle = sys.adm.y_bus.clone();
    for g in &sys.case.generators {
        oracle[(g.bus - 1, g.bus - 1)] += (C64::new(g.r_a, g.x_d2)).inv();
    }
    for (k, m) in sys.case.motors.iter().enumerate() {
        let s = sys.motor_state(&st.x, k);
        oracle[(m.bus - 1, m.bus - 1)] += motor_equiv_admittance(s.sigma, m).unwrap();
    }
    for l in &sys.case.static_loads {
        let v = st.y.v[l.bus - 1];
        let g = l.p0 * v.powf(l.alpha - 2.0);
        let b = -l.q0 * v.powf(l.beta - 2.0);
        oracle[(l.bus - 1, l.bus - 1)] += C64::new(0.5 * l.alpha * g, 0.5 * l.beta * b);
    }
    assert!((y1 - oracle).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn rhs_identity_three_ways() {
    let mut rng = common::rng(62);
    for _ in 0..20 {
        let case = common::random_case(&mut rng, 6, 2, true, false);
        let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
        let snap = equivalent_snapshot(&sys, &x, &y).unwrap();
        let y1 = build_y1(&sys.adm, &snap);
        let th = theorem1_check(&y1, &snap);
        let y2t = build_y2(&snap) * rotation(&y.theta);
        let by_svd = sigma_max_c(&y2t);
        let by_bus = (0..6)
            .map(|i| {
                let g = (1.0 - 0.5 * snap.alpha[i]) * snap.g_stat[i];
                let b = (1.0 - 0.5 * snap.beta[i]) * snap.b_stat[i];
                g.hypot(b)
            })
            .fold(0.0, f64::max);
        assert!((th.y2_max - by_svd).abs() <= 1e-12 * by_svd.max(1.0));
        assert!((th.y2_max - by_bus).abs() <= 1e-12 * by_bus.max(1.0));
    }
}

#[test]
fn theorem1_examples() {
    let (sys, st) = initialize_equilibrium(&common::ieee9()).unwrap();
    let r = impasse_report(&sys, 0.0, &st.x, &st.y).unwrap();
    assert!(r.i_vs > 1.0 && !r.satisfied());

    // σ_min(I) = 1 against a single bus with (1 − α/2) G = 2.
    let snap = EquivalentLoadSnapshot {
        y_mot: vec![C64::new(0.0, 0.0)],
        g_stat: vec![4.0],
        b_stat: vec![0.0],
        alpha: vec![1.0],
        beta: vec![0.0],
    };
    let c = theorem1_check(&CMatrix::identity(1, 1), &snap);
    assert_eq!((c.sigma_min_y1, c.y2_max, c.i_vs, c.satisfied), (1.0, 2.0, 0.5, true));
}

/// The `I_vs <= 1` test as a pointwise property: wherever `J_alg` is singular on the
/// manifold, the necessary condition holds. Singular points come from a
/// shunt continuation with refitted loads.
#[test]
fn necessity_holds_at_constructed_singular_points() {
    let mut found = 0;
    for seed in 70..90 {
        let mut rng = common::rng(seed);
        let motor = rng.gen_bool(0.5);
        let case = common::random_case(&mut rng, 5, 2, motor, false);
        let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
        let at = |b: f64| common::fit_loads(&sys.case.with_shunt(2, b).unwrap(), &x, &y);
        let det = |b: f64| det_r(&algebraic_jacobian(&at(b), &x, &y).unwrap());
        let s0 = det(0.0).signum();
        let Some(mut hi) = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0].into_iter().find(|&b| det(b).signum() != s0) else {
            continue;
        };
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if det(mid).signum() == s0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = at(0.5 * (lo + hi));
        let r = impasse_report(&s, 0.0, &x, &y).unwrap();
        assert!(r.hit, "{r:?}");
        assert!(r.satisfied() && r.i_vs <= 1.0, "seed {seed}: {r:?}");
        assert!(r.min_mod_eig_jalg <= 1e-6 * r.sigma_max_jalg);
        found += 1;
    }
    assert!(found >= 5, "only {found} singular points constructed");
}

fn b1_lambda_min(y1: &CMatrix) -> f64 {
    let b: RMatrix = y1.map(|z| -z.im);
    let b = (&b + b.transpose()) * 0.5;
    SymmetricEigen::new(b).eigenvalues.min()
}

fn with_shunt(y1: &CMatrix, bus: usize, b0: f64) -> CMatrix {
    let mut m = y1.clone();
    m[(bus - 1, bus - 1)] += C64::new(0.0, b0);
    m
}

#[test]
fn nine_bus_sensitivities() {
    let (sys, st) = initialize_equilibrium(&common::ieee9()).unwrap();
    let snap = equivalent_snapshot(&sys, &st.x, &st.y).unwrap();
    let y1 = build_y1(&sys.adm, &snap);
    let h = 1e-6;
    for bus in [5, 6, 8] {
        let s = shunt_sensitivity(&y1, bus).unwrap();
        assert!(s.value <= 0.0 && s.approx_ok && !s.degenerate);
        let fd_b1 = (b1_lambda_min(&with_shunt(&y1, bus, h)) - b1_lambda_min(&with_shunt(&y1, bus, -h))) / (2.0 * h);
        assert!((s.value - fd_b1).abs() <= 1e-6, "bus {bus}: {} vs {fd_b1}", s.value);
        let fd_y1 = (sigma_min_c(&with_shunt(&y1, bus, h)) - sigma_min_c(&with_shunt(&y1, bus, -h))) / (2.0 * h);
        assert!((s.exact - fd_y1).abs() <= 1e-6, "bus {bus}: {} vs {fd_y1}", s.exact);
        assert!(s.exact <= 0.0);
    }
}

/// Without real parts (lossless network, no stator resistance, constant-
/// current active loads) the formula is exact for `σ_min(Y₁)`.
#[test]
fn formula_is_exact_when_y1_is_imaginary() {
    let mut rng = common::rng(63);
    let mut case = common::random_case(&mut rng, 6, 2, false, true);
    for l in &mut case.static_loads {
        l.alpha = 0.0;
        l.q0 = rng.gen_range(-0.3..0.0);
        l.beta = 2.0;
    }
    let sys = PowerSystem::new(case).unwrap();
    let snap = equivalent_snapshot(&sys, &vec![0.0; sys.layout.len], &unit_state(6)).unwrap();
    let y1 = build_y1(&sys.adm, &snap);
    assert!(y1.iter().all(|z| z.re == 0.0));
    let h = 1e-6;
    for bus in 1..=6 {
        let s = shunt_sensitivity(&y1, bus).unwrap();
        let fd = (sigma_min_c(&with_shunt(&y1, bus, h)) - sigma_min_c(&with_shunt(&y1, bus, -h))) / (2.0 * h);
        assert!((s.value - fd).abs() <= 1e-6, "bus {bus}: {} vs {fd}", s.value);
        assert!((s.value - s.exact).abs() <= 1e-10);
    }
}

#[test]
fn min_modulus_eigenvalue_tracks_sigma_min_on_collapse() {
    let tr = impasse_core::simulator::run_scenario(
        &common::ieee9(),
        &common::bus8_fault(0.3),
        &impasse_core::simulator::SimOptions::with_horizon(4.0),
    )
    .unwrap();
    let last = tr.last().report;
    assert!(last.hit);
    assert!(last.min_mod_eig_jalg <= 1e-6 * last.sigma_max_jalg);
    // Both measures are far from zero at the start.
    let first = tr.samples[0].report;
    assert!(first.min_mod_eig_jalg > 1e-2 && first.sigma_min_jalg > 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sensitivity_is_never_positive(seed in 0u64..10_000, bus in 1usize..=5) {
        let mut rng = common::rng(seed);
        let case = common::random_case(&mut rng, 5, 2, true, false);
        let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
        let snap = equivalent_snapshot(&sys, &x, &y).unwrap();
        let y1 = build_y1(&sys.adm, &snap);
        if let Ok(s) = shunt_sensitivity(&y1, bus) {
            prop_assert!(s.value <= 0.0);
        }
    }

    /// An inductor `b0 < 0` never lowers `λ_min(B₁)`, and lowers `σ_min(Y₁)`
    /// by no more than the first-order gap between the two measures.
    #[test]
    fn inductors_do_not_reduce_the_margin(seed in 0u64..10_000, bus in 1usize..=5, b0 in -0.01f64..0.0) {
        let mut rng = common::rng(seed);
        let case = common::random_case(&mut rng, 5, 2, false, false);
        let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
        let snap = equivalent_snapshot(&sys, &x, &y).unwrap();
        let y1 = build_y1(&sys.adm, &snap);
        prop_assume!(b1_lambda_min(&y1) > 0.0);
        prop_assert!(b1_lambda_min(&with_shunt(&y1, bus, b0)) >= b1_lambda_min(&y1) - 1e-12);
        let s = shunt_sensitivity(&y1, bus).unwrap();
        let drop = sigma_min_c(&y1) - sigma_min_c(&with_shunt(&y1, bus, b0));
        prop_assert!(drop <= b0.abs() * (s.exact - s.value).abs().max(0.0) + 10.0 * b0 * b0 + 1e-12);
    }
}

