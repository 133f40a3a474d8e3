//! Acceptance report: one line per check, grouped by criterion.
//!
//! Binding checks decide the exit status. Lines marked `waived` are printed
//! for information only (the nine-bus device data is partly substituted, so
//! the quantitative timing targets do not bind; the ordinal claims do).
//! Lines marked `known` are implemented exactly as stated and expected to
//! fail; the report says why.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use impasse_core::algebraic::{algebraic_jacobian, initialize_equilibrium, jacobian_fd, solve_algebraic, AlgebraicState, PowerSystem};
use impasse_core::impasse::{build_y1, equivalent_snapshot, is_wcdd, lemma1_oracle, shunt_sensitivity, theorem2_check, yprime_at};
use impasse_core::linalg::{det_c, det_r, sigma_extremes_r, sigma_max_c, sigma_min_c, CMatrix, RMatrix, C64};
use impasse_core::simulator::{run_scenario, step, Event, EventKind, Scenario, SimOptions, Trajectory};
use impasse_core::NetworkCase;
use impasse_lab::{parse_case, CaseFile, Strictness};
use rand::Rng;

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Binding,
    Waived,
    Known,
}

struct Report {
    binding_failures: usize,
    known_failures: usize,
}

impl Report {
    fn line(&mut self, criterion: u8, kind: Kind, ok: bool, what: &str, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        let tag = match kind {
            Kind::Binding => "",
            Kind::Waived => " (waived, informational)",
            Kind::Known => " (known, not attainable as stated)",
        };
        println!("[{criterion}] {verdict}{tag}: {what}: {detail}");
        if !ok {
            match kind {
                Kind::Binding => self.binding_failures += 1,
                Kind::Known => self.known_failures += 1,
                Kind::Waived => {}
            }
        }
    }
}

fn shipped() -> (CaseFile, NetworkCase) {
    parse_case(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases/ieee9.json"), Strictness::Strict)
        .expect("shipped case parses")
}

fn block_rel_error(a: &RMatrix, f: &RMatrix) -> f64 {
    let n = a.nrows() / 2;
    let mut worst = 0.0f64;
    for (r, c) in [(0, 0), (0, n), (n, 0), (n, n)] {
        let ab = a.view((r, c), (n, n));
        let fb = f.view((r, c), (n, n));
        worst = worst.max((ab - fb).amax() / ab.amax().max(1e-12));
    }
    worst
}

fn criterion1(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut worst = 0.0f64;
    for (n, g, motor) in [(3, 1, false), (5, 2, true), (8, 3, true)] {
        let sys = PowerSystem::new(common::random_case(&mut rng, n, g, motor, false)).unwrap();
        for _ in 0..100 {
            let (x, y) = common::random_point(&mut rng, &sys);
            let a = algebraic_jacobian(&sys, &x, &y).unwrap();
            let f = jacobian_fd(&sys, &x, &y, 1e-6).unwrap();
            worst = worst.max(block_rel_error(&a, &f));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(1, Kind::Binding, worst <= 1e-6, "analytic J_alg vs central differences, 3 cases x 100 states", format!("max relative error {worst:.2e} (<= 1e-6)"));
    rep.line(1, Kind::Binding, secs < 10.0, "runtime", format!("{secs:.2} s (< 10 s)"));
}

fn criterion2(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = common::rng(102);
    let (mut chain, mut ratio) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(3..=6);
        let g = rng.gen_range(1..=2);
        let motor = rng.gen_bool(0.5);
        let case = common::random_case(&mut rng, n, g, motor, false);
        let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
        let r = lemma1_oracle(&sys, &x, &y).unwrap();
        chain = chain.max(r.max_chain_residual());
        ratio = ratio.max((r.det_ratio - 1.0).abs());
    }
    rep.line(2, Kind::Binding, chain <= 1e-10, "proof-chain residuals on 50 random consistent states", format!("max {chain:.2e} (<= 1e-10)"));
    rep.line(2, Kind::Binding, ratio <= 1e-8, "det ratio |det J| / (|det Y'| prod V^3)", format!("max |ratio - 1| = {ratio:.2e} (<= 1e-8)"));

    // Continuation: walk a shunt until det J_alg changes sign, bisect.
    let mut rng = common::rng(24);
    let case = common::random_case(&mut rng, 5, 2, true, false);
    let (sys, x, y) = common::random_point_on_manifold(&mut rng, &case);
    let at = |b: f64| {
        let s = common::fit_loads(&sys.case.with_shunt(3, b).unwrap(), &x, &y);
        let j = algebraic_jacobian(&s, &x, &y).unwrap();
        (det_r(&j), sigma_extremes_r(&j).0, sigma_min_c(&yprime_at(&s, &x, &y).unwrap()))
    };
    let s0 = at(0.0).0.signum();
    let (mut lo, mut hi) = (0.0, 1.0);
    while at(hi).0.signum() == s0 && hi < 1e4 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if at(mid).0.signum() == s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, sj, sy) = at(0.5 * (lo + hi));
    rep.line(2, Kind::Binding, sj <= 1e-6 && sy <= 1e-6, "sigma_min(J_alg) and sigma_min(Y') vanish together at the path end", format!("{sj:.2e}, {sy:.2e} (<= 1e-6)"));
    let secs = start.elapsed().as_secs_f64();
    rep.line(2, Kind::Binding, secs < 30.0, "runtime", format!("{secs:.2} s (< 30 s)"));
}

fn immune_case(seed: u64) -> NetworkCase {
    let mut rng = common::rng(seed);
    let mut case = common::random_case(&mut rng, 6, 2, false, true);
    for l in &mut case.static_loads {
        l.alpha = 2.0;
        l.beta = [1.0, 1.5, 2.0][rng.gen_range(0..3)];
        l.q0 = rng.gen_range(0.0..0.4);
    }
    case
}

fn yprime(sys: &PowerSystem, theta: &[f64], v: &[f64]) -> CMatrix {
    let x = vec![0.0; sys.layout.len];
    yprime_at(sys, &x, &AlgebraicState { theta: theta.to_vec(), v: v.to_vec() }).unwrap()
}

fn criterion4(rep: &mut Report) {
    let start = Instant::now();
    let case = immune_case(41);
    let verdict = theorem2_check(&case);
    let sys = PowerSystem::new(case.clone()).unwrap();
    let n = sys.n();
    let mut rng = common::rng(104);
    let (mut floor, mut all_wcdd) = (f64::INFINITY, true);
    for _ in 0..10_000 {
        let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
        let yp = yprime(&sys, &theta, &v);
        all_wcdd &= is_wcdd(&yp);
        floor = floor.min(sigma_min_c(&yp) / sigma_max_c(&yp));
    }
    rep.line(4, Kind::Binding, verdict.immune, "generated lossless case meets all four conditions", format!("immune = {}", verdict.immune));
    rep.line(4, Kind::Binding, floor > 0.0 && all_wcdd, "sigma_min(Y') > 0 over 1e4 random states", format!("min sigma_min/sigma_max = {floor:.3e}, all WCDD = {all_wcdd}"));

    // Break condition 4 at one bus and search the voltage there.
    let mut broken = case;
    let k = broken.static_loads.iter().position(|l| l.bus > 2).unwrap();
    broken.static_loads[k].beta = 0.5;
    broken.static_loads[k].q0 = 1.0;
    let bus = broken.static_loads[k].bus;
    let sys = PowerSystem::new(broken).unwrap();
    let theta = vec![0.0; n];
    let at = |vk: f64| {
        let mut v = vec![1.0; n];
        v[bus - 1] = vk;
        yprime(&sys, &theta, &v)
    };
    let step_v = 1.95 / 400.0;
    let best = (0..=400)
        .map(|i| 0.05 + step_v * i as f64)
        .min_by(|a, b| sigma_min_c(&at(*a)).total_cmp(&sigma_min_c(&at(*b))))
        .unwrap();
    let det = |vk: f64| det_c(&at(vk)).re;
    let (mut lo, mut hi) = ((best - step_v).max(0.05), best + step_v);
    let s_lo = det(lo).signum();
    let bracketed = s_lo != det(hi).signum();
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if det(mid).signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let yp = at(0.5 * (lo + hi));
    let rel = sigma_min_c(&yp) / sigma_max_c(&yp);
    rep.line(4, Kind::Binding, bracketed && rel <= 1e-9, "beta = 0.5 at one bus admits a singular state", format!("sigma_min/sigma_max = {rel:.2e} at V_{bus} = {lo:.6}"));
    let secs = start.elapsed().as_secs_f64();
    rep.line(4, Kind::Binding, secs < 60.0, "runtime", format!("{secs:.2} s (< 60 s)"));
}

fn within(x: Option<f64>, target: f64, frac: f64) -> bool {
    x.is_some_and(|x| (x - target).abs() <= frac * target)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| format!("{v:.3} s"))
}

fn with_shunt_y1(y1: &CMatrix, bus: usize, b0: f64) -> CMatrix {
    let mut m = y1.clone();
    m[(bus - 1, bus - 1)] += C64::new(0.0, b0);
    m
}

fn main() -> ExitCode {
    let mut rep = Report { binding_failures: 0, known_failures: 0 };
    let (file, case) = shipped();
    let run = |name: &str| run_scenario(&case, &file.scenario(name).unwrap(), &SimOptions::with_horizon(12.0)).unwrap();

    criterion1(&mut rep);
    criterion2(&mut rep);

    let s1 = run("s1");
    let s2 = run("s2");
    let s3 = run("s3");
    let s1_shed = run("s1-shed");
    let s3_shed = run("s3-shed");

    // Shunt scan at bus 8, kept whole so criterion 3 can inspect every collapse.
    let base = file.scenario("s1").unwrap();
    let scan: Vec<(f64, Trajectory)> = impasse_lab::commands::linspace(-0.3, 0.3, 13)
        .into_iter()
        .map(|b0| {
            let mut events = base.events.clone();
            events.push(Event::at(0.0, EventKind::InstallShunt { bus: 8, b0 }));
            (b0, run_scenario(&case, &Scenario::new(format!("scan b0={b0:.2}"), events), &SimOptions::with_horizon(12.0)).unwrap())
        })
        .collect();

    // Criterion 3 over every collapse produced here.
    let collapses: Vec<&Trajectory> = [&s1, &s2, &s3, &s1_shed, &s3_shed]
        .into_iter()
        .chain(scan.iter().map(|(_, t)| t))
        .filter(|t| t.t_hit().is_some())
        .collect();
    let violations = collapses
        .iter()
        .filter(|t| {
            let t_hit = t.t_hit().unwrap();
            let necessary = t.last().report.i_vs <= 1.0;
            let precedes = t.first_ivs_crossing().is_some_and(|c| c < t_hit);
            !(necessary && precedes)
        })
        .count();
    rep.line(3, Kind::Binding, !collapses.is_empty() && violations == 0, "I_vs <= 1 at t_hit and first crossing precedes t_hit", format!("{} collapsing runs, {violations} violations", collapses.len()));

    criterion4(&mut rep);

    // Criterion 5: ordinal claims bind, timing targets are informational.
    let (t1, t3) = (s1.t_hit(), s3.t_hit());
    rep.line(5, Kind::Binding, !s2.collapsed() && s2.last().state.t >= 12.0 - 1e-9, "scenario 2 (inductive shunt) stable to 12 s", format!("ends at {:.3} s", s2.last().state.t));
    rep.line(5, Kind::Binding, t1.is_some() && t3.is_some(), "scenarios 1 and 3 collapse", format!("t_hit {} / {}", fmt_opt(t1), fmt_opt(t3)));
    rep.line(5, Kind::Binding, t3 < t1, "capacitive shunt collapses earlier than no shunt", format!("{} < {}", fmt_opt(t3), fmt_opt(t1)));
    let (c1, c3) = (s1.first_ivs_crossing(), s3.first_ivs_crossing());
    rep.line(5, Kind::Binding, c1.zip(t1).is_some_and(|(c, t)| c < t) && c3.zip(t3).is_some_and(|(c, t)| c < t), "I_vs crosses 1 before collapse", format!("crossings {} / {}", fmt_opt(c1), fmt_opt(c3)));
    rep.line(5, Kind::Binding, s2.last().report.i_vs > 1.0, "scenario 2 I_vs ends above 1", format!("{:.4}", s2.last().report.i_vs));
    let shed_ok = |shed: &Trajectory, base_hit: Option<f64>| {
        !shed.collapsed() && shed.shed_time().zip(base_hit).is_some_and(|(s, t)| s < t)
    };
    rep.line(5, Kind::Binding, shed_ok(&s1_shed, t1) && shed_ok(&s3_shed, t3), "I_vs-triggered motor shedding stabilizes both collapses", format!("shed at {} / {}", fmt_opt(s1_shed.shed_time()), fmt_opt(s3_shed.shed_time())));
    rep.line(5, Kind::Waived, within(t1, 9.12, 0.1) && within(t3, 2.37, 0.1), "t_hit within 10% of 9.12 s / 2.37 s", format!("{} / {}", fmt_opt(t1), fmt_opt(t3)));
    rep.line(5, Kind::Waived, within(c1, 8.08, 0.1) && within(c3, 1.33, 0.1), "I_vs first crossing within 10% of 8.08 s / 1.33 s", format!("{} / {}", fmt_opt(c1), fmt_opt(c3)));

    // Criterion 6 at the uncompensated equilibrium.
    let (sys, st) = initialize_equilibrium(&case).unwrap();
    let y1 = build_y1(&sys.adm, &equivalent_snapshot(&sys, &st.x, &st.y).unwrap());
    let h = 1e-6;
    let (mut lit, mut b1_err, mut exact_err, mut max_val) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for bus in [5, 6, 8] {
        let s = shunt_sensitivity(&y1, bus).unwrap();
        let (p, m) = (with_shunt_y1(&y1, bus, h), with_shunt_y1(&y1, bus, -h));
        let fd_sigma = (sigma_min_c(&p) - sigma_min_c(&m)) / (2.0 * h);
        let fd_lambda = (shunt_sensitivity(&p, bus).unwrap().lambda_min - shunt_sensitivity(&m, bus).unwrap().lambda_min) / (2.0 * h);
        lit = lit.max((s.value - fd_sigma).abs());
        b1_err = b1_err.max((s.value - fd_lambda).abs());
        exact_err = exact_err.max((s.exact - fd_sigma).abs());
        max_val = max_val.max(s.value).max(s.exact).max(fd_sigma);
    }
    rep.line(6, Kind::Known, lit <= 1e-6, "-u_i^2 vs central difference of sigma_min(Y1), buses 5/6/8", format!("max abs error {lit:.2e} (<= 1e-6); the formula drops Re(Y1)"));
    rep.line(6, Kind::Binding, b1_err <= 1e-6, "-u_i^2 vs central difference of lambda_min(-Im Y1)", format!("max abs error {b1_err:.2e} (<= 1e-6)"));
    rep.line(6, Kind::Binding, exact_err <= 1e-6, "singular-vector derivative vs central difference of sigma_min(Y1)", format!("max abs error {exact_err:.2e} (<= 1e-6)"));
    rep.line(6, Kind::Binding, max_val <= 0.0, "all sensitivities <= 0", format!("largest {max_val:.3e}"));
    let t = |tr: &Trajectory| tr.t_hit().unwrap_or(f64::INFINITY);
    let monotone = scan.windows(2).all(|w| t(&w[1].1) <= t(&w[0].1));
    let curve: Vec<String> = scan.iter().map(|(b, tr)| format!("{b:+.2}:{}", tr.t_hit().map_or("-".into(), |v| format!("{v:.2}")))).collect();
    rep.line(6, Kind::Binding, monotone, "scan b0 in [-0.3, 0.3] at bus 8: t_hit non-increasing", curve.join(" "));

    // Criterion 7: kicked equilibrium, re-solved network, smooth segment.
    let (sys, mut st) = initialize_equilibrium(&case).unwrap();
    st.x[1] += 0.004;
    st.x[7] -= 0.003;
    st.x[sys.layout.motors[1].start] += 0.02;
    st.y = solve_algebraic(&sys, &st.x, &st.y).unwrap();
    let integrate = |n: usize| {
        let mut s = st.clone();
        for _ in 0..n {
            s = step(&sys, &s, 0.4 / n as f64).unwrap();
        }
        let mut v = s.x.clone();
        v.extend(&s.y.theta);
        v.extend(&s.y.v);
        v
    };
    let (a, b, c) = (integrate(8), integrate(16), integrate(32));
    let diff = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let ratio = diff(&a, &b) / diff(&b, &c);
    rep.line(7, Kind::Binding, (3.5..=4.5).contains(&ratio), "step-doubling error ratio", format!("{ratio:.3} (3.5 to 4.5)"));

    println!(
        "binding failures: {}; known failures: {}; quantitative nine-bus timing targets waived (substituted device data), ordinal claims binding",
        rep.binding_failures, rep.known_failures
    );
    if rep.binding_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
