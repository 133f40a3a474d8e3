//! Subcommand implementations, shared by the binary and the tests.

use std::path::{Path, PathBuf};

use impasse_core::algebraic::{initialize_equilibrium, solve_algebraic};
use impasse_core::impasse::{build_y1, equivalent_snapshot, lemma1_oracle, shunt_sensitivity, theorem2_check, Theorem2Verdict};
use impasse_core::linalg::{sigma_min_c, CMatrix, C64};
use impasse_core::simulator::{initial_case, run_scenario, shunt_scan_point, Scenario, SimOptions, Trajectory};
use impasse_core::{NetworkCase, PowerSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{emit_csv, write_json, RunSummary};
use crate::plot::{emit_plot, Plot};

/// Read-only analyses to emit next to the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Analyses {
    pub ivs: bool,
    pub sigma_min: bool,
    pub eig: bool,
    pub theorem2: bool,
    pub sensitivity: bool,
}

impl Analyses {
    pub fn plots() -> Self {
        Analyses { ivs: true, sigma_min: true, eig: true, ..Default::default() }
    }

    pub fn parse(list: &str) -> Result<Self, CliError> {
        let mut a = Analyses::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "ivs" => a.ivs = true,
                "sigma_min" => a.sigma_min = true,
                "eig" => a.eig = true,
                "theorem2" => a.theorem2 = true,
                "sensitivity" => a.sensitivity = true,
                "none" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown analysis {other:?} (expected ivs, sigma_min, eig, theorem2, sensitivity, none)"
                    )))
                }
            }
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub horizon: f64,
    pub dt: f64,
    pub dt_fine: f64,
    pub out: PathBuf,
    pub analyses: Analyses,
    /// Bus whose voltage is plotted.
    pub monitor_bus: usize,
}

impl RunConfig {
    pub fn new(scenario: &str, out: impl Into<PathBuf>) -> Self {
        let d = SimOptions::default();
        RunConfig {
            scenario: scenario.into(),
            horizon: d.horizon,
            dt: d.dt,
            dt_fine: d.dt_fine,
            out: out.into(),
            analyses: Analyses::plots(),
            monitor_bus: 8,
        }
    }

    pub fn options(&self) -> Result<SimOptions, CliError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::Usage(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt_fine > 0.0) {
            return Err(CliError::Usage(format!("dt must be positive, got {} / {}", self.dt, self.dt_fine)));
        }
        Ok(SimOptions { horizon: self.horizon, dt: self.dt, dt_fine: self.dt_fine, ..SimOptions::default() })
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

/// Simulate one scenario and write its artifacts into `config.out`.
pub fn run(case: &NetworkCase, scenario: &Scenario, config: &RunConfig) -> Result<(Trajectory, RunSummary), CliError> {
    let options = config.options()?;
    if config.monitor_bus == 0 || config.monitor_bus > case.n() {
        return Err(CliError::Usage(format!("monitor bus {} is not in the case", config.monitor_bus)));
    }
    let traj = run_scenario(case, scenario, &options)?;
    create_dir(&config.out)?;
    emit_csv(&traj, &config.out.join("trajectory.csv"))?;
    let summary = RunSummary::from_trajectory(&traj);
    write_json(&summary, &config.out.join("summary.json"))?;
    write_plots(&traj, config)?;
    if config.analyses.theorem2 {
        write_json(&Theorem2Json::from(&theorem2_check(case)), &config.out.join("theorem2.json"))?;
    }
    if config.analyses.sensitivity {
        let rows = sensitivity_table(case, scenario, &load_buses(case), SENSITIVITY_STEP)?;
        write_sensitivity_csv(&rows, &config.out.join("sensitivity.csv"))?;
    }
    Ok((traj, summary))
}

fn write_plots(traj: &Trajectory, config: &RunConfig) -> Result<(), CliError> {
    let a = config.analyses;
    if !(a.ivs || a.sigma_min || a.eig) || traj.samples.len() < 2 {
        return Ok(());
    }
    let series = |f: &dyn Fn(&impasse_core::simulator::Sample) -> f64| -> Vec<(f64, f64)> {
        traj.samples.iter().map(|s| (s.state.t, f(s))).collect()
    };
    let bus = config.monitor_bus;
    let name = &traj.scenario;
    emit_plot(
        &Plot::new(&format!("{name}: voltage at bus {bus}"), "t (s)", "V (p.u.)")
            .with_series(&format!("V_{bus}"), series(&|s| s.state.y.v[bus - 1])),
        &config.out.join(format!("voltage_bus{bus}.svg")),
    )?;
    if a.ivs {
        emit_plot(
            &Plot::new(&format!("{name}: voltage-stability index"), "t (s)", "I_vs").with_series("I_vs", series(&|s| s.report.i_vs)).with_reference(1.0),
            &config.out.join("ivs.svg"),
        )?;
    }
    if a.sigma_min {
        emit_plot(
            &Plot::new(&format!("{name}: smallest singular values"), "t (s)", "sigma_min")
                .log_scale()
                .with_series("sigma_min(J_alg)", series(&|s| s.report.sigma_min_jalg))
                .with_series("sigma_min(Y1)", series(&|s| s.report.sigma_min_y1)),
            &config.out.join("sigma_min.svg"),
        )?;
    }
    if a.eig {
        emit_plot(
            &Plot::new(&format!("{name}: minimum-modulus eigenvalue of J_alg"), "t (s)", "|lambda|_min")
                .with_series("|lambda|_min", series(&|s| s.report.min_mod_eig_jalg)),
            &config.out.join("min_mod_eig.svg"),
        )?;
    }
    Ok(())
}

/// Rayon pool sized by `IMPASSE_LAB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("IMPASSE_LAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("IMPASSE_LAB_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

/// Run several scenarios in parallel, one output directory each under
/// `base.out`. Results come back in input order.
pub fn run_batch(
    case: &NetworkCase,
    scenarios: &[Scenario],
    base: &RunConfig,
) -> Result<Vec<Result<(Trajectory, RunSummary), CliError>>, CliError> {
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let config = RunConfig { scenario: s.name.clone(), out: base.out.join(&s.name), ..base.clone() };
                run(case, s, &config)
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Json {
    pub applicable: bool,
    pub immune: bool,
    pub wcdd: bool,
    pub generators: bool,
    pub lossless_network: bool,
    pub active_exponents: bool,
    pub reactive_exponents: bool,
    pub failures: Vec<String>,
}

impl From<&Theorem2Verdict> for Theorem2Json {
    fn from(v: &Theorem2Verdict) -> Self {
        Theorem2Json {
            applicable: v.applicable,
            immune: v.immune,
            wcdd: v.wcdd,
            generators: v.conditions.generators,
            lossless_network: v.conditions.lossless_network,
            active_exponents: v.conditions.active_exponents,
            reactive_exponents: v.conditions.reactive_exponents,
            failures: v.failures.clone(),
        }
    }
}

/// Central-difference step in the shunt susceptance.
pub const SENSITIVITY_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub bus: usize,
    /// `−u_i²` from the smallest eigenvector of `−Im Y₁`.
    pub formula: f64,
    /// From the singular vectors of `Y₁`.
    pub exact: f64,
    /// Central difference of `σ_min(Y₁)`.
    pub fd: f64,
    pub sigma_min_y1: f64,
    pub real_ratio: f64,
    pub approx_ok: bool,
    pub degenerate: bool,
}

/// Buses that carry a motor or a static load, ascending.
pub fn load_buses(case: &NetworkCase) -> Vec<usize> {
    let mut b: Vec<usize> = case.motors.iter().map(|m| m.bus).chain(case.static_loads.iter().map(|l| l.bus)).collect();
    b.sort_unstable();
    b.dedup();
    b
}

fn with_shunt(y1: &CMatrix, bus: usize, b0: f64) -> CMatrix {
    let mut m = y1.clone();
    m[(bus - 1, bus - 1)] += C64::new(0.0, b0);
    m
}

/// `dσ_min(Y₁)/db₀` per bus at the scenario's initial equilibrium.
pub fn sensitivity_table(case: &NetworkCase, scenario: &Scenario, buses: &[usize], h: f64) -> Result<Vec<SensitivityRow>, CliError> {
    let (case0, _) = initial_case(case, scenario)?;
    let (sys, st) = initialize_equilibrium(&case0)?;
    let snap = equivalent_snapshot(&sys, &st.x, &st.y)?;
    let y1 = build_y1(&sys.adm, &snap);
    let mut rows = Vec::with_capacity(buses.len());
    for &bus in buses {
        case.check_bus(bus)?;
        let s = shunt_sensitivity(&y1, bus)?;
        let fd = (sigma_min_c(&with_shunt(&y1, bus, h)) - sigma_min_c(&with_shunt(&y1, bus, -h))) / (2.0 * h);
        rows.push(SensitivityRow {
            bus,
            formula: s.value,
            exact: s.exact,
            fd,
            sigma_min_y1: sigma_min_c(&y1),
            real_ratio: s.real_ratio,
            approx_ok: s.approx_ok,
            degenerate: s.degenerate,
        });
    }
    Ok(rows)
}

pub fn write_sensitivity<W: std::io::Write>(rows: &[SensitivityRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sensitivity_csv(rows: &[SensitivityRow], path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|source| CliError::Write { path: path.to_owned(), source })?;
    write_sensitivity(rows, file).map_err(|e| CliError::Write { path: path.to_owned(), source: e.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Summary {
    pub states: usize,
    pub max_chain_residual: f64,
    pub det_ratio_min: f64,
    pub det_ratio_max: f64,
    /// States where exactly one of `J_alg`, `Y′` looked singular.
    pub singularity_mismatches: usize,
}

impl Lemma1Summary {
    pub fn passed(&self, chain_tol: f64, ratio_tol: f64) -> bool {
        self.max_chain_residual <= chain_tol
            && (self.det_ratio_min - 1.0).abs() <= ratio_tol
            && (self.det_ratio_max - 1.0).abs() <= ratio_tol
            && self.singularity_mismatches == 0
    }
}

/// Run the determinant-identity oracle on `states` consistent states drawn
/// around the case's equilibrium: machine states are perturbed and the
/// network voltages re-solved, so every state lies on `g = 0`.
pub fn lemma1_verify(case: &NetworkCase, states: usize, seed: u64) -> Result<Lemma1Summary, CliError> {
    let (sys, st) = initialize_equilibrium(case)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = Lemma1Summary {
        states: 0,
        max_chain_residual: 0.0,
        det_ratio_min: f64::INFINITY,
        det_ratio_max: f64::NEG_INFINITY,
        singularity_mismatches: 0,
    };
    let mut attempts = 0;
    while summary.states < states {
        attempts += 1;
        if attempts > 20 * states.max(1) {
            return Err(CliError::Core(impasse_core::Error::Numerical(format!(
                "only {} of {states} perturbed states could be solved",
                summary.states
            ))));
        }
        let mut x = st.x.clone();
        for r in &sys.layout.generators {
            x[r.start] += rng.gen_range(-0.3..0.3);
            for k in r.start + 2..r.end {
                x[k] *= 1.0 + rng.gen_range(-0.1..0.1);
            }
        }
        for r in &sys.layout.motors {
            x[r.start] *= rng.gen_range(0.5..2.0);
            for k in r.start + 1..r.end {
                x[k] *= 1.0 + rng.gen_range(-0.1..0.1);
            }
        }
        let Ok(y) = solve_algebraic(&sys, &x, &st.y) else { continue };
        let rep = lemma1_oracle(&sys, &x, &y)?;
        summary.states += 1;
        summary.max_chain_residual = summary.max_chain_residual.max(rep.max_chain_residual());
        summary.det_ratio_min = summary.det_ratio_min.min(rep.det_ratio);
        summary.det_ratio_max = summary.det_ratio_max.max(rep.det_ratio);
        let tol = impasse_core::impasse::SINGULAR_TOL;
        if (rep.sigma_min_jalg <= tol) != (rep.sigma_min_yprime <= tol) {
            summary.singularity_mismatches += 1;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub b0: f64,
    pub t_hit: Option<f64>,
}

/// `t_hit` against the shunt `b0` installed at `bus`, evaluated in
/// parallel. Points are returned in ascending `b0`.
pub fn scan(case: &NetworkCase, scenario: &Scenario, bus: usize, b0s: &[f64], options: &SimOptions) -> Result<Vec<ScanPoint>, CliError> {
    case.check_bus(bus)?;
    let pool = thread_pool()?;
    let mut pts: Vec<f64> = b0s.to_vec();
    pts.sort_by(f64::total_cmp);
    pool.install(|| {
        pts.par_iter()
            .map(|&b0| Ok(ScanPoint { b0, t_hit: shunt_scan_point(case, scenario, bus, b0, options)? }))
            .collect()
    })
}

/// Evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![from],
        _ => (0..points).map(|k| from + (to - from) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// `t_hit` never increases with `b0`; a run that survives counts as `+∞`.
pub fn non_increasing(points: &[ScanPoint]) -> bool {
    let t = |p: &ScanPoint| p.t_hit.unwrap_or(f64::INFINITY);
    points.windows(2).all(|w| t(&w[1]) <= t(&w[0]))
}

pub fn write_scan<W: std::io::Write>(points: &[ScanPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["b0", "t_hit", "collapsed"])?;
    for p in points {
        w.write_record([
            crate::output::fmt_f64(p.b0),
            p.t_hit.map(crate::output::fmt_f64).unwrap_or_default(),
            p.t_hit.is_some().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The shared system and equilibrium for a scenario.
pub fn scenario_equilibrium(case: &NetworkCase, scenario: &Scenario) -> Result<(PowerSystem, impasse_core::SystemState), CliError> {
    let (case0, _) = initial_case(case, scenario)?;
    Ok(initialize_equilibrium(&case0)?)
}
