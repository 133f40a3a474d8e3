//! Trajectory CSV and run summary.
//!
//! The CSV header is fixed for a given case:
//!
//! ```text
//! t, V_1..V_n, theta_1..theta_n, sigma_<bus> per motor,
//! sigma_min_y1, y2_max, i_vs, sigma_min_jalg, min_mod_eig, hit
//! ```
//!
//! `y2_max` is `max_i |Y₂_ii|`, so `i_vs = sigma_min_y1 / y2_max`. Floats are
//! written with 17 significant digits, which reads back bit-exactly. `hit`
//! is `true` only on the final sample of a run that reached the surface.

use std::io::Write;
use std::path::Path;

use impasse_core::simulator::{Termination, Trajectory};
use impasse_core::StateLayout;
use serde::Serialize;

use crate::error::CliError;

pub fn csv_header(n: usize, motor_buses: &[usize]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("V_{i}")));
    h.extend((1..=n).map(|i| format!("theta_{i}")));
    h.extend(motor_buses.iter().map(|b| format!("sigma_{b}")));
    h.extend(["sigma_min_y1", "y2_max", "i_vs", "sigma_min_jalg", "min_mod_eig", "hit"].map(String::from));
    h
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    if traj.samples.is_empty() {
        return Err(CliError::EmptyTrajectory);
    }
    let case = &traj.final_case;
    let layout = StateLayout::new(case);
    let motor_buses: Vec<usize> = case.motors.iter().map(|m| m.bus).collect();
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Write { path: "trajectory.csv".into(), source: e.into() };
    w.write_record(csv_header(case.n(), &motor_buses)).map_err(io)?;
    for s in &traj.samples {
        let st = &s.state;
        let r = &s.report;
        let mut row = vec![fmt_f64(st.t)];
        row.extend(st.y.v.iter().map(|&v| fmt_f64(v)));
        row.extend(st.y.theta.iter().map(|&v| fmt_f64(v)));
        row.extend(layout.motors.iter().map(|m| fmt_f64(st.x[m.start])));
        row.extend([r.sigma_min_y1, r.y2_max, r.i_vs, r.sigma_min_jalg, r.min_mod_eig_jalg].map(fmt_f64));
        row.push(r.hit.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Write { path: "trajectory.csv".into(), source: e })?;
    Ok(())
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    if traj.samples.is_empty() {
        return Err(CliError::EmptyTrajectory);
    }
    let file = std::fs::File::create(path).map_err(|source| CliError::Write { path: path.to_owned(), source })?;
    write_csv(traj, std::io::BufWriter::new(file)).map_err(|e| match e {
        CliError::Write { source, .. } => CliError::Write { path: path.to_owned(), source },
        e => e,
    })
}

/// Parsed trajectory CSV: header, numeric columns per row, and the hit flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub hit: Vec<bool>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<CsvTable, String> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header.last().map(String::as_str) != Some("hit") {
        return Err("last column must be `hit`".into());
    }
    let mut rows = Vec::new();
    let mut hit = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let mut row = Vec::with_capacity(rec.len() - 1);
        for f in rec.iter().take(rec.len() - 1) {
            row.push(f.parse::<f64>().map_err(|e| format!("{f:?}: {e}"))?);
        }
        hit.push(match &rec[rec.len() - 1] {
            "true" => true,
            "false" => false,
            other => return Err(format!("bad hit flag {other:?}")),
        });
        rows.push(row);
    }
    Ok(CsvTable { header, rows, hit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSummary {
    pub t: f64,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    /// `horizon_reached`, `impasse_hit` or `assumption2_violation`.
    pub termination: String,
    pub t_end: f64,
    pub t_hit: Option<f64>,
    /// First downward crossing of `I_vs = 1` after fault clearing.
    pub ivs_first_crossing: Option<f64>,
    pub shed_time: Option<f64>,
    /// Whether `I_vs <= 1` held at the hit (the necessary condition).
    pub necessary_condition_at_hit: Option<bool>,
    /// Bus whose voltage left the positive domain, for that termination.
    pub violation_bus: Option<usize>,
    pub samples: usize,
    pub events: Vec<EventSummary>,
}

impl RunSummary {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let (termination, violation_bus) = match traj.termination {
            Termination::HorizonReached => ("horizon_reached", None),
            Termination::ImpasseHit { .. } => ("impasse_hit", None),
            Termination::Assumption2Violation { bus, .. } => ("assumption2_violation", Some(bus)),
        };
        RunSummary {
            scenario: traj.scenario.clone(),
            termination: termination.into(),
            t_end: traj.last().state.t,
            t_hit: traj.t_hit(),
            ivs_first_crossing: traj.first_ivs_crossing(),
            shed_time: traj.shed_time(),
            necessary_condition_at_hit: traj.theorem1_at_hit,
            violation_bus,
            samples: traj.samples.len(),
            events: traj.events.iter().map(|e| EventSummary { t: e.t, event: e.kind.to_string() }).collect(),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_owned(), source })
}
