//! JSON case files.
//!
//! A case file holds the network, the devices and a list of named
//! scenarios. Device parameter names follow the usual dynamic-data
//! conventions (`xd1` is `x′_d`, `td01` is `T′_d0`, `m` is `2H`, …).
//! Generators and motors may carry their own `mva_base`; their impedances,
//! inertia, damping and torque coefficients are then rescaled to the
//! system base on load.
//!
//! Unknown keys are an error unless the lenient flag is set, in which case
//! they are logged and skipped. Every diagnostic carries a JSON pointer.

use std::f64::consts::PI;
use std::path::Path;

use impasse_core::devices::{Dispatch, GeneratorParams, MotorParams, StaticLoad};
use impasse_core::linalg::C64;
use impasse_core::simulator::{Direction, Event, EventKind, Scenario, Trigger};
use impasse_core::{Bus, BusKind, Line, NetworkCase};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    /// Free-text notes on where each block of data came from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<String>,
    pub system: SystemBase,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shunts: Vec<ShuntRecord>,
    pub generators: Vec<GeneratorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motors: Vec<MotorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_loads: Vec<StaticLoadRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBase {
    pub base_mva: f64,
    pub base_freq: f64,
}

/// Buses must be listed with ids `1..=n` in order. A bus is a generator
/// terminal exactly when a generator names it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Pi-model branch: series `r + jx`, total charging susceptance `b` split
/// evenly between the two ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuntRecord {
    pub bus: usize,
    #[serde(default)]
    pub g: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub bus: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mva_base: Option<f64>,
    #[serde(default)]
    pub ra: f64,
    pub xd: f64,
    pub xd1: f64,
    pub xd2: f64,
    pub xq: f64,
    pub xq1: f64,
    pub xq2: f64,
    pub td01: f64,
    pub td02: f64,
    pub tq01: f64,
    pub tq02: f64,
    /// Mechanical starting time `2H`, s.
    pub m: f64,
    #[serde(default)]
    pub d: f64,
    /// Dispatched active power on the system base (ignored for the slack).
    pub p: f64,
    pub v: f64,
    #[serde(default)]
    pub slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorRecord {
    pub bus: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mva_base: Option<f64>,
    pub rs: f64,
    pub xs: f64,
    pub rr: f64,
    pub xr: f64,
    pub xm: f64,
    /// Inertia constant `H`, s.
    pub hm: f64,
    /// Load torque `a + bσ + cσ²`.
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
}

/// `P = p0 V^alpha`, `Q = q0 V^beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticLoadRecord {
    pub bus: usize,
    pub p0: f64,
    pub q0: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub events: Vec<EventRecord>,
}

/// One action with exactly one trigger: a time `at`, or `when`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<IvsTrigger>,
    pub action: Action,
}

/// Fires the first time `I_vs` drops below `ivs_below`, counting from
/// `arm_delay` seconds after the fault is cleared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvsTrigger {
    pub ivs_below: f64,
    #[serde(default = "default_arm_delay")]
    pub arm_delay: f64,
}

pub const DEFAULT_ARM_DELAY: f64 = 0.5;

fn default_arm_delay() -> f64 {
    DEFAULT_ARM_DELAY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Shunt reactance `x_f` to ground.
    Fault { bus: usize, x_f: f64 },
    Clear,
    Shunt { bus: usize, b0: f64 },
    ShedMotor { bus: usize },
    ShedStatic { bus: usize, fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Lenient,
}

/// Parse and validate, returning the file model, the network and the
/// pointers of any keys that were skipped in lenient mode.
pub fn parse_case_str(text: &str, mode: Strictness) -> Result<(CaseFile, NetworkCase, Vec<String>), CliError> {
    let mut ignored = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut track = |p: serde_ignored::Path| ignored.push(ignored_pointer(&p));
    let tracked = serde_ignored::Deserializer::new(de, &mut track);
    let file: CaseFile = serde_path_to_error::deserialize(tracked).map_err(|e| CliError::Schema {
        pointer: error_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    if !ignored.is_empty() {
        let raw: serde_json::Value = serde_json::from_str(text).expect("already parsed once");
        ignored = ignored.iter().map(|p| repair_pointer(&raw, p)).collect();
        match mode {
            Strictness::Strict => return Err(CliError::UnknownKeys(ignored)),
            Strictness::Lenient => {
                for p in &ignored {
                    log::warn!("ignoring unknown key {p}");
                }
            }
        }
    }
    let case = file.to_network()?;
    file.scenarios()?;
    Ok((file, case, ignored))
}

pub fn parse_case(path: &Path, mode: Strictness) -> Result<(CaseFile, NetworkCase), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    let (file, case, _) = parse_case_str(&text, mode)?;
    Ok((file, case))
}

pub fn emit_case(file: &CaseFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("case files always serialize");
    s.push('\n');
    s
}

fn ignored_pointer(path: &serde_ignored::Path) -> String {
    use serde_ignored::Path as P;
    match path {
        P::Root => String::new(),
        P::Seq { parent, index } => format!("{}/{index}", ignored_pointer(parent)),
        P::Map { parent, key } => format!("{}/{}", ignored_pointer(parent), escape(key)),
        P::Some { parent } | P::NewtypeStruct { parent } | P::NewtypeVariant { parent } => ignored_pointer(parent),
    }
}

/// The ignored-key tracker does not record enum variant names, so a key
/// inside `{"fault": {...}}` comes back one level short. Walk the raw value
/// and step into single-key wrapper objects where the path does not resolve.
fn repair_pointer(raw: &serde_json::Value, pointer: &str) -> String {
    let mut node = raw;
    let mut out = String::new();
    for seg in pointer.split('/').skip(1) {
        let key = seg.replace("~1", "/").replace("~0", "~");
        loop {
            let next = match node {
                serde_json::Value::Object(m) => m.get(&key),
                serde_json::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
                _ => None,
            };
            if let Some(n) = next {
                node = n;
                break;
            }
            match node {
                serde_json::Value::Object(m) if m.len() == 1 => {
                    let (k, v) = m.iter().next().expect("one entry");
                    out.push('/');
                    out.push_str(&escape(k));
                    node = v;
                }
                _ => return pointer.to_string(),
            }
        }
        out.push('/');
        out.push_str(seg);
    }
    out
}

fn error_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn positive(pointer: String, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Schema { pointer, message: format!("must be a positive number, got {value}") })
    }
}

impl CaseFile {
    fn check_bus(&self, pointer: String, bus: usize) -> Result<(), CliError> {
        if bus >= 1 && bus <= self.buses.len() {
            Ok(())
        } else {
            Err(CliError::Schema { pointer, message: format!("bus {bus} does not exist") })
        }
    }

    /// Convert to the validated network model.
    pub fn to_network(&self) -> Result<NetworkCase, CliError> {
        positive("/system/base_mva".into(), self.system.base_mva)?;
        positive("/system/base_freq".into(), self.system.base_freq)?;
        let base = self.system.base_mva;
        let omega_b = 2.0 * PI * self.system.base_freq;

        for (k, b) in self.buses.iter().enumerate() {
            if b.id != k + 1 {
                return Err(CliError::Schema {
                    pointer: format!("/buses/{k}/id"),
                    message: format!("expected id {}, buses must be numbered 1..=n in order", k + 1),
                });
            }
        }
        let mut buses: Vec<Bus> = self
            .buses
            .iter()
            .map(|b| Bus { id: b.id, kind: BusKind::LoadOnly, shunt: C64::new(0.0, 0.0) })
            .collect();

        let mut lines = Vec::with_capacity(self.lines.len());
        for (k, l) in self.lines.iter().enumerate() {
            self.check_bus(format!("/lines/{k}/from"), l.from)?;
            self.check_bus(format!("/lines/{k}/to"), l.to)?;
            let z = C64::new(l.r, l.x);
            if z.norm() == 0.0 || !z.norm().is_finite() {
                return Err(CliError::Schema { pointer: format!("/lines/{k}"), message: "zero or non-finite impedance".into() });
            }
            lines.push(Line { from: l.from, to: l.to, y: z.inv() });
            buses[l.from - 1].shunt += C64::new(0.0, l.b / 2.0);
            buses[l.to - 1].shunt += C64::new(0.0, l.b / 2.0);
        }
        for (k, s) in self.shunts.iter().enumerate() {
            self.check_bus(format!("/shunts/{k}/bus"), s.bus)?;
            buses[s.bus - 1].shunt += C64::new(s.g, s.b);
        }

        let mut generators = Vec::with_capacity(self.generators.len());
        for (k, g) in self.generators.iter().enumerate() {
            self.check_bus(format!("/generators/{k}/bus"), g.bus)?;
            // Device base to system base: impedances scale with S_sys/S_dev,
            // inertia and damping with S_dev/S_sys.
            let kz = match g.mva_base {
                Some(s) => {
                    positive(format!("/generators/{k}/mva_base"), s)?;
                    base / s
                }
                None => 1.0,
            };
            buses[g.bus - 1].kind = BusKind::Terminal;
            generators.push(GeneratorParams {
                bus: g.bus,
                r_a: g.ra * kz,
                x_d: g.xd * kz,
                x_d1: g.xd1 * kz,
                x_d2: g.xd2 * kz,
                x_q: g.xq * kz,
                x_q1: g.xq1 * kz,
                x_q2: g.xq2 * kz,
                t_d01: g.td01,
                t_d02: g.td02,
                t_q01: g.tq01,
                t_q02: g.tq02,
                m: g.m / kz,
                d: g.d / kz,
                omega_b,
                dispatch: Dispatch { p: g.p, v: g.v, slack: g.slack },
            });
        }

        let mut motors = Vec::with_capacity(self.motors.len());
        for (k, m) in self.motors.iter().enumerate() {
            self.check_bus(format!("/motors/{k}/bus"), m.bus)?;
            let kz = match m.mva_base {
                Some(s) => {
                    positive(format!("/motors/{k}/mva_base"), s)?;
                    base / s
                }
                None => 1.0,
            };
            motors.push(MotorParams {
                bus: m.bus,
                r_s: m.rs * kz,
                x_s: m.xs * kz,
                r_r: m.rr * kz,
                x_r: m.xr * kz,
                x_m: m.xm * kz,
                h: m.hm / kz,
                a: m.a / kz,
                b: m.b / kz,
                c: m.c / kz,
                omega_b,
                in_service: true,
            });
        }

        let mut static_loads = Vec::with_capacity(self.static_loads.len());
        for (k, l) in self.static_loads.iter().enumerate() {
            self.check_bus(format!("/static_loads/{k}/bus"), l.bus)?;
            static_loads.push(StaticLoad { bus: l.bus, p0: l.p0, q0: l.q0, alpha: l.alpha, beta: l.beta });
        }

        let case = NetworkCase {
            buses,
            lines,
            generators,
            motors,
            static_loads,
            base_mva: base,
            base_freq: self.system.base_freq,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn scenario_names(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(self.scenarios.len());
        for (k, s) in self.scenarios.iter().enumerate() {
            if !seen.insert(s.name.as_str()) {
                return Err(CliError::Schema {
                    pointer: format!("/scenarios/{k}/name"),
                    message: format!("duplicate scenario name {:?}", s.name),
                });
            }
            out.push(self.convert_scenario(k)?);
        }
        Ok(out)
    }

    pub fn scenario(&self, name: &str) -> Result<Scenario, CliError> {
        let k = self
            .scenarios
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| CliError::Usage(format!("no scenario named {name:?}; available: {:?}", self.scenario_names())))?;
        self.convert_scenario(k)
    }

    fn convert_scenario(&self, k: usize) -> Result<Scenario, CliError> {
        let rec = &self.scenarios[k];
        let mut events = Vec::with_capacity(rec.events.len());
        for (j, e) in rec.events.iter().enumerate() {
            let at = format!("/scenarios/{k}/events/{j}");
            let trigger = match (e.at, &e.when) {
                (Some(t), None) => Trigger::AtTime(t),
                (None, Some(w)) => Trigger::WhenIvsCrosses {
                    threshold: w.ivs_below,
                    direction: Direction::Down,
                    arm_delay: w.arm_delay,
                },
                _ => {
                    return Err(CliError::Schema { pointer: at, message: "exactly one of `at` and `when` is required".into() })
                }
            };
            let kind = match e.action {
                Action::Fault { bus, x_f } => {
                    self.check_bus(format!("{at}/action/fault/bus"), bus)?;
                    positive(format!("{at}/action/fault/x_f"), x_f)?;
                    EventKind::ApplyFault { bus, reactance: x_f }
                }
                Action::Clear => EventKind::ClearFault,
                Action::Shunt { bus, b0 } => {
                    self.check_bus(format!("{at}/action/shunt/bus"), bus)?;
                    EventKind::InstallShunt { bus, b0 }
                }
                Action::ShedMotor { bus } => {
                    if !self.motors.iter().any(|m| m.bus == bus) {
                        return Err(CliError::Schema { pointer: format!("{at}/action/shed_motor/bus"), message: format!("no motor at bus {bus}") });
                    }
                    EventKind::ShedMotor { bus }
                }
                Action::ShedStatic { bus, fraction } => {
                    if !self.static_loads.iter().any(|l| l.bus == bus) {
                        return Err(CliError::Schema {
                            pointer: format!("{at}/action/shed_static/bus"),
                            message: format!("no static load at bus {bus}"),
                        });
                    }
                    EventKind::ShedStatic { bus, fraction }
                }
            };
            events.push(Event { kind, trigger });
        }
        let scenario = Scenario::new(rec.name.clone(), events);
        scenario.timed()?;
        Ok(scenario)
    }
}
