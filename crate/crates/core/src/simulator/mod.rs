//! Time-domain integration with events and surface-hit detection.
//!
//! Integration is fixed-step implicit trapezoidal with steps split at event
//! times. Every accepted step is recorded together with its
//! [`ImpasseReport`]. A step that fails even after two halvings, or a sign
//! change of `det J_alg` between samples, marks a bracket; the bracket is
//! narrowed by bisection in time and the exact crossing is then located by
//! an augmented Newton solve, so the final sample lies on the surface.

mod detect;
mod events;
mod step;

pub use detect::{detect_impasse, Bracket};
pub use events::{Direction, Event, EventKind, Scenario, Trigger};
pub use step::{step, STEP_TOL};

use crate::algebraic::{
    algebraic_jacobian, initialize_equilibrium, solve_algebraic_damped, AlgebraicState, PowerSystem, SystemState,
};
use crate::error::{Error, Result};
use crate::impasse::{impasse_report, ImpasseReport};
use crate::linalg::{self, C64};
use crate::netmodel::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    /// Step away from faults.
    pub dt: f64,
    /// Step while the fault is on and for `fine_window` seconds after.
    pub dt_fine: f64,
    pub fine_window: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: 12.0,
            dt: 5e-3,
            dt_fine: 1e-3,
            fine_window: 0.5,
        }
    }
}

impl SimOptions {
    pub fn with_horizon(horizon: f64) -> Self {
        Self { horizon, ..Self::default() }
    }

    /// A single step size everywhere.
    pub fn uniform(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            dt_fine: dt,
            fine_window: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.dt_fine > 0.0 && self.fine_window >= 0.0) {
            return Err(Error::InvalidEvents(format!("invalid run options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: SystemState,
    pub report: ImpasseReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    HorizonReached,
    ImpasseHit { t_hit: f64 },
    /// A bus voltage left the positive domain before any singularity.
    Assumption2Violation { t: f64, bus: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scenario: String,
    /// One sample per accepted time. At an event time the sample is the
    /// left limit: the state on the network before the event.
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub events: Vec<EventRecord>,
    /// Whether the necessary condition held at the hit, when there is one.
    pub theorem1_at_hit: Option<bool>,
    /// Case as it stood at the end of the run.
    pub final_case: NetworkCase,
    pub clear_time: Option<f64>,
}

impl Trajectory {
    pub fn t_hit(&self) -> Option<f64> {
        match self.termination {
            Termination::ImpasseHit { t_hit } => Some(t_hit),
            _ => None,
        }
    }

    pub fn collapsed(&self) -> bool {
        !matches!(self.termination, Termination::HorizonReached)
    }

    /// Time of the first sample after `after` at which `I_vs` drops below
    /// `threshold` coming from at or above it.
    pub fn ivs_crossing(&self, after: f64, threshold: f64) -> Option<f64> {
        self.samples
            .windows(2)
            .filter(|w| w[0].state.t >= after)
            .find(|w| w[0].report.i_vs >= threshold && w[1].report.i_vs < threshold)
            .map(|w| w[1].state.t)
    }

    /// First downward crossing of one after the fault is cleared.
    pub fn first_ivs_crossing(&self) -> Option<f64> {
        self.ivs_crossing(self.clear_time.unwrap_or(0.0), 1.0)
    }

    pub fn shed_time(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| matches!(e.kind, EventKind::ShedMotor { .. } | EventKind::ShedStatic { .. }))
            .map(|e| e.t)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least the initial sample")
    }
}

/// Events at `t = 0` are applied to the case before initialization; this
/// is the network a scenario's equilibrium is computed on.
pub fn initial_case(case: &NetworkCase, scenario: &Scenario) -> Result<(NetworkCase, Vec<EventRecord>)> {
    let mut case = case.clone();
    let mut fault = None;
    let mut applied = Vec::new();
    for (t, kind) in scenario.timed()? {
        if t == 0.0 {
            events::apply(&mut case, kind, &mut fault)?;
            applied.push(EventRecord { t, kind });
        }
    }
    if fault.is_some() {
        return Err(Error::InvalidEvents("a fault at t = 0 cannot be part of the initial equilibrium".into()));
    }
    Ok((case, applied))
}

struct Monitor {
    trigger: (f64, Direction, f64),
    kind: EventKind,
    armed_at: f64,
    fired: bool,
}

impl Monitor {
    fn fires(&self, prev: &ImpasseReport, now: &ImpasseReport) -> bool {
        let (threshold, direction, _) = self.trigger;
        if self.fired || prev.t < self.armed_at {
            return false;
        }
        match direction {
            Direction::Down => prev.i_vs >= threshold && now.i_vs < threshold,
            Direction::Up => prev.i_vs <= threshold && now.i_vs > threshold,
        }
    }
}

pub fn run_scenario(case: &NetworkCase, scenario: &Scenario, options: &SimOptions) -> Result<Trajectory> {
    options.validate()?;
    let timed = scenario.timed()?;
    let (case0, mut records) = initial_case(case, scenario)?;
    let (mut sys, mut state) = initialize_equilibrium(&case0)?;
    let clear_time = scenario.clear_time();
    let fault_time = scenario.fault_time();
    let mut monitors: Vec<Monitor> = scenario
        .events
        .iter()
        .filter_map(|e| match e.trigger {
            Trigger::WhenIvsCrosses { threshold, direction, arm_delay } => Some(Monitor {
                trigger: (threshold, direction, arm_delay),
                kind: e.kind,
                armed_at: clear_time.unwrap_or(0.0) + arm_delay,
                fired: false,
            }),
            Trigger::AtTime(_) => None,
        })
        .collect();
    let pending: Vec<(f64, EventKind)> = timed.into_iter().filter(|(t, _)| *t > 0.0).collect();
    let mut next_event = 0;
    let mut fault: Option<(usize, C64)> = None;

    let report = impasse_report(&sys, 0.0, &state.x, &state.y)?;
    let mut det_sign = jalg_det_sign(&sys, &state)?;
    let mut samples = vec![Sample { state: state.clone(), report }];
    let fine_until = clear_time.map(|t| t + options.fine_window);

    let finish = |samples: Vec<Sample>, termination, records, theorem1_at_hit, sys: &PowerSystem| Trajectory {
        scenario: scenario.name.clone(),
        samples,
        termination,
        events: records,
        theorem1_at_hit,
        final_case: sys.case.clone(),
        clear_time,
    };

    let eps = 1e-12;
    while state.t < options.horizon - eps {
        // Time events due now.
        while next_event < pending.len() && pending[next_event].0 <= state.t + eps {
            let kind = pending[next_event].1;
            let mut case = sys.case.clone();
            events::apply(&mut case, kind, &mut fault)?;
            sys = sys.with_case(case)?;
            state.y = resolve_after_event(&sys, &state, &samples)?;
            det_sign = jalg_det_sign(&sys, &state)?;
            records.push(EventRecord { t: state.t, kind });
            log::debug!("{:.6} s: {kind}", state.t);
            next_event += 1;
        }

        let fine = match (fault_time, fine_until) {
            (Some(a), Some(b)) => state.t >= a - eps && state.t < b - eps,
            (Some(a), None) => state.t >= a - eps,
            _ => false,
        };
        let mut h = if fine { options.dt_fine } else { options.dt };
        let mut stop = options.horizon;
        if next_event < pending.len() {
            stop = stop.min(pending[next_event].0);
        }
        if let (false, Some(a)) = (fine, fault_time) {
            if state.t < a {
                stop = stop.min(a);
            }
        }
        if fine {
            if let Some(b) = fine_until {
                stop = stop.min(b);
            }
        }
        if state.t + h > stop - eps {
            h = stop - state.t;
        }

        let mut taken = None;
        let mut sub = h;
        for attempt in 0..3 {
            match step(&sys, &state, sub) {
                Ok(s) => {
                    taken = Some(s);
                    break;
                }
                Err(Error::NewtonFailure { .. }) | Err(Error::NonPositiveVoltage { .. }) if attempt < 2 => sub *= 0.5,
                Err(Error::NewtonFailure { .. }) | Err(Error::NonPositiveVoltage { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let bracket = match taken {
            Some(next) => {
                let sign = jalg_det_sign(&sys, &next)?;
                if sign != det_sign {
                    Some(Bracket { from: state.clone(), width: next.t - state.t })
                } else {
                    let report = impasse_report(&sys, next.t, &next.x, &next.y)?;
                    let prev_report = samples.last().map(|s| s.report).expect("non-empty");
                    state = next;
                    samples.push(Sample { state: state.clone(), report });
                    // Index-triggered events act on the state just accepted.
                    for mon in monitors.iter_mut() {
                        if mon.fires(&prev_report, &report) {
                            mon.fired = true;
                            let mut case = sys.case.clone();
                            events::apply(&mut case, mon.kind, &mut fault)?;
                            sys = sys.with_case(case)?;
                            state.y = resolve_after_event(&sys, &state, &samples)?;
                            records.push(EventRecord { t: state.t, kind: mon.kind });
                            log::info!("{:.6} s: index trigger, {}", state.t, mon.kind);
                        }
                    }
                    det_sign = jalg_det_sign(&sys, &state)?;
                    None
                }
            }
            None => Some(Bracket { from: state.clone(), width: sub }),
        };

        if let Some(bracket) = bracket {
            let outcome = detect_impasse(&sys, bracket, options.dt)?;
            for s in outcome.samples {
                let report = impasse_report(&sys, s.t, &s.x, &s.y)?;
                samples.push(Sample { state: s, report });
            }
            return Ok(match outcome.hit {
                Some(hit) => {
                    let report = impasse_report(&sys, hit.t, &hit.x, &hit.y)?;
                    let satisfied = report.satisfied();
                    if !satisfied {
                        log::error!("necessary condition violated at the surface hit, t = {}", hit.t);
                    }
                    samples.push(Sample { state: hit.clone(), report });
                    finish(samples, Termination::ImpasseHit { t_hit: hit.t }, records, Some(satisfied), &sys)
                }
                None => {
                    let last = samples.last().expect("non-empty").state.clone();
                    let bus = outcome.voltage_bus.unwrap_or_else(|| lowest_bus(&last));
                    finish(samples, Termination::Assumption2Violation { t: last.t, bus }, records, None, &sys)
                }
            });
        }
    }
    Ok(finish(samples, Termination::HorizonReached, records, None, &sys))
}

/// Algebraic variables after a network change with `x` held. The equations
/// can have several solutions; candidates are started from the current
/// point, from the pre-disturbance profile and from a flat profile, and the
/// high-voltage solution is kept.
fn resolve_after_event(sys: &PowerSystem, state: &SystemState, history: &[Sample]) -> Result<AlgebraicState> {
    let mut guesses = vec![state.y.clone()];
    if let Some(first) = history.first() {
        guesses.push(first.state.y.clone());
    }
    let mut flat = state.y.clone();
    flat.v.iter_mut().for_each(|v| *v = 1.0);
    guesses.push(flat);
    let mut best: Option<AlgebraicState> = None;
    let mut last_err = None;
    for g in &guesses {
        match solve_algebraic_damped(sys, &state.x, g) {
            Ok(y) => {
                let better = match &best {
                    Some(b) => y.v.iter().sum::<f64>() > b.v.iter().sum::<f64>() + 1e-9,
                    None => true,
                };
                if better {
                    best = Some(y);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one guess was tried"))
}

fn lowest_bus(s: &SystemState) -> usize {
    s.y.v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i + 1)
        .unwrap_or(0)
}

fn jalg_det_sign(sys: &PowerSystem, s: &SystemState) -> Result<bool> {
    let j = algebraic_jacobian(sys, &s.x, &s.y)?;
    Ok(linalg::det_r(&j) >= 0.0)
}

/// Same run with an index-triggered shed of the motor at `bus`.
pub fn ivs_triggered_shedding(
    case: &NetworkCase,
    scenario: &Scenario,
    bus: usize,
    threshold: f64,
    arm_delay: f64,
    options: &SimOptions,
) -> Result<Trajectory> {
    let mut events = scenario.events.clone();
    events.push(Event {
        kind: EventKind::ShedMotor { bus },
        trigger: Trigger::WhenIvsCrosses {
            threshold,
            direction: Direction::Down,
            arm_delay,
        },
    });
    let with_shed = Scenario::new(format!("{}+shed", scenario.name), events);
    run_scenario(case, &with_shed, options)
}

/// `t_hit` (or `None` if the run survives) with an extra shunt `b0` at `bus`
/// installed from the start.
pub fn shunt_scan_point(
    case: &NetworkCase,
    scenario: &Scenario,
    bus: usize,
    b0: f64,
    options: &SimOptions,
) -> Result<Option<f64>> {
    let mut events = scenario.events.clone();
    events.push(Event::at(0.0, EventKind::InstallShunt { bus, b0 }));
    let traj = run_scenario(case, &Scenario::new(format!("{}@b0={b0}", scenario.name), events), options)?;
    Ok(match traj.termination {
        Termination::ImpasseHit { t_hit } => Some(t_hit),
        Termination::Assumption2Violation { t, .. } => Some(t),
        Termination::HorizonReached => None,
    })
}
