use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::netmodel::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Bolted-through-reactance fault: a shunt `−j/x_f` at the bus.
    ApplyFault { bus: usize, reactance: f64 },
    ClearFault,
    InstallShunt { bus: usize, b0: f64 },
    ShedMotor { bus: usize },
    /// Remove `fraction` of the static load's rated powers.
    ShedStatic { bus: usize, fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    AtTime(f64),
    /// Fires on the first crossing of `threshold` in `direction` once armed.
    /// Arming starts `arm_delay` seconds after the last fault clearing (or at
    /// `t = 0` when the scenario clears no fault). A crossing needs a sample
    /// on the far side of the threshold after arming, so a dip that is
    /// already in progress at arming time does not fire.
    WhenIvsCrosses { threshold: f64, direction: Direction, arm_delay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub trigger: Trigger,
}

impl Event {
    pub fn at(t: f64, kind: EventKind) -> Self {
        Self { kind, trigger: Trigger::AtTime(t) }
    }

    pub fn time(&self) -> Option<f64> {
        match self.trigger {
            Trigger::AtTime(t) => Some(t),
            Trigger::WhenIvsCrosses { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, events: Vec<Event>) -> Self {
        Self { name: name.into(), events }
    }

    /// Time-triggered events in order, checking that faults never overlap.
    pub fn timed(&self) -> Result<Vec<(f64, EventKind)>> {
        let mut timed: Vec<(f64, EventKind)> = self
            .events
            .iter()
            .filter_map(|e| e.time().map(|t| (t, e.kind)))
            .collect();
        for (t, _) in &timed {
            if !t.is_finite() || *t < 0.0 {
                return Err(Error::InvalidEvents(format!("event time {t} is not a non-negative number")));
            }
        }
        timed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut active = false;
        for (t, kind) in &timed {
            match kind {
                EventKind::ApplyFault { reactance, .. } => {
                    if active {
                        return Err(Error::InvalidEvents(format!("second fault applied at {t} s while one is active")));
                    }
                    if !(*reactance > 0.0) {
                        return Err(Error::InvalidEvents(format!("fault reactance {reactance} must be positive")));
                    }
                    active = true;
                }
                EventKind::ClearFault => {
                    if !active {
                        return Err(Error::InvalidEvents(format!("clear at {t} s without an active fault")));
                    }
                    active = false;
                }
                _ => {}
            }
        }
        Ok(timed)
    }

    /// Last fault-clearing time, if any.
    pub fn clear_time(&self) -> Option<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::ClearFault)
            .filter_map(Event::time)
            .reduce(f64::max)
    }

    pub fn fault_time(&self) -> Option<f64> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ApplyFault { .. }))
            .filter_map(Event::time)
            .reduce(f64::min)
    }
}

/// Case modification applied by an event. `fault` remembers the active fault
/// so that clearing restores the exact pre-fault shunt.
pub(crate) fn apply(case: &mut NetworkCase, kind: EventKind, fault: &mut Option<(usize, C64)>) -> Result<()> {
    match kind {
        EventKind::ApplyFault { bus, reactance } => {
            case.check_bus(bus)?;
            let y = C64::new(0.0, -1.0 / reactance);
            *fault = Some((bus, case.buses[bus - 1].shunt));
            case.buses[bus - 1].shunt += y;
        }
        EventKind::ClearFault => {
            let (bus, shunt) = fault
                .take()
                .ok_or_else(|| Error::InvalidEvents("clear without an active fault".into()))?;
            case.buses[bus - 1].shunt = shunt;
        }
        EventKind::InstallShunt { bus, b0 } => {
            case.check_bus(bus)?;
            case.buses[bus - 1].shunt += C64::new(0.0, b0);
        }
        EventKind::ShedMotor { bus } => {
            let m = case
                .motors
                .iter_mut()
                .find(|m| m.bus == bus)
                .ok_or_else(|| Error::InvalidEvents(format!("no motor at bus {bus} to shed")))?;
            m.in_service = false;
        }
        EventKind::ShedStatic { bus, fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidEvents(format!("shed fraction {fraction} outside [0, 1]")));
            }
            let l = case
                .static_loads
                .iter_mut()
                .find(|l| l.bus == bus)
                .ok_or_else(|| Error::InvalidEvents(format!("no static load at bus {bus} to shed")))?;
            l.p0 *= 1.0 - fraction;
            l.q0 *= 1.0 - fraction;
        }
    }
    Ok(())
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventKind::ApplyFault { bus, reactance } => write!(f, "fault at bus {bus} through x_f = {reactance}"),
            EventKind::ClearFault => write!(f, "fault cleared"),
            EventKind::InstallShunt { bus, b0 } => write!(f, "shunt b0 = {b0} installed at bus {bus}"),
            EventKind::ShedMotor { bus } => write!(f, "motor at bus {bus} shed"),
            EventKind::ShedStatic { bus, fraction } => write!(f, "{fraction} of static load at bus {bus} shed"),
        }
    }
}
