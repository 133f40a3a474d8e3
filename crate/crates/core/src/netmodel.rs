//! Network admittance matrices: `Y_bus` over the physical buses and the
//! augmented matrix `Ỹ` that adds one internal bus per generator behind its
//! subtransient impedance.
//!
//! Bus ids are 1-based. Physical buses are `1..=n`; the internal bus of the
//! k-th generator (in case order) is `n + k + 1`. Matrix indices are
//! zero-based, so bus `i` sits at row `i - 1`.

use crate::devices::{GeneratorParams, MotorParams, StaticLoad, SynchronousMachine};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    /// Connects a generator terminal (and possibly loads).
    Terminal,
    /// Connects loads only.
    LoadOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Shunt admittance to ground, including line charging.
    pub shunt: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series admittance.
    pub y: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<GeneratorParams>,
    pub motors: Vec<MotorParams>,
    pub static_loads: Vec<StaticLoad>,
    pub base_mva: f64,
    pub base_freq: f64,
}

/// Block decomposition of the augmented admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceSet {
    pub y_bus: CMatrix,
    pub y_gen: CMatrix,
    pub y_lg: CMatrix,
    pub y_gg: CMatrix,
    pub y_aug: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Bus ids per component, each sorted, components ordered by smallest id.
    pub components: Vec<Vec<usize>>,
}

impl NetworkCase {
    /// Number of physical buses.
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// Number of generators (internal buses).
    pub fn g(&self) -> usize {
        self.generators.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidCase("case has no buses".into()));
        }
        if !(self.base_mva > 0.0 && self.base_freq > 0.0) {
            return Err(Error::InvalidCase("base_mva and base_freq must be positive".into()));
        }
        for (k, bus) in self.buses.iter().enumerate() {
            if bus.id != k + 1 {
                return Err(Error::InvalidCase(format!(
                    "bus ids must be numbered 1..={n} in order; position {} holds id {}",
                    k + 1,
                    bus.id
                )));
            }
        }
        for line in &self.lines {
            self.check_bus(line.from)?;
            self.check_bus(line.to)?;
            if line.from == line.to {
                return Err(Error::InvalidCase(format!("line {}-{} is a self loop", line.from, line.to)));
            }
            if line.y == C64::new(0.0, 0.0) {
                return Err(Error::InvalidCase(format!("line {}-{} has zero admittance", line.from, line.to)));
            }
        }
        let mut gen_at = vec![false; n];
        let mut slack = 0;
        for g in &self.generators {
            self.check_bus(g.bus)?;
            g.validate()?;
            if self.buses[g.bus - 1].kind != BusKind::Terminal {
                return Err(Error::InvalidCase(format!("generator attached to load-only bus {}", g.bus)));
            }
            if gen_at[g.bus - 1] {
                return Err(Error::InvalidCase(format!("more than one generator at bus {}", g.bus)));
            }
            gen_at[g.bus - 1] = true;
            slack += usize::from(g.dispatch.slack);
        }
        for bus in &self.buses {
            if bus.kind == BusKind::Terminal && !gen_at[bus.id - 1] {
                return Err(Error::InvalidCase(format!("terminal bus {} has no generator", bus.id)));
            }
        }
        if !self.generators.is_empty() && slack != 1 {
            return Err(Error::InvalidCase(format!("expected exactly one slack generator, found {slack}")));
        }
        let mut seen = vec![false; n];
        for m in &self.motors {
            self.check_bus(m.bus)?;
            m.validate()?;
            if std::mem::replace(&mut seen[m.bus - 1], true) {
                return Err(Error::InvalidCase(format!("more than one motor at bus {}", m.bus)));
            }
        }
        let mut seen = vec![false; n];
        for l in &self.static_loads {
            self.check_bus(l.bus)?;
            if !(l.alpha.is_finite() && l.beta.is_finite() && l.p0.is_finite() && l.q0.is_finite()) {
                return Err(Error::InvalidCase(format!("static load at bus {} has non-finite data", l.bus)));
            }
            if std::mem::replace(&mut seen[l.bus - 1], true) {
                return Err(Error::InvalidCase(format!("more than one static load at bus {}", l.bus)));
            }
        }
        let conn = connectivity_check(self);
        if !conn.connected {
            return Err(Error::Disconnected { components: conn.components });
        }
        Ok(())
    }

    pub fn check_bus(&self, bus: usize) -> Result<()> {
        if bus >= 1 && bus <= self.n() {
            Ok(())
        } else {
            Err(Error::BusOutOfRange { bus, n: self.n() })
        }
    }

    /// Copy of the case with `j b0` added to the shunt at `bus`.
    pub fn with_shunt(&self, bus: usize, b0: f64) -> Result<Self> {
        self.check_bus(bus)?;
        let mut case = self.clone();
        case.buses[bus - 1].shunt += C64::new(0.0, b0);
        Ok(case)
    }

    pub fn static_load_at(&self, bus: usize) -> Option<&StaticLoad> {
        self.static_loads.iter().find(|l| l.bus == bus)
    }

    pub fn motor_at(&self, bus: usize) -> Option<&MotorParams> {
        self.motors.iter().find(|m| m.bus == bus)
    }

    /// Zero-based row of the terminal bus for each generator.
    pub fn terminal_rows(&self) -> Vec<usize> {
        self.generators.iter().map(|g| g.bus - 1).collect()
    }
}

/// Union-find over the line graph.
pub fn connectivity_check(case: &NetworkCase) -> Connectivity {
    let n = case.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for line in &case.lines {
        if line.from == 0 || line.to == 0 || line.from > n || line.to > n {
            continue;
        }
        let (a, b) = (find(&mut parent, line.from - 1), find(&mut parent, line.to - 1));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i + 1);
    }
    let components: Vec<Vec<usize>> = groups.into_values().collect();
    Connectivity {
        connected: components.len() <= 1,
        components,
    }
}

/// `Y_ii = y_i0 + Σ_j y_ij`, `Y_ij = −y_ij`.
pub fn build_ybus(case: &NetworkCase) -> Result<CMatrix> {
    let conn = connectivity_check(case);
    if !conn.connected {
        return Err(Error::Disconnected { components: conn.components });
    }
    let n = case.n();
    let mut y = CMatrix::zeros(n, n);
    for bus in &case.buses {
        case.check_bus(bus.id)?;
        y[(bus.id - 1, bus.id - 1)] += bus.shunt;
    }
    for line in &case.lines {
        case.check_bus(line.from)?;
        case.check_bus(line.to)?;
        let (i, j) = (line.from - 1, line.to - 1);
        y[(i, i)] += line.y;
        y[(j, j)] += line.y;
        y[(i, j)] -= line.y;
        y[(j, i)] -= line.y;
    }
    Ok(y)
}

/// Assemble `Ỹ = [[Y_bus + Y_gen, Y_LG], [Y_LGᵀ, Y_GG]]`.
pub fn build_augmented(case: &NetworkCase, ybus: &CMatrix) -> Result<AdmittanceSet> {
    let n = case.n();
    let g = case.g();
    let mut y_gen = CMatrix::zeros(n, n);
    let mut y_lg = CMatrix::zeros(n, g);
    let mut y_gg = CMatrix::zeros(g, g);
    for (k, gen) in case.generators.iter().enumerate() {
        case.check_bus(gen.bus)?;
        if case.buses[gen.bus - 1].kind != BusKind::Terminal {
            return Err(Error::InvalidCase(format!("generator attached to load-only bus {}", gen.bus)));
        }
        let ys = gen.stator_admittance();
        let i = gen.bus - 1;
        y_gen[(i, i)] += ys;
        y_lg[(i, k)] = -ys;
        y_gg[(k, k)] = ys;
    }
    let mut y_aug = CMatrix::zeros(n + g, n + g);
    y_aug.view_mut((0, 0), (n, n)).copy_from(&(ybus + &y_gen));
    y_aug.view_mut((0, n), (n, g)).copy_from(&y_lg);
    y_aug.view_mut((n, 0), (g, n)).copy_from(&y_lg.transpose());
    y_aug.view_mut((n, n), (g, g)).copy_from(&y_gg);
    Ok(AdmittanceSet {
        y_bus: ybus.clone(),
        y_gen,
        y_lg,
        y_gg,
        y_aug,
    })
}

impl AdmittanceSet {
    pub fn build(case: &NetworkCase) -> Result<Self> {
        let ybus = build_ybus(case)?;
        build_augmented(case, &ybus)
    }
}

/// Copy of `ybus` with `j b0` added at `(bus, bus)`; `b0 > 0` is capacitive.
pub fn apply_shunt(ybus: &CMatrix, bus: usize, b0: f64) -> Result<CMatrix> {
    let n = ybus.nrows();
    if bus == 0 || bus > n {
        return Err(Error::BusOutOfRange { bus, n });
    }
    let mut y = ybus.clone();
    y[(bus - 1, bus - 1)] += C64::new(0.0, b0);
    Ok(y)
}

/// Loss-induced phase shift `φ_ij = −atan(G̃_ij / B̃_ij)` between zero-based
/// indices `i` and `j`; zero when the entry vanishes.
///
/// The polar power-flow form `V_iV_j|Ỹ_ij| sin(θ_ij − φ_ij)` built on this
/// angle equals the rectangular form only where `B̃_ij > 0` (inductive
/// coupling); the residuals therefore use the rectangular form.
pub fn phase_shift(y_aug: &CMatrix, i: usize, j: usize) -> f64 {
    let y = y_aug[(i, j)];
    if y.re == 0.0 && y.im == 0.0 {
        0.0
    } else {
        -(y.re / y.im).atan()
    }
}
