//! Static immunity test for purely static loads.
//!
//! Under the four conditions below, the terminal-bus rows of `Y′` are strictly
//! diagonally dominant, the remaining rows weakly so, and every row reaches a
//! strict row through the graph of `Y′`. Such a matrix is weakly chained
//! diagonally dominant and therefore nonsingular at every state.

use std::collections::VecDeque;

use crate::devices::SynchronousMachine;
use crate::linalg::CMatrix;
use crate::netmodel::{build_ybus, NetworkCase};

/// Absolute tolerance for the zero tests on admittance entries.
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theorem2Conditions {
    /// Stator admittances have `G ≥ 0`, `B < 0`.
    pub generators: bool,
    /// Lossless network without shunts: `G_ij = 0`, `B_ij > 0` on lines,
    /// `B_ii = −Σ_j B_ij`.
    pub lossless_network: bool,
    /// `P⁰ = 0` or `α = 2` at every static load.
    pub active_exponents: bool,
    /// `Q⁰ ≥ 0` and `β ≥ 1` at every static load.
    pub reactive_exponents: bool,
}

impl Theorem2Conditions {
    pub fn all(&self) -> bool {
        self.generators && self.lossless_network && self.active_exponents && self.reactive_exponents
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Verdict {
    /// False when the case has motors. The conditions are still evaluated on
    /// the static part, but the verdict is never `immune`.
    pub applicable: bool,
    pub conditions: Theorem2Conditions,
    /// Human-readable reason for each failed condition.
    pub failures: Vec<String>,
    pub wcdd: bool,
    pub immune: bool,
}

pub fn theorem2_check(case: &NetworkCase) -> Theorem2Verdict {
    let mut failures = Vec::new();
    let applicable = case.motors.is_empty();
    if !applicable {
        failures.push(format!("{} induction motor(s) present; conditions checked on the static part only", case.motors.len()));
    }

    let mut generators = true;
    for g in &case.generators {
        let y = g.stator_admittance();
        if !(y.re >= 0.0 && y.im < 0.0) {
            generators = false;
            failures.push(format!("condition 1: generator at bus {} has stator admittance {y}", g.bus));
        }
    }

    let ybus = build_ybus(case).ok();
    let mut lossless_network = ybus.is_some();
    if let Some(y) = &ybus {
        let n = case.n();
        let mut linked = vec![vec![false; n]; n];
        for l in &case.lines {
            linked[l.from - 1][l.to - 1] = true;
            linked[l.to - 1][l.from - 1] = true;
        }
        for i in 0..n {
            let mut off_sum = 0.0;
            for j in 0..n {
                let e = y[(i, j)];
                if e.re.abs() > ZERO_TOL {
                    lossless_network = false;
                    failures.push(format!("condition 2: G[{},{}] = {} is not zero", i + 1, j + 1, e.re));
                }
                if i != j {
                    off_sum += e.im;
                    let ok = if linked[i][j] { e.im > 0.0 } else { e.im >= -ZERO_TOL };
                    if !ok {
                        lossless_network = false;
                        failures.push(format!("condition 2: B[{},{}] = {} has the wrong sign", i + 1, j + 1, e.im));
                    }
                }
            }
            if (y[(i, i)].im + off_sum).abs() > ZERO_TOL * off_sum.abs().max(1.0) {
                lossless_network = false;
                failures.push(format!("condition 2: bus {} carries a shunt susceptance", i + 1));
            }
        }
    } else {
        failures.push("condition 2: network admittance could not be built".into());
    }

    let mut active_exponents = true;
    let mut reactive_exponents = true;
    for l in &case.static_loads {
        if !(l.p0 == 0.0 || l.alpha == 2.0) {
            active_exponents = false;
            failures.push(format!("condition 3: bus {} has P0 = {} with alpha = {}", l.bus, l.p0, l.alpha));
        }
        if !(l.q0 >= 0.0 && l.beta >= 1.0) {
            reactive_exponents = false;
            failures.push(format!("condition 4: bus {} has Q0 = {} with beta = {}", l.bus, l.q0, l.beta));
        }
    }

    let conditions = Theorem2Conditions {
        generators,
        lossless_network,
        active_exponents,
        reactive_exponents,
    };
    let wcdd = conditions.all() && structural_chain(case);
    Theorem2Verdict {
        applicable,
        conditions,
        failures,
        wcdd,
        immune: applicable && wcdd,
    }
}

/// Reachability part of the structural test: every node of the graph of `Y′`
/// reaches a terminal-bus node, whose rows are the strictly dominant ones.
fn structural_chain(case: &NetworkCase) -> bool {
    let n = case.n();
    if n == 0 || case.generators.is_empty() {
        return false;
    }
    let mut adj = vec![Vec::new(); 2 * n];
    for l in &case.lines {
        let (a, b) = (l.from - 1, l.to - 1);
        for half in [0, n] {
            adj[half + a].push(half + b);
            adj[half + b].push(half + a);
        }
    }
    for l in &case.static_loads {
        let i = l.bus - 1;
        adj[i].push(n + i);
        adj[n + i].push(i);
    }
    let mut strict = vec![false; 2 * n];
    for g in &case.generators {
        strict[g.bus - 1] = true;
        strict[n + g.bus - 1] = true;
    }
    reaches_strict(&adj, &strict)
}

fn reaches_strict(adj: &[Vec<usize>], strict: &[bool]) -> bool {
    // Reverse search from the strict rows over reversed edges.
    let m = adj.len();
    let mut rev = vec![Vec::new(); m];
    for (i, out) in adj.iter().enumerate() {
        for &j in out {
            rev[j].push(i);
        }
    }
    let mut seen = strict.to_vec();
    let mut queue: VecDeque<usize> = (0..m).filter(|&i| strict[i]).collect();
    while let Some(j) = queue.pop_front() {
        for &i in &rev[j] {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Numeric WCDD test: all rows weakly dominant, at least one strictly, and
/// every row linked to a strict row through nonzero off-diagonal entries.
pub fn is_wcdd(m: &CMatrix) -> bool {
    let k = m.nrows();
    if k == 0 || m.ncols() != k {
        return false;
    }
    let mut strict = vec![false; k];
    let mut adj = vec![Vec::new(); k];
    for i in 0..k {
        let d = m[(i, i)].norm();
        let mut off = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let a = m[(i, j)].norm();
            if a > 0.0 {
                off += a;
                adj[i].push(j);
            }
        }
        let slack = 1e-12 * d.max(off);
        if d + slack < off {
            return false;
        }
        strict[i] = d > off + slack;
    }
    strict.iter().any(|&s| s) && reaches_strict(&adj, &strict)
}
