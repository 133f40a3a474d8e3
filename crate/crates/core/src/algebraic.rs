//! Power-flow residuals over the physical buses, their analytic Jacobian with
//! respect to `(θ, V)`, the Newton solver for the algebraic constraint, and
//! equilibrium initialization.
//!
//! The residual of bus `i` is the power leaving the bus into the augmented
//! network plus the power drawn by its loads:
//!
//! ```text
//! g_p,i = V_i² G̃_ii + Σ_j V_i V_j (G̃_ij cos θ_ij + B̃_ij sin θ_ij) + P_s,i + P_m,i
//! g_q,i = −V_i² B̃_ii + Σ_j V_i V_j (G̃_ij sin θ_ij − B̃_ij cos θ_ij) + Q_s,i + Q_m,i
//! ```
//!
//! where the sum runs over all other buses of `Ỹ`, generator internal buses
//! included. Internal-bus magnitudes and angles are recomputed from the
//! machine states on every call.

use std::ops::Range;

use crate::devices::{GeneratorState, MachineInputs, MotorState, SynchronousMachine};
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix, RVector, C64};
use crate::netmodel::{AdmittanceSet, BusKind, NetworkCase};
use crate::numerics::{fd_jacobian, inf_norm};

/// Convergence threshold of the algebraic Newton solver (max-norm).
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
/// Iterates with any voltage at or below this floor are rejected.
pub const V_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicState {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
}

impl AlgebraicState {
    pub fn flat(n: usize) -> Self {
        Self {
            theta: vec![0.0; n],
            v: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    /// `[θ; V]`.
    pub fn to_vector(&self) -> RVector {
        RVector::from_iterator(2 * self.n(), self.theta.iter().chain(self.v.iter()).copied())
    }

    pub fn from_vector(y: &RVector) -> Self {
        let n = y.len() / 2;
        Self {
            theta: y.rows(0, n).iter().copied().collect(),
            v: y.rows(n, n).iter().copied().collect(),
        }
    }
}

/// Position of each device's states inside `x`: generators first (six states
/// each, case order), then motors (three states each).
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub generators: Vec<Range<usize>>,
    pub motors: Vec<Range<usize>>,
    pub len: usize,
}

impl StateLayout {
    pub fn new(case: &NetworkCase) -> Self {
        let mut offset = 0;
        let mut take = |k: usize| {
            let r = offset..offset + k;
            offset += k;
            r
        };
        let generators = (0..case.g()).map(|_| take(GeneratorState::LEN)).collect();
        let motors = (0..case.motors.len()).map(|_| take(MotorState::LEN)).collect();
        Self {
            generators,
            motors,
            len: offset,
        }
    }

    /// Human-readable `device -> slice` manifest.
    pub fn manifest(&self, case: &NetworkCase) -> Vec<(String, Range<usize>)> {
        let gens = case
            .generators
            .iter()
            .zip(&self.generators)
            .map(|(g, r)| (format!("generator@bus{}", g.bus), r.clone()));
        let mots = case
            .motors
            .iter()
            .zip(&self.motors)
            .map(|(m, r)| (format!("motor@bus{}", m.bus), r.clone()));
        gens.chain(mots).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: AlgebraicState,
}

/// Magnitude and angle of each generator internal bus.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalBusView {
    pub theta_g: Vec<f64>,
    pub v_g: Vec<f64>,
}

/// A case compiled for evaluation: admittances, state layout, per-bus device
/// lookup and the machine inputs fixed at initialization.
#[derive(Debug, Clone)]
pub struct PowerSystem {
    pub case: NetworkCase,
    pub adm: AdmittanceSet,
    pub layout: StateLayout,
    pub inputs: Vec<MachineInputs>,
    static_at: Vec<Option<usize>>,
    motor_at: Vec<Option<usize>>,
}

impl PowerSystem {
    pub fn new(case: NetworkCase) -> Result<Self> {
        case.validate()?;
        let adm = AdmittanceSet::build(&case)?;
        let layout = StateLayout::new(&case);
        let n = case.n();
        let mut static_at = vec![None; n];
        for (k, l) in case.static_loads.iter().enumerate() {
            static_at[l.bus - 1] = Some(k);
        }
        let mut motor_at = vec![None; n];
        for (k, m) in case.motors.iter().enumerate() {
            motor_at[m.bus - 1] = Some(k);
        }
        let inputs = vec![MachineInputs::default(); case.g()];
        Ok(Self {
            case,
            adm,
            layout,
            inputs,
            static_at,
            motor_at,
        })
    }

    /// Rebuild after the case changed, keeping the machine inputs.
    pub fn with_case(&self, case: NetworkCase) -> Result<Self> {
        let mut sys = Self::new(case)?;
        sys.inputs = self.inputs.clone();
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.case.n()
    }

    pub fn generator_state(&self, x: &[f64], k: usize) -> GeneratorState {
        GeneratorState::from_slice(&x[self.layout.generators[k].clone()])
    }

    pub fn motor_state(&self, x: &[f64], k: usize) -> MotorState {
        MotorState::from_slice(&x[self.layout.motors[k].clone()])
    }

    pub fn static_index(&self, row: usize) -> Option<usize> {
        self.static_at[row]
    }

    /// Index of the in-service motor at zero-based `row`.
    pub fn motor_index(&self, row: usize) -> Option<usize> {
        self.motor_at[row].filter(|&k| self.case.motors[k].in_service)
    }

    /// Motor equivalent admittance at `row` for the slip stored in `x`.
    pub fn motor_admittance(&self, x: &[f64], row: usize) -> Result<C64> {
        match self.motor_index(row) {
            Some(k) => self.case.motors[k].equiv_admittance(self.motor_state(x, k).sigma),
            None => Ok(C64::new(0.0, 0.0)),
        }
    }

    pub fn internal_view(&self, x: &[f64]) -> InternalBusView {
        let (v_g, theta_g) = self
            .case
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| g.internal_voltage(&self.generator_state(x, k)))
            .unzip();
        InternalBusView { theta_g, v_g }
    }

    fn extended(&self, x: &[f64], y: &AlgebraicState) -> Result<(Vec<f64>, Vec<f64>)> {
        for (i, &v) in y.v.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveVoltage { bus: i + 1, v });
            }
        }
        let view = self.internal_view(x);
        let theta = y.theta.iter().chain(&view.theta_g).copied().collect();
        let v = y.v.iter().chain(&view.v_g).copied().collect();
        Ok((theta, v))
    }
}

/// Stacked residual `[g_p; g_q]`; zero exactly on the algebraic manifold.
pub fn residuals(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<RVector> {
    let n = sys.n();
    let (th, vv) = sys.extended(x, y)?;
    let ya = &sys.adm.y_aug;
    let mut r = RVector::zeros(2 * n);
    for i in 0..n {
        let vi = vv[i];
        let mut p = vi * vi * ya[(i, i)].re;
        let mut q = -vi * vi * ya[(i, i)].im;
        for j in 0..vv.len() {
            let yij = ya[(i, j)];
            if j == i || (yij.re == 0.0 && yij.im == 0.0) {
                continue;
            }
            let (s, c) = (th[i] - th[j]).sin_cos();
            p += vi * vv[j] * (yij.re * c + yij.im * s);
            q += vi * vv[j] * (yij.re * s - yij.im * c);
        }
        if let Some(k) = sys.static_index(i) {
            let (ps, qs) = sys.case.static_loads[k].power(vi)?;
            p += ps;
            q += qs;
        }
        if let Some(k) = sys.motor_index(i) {
            let (pm, qm) = sys.case.motors[k].power(sys.motor_state(x, k).sigma, vi)?;
            p += pm;
            q += qm;
        }
        r[i] = p;
        r[n + i] = q;
    }
    Ok(r)
}

/// Analytic `∂g/∂y` as the 2×2 block matrix `[[∂g_p/∂θ, ∂g_p/∂V], [∂g_q/∂θ, ∂g_q/∂V]]`.
pub fn algebraic_jacobian(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<RMatrix> {
    let n = sys.n();
    let (th, vv) = sys.extended(x, y)?;
    let ya = &sys.adm.y_aug;
    let mut jac = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let vi = vv[i];
        let (mut dp_dti, mut dq_dti, mut dp_dvi, mut dq_dvi) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..vv.len() {
            let yij = ya[(i, j)];
            if j == i || (yij.re == 0.0 && yij.im == 0.0) {
                continue;
            }
            let (s, c) = (th[i] - th[j]).sin_cos();
            let gc_bs = yij.re * c + yij.im * s;
            let gs_bc = yij.re * s - yij.im * c;
            dp_dti += -vi * vv[j] * gs_bc;
            dq_dti += vi * vv[j] * gc_bs;
            dp_dvi += vv[j] * gc_bs;
            dq_dvi += vv[j] * gs_bc;
            if j < n {
                jac[(i, j)] = vi * vv[j] * gs_bc;
                jac[(n + i, j)] = -vi * vv[j] * gc_bs;
                jac[(i, n + j)] = vi * gc_bs;
                jac[(n + i, n + j)] = vi * gs_bc;
            }
        }
        let ym = sys.motor_admittance(x, i)?;
        dp_dvi += 2.0 * vi * (ya[(i, i)].re + ym.re);
        dq_dvi += -2.0 * vi * (ya[(i, i)].im + ym.im);
        if let Some(k) = sys.static_index(i) {
            let (dps, dqs) = sys.case.static_loads[k].power_slope(vi)?;
            dp_dvi += dps;
            dq_dvi += dqs;
        }
        jac[(i, i)] = dp_dti;
        jac[(n + i, i)] = dq_dti;
        jac[(i, n + i)] = dp_dvi;
        jac[(n + i, n + i)] = dq_dvi;
    }
    Ok(jac)
}

/// State derivatives `f(x, y)` of every device.
pub fn derivatives(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<RVector> {
    let mut dx = RVector::zeros(sys.layout.len);
    for (k, g) in sys.case.generators.iter().enumerate() {
        let row = g.bus - 1;
        let d = g.derivatives(&sys.generator_state(x, k), &sys.inputs[k], y.theta[row], y.v[row])?;
        let r = sys.layout.generators[k].clone();
        dx.rows_mut(r.start, r.len()).copy_from_slice(&d.to_array());
    }
    for (k, m) in sys.case.motors.iter().enumerate() {
        if !m.in_service {
            continue;
        }
        let row = m.bus - 1;
        let d = m.derivatives(&sys.motor_state(x, k), y.theta[row], y.v[row])?;
        let r = sys.layout.motors[k].clone();
        dx.rows_mut(r.start, r.len()).copy_from_slice(&d.to_array());
    }
    Ok(dx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Max-norm residual before each iteration and after the last one.
    pub residual_history: Vec<f64>,
}

/// Newton on `g(x, ·) = 0` with the analytic Jacobian; a single halving is
/// tried when a full step increases the residual.
pub fn solve_algebraic(sys: &PowerSystem, x: &[f64], y_guess: &AlgebraicState) -> Result<AlgebraicState> {
    solve_algebraic_report(sys, x, y_guess).map(|(y, _)| y)
}

pub fn solve_algebraic_report(
    sys: &PowerSystem,
    x: &[f64],
    y_guess: &AlgebraicState,
) -> Result<(AlgebraicState, NewtonReport)> {
    let mut y = y_guess.to_vector();
    let n = sys.n();
    let check_floor = |y: &RVector| -> Result<()> {
        for i in 0..n {
            if y[n + i] <= V_FLOOR {
                return Err(Error::NonPositiveVoltage { bus: i + 1, v: y[n + i] });
            }
        }
        Ok(())
    };
    check_floor(&y)?;
    let eval = |y: &RVector| residuals(sys, x, &AlgebraicState::from_vector(y));
    let mut r = eval(&y)?;
    let mut history = vec![inf_norm(&r)];
    for it in 0..NEWTON_MAX_ITER {
        if inf_norm(&r) <= NEWTON_TOL {
            let report = NewtonReport {
                iterations: it,
                residual_history: history,
            };
            return Ok((AlgebraicState::from_vector(&y), report));
        }
        let jac = algebraic_jacobian(sys, x, &AlgebraicState::from_vector(&y))?;
        if numerically_singular(&jac) {
            break;
        }
        let Some(dy) = jac.clone().lu().solve(&r) else {
            break;
        };
        let mut trial = &y - &dy;
        check_floor(&trial)?;
        let mut rt = eval(&trial)?;
        if inf_norm(&rt) > inf_norm(&r) {
            let half = &y - &dy * 0.5;
            check_floor(&half)?;
            let rh = eval(&half)?;
            if inf_norm(&rh) < inf_norm(&rt) {
                trial = half;
                rt = rh;
            }
        }
        y = trial;
        r = rt;
        history.push(inf_norm(&r));
    }
    if inf_norm(&r) <= NEWTON_TOL {
        let report = NewtonReport {
            iterations: NEWTON_MAX_ITER,
            residual_history: history,
        };
        return Ok((AlgebraicState::from_vector(&y), report));
    }
    let last = AlgebraicState::from_vector(&y);
    let sigma_min_jalg = algebraic_jacobian(sys, x, &last)
        .map(|j| linalg::sigma_extremes_r(&j).0)
        .unwrap_or(f64::NAN);
    Err(Error::NewtonFailure {
        iterations: NEWTON_MAX_ITER,
        residual: inf_norm(&r),
        sigma_min_jalg,
        last_theta: last.theta,
        last_v: last.v,
    })
}

/// Cheap pivot screen, confirmed by singular values: the iteration matrix is
/// singular relative to its scale.
fn numerically_singular(jac: &RMatrix) -> bool {
    let lu = jac.clone().lu();
    let u = lu.u();
    let d = u.diagonal().map(f64::abs);
    let (lo, hi) = (d.min(), d.max());
    if !(hi > 0.0) || !lo.is_finite() {
        return true;
    }
    if lo > 1e-3 * hi {
        return false;
    }
    let (smin, smax) = linalg::sigma_extremes_r(jac);
    smin <= crate::impasse::SINGULAR_TOL * smax
}

/// Backtracking Newton for large jumps of the algebraic variables (event
/// instants): each step is halved until every voltage stays above the floor
/// and the residual decreases.
pub fn solve_algebraic_damped(sys: &PowerSystem, x: &[f64], y_guess: &AlgebraicState) -> Result<AlgebraicState> {
    let n = sys.n();
    let eval = |y: &RVector| residuals(sys, x, &AlgebraicState::from_vector(y));
    let mut y = y_guess.to_vector();
    let mut r = eval(&y)?;
    for _ in 0..4 * NEWTON_MAX_ITER {
        if inf_norm(&r) <= NEWTON_TOL {
            return Ok(AlgebraicState::from_vector(&y));
        }
        let jac = algebraic_jacobian(sys, x, &AlgebraicState::from_vector(&y))?;
        let Some(dy) = jac.lu().solve(&r) else {
            break;
        };
        let mut scale = 1.0;
        let mut moved = false;
        while scale > 1e-4 {
            let trial = &y - &dy * scale;
            if (0..n).all(|i| trial[n + i] > V_FLOOR) {
                if let Ok(rt) = eval(&trial) {
                    if inf_norm(&rt) < inf_norm(&r) {
                        y = trial;
                        r = rt;
                        moved = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    // Hand over to the plain solver for its diagnostics.
    solve_algebraic(sys, x, &AlgebraicState::from_vector(&y))
}

/// Solve a conventional power flow with the generator setpoints, then
/// back-initialize every device so that all derivatives and residuals vanish.
pub fn initialize_equilibrium(case: &NetworkCase) -> Result<(PowerSystem, SystemState)> {
    let mut sys = PowerSystem::new(case.clone())?;
    let (y, slips) = power_flow(&sys)?;
    let n = sys.n();
    let mut x = vec![0.0; sys.layout.len];

    let ybus = &sys.adm.y_bus;
    let phasors: Vec<C64> = (0..n).map(|i| C64::from_polar(y.v[i], y.theta[i])).collect();
    for (k, g) in sys.case.generators.iter().enumerate() {
        let i = g.bus - 1;
        let current: C64 = (0..n).map(|j| ybus[(i, j)] * phasors[j]).sum();
        let mut s = phasors[i] * current.conj();
        if let Some(l) = sys.static_index(i) {
            let (p, q) = sys.case.static_loads[l].power(y.v[i])?;
            s += C64::new(p, q);
        }
        if let Some(m) = sys.motor_index(i) {
            let (p, q) = sys.case.motors[m].power(slips[m], y.v[i])?;
            s += C64::new(p, q);
        }
        let (state, inputs) = g.initialize(y.theta[i], y.v[i], s)?;
        let r = sys.layout.generators[k].clone();
        x[r].copy_from_slice(&state.to_array());
        sys.inputs[k] = inputs;
    }
    for (k, m) in sys.case.motors.iter().enumerate() {
        let i = m.bus - 1;
        let sigma = if m.in_service { slips[k] } else { 1.0 };
        let state = m.steady_state(sigma, y.theta[i], y.v[i])?;
        let r = sys.layout.motors[k].clone();
        x[r].copy_from_slice(&state.to_array());
    }

    // Polish on the augmented network so the residual meets solver tolerance.
    let y = solve_algebraic(&sys, &x, &y)?;
    let state = SystemState { t: 0.0, x, y };
    let f = derivatives(&sys, &state.x, &state.y)?;
    let g = residuals(&sys, &state.x, &state.y)?;
    if inf_norm(&f) > 1e-8 || inf_norm(&g) > 1e-8 {
        return Err(Error::Initialization(format!(
            "equilibrium check failed: |f| = {:.3e}, |g| = {:.3e}",
            inf_norm(&f),
            inf_norm(&g)
        )));
    }
    Ok((sys, state))
}

/// Power flow over `Y_bus`: slack angle fixed, terminal voltages at their
/// setpoints, motor slips on the torque-balance branch. Returns the bus
/// solution and one slip per motor (unused entries for shed motors).
pub fn power_flow(sys: &PowerSystem) -> Result<(AlgebraicState, Vec<f64>)> {
    let case = &sys.case;
    let n = case.n();
    let slack_row = case
        .generators
        .iter()
        .find(|g| g.dispatch.slack)
        .map(|g| g.bus - 1)
        .ok_or_else(|| Error::Initialization("no slack generator".into()))?;
    let mut v_set = vec![None; n];
    let mut p_set = vec![0.0; n];
    for g in &case.generators {
        v_set[g.bus - 1] = Some(g.dispatch.v);
        p_set[g.bus - 1] = g.dispatch.p;
    }
    let theta_rows: Vec<usize> = (0..n).filter(|&i| i != slack_row).collect();
    let v_rows: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind == BusKind::LoadOnly).collect();
    let motors: Vec<usize> = (0..case.motors.len()).filter(|&k| case.motors[k].in_service).collect();

    let unpack = |z: &RVector| -> (AlgebraicState, Vec<f64>) {
        let mut y = AlgebraicState::flat(n);
        for i in 0..n {
            if let Some(v) = v_set[i] {
                y.v[i] = v;
            }
        }
        for (k, &i) in theta_rows.iter().enumerate() {
            y.theta[i] = z[k];
        }
        let off = theta_rows.len();
        for (k, &i) in v_rows.iter().enumerate() {
            y.v[i] = z[off + k];
        }
        let off = off + v_rows.len();
        let mut slips = vec![1.0; case.motors.len()];
        for (k, &m) in motors.iter().enumerate() {
            slips[m] = z[off + k];
        }
        (y, slips)
    };

    let ybus = &sys.adm.y_bus;
    let mismatch = |z: &RVector| -> Result<RVector> {
        let (y, slips) = unpack(z);
        let ph: Vec<C64> = (0..n).map(|i| C64::from_polar(y.v[i], y.theta[i])).collect();
        let mut s_bal: Vec<C64> = (0..n)
            .map(|i| ph[i] * (0..n).map(|j| ybus[(i, j)] * ph[j]).sum::<C64>().conj())
            .collect();
        for l in &case.static_loads {
            let (p, q) = l.power(y.v[l.bus - 1])?;
            s_bal[l.bus - 1] += C64::new(p, q);
        }
        for &m in &motors {
            let mp = &case.motors[m];
            let (p, q) = mp.power(slips[m], y.v[mp.bus - 1])?;
            s_bal[mp.bus - 1] += C64::new(p, q);
        }
        let mut out = Vec::with_capacity(z.len());
        out.extend(theta_rows.iter().map(|&i| s_bal[i].re - p_set[i]));
        out.extend(v_rows.iter().map(|&i| s_bal[i].im));
        for &m in &motors {
            let mp = &case.motors[m];
            let v = y.v[mp.bus - 1];
            out.push(mp.steady_torque(slips[m], v)? - mp.load_torque(slips[m]));
        }
        Ok(RVector::from_vec(out))
    };

    let mut z0 = Vec::new();
    z0.extend(theta_rows.iter().map(|_| 0.0));
    z0.extend(v_rows.iter().map(|_| 1.0));
    for &m in &motors {
        z0.push(case.motors[m].equilibrium_slip(1.0)?);
    }
    let z = crate::numerics::newton_fd(&mismatch, RVector::from_vec(z0), 1e-12, 50)
        .map_err(|e| Error::Initialization(format!("power flow: {e}")))?;
    let (y, slips) = unpack(&z);
    for &m in &motors {
        let mp = &case.motors[m];
        let root = mp.equilibrium_slip(y.v[mp.bus - 1])?;
        if (root - slips[m]).abs() > 1e-8 * root.max(1e-3) {
            return Err(Error::Initialization(format!(
                "motor at bus {} settled on slip {} but the stable root is {}",
                mp.bus, slips[m], root
            )));
        }
    }
    Ok((y, slips))
}

/// Finite-difference Jacobian of the residuals with respect to `y`.
pub fn jacobian_fd(sys: &PowerSystem, x: &[f64], y: &AlgebraicState, rel: f64) -> Result<RMatrix> {
    let f = |yv: &RVector| residuals(sys, x, &AlgebraicState::from_vector(yv));
    fd_jacobian(&f, &y.to_vector(), rel)
}
