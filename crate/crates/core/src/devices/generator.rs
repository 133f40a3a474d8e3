use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::C64;

use super::check_voltage;

/// Power-flow setpoints used to place the machine at its initial operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispatch {
    /// Active power injection at the terminal, p.u.
    pub p: f64,
    /// Terminal voltage magnitude, p.u.
    pub v: f64,
    /// The slack machine fixes the angle reference and balances losses.
    pub slack: bool,
}

/// Sixth-order synchronous machine (Sauer–Pai form with `T_AA = 0`).
///
/// Reactances and time constants follow the usual naming: `x_d1` is the
/// transient and `x_d2` the subtransient d-axis reactance, `t_d01`/`t_d02`
/// the transient/subtransient open-circuit time constants, and so on.
/// `m` is the mechanical starting time `2H` in seconds and `d` the damping
/// coefficient in p.u. torque per p.u. speed deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub bus: usize,
    pub r_a: f64,
    pub x_d: f64,
    pub x_d1: f64,
    pub x_d2: f64,
    pub x_q: f64,
    pub x_q1: f64,
    pub x_q2: f64,
    pub t_d01: f64,
    pub t_d02: f64,
    pub t_q01: f64,
    pub t_q02: f64,
    pub m: f64,
    pub d: f64,
    /// Base angular frequency `2π f_base`, rad/s.
    pub omega_b: f64,
    pub dispatch: Dispatch,
}

/// Machine states: rotor angle, speed, transient and subtransient EMFs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorState {
    pub delta: f64,
    pub omega: f64,
    pub e_d1: f64,
    pub e_q1: f64,
    pub e_d2: f64,
    pub e_q2: f64,
}

/// Mechanical power and field voltage, frozen at their initialized values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineInputs {
    pub p_m: f64,
    pub v_f: f64,
}

/// What the network analysis needs from a machine model: an internal source
/// `E∠η` behind the stator admittance, plus the state derivatives.
pub trait SynchronousMachine {
    type State;

    fn stator_admittance(&self) -> C64;

    fn internal_voltage(&self, state: &Self::State) -> (f64, f64);

    fn derivatives(
        &self,
        state: &Self::State,
        inputs: &MachineInputs,
        theta: f64,
        v: f64,
    ) -> Result<Self::State>;
}

impl GeneratorState {
    pub const LEN: usize = 6;

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            delta: s[0],
            omega: s[1],
            e_d1: s[2],
            e_q1: s[3],
            e_d2: s[4],
            e_q2: s[5],
        }
    }

    pub fn write_to(&self, out: &mut [f64]) {
        out[..6].copy_from_slice(&self.to_array());
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.delta, self.omega, self.e_d1, self.e_q1, self.e_d2, self.e_q2]
    }
}

/// Rotation from the machine d-q frame (`d + jq`) to the network frame.
fn dq_to_network(delta: f64) -> C64 {
    C64::from_polar(1.0, delta - FRAC_PI_2)
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if (self.x_d2 - self.x_q2).abs() > 1e-12 * self.x_d2.abs().max(1.0) {
            return Err(Error::SubtransientMismatch {
                bus: self.bus,
                xd2: self.x_d2,
                xq2: self.x_q2,
            });
        }
        let positive = [
            ("x_d", self.x_d),
            ("x_d1", self.x_d1),
            ("x_d2", self.x_d2),
            ("x_q", self.x_q),
            ("x_q1", self.x_q1),
            ("x_q2", self.x_q2),
            ("t_d01", self.t_d01),
            ("t_d02", self.t_d02),
            ("t_q01", self.t_q01),
            ("t_q02", self.t_q02),
            ("m", self.m),
            ("omega_b", self.omega_b),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidCase(format!(
                    "generator at bus {}: {name} must be positive, got {value}",
                    self.bus
                )));
            }
        }
        if !(self.r_a >= 0.0) || !(self.d >= 0.0) {
            return Err(Error::InvalidCase(format!(
                "generator at bus {}: r_a and d must be non-negative",
                self.bus
            )));
        }
        Ok(())
    }

    fn gamma_d(&self) -> f64 {
        self.t_d02 * self.x_d2 * (self.x_d - self.x_d1) / (self.t_d01 * self.x_d1)
    }

    fn gamma_q(&self) -> f64 {
        self.t_q02 * self.x_q2 * (self.x_q - self.x_q1) / (self.t_q01 * self.x_q1)
    }

    /// Stator current `(i_d, i_q)` for terminal voltage `V∠θ`.
    pub fn stator_current_dq(&self, state: &GeneratorState, theta: f64, v: f64) -> (f64, f64) {
        let v_d = v * (state.delta - theta).sin();
        let v_q = v * (state.delta - theta).cos();
        let drop = C64::new(state.e_d2 - v_d, state.e_q2 - v_q);
        let i = drop / C64::new(self.r_a, self.x_d2);
        (i.re, i.im)
    }

    /// Stator current in the network frame, flowing out of the machine.
    pub fn stator_current(&self, state: &GeneratorState, theta: f64, v: f64) -> C64 {
        let (i_d, i_q) = self.stator_current_dq(state, theta, v);
        C64::new(i_d, i_q) * dq_to_network(state.delta)
    }

    /// Electrical air-gap power `e''_d i_d + e''_q i_q`.
    pub fn electrical_power(&self, state: &GeneratorState, theta: f64, v: f64) -> f64 {
        let (i_d, i_q) = self.stator_current_dq(state, theta, v);
        state.e_d2 * i_d + state.e_q2 * i_q
    }

    /// Equilibrium states and inputs that deliver the complex power `s`
    /// (out of the machine) at terminal voltage `V∠θ`.
    pub fn initialize(&self, theta: f64, v: f64, s: C64) -> Result<(GeneratorState, MachineInputs)> {
        check_voltage(self.bus, v)?;
        let vt = C64::from_polar(v, theta);
        let i = (s / vt).conj();
        let e_q_axis = vt + C64::new(self.r_a, self.x_q) * i;
        let delta = e_q_axis.arg();
        let to_dq = dq_to_network(delta).conj();
        let i_dq = i * to_dq;
        let v_dq = vt * to_dq;
        let (i_d, i_q) = (i_dq.re, i_dq.im);
        let e2 = v_dq + C64::new(self.r_a, self.x_d2) * i_dq;
        let (e_d2, e_q2) = (e2.re, e2.im);
        let gd = self.gamma_d();
        let gq = self.gamma_q();
        let e_d1 = (self.x_q - self.x_q1 - gq) * i_q;
        let e_q1 = e_q2 + (self.x_d1 - self.x_d2 + gd) * i_d;
        let v_f = e_q1 + (self.x_d - self.x_d1 - gd) * i_d;
        let state = GeneratorState {
            delta,
            omega: 1.0,
            e_d1,
            e_q1,
            e_d2,
            e_q2,
        };
        let p_m = e_d2 * i_d + e_q2 * i_q;
        Ok((state, MachineInputs { p_m, v_f }))
    }
}

impl SynchronousMachine for GeneratorParams {
    type State = GeneratorState;

    fn stator_admittance(&self) -> C64 {
        C64::new(self.r_a, self.x_d2).inv()
    }

    /// `E∠η = (e''_d + j e''_q) e^{j(δ − π/2)}`.
    fn internal_voltage(&self, state: &GeneratorState) -> (f64, f64) {
        let e = C64::new(state.e_d2, state.e_q2) * dq_to_network(state.delta);
        let mag = e.norm();
        let eta = state.delta - FRAC_PI_2 + state.e_q2.atan2(state.e_d2);
        (mag, eta)
    }

    fn derivatives(
        &self,
        s: &GeneratorState,
        inputs: &MachineInputs,
        theta: f64,
        v: f64,
    ) -> Result<GeneratorState> {
        check_voltage(self.bus, v)?;
        let (i_d, i_q) = self.stator_current_dq(s, theta, v);
        let p_e = s.e_d2 * i_d + s.e_q2 * i_q;
        let gd = self.gamma_d();
        let gq = self.gamma_q();
        Ok(GeneratorState {
            delta: self.omega_b * (s.omega - 1.0),
            omega: (inputs.p_m - p_e - self.d * (s.omega - 1.0)) / self.m,
            e_d1: (-s.e_d1 + (self.x_q - self.x_q1 - gq) * i_q) / self.t_q01,
            e_q1: (-s.e_q1 - (self.x_d - self.x_d1 - gd) * i_d + inputs.v_f) / self.t_d01,
            e_d2: (-s.e_d2 + s.e_d1 + (self.x_q1 - self.x_q2 + gq) * i_q) / self.t_q02,
            e_q2: (-s.e_q2 + s.e_q1 - (self.x_d1 - self.x_d2 + gd) * i_d) / self.t_d02,
        })
    }
}
