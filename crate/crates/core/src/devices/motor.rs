use crate::error::{Error, Result};
use crate::linalg::{C64, J};

use super::check_voltage;

/// Third-order induction motor with quadratic speed-dependent load torque
/// `T_load = a + b(1 − σ) + c(1 − σ)²`.
///
/// `h` is the combined rotor/load inertia constant in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorParams {
    pub bus: usize,
    pub r_s: f64,
    pub x_s: f64,
    pub r_r: f64,
    pub x_r: f64,
    pub x_m: f64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega_b: f64,
    /// A shed motor keeps its state slots but draws no power and stops evolving.
    pub in_service: bool,
}

/// Slip and the voltage behind the transient impedance, the latter as
/// real/imaginary parts in the synchronously rotating network frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    pub sigma: f64,
    pub e_d: f64,
    pub e_q: f64,
}

impl MotorState {
    pub const LEN: usize = 3;

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            sigma: s[0],
            e_d: s[1],
            e_q: s[2],
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.sigma, self.e_d, self.e_q]
    }

    pub fn emf(&self) -> C64 {
        C64::new(self.e_d, self.e_q)
    }
}

/// Equivalent admittance of the motor circuit at slip `sigma`:
/// `(r_S + jx_S + jx_M (r_R/σ + jx_R) / (r_R/σ + j(x_R + x_M)))⁻¹`.
pub fn motor_equiv_admittance(sigma: f64, p: &MotorParams) -> Result<C64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSlip(sigma));
    }
    let rotor = C64::new(p.r_r / sigma, p.x_r);
    let magnetizing = J * p.x_m;
    let parallel = if p.x_m == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        magnetizing * rotor / (rotor + magnetizing)
    };
    Ok((C64::new(p.r_s, p.x_s) + parallel).inv())
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_s >= 0.0
            && self.x_s > 0.0
            && self.x_r > 0.0
            && self.x_m > 0.0
            && self.r_r > 0.0
            && self.h > 0.0
            && self.omega_b > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCase(format!(
                "motor at bus {}: requires r_s >= 0 and positive x_s, x_r, x_m, r_r, h",
                self.bus
            )))
        }
    }

    /// Open-circuit reactance `x_S + x_M`.
    pub fn x0(&self) -> f64 {
        self.x_s + self.x_m
    }

    /// Transient reactance `x_S + x_R x_M / (x_R + x_M)`.
    pub fn x1(&self) -> f64 {
        self.x_s + self.x_r * self.x_m / (self.x_r + self.x_m)
    }

    /// Rotor open-circuit time constant in seconds.
    pub fn t0(&self) -> f64 {
        (self.x_r + self.x_m) / (self.omega_b * self.r_r)
    }

    pub fn equiv_admittance(&self, sigma: f64) -> Result<C64> {
        motor_equiv_admittance(sigma, self)
    }

    /// `(P, Q) = (G_eq V², −B_eq V²)`.
    pub fn power(&self, sigma: f64, v: f64) -> Result<(f64, f64)> {
        let y = self.equiv_admittance(sigma)?;
        let v2 = v * v;
        Ok((y.re * v2, -y.im * v2))
    }

    pub fn load_torque(&self, sigma: f64) -> f64 {
        let w = 1.0 - sigma;
        self.a + self.b * w + self.c * w * w
    }

    /// Steady-state electrical torque: air-gap power of the equivalent circuit.
    pub fn steady_torque(&self, sigma: f64, v: f64) -> Result<f64> {
        let y = self.equiv_admittance(sigma)?;
        Ok(v * v * (y.re - self.r_s * y.norm_sqr()))
    }

    /// Current drawn from the bus, `Y_eq(σ) V∠θ`.
    pub fn current(&self, sigma: f64, theta: f64, v: f64) -> Result<C64> {
        Ok(self.equiv_admittance(sigma)? * C64::from_polar(v, theta))
    }

    pub fn derivatives(&self, s: &MotorState, theta: f64, v: f64) -> Result<MotorState> {
        check_voltage(self.bus, v)?;
        let i = self.current(s.sigma, theta, v)?;
        let e = s.emf();
        let t_e = (e * i.conj()).re;
        let de = -J * self.omega_b * s.sigma * e - (e - J * (self.x0() - self.x1()) * i) / self.t0();
        Ok(MotorState {
            sigma: (self.load_torque(s.sigma) - t_e) / (2.0 * self.h),
            e_d: de.re,
            e_q: de.im,
        })
    }

    /// Smallest slip in `(0, 1)` where electrical and load torque balance.
    pub fn equilibrium_slip(&self, v: f64) -> Result<f64> {
        check_voltage(self.bus, v)?;
        let mismatch = |s: f64| -> f64 {
            self.steady_torque(s, v).map(|t| t - self.load_torque(s)).unwrap_or(f64::NAN)
        };
        let grid: Vec<f64> = (0..=400).map(|k| 1e-6 * (1e6f64).powf(k as f64 / 400.0)).collect();
        for w in grid.windows(2) {
            let (lo, hi) = (w[0], w[1].min(1.0));
            let (f_lo, f_hi) = (mismatch(lo), mismatch(hi));
            if f_lo == 0.0 {
                return Ok(lo);
            }
            if f_lo.signum() != f_hi.signum() {
                return Ok(bisect(mismatch, lo, hi));
            }
        }
        Err(Error::Initialization(format!(
            "motor at bus {}: no equilibrium slip in (0, 1) at V = {v}",
            self.bus
        )))
    }

    pub fn steady_state(&self, sigma: f64, theta: f64, v: f64) -> Result<MotorState> {
        let i = self.current(sigma, theta, v)?;
        let e = C64::from_polar(v, theta) - C64::new(self.r_s, self.x1()) * i;
        Ok(MotorState {
            sigma,
            e_d: e.re,
            e_q: e.im,
        })
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo <= 4.0 * f64::EPSILON * mid {
            return mid;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
