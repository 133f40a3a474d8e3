//! Narrowing a failed-step bracket down to the surface crossing.
//!
//! Time bisection first: half-steps are attempted from the last good state
//! until the bracket is `dt/64` wide. The crossing itself is then found with
//! the augmented system (Moore–Spence form)
//!
//! ```text
//! x⁺ − x − (h/2)(f(x, y) + f(x⁺, y⁺)) = 0
//! g(x⁺, y⁺)                          = 0
//! J_alg(x⁺, y⁺) v                    = 0
//! cᵀv − 1                            = 0
//! ```
//!
//! in the unknowns `(x⁺, y⁺, v, h)`. It is regular at a fold of the
//! algebraic equations, which is where trajectories meet the surface.

use crate::algebraic::{algebraic_jacobian, derivatives, PowerSystem, SystemState};
use crate::error::{Error, Result};
use crate::impasse::SINGULAR_TOL;
use crate::linalg::{self, RVector};
use crate::numerics::newton_fd;

use super::step::{join, split, step, step_residual};

/// Voltage below which a failed bracket is read as a collapse through zero
/// rather than a singularity.
const LOW_VOLTAGE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Bracket {
    /// Last state known to be off the surface.
    pub from: SystemState,
    /// Length of the failed (or sign-changing) step.
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct DetectOutcome {
    /// States accepted while bisecting, in time order.
    pub samples: Vec<SystemState>,
    /// State on the surface.
    pub hit: Option<SystemState>,
    /// Set when the bracket ends in a voltage collapse instead.
    pub voltage_bus: Option<usize>,
}

fn det_sign(sys: &PowerSystem, s: &SystemState) -> Result<bool> {
    Ok(linalg::det_r(&algebraic_jacobian(sys, &s.x, &s.y)?) >= 0.0)
}

fn sigma_pair(sys: &PowerSystem, s: &SystemState) -> Result<(f64, f64)> {
    Ok(linalg::sigma_extremes_r(&algebraic_jacobian(sys, &s.x, &s.y)?))
}

pub fn detect_impasse(sys: &PowerSystem, bracket: Bracket, dt: f64) -> Result<DetectOutcome> {
    let t_a = bracket.from.t;
    let t_b = t_a + bracket.width;
    let target = dt / 64.0;
    let mut cur = bracket.from;
    let sign0 = det_sign(sys, &cur)?;
    let mut width = bracket.width;
    let mut samples: Vec<SystemState> = Vec::new();
    while width > target {
        let h = 0.5 * width;
        match step(sys, &cur, h) {
            Ok(next) if det_sign(sys, &next)? == sign0 => {
                cur = next;
                samples.push(cur.clone());
                width -= h;
            }
            Ok(_) | Err(Error::NewtonFailure { .. }) | Err(Error::NonPositiveVoltage { .. }) => width = h,
            Err(e) => return Err(e),
        }
    }

    let (smin, smax) = sigma_pair(sys, &cur)?;
    if smin <= SINGULAR_TOL * smax {
        let hit = samples.pop().unwrap_or_else(|| cur.clone());
        return Ok(DetectOutcome { samples, hit: Some(hit), voltage_bus: None });
    }

    // First guess for the remaining time from σ_min² being linear in t.
    let mut h0 = 0.5 * width;
    if samples.len() >= 2 {
        let prev = &samples[samples.len() - 2];
        let (s1, _) = sigma_pair(sys, prev)?;
        if s1 > smin {
            let est = smin * smin * (cur.t - prev.t) / (s1 * s1 - smin * smin);
            h0 = est.clamp(1e-3 * width, 2.0 * width);
        }
    }
    match locate_crossing(sys, &cur, h0) {
        Ok(hit) if hit.t > cur.t && hit.t <= t_b + width => {
            return Ok(DetectOutcome { samples, hit: Some(hit), voltage_bus: None });
        }
        Ok(hit) => log::warn!("augmented solve landed at t = {} outside the bracket", hit.t),
        Err(e) => log::warn!("augmented solve failed: {e}"),
    }

    let (bus, vmin) = cur
        .y
        .v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i + 1, v))
        .unwrap_or((0, f64::NAN));
    if vmin < LOW_VOLTAGE {
        return Ok(DetectOutcome { samples, hit: None, voltage_bus: Some(bus) });
    }
    Err(Error::NoCrossing { t_a, t_b })
}

/// Augmented Newton solve started from `from` with step guess `h0`.
pub fn locate_crossing(sys: &PowerSystem, from: &SystemState, h0: f64) -> Result<SystemState> {
    let nx = sys.layout.len;
    let m = 2 * sys.n();
    let f0 = derivatives(sys, &from.x, &from.y)?;
    let jac0 = algebraic_jacobian(sys, &from.x, &from.y)?;
    let c = linalg::min_right_singular_vector(&jac0);

    let mut w0 = RVector::zeros(nx + 2 * m + 1);
    let guess_x: Vec<f64> = from.x.iter().zip(f0.iter()).map(|(x, f)| x + h0 * f).collect();
    w0.rows_mut(0, nx + m).copy_from(&join(&guess_x, &from.y));
    w0.rows_mut(nx + m, m).copy_from(&c);
    w0[nx + 2 * m] = h0;

    let system = |w: &RVector| -> Result<RVector> {
        let z = w.rows(0, nx + m).into_owned();
        let v = w.rows(nx + m, m).into_owned();
        let h = w[nx + 2 * m];
        let mut r = RVector::zeros(w.len());
        r.rows_mut(0, nx + m).copy_from(&step_residual(sys, &from.x, &f0, h, &z)?);
        let (x, y) = split(sys, &z);
        let jv = algebraic_jacobian(sys, &x, &y)? * &v;
        r.rows_mut(nx + m, m).copy_from(&jv);
        r[nx + 2 * m] = c.dot(&v) - 1.0;
        Ok(r)
    };
    let w = newton_fd(system, w0, 1e-10, 40)?;
    let (x, y) = split(sys, &w.rows(0, nx + m).into_owned());
    Ok(SystemState { t: from.t + w[nx + 2 * m], x, y })
}
