//! One implicit-trapezoidal step of the coupled DAE.
//!
//! Unknowns are `(x⁺, y⁺)`; equations
//! `x⁺ − x − (h/2)(f(x, y) + f(x⁺, y⁺)) = 0` and `g(x⁺, y⁺) = 0`, solved
//! together by Newton. The `x`-columns and `∂f/∂y` come from forward
//! differences, `∂g/∂y` is the analytic Jacobian. The iteration matrix is
//! reused until convergence slows.

use crate::algebraic::{algebraic_jacobian, derivatives, residuals, AlgebraicState, PowerSystem, SystemState};
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix, RVector};
use crate::numerics::inf_norm;

/// Convergence threshold on the stacked step residual (max-norm).
pub const STEP_TOL: f64 = 1e-10;
const MAX_ITER: usize = 25;
const FD_REL: f64 = 1e-7;

pub(crate) fn split(sys: &PowerSystem, z: &RVector) -> (Vec<f64>, AlgebraicState) {
    let nx = sys.layout.len;
    let x = z.rows(0, nx).iter().copied().collect();
    let y = AlgebraicState::from_vector(&z.rows(nx, z.len() - nx).into_owned());
    (x, y)
}

pub(crate) fn join(x: &[f64], y: &AlgebraicState) -> RVector {
    RVector::from_iterator(x.len() + 2 * y.n(), x.iter().copied().chain(y.to_vector().iter().copied()))
}

/// Stacked `[f; g]` at `z = (x, y)`.
fn fg(sys: &PowerSystem, z: &RVector) -> Result<(RVector, RVector)> {
    let (x, y) = split(sys, z);
    Ok((derivatives(sys, &x, &y)?, residuals(sys, &x, &y)?))
}

/// Residual of the trapezoidal step with length `h` from `(x0, f0)`.
pub(crate) fn step_residual(sys: &PowerSystem, x0: &[f64], f0: &RVector, h: f64, z: &RVector) -> Result<RVector> {
    let nx = sys.layout.len;
    let (f1, g1) = fg(sys, z)?;
    let mut r = RVector::zeros(z.len());
    for k in 0..nx {
        r[k] = z[k] - x0[k] - 0.5 * h * (f0[k] + f1[k]);
    }
    r.rows_mut(nx, g1.len()).copy_from(&g1);
    Ok(r)
}

fn iteration_matrix(sys: &PowerSystem, h: f64, z: &RVector) -> Result<RMatrix> {
    let nx = sys.layout.len;
    let m = z.len();
    let (f1, g1) = fg(sys, z)?;
    let mut jac = RMatrix::zeros(m, m);
    let mut zp = z.clone();
    for c in 0..m {
        let dz = FD_REL * z[c].abs().max(1.0);
        zp[c] = z[c] + dz;
        let (fp, gp) = fg(sys, &zp)?;
        zp[c] = z[c];
        for k in 0..nx {
            jac[(k, c)] = -0.5 * h * (fp[k] - f1[k]) / dz;
        }
        if c < nx {
            for k in 0..g1.len() {
                jac[(nx + k, c)] = (gp[k] - g1[k]) / dz;
            }
        }
    }
    for k in 0..nx {
        jac[(k, k)] += 1.0;
    }
    let (x, y) = split(sys, z);
    let gy = algebraic_jacobian(sys, &x, &y)?;
    jac.view_mut((nx, nx), (gy.nrows(), gy.ncols())).copy_from(&gy);
    Ok(jac)
}

/// Advance `state` by `h`.
pub fn step(sys: &PowerSystem, state: &SystemState, h: f64) -> Result<SystemState> {
    let f0 = derivatives(sys, &state.x, &state.y)?;
    let mut z = join(&state.x, &state.y);
    let mut r = step_residual(sys, &state.x, &f0, h, &z)?;
    let mut lu = iteration_matrix(sys, h, &z)?.lu();
    let mut fresh = true;
    let mut prev = inf_norm(&r);
    for _ in 0..MAX_ITER {
        if prev <= STEP_TOL {
            let (x, y) = split(sys, &z);
            return Ok(SystemState { t: state.t + h, x, y });
        }
        let Some(dz) = lu.solve(&r) else {
            break;
        };
        let mut accepted = None;
        let mut last_err = None;
        for scale in [1.0, 0.5, 0.25, 0.125] {
            let trial = &z - &dz * scale;
            match step_residual(sys, &state.x, &f0, h, &trial) {
                Ok(rt) if inf_norm(&rt) < prev => {
                    accepted = Some((trial, rt));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        match accepted {
            Some((trial, rt)) => {
                z = trial;
                r = rt;
                let now = inf_norm(&r);
                // Refresh the matrix when the contraction is poor.
                if now > 0.1 * prev && now > STEP_TOL {
                    lu = iteration_matrix(sys, h, &z)?.lu();
                    fresh = true;
                } else {
                    fresh = false;
                }
                prev = now;
            }
            None if !fresh => {
                lu = iteration_matrix(sys, h, &z)?.lu();
                fresh = true;
            }
            None => {
                if let Some(e @ Error::NonPositiveVoltage { .. }) = last_err {
                    return Err(e);
                }
                break;
            }
        }
    }
    let (x, y) = split(sys, &z);
    let sigma_min_jalg = algebraic_jacobian(sys, &x, &y)
        .map(|j| linalg::sigma_extremes_r(&j).0)
        .unwrap_or(f64::NAN);
    Err(Error::NewtonFailure {
        iterations: MAX_ITER,
        residual: prev,
        sigma_min_jalg,
        last_theta: y.theta,
        last_v: y.v,
    })
}
