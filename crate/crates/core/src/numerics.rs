//! Finite-difference Jacobians and a dense Newton loop used by the
//! initializer, the fold locators and the integrator's coupled blocks.

use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector};

/// Central-difference Jacobian of `f` at `x` with relative step `rel`.
pub fn fd_jacobian<F>(f: &F, x: &RVector, rel: f64) -> Result<RMatrix>
where
    F: Fn(&RVector) -> Result<RVector>,
{
    let m = f(x)?.len();
    let mut jac = RMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let h = rel * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k] - h;
        let fm = f(&xp)?;
        xp[k] = x[k];
        jac.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Forward-difference columns of `f` with respect to the listed entries.
pub fn fd_columns<F>(f: &F, x: &RVector, f0: &RVector, cols: std::ops::Range<usize>, rel: f64) -> Result<RMatrix>
where
    F: Fn(&RVector) -> Result<RVector>,
{
    let mut jac = RMatrix::zeros(f0.len(), cols.len());
    let mut xp = x.clone();
    for (c, k) in cols.enumerate() {
        let h = rel * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k];
        jac.set_column(c, &((fp - f0) / h));
    }
    Ok(jac)
}

pub fn inf_norm(v: &RVector) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton iteration with a finite-difference Jacobian.
pub fn newton_fd<F>(f: F, x0: RVector, tol: f64, max_iter: usize) -> Result<RVector>
where
    F: Fn(&RVector) -> Result<RVector>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    for _ in 0..max_iter {
        if inf_norm(&r) <= tol {
            return Ok(x);
        }
        let jac = fd_jacobian(&f, &x, 1e-7)?;
        let dx = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Numerical("singular Newton matrix".into()))?;
        let mut step = 1.0;
        let base = inf_norm(&r);
        loop {
            let trial = &x - &dx * step;
            match f(&trial) {
                Ok(rt) if inf_norm(&rt) < base || step < 1.0 / 64.0 => {
                    x = trial;
                    r = rt;
                    break;
                }
                _ if step < 1.0 / 64.0 => {
                    return Err(Error::Numerical("Newton line search failed".into()));
                }
                _ => step *= 0.5,
            }
        }
    }
    if inf_norm(&r) <= tol {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "Newton did not converge (residual {:.3e})",
            inf_norm(&r)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let f = |x: &RVector| -> Result<RVector> {
            Ok(RVector::from_vec(vec![x[0] * x[0] + x[1] - 3.0, x[0] - x[1] + 1.0]))
        };
        let x = newton_fd(f, RVector::from_vec(vec![0.5, 0.5]), 1e-12, 30).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }
}
