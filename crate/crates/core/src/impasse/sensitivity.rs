//! First-order effect of a shunt `j b0` at one bus on `σ_min(Y₁)`.
//!
//! When the real part of `Y₁` is small, `σ_min(Y₁) ≈ λ_min(B₁)` with
//! `B₁ = −Im(Y₁)`, a positive definite Laplacian-like matrix. Adding `j b0`
//! at bus `i` lowers `B₁[i,i]` by `b0`, so `dλ_min/db0 = −u_i²` with `u` the
//! unit eigenvector of `λ_min`. Capacitors (`b0 > 0`) can only shrink it.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix, C64};

/// Advisory bound on `‖Re Y₁‖_F / ‖Im Y₁‖_F` for the approximation.
pub const APPROX_RATIO: f64 = 0.2;
/// Minimum gap `λ₂ − λ_min` below which the eigenvector is not unique.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntSensitivity {
    /// `−u_i²`, always ≤ 0.
    pub value: f64,
    pub lambda_min: f64,
    /// `‖Re Y₁‖_F / ‖Im Y₁‖_F`.
    pub real_ratio: f64,
    /// `real_ratio ≤ APPROX_RATIO`.
    pub approx_ok: bool,
    /// Smallest eigenvalue of `B₁` not simple; `value` is unreliable.
    pub degenerate: bool,
    /// Derivative of the true `σ_min(Y₁)` from its singular vectors,
    /// `Re(j ū_i v_i)`, for comparison.
    pub exact: f64,
}

/// `bus` is 1-based.
pub fn shunt_sensitivity(y1: &CMatrix, bus: usize) -> Result<ShuntSensitivity> {
    let n = y1.nrows();
    if bus == 0 || bus > n {
        return Err(Error::BusOutOfRange { bus, n });
    }
    let i = bus - 1;
    let b1: RMatrix = y1.map(|z| -z.im);
    let b1 = (&b1 + b1.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda_min = eig.eigenvalues[order[0]];
    if !(lambda_min > 0.0) {
        return Err(Error::NotApplicable(format!(
            "B1 = -Im(Y1) is not positive definite (smallest eigenvalue {lambda_min:.3e})"
        )));
    }
    let degenerate = n > 1 && eig.eigenvalues[order[1]] - lambda_min < DEGENERACY_GAP;
    let u = eig.eigenvectors.column(order[0]);
    let value = -u[i] * u[i];

    let re_norm = y1.map(|z| z.re).norm();
    let im_norm = y1.map(|z| z.im).norm();
    let real_ratio = re_norm / im_norm;
    let approx_ok = real_ratio <= APPROX_RATIO;
    if !approx_ok {
        log::warn!("Re(Y1) is not small next to Im(Y1): ratio {real_ratio:.3}");
    }

    let svd = y1.clone().svd(true, true);
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let left = svd.u.as_ref().expect("requested u").column(k).into_owned();
    let right = svd.v_t.as_ref().expect("requested v_t").row(k).adjoint();
    let exact = (C64::new(0.0, 1.0) * left[i].conj() * right[i]).re;

    Ok(ShuntSensitivity {
        value,
        lambda_min,
        real_ratio,
        approx_ok,
        degenerate,
        exact,
    })
}
