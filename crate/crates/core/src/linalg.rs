//! Dense matrix helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

pub fn singular_values_c(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn singular_values_r(m: &RMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn sigma_min_c(m: &CMatrix) -> f64 {
    singular_values_c(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_max_c(m: &CMatrix) -> f64 {
    singular_values_c(m).last().copied().unwrap_or(0.0)
}

/// Smallest and largest singular value of a real matrix.
pub fn sigma_extremes_r(m: &RMatrix) -> (f64, f64) {
    let s = singular_values_r(m);
    (s.first().copied().unwrap_or(0.0), s.last().copied().unwrap_or(0.0))
}

/// Right singular vector belonging to the smallest singular value.
pub fn min_right_singular_vector(m: &RMatrix) -> RVector {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    v_t.row(k).transpose()
}

/// Eigenvalues of a real square matrix, via the real Schur form.
pub fn eigenvalues_r(m: &RMatrix) -> Option<Vec<C64>> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)?;
    let ev = schur.complex_eigenvalues();
    Some(ev.iter().map(|z| C64::new(z.re, z.im)).collect())
}

pub fn det_c(m: &CMatrix) -> C64 {
    m.clone().lu().determinant()
}

pub fn det_r(m: &RMatrix) -> f64 {
    m.clone().lu().determinant()
}

/// Max-abs entry norm.
pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_r(m: &RMatrix) -> f64 {
    m.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

pub fn diag_c(d: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_column_slice(d))
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}
