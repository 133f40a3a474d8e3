//! Executable form of the `J_alg ⇔ Y′` equivalence.
//!
//! Every intermediate matrix of the argument is built explicitly from its own
//! formula, and consecutive stages are compared:
//!
//! 1. `J′ = J_alg · diag(I, V̂)` against the closed-form entries written with
//!    `|Ỹ_ij|` and the loss angle `φ_ij`;
//! 2. `J″` (2×2 blocks per bus) against the row/column interleaving
//!    `E_r J′ E_r⁻¹`;
//! 3. `J″` against `(I⊗U) K (I⊗U)⁻¹` with `K` built from `Y₁`, `Y₂`, `V`, `θ`;
//! 4. `E_r⁻¹ K E_r` against `j · diag(−I, I) · diag(V̂ᶜ, conj V̂ᶜ) · Y′ ·
//!    diag(conj V̂ᶜ, V̂ᶜ)`.
//!
//! The factor `j` in stage 4 is required: each block `U⁻¹J″U` carries it.
//! Taking determinants through the chain gives
//! `|det J_alg| = |det Y′| ∏ V_i³`.
//!
//! The diagonal closed forms hold only where the power-flow residual vanishes,
//! so the oracle is meaningful on the algebraic manifold; the report carries
//! the residual norm for that reason.

use crate::algebraic::{algebraic_jacobian, residuals, AlgebraicState, PowerSystem};
use crate::error::Result;
use crate::linalg::{self, max_abs_c, max_abs_r, CMatrix, RMatrix, C64, J};
use crate::netmodel::phase_shift;
use crate::numerics::inf_norm;

use super::{build_y1, build_y2, build_yprime, equivalent_snapshot};

/// Power of `∏ V_i` relating the two determinants.
pub const DET_EXPONENT: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub sigma_min_jalg: f64,
    pub sigma_min_yprime: f64,
    /// `|det J_alg| / (|det Y′| ∏ V_i³)`.
    pub det_ratio: f64,
    /// Max-abs residuals of stages 1–4.
    pub chain_residuals: [f64; 4],
    /// `‖g(x, y)‖_∞` at the evaluated point.
    pub manifold_residual: f64,
}

impl Lemma1Report {
    pub fn max_chain_residual(&self) -> f64 {
        self.chain_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Permutation taking the order `1..n, 1′..n′` to `1, 1′, 2, 2′, …`.
fn interleave(n: usize) -> RMatrix {
    let mut e = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        e[(2 * i, i)] = 1.0;
        e[(2 * i + 1, n + i)] = 1.0;
    }
    e
}

fn u_block() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, -s), C64::new(0.0, s)])
}

fn block_diag_repeat(b: &CMatrix, n: usize) -> CMatrix {
    let k = b.nrows();
    let mut m = CMatrix::zeros(k * n, k * n);
    for i in 0..n {
        m.view_mut((k * i, k * i), (k, k)).copy_from(b);
    }
    m
}

/// Closed-form `J′` blocks `[[E, F], [M, N]]`.
fn jprime_closed_form(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<RMatrix> {
    let n = sys.n();
    let ya = &sys.adm.y_aug;
    let snap = equivalent_snapshot(sys, x, y)?;
    let mut jp = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let vi2 = y.v[i] * y.v[i];
        let (gm, bm) = (snap.y_mot[i].re, snap.y_mot[i].im);
        let (gs, bs) = (snap.g_stat[i], snap.b_stat[i]);
        let (a, b) = (snap.alpha[i], snap.beta[i]);
        let yii = ya[(i, i)];
        jp[(i, i)] = -vi2 * (yii.im + bm + bs);
        jp[(i, n + i)] = vi2 * (yii.re + gm + (a - 1.0) * gs);
        jp[(n + i, i)] = -vi2 * (yii.re + gm + gs);
        jp[(n + i, n + i)] = -vi2 * (yii.im + bm + (b - 1.0) * bs);
        for j in (0..n).filter(|&j| j != i) {
            let mag = ya[(i, j)].norm();
            let arg = y.theta[i] - y.theta[j] - phase_shift(ya, i, j);
            let w = y.v[i] * y.v[j] * mag;
            jp[(i, j)] = -w * arg.cos();
            jp[(i, n + j)] = w * arg.sin();
            jp[(n + i, j)] = -w * arg.sin();
            jp[(n + i, n + j)] = -w * arg.cos();
        }
    }
    Ok(jp)
}

/// `K` assembled block by block from `Y₁`, `Y₂`, `V` and `θ`.
fn k_matrix(y1: &CMatrix, y2: &CMatrix, y: &AlgebraicState) -> CMatrix {
    let n = y1.nrows();
    let mut k = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let vi2 = y.v[i] * y.v[i];
        k[(2 * i, 2 * i)] = -J * y1[(i, i)].conj() * vi2;
        k[(2 * i, 2 * i + 1)] = -J * y2[(i, i)].conj() * vi2;
        k[(2 * i + 1, 2 * i)] = J * y2[(i, i)] * vi2;
        k[(2 * i + 1, 2 * i + 1)] = J * y1[(i, i)] * vi2;
        for j in (0..n).filter(|&j| j != i) {
            let w = y.v[i] * y.v[j];
            let rot = C64::from_polar(1.0, y.theta[i] - y.theta[j]);
            k[(2 * i, 2 * j)] = -J * y1[(i, j)].conj() * w * rot;
            k[(2 * i + 1, 2 * j + 1)] = J * y1[(i, j)] * w * rot.conj();
        }
    }
    k
}

pub fn lemma1_oracle(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<Lemma1Report> {
    let n = sys.n();
    let j_alg = algebraic_jacobian(sys, x, y)?;
    let manifold_residual = inf_norm(&residuals(sys, x, y)?);

    let mut scale = RMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        scale[(n + i, n + i)] = y.v[i];
    }
    let jp = &j_alg * &scale;
    let r1 = max_abs_r(&(&jp - jprime_closed_form(sys, x, y)?));

    let e_r = interleave(n);
    let mut jpp = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            jpp[(2 * i, 2 * j)] = jp[(i, j)];
            jpp[(2 * i, 2 * j + 1)] = jp[(i, n + j)];
            jpp[(2 * i + 1, 2 * j)] = jp[(n + i, j)];
            jpp[(2 * i + 1, 2 * j + 1)] = jp[(n + i, n + j)];
        }
    }
    let r2 = max_abs_r(&(&jpp - &e_r * &jp * e_r.transpose()));

    let snap = equivalent_snapshot(sys, x, y)?;
    let y1 = build_y1(&sys.adm, &snap);
    let y2 = build_y2(&snap);
    let k = k_matrix(&y1, &y2, y);
    let iu = block_diag_repeat(&u_block(), n);
    let iu_inv = iu.adjoint();
    let r3 = max_abs_c(&(linalg::to_complex(&jpp) - &iu * &k * iu_inv));

    let yp = build_yprime(&y1, &y2, &y.theta);
    let vc: Vec<C64> = (0..n).map(|i| C64::from_polar(y.v[i], y.theta[i])).collect();
    let mut left = CMatrix::zeros(2 * n, 2 * n);
    let mut right = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        left[(i, i)] = -J * vc[i];
        left[(n + i, n + i)] = J * vc[i].conj();
        right[(i, i)] = vc[i].conj();
        right[(n + i, n + i)] = vc[i];
    }
    let e_rc = linalg::to_complex(&e_r);
    let r4 = max_abs_c(&(e_rc.transpose() * &k * &e_rc - left * &yp * right));

    let prod_v: f64 = y.v.iter().map(|v| v.powi(DET_EXPONENT)).product();
    let det_ratio = linalg::det_r(&j_alg).abs() / (linalg::det_c(&yp).norm() * prod_v);

    Ok(Lemma1Report {
        sigma_min_jalg: linalg::sigma_extremes_r(&j_alg).0,
        sigma_min_yprime: linalg::sigma_min_c(&yp),
        det_ratio,
        chain_residuals: [r1, r2, r3, r4],
        manifold_residual,
    })
}
