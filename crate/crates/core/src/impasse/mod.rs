//! Admittance-matrix view of the algebraic Jacobian's singularity.
//!
//! Loads are frozen into equivalent shunts at the current state. With
//! `Y₁ = Y_bus + Y_gen + Y_mot + ½αG_stat + j½βB_stat` and
//! `Y₂ = (I − ½α)G_stat + j(I − ½β)B_stat`, the Jacobian is singular exactly
//! when
//!
//! ```text
//! Y′ = [ conj(Y₁)   conj(Y₂T) ]      T = diag(e^{j2θ_i})
//!      [ Y₂T        Y₁        ]
//! ```
//!
//! is singular. A necessary condition for that is `σ_min(Y₁) ≤ max_i |Y₂,ii|`,
//! and the ratio of the two sides is the index `I_vs`.

mod lemma1;
mod sensitivity;
mod theorem2;

pub use lemma1::{lemma1_oracle, Lemma1Report, DET_EXPONENT};
pub use sensitivity::{shunt_sensitivity, ShuntSensitivity, APPROX_RATIO, DEGENERACY_GAP};
pub use theorem2::{is_wcdd, theorem2_check, Theorem2Conditions, Theorem2Verdict};

use crate::algebraic::{algebraic_jacobian, AlgebraicState, PowerSystem};
use crate::error::Result;
use crate::linalg::{self, diag_c, CMatrix, RMatrix, C64};
use crate::netmodel::AdmittanceSet;

/// Relative threshold on `σ_min(J_alg) / σ_max(J_alg)` for a surface hit.
pub const SINGULAR_TOL: f64 = 1e-6;

/// Per-bus equivalent load admittances at one `(x, y)`; entries are zero at
/// buses without the corresponding device.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentLoadSnapshot {
    pub y_mot: Vec<C64>,
    pub g_stat: Vec<f64>,
    pub b_stat: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn equivalent_snapshot(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<EquivalentLoadSnapshot> {
    let n = sys.n();
    let mut snap = EquivalentLoadSnapshot {
        y_mot: vec![C64::new(0.0, 0.0); n],
        g_stat: vec![0.0; n],
        b_stat: vec![0.0; n],
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
    };
    for i in 0..n {
        crate::devices::check_voltage(i + 1, y.v[i])?;
        snap.y_mot[i] = sys.motor_admittance(x, i)?;
        if let Some(k) = sys.static_index(i) {
            let load = &sys.case.static_loads[k];
            let (g, b) = load.equivalent(y.v[i])?;
            snap.g_stat[i] = g;
            snap.b_stat[i] = b;
            snap.alpha[i] = load.alpha;
            snap.beta[i] = load.beta;
        }
    }
    Ok(snap)
}

impl EquivalentLoadSnapshot {
    pub fn n(&self) -> usize {
        self.y_mot.len()
    }

    /// Diagonal of `Y₂`.
    pub fn y2_diag(&self) -> Vec<C64> {
        (0..self.n())
            .map(|i| {
                C64::new(
                    (1.0 - 0.5 * self.alpha[i]) * self.g_stat[i],
                    (1.0 - 0.5 * self.beta[i]) * self.b_stat[i],
                )
            })
            .collect()
    }
}

pub fn build_y1(adm: &AdmittanceSet, snap: &EquivalentLoadSnapshot) -> CMatrix {
    let mut y1 = &adm.y_bus + &adm.y_gen;
    for i in 0..snap.n() {
        y1[(i, i)] += snap.y_mot[i]
            + C64::new(0.5 * snap.alpha[i] * snap.g_stat[i], 0.5 * snap.beta[i] * snap.b_stat[i]);
    }
    y1
}

pub fn build_y2(snap: &EquivalentLoadSnapshot) -> CMatrix {
    diag_c(&snap.y2_diag())
}

/// `T = diag(e^{j2θ_i})`.
pub fn rotation(theta: &[f64]) -> CMatrix {
    let t: Vec<C64> = theta.iter().map(|&th| C64::from_polar(1.0, 2.0 * th)).collect();
    diag_c(&t)
}

pub fn build_yprime(y1: &CMatrix, y2: &CMatrix, theta: &[f64]) -> CMatrix {
    let n = y1.nrows();
    let y2t = y2 * rotation(theta);
    let mut yp = CMatrix::zeros(2 * n, 2 * n);
    yp.view_mut((0, 0), (n, n)).copy_from(&y1.map(|z| z.conj()));
    yp.view_mut((0, n), (n, n)).copy_from(&y2t.map(|z| z.conj()));
    yp.view_mut((n, 0), (n, n)).copy_from(&y2t);
    yp.view_mut((n, n), (n, n)).copy_from(y1);
    yp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Check {
    pub sigma_min_y1: f64,
    pub y2_max: f64,
    pub i_vs: f64,
    /// The necessary condition for a surface hit holds.
    pub satisfied: bool,
}

/// `I_vs` is `+∞` when every load term `|Y₂_ii|` vanishes.
pub fn theorem1_check(y1: &CMatrix, snap: &EquivalentLoadSnapshot) -> Theorem1Check {
    let sigma_min_y1 = linalg::sigma_min_c(y1);
    let y2_max = snap.y2_diag().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (i_vs, satisfied) = if y2_max > 0.0 {
        (sigma_min_y1 / y2_max, sigma_min_y1 <= y2_max)
    } else {
        (f64::INFINITY, false)
    };
    Theorem1Check {
        sigma_min_y1,
        y2_max,
        i_vs,
        satisfied,
    }
}

/// Smallest eigenvalue modulus.
pub fn min_modulus_eig(j_alg: &RMatrix) -> f64 {
    match linalg::eigenvalues_r(j_alg) {
        Some(ev) => ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
        None => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpasseReport {
    pub t: f64,
    pub sigma_min_y1: f64,
    pub y2_max: f64,
    pub i_vs: f64,
    pub sigma_min_jalg: f64,
    pub sigma_max_jalg: f64,
    pub min_mod_eig_jalg: f64,
    pub hit: bool,
}

impl ImpasseReport {
    pub fn satisfied(&self) -> bool {
        self.y2_max > 0.0 && self.sigma_min_y1 <= self.y2_max
    }
}

/// Every singularity measure at one state. `hit` uses [`SINGULAR_TOL`].
pub fn impasse_report(sys: &PowerSystem, t: f64, x: &[f64], y: &AlgebraicState) -> Result<ImpasseReport> {
    let snap = equivalent_snapshot(sys, x, y)?;
    let y1 = build_y1(&sys.adm, &snap);
    let th1 = theorem1_check(&y1, &snap);
    let jac = algebraic_jacobian(sys, x, y)?;
    let (sigma_min_jalg, sigma_max_jalg) = linalg::sigma_extremes_r(&jac);
    Ok(ImpasseReport {
        t,
        sigma_min_y1: th1.sigma_min_y1,
        y2_max: th1.y2_max,
        i_vs: th1.i_vs,
        sigma_min_jalg,
        sigma_max_jalg,
        min_mod_eig_jalg: min_modulus_eig(&jac),
        hit: sigma_min_jalg <= SINGULAR_TOL * sigma_max_jalg,
    })
}

/// `Y′` at a state, assembled from scratch.
pub fn yprime_at(sys: &PowerSystem, x: &[f64], y: &AlgebraicState) -> Result<CMatrix> {
    let snap = equivalent_snapshot(sys, x, y)?;
    let y1 = build_y1(&sys.adm, &snap);
    Ok(build_yprime(&y1, &build_y2(&snap), &y.theta))
}
