use thiserror::Error;

/// Errors raised by model construction, device evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network is disconnected: {} components {:?}", .components.len(), .components)]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("generator at bus {bus}: x''_d = {xd2} differs from x''_q = {xq2}")]
    SubtransientMismatch { bus: usize, xd2: f64, xq2: f64 },

    #[error("bus {bus} index out of range (network has {n} buses)")]
    BusOutOfRange { bus: usize, n: usize },

    #[error("non-positive voltage magnitude {v} at bus {bus}")]
    NonPositiveVoltage { bus: usize, v: f64 },

    #[error("slip must be positive, got {0}")]
    NonPositiveSlip(f64),

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:.3e}, sigma_min(J_alg) {sigma_min_jalg:.3e})")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        sigma_min_jalg: f64,
        last_theta: Vec<f64>,
        last_v: Vec<f64>,
    },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid event sequence: {0}")]
    InvalidEvents(String),

    #[error("no impasse crossing in bracket [{t_a}, {t_b}]")]
    NoCrossing { t_a: f64, t_b: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
