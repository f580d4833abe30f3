use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    Kernel(String),

    #[error("kernel is not heavy-tailed: no a-priori diameter bound")]
    NotHeavyTailed,

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("measures have unequal mass ({0} vs {1})")]
    UnequalMass(f64, f64),

    #[error("operation supports dimension {supported} only, got {got}")]
    UnsupportedDimension { supported: usize, got: usize },

    #[error("index mismatch: expected {expected} positions, got {got}")]
    IndexMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error(
        "supercritical data: e0 = {min_e0:e} at alpha = {location:?}; trajectories cross by t <= {crossing_bound}"
    )]
    Supercritical {
        min_e0: f64,
        location: Vec<f64>,
        crossing_bound: f64,
    },

    #[error("recovered u0 gives e0 = {violation:e} < 0 on re-check at alpha = {location:?}")]
    Recovery { violation: f64, location: Vec<f64> },

    #[error("non-finite state at t = {t}; last valid state kept")]
    NonFinite { t: f64 },

    #[error(
        "labels crossed by t = {t}: dX1 = {min_dx1:e} at alpha = {alpha:?}; set breakdown mode to stop at the crossing"
    )]
    Crossing { t: f64, alpha: Vec<f64>, min_dx1: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error(
        "zero-set interval on slice {slice} not collapsed: image diameter {diameter:e} > {tolerance:e}; extend the run"
    )]
    NotCollapsed {
        slice: usize,
        diameter: f64,
        tolerance: f64,
    },

    #[error("dimension estimate: {0}")]
    Dimension(String),

    #[error("stability precondition: {0}")]
    Stability(String),

    #[error("config: {0}")]
    Config(String),

    #[error("expression: {0}")]
    Expression(String),
}
