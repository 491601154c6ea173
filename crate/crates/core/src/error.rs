use alloc::string::String;

/// Errors raised by the solvers and their inputs.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Fundamental diagram parameters violate their invariants.
    #[error("invalid fundamental diagram: {0}")]
    InvalidDiagram(String),
    /// Junction topology or split coefficients are invalid.
    #[error("invalid junction: {0}")]
    InvalidJunction(String),
    /// Grid parameters are invalid.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// Initial density profile is invalid on one branch.
    #[error("invalid initial data on branch {branch}: {reason}")]
    InvalidInitialData {
        /// Zero-based branch index.
        branch: usize,
        /// What went wrong.
        reason: String,
    },
    /// A generalized inverse was requested below the Hamiltonian minimum.
    #[error("cost {value} is below the Hamiltonian minimum {min}")]
    BelowMinimum {
        /// Requested value.
        value: f64,
        /// Global minimum of the Hamiltonian.
        min: f64,
    },
    /// A grid index is out of range.
    #[error("index {index} out of range on branch {branch} (last point {last})")]
    IndexOutOfRange {
        /// Zero-based branch index.
        branch: usize,
        /// Offending index.
        index: usize,
        /// Last valid point index.
        last: usize,
    },
    /// The initial time derivative infimum is not finite.
    #[error("initial time derivative bound m0 is not finite")]
    UnboundedInitialData,
    /// The time step exceeds the restrictive CFL bound.
    #[error("CFL violation on branch {branch}: dt = {dt_s} s exceeds dt_max = {dt_max_s} s")]
    CflViolation {
        /// Branch whose Lipschitz bound is binding.
        branch: usize,
        /// Requested time step in seconds.
        dt_s: f64,
        /// Largest admissible time step in seconds.
        dt_max_s: f64,
    },
    /// A gradient or time-derivative estimate failed during a run.
    #[error("estimate violation at step {step}: {detail}")]
    EstimateViolation {
        /// Step index at which the violation was observed.
        step: usize,
        /// Human-readable diagnostic (branch, index, values).
        detail: String,
    },
    /// The admissible set of split coefficients has no element.
    #[error("admissible set of split coefficients is empty")]
    EmptyAdmissibleSet,
    /// Two trajectories or fields do not share the same layout.
    #[error("mismatched fields: {0}")]
    Mismatch(String),
    /// An interpolation query falls outside the stored span.
    #[error("query outside span: {0}")]
    OutOfSpan(String),
    /// Not enough usable samples to fit a front speed.
    #[error("only {found} usable shock samples, need at least 2")]
    TooFewSamples {
        /// Samples where a crossing was found.
        found: usize,
    },
    /// One level of a refinement study failed.
    #[error("refinement level {level} (dx = {dx_m} m) failed: {reason}")]
    LevelFailed {
        /// Zero-based level index.
        level: usize,
        /// Space step of that level in meters.
        dx_m: f64,
        /// Underlying error.
        reason: String,
    },
    /// Scheme selection does not support this configuration.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

/// Result alias for this crate.
pub type Result<T> = core::result::Result<T, Error>;
