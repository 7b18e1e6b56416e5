use thiserror::Error;

/// Errors raised by the library.
///
/// [`Error::is_domain`] separates mathematical domain failures (a tilt outside
/// its domain, a zero-probability conditioning event) from malformed input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid degree set: {0}")]
    InvalidSet(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("node {0} is not in the tree")]
    NotInTree(String),

    #[error("theta = {theta} is outside the tilt domain: {reason}")]
    ThetaOutsideDomain { theta: f64, reason: String },

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("tail sum remainder {remainder:e} exceeds tolerance for {what}")]
    TailTolerance { what: String, remainder: f64 },

    #[error("operation needs the float backend: {0}")]
    NeedsFloat(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("conditioning event has probability zero: {0}")]
    ZeroProbability(String),

    #[error("{what}: n = {n} is off the lattice (period {period}, residue {residue})")]
    OffLattice {
        what: String,
        n: usize,
        period: usize,
        residue: usize,
    },

    #[error("window h = {window} is too small to decide the event")]
    WindowTooSmall { window: usize },

    #[error("tree exceeded the node cap of {cap}")]
    CapExceeded { cap: usize },

    #[error("rejection sampling gave up after {attempts} attempts (acceptance rate {rate:e})")]
    AttemptsExhausted { attempts: u64, accepted: u64, rate: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("enumeration too large: {0}")]
    TooLarge(String),
}

impl Error {
    /// True for failures that come from the mathematics rather than from
    /// malformed input.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            Error::InvalidLaw(_) | Error::InvalidSet(_) | Error::InvalidTree(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidLaw(_) => "invalid_law",
            Error::InvalidSet(_) => "invalid_set",
            Error::InvalidTree(_) => "invalid_tree",
            Error::NotInTree(_) => "not_in_tree",
            Error::ThetaOutsideDomain { .. } => "theta_outside_domain",
            Error::Divergent(_) => "divergent",
            Error::TailTolerance { .. } => "tail_tolerance",
            Error::NeedsFloat(_) => "needs_float",
            Error::Precondition(_) => "precondition",
            Error::ZeroProbability(_) => "zero_probability",
            Error::OffLattice { .. } => "off_lattice",
            Error::WindowTooSmall { .. } => "window_too_small",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::AttemptsExhausted { .. } => "attempts_exhausted",
            Error::RootFinding(_) => "root_finding",
            Error::TooLarge(_) => "too_large",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
