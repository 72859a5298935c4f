use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("positive-sequence voltage {0:.3e} p.u. is too small to orient the dq frame")]
    ZeroPositiveSequence(f64),

    #[error("value {value} is outside the admissible range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("positive and negative sequence voltages too close (U+ = {u_pos:.4}, U- = {u_neg:.4})")]
    DegenerateSequenceVoltages { u_pos: f64, u_neg: f64 },

    #[error("DC-link voltage left the admissible band: {0}")]
    NonFiniteState(f64),

    #[error("feeder topology is not radial: {0}")]
    NonRadialTopology(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("aggregate current of the cluster is zero")]
    ZeroAggregateCurrent,

    #[error("cannot aggregate an empty cluster")]
    EmptyCluster,

    #[error("cluster members differ in control constant `{0}`")]
    HeterogeneousParams(&'static str),

    #[error("turbine {0} is not in the ramp-recovery cluster")]
    NotClusterThree(String),

    #[error("sequence network is singular")]
    SingularNetwork,

    #[error("traces are not on the same time grid")]
    MisalignedTraces,

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation failed ({rule}): {message}")]
    Validation { rule: &'static str, message: String },

    #[error("at t = {t:.4} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(rule: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            rule,
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::AtTime { source, .. } => source.is_numerical(),
            Error::ZeroPositiveSequence(_)
            | Error::DegenerateSequenceVoltages { .. }
            | Error::NonFiniteState(_)
            | Error::NoConvergence { .. }
            | Error::ZeroAggregateCurrent
            | Error::SingularNetwork
            | Error::MisalignedTraces => true,
            _ => false,
        }
    }
}
