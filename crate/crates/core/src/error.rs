use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A signal fed into a filter or controller was NaN or infinite.
    #[error("non-finite {what} at t = {t:.6} s")]
    SignalFault { what: &'static str, t: f64 },

    #[error("least-squares buffer is degenerate: parameter variance is zero")]
    DegenerateBuffer,

    #[error("least-squares buffer not full ({len}/{capacity} samples)")]
    BufferNotFull { len: usize, capacity: usize },

    #[error("frequency {omega} rad/s outside table range [{min}, {max}]")]
    OutOfRange { omega: f64, min: f64, max: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("hydrodynamic table: {0}")]
    Table(String),

    #[error("radiation fit infeasible: {0}")]
    InfeasibleFit(String),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("simulation diverged at t = {t:.6} s (state {state:?})")]
    Diverged { t: f64, state: Vec<f64> },

    #[error("record spans {available:.3} s after warmup, {requested:.3} s requested")]
    InsufficientSpan { requested: f64, available: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
