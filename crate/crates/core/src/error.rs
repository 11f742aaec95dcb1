use thiserror::Error;

/// Errors surfaced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("field amplitudes diverged during propagation: {0}")]
    FieldDiverged(String),

    #[error("zero input intensity for beam {0}")]
    ZeroInputIntensity(u8),

    #[error("sample intervals differ: {0} s vs {1} s")]
    SampleRateMismatch(f64, f64),

    #[error("max_lag {0} s exceeds 20% of the record length {1} s")]
    LagTooLong(f64, f64),

    #[error("constant signal in overlap window at lag {0} s")]
    ZeroVariance(f64),

    #[error("curve has no usable extremum: {0}")]
    FlatCurve(&'static str),

    #[error("no half-height crossing found on the {0} side of the extremum")]
    NoHalfCrossing(&'static str),

    #[error("stability bound violated: dt*(|a|+b) = {0}, must be < 0.1")]
    UnstableStep(f64),

    #[error("record too short: {0}")]
    RecordTooShort(String),

    #[error("propagation failed at sample {index}: {source}")]
    SampleFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep failed at B = {b} Gauss: {source}")]
    SweepPointFailed {
        b: f64,
        #[source]
        source: Box<Error>,
    },
}
