use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: invalid field `{field}`: {reason}")]
    Parse {
        row: usize,
        field: String,
        reason: String,
    },

    #[error("row {row}: `{field}` out of range: {value}")]
    Range { row: usize, field: String, value: f64 },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate ping for vessel {vessel_id} at {timestamp}")]
    DuplicatePing { vessel_id: String, timestamp: String },

    #[error("vessel {0} mixes pings with and without trip_id")]
    MixedTripIds(String),

    #[error("trip too short: {0} pings, need at least 3")]
    TripTooShort(usize),

    #[error("no usable observations")]
    NoUsableObservations,

    #[error("degenerate covariance")]
    DegenerateCovariance,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sequence too short")]
    SequenceTooShort,

    #[error("zero likelihood: observations impossible under the model")]
    ZeroLikelihood,

    #[error("empty reference component")]
    EmptyReferenceComponent,

    #[error("cannot label a single-component model")]
    SingleComponent,

    #[error("unknown component index {0}")]
    UnknownComponent(usize),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("threshold estimation failed ({0}); supply manual --lo/--hi thresholds")]
    ThresholdEstimation(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("truth sequence contains Unestimated at step {0}")]
    UnestimatedTruth(usize),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
