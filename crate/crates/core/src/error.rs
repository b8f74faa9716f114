use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("delay {delay:.3} samples on channel {channel} is outside the recording of {len} samples")]
    OutOfRange {
        channel: usize,
        delay: f64,
        len: usize,
    },

    #[error("input contains a non-finite sample (channel {channel}, index {index})")]
    NonFinite { channel: usize, index: usize },

    #[error("image has no positive pixel; cannot normalize")]
    AllZeroImage,

    #[error("input signal has zero power")]
    ZeroSignal,

    #[error("subarray length {subarray} exceeds array length {elements}")]
    SubarrayTooLong { subarray: usize, elements: usize },

    #[error("covariance matrix has zero trace")]
    ZeroTrace,

    #[error("second stage: {0}")]
    SecondStage(#[source] Box<Error>),

    #[error("{stage} factorization failed at pivot {pivot}")]
    FactorizationFailed { stage: &'static str, pivot: usize },

    #[error("recording of {actual:.3e} s is too short; at least {required:.3e} s needed")]
    DurationTooShort { required: f64, actual: f64 },

    #[error("depth {depth:.4e} m lies outside the axial extent [{min:.4e}, {max:.4e}] m")]
    OutOfExtent { depth: f64, min: f64, max: f64 },

    #[error("profile never falls to half maximum on the {side} side of the peak")]
    NoCrossing { side: &'static str },

    #[error("profile peak sits on the boundary")]
    PeakAtBoundary,

    #[error("image is constant")]
    ConstantImage,

    #[error("image is in the {actual} stage, expected {expected}")]
    WrongStage {
        expected: &'static str,
        actual: &'static str,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
