use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("recording has {len} samples, at least {needed} are required")]
    RecordingTooShort { len: usize, needed: usize },
    #[error("spectral blocks have inconsistent shapes")]
    InconsistentBlocks,
    #[error("empty input")]
    EmptyInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("microphone index {index} is out of range for {count} microphones")]
    InvalidMicIndex { index: usize, count: usize },
    #[error("invalid grid step: {0}")]
    InvalidStep(String),
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error("too few frames: {got} given, {needed} required")]
    TooFewFrames { got: usize, needed: usize },
    #[error("input signal is identically zero")]
    ZeroSignal,
    #[error("motor template bank is empty")]
    EmptyTemplateBank,
    #[error("motor template has {got} bins, expected {expected}")]
    TemplateSizeMismatch { got: usize, expected: usize },
    #[error("motor speed {rpm} rpm is outside the template bank range [{min}, {max}] by more than 20%")]
    SpeedOutOfRange { rpm: f64, min: f64, max: f64 },
    #[error("smoothing factor {0} must lie in [0, 1)")]
    InvalidAlpha(f64),
    #[error("noise covariance is singular at bin {0}")]
    SingularNoiseCovariance(usize),
    #[error("invalid cutoff frequency {0} Hz")]
    InvalidCutoff(f64),
    #[error("cross-spectrum energy is too small for the phase transform")]
    InsufficientEnergy,
    #[error("every direction of the angular spectrum is masked")]
    AllMasked,
    #[error("delay of {delay} samples is too large for a signal of {len} samples")]
    DelayTooLarge { delay: f64, len: usize },
    #[error("timestamps must be finite and strictly increasing")]
    NonIncreasingTimestamps,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("ground truth and submission describe different task kinds")]
    TaskKindMismatch,
    #[error("invalid direction: azimuth {azimuth}, elevation {elevation}")]
    InvalidDirection { azimuth: f64, elevation: f64 },
    #[error("missing input: {0}")]
    MissingInput(String),
}
