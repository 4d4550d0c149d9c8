//! Ego-noise and wind-noise suppression ahead of localization.

mod highpass;
mod mwf;
mod noise;
mod pairs;

pub use highpass::{highpass, ButterworthHighpass};
pub use mwf::{mwf, DIAGONAL_LOADING};
pub use noise::{
    estimate_noise_motor, estimate_noise_oracle, estimate_noise_recursive, estimate_noise_vad, EstimatorKind,
    MotorProfile, MotorTemplate, NoiseModel, TemplateBank, MOTOR_COUNT,
};
pub use pairs::{select_pairs, PairMask};
