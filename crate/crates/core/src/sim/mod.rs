//! Synthetic scenes: far-field sources, drone ego-noise and task generation.

mod delay;
mod ego;
mod scene;
mod source;
mod task;

pub use delay::fractional_delay;
pub use ego::{
    synth_ego_noise, template_bank, EgoNoise, HarmonicNoise, NoiseKind, NoiseSource, DEFAULT_ROTOR_POSITIONS,
};
pub use scene::{mix_at_snr, render_source, Mix, SceneSpec, SourcePath, MOTION_STEP_S};
pub use source::{source_signal, SourceKind, SOURCE_RMS};
pub use task::{
    flight_timestamps, random_direction, GeneratedScene, SceneTruth, TaskConfig, TaskGenerator, TaskKind,
    FLIGHT_TIMESTAMPS, TRUTH_WINDOW_S,
};
