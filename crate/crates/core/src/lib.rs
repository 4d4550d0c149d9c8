//! Direction-of-arrival estimation for microphone arrays mounted on multirotor drones.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole processing chain:
//!
//! * [`signal`]: framing, STFT/ISTFT and spatial covariance estimation,
//! * [`geometry`]: array model, far-field TDOAs, steering vectors and direction grids,
//! * [`enhance`]: ego-noise statistics, multichannel Wiener filtering, wind high-pass and
//!   microphone pair rejection,
//! * [`spectrum`]: GCC, SRP, (GEVD-)MUSIC and angular spectrum post-processing,
//! * [`tracking`]: Kalman and Viterbi trajectory smoothing, coarse-to-fine search,
//! * [`sim`]: synthetic scenes with drone ego-noise,
//! * [`eval`]: scoring of static and in-flight localization results,
//! * [`pipeline`]: configurable end-to-end processing of a single recording.
//!
//! File formats, the dataset layout and the command line live in the `egoloc` crate.
#![no_std]
// `!(x > 0.0)` deliberately treats NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod enhance;
pub mod error;
pub mod eval;
pub mod fft;
pub mod geometry;
pub mod linalg;
pub mod pipeline;
pub mod signal;
pub mod sim;
pub mod spectrum;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Direction, DirectionGrid};
pub use num_complex::Complex64;
pub use signal::MultichannelRecording;
