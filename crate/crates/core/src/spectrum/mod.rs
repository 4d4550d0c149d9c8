//! Angular spectra: GCC, steered response power, subspace methods and post-processing.

mod gcc;
mod music;
mod post;
mod srp;

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, DirectionGrid};

pub use gcc::{gcc, Gcc, GccEngine, Weighting, DEFAULT_NONLIN_GAMMA};
pub use music::{gevd_music, music, MusicOutput};
pub(crate) use post::pick_peak_as;
pub use post::{cluster_estimates, local_maxima, mask_rotors, max_filter, pick_peak, MASKED};
pub use srp::{srp, SrpOutput};

/// Default analysis band for localization, Hz.
pub const DEFAULT_BAND_HZ: (f64, f64) = (100.0, 8000.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    SrpPhat,
    SrpNonlin,
    Music,
    GevdMusic,
    Clustered,
}

/// Score per direction of a grid, summarizing a range of analysis blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    pub scores: Vec<f64>,
    pub grid: Arc<DirectionGrid>,
    pub block_range: Range<usize>,
    /// Centre of the summarized interval, seconds from the start of the recording.
    pub time_s: f64,
}

impl AngularSpectrum {
    pub fn new(scores: Vec<f64>, grid: Arc<DirectionGrid>, block_range: Range<usize>, time_s: f64) -> Self {
        debug_assert_eq!(scores.len(), grid.len());
        Self { scores, grid, block_range, time_s }
    }

    pub fn direction(&self, index: usize) -> Direction {
        self.grid.get(index)
    }

    pub fn with_scores(&self, scores: Vec<f64>) -> Self {
        Self { scores, grid: self.grid.clone(), block_range: self.block_range.clone(), time_s: self.time_s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub direction: Direction,
    pub confidence: f64,
    pub method: MethodKind,
}
