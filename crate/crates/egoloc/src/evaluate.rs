//! Batch localization over a dataset and end-to-end scoring.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use egoloc_core::eval::{score, GroundTruth, ScoreReport, Submission};
use egoloc_core::pipeline::{Localizer, NoiseEstimator, PipelineConfig, PipelineInputs};
use egoloc_core::sim::{flight_timestamps, TaskKind};
use egoloc_core::tracking::Trajectory;
use egoloc_core::{Direction, MultichannelRecording};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{IoError, Result};
use crate::formats::write_submission;
use crate::wav::read_wav;

/// Outcome of processing one recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileReport {
    pub seconds: f64,
    /// Set when the recording could not be processed; it then scores zero.
    pub failure: Option<String>,
    /// Tracked trajectory of flight recordings.
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchOutput {
    pub submission: Submission,
    pub files: BTreeMap<String, FileReport>,
}

impl BatchOutput {
    pub fn failed(&self) -> Vec<String> {
        self.files.iter().filter(|(_, f)| f.failure.is_some()).map(|(id, _)| id.clone()).collect()
    }
}

enum Estimate {
    Static(Direction),
    Flight(Vec<Direction>, Trajectory),
}

fn process(
    localizer: &Localizer,
    dataset: &Dataset,
    id: &str,
    kind: TaskKind,
    times: Option<&[f64]>,
) -> Result<Estimate> {
    let recording = read_wav(dataset.recording_path(id))?;
    let mut inputs = PipelineInputs::new(&dataset.geometry);
    let profile;
    let noise: MultichannelRecording;
    match localizer.config().noise {
        Some(NoiseEstimator::MotorTemplate) => {
            let missing = |what: &str| IoError::Core(egoloc_core::Error::MissingInput(format!("{what} for {id}")));
            let speeds =
                dataset.motor_speeds.as_ref().and_then(|m| m.get(id)).ok_or_else(|| missing("motor speeds"))?;
            let bank = dataset.templates.clone().ok_or_else(|| missing("template bank"))?;
            profile = egoloc_core::enhance::MotorProfile { speeds: *speeds, template_bank: bank };
            inputs.motor = Some(&profile);
        }
        Some(NoiseEstimator::Oracle) => {
            noise = read_wav(dataset.noise_path(id))?;
            inputs.oracle_noise = Some(&noise);
        }
        _ => {}
    }
    match kind {
        TaskKind::Static => Ok(Estimate::Static(localizer.localize(&recording, &inputs)?.direction)),
        TaskKind::Flight => {
            let default_times;
            let times = match times {
                Some(t) => t,
                None => {
                    default_times = flight_timestamps(recording.duration());
                    &default_times
                }
            };
            let out = localizer.track(&recording, &inputs, times)?;
            Ok(Estimate::Flight(out.estimates, out.tracked))
        }
    }
}

/// Localizes every recording of `dataset` in parallel. Failures are isolated per file.
/// Flight query times come from the ground truth when present, else the standard 15
/// timestamps of the recording's duration.
pub fn localize_dataset(localizer: &Localizer, dataset: &Dataset, kind: TaskKind) -> BatchOutput {
    let truth_times: BTreeMap<&str, Vec<f64>> = match &dataset.ground_truth {
        Some(GroundTruth::Flight(m)) => {
            m.iter().map(|(id, pts)| (id.as_str(), pts.iter().map(|p| p.0).collect())).collect()
        }
        _ => BTreeMap::new(),
    };
    let results: Vec<(String, f64, Result<Estimate>)> = dataset
        .ids()
        .into_par_iter()
        .map(|id| {
            let start = Instant::now();
            let r = process(localizer, dataset, &id, kind, truth_times.get(id.as_str()).map(Vec::as_slice));
            (id, start.elapsed().as_secs_f64(), r)
        })
        .collect();

    let mut submission = Submission::empty(kind);
    let mut files = BTreeMap::new();
    for (id, seconds, result) in results {
        let (failure, trajectory) = match result {
            Ok(Estimate::Static(d)) => {
                if let Submission::Static(m) = &mut submission {
                    m.insert(id.clone(), d);
                }
                (None, None)
            }
            Ok(Estimate::Flight(ds, traj)) => {
                if let Submission::Flight(m) = &mut submission {
                    m.insert(id.clone(), ds.into_iter().enumerate().collect());
                }
                (None, Some(traj))
            }
            Err(e) => {
                warn!("{id}: {e}");
                (Some(e.to_string()), None)
            }
        };
        info!("{id}: {seconds:.3} s");
        files.insert(id, FileReport { seconds, failure, trajectory });
    }
    BatchOutput { submission, files }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub report: ScoreReport,
    pub batch: BatchOutput,
    pub submission_path: PathBuf,
}

/// Runs the configured pipeline on every recording of the dataset, writes the submission to
/// `submission_path` and scores it against the dataset's ground truth.
pub fn evaluate_pipeline(dataset_dir: &Path, config: &PipelineConfig, submission_path: &Path) -> Result<Evaluation> {
    let dataset = Dataset::open(dataset_dir)?;
    let gt = dataset
        .ground_truth
        .as_ref()
        .ok_or_else(|| IoError::FileNotFound(dataset_dir.join(crate::dataset::GROUND_TRUTH_FILE)))?;
    let localizer = Localizer::new(config.clone())?;
    let batch = localize_dataset(&localizer, &dataset, gt.kind());
    write_submission(&batch.submission, &batch.failed(), submission_path)?;
    let report = score(&batch.submission, gt)?;
    Ok(Evaluation { report, batch, submission_path: submission_path.to_path_buf() })
}
