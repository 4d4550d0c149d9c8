//! On-disk dataset layout.
//!
//! ```text
//! <dir>/rec0001.wav ...      multichannel recordings, one per id
//! <dir>/ground_truth.csv
//! <dir>/motor_speeds.csv
//! <dir>/geometry.txt
//! <dir>/templates.json       motor noise template bank
//! <dir>/noise/<id>.wav       optional: the ego-noise exactly as mixed in
//! <dir>/clean/<id>.wav       optional: the noiseless source image
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use egoloc_core::enhance::TemplateBank;
use egoloc_core::eval::GroundTruth;
use egoloc_core::sim::{SceneTruth, TaskGenerator, TaskKind};
use egoloc_core::ArrayGeometry;
use rayon::prelude::*;

use crate::error::{IoError, Result};
use crate::formats::{
    read_geometry, read_ground_truth, read_motor_speeds, read_template_bank, write_geometry, write_ground_truth,
    write_motor_speeds, write_template_bank, MotorSpeeds,
};
use crate::wav::{write_wav, WavFormat};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const MOTOR_SPEEDS_FILE: &str = "motor_speeds.csv";
pub const GEOMETRY_FILE: &str = "geometry.txt";
pub const TEMPLATES_FILE: &str = "templates.json";
pub const NOISE_DIR: &str = "noise";
pub const CLEAN_DIR: &str = "clean";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteOptions {
    pub format: WavFormat,
    /// FFT size the template bank is computed for.
    pub fft_size: usize,
    /// Also write the noise and clean components of every mix.
    pub components: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self { format: WavFormat::Float32, fft_size: 1024, components: false }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| IoError::io(path, e))
}

/// Generates every scene of `generator` and writes the dataset to `dir`. Returns the paths
/// written, sorted.
pub fn write_task(generator: &TaskGenerator, dir: &Path, opts: &WriteOptions) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    if opts.components {
        create_dir(&dir.join(NOISE_DIR))?;
        create_dir(&dir.join(CLEAN_DIR))?;
    }
    let scenes = (0..generator.len())
        .into_par_iter()
        .map(|i| {
            let scene = generator.scene(i)?;
            let name = format!("{}.wav", scene.id);
            let mut written = vec![dir.join(&name)];
            write_wav(scene.recording(), &written[0], opts.format)?;
            if opts.components {
                written.push(dir.join(NOISE_DIR).join(&name));
                write_wav(&scene.mix.scaled_noise, &written[1], opts.format)?;
                written.push(dir.join(CLEAN_DIR).join(&name));
                write_wav(&scene.clean, &written[2], opts.format)?;
            }
            Ok((scene.id, scene.truth, scene.ego.mean_rpm, written))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut files = Vec::new();
    let mut speeds = MotorSpeeds::new();
    let mut gt = match generator.config().kind {
        TaskKind::Static => GroundTruth::Static(BTreeMap::new()),
        TaskKind::Flight => GroundTruth::Flight(BTreeMap::new()),
    };
    for (id, truth, rpm, written) in scenes {
        files.extend(written);
        speeds.insert(id.clone(), rpm);
        match (&mut gt, truth) {
            (GroundTruth::Static(m), SceneTruth::Static(d)) => {
                m.insert(id, d);
            }
            (GroundTruth::Flight(m), SceneTruth::Flight(points)) => {
                m.insert(id, points);
            }
            _ => unreachable!("scene truth always matches the task kind"),
        }
    }
    let meta = [GROUND_TRUTH_FILE, MOTOR_SPEEDS_FILE, GEOMETRY_FILE, TEMPLATES_FILE].map(|f| dir.join(f));
    write_ground_truth(&gt, &meta[0])?;
    write_motor_speeds(&speeds, &meta[1])?;
    write_geometry(&generator.config().geometry, &meta[2])?;
    write_template_bank(&generator.template_bank(opts.fft_size)?, &meta[3])?;
    files.extend(meta);
    files.sort();
    Ok(files)
}

/// A dataset directory. Only the geometry file is mandatory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub geometry: ArrayGeometry,
    pub ground_truth: Option<GroundTruth>,
    pub motor_speeds: Option<MotorSpeeds>,
    pub templates: Option<TemplateBank>,
    /// WAV files found at the top level, keyed by file stem.
    pub recordings: BTreeMap<String, PathBuf>,
}

fn optional<T>(path: PathBuf, read: impl Fn(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        read(&path).map(Some)
    } else {
        Ok(None)
    }
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(IoError::FileNotFound(dir));
        }
        let geometry = read_geometry(dir.join(GEOMETRY_FILE))?;
        let ground_truth = optional(dir.join(GROUND_TRUTH_FILE), |p| read_ground_truth(p))?;
        let motor_speeds = optional(dir.join(MOTOR_SPEEDS_FILE), |p| read_motor_speeds(p))?;
        let templates = optional(dir.join(TEMPLATES_FILE), |p| read_template_bank(p))?;
        let recordings = wav_files(&dir)?;
        Ok(Self { dir, geometry, ground_truth, motor_speeds, templates, recordings })
    }

    /// Ids to process: the ground-truth ids when available, else every WAV file.
    pub fn ids(&self) -> Vec<String> {
        match &self.ground_truth {
            Some(gt) => gt.ids().into_iter().map(String::from).collect(),
            None => self.recordings.keys().cloned().collect(),
        }
    }

    pub fn recording_path(&self, id: &str) -> PathBuf {
        self.recordings.get(id).cloned().unwrap_or_else(|| self.dir.join(format!("{id}.wav")))
    }

    pub fn noise_path(&self, id: &str) -> PathBuf {
        self.dir.join(NOISE_DIR).join(format!("{id}.wav"))
    }

    pub fn clean_path(&self, id: &str) -> PathBuf {
        self.dir.join(CLEAN_DIR).join(format!("{id}.wav"))
    }
}

/// Top-level `*.wav` files of `dir` keyed by stem.
pub fn wav_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| IoError::io(dir, e))? {
        let path = entry.map_err(|e| IoError::io(dir, e))?.path();
        let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}
