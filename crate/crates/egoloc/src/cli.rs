//! The `egoloc` command line.
//!
//! Exit codes: 0 success (per-file failures are warnings), 1 processing failure, 2 invalid
//! flags, 3 I/O or data-file error, 4 configuration error, 5 submission/ground-truth schema
//! mismatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use egoloc_core::enhance::MotorProfile;
use egoloc_core::eval::score;
use egoloc_core::pipeline::{Localizer, PipelineConfig, PipelineInputs};
use egoloc_core::sim::{SourceKind, TaskConfig, TaskGenerator, TaskKind};
use egoloc_core::{ArrayGeometry, MultichannelRecording};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::load_config;
use crate::dataset::{wav_files, write_task, Dataset, WriteOptions, GEOMETRY_FILE, MOTOR_SPEEDS_FILE, TEMPLATES_FILE};
use crate::error::{read_text, IoError};
use crate::evaluate::{evaluate_pipeline, localize_dataset};
use crate::formats::{
    format_trajectory, kind_of, parse_ground_truth, parse_submission, read_geometry, read_motor_speeds,
    read_template_bank, write_submission,
};
use crate::wav::{read_wav, write_wav, WavFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "egoloc", version, about = "Sound source localization for drone-mounted microphone arrays")]
pub struct Cli {
    /// Print the summary as JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for per-recording parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Static,
    Flight,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Static => TaskKind::Static,
            Task::Flight => TaskKind::Flight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Speech,
    White,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        count: usize,
        /// SNR in dB, a single value or a range such as `-20..5`.
        #[arg(long, allow_hyphen_values = true, default_value = "-20..5")]
        snr: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "speech")]
        source: Source,
        #[arg(long, value_enum, default_value = "float32")]
        format: WavFormat,
        /// Also write the noise and clean components of each mix.
        #[arg(long)]
        components: bool,
        /// FFT size of the motor template bank.
        #[arg(long, default_value_t = 1024)]
        fft_size: usize,
    },
    /// Run the enhancement chain of a configuration on one recording.
    Enhance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to geometry.txt next to the input.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Noise-only recording for the oracle noise estimator.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Clean reference; enables the SNR gain report.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "float32")]
        format: WavFormat,
    },
    /// Localize one recording or every recording of a directory and write a submission.
    Localize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the ground-truth kind when available, else static.
        #[arg(long, value_enum)]
        task: Option<Task>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Write the tracked trajectory of every flight recording here.
        #[arg(long)]
        trajectory_dir: Option<PathBuf>,
    },
    /// Score a submission against ground truth.
    Score {
        #[arg(long)]
        submission: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, value_enum)]
        task: Option<Task>,
    },
    /// Localize a dataset, write its submission and score it.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to submission.csv inside the dataset.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::Enhance { .. } => "enhance",
            Self::Localize { .. } => "localize",
            Self::Score { .. } => "score",
            Self::Evaluate { .. } => "evaluate",
        }
    }
}

/// Result of one command: exit code, files written and a summary in text and JSON form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub command: String,
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub data: Value,
    pub error: Option<String>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(e: IoError) -> Self {
        let code = match e {
            IoError::Parse(_) | IoError::Validation(_) => EXIT_CONFIG,
            IoError::Core(_) => EXIT_FAILURE,
            _ => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }

    fn config(e: IoError) -> Self {
        Self::new(EXIT_CONFIG, e.to_string())
    }
}

#[derive(Default)]
struct Report {
    artifacts: Vec<PathBuf>,
    summary: Vec<String>,
    data: Value,
}

type Outcome = Result<Report, Failure>;

fn load_pipeline(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => load_config(p).map_err(Failure::config),
        None => Ok(PipelineConfig::default()),
    }
}

fn parse_snr(text: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::new(EXIT_USAGE, format!("invalid SNR {text:?}; expected a number or a range LO..HI"));
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v: f64 = text.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn simulate(task: Task, count: usize, snr: &str, seed: u64, out: &Path, source: Source, opts: WriteOptions) -> Outcome {
    if count == 0 {
        return Err(Failure::new(EXIT_USAGE, "--count must be at least 1"));
    }
    if !opts.fft_size.is_power_of_two() {
        return Err(Failure::new(EXIT_USAGE, "--fft-size must be a power of two"));
    }
    let range = parse_snr(snr)?;
    let mut cfg = TaskConfig::new(task.into(), count, range, seed);
    cfg.source_kind = match source {
        Source::Speech => SourceKind::SpeechLike,
        Source::White => SourceKind::WhiteNoise,
    };
    let generator = TaskGenerator::new(cfg).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let files = write_task(&generator, out, &opts).map_err(Failure::io)?;
    let kind = TaskKind::from(task);
    Ok(Report {
        summary: vec![
            format!("wrote {count} {kind:?} recordings to {}", out.display()).to_lowercase(),
            format!("snr range [{}, {}] dB, seed {seed}", range.0, range.1),
        ],
        data: json!({ "task": kind, "count": count, "seed": seed, "snr_range_db": [range.0, range.1] }),
        artifacts: files,
    })
}

fn geometry_near(explicit: Option<&Path>, dir: &Path) -> Result<Option<ArrayGeometry>, Failure> {
    match explicit {
        Some(p) => read_geometry(p).map(Some).map_err(Failure::io),
        None => {
            let p = dir.join(GEOMETRY_FILE);
            if p.exists() {
                read_geometry(p).map(Some).map_err(Failure::io)
            } else {
                Ok(None)
            }
        }
    }
}

fn parent(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// 10 log10 of clean power over residual power, where the residual is `signal - clean`.
fn snr_against(clean: &MultichannelRecording, signal: &MultichannelRecording) -> Option<f64> {
    if clean.channel_count() != signal.channel_count() || clean.len() != signal.len() {
        return None;
    }
    let residual: f64 = clean
        .channels()
        .iter()
        .zip(signal.channels())
        .flat_map(|(c, s)| c.iter().zip(s).map(|(a, b)| (b - a) * (b - a)))
        .sum();
    let power: f64 = clean.channels().iter().flatten().map(|v| v * v).sum();
    (residual > 0.0 && power > 0.0).then(|| 10.0 * (power / residual).log10())
}

#[allow(clippy::too_many_arguments)]
fn enhance(
    input: &Path,
    output: &Path,
    config: Option<&Path>,
    geometry: Option<&Path>,
    noise: Option<&Path>,
    clean: Option<&Path>,
    format: WavFormat,
) -> Outcome {
    let cfg = load_pipeline(config)?;
    let recording = read_wav(input).map_err(Failure::io)?;
    let dir = parent(input);
    let geom = match geometry_near(geometry, &dir)? {
        Some(g) => g,
        None => {
            log::warn!("no geometry file found, assuming the default 8-microphone cube");
            ArrayGeometry::default_cube()
        }
    };
    let noise = noise.map(read_wav).transpose().map_err(Failure::io)?;
    let id = input.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let profile = match (read_motor_speeds(dir.join(MOTOR_SPEEDS_FILE)), read_template_bank(dir.join(TEMPLATES_FILE))) {
        (Ok(speeds), Ok(bank)) => speeds.get(&id).map(|s| MotorProfile { speeds: *s, template_bank: bank }),
        _ => None,
    };
    let mut inputs = PipelineInputs::new(&geom);
    inputs.oracle_noise = noise.as_ref();
    inputs.motor = profile.as_ref();
    let localizer = Localizer::new(cfg).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let start = Instant::now();
    let enhanced =
        localizer.enhance_recording(&recording, &inputs).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    let seconds = start.elapsed().as_secs_f64();
    write_wav(&enhanced, output, format).map_err(Failure::io)?;
    let mut summary = vec![format!("enhanced {} -> {} in {seconds:.3} s", input.display(), output.display())];
    let mut data = json!({ "input": input, "output": output, "seconds": seconds });
    if let Some(clean_path) = clean {
        let reference = read_wav(clean_path).map_err(Failure::io)?;
        match (snr_against(&reference, &recording), snr_against(&reference, &enhanced)) {
            (Some(before), Some(after)) => {
                summary.push(format!("SNR {before:.2} dB -> {after:.2} dB (gain {:.2} dB)", after - before));
                data["snr_in_db"] = json!(before);
                data["snr_out_db"] = json!(after);
                data["snr_gain_db"] = json!(after - before);
            }
            _ => return Err(Failure::new(EXIT_IO, "clean reference does not match the input shape")),
        }
    }
    Ok(Report { artifacts: vec![output.to_path_buf()], summary, data })
}

fn open_input(input: &Path, geometry: Option<&Path>) -> Result<Dataset, Failure> {
    if input.is_dir() {
        let mut ds = match geometry {
            Some(_) if !input.join(GEOMETRY_FILE).exists() => {
                let geometry = geometry_near(geometry, input)?.expect("explicit path");
                Dataset {
                    dir: input.to_path_buf(),
                    geometry,
                    ground_truth: None,
                    motor_speeds: None,
                    templates: None,
                    recordings: wav_files(input).map_err(Failure::io)?,
                }
            }
            _ => Dataset::open(input).map_err(Failure::io)?,
        };
        if let Some(g) = geometry_near(geometry, input)? {
            ds.geometry = g;
        }
        Ok(ds)
    } else if input.is_file() {
        let dir = parent(input);
        let geometry = geometry_near(geometry, &dir)?
            .ok_or_else(|| Failure::io(IoError::FileNotFound(dir.join(GEOMETRY_FILE))))?;
        let id = input.file_stem().and_then(|s| s.to_str()).unwrap_or("recording").to_string();
        Ok(Dataset {
            geometry,
            ground_truth: None,
            motor_speeds: read_motor_speeds(dir.join(MOTOR_SPEEDS_FILE)).ok(),
            templates: read_template_bank(dir.join(TEMPLATES_FILE)).ok(),
            recordings: [(id, input.to_path_buf())].into(),
            dir,
        })
    } else {
        Err(Failure::io(IoError::FileNotFound(input.to_path_buf())))
    }
}

fn file_lines(batch: &crate::evaluate::BatchOutput) -> Vec<String> {
    batch
        .files
        .iter()
        .map(|(id, f)| match &f.failure {
            None => format!("{id}: ok ({:.3} s)", f.seconds),
            Some(e) => format!("{id}: FAILED ({e})"),
        })
        .collect()
}

fn localize(
    input: &Path,
    output: &Path,
    config: Option<&Path>,
    task: Option<Task>,
    geometry: Option<&Path>,
    trajectory_dir: Option<&Path>,
) -> Outcome {
    let cfg = load_pipeline(config)?;
    let localizer = Localizer::new(cfg.clone()).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let dataset = open_input(input, geometry)?;
    let kind = task.map(TaskKind::from).or(dataset.ground_truth.as_ref().map(|g| g.kind())).unwrap_or(TaskKind::Static);
    let batch = localize_dataset(&localizer, &dataset, kind);
    let failed = batch.failed();
    write_submission(&batch.submission, &failed, output).map_err(Failure::io)?;
    let mut artifacts = vec![output.to_path_buf()];
    if let Some(dir) = trajectory_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(IoError::io(dir, e)))?;
        for (id, f) in &batch.files {
            if let Some(traj) = &f.trajectory {
                let path = dir.join(format!("{id}.csv"));
                std::fs::write(&path, format_trajectory(traj)).map_err(|e| Failure::io(IoError::io(&path, e)))?;
                artifacts.push(path);
            }
        }
    }
    let mut summary = vec![format!(
        "localized {} of {} recordings with {:?}",
        batch.files.len() - failed.len(),
        batch.files.len(),
        cfg.method.kind()
    )];
    summary.extend(file_lines(&batch));
    Ok(Report {
        artifacts,
        summary,
        data: json!({ "task": kind, "method": cfg.method.kind(), "files": batch.files, "failed": failed }),
    })
}

fn score_files(submission: &Path, ground_truth: &Path, task: Option<Task>) -> Outcome {
    let sub_text = read_text(submission).map_err(Failure::io)?;
    let gt_text = read_text(ground_truth).map_err(Failure::io)?;
    let schema = |e: IoError| match e {
        IoError::MalformedRow { .. } | IoError::DuplicateId(_) => Failure::new(EXIT_SCHEMA, e.to_string()),
        other => Failure::io(other),
    };
    let gt = parse_ground_truth(&gt_text).map_err(schema)?;
    if let Some(t) = task {
        if TaskKind::from(t) != gt.kind() {
            return Err(Failure::new(EXIT_SCHEMA, format!("ground truth describes a {:?} task", gt.kind())));
        }
    }
    if kind_of(&sub_text) != gt.kind() {
        return Err(Failure::new(
            EXIT_SCHEMA,
            format!("submission is a {:?} file but the ground truth is {:?}", kind_of(&sub_text), gt.kind()),
        ));
    }
    let sub = parse_submission(&sub_text).map_err(schema)?;
    let report = score(&sub, &gt).map_err(|e| Failure::new(EXIT_SCHEMA, e.to_string()))?;
    let mut summary = vec![format!("score {} / {} ({:.1}%)", report.total, report.max, 100.0 * report.fraction())];
    for (id, r) in &report.recordings {
        let errs: Vec<String> = r.errors_deg.iter().map(|e| e.map_or("-".into(), |v| format!("{v:.2}"))).collect();
        summary.push(format!("{id}: {}/{} errors [{}]", r.points, r.max_points, errs.join(", ")));
    }
    if !report.unknown_ids.is_empty() {
        summary.push(format!("ignored unknown ids: {}", report.unknown_ids.join(", ")));
    }
    Ok(Report { artifacts: vec![], summary, data: json!({ "report": report }) })
}

fn evaluate(dataset: &Path, config: Option<&Path>, output: Option<&Path>) -> Outcome {
    let cfg = load_pipeline(config)?;
    Localizer::new(cfg.clone()).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let out = output.map_or_else(|| dataset.join("submission.csv"), Path::to_path_buf);
    let ev = evaluate_pipeline(dataset, &cfg, &out).map_err(Failure::io)?;
    let r = &ev.report;
    let mut summary = vec![format!("score {} / {} ({:.1}%)", r.total, r.max, 100.0 * r.fraction())];
    summary.extend(file_lines(&ev.batch));
    Ok(Report {
        artifacts: vec![out],
        summary,
        data: json!({ "report": r, "files": ev.batch.files, "failed": ev.batch.failed() }),
    })
}

fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::Simulate { task, count, snr, seed, out, source, format, components, fft_size } => {
            let opts = WriteOptions { format: *format, fft_size: *fft_size, components: *components };
            simulate(*task, *count, snr, *seed, out, *source, opts)
        }
        Command::Enhance { input, output, config, geometry, noise, clean, format } => {
            enhance(input, output, config.as_deref(), geometry.as_deref(), noise.as_deref(), clean.as_deref(), *format)
        }
        Command::Localize { input, output, config, task, geometry, trajectory_dir } => {
            localize(input, output, config.as_deref(), *task, geometry.as_deref(), trajectory_dir.as_deref())
        }
        Command::Score { submission, ground_truth, task } => score_files(submission, ground_truth, *task),
        Command::Evaluate { dataset, config, output } => evaluate(dataset, config.as_deref(), output.as_deref()),
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CommandOutcome {
    let run = || dispatch(&cli.command);
    let result = match cli.threads {
        Some(0) => Err(Failure::new(EXIT_USAGE, "--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(Failure::new(EXIT_FAILURE, e.to_string())),
        },
        None => run(),
    };
    let command = cli.command.name().to_string();
    match result {
        Ok(r) => CommandOutcome {
            command,
            exit_code: EXIT_OK,
            artifacts: r.artifacts,
            summary: r.summary,
            data: r.data,
            error: None,
        },
        Err(f) => CommandOutcome {
            command,
            exit_code: f.code,
            artifacts: vec![],
            summary: vec![format!("error: {}", f.message)],
            data: Value::Null,
            error: Some(f.message),
        },
    }
}

/// Parses `args`, runs the command, prints its summary and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = execute(&cli);
    // Output errors such as a closed pipe must not turn into a panic.
    let _ = print_outcome(&outcome, cli.json);
    outcome.exit_code
}

fn print_outcome(outcome: &CommandOutcome, json: bool) -> std::io::Result<()> {
    use std::io::Write;
    if json {
        let mut out = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, outcome)?;
        writeln!(out)
    } else if outcome.exit_code == EXIT_OK {
        let mut out = std::io::stdout().lock();
        outcome.summary.iter().try_for_each(|line| writeln!(out, "{line}"))
    } else {
        let mut err = std::io::stderr().lock();
        outcome.summary.iter().try_for_each(|line| writeln!(err, "{line}"))
    }
}
