//! CSV tables, geometry files and template banks.
//!
//! Every CSV has a header row, comma separators and numbers written with six fixed decimals.
//! Parse errors carry the 1-based line number of the offending row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use egoloc_core::enhance::{TemplateBank, MOTOR_COUNT};
use egoloc_core::eval::{GroundTruth, Submission};
use egoloc_core::geometry::Vec3;
use egoloc_core::sim::{TaskKind, FLIGHT_TIMESTAMPS};
use egoloc_core::spectrum::MASKED;
use egoloc_core::tracking::Trajectory;
use egoloc_core::{ArrayGeometry, Direction};

use crate::error::{read_text, write_file, IoError, Result};

pub const MOTOR_SPEEDS_HEADER: &str = "recording_id,motor1_rpm,motor2_rpm,motor3_rpm,motor4_rpm";
pub const STATIC_HEADER: &str = "recording_id,azimuth_deg,elevation_deg";
pub const FLIGHT_SUBMISSION_HEADER: &str = "recording_id,timestamp_index,azimuth_deg,elevation_deg";
pub const FLIGHT_TRUTH_HEADER: &str = "recording_id,timestamp_index,timestamp_s,azimuth_deg,elevation_deg";
pub const TRAJECTORY_HEADER: &str = "time_s,azimuth_deg,elevation_deg,confidence";
pub const SPECTRUM_HEADER: &str = "azimuth_deg,elevation_deg,score";

/// Six fixed decimals, without a negative sign on zero.
pub fn fixed(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Data rows of a CSV document with its 1-based line numbers, after checking the header.
fn rows(text: &str, expected: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e))?.clone();
    let want: Vec<&str> = expected.split(',').collect();
    if header.iter().ne(want.iter().copied()) {
        return Err(IoError::row(1, format!("header must be \"{expected}\"")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != want.len() {
            return Err(IoError::row(line, format!("expected {} columns, found {}", want.len(), record.len())));
        }
        out.push((line, record));
    }
    Ok(out)
}

fn csv_error(e: &csv::Error) -> IoError {
    IoError::row(e.position().map_or(0, |p| p.line()), e.to_string())
}

fn number(field: &str, name: &str, line: u64) -> Result<f64> {
    field.parse::<f64>().map_err(|_| IoError::row(line, format!("{name} {field:?} is not a number")))
}

fn finite(field: &str, name: &str, line: u64) -> Result<f64> {
    let v = number(field, name, line)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(IoError::row(line, format!("{name} must be finite")))
    }
}

fn id(field: &str, line: u64) -> Result<String> {
    if field.is_empty() {
        return Err(IoError::row(line, "empty recording id"));
    }
    Ok(field.to_string())
}

/// Azimuth is wrapped into [-180, 180); elevation must lie in [-90, 90].
fn direction(az: &str, el: &str, line: u64) -> Result<Direction> {
    let az = finite(az, "azimuth", line)?;
    let el = finite(el, "elevation", line)?;
    if !(-90.0..=90.0).contains(&el) {
        return Err(IoError::row(line, format!("elevation {el} is outside [-90, 90]")));
    }
    Ok(Direction::wrapped(az, el))
}

/// Like [`direction`], but empty or NaN fields mean "no estimate".
fn optional_direction(az: &str, el: &str, line: u64) -> Result<Option<Direction>> {
    let missing = |f: &str| f.is_empty() || f.eq_ignore_ascii_case("nan");
    if missing(az) || missing(el) {
        return Ok(None);
    }
    direction(az, el, line).map(Some)
}

fn timestamp_index(field: &str, line: u64) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(k) if k < FLIGHT_TIMESTAMPS => Ok(k),
        _ => Err(IoError::row(line, format!("timestamp index {field:?} is not in 0..{FLIGHT_TIMESTAMPS}"))),
    }
}

fn header_of(text: &str) -> String {
    let first = text.trim_start_matches('\u{feff}').lines().next().unwrap_or("");
    first.split(',').map(str::trim).collect::<Vec<_>>().join(",")
}

// Motor speeds

pub type MotorSpeeds = BTreeMap<String, [f64; MOTOR_COUNT]>;

pub fn parse_motor_speeds(text: &str) -> Result<MotorSpeeds> {
    let mut out = MotorSpeeds::new();
    for (line, r) in rows(text, MOTOR_SPEEDS_HEADER)? {
        let key = id(&r[0], line)?;
        let mut speeds = [0.0; MOTOR_COUNT];
        for (m, s) in speeds.iter_mut().enumerate() {
            *s = finite(&r[m + 1], &format!("motor{}_rpm", m + 1), line)?;
            if *s < 0.0 {
                return Err(IoError::row(line, "motor speeds must be non-negative"));
            }
        }
        if out.insert(key.clone(), speeds).is_some() {
            return Err(IoError::DuplicateId(key));
        }
    }
    Ok(out)
}

pub fn format_motor_speeds(speeds: &MotorSpeeds) -> String {
    let mut s = format!("{MOTOR_SPEEDS_HEADER}\n");
    for (id, rpm) in speeds {
        let cols: Vec<String> = rpm.iter().map(|r| fixed(*r)).collect();
        let _ = writeln!(s, "{id},{}", cols.join(","));
    }
    s
}

pub fn read_motor_speeds(path: impl AsRef<Path>) -> Result<MotorSpeeds> {
    parse_motor_speeds(&read_text(path.as_ref())?)
}

pub fn write_motor_speeds(speeds: &MotorSpeeds, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_motor_speeds(speeds).as_bytes())
}

// Ground truth

/// Static truth uses the static submission columns; flight truth adds `timestamp_s`.
pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    if header_of(text) == FLIGHT_TRUTH_HEADER {
        let mut records: BTreeMap<String, BTreeMap<usize, (f64, Direction)>> = BTreeMap::new();
        for (line, r) in rows(text, FLIGHT_TRUTH_HEADER)? {
            let key = id(&r[0], line)?;
            let k = timestamp_index(&r[1], line)?;
            let t = finite(&r[2], "timestamp", line)?;
            let d = direction(&r[3], &r[4], line)?;
            if records.entry(key.clone()).or_default().insert(k, (t, d)).is_some() {
                return Err(IoError::DuplicateId(format!("{key}#{k}")));
            }
        }
        let gt = GroundTruth::Flight(records.into_iter().map(|(id, pts)| (id, pts.into_values().collect())).collect());
        gt.validate()?;
        Ok(gt)
    } else {
        let mut records = BTreeMap::new();
        for (line, r) in rows(text, STATIC_HEADER)? {
            let key = id(&r[0], line)?;
            if records.insert(key.clone(), direction(&r[1], &r[2], line)?).is_some() {
                return Err(IoError::DuplicateId(key));
            }
        }
        Ok(GroundTruth::Static(records))
    }
}

pub fn format_ground_truth(gt: &GroundTruth) -> String {
    match gt {
        GroundTruth::Static(records) => {
            let mut s = format!("{STATIC_HEADER}\n");
            for (id, d) in records {
                let _ = writeln!(s, "{id},{},{}", fixed(d.azimuth()), fixed(d.elevation()));
            }
            s
        }
        GroundTruth::Flight(records) => {
            let mut s = format!("{FLIGHT_TRUTH_HEADER}\n");
            for (id, pts) in records {
                for (k, (t, d)) in pts.iter().enumerate() {
                    let _ = writeln!(s, "{id},{k},{},{},{}", fixed(*t), fixed(d.azimuth()), fixed(d.elevation()));
                }
            }
            s
        }
    }
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    parse_ground_truth(&read_text(path.as_ref())?)
}

pub fn write_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_ground_truth(gt).as_bytes())
}

// Submissions

/// Rows with empty or NaN angles are accepted and count as missing estimates.
pub fn parse_submission(text: &str) -> Result<Submission> {
    if header_of(text) == FLIGHT_SUBMISSION_HEADER {
        let mut records: BTreeMap<String, BTreeMap<usize, Direction>> = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (line, r) in rows(text, FLIGHT_SUBMISSION_HEADER)? {
            let key = id(&r[0], line)?;
            let k = timestamp_index(&r[1], line)?;
            if !seen.insert((key.clone(), k)) {
                return Err(IoError::DuplicateId(format!("{key}#{k}")));
            }
            let entry = records.entry(key).or_default();
            if let Some(d) = optional_direction(&r[2], &r[3], line)? {
                entry.insert(k, d);
            }
        }
        Ok(Submission::Flight(records))
    } else {
        let mut records = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (line, r) in rows(text, STATIC_HEADER)? {
            let key = id(&r[0], line)?;
            if !seen.insert(key.clone()) {
                return Err(IoError::DuplicateId(key));
            }
            if let Some(d) = optional_direction(&r[1], &r[2], line)? {
                records.insert(key, d);
            }
        }
        Ok(Submission::Static(records))
    }
}

/// Writes every estimate, plus empty-angle rows for each id in `failed` that has no estimate.
pub fn format_submission(sub: &Submission, failed: &[String]) -> String {
    match sub {
        Submission::Static(records) => {
            let mut lines: BTreeMap<&str, String> = BTreeMap::new();
            for (id, d) in records {
                lines.insert(id, format!("{id},{},{}", fixed(d.azimuth()), fixed(d.elevation())));
            }
            for id in failed {
                lines.entry(id).or_insert_with(|| format!("{id},,"));
            }
            let mut s = format!("{STATIC_HEADER}\n");
            for l in lines.values() {
                let _ = writeln!(s, "{l}");
            }
            s
        }
        Submission::Flight(records) => {
            let mut lines: BTreeMap<&str, Vec<String>> = BTreeMap::new();
            for (id, pts) in records {
                let rows = pts
                    .iter()
                    .map(|(k, d)| format!("{id},{k},{},{}", fixed(d.azimuth()), fixed(d.elevation())))
                    .collect();
                lines.insert(id, rows);
            }
            for id in failed {
                lines.entry(id).or_insert_with(|| (0..FLIGHT_TIMESTAMPS).map(|k| format!("{id},{k},,")).collect());
            }
            let mut s = format!("{FLIGHT_SUBMISSION_HEADER}\n");
            for l in lines.values().flatten() {
                let _ = writeln!(s, "{l}");
            }
            s
        }
    }
}

pub fn read_submission(path: impl AsRef<Path>) -> Result<Submission> {
    parse_submission(&read_text(path.as_ref())?)
}

pub fn write_submission(sub: &Submission, failed: &[String], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_submission(sub, failed).as_bytes())
}

/// Task kind announced by a submission or ground-truth header.
pub fn kind_of(text: &str) -> TaskKind {
    let h = header_of(text);
    if h == FLIGHT_SUBMISSION_HEADER || h == FLIGHT_TRUTH_HEADER {
        TaskKind::Flight
    } else {
        TaskKind::Static
    }
}

// Trajectories and angular spectra

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    for ((t, d), c) in traj.timestamps().iter().zip(traj.directions()).zip(traj.confidences()) {
        let _ = writeln!(s, "{},{},{},{}", fixed(*t), fixed(d.azimuth()), fixed(d.elevation()), fixed(*c));
    }
    s
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let (mut ts, mut ds, mut cs) = (Vec::new(), Vec::new(), Vec::new());
    for (line, r) in rows(text, TRAJECTORY_HEADER)? {
        ts.push(finite(&r[0], "time", line)?);
        ds.push(direction(&r[1], &r[2], line)?);
        cs.push(number(&r[3], "confidence", line)?);
    }
    Ok(Trajectory::new(ts, ds, cs)?)
}

/// Masked grid points are written as `-inf`.
pub fn format_spectrum(directions: &[Direction], scores: &[f64]) -> String {
    let mut s = format!("{SPECTRUM_HEADER}\n");
    for (d, v) in directions.iter().zip(scores) {
        let score = if *v == MASKED { "-inf".to_string() } else { fixed(*v) };
        let _ = writeln!(s, "{},{},{score}", fixed(d.azimuth()), fixed(d.elevation()));
    }
    s
}

pub fn parse_spectrum(text: &str) -> Result<Vec<(Direction, f64)>> {
    rows(text, SPECTRUM_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let v = number(&r[2], "score", line)?;
            let v = if v == f64::NEG_INFINITY { MASKED } else { v };
            Ok((direction(&r[0], &r[1], line)?, v))
        })
        .collect()
}

// Geometry

/// Plain-text array description: one `speed_of_sound <m/s>` line and one `mic <x> <y> <z>`
/// line per microphone in channel order, coordinates in metres. `#` starts a comment.
pub fn format_geometry(geom: &ArrayGeometry) -> String {
    let mut s = String::from("# microphone positions in metres, array frame, channel order\n");
    let _ = writeln!(s, "speed_of_sound {}", geom.speed_of_sound());
    for p in geom.mic_positions() {
        let _ = writeln!(s, "mic {} {} {}", p[0], p[1], p[2]);
    }
    s
}

pub fn parse_geometry(text: &str) -> Result<ArrayGeometry> {
    let mut speed = None;
    let mut mics: Vec<Vec3> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "speed_of_sound" if fields.len() == 2 => {
                if speed.replace(finite(fields[1], "speed of sound", line)?).is_some() {
                    return Err(IoError::row(line, "speed of sound given twice"));
                }
            }
            "mic" if fields.len() == 4 => {
                let mut p = [0.0; 3];
                for (c, f) in p.iter_mut().zip(&fields[1..]) {
                    *c = finite(f, "coordinate", line)?;
                }
                mics.push(p);
            }
            _ => {
                return Err(IoError::row(
                    line,
                    format!("expected `speed_of_sound <c>` or `mic <x> <y> <z>`, got {content:?}"),
                ))
            }
        }
    }
    let speed = speed.ok_or_else(|| IoError::row(last_line, "missing speed_of_sound line"))?;
    Ok(ArrayGeometry::new(mics, speed)?)
}

pub fn read_geometry(path: impl AsRef<Path>) -> Result<ArrayGeometry> {
    parse_geometry(&read_text(path.as_ref())?)
}

pub fn write_geometry(geom: &ArrayGeometry, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_geometry(geom).as_bytes())
}

// Template banks are stored as JSON so that power spectra keep full precision.

pub fn parse_template_bank(text: &str) -> Result<TemplateBank> {
    let bank: TemplateBank =
        serde_json::from_str(text).map_err(|e| IoError::row(e.line() as u64, format!("template bank: {e}")))?;
    if !(bank.bin_hz() > 0.0) || !bank.bin_hz().is_finite() {
        return Err(IoError::row(1, format!("template bank: bin spacing {} Hz is invalid", bank.bin_hz())));
    }
    // Re-run the constructor checks that deserialization bypasses.
    Ok(TemplateBank::new(bank.templates().to_vec(), bank.bin_hz())?)
}

pub fn read_template_bank(path: impl AsRef<Path>) -> Result<TemplateBank> {
    parse_template_bank(&read_text(path.as_ref())?)
}

pub fn write_template_bank(bank: &TemplateBank, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string(bank).map_err(|e| IoError::Parse(e.to_string()))?;
    write_file(path.as_ref(), text.as_bytes())
}
