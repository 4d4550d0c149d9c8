//! Competition scoring: one point per correctly localized static file or flight timestamp.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::geometry::{great_circle_distance, Direction};
use crate::sim::{TaskKind, FLIGHT_TIMESTAMPS};
use crate::{Error, Result};

/// An estimate is correct when its great-circle error is strictly below this, degrees.
pub const CORRECT_THRESHOLD_DEG: f64 = 10.0;

pub fn is_correct(estimate: &Direction, truth: &Direction) -> bool {
    great_circle_distance(estimate, truth) < CORRECT_THRESHOLD_DEG
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroundTruth {
    Static(BTreeMap<String, Direction>),
    /// `(timestamp_s, direction)` per timestamp index.
    Flight(BTreeMap<String, Vec<(f64, Direction)>>),
}

impl GroundTruth {
    pub fn kind(&self) -> TaskKind {
        match self {
            Self::Static(_) => TaskKind::Static,
            Self::Flight(_) => TaskKind::Flight,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Static(r) => r.len(),
            Self::Flight(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<&str> {
        match self {
            Self::Static(r) => r.keys().map(String::as_str).collect(),
            Self::Flight(r) => r.keys().map(String::as_str).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Flight(records) = self {
            for (id, points) in records {
                if points.len() != FLIGHT_TIMESTAMPS {
                    return Err(Error::ShapeMismatch(format!(
                        "recording {id} has {} timestamps, expected {FLIGHT_TIMESTAMPS}",
                        points.len()
                    )));
                }
                if points.iter().any(|(t, _)| !t.is_finite()) || points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::NonIncreasingTimestamps);
                }
            }
        }
        Ok(())
    }
}

/// Estimated directions. Missing entries (and NaN estimates, which parsers map to missing)
/// score zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Submission {
    Static(BTreeMap<String, Direction>),
    /// Directions keyed by timestamp index.
    Flight(BTreeMap<String, BTreeMap<usize, Direction>>),
}

impl Submission {
    pub fn kind(&self) -> TaskKind {
        match self {
            Self::Static(_) => TaskKind::Static,
            Self::Flight(_) => TaskKind::Flight,
        }
    }

    pub fn empty(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Static => Self::Static(BTreeMap::new()),
            TaskKind::Flight => Self::Flight(BTreeMap::new()),
        }
    }

    /// Submission holding exactly the ground truth.
    pub fn from_truth(gt: &GroundTruth) -> Self {
        match gt {
            GroundTruth::Static(r) => Self::Static(r.clone()),
            GroundTruth::Flight(r) => Self::Flight(
                r.iter().map(|(id, pts)| (id.clone(), pts.iter().map(|p| p.1).enumerate().collect())).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingScore {
    pub points: usize,
    pub max_points: usize,
    /// Great-circle error per scored item, degrees; `None` where the estimate is missing.
    pub errors_deg: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub kind: TaskKind,
    pub total: usize,
    pub max: usize,
    pub recordings: BTreeMap<String, RecordingScore>,
    /// Submitted ids absent from the ground truth; they are ignored.
    pub unknown_ids: Vec<String>,
}

impl ScoreReport {
    pub fn fraction(&self) -> f64 {
        if self.max == 0 {
            0.0
        } else {
            self.total as f64 / self.max as f64
        }
    }
}

fn item(estimate: Option<&Direction>, truth: &Direction) -> (usize, Option<f64>) {
    match estimate {
        Some(e) => (usize::from(is_correct(e, truth)), Some(great_circle_distance(e, truth))),
        None => (0, None),
    }
}

fn unknown<V>(sub: &BTreeMap<String, V>, known: impl Fn(&str) -> bool) -> Vec<String> {
    let ids: Vec<String> = sub.keys().filter(|id| !known(id)).cloned().collect();
    if !ids.is_empty() {
        warn!("{} submitted recordings are not in the ground truth", ids.len());
    }
    ids
}

/// One point per static file localized within the threshold.
pub fn score_static(sub: &Submission, gt: &GroundTruth) -> Result<ScoreReport> {
    let (Submission::Static(est), GroundTruth::Static(truth)) = (sub, gt) else {
        return Err(Error::TaskKindMismatch);
    };
    let recordings: BTreeMap<String, RecordingScore> = truth
        .iter()
        .map(|(id, t)| {
            let (points, err) = item(est.get(id), t);
            (id.clone(), RecordingScore { points, max_points: 1, errors_deg: alloc::vec![err] })
        })
        .collect();
    Ok(ScoreReport {
        kind: TaskKind::Static,
        total: recordings.values().map(|r| r.points).sum(),
        max: truth.len(),
        recordings,
        unknown_ids: unknown(est, |id| truth.contains_key(id)),
    })
}

/// One point per flight timestamp localized within the threshold.
pub fn score_flight(sub: &Submission, gt: &GroundTruth) -> Result<ScoreReport> {
    let (Submission::Flight(est), GroundTruth::Flight(truth)) = (sub, gt) else {
        return Err(Error::TaskKindMismatch);
    };
    gt.validate()?;
    let recordings: BTreeMap<String, RecordingScore> = truth
        .iter()
        .map(|(id, pts)| {
            let e = est.get(id);
            let scored: Vec<(usize, Option<f64>)> =
                pts.iter().enumerate().map(|(k, (_, t))| item(e.and_then(|m| m.get(&k)), t)).collect();
            (
                id.clone(),
                RecordingScore {
                    points: scored.iter().map(|s| s.0).sum(),
                    max_points: pts.len(),
                    errors_deg: scored.into_iter().map(|s| s.1).collect(),
                },
            )
        })
        .collect();
    Ok(ScoreReport {
        kind: TaskKind::Flight,
        total: recordings.values().map(|r| r.points).sum(),
        max: truth.values().map(Vec::len).sum(),
        recordings,
        unknown_ids: unknown(est, |id| truth.contains_key(id)),
    })
}

/// Scores with the rule matching the ground truth's task kind.
pub fn score(sub: &Submission, gt: &GroundTruth) -> Result<ScoreReport> {
    match gt.kind() {
        TaskKind::Static => score_static(sub, gt),
        TaskKind::Flight => score_flight(sub, gt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use alloc::vec;
    use proptest::prelude::*;

    /// Direction at exactly `angle` degrees from `d` (rotating within the meridian plane).
    fn offset(d: &Direction, angle: f64) -> Direction {
        let el = d.elevation() + angle;
        if el <= 90.0 {
            Direction::new(d.azimuth(), el).unwrap()
        } else {
            Direction::wrapped(d.azimuth() + 180.0, 180.0 - el)
        }
    }

    fn static_gt(n: usize) -> GroundTruth {
        GroundTruth::Static(
            (0..n)
                .map(|i| {
                    (
                        format!("rec{i:04}"),
                        Direction::new(-180.0 + (i * 7 % 360) as f64, ((i * 13) % 160) as f64 - 80.0).unwrap(),
                    )
                })
                .collect(),
        )
    }

    fn flight_gt(n: usize) -> GroundTruth {
        GroundTruth::Flight(
            (0..n)
                .map(|i| {
                    let pts = (0..15)
                        .map(|k| {
                            (
                                0.25 + 0.25 * k as f64,
                                Direction::new(-170.0 + (i * 9 + k) as f64, (k as f64) - 7.0).unwrap(),
                            )
                        })
                        .collect();
                    (format!("rec{i:04}"), pts)
                })
                .collect(),
        )
    }

    #[test]
    fn threshold_is_strict() {
        let t = Direction::new(0.0, 0.0).unwrap();
        assert!(is_correct(&t, &t));
        assert!(!is_correct(&Direction::new(10.0, 0.0).unwrap(), &t));
        assert!(is_correct(&Direction::new(9.99, 0.0).unwrap(), &t));
        assert_eq!(great_circle_distance(&Direction::new(0.0, 10.0).unwrap(), &t), 10.0);
        assert!(!is_correct(&Direction::new(0.0, 10.0).unwrap(), &t));
    }

    #[test]
    fn perfect_and_empty_submissions() {
        let gt = static_gt(300);
        let r = score_static(&Submission::from_truth(&gt), &gt).unwrap();
        assert_eq!((r.total, r.max), (300, 300));
        assert_eq!(score_static(&Submission::empty(TaskKind::Static), &gt).unwrap().total, 0);
        let fgt = flight_gt(36);
        let r = score_flight(&Submission::from_truth(&fgt), &fgt).unwrap();
        assert_eq!((r.total, r.max), (540, 540));
        assert_eq!(score_flight(&Submission::empty(TaskKind::Flight), &fgt).unwrap().total, 0);
        assert_eq!(score_flight(&Submission::from_truth(&gt), &fgt), Err(Error::TaskKindMismatch));
        assert_eq!(score_static(&Submission::from_truth(&fgt), &gt), Err(Error::TaskKindMismatch));
    }

    #[test]
    fn constructed_errors() {
        let gt = static_gt(10);
        let GroundTruth::Static(truth) = &gt else { unreachable!() };
        let est = truth
            .iter()
            .enumerate()
            .map(|(i, (id, d))| (id.clone(), offset(d, if i < 7 { 5.0 } else { 12.0 })))
            .collect();
        let r = score_static(&Submission::Static(est), &gt).unwrap();
        assert_eq!(r.total, 7);
        let errs: Vec<f64> = r.recordings.values().map(|s| s.errors_deg[0].unwrap()).collect();
        assert_eq!(errs.iter().filter(|e| (**e - 12.0).abs() < 1e-9).count(), 3);

        let fgt = flight_gt(1);
        let GroundTruth::Flight(ft) = &fgt else { unreachable!() };
        let (id, pts) = ft.iter().next().unwrap();
        let est = pts.iter().enumerate().map(|(k, (_, d))| (k, offset(d, if k < 9 { 3.0 } else { 45.0 }))).collect();
        let mut sub = BTreeMap::new();
        sub.insert(id.clone(), est);
        sub.insert("stray".into(), BTreeMap::new());
        let r = score_flight(&Submission::Flight(sub), &fgt).unwrap();
        assert_eq!((r.total, r.max), (9, 15));
        assert_eq!(r.unknown_ids, vec![String::from("stray")]);
    }

    #[test]
    fn partial_submission_counts_present_rows() {
        let gt = static_gt(5);
        let Submission::Static(mut est) = Submission::from_truth(&gt) else { unreachable!() };
        est.remove("rec0002");
        let r = score_static(&Submission::Static(est), &gt).unwrap();
        assert_eq!((r.total, r.max), (4, 5));
        assert_eq!(r.recordings["rec0002"].errors_deg, vec![None]);
    }

    #[test]
    fn flight_truth_shape_is_validated() {
        let mut fgt = flight_gt(1);
        if let GroundTruth::Flight(r) = &mut fgt {
            r.values_mut().next().unwrap().pop();
        }
        assert!(score_flight(&Submission::empty(TaskKind::Flight), &fgt).is_err());
    }

    fn unit(v: Vec3) -> Direction {
        Direction::from_vector(&v)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn scoring_is_monotone(
            truths in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..12),
            errors in prop::collection::vec(0.0f64..30.0, 12),
            which in 0usize..12,
            shrink in 0.0f64..1.0,
        ) {
            let truth: BTreeMap<String, Direction> = truths
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("r{i}"), unit([v.0, v.1, v.2 + 3.0])))
                .collect();
            let gt = GroundTruth::Static(truth.clone());
            let est = |errs: &[f64]| -> Submission {
                Submission::Static(truth.iter().zip(errs).map(|((id, d), e)| (id.clone(), offset(d, *e))).collect())
            };
            let before = score_static(&est(&errors), &gt).unwrap();
            let mut better = errors.clone();
            let k = which % truth.len();
            better[k] *= shrink;
            let after = score_static(&est(&better), &gt).unwrap();
            prop_assert!(after.total >= before.total);
            prop_assert!(before.total <= before.max);
            prop_assert_eq!(score_static(&Submission::from_truth(&gt), &gt).unwrap().total, gt.len());
        }
    }
}
