//! Array geometry, far-field propagation and direction grids.
//!
//! Azimuth is measured counterclockwise from the +x axis seen from +z, elevation is positive
//! towards +z. Both are in degrees.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Angle between two vectors in degrees, via `atan2(|a×b|, a·b)`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b)).to_degrees()
}

/// Moves `from` towards `to` along the great circle by `fraction` of their angle.
pub(crate) fn slerp(from: &Vec3, to: &Vec3, fraction: f64) -> Vec3 {
    let theta = angle_between(from, to).to_radians();
    if theta < 1e-15 {
        return *from;
    }
    let along = dot(from, to);
    let mut w = [to[0] - along * from[0], to[1] - along * from[1], to[2] - along * from[2]];
    let mut n = norm(&w);
    if n < 1e-12 {
        // Antipodal: any great circle works, take one through the axis least aligned with `from`.
        let k = (0..3).fold(0, |b, k| if from[k].abs() < from[b].abs() { k } else { b });
        let mut axis = [0.0; 3];
        axis[k] = 1.0;
        w = cross(&cross(from, &axis), from);
        n = norm(&w);
    }
    let (s, c) = (fraction * theta).sin_cos();
    let v = [c * from[0] + s * w[0] / n, c * from[1] + s * w[1] / n, c * from[2] + s * w[2] / n];
    let len = norm(&v);
    [v[0] / len, v[1] / len, v[2] / len]
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirection")]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirection {
    azimuth: f64,
    elevation: f64,
}

impl TryFrom<RawDirection> for Direction {
    type Error = Error;

    fn try_from(raw: RawDirection) -> Result<Self> {
        Self::new(raw.azimuth, raw.elevation)
    }
}

impl Direction {
    /// Azimuth must lie in `[-180, 180)` and elevation in `[-90, 90]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(-180.0..180.0).contains(&azimuth) || !(-90.0..=90.0).contains(&elevation) {
            return Err(Error::InvalidDirection { azimuth, elevation });
        }
        Ok(Self { azimuth, elevation })
    }

    /// Wraps azimuth into `[-180, 180)` and clamps elevation. Panics on non-finite input.
    pub fn wrapped(azimuth: f64, elevation: f64) -> Self {
        assert!(azimuth.is_finite() && elevation.is_finite(), "direction must be finite");
        if (-180.0..180.0).contains(&azimuth) {
            return Self { azimuth, elevation: elevation.clamp(-90.0, 90.0) };
        }
        let shifted = azimuth + 180.0;
        let mut az = shifted - 360.0 * (shifted / 360.0).floor() - 180.0;
        if az >= 180.0 {
            az -= 360.0;
        }
        Self { azimuth: az, elevation: elevation.clamp(-90.0, 90.0) }
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: &Vec3) -> Self {
        let horizontal = v[0].hypot(v[1]);
        let elevation = v[2].atan2(horizontal).to_degrees();
        let azimuth = if horizontal == 0.0 { 0.0 } else { v[1].atan2(v[0]).to_degrees() };
        Self::wrapped(azimuth, elevation)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }
}

/// Great-circle distance in degrees, in `[0, 180]`.
pub fn great_circle_distance(a: &Direction, b: &Direction) -> f64 {
    angle_between(&a.unit_vector(), &b.unit_vector())
}

/// Microphone positions in the array frame (metres) and the speed of sound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    mic_positions: Vec<Vec3>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<Vec3>, speed_of_sound: f64) -> Result<Self> {
        if mic_positions.len() < 2 {
            return Err(Error::InvalidGeometry("at least two microphones are required".into()));
        }
        if !(speed_of_sound > 0.0) || !speed_of_sound.is_finite() {
            return Err(Error::InvalidGeometry(format!("speed of sound {speed_of_sound} must be positive")));
        }
        if mic_positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("microphone coordinates must be finite".into()));
        }
        for i in 0..mic_positions.len() {
            for j in i + 1..mic_positions.len() {
                if mic_positions[i] == mic_positions[j] {
                    return Err(Error::InvalidGeometry(format!("microphones {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { mic_positions, speed_of_sound })
    }

    /// Eight microphones on the corners of a cube centred at the origin. Microphone `k` has
    /// coordinate signs given by bits 0 (x), 1 (y) and 2 (z) of `k`.
    pub fn cube(edge: f64, speed_of_sound: f64) -> Result<Self> {
        let h = edge / 2.0;
        let mics = (0..8)
            .map(|k| {
                let s = |bit: usize| if k >> bit & 1 == 1 { h } else { -h };
                [s(0), s(1), s(2)]
            })
            .collect();
        Self::new(mics, speed_of_sound)
    }

    /// 10 cm cube at 343 m/s.
    pub fn default_cube() -> Self {
        Self::cube(0.10, DEFAULT_SPEED_OF_SOUND).expect("valid default geometry")
    }

    pub fn mic_count(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn mic_positions(&self) -> &[Vec3] {
        &self.mic_positions
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn mic_distance(&self, i: usize, j: usize) -> f64 {
        norm(&sub(&self.mic_positions[i], &self.mic_positions[j]))
    }

    /// All unordered pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.mic_count();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.mic_count() {
            Err(Error::InvalidMicIndex { index, count: self.mic_count() })
        } else {
            Ok(())
        }
    }

    pub(crate) fn tdoa_unit(&self, u: &Vec3, i: usize, j: usize) -> f64 {
        dot(u, &sub(&self.mic_positions[i], &self.mic_positions[j])) / self.speed_of_sound
    }
}

/// Far-field delay of microphone `j` relative to microphone `i`, in seconds.
pub fn tdoa(dir: &Direction, geom: &ArrayGeometry, i: usize, j: usize) -> Result<f64> {
    geom.check_index(i)?;
    geom.check_index(j)?;
    Ok(geom.tdoa_unit(&dir.unit_vector(), i, j))
}

/// Plane-wave steering vector with microphone 0 as phase reference.
pub fn steering_vector(dir: &Direction, geom: &ArrayGeometry, freq: f64) -> Vec<Complex64> {
    steering_vector_unit(&dir.unit_vector(), geom, freq)
}

pub(crate) fn steering_vector_unit(u: &Vec3, geom: &ArrayGeometry, freq: f64) -> Vec<Complex64> {
    (0..geom.mic_count()).map(|k| Complex64::from_polar(1.0, -2.0 * PI * freq * geom.tdoa_unit(u, 0, k))).collect()
}

/// Candidate directions for grid searches.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    directions: Vec<Direction>,
    units: Vec<Vec3>,
    az_step: f64,
    el_step: f64,
}

impl DirectionGrid {
    /// Arbitrary list of directions; steps are informational.
    pub fn from_directions(directions: Vec<Direction>, az_step: f64, el_step: f64) -> Self {
        let units = directions.iter().map(Direction::unit_vector).collect();
        Self { directions, units, az_step, el_step }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn get(&self, index: usize) -> Direction {
        self.directions[index]
    }

    pub fn unit_vectors(&self) -> &[Vec3] {
        &self.units
    }

    pub fn az_step(&self) -> f64 {
        self.az_step
    }

    pub fn el_step(&self) -> f64 {
        self.el_step
    }

    /// Indices of grid points within `radius` degrees of `center`.
    pub fn indices_within(&self, center: &Direction, radius: f64) -> Vec<usize> {
        let c = center.unit_vector();
        self.units.iter().enumerate().filter(|(_, u)| angle_between(u, &c) <= radius).map(|(i, _)| i).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            directions: indices.iter().map(|&i| self.directions[i]).collect(),
            units: indices.iter().map(|&i| self.units[i]).collect(),
            az_step: self.az_step,
            el_step: self.el_step,
        }
    }
}

fn divides(span: f64, step: f64) -> Option<usize> {
    let count = span / step;
    let rounded = count.round();
    if (count - rounded).abs() <= 1e-9 * count.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Regular grid, elevation-major: all azimuths of the lowest elevation come first.
pub fn build_grid(az_step: f64, el_step: f64, el_range: (f64, f64)) -> Result<DirectionGrid> {
    let (lo, hi) = el_range;
    if !(az_step > 0.0) || !(el_step > 0.0) || !az_step.is_finite() || !el_step.is_finite() {
        return Err(Error::InvalidStep(format!("steps {az_step}, {el_step} must be positive")));
    }
    if !(-90.0..=90.0).contains(&lo) || !(-90.0..=90.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidStep(format!("elevation range [{lo}, {hi}] is invalid")));
    }
    let n_az = divides(360.0, az_step)
        .ok_or_else(|| Error::InvalidStep(format!("azimuth step {az_step} does not divide 360")))?;
    let n_el = divides(hi - lo, el_step)
        .ok_or_else(|| Error::InvalidStep(format!("elevation step {el_step} does not divide the range")))?
        + 1;
    let mut directions = Vec::with_capacity(n_az * n_el);
    for e in 0..n_el {
        let el = (lo + e as f64 * el_step).min(hi);
        for a in 0..n_az {
            let az = -180.0 + a as f64 * az_step;
            directions.push(Direction::new(az, el)?);
        }
    }
    Ok(DirectionGrid::from_directions(directions, az_step, el_step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn d(az: f64, el: f64) -> Direction {
        Direction::new(az, el).unwrap()
    }

    fn pair() -> ArrayGeometry {
        ArrayGeometry::new(vec![[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0]], 343.0).unwrap()
    }

    #[test]
    fn great_circle_examples() {
        assert_eq!(great_circle_distance(&d(30.0, 20.0), &d(30.0, 20.0)), 0.0);
        assert!((great_circle_distance(&d(0.0, 0.0), &d(0.0, 90.0)) - 90.0).abs() < 1e-12);
        assert!((great_circle_distance(&d(45.0, 10.0), &d(-135.0, -10.0)) - 180.0).abs() < 1e-9);
    }

    #[test]
    fn tdoa_examples() {
        let g = pair();
        assert!(tdoa(&d(90.0, 0.0), &g, 0, 1).unwrap().abs() < 1e-18);
        let t = tdoa(&d(0.0, 0.0), &g, 0, 1).unwrap();
        assert!((t - 0.1 / 343.0).abs() < 1e-15);
        assert_eq!(tdoa(&d(0.0, 0.0), &g, 0, 2), Err(Error::InvalidMicIndex { index: 2, count: 2 }));
    }

    #[test]
    fn tdoa_matches_distant_point_source() {
        // Exact path-length difference from a distant point source.
        let check = |g: &ArrayGeometry, dir: Direction, range: f64| {
            let u = dir.unit_vector();
            let src = [range * u[0], range * u[1], range * u[2]];
            for (i, j) in g.pairs() {
                let ti = norm(&sub(&src, &g.mic_positions()[i])) / 343.0;
                let tj = norm(&sub(&src, &g.mic_positions()[j])) / 343.0;
                let plane = tdoa(&dir, g, i, j).unwrap();
                assert!((plane - (tj - ti)).abs() < 1e-7);
            }
        };
        check(&pair(), d(0.0, 0.0), 100.0);
        check(&pair(), d(35.0, -20.0), 100.0);
        for &(az, el) in &[(0.0, 0.0), (40.0, 10.0), (-120.0, -35.0), (170.0, 80.0)] {
            check(&ArrayGeometry::default_cube(), d(az, el), 1000.0);
        }
    }

    #[test]
    fn steering_examples() {
        let g = pair();
        assert!(steering_vector(&d(10.0, 5.0), &g, 0.0).iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        let v = steering_vector(&d(0.0, 0.0), &g, 1000.0);
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
        let expected = 2.0 * PI * 1000.0 * (0.1 / 343.0);
        let diff = (v[0] * v[1].conj()).arg();
        assert!((diff - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(build_grid(90.0, 45.0, (-90.0, 90.0)).unwrap().len(), 20);
        assert_eq!(build_grid(1.0, 1.0, (-90.0, 90.0)).unwrap().len(), 65160);
        assert_eq!(build_grid(5.0, 5.0, (-90.0, 90.0)).unwrap().len(), 2664);
        assert!(matches!(build_grid(7.0, 5.0, (-90.0, 90.0)), Err(Error::InvalidStep(_))));
        assert!(matches!(build_grid(5.0, 0.0, (-90.0, 90.0)), Err(Error::InvalidStep(_))));
        let g = build_grid(10.0, 10.0, (-30.0, 60.0)).unwrap();
        assert_eq!(g.get(0), d(-180.0, -30.0));
        assert_eq!(g.get(36), d(-180.0, -20.0));
        for dir in g.directions() {
            assert!(Direction::new(dir.azimuth(), dir.elevation()).is_ok());
            assert!((norm(&dir.unit_vector()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_validation_and_wrapping() {
        assert!(Direction::new(180.0, 0.0).is_err());
        assert!(Direction::new(0.0, 90.5).is_err());
        assert_eq!(Direction::wrapped(190.0, 0.0).azimuth(), -170.0);
        assert_eq!(Direction::wrapped(-180.0, 0.0).azimuth(), -180.0);
        let v = d(123.0, -41.0).unit_vector();
        let back = Direction::from_vector(&v);
        assert!((back.azimuth() - 123.0).abs() < 1e-9 && (back.elevation() + 41.0).abs() < 1e-9);
    }

    fn arb_dir() -> impl Strategy<Value = Direction> {
        (-180.0f64..180.0, -90.0f64..=90.0).prop_map(|(a, e)| Direction::new(a, e).unwrap())
    }

    fn rotate(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
        // Rodrigues' formula, axis assumed unit.
        let (s, c) = angle.sin_cos();
        let kxv = cross(axis, v);
        let kdv = dot(axis, v);
        [
            v[0] * c + kxv[0] * s + axis[0] * kdv * (1.0 - c),
            v[1] * c + kxv[1] * s + axis[1] * kdv * (1.0 - c),
            v[2] * c + kxv[2] * s + axis[2] * kdv * (1.0 - c),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn great_circle_is_a_metric(a in arb_dir(), b in arb_dir(), c in arb_dir()) {
            let ab = great_circle_distance(&a, &b);
            prop_assert!((0.0..=180.0).contains(&ab));
            prop_assert!((ab - great_circle_distance(&b, &a)).abs() < 1e-9);
            prop_assert!(great_circle_distance(&a, &a) < 1e-9);
            let ac = great_circle_distance(&a, &c);
            let cb = great_circle_distance(&c, &b);
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn tdoa_bounded_and_antisymmetric(dir in arb_dir()) {
            let g = ArrayGeometry::default_cube();
            for (i, j) in g.pairs() {
                let t = tdoa(&dir, &g, i, j).unwrap();
                prop_assert!((t + tdoa(&dir, &g, j, i).unwrap()).abs() < 1e-18);
                prop_assert!(t.abs() <= g.mic_distance(i, j) / g.speed_of_sound() + 1e-15);
            }
        }

        #[test]
        fn steering_has_unit_modulus(dir in arb_dir(), freq in 0.0f64..20000.0) {
            for c in steering_vector(&dir, &ArrayGeometry::default_cube(), freq) {
                prop_assert!((c.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn tdoa_rotation_invariant(dir in arb_dir(), axis_dir in arb_dir(), angle in -PI..PI) {
            let g = ArrayGeometry::default_cube();
            let axis = axis_dir.unit_vector();
            let mics: Vec<Vec3> = g.mic_positions().iter().map(|m| rotate(m, &axis, angle)).collect();
            let rotated = ArrayGeometry::new(mics, g.speed_of_sound()).unwrap();
            let u = rotate(&dir.unit_vector(), &axis, angle);
            for (i, j) in g.pairs() {
                let a = g.tdoa_unit(&dir.unit_vector(), i, j);
                let b = rotated.tdoa_unit(&u, i, j);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
