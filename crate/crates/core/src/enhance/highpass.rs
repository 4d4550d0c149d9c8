use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::signal::MultichannelRecording;
use crate::{Error, Result};

/// Second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn highpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 + cos) / 2.0 / a0;
        Self { b: [b0, -2.0 * b0, b0], a: [-2.0 * cos / a0, (1.0 - alpha) / a0] }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filter state for which a constant input `x` yields a constant output.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let s2 = self.b[2] * x - self.a[1] * y;
        let s1 = self.b[1] * x - self.a[0] * y + s2;
        [s1, s2]
    }

    fn run(&self, data: &mut [f64], mut state: [f64; 2]) {
        for x in data.iter_mut() {
            let input = *x;
            let y = self.b[0] * input + state[0];
            state[0] = self.b[1] * input - self.a[0] * y + state[1];
            state[1] = self.b[2] * input - self.a[1] * y;
            *x = y;
        }
    }
}

/// Fourth-order Butterworth high-pass as two biquads, applied forward and backward.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthHighpass {
    sections: [Biquad; 2],
    pad: usize,
}

impl ButterworthHighpass {
    pub fn new(cutoff: f64, sample_rate: f64) -> Result<Self> {
        if !(cutoff > 0.0) || !(cutoff < sample_rate / 2.0) {
            return Err(Error::InvalidCutoff(cutoff));
        }
        // Pole-pair quality factors of a 4th-order Butterworth prototype.
        let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
        let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
        let sections = [Biquad::highpass(cutoff, sample_rate, q1), Biquad::highpass(cutoff, sample_rate, q2)];
        let pad = (3.0 * sample_rate / cutoff).ceil() as usize;
        Ok(Self { sections, pad })
    }

    /// Magnitude of the zero-phase (forward-backward) response at `freq`.
    pub fn magnitude(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq / sample_rate;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let single: f64 = self
            .sections
            .iter()
            .map(|s| ((z1 * s.b[1] + z2 * s.b[2] + s.b[0]) / (z1 * s.a[0] + z2 * s.a[1] + 1.0)).norm())
            .product();
        single * single
    }

    fn pass(&self, data: &mut [f64]) {
        let mut level = data[0];
        for s in &self.sections {
            let state = s.steady_state(level);
            level *= s.dc_gain();
            s.run(data, state);
        }
    }

    /// Zero-phase filtering with odd-symmetric edge extension.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.pass(&mut ext);
        ext.reverse();
        self.pass(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase high-pass of every channel.
pub fn highpass(recording: &MultichannelRecording, cutoff: f64) -> Result<MultichannelRecording> {
    let filter = ButterworthHighpass::new(cutoff, recording.sample_rate())?;
    let channels = recording.channels().iter().map(|c| filter.filter(c)).collect();
    MultichannelRecording::with_channel_map(channels, recording.sample_rate(), recording.channel_map().to_vec())
}
