use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Taps on each side of the centre tap.
const HALF_TAPS: i64 = 15;
const KAISER_BETA: f64 = 8.6;
const WINDOW_HALF_WIDTH: f64 = 16.0;

/// Modified Bessel function of the first kind, order 0 (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc taps for `frac` in `[0, 1)`; tap `m + 15` weights `input[t - n - m]`.
pub(crate) fn delay_taps(frac: f64) -> [f64; 31] {
    let norm = bessel_i0(KAISER_BETA);
    let mut taps = [0.0; 31];
    for (k, tap) in taps.iter_mut().enumerate() {
        let x = (k as i64 - HALF_TAPS) as f64 - frac;
        let r = x / WINDOW_HALF_WIDTH;
        *tap = if r.abs() >= 1.0 { 0.0 } else { sinc(x) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm };
    }
    taps
}

/// Adds `gain * input(t - delay)` to `out[t]` for `t` in `range`. Samples outside the input
/// are taken as zero.
pub(crate) fn add_delayed(input: &[f64], delay: f64, gain: f64, range: Range<usize>, out: &mut [f64]) {
    let n = delay.floor();
    let taps = delay_taps(delay - n);
    let n = n as i64;
    let len = input.len() as i64;
    for t in range {
        let base = t as i64 - n;
        let mut acc = 0.0;
        for (k, tap) in taps.iter().enumerate() {
            let j = base - (k as i64 - HALF_TAPS);
            if (0..len).contains(&j) {
                acc += tap * input[j as usize];
            }
        }
        out[t] += gain * acc;
    }
}

/// Delays a signal by a real number of samples using a 31-tap Kaiser-windowed sinc
/// (β = 8.6). Integer delays are exact shifts; samples shifted in from outside are zero.
pub fn fractional_delay(signal: &[f64], delay: f64) -> Result<Vec<f64>> {
    if !delay.is_finite() || delay.abs() * 4.0 >= signal.len() as f64 {
        return Err(Error::DelayTooLarge { delay, len: signal.len() });
    }
    let mut out = vec![0.0; signal.len()];
    add_delayed(signal, delay, 1.0, 0..signal.len(), &mut out);
    Ok(out)
}
