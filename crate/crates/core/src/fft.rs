//! Radix-2 FFT for power-of-two sizes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Precomputed radix-2 transform of a fixed power-of-two size.
#[derive(Debug, Clone)]
pub struct Fft {
    size: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::InvalidConfig(alloc::format!("FFT size {size} is not a power of two")));
        }
        let bits = size.trailing_zeros();
        let bitrev = (0..size).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        let twiddles = (0..size / 2).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / size as f64)).collect();
        Ok(Self { size, twiddles, bitrev })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of bins of a one-sided spectrum.
    pub fn half_len(&self) -> usize {
        self.size / 2 + 1
    }

    /// Forward transform in place, no scaling.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform in place, scaled by `1/N`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.size as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.size, "buffer length does not match FFT size");
        let n = self.size;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// One-sided spectrum of a real signal of exactly `size` samples.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        buf.truncate(self.half_len());
        buf
    }

    /// Real signal from a one-sided spectrum; negative frequencies are taken as the conjugate
    /// mirror and the imaginary parts of the DC and Nyquist bins are ignored.
    pub fn inverse_real(&self, half: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        self.fill_hermitian(half, &mut buf);
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Like [`Fft::inverse_real`] but reusing caller buffers.
    pub fn inverse_real_into(&self, half: &[Complex64], scratch: &mut [Complex64], out: &mut [f64]) {
        self.fill_hermitian(half, scratch);
        self.inverse(scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = c.re;
        }
    }

    fn fill_hermitian(&self, half: &[Complex64], buf: &mut [Complex64]) {
        let n = self.size;
        assert_eq!(half.len(), self.half_len(), "one-sided spectrum has wrong length");
        buf[0] = Complex64::new(half[0].re, 0.0);
        for k in 1..n / 2 {
            buf[k] = half[k];
            buf[n - k] = half[k].conj();
        }
        if n >= 2 {
            buf[n / 2] = Complex64::new(half[n / 2].re, 0.0);
        }
    }
}

/// Smallest power of two that is at least `n`.
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}
