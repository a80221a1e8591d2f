//! Real-to-half-spectrum transforms along the periodic direction.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fourier {
    pub nx: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("nx", &self.nx).finish()
    }
}

impl Fourier {
    pub fn new(nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { nx, forward: planner.plan_fft_forward(nx), inverse: planner.plan_fft_inverse(nx) }
    }

    /// Number of retained modes `0..=nx/2`.
    pub fn modes(&self) -> usize {
        self.nx / 2 + 1
    }

    /// Unnormalized DFT of one row, modes `0..=nx/2`, written with stride
    /// `stride` starting at `out[offset]`.
    pub fn forward_row(&self, row: &[f64], buf: &mut [Complex64], out: &mut [Complex64], offset: usize, stride: usize) {
        for (b, &r) in buf.iter_mut().zip(row) {
            *b = Complex64::new(r, 0.0);
        }
        self.forward.process(buf);
        for k in 0..self.modes() {
            out[offset + k * stride] = buf[k];
        }
    }

    /// Inverse of [`Self::forward_row`], with the Hermitian extension and the
    /// Nyquist mode taken as a real cosine.
    pub fn inverse_row(&self, spec: &[Complex64], offset: usize, stride: usize, buf: &mut [Complex64], row: &mut [f64]) {
        let nx = self.nx;
        let half = nx / 2;
        for k in 0..=half {
            buf[k] = spec[offset + k * stride];
        }
        buf[0].im = 0.0;
        buf[half].im = 0.0;
        for k in 1..half {
            buf[nx - k] = buf[k].conj();
        }
        self.inverse.process(buf);
        let scale = 1.0 / nx as f64;
        for (r, b) in row.iter_mut().zip(buf.iter()) {
            *r = b.re * scale;
        }
    }

    /// Spectral field laid out `[k * ny + m]` from a physical field laid out
    /// `[m * nx + j]`.
    pub fn to_spectral(&self, field: &[f64], ny: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.modes() * ny];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        for m in 0..ny {
            self.forward_row(&field[m * self.nx..(m + 1) * self.nx], &mut buf, &mut out, m, ny);
        }
        out
    }

    pub fn to_physical(&self, spec: &[Complex64], ny: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * ny];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        for m in 0..ny {
            self.inverse_row(spec, m, ny, &mut buf, &mut out[m * self.nx..(m + 1) * self.nx]);
        }
        out
    }

    /// Spectral coefficients of a single periodic row.
    pub fn row_spectrum(&self, row: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.modes()];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        self.forward_row(row, &mut buf, &mut out, 0, 1);
        out
    }
}
