//! Short-time Fourier transform with square-root Hann analysis and
//! synthesis windows at 50% overlap, so that the squared windows sum to one.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PipelineError, Result};

pub const DEFAULT_WINDOW: usize = 1024;
pub const DEFAULT_HOP: usize = 512;

#[derive(Clone)]
pub struct Stft {
    window_len: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("window_len", &self.window_len)
            .field("hop", &self.hop)
            .finish()
    }
}

impl Stft {
    pub fn new(window_len: usize, hop: usize) -> Result<Self> {
        if window_len < 2 || !window_len.is_power_of_two() || hop * 2 != window_len {
            return Err(PipelineError::Config(format!(
                "window {window_len} with hop {hop} is not a supported overlap-add pair \
                 (power-of-two window, hop of half the window)"
            )));
        }
        let window = (0..window_len)
            .map(|i| (PI * i as f64 / window_len as f64).sin())
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            window_len,
            hop,
            window,
            forward: planner.plan_fft_forward(window_len),
            inverse: planner.plan_fft_inverse(window_len),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frames needed to cover `len` samples. Frame `k` starts at sample
    /// `(k - 1) · hop`.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop) + 1
    }

    /// Spectrum of frame `k` of `signal` (bins `0..=N/2`).
    pub fn analyze_frame(&self, signal: &[f64], k: usize, out: &mut [Complex64]) {
        let start = k as isize * self.hop as isize - self.hop as isize;
        let mut buf: Vec<Complex64> = (0..self.window_len)
            .map(|i| {
                let t = start + i as isize;
                let x = if t >= 0 && (t as usize) < signal.len() {
                    signal[t as usize]
                } else {
                    0.0
                };
                Complex64::new(x * self.window[i], 0.0)
            })
            .collect();
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..self.bins()]);
    }

    /// Windowed inverse of one half-spectrum, overlap-added into `signal`.
    pub fn synthesize_frame(&self, spectrum: &[Complex64], k: usize, signal: &mut [f64]) {
        let n = self.window_len;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..self.bins()].copy_from_slice(spectrum);
        for i in 1..n / 2 {
            buf[n - i] = spectrum[i].conj();
        }
        // a real signal has real DC and Nyquist bins
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        self.inverse.process(&mut buf);
        let start = k as isize * self.hop as isize - self.hop as isize;
        let scale = 1.0 / n as f64;
        for (i, z) in buf.iter().enumerate() {
            let t = start + i as isize;
            if t >= 0 && (t as usize) < signal.len() {
                signal[t as usize] += z.re * scale * self.window[i];
            }
        }
    }

    pub fn forward(&self, signal: &[f64]) -> Vec<Vec<Complex64>> {
        (0..self.frame_count(signal.len()))
            .map(|k| {
                let mut out = vec![Complex64::new(0.0, 0.0); self.bins()];
                self.analyze_frame(signal, k, &mut out);
                out
            })
            .collect()
    }

    pub fn inverse(&self, frames: &[Vec<Complex64>], len: usize) -> Vec<f64> {
        let mut signal = vec![0.0; len];
        for (k, f) in frames.iter().enumerate() {
            self.synthesize_frame(f, k, &mut signal);
        }
        signal
    }
}
