//! ambix files: ACN channel order, SN3D real harmonics.
//!
//! A channel value `a_i` is the plane-wave gain of an SN3D-encoded signal.
//! The orthonormal real coefficient is `a_i · sqrt((2n+1)/4π)`, which makes a
//! plane wave from `u` the truncated delta at `u`. The internal complex
//! coefficients are `B = γ / g` with `γ` the complex form of those real
//! coefficients.

use std::f64::consts::PI;
use std::path::Path;

use ambi_emph::emphasis::{apply_g, remove_g};
use ambi_emph::sh::{complex_from_real, degree_for_len, degree_order, num_coeffs, real_from_complex};
use ambi_emph::{Basis, Kind, ShVector};
use hound::{SampleFormat, WavSpec, WavWriter};
use num_complex::Complex64;

use crate::error::{PipelineError, Result};

/// Interleaved multichannel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbixAudio {
    sample_rate: u32,
    degree: usize,
    data: Vec<f32>,
}

impl AmbixAudio {
    pub fn new(sample_rate: u32, channels: usize, data: Vec<f32>) -> Result<Self> {
        let degree = degree_for_len(channels)
            .ok_or_else(|| PipelineError::Config(format!("{channels} channels is not a full ambisonics order")))?;
        if !data.len().is_multiple_of(channels) {
            return Err(PipelineError::Config(format!(
                "{} samples do not fill whole {channels}-channel frames",
                data.len()
            )));
        }
        Ok(Self {
            sample_rate,
            degree,
            data,
        })
    }

    pub fn silent(sample_rate: u32, degree: usize, frames: usize) -> Self {
        Self {
            sample_rate,
            degree,
            data: vec![0.0; frames * num_coeffs(degree)],
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn channels(&self) -> usize {
        num_coeffs(self.degree)
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.channels()
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let c = self.channels();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(self.channels()).copied().collect()
    }

    /// First `(degree+1)²` channels.
    pub fn truncated(&self, degree: usize) -> Self {
        let (from, to) = (self.channels(), num_coeffs(degree));
        let mut data = vec![0.0; self.frames() * to];
        for (src, dst) in self.data.chunks_exact(from).zip(data.chunks_exact_mut(to)) {
            let k = from.min(to);
            dst[..k].copy_from_slice(&src[..k]);
        }
        Self {
            sample_rate: self.sample_rate,
            degree,
            data,
        }
    }
}

/// SN3D channel value → orthonormal real coefficient.
pub fn sn3d_scale(n: usize) -> f64 {
    ((2 * n + 1) as f64 / (4.0 * PI)).sqrt()
}

/// File-convention channel values (possibly complex STFT bins) → internal
/// complex coefficients `B`.
pub fn file_to_signal(values: &[Complex64]) -> ambi_emph::Result<ShVector> {
    let r = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * sn3d_scale(degree_order(i).0))
        .collect();
    let mut c = complex_from_real(&ShVector::new(r, Basis::Real, Kind::SourceField)?)?;
    remove_g(c.coeffs_mut());
    Ok(c.with_kind(Kind::Signal))
}

/// Inverse of [`file_to_signal`].
pub fn signal_to_file(b: &ShVector) -> ambi_emph::Result<Vec<Complex64>> {
    let mut gamma = b.clone();
    apply_g(gamma.coeffs_mut());
    let r = real_from_complex(&gamma)?;
    Ok(r.coeffs()
        .iter()
        .enumerate()
        .map(|(i, v)| v / sn3d_scale(degree_order(i).0))
        .collect())
}

/// Reads 16/24/32-bit integer or 32-bit float WAV.
pub fn read_ambix(path: &Path) -> Result<AmbixAudio> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let data: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.into_samples::<f32>().collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|s| s as f32 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    AmbixAudio::new(spec.sample_rate, spec.channels as usize, data)
}

/// Writes 32-bit float WAV.
pub fn write_ambix(path: &Path, audio: &AmbixAudio) -> Result<()> {
    let channels = u16::try_from(audio.channels())
        .map_err(|_| PipelineError::Config(format!("{} channels exceed the WAV limit", audio.channels())))?;
    let spec = WavSpec {
        channels,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for &s in &audio.data {
        w.write_sample(s)?;
    }
    w.finalize()?;
    Ok(())
}
