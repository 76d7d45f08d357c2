//! Plane-wave scene generator.

use ambi_emph::sh::{degree_order, num_coeffs, ShEvaluator};
use ambi_emph::Direction;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ambix::{sn3d_scale, AmbixAudio};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSignal {
    /// Uniform white noise in `[-1, 1)`.
    Noise,
    /// Sine at the given frequency in Hz.
    Sine(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub direction: Direction,
    pub gain: f64,
    pub signal: SourceSignal,
}

/// SN3D encoding gains of a plane wave from `u`.
pub fn sn3d_gains(u: &Direction, degree: usize) -> Vec<f64> {
    let mut r = vec![0.0; num_coeffs(degree)];
    ShEvaluator::new(degree).eval_real_into(u, &mut r);
    r.iter()
        .enumerate()
        .map(|(i, v)| v / sn3d_scale(degree_order(i).0))
        .collect()
}

/// Mix of independent plane-wave sources, `frames` samples long.
pub fn synth_scene(sources: &[PlaneWave], degree: usize, sample_rate: u32, frames: usize, seed: u64) -> AmbixAudio {
    let channels = num_coeffs(degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0f64; frames * channels];
    for src in sources {
        let gains = sn3d_gains(&src.direction, degree);
        for (t, frame) in data.chunks_exact_mut(channels).enumerate() {
            let s = src.gain
                * match src.signal {
                    SourceSignal::Noise => rng.random::<f64>() * 2.0 - 1.0,
                    SourceSignal::Sine(f) => (2.0 * std::f64::consts::PI * f * t as f64 / sample_rate as f64).sin(),
                };
            for (x, g) in frame.iter_mut().zip(&gains) {
                *x += s * g;
            }
        }
    }
    AmbixAudio::new(sample_rate, channels, data.into_iter().map(|x| x as f32).collect())
        .expect("full-order channel count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_gains_are_ambix() {
        let (t, p) = (0.8f64, 2.4f64);
        let g = sn3d_gains(&Direction::new(t, p).unwrap(), 1);
        let want = [1.0, t.sin() * p.sin(), t.cos(), t.sin() * p.cos()];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn scenes_are_reproducible() {
        let src = PlaneWave {
            direction: Direction::north_pole(),
            gain: 0.5,
            signal: SourceSignal::Noise,
        };
        let a = synth_scene(&[src], 2, 8000, 100, 3);
        assert_eq!(a, synth_scene(&[src], 2, 8000, 100, 3));
        assert_ne!(a, synth_scene(&[src], 2, 8000, 100, 4));
        assert_eq!(a.channels(), 9);
        // the pole has no m != 0 content
        for f in 0..100 {
            let fr = a.frame(f);
            assert_eq!(fr[1], 0.0);
            assert_eq!(fr[3], 0.0);
        }
    }
}
