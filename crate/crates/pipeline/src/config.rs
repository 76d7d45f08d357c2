use std::path::PathBuf;

use ambi_emph::adaptive::forgetting_factor;
use ambi_emph::{AdaptiveOrder, Averaging, BetaPolicy, Direction};

use crate::error::{PipelineError, Result};
use crate::stft::{DEFAULT_HOP, DEFAULT_WINDOW};

pub const DEFAULT_BLOCK: usize = 4096;
pub const DEFAULT_UNDERSAMPLE: usize = 4;
/// Averaging time constant in seconds.
pub const DEFAULT_TIME_CONSTANT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Time,
    Stft { window: usize, hop: usize },
}

impl Domain {
    pub fn stft_default() -> Self {
        Self::Stft {
            window: DEFAULT_WINDOW,
            hop: DEFAULT_HOP,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Time => "time",
            Self::Stft { .. } => "stft",
        }
    }
}

/// How the adaptive covariance forgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Memory {
    /// Time constant in seconds of the exponential window.
    TimeConstant(f64),
    /// Per-update forgetting factor.
    Factor(f64),
    /// Equal-weight mean over everything seen.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// Spotlight `((1 + cos Γ)/2)^sharpness` around `axis`.
    Static {
        axis: Direction,
        sharpness: f64,
        degree: usize,
    },
    Adaptive {
        order: AdaptiveOrder,
        memory: Memory,
        undersample: usize,
        block_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub kernel: KernelSpec,
    pub domain: Domain,
    pub projection: bool,
    pub beta: BetaPolicy,
    /// Required input degree; the file decides when absent.
    pub input_degree: Option<usize>,
    /// Degree of the written file; the full emphasized degree when absent.
    pub truncate_out: Option<usize>,
    pub density_out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
}

impl StreamConfig {
    pub fn new(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            domain: Domain::Time,
            projection: false,
            beta: BetaPolicy::UnitPeak,
            input_degree: None,
            truncate_out: None,
            density_out: None,
            cache_dir: None,
            seed: 0,
        }
    }

    pub fn spotlight(axis: Direction, sharpness: f64, degree: usize) -> Self {
        Self::new(KernelSpec::Static {
            axis,
            sharpness,
            degree,
        })
    }

    pub fn adaptive(order: AdaptiveOrder) -> Self {
        Self::new(KernelSpec::Adaptive {
            order,
            memory: Memory::TimeConstant(DEFAULT_TIME_CONSTANT),
            undersample: DEFAULT_UNDERSAMPLE,
            block_size: DEFAULT_BLOCK,
        })
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.kernel, KernelSpec::Adaptive { .. })
    }

    pub fn kernel_degree(&self, input_degree: usize) -> usize {
        match &self.kernel {
            KernelSpec::Static { degree, .. } => *degree,
            KernelSpec::Adaptive { order, .. } => order.kernel_degree(input_degree),
        }
    }

    /// Checks the configuration against an input of `input_degree` at
    /// `sample_rate`.
    pub fn validate(&self, input_degree: usize, sample_rate: u32) -> Result<()> {
        if let Some(q) = self.input_degree {
            if q != input_degree {
                return Err(PipelineError::Config(format!(
                    "input has degree {input_degree} ({} channels), expected degree {q}",
                    (input_degree + 1) * (input_degree + 1)
                )));
            }
        }
        if sample_rate == 0 {
            return Err(PipelineError::Config("sample rate is zero".into()));
        }
        let p = input_degree + self.kernel_degree(input_degree);
        if let Some(t) = self.truncate_out {
            if t > p {
                return Err(PipelineError::Config(format!(
                    "cannot write degree {t}: emphasized signal has degree {p}"
                )));
            }
        }
        if let Domain::Stft { window, hop } = self.domain {
            crate::stft::Stft::new(window, hop)?;
        }
        match &self.kernel {
            KernelSpec::Static { sharpness, .. } => {
                if !(*sharpness >= 0.0 && sharpness.is_finite()) {
                    return Err(PipelineError::Config(format!("sharpness {sharpness}")));
                }
            }
            KernelSpec::Adaptive {
                undersample,
                block_size,
                ..
            } => {
                if *undersample == 0 || *block_size == 0 {
                    return Err(PipelineError::Config(
                        "block size and undersampling must be positive".into(),
                    ));
                }
                self.averaging(sample_rate)?;
            }
        }
        if let BetaPolicy::Fixed(b) = self.beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(PipelineError::Config(format!("beta {b}")));
            }
        }
        Ok(())
    }

    /// Rate at which the adaptive accumulator is updated.
    pub fn update_rate(&self, sample_rate: u32) -> f64 {
        let per_second = match self.domain {
            Domain::Time => sample_rate as f64,
            Domain::Stft { hop, .. } => sample_rate as f64 / hop as f64,
        };
        match &self.kernel {
            KernelSpec::Adaptive { undersample, .. } => per_second / *undersample as f64,
            KernelSpec::Static { .. } => per_second,
        }
    }

    pub fn averaging(&self, sample_rate: u32) -> Result<Averaging> {
        let KernelSpec::Adaptive { memory, .. } = &self.kernel else {
            return Ok(Averaging::AbsorbingMean);
        };
        Ok(match *memory {
            Memory::TimeConstant(tau) => Averaging::Forgetting(forgetting_factor(tau, self.update_rate(sample_rate))?),
            Memory::Factor(l) => {
                if !(l > 0.0 && l <= 1.0) {
                    return Err(PipelineError::Config(format!("forgetting factor {l}")));
                }
                Averaging::Forgetting(l)
            }
            Memory::Unbounded => Averaging::AbsorbingMean,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_bookkeeping() {
        let c = StreamConfig::spotlight(Direction::north_pole(), 2.0, 4);
        assert_eq!(2 + c.kernel_degree(2), 6);
        let a = StreamConfig::adaptive(AdaptiveOrder::Four);
        assert_eq!(a.kernel_degree(2), 8);
        assert_eq!(2 + a.kernel_degree(2), 10);
    }

    #[test]
    fn validation() {
        let mut c = StreamConfig::spotlight(Direction::north_pole(), 2.0, 2);
        assert!(c.validate(1, 48_000).is_ok());
        c.input_degree = Some(2);
        assert!(c.validate(1, 48_000).is_err());
        c.input_degree = None;
        c.truncate_out = Some(4);
        assert!(c.validate(1, 48_000).is_err());
        c.truncate_out = Some(1);
        c.domain = Domain::Stft { window: 1024, hop: 256 };
        assert!(c.validate(1, 48_000).is_err());
        c.domain = Domain::stft_default();
        assert!(c.validate(1, 48_000).is_ok());
    }

    #[test]
    fn default_time_constant() {
        let c = StreamConfig::adaptive(AdaptiveOrder::Two);
        let Averaging::Forgetting(l) = c.averaging(48_000).unwrap() else {
            panic!("expected forgetting");
        };
        // 12000 accumulated samples per second, 0.25 s
        assert!((l - (-1.0f64 / 3000.0).exp()).abs() < 1e-15);
    }
}
