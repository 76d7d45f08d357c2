//! Adaptive kernels `v = β E[|μ|^α]` estimated from the running signal.
//!
//! For `y = g ∘ B`, `|μ|² = Σ_{q,l} y_q conj(y_{l̄}) Y_q Y_l` where `l̄` is the
//! `m → -m` partner of `l`. The expectation therefore only needs the
//! covariance `R = E[y y^H]`: the Kronecker vector is `x_{(q,l)} = R[q, l̄]`
//! and the kernel is `C^T x`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::cg::{expand_product, CgMatrix};
use crate::emphasis::{apply_g, normalize_kernel, BetaPolicy, EmphasisKernel};
use crate::error::{Error, Result};
use crate::sh::{conj_index, num_coeffs, Basis, Direction, Kind, ShVector};
use crate::source_field::{grid_argmax, SphereGrid};

/// Negative eigenvalues down to this fraction of the trace are clamped.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// How successive samples are averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Averaging {
    /// `R ← λR + (1 - λ) y y^H`. `λ = 1` is treated as the running mean.
    Forgetting(f64),
    /// Equal-weight mean of everything absorbed so far.
    AbsorbingMean,
}

/// Per-sample forgetting factor for a time constant in seconds.
pub fn forgetting_factor(time_constant: f64, rate: f64) -> Result<f64> {
    if !(time_constant > 0.0 && rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time constant {time_constant} s at {rate} Hz"
        )));
    }
    Ok((-1.0 / (time_constant * rate)).exp())
}

/// Running estimate of `E[(g∘B)(g∘B)^H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    q_degree: usize,
    r: DMatrix<Complex64>,
    count: u64,
    averaging: Averaging,
    scratch: Vec<Complex64>,
}

impl CovarianceAccumulator {
    pub fn new(q_degree: usize, averaging: Averaging) -> Result<Self> {
        if let Averaging::Forgetting(l) = averaging {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::InvalidParameter(format!("forgetting factor {l}")));
            }
        }
        let n = num_coeffs(q_degree);
        Ok(Self {
            q_degree,
            r: DMatrix::zeros(n, n),
            count: 0,
            averaging,
            scratch: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn q_degree(&self) -> usize {
        self.q_degree
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }

    pub fn covariance(&self) -> &DMatrix<Complex64> {
        &self.r
    }

    pub fn reset(&mut self) {
        self.r.fill(Complex64::new(0.0, 0.0));
        self.count = 0;
    }

    pub fn accumulate(&mut self, b: &ShVector) -> Result<()> {
        b.expect_basis(Basis::Complex)?;
        b.expect_degree(self.q_degree)?;
        self.accumulate_coeffs(b.coeffs())
    }

    /// Absorbs one complex-basis coefficient vector `B`.
    pub fn accumulate_coeffs(&mut self, b: &[Complex64]) -> Result<()> {
        let n = self.scratch.len();
        if b.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: b.len(),
            });
        }
        self.count += 1;
        let (keep, add) = match self.averaging {
            Averaging::Forgetting(l) if l < 1.0 => (l, 1.0 - l),
            _ => {
                let w = 1.0 / self.count as f64;
                (1.0 - w, w)
            }
        };
        self.scratch.copy_from_slice(b);
        apply_g(&mut self.scratch);
        let y = &self.scratch;
        for j in 0..n {
            let yj = y[j].conj();
            let d = keep * self.r[(j, j)].re + add * (y[j] * yj).re;
            self.r[(j, j)] = Complex64::new(d, 0.0);
            for (i, &yi) in y.iter().enumerate().take(j) {
                let v = self.r[(i, j)] * keep + yi * yj * add;
                self.r[(i, j)] = v;
                self.r[(j, i)] = v.conj();
            }
        }
        Ok(())
    }

    /// Combines with another accumulator of the same degree as a
    /// count-weighted mean.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.q_degree != self.q_degree {
            return Err(Error::DegreeMismatch {
                expected: self.q_degree,
                found: other.q_degree,
            });
        }
        let total = self.count + other.count;
        if total == 0 {
            return Ok(());
        }
        let (a, b) = (
            self.count as f64 / total as f64,
            other.count as f64 / total as f64,
        );
        self.r = &self.r * Complex64::new(a, 0.0) + &other.r * Complex64::new(b, 0.0);
        self.count = total;
        Ok(())
    }

    /// Covariance with tolerable negative eigenvalues clamped to zero.
    pub fn psd_covariance(&self) -> Result<DMatrix<Complex64>> {
        let trace: f64 = (0..self.r.nrows()).map(|i| self.r[(i, i)].re).sum();
        let eig = SymmetricEigen::new(self.r.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= 0.0 {
            return Ok(self.r.clone());
        }
        if min < -PSD_TOLERANCE * trace.abs() {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
                trace,
            });
        }
        let clamped = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0), 0.0));
        let u = &eig.eigenvectors;
        Ok(u * DMatrix::from_diagonal(&clamped) * u.adjoint())
    }
}

/// Kernel of `E[|μ|²]`, degree `2Q̃`, normalized per `policy`.
pub fn estimate_kernel(
    acc: &CovarianceAccumulator,
    cg: &CgMatrix,
    policy: BetaPolicy,
) -> Result<EmphasisKernel> {
    if acc.count() == 0 {
        return Err(Error::EmptyAccumulator);
    }
    let q = acc.q_degree();
    for d in [cg.q_degree(), cg.l_degree()] {
        if d != q {
            return Err(Error::DegreeMismatch {
                expected: q,
                found: d,
            });
        }
    }
    let r = acc.psd_covariance()?;
    let n = num_coeffs(q);
    let mut v = vec![Complex64::new(0.0, 0.0); cg.cols()];
    for (p, out) in v.iter_mut().enumerate() {
        for e in cg.column(p) {
            let (qi, li) = cg.split_row(e.row);
            debug_assert!(qi < n && li < n);
            *out += r[(qi, conj_index(li))] * e.value;
        }
    }
    let sh = ShVector::new(v, Basis::Complex, Kind::Kernel)?.real_part_function();
    normalize_kernel(&EmphasisKernel::new(sh)?, policy)
}

/// Expansion of `v²`, degree doubled. The scale `β` is squared with it.
pub fn raise_emphasis(kernel: &EmphasisKernel, cg: &CgMatrix) -> Result<EmphasisKernel> {
    let sq = expand_product(kernel.sh(), kernel.sh(), cg)?;
    Ok(EmphasisKernel::new(sq.real_part_function())?.with_beta(kernel.beta() * kernel.beta()))
}

/// Exponent `α` of `E[|μ|^α]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptiveOrder {
    #[default]
    Two,
    Four,
}

impl AdaptiveOrder {
    pub fn from_alpha(alpha: u32) -> Result<Self> {
        match alpha {
            2 => Ok(Self::Two),
            4 => Ok(Self::Four),
            a => Err(Error::InvalidParameter(format!("alpha {a} (expected 2 or 4)"))),
        }
    }

    pub fn alpha(self) -> u32 {
        match self {
            Self::Two => 2,
            Self::Four => 4,
        }
    }

    pub fn kernel_degree(self, q_degree: usize) -> usize {
        match self {
            Self::Two => 2 * q_degree,
            Self::Four => 4 * q_degree,
        }
    }
}

/// When to absorb samples and when to rebuild the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateSchedule {
    block_size: usize,
    undersample: usize,
}

impl UpdateSchedule {
    pub fn new(block_size: usize, undersample: usize) -> Result<Self> {
        if block_size == 0 || undersample == 0 {
            return Err(Error::InvalidParameter(format!(
                "block size {block_size}, undersampling {undersample}"
            )));
        }
        Ok(Self {
            block_size,
            undersample,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn undersample(&self) -> usize {
        self.undersample
    }

    /// Whether sample (or frame) `index` feeds the accumulator.
    pub fn accumulates(&self, index: usize) -> bool {
        index.is_multiple_of(self.undersample)
    }

    pub fn updates_per_second(&self, rate: f64) -> f64 {
        rate / self.block_size as f64
    }
}

/// Shape summary of a kernel over a probe grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDiagnostics {
    pub peak: f64,
    pub min: f64,
    pub min_over_peak: f64,
    pub argmax: Direction,
}

pub fn kernel_diagnostics(kernel: &EmphasisKernel, grid: &SphereGrid) -> KernelDiagnostics {
    let values = kernel.sample(grid);
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    KernelDiagnostics {
        peak,
        min,
        min_over_peak: if peak != 0.0 { min / peak } else { 0.0 },
        argmax: grid_argmax(&values, grid).unwrap_or_else(Direction::north_pole),
    }
}
