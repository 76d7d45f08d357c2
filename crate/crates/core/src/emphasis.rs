//! Static emphasis kernels and the two per-sample application paths.
//!
//! With `γ = g ∘ B` the source-field coefficients of the ambisonics
//! coefficients `B` and `g_i = (-j)^{n(i)}`, emphasis by a kernel `v` is
//!
//! ```text
//! g^(P) ∘ B̃ = C^T ((g^(Q) ∘ B) ⊗ V)            (Kronecker path)
//! B̃ = diag(g^(P))⁻¹ C̄^T A diag(g^(Q)) B = T B   (transfer path)
//! ```
//!
//! where `C̄^T` is `C^T` with each row `(q, l)` scaled by `V_l`, and
//! `A = I^(Q) ⊗ 1^(L)` sums the `l` entries belonging to each `q`. Because
//! the rows of `C` are signal-major the mask pairs `V` with the fast
//! (`l`) index, i.e. it is `1^(Q) ⊗ V`.
//!
//! Multiplying by a power of `-j` is an exact component swap and is never
//! counted as a multiply.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cg::CgMatrix;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::sh::{degree_order, num_coeffs, Basis, Direction, Kind, ShEvaluator, ShVector, Y00};
use crate::source_field::SphereGrid;

/// Node count of the probe grid used for unit-peak normalization.
pub const PROBE_NODES: usize = 1000;

/// `z · (-j)^k`, computed exactly.
#[inline]
pub fn rotate_quarter(z: Complex64, k: usize) -> Complex64 {
    match k % 4 {
        0 => z,
        1 => Complex64::new(z.im, -z.re),
        2 => -z,
        _ => Complex64::new(-z.im, z.re),
    }
}

/// `g_i = (-j)^{n(i)}` for every ACN index up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct GVector {
    degree: usize,
    values: Vec<Complex64>,
}

impl GVector {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

pub fn g_vector(degree: usize) -> GVector {
    let values = (0..num_coeffs(degree))
        .map(|i| rotate_quarter(Complex64::new(1.0, 0.0), degree_order(i).0))
        .collect();
    GVector { degree, values }
}

/// `γ = g ∘ B` in place.
pub fn apply_g(coeffs: &mut [Complex64]) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = rotate_quarter(*c, degree_order(i).0);
    }
}

/// `B = γ / g` in place.
pub fn remove_g(coeffs: &mut [Complex64]) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = rotate_quarter(*c, 4 - degree_order(i).0 % 4);
    }
}

/// Source-field coefficients `g ∘ B` of a signal vector.
pub fn to_source_field(b: &ShVector) -> ShVector {
    let mut out = b.clone().with_kind(Kind::SourceField);
    apply_g(out.coeffs_mut());
    out
}

/// Signal coefficients `γ / g` of a source-field vector.
pub fn from_source_field(gamma: &ShVector) -> ShVector {
    let mut out = gamma.clone().with_kind(Kind::Signal);
    remove_g(out.coeffs_mut());
    out
}

/// Tally hook for the per-sample paths.
pub trait OpCounter {
    fn complex_mul(&mut self) {}
    fn real_scale(&mut self) {}
}

/// Counter that records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl OpCounter for NoCount {}

/// Complex-by-complex products and real-by-complex scalings.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MulCount {
    pub complex: u64,
    pub real_scale: u64,
}

impl OpCounter for MulCount {
    #[inline]
    fn complex_mul(&mut self) {
        self.complex += 1;
    }

    #[inline]
    fn real_scale(&mut self) {
        self.real_scale += 1;
    }
}

/// SH expansion of a real emphasis function `v`, with the scale `beta`
/// already folded into the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct EmphasisKernel {
    sh: ShVector,
    beta: f64,
}

impl EmphasisKernel {
    pub fn new(sh: ShVector) -> Result<Self> {
        sh.expect_basis(Basis::Complex)?;
        Ok(Self {
            sh: sh.with_kind(Kind::Kernel),
            beta: 1.0,
        })
    }

    /// The constant function `value`.
    pub fn constant(degree: usize, value: f64) -> Self {
        Self {
            sh: ShVector::constant(degree, value, Basis::Complex, Kind::Kernel),
            beta: 1.0,
        }
    }

    pub fn degree(&self) -> usize {
        self.sh.degree()
    }

    pub fn sh(&self) -> &ShVector {
        &self.sh
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.sh.coeffs()
    }

    /// Accumulated normalization factor.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Real part of `v(dir)`.
    pub fn evaluate(&self, dir: &Direction) -> f64 {
        self.sh.evaluate(dir).re
    }

    pub fn sphere_mean(&self) -> f64 {
        self.sh.coeffs()[0].re * Y00
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            sh: self.sh.scaled(s),
            beta: self.beta * s,
        }
    }

    /// Maximum of `v` and where it occurs: the best probe-grid node refined
    /// by a shrinking pattern search.
    pub fn peak(&self) -> (f64, Direction) {
        let grid = SphereGrid::fibonacci(PROBE_NODES);
        let (mut best, mut at) = self
            .sample(&grid)
            .into_iter()
            .zip(grid.nodes().iter().copied())
            .filter(|(v, _)| !v.is_nan())
            .fold((f64::NEG_INFINITY, Direction::north_pole()), |acc, x| if x.0 > acc.0 { x } else { acc });
        let mut step = grid.resolution();
        let mut iterations = 0;
        while step > 1e-8 && iterations < 10_000 {
            iterations += 1;
            let mut moved = false;
            for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let cand = tangent_step(&at, a * step, b * step);
                let v = self.evaluate(&cand);
                if v > best {
                    best = v;
                    at = cand;
                    moved = true;
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        (best, at)
    }

    /// Values of `v` (real part) at every node of `grid`.
    pub fn sample(&self, grid: &SphereGrid) -> Vec<f64> {
        let mut ev = ShEvaluator::new(self.degree());
        let mut y = vec![Complex64::new(0.0, 0.0); self.sh.len()];
        grid.nodes()
            .iter()
            .map(|d| {
                ev.eval_into(d, &mut y);
                y.iter().zip(self.coeffs()).map(|(y, v)| (y * v).re).sum()
            })
            .collect()
    }
}

fn tangent_step(d: &Direction, along_theta: f64, along_phi: f64) -> Direction {
    let (st, ct) = d.theta().sin_cos();
    let (sp, cp) = d.phi().sin_cos();
    let x = d.to_unit_vector();
    let e_theta = [ct * cp, ct * sp, -st];
    let e_phi = [-sp, cp, 0.0];
    let v: [f64; 3] = std::array::from_fn(|i| x[i] + along_theta * e_theta[i] + along_phi * e_phi[i]);
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    Direction::from_unit_vector(v.map(|c| c / norm))
}

/// Spotlight `v(Γ) = ((1 + cos Γ)/2)^sharpness`, `Γ` the angle to `axis`,
/// truncated at degree `l_degree`.
pub fn axisymmetric_kernel(axis: &Direction, l_degree: usize, sharpness: f64) -> Result<EmphasisKernel> {
    if !sharpness.is_finite() || sharpness < 0.0 {
        return Err(Error::InvalidParameter(format!("sharpness {sharpness}")));
    }
    if sharpness == 0.0 {
        return Ok(EmphasisKernel::constant(l_degree, 1.0));
    }
    // exact for integer sharpness; ample for the smooth fractional case
    let nodes = 64.max(l_degree + sharpness.ceil() as usize + 2);
    let (xs, ws) = gauss_legendre(nodes);

    // zonal coefficients c_l = 2π ∫ f(x) Y_l^0(x) dx
    let mut zonal = vec![0.0; l_degree + 1];
    for (&x, &w) in xs.iter().zip(&ws) {
        let f = ((1.0 + x) / 2.0).powf(sharpness);
        let (mut p0, mut p1) = (1.0, x);
        for (l, c) in zonal.iter_mut().enumerate() {
            let pl = match l {
                0 => 1.0,
                1 => x,
                _ => {
                    let p2 = ((2 * l - 1) as f64 * x * p1 - (l - 1) as f64 * p0) / l as f64;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            *c += 2.0 * PI * w * f * ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * pl;
        }
    }

    // addition theorem places the zonal profile on `axis`
    let y_axis = ShEvaluator::new(l_degree).eval(axis);
    let coeffs = (0..num_coeffs(l_degree))
        .map(|i| {
            let (n, _) = degree_order(i);
            y_axis[i].conj() * (zonal[n] * (4.0 * PI / (2 * n + 1) as f64).sqrt())
        })
        .collect();
    EmphasisKernel::new(ShVector::new(coeffs, Basis::Complex, Kind::Kernel)?)
}

/// Choice of the scale `β` applied to a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    /// Maximum over the probe grid becomes 1.
    UnitPeak,
    /// Mean over the sphere becomes 1.
    UnitMean,
    /// Multiply by a fixed `β'`.
    Fixed(f64),
}

pub fn normalize_kernel(kernel: &EmphasisKernel, policy: BetaPolicy) -> Result<EmphasisKernel> {
    let scale = match policy {
        BetaPolicy::UnitPeak => {
            let (peak, _) = kernel.peak();
            if !peak.is_finite() || peak <= 0.0 {
                return Err(Error::DegenerateKernel("no positive value on the probe grid"));
            }
            1.0 / peak
        }
        BetaPolicy::UnitMean => {
            let mean = kernel.sphere_mean();
            if !mean.is_finite() || mean <= 0.0 {
                return Err(Error::DegenerateKernel("sphere mean is not positive"));
            }
            1.0 / mean
        }
        BetaPolicy::Fixed(beta) => beta,
    };
    if kernel.coeffs().iter().all(|c| c.norm() == 0.0) {
        return Err(Error::DegenerateKernel("all coefficients are zero"));
    }
    Ok(kernel.scaled(scale))
}

/// Dense `P × Q` operator `diag(g^(P))⁻¹ C̄^T A diag(g^(Q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    q_degree: usize,
    p_degree: usize,
    data: Vec<Complex64>,
}

impl TransferMatrix {
    pub fn q_degree(&self) -> usize {
        self.q_degree
    }

    pub fn p_degree(&self) -> usize {
        self.p_degree
    }

    pub fn rows(&self) -> usize {
        num_coeffs(self.p_degree)
    }

    pub fn cols(&self) -> usize {
        num_coeffs(self.q_degree)
    }

    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        self.data[p * self.cols() + q]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `out = T · input`, one counted multiply per matrix entry.
    #[inline]
    pub fn apply_into<C: OpCounter>(&self, input: &[Complex64], out: &mut [Complex64], counter: &mut C) {
        let cols = self.cols();
        debug_assert_eq!(input.len(), cols);
        for (row, o) in self.data.chunks_exact(cols).zip(out.iter_mut()) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, b) in row.iter().zip(input) {
                counter.complex_mul();
                acc += t * b;
            }
            *o = acc;
        }
    }
}

pub fn build_transfer_matrix(
    kernel: &EmphasisKernel,
    q_degree: usize,
    cg: &CgMatrix,
) -> Result<TransferMatrix> {
    if cg.q_degree() != q_degree {
        return Err(Error::DegreeMismatch {
            expected: cg.q_degree(),
            found: q_degree,
        });
    }
    if cg.l_degree() != kernel.degree() {
        return Err(Error::DegreeMismatch {
            expected: cg.l_degree(),
            found: kernel.degree(),
        });
    }
    let p_degree = cg.p_degree();
    let (rows, cols) = (num_coeffs(p_degree), num_coeffs(q_degree));
    let v = kernel.coeffs();
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for p in 0..rows {
        for e in cg.column(p) {
            let (q, l) = cg.split_row(e.row);
            data[p * cols + q] += v[l] * e.value;
        }
    }
    for p in 0..rows {
        let np = degree_order(p).0;
        for q in 0..cols {
            let nq = degree_order(q).0;
            // g_q / g_p = (-j)^(n_q - n_p)
            let turns = (nq + 4 * (np / 4 + 1) - np) % 4;
            data[p * cols + q] = rotate_quarter(data[p * cols + q], turns);
        }
    }
    Ok(TransferMatrix {
        q_degree,
        p_degree,
        data,
    })
}

pub fn apply_transfer(t: &TransferMatrix, b: &ShVector) -> Result<ShVector> {
    apply_transfer_counted(t, b, &mut NoCount)
}

pub fn apply_transfer_counted<C: OpCounter>(
    t: &TransferMatrix,
    b: &ShVector,
    counter: &mut C,
) -> Result<ShVector> {
    b.expect_basis(Basis::Complex)?;
    b.expect_degree(t.q_degree)?;
    let mut out = ShVector::zeros(t.p_degree, Basis::Complex, b.kind());
    t.apply_into(b.coeffs(), out.coeffs_mut(), counter);
    Ok(out)
}

pub fn apply_kron(cg: &CgMatrix, kernel: &EmphasisKernel, b: &ShVector) -> Result<ShVector> {
    apply_kron_counted(cg, kernel, b, &mut NoCount)
}

/// Kronecker path: `QL` complex products for `(g ∘ B) ⊗ V`, then one real
/// scaling per nonzero of `C`.
pub fn apply_kron_counted<C: OpCounter>(
    cg: &CgMatrix,
    kernel: &EmphasisKernel,
    b: &ShVector,
    counter: &mut C,
) -> Result<ShVector> {
    b.expect_basis(Basis::Complex)?;
    b.expect_degree(cg.q_degree())?;
    if kernel.degree() != cg.l_degree() {
        return Err(Error::DegreeMismatch {
            expected: cg.l_degree(),
            found: kernel.degree(),
        });
    }
    let mut y = b.coeffs().to_vec();
    apply_g(&mut y);
    let v = kernel.coeffs();
    let mut kron = Vec::with_capacity(y.len() * v.len());
    for yq in &y {
        for vl in v {
            counter.complex_mul();
            kron.push(yq * vl);
        }
    }
    let mut out = ShVector::zeros(cg.p_degree(), Basis::Complex, b.kind());
    for (p, o) in out.coeffs_mut().iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for e in cg.column(p) {
            counter.real_scale();
            acc += kron[e.row] * e.value;
        }
        *o = acc;
    }
    remove_g(out.coeffs_mut());
    Ok(out)
}

/// Overwrites the degree-`Q̃` part of `emphasized` with `original`.
pub fn project_sweet_zone(emphasized: &ShVector, original: &ShVector) -> Result<ShVector> {
    if emphasized.degree() < original.degree() {
        return Err(Error::DegreeMismatch {
            expected: original.degree(),
            found: emphasized.degree(),
        });
    }
    emphasized.expect_basis(original.basis())?;
    let mut out = emphasized.clone();
    out.coeffs_mut()[..original.len()].copy_from_slice(original.coeffs());
    Ok(out)
}
