//! Spherical harmonics on the unit sphere.
//!
//! Complex harmonics follow
//!
//! ```text
//! Y_n^m(θ, φ) = (-1)^m sqrt((2n+1)/(4π) (n-|m|)!/(n+|m|)!) P_n^|m|(cos θ) e^{imφ}
//! ```
//!
//! with `P_n^m` the associated Legendre function *without* the Condon-Shortley
//! phase. With this form `conj(Y_n^m) = Y_n^{-m}` holds exactly, which is what
//! the product-expansion and covariance code rely on.
//!
//! `θ` is the colatitude, measured from the +z pole, and `φ` the azimuth.
//! Coefficients are stored in ACN order, `i = n² + n + m`.
//!
//! The real basis is orthonormal with `m > 0 ↦ cos(mφ)` and `m < 0 ↦ sin(|m|φ)`
//! and no Condon-Shortley phase, i.e. the ambiX sign convention scaled to unit
//! norm. SN3D scaling is only applied at file boundaries.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Value of the constant harmonic `Y_0^0 = 1/sqrt(4π)`.
///
/// Chosen so that `Y00 * (1.0 / Y00) == 1.0` holds exactly in binary64.
pub const Y00: f64 = 0.282_094_791_773_878_14;

/// Number of coefficients of a degree-`degree` expansion, `(degree + 1)²`.
#[inline]
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree of an expansion with `len` coefficients, if `len` is a perfect square.
pub fn degree_for_len(len: usize) -> Option<usize> {
    let n = isqrt(len);
    (n > 0 && n * n == len).then(|| n - 1)
}

pub(crate) fn isqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    /// `theta` is the colatitude in `[0, π]`; `phi` is reduced to `[-π, π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidDirection(theta));
        }
        Ok(Self {
            theta,
            phi: wrap_azimuth(phi),
        })
    }

    pub fn north_pole() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    pub fn from_unit_vector([x, y, z]: [f64; 3]) -> Self {
        let r = (x * x + y * y + z * z).sqrt();
        let theta = (z / r).clamp(-1.0, 1.0).acos();
        Self {
            theta,
            phi: wrap_azimuth(y.atan2(x)),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

fn wrap_azimuth(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid may round up to exactly 2π
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// ACN index of `(n, m)`.
pub fn acn_index(n: usize, m: i64) -> Result<usize> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::OrderOutOfRange { n, m });
    }
    Ok(((n * n + n) as i64 + m) as usize)
}

/// Degree and order of ACN index `i`.
pub fn degree_order(i: usize) -> (usize, i64) {
    let n = isqrt(i);
    (n, i as i64 - (n * n + n) as i64)
}

/// Index of `(n, -m)` for the coefficient at `(n, m)`.
#[inline]
pub fn conj_index(i: usize) -> usize {
    let n = isqrt(i);
    2 * (n * n + n) - i
}

/// Associated Legendre function `P_n^m(x)`, `m ≥ 0`, without the
/// Condon-Shortley phase, by upward recurrence in `n` from `P_m^m`.
pub fn assoc_legendre(n: usize, m: usize, x: f64) -> Result<f64> {
    if m > n {
        return Err(Error::OrderOutOfRange { n, m: m as i64 });
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::ArgumentOutOfRange(x));
    }
    Ok(legendre_recurrence(n, m, x, (1.0 - x * x).sqrt()))
}

fn legendre_recurrence(n: usize, m: usize, x: f64, s: f64) -> f64 {
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if n == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for l in m + 2..=n {
        let next = (x * (2 * l - 1) as f64 * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// `sqrt((2n+1)/(4π) (n-m)!/(n+m)!)` for `m ≥ 0`.
fn norm_factor(n: usize, m: usize) -> f64 {
    if n == 0 {
        return Y00;
    }
    // the factorial ratio as a product of reciprocals never overflows
    let ratio: f64 = (n - m + 1..=n + m).map(|k| 1.0 / k as f64).product();
    ((2 * n + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

#[inline]
fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Single complex harmonic `Y_n^m(dir)`.
pub fn eval_sh(n: usize, m: i64, dir: &Direction) -> Result<Complex64> {
    let ma = m.unsigned_abs() as usize;
    if ma > n {
        return Err(Error::OrderOutOfRange { n, m });
    }
    let (s, x) = dir.theta.sin_cos();
    let p = legendre_recurrence(n, ma, x, s);
    let sign = if ma % 2 == 1 { -1.0 } else { 1.0 };
    let (sp, cp) = (ma as f64 * dir.phi).sin_cos();
    let v = Complex64::new(cp, sp) * (sign * norm_factor(n, ma) * p);
    Ok(if m < 0 { v.conj() } else { v })
}

/// Orthonormal real harmonic in the ambiX sign convention.
pub fn eval_real_sh(n: usize, m: i64, dir: &Direction) -> Result<f64> {
    let ma = m.unsigned_abs() as usize;
    if ma > n {
        return Err(Error::OrderOutOfRange { n, m });
    }
    let (s, x) = dir.theta.sin_cos();
    let base = norm_factor(n, ma) * legendre_recurrence(n, ma, x, s);
    Ok(match m {
        0 => base,
        m if m > 0 => std::f64::consts::SQRT_2 * base * (ma as f64 * dir.phi).cos(),
        _ => std::f64::consts::SQRT_2 * base * (ma as f64 * dir.phi).sin(),
    })
}

/// Evaluates every harmonic up to a fixed degree, reusing the normalization
/// table across directions.
#[derive(Debug, Clone)]
pub struct ShEvaluator {
    degree: usize,
    norms: Vec<f64>,
    legendre: Vec<f64>,
}

impl ShEvaluator {
    pub fn new(degree: usize) -> Self {
        let mut norms = vec![0.0; tri(degree, degree) + 1];
        for n in 0..=degree {
            for m in 0..=n {
                let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                norms[tri(n, m)] = sign * norm_factor(n, m);
            }
        }
        Self {
            degree,
            legendre: vec![0.0; norms.len()],
            norms,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn fill_legendre(&mut self, dir: &Direction) {
        let (s, x) = dir.theta.sin_cos();
        let p = &mut self.legendre;
        let mut pmm = 1.0;
        for m in 0..=self.degree {
            if m > 0 {
                pmm *= (2 * m - 1) as f64 * s;
            }
            p[tri(m, m)] = pmm;
            if m < self.degree {
                p[tri(m + 1, m)] = x * (2 * m + 1) as f64 * pmm;
            }
            for l in m + 2..=self.degree {
                p[tri(l, m)] = (x * (2 * l - 1) as f64 * p[tri(l - 1, m)]
                    - (l + m - 1) as f64 * p[tri(l - 2, m)])
                    / (l - m) as f64;
            }
        }
    }

    /// Writes `Y_i(dir)` for all ACN indices into `out`.
    pub fn eval_into(&mut self, dir: &Direction, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), num_coeffs(self.degree));
        self.fill_legendre(dir);
        out[0] = Complex64::new(Y00, 0.0);
        for n in 1..=self.degree {
            let center = n * n + n;
            out[center] = Complex64::new(self.norms[tri(n, 0)] * self.legendre[tri(n, 0)], 0.0);
            for m in 1..=n {
                let (sp, cp) = (m as f64 * dir.phi).sin_cos();
                let a = self.norms[tri(n, m)] * self.legendre[tri(n, m)];
                let v = Complex64::new(a * cp, a * sp);
                out[center + m] = v;
                out[center - m] = v.conj();
            }
        }
    }

    pub fn eval(&mut self, dir: &Direction) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); num_coeffs(self.degree)];
        self.eval_into(dir, &mut out);
        out
    }

    /// Writes the orthonormal real harmonics at `dir` into `out`.
    pub fn eval_real_into(&mut self, dir: &Direction, out: &mut [f64]) {
        debug_assert_eq!(out.len(), num_coeffs(self.degree));
        self.fill_legendre(dir);
        out[0] = Y00;
        for n in 1..=self.degree {
            let center = n * n + n;
            out[center] = self.norms[tri(n, 0)] * self.legendre[tri(n, 0)];
            for m in 1..=n {
                let (sp, cp) = (m as f64 * dir.phi).sin_cos();
                // the (-1)^m in `norms` is undone here: the real basis carries no phase
                let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                let a = std::f64::consts::SQRT_2
                    * sign
                    * self.norms[tri(n, m)]
                    * self.legendre[tri(n, m)];
                out[center + m] = a * cp;
                out[center - m] = a * sp;
            }
        }
    }
}

/// `[Y_0(dir), …, Y_{(degree+1)²-1}(dir)]` in ACN order.
pub fn eval_sh_vector(degree: usize, dir: &Direction) -> Vec<Complex64> {
    ShEvaluator::new(degree).eval(dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Complex,
    Real,
}

/// What a coefficient vector describes. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Ambisonics (pressure) coefficients `B`.
    Signal,
    /// Emphasis function `v`.
    Kernel,
    /// Source-field coefficients `γ = g ∘ B`.
    SourceField,
}

/// ACN-ordered spherical-harmonic coefficients of one sample, bin or kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ShVector {
    degree: usize,
    coeffs: Vec<Complex64>,
    basis: Basis,
    kind: Kind,
}

impl ShVector {
    pub fn new(coeffs: Vec<Complex64>, basis: Basis, kind: Kind) -> Result<Self> {
        let degree = degree_for_len(coeffs.len()).ok_or(Error::LengthMismatch {
            expected: num_coeffs(isqrt(coeffs.len())),
            found: coeffs.len(),
        })?;
        Ok(Self {
            degree,
            coeffs,
            basis,
            kind,
        })
    }

    pub fn zeros(degree: usize, basis: Basis, kind: Kind) -> Self {
        Self {
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); num_coeffs(degree)],
            basis,
            kind,
        }
    }

    /// Expansion of the constant function `value` (same in both bases).
    pub fn constant(degree: usize, value: f64, basis: Basis, kind: Kind) -> Self {
        let mut v = Self::zeros(degree, basis, kind);
        v.coeffs[0] = Complex64::new(value * (1.0 / Y00), 0.0);
        v
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn with_kind(mut self, kind: Kind) -> Self {
        self.kind = kind;
        self
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn expect_basis(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::BasisMismatch {
                expected: basis,
                found: self.basis,
            });
        }
        Ok(())
    }

    pub fn expect_degree(&self, degree: usize) -> Result<()> {
        if self.degree != degree {
            return Err(Error::DegreeMismatch {
                expected: degree,
                found: self.degree,
            });
        }
        Ok(())
    }

    /// First `(degree+1)²` coefficients.
    pub fn truncated(&self, degree: usize) -> Self {
        let n = num_coeffs(degree.min(self.degree));
        let mut coeffs = self.coeffs[..n].to_vec();
        coeffs.resize(num_coeffs(degree), Complex64::new(0.0, 0.0));
        Self {
            degree,
            coeffs,
            basis: self.basis,
            kind: self.kind,
        }
    }

    pub fn zero_padded(&self, degree: usize) -> Self {
        self.truncated(degree)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }

    /// Value of the represented function at `dir`.
    pub fn evaluate(&self, dir: &Direction) -> Complex64 {
        let mut ev = ShEvaluator::new(self.degree);
        match self.basis {
            Basis::Complex => {
                let y = ev.eval(dir);
                self.coeffs.iter().zip(&y).map(|(c, y)| c * y).sum()
            }
            Basis::Real => {
                let mut y = vec![0.0; self.len()];
                ev.eval_real_into(dir, &mut y);
                self.coeffs.iter().zip(&y).map(|(c, y)| c * y).sum()
            }
        }
    }

    /// Largest deviation from the symmetry of a real-valued function,
    /// relative to the largest coefficient magnitude.
    pub fn real_function_asymmetry(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let dev = match self.basis {
            Basis::Complex => (0..self.len())
                .map(|i| (self.coeffs[i] - self.coeffs[conj_index(i)].conj()).norm())
                .fold(0.0, f64::max),
            Basis::Real => self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max),
        };
        dev / scale
    }

    /// Projects onto the symmetry of a real-valued function.
    pub fn real_part_function(&self) -> Self {
        let coeffs = match self.basis {
            Basis::Complex => (0..self.len())
                .map(|i| 0.5 * (self.coeffs[i] + self.coeffs[conj_index(i)].conj()))
                .collect(),
            Basis::Real => self
                .coeffs
                .iter()
                .map(|c| Complex64::new(c.re, 0.0))
                .collect(),
        };
        Self {
            coeffs,
            ..self.clone()
        }
    }
}

/// Complex-basis coefficients → real-basis coefficients.
pub fn real_from_complex(v: &ShVector) -> Result<ShVector> {
    v.expect_basis(Basis::Complex)?;
    let c = &v.coeffs;
    let mut r = vec![Complex64::new(0.0, 0.0); c.len()];
    let j = Complex64::new(0.0, 1.0);
    for n in 0..=v.degree {
        let center = n * n + n;
        r[center] = c[center];
        for m in 1..=n {
            let sign = if m % 2 == 1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            let (cp, cn) = (c[center + m], c[center - m]);
            r[center + m] = (cp + cn) * sign;
            r[center - m] = j * (cp - cn) * sign;
        }
    }
    Ok(ShVector {
        coeffs: r,
        basis: Basis::Real,
        ..v.clone()
    })
}

/// Real-basis coefficients → complex-basis coefficients.
pub fn complex_from_real(v: &ShVector) -> Result<ShVector> {
    v.expect_basis(Basis::Real)?;
    let r = &v.coeffs;
    let mut c = vec![Complex64::new(0.0, 0.0); r.len()];
    let j = Complex64::new(0.0, 1.0);
    for n in 0..=v.degree {
        let center = n * n + n;
        c[center] = r[center];
        for m in 1..=n {
            let sign = if m % 2 == 1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            let (rp, rn) = (r[center + m], r[center - m]);
            c[center + m] = (rp - j * rn) * sign;
            c[center - m] = (rp + j * rn) * sign;
        }
    }
    Ok(ShVector {
        coeffs: c,
        basis: Basis::Complex,
        ..v.clone()
    })
}
