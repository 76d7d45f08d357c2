//! The emphasis operator folded into the file convention: a real `P × Q`
//! matrix acting directly on SN3D channel values.

use ambi_emph::emphasis::{apply_transfer, TransferMatrix};
use ambi_emph::sh::num_coeffs;
use num_complex::Complex64;

use crate::ambix::{file_to_signal, signal_to_file};
use crate::error::Result;

/// Imaginary residue tolerated when folding a real-kernel operator.
pub const REAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FileOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FileOperator {
    /// Column `j` is the file-domain response to the unit input on channel `j`.
    pub fn from_transfer(t: &TransferMatrix) -> Result<Self> {
        let (rows, cols) = (t.rows(), t.cols());
        let mut data = vec![0.0; rows * cols];
        let mut imag: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..cols {
            let mut e = vec![Complex64::new(0.0, 0.0); cols];
            e[j] = Complex64::new(1.0, 0.0);
            let out = signal_to_file(&apply_transfer(t, &file_to_signal(&e)?)?)?;
            for (i, z) in out.iter().enumerate() {
                data[i * cols + j] = z.re;
                imag = imag.max(z.im.abs());
                scale = scale.max(z.re.abs());
            }
        }
        if imag > REAL_TOLERANCE * scale.max(1.0) {
            return Err(ambi_emph::Error::ImaginaryResidue(imag).into());
        }
        Ok(Self { rows, cols, data })
    }

    /// Zero-padding from degree `q` to degree `p`.
    pub fn identity(q: usize, p: usize) -> Self {
        let (rows, cols) = (num_coeffs(p), num_coeffs(q));
        let mut data = vec![0.0; rows * cols];
        for i in 0..cols.min(rows) {
            data[i * cols + i] = 1.0;
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// First `out.len()` rows applied to one real frame.
    #[inline]
    pub fn apply_frame(&self, input: &[f32], out: &mut [f32]) {
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o = row.iter().zip(input).map(|(m, x)| m * *x as f64).sum::<f64>() as f32;
        }
    }

    /// First `out.len()` rows applied to one vector of spectral bins.
    #[inline]
    pub fn apply_complex(&self, input: &[Complex64], out: &mut [Complex64]) {
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o = row.iter().zip(input).map(|(m, x)| x * *m).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ambi_emph::emphasis::{axisymmetric_kernel, build_transfer_matrix, EmphasisKernel};
    use ambi_emph::{build_cg_matrix, Direction};

    #[test]
    fn identity_kernel_folds_to_padding() {
        let t = build_transfer_matrix(&EmphasisKernel::constant(2, 1.0), 1, &build_cg_matrix(1, 2)).unwrap();
        let op = FileOperator::from_transfer(&t).unwrap();
        let id = FileOperator::identity(1, 3);
        for i in 0..op.rows() {
            for j in 0..op.cols() {
                assert!((op.get(i, j) - id.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn folded_operator_matches_complex_path() {
        let axis = Direction::new(1.0, 0.5).unwrap();
        let k = axisymmetric_kernel(&axis, 2, 3.0).unwrap();
        let t = build_transfer_matrix(&k, 2, &build_cg_matrix(2, 2)).unwrap();
        let op = FileOperator::from_transfer(&t).unwrap();
        let frame: Vec<f32> = (0..9).map(|i| (i as f32 * 0.61).cos()).collect();
        let mut out = vec![0.0f32; 25];
        op.apply_frame(&frame, &mut out);
        let input: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect();
        let want = signal_to_file(&apply_transfer(&t, &file_to_signal(&input).unwrap()).unwrap()).unwrap();
        for (a, b) in out.iter().zip(&want) {
            assert!((*a as f64 - b.re).abs() < 1e-6);
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); 25];
        op.apply_complex(&input, &mut spec);
        for (a, b) in spec.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
