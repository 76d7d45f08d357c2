//! The product-expansion matrix `C` with `Y^(Q) ⊗ Y^(L) = C Y^(P)`.
//!
//! Rows are Kronecker-ordered with the signal index major: row `q·L + l`
//! holds the expansion of `Y_q Y_l`. Columns index the degree-`Q̃+L̃`
//! harmonics. Entries are Gaunt integrals and are stored as coordinate
//! triplets sorted by column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sh::{degree_order, num_coeffs, Basis, Direction, ShEvaluator, ShVector};
use crate::wigner::gaunt;

/// Largest condition number accepted from the sampled system.
pub const MAX_CONDITION: f64 = 1e10;

/// Imaginary parts of sampled solutions below this are discarded.
pub const LSQ_IMAG_TOLERANCE: f64 = 1e-8;

/// Sampled solutions with magnitude below this are treated as structural zeros.
pub const LSQ_PRUNE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgMatrix {
    q_degree: usize,
    l_degree: usize,
    entries: Vec<CgEntry>,
    col_starts: Vec<usize>,
}

impl CgMatrix {
    fn from_entries(q_degree: usize, l_degree: usize, mut entries: Vec<CgEntry>) -> Self {
        entries.sort_by_key(|e| (e.col, e.row));
        let cols = num_coeffs(q_degree + l_degree);
        let mut col_starts = vec![0; cols + 1];
        for e in &entries {
            col_starts[e.col + 1] += 1;
        }
        for c in 0..cols {
            col_starts[c + 1] += col_starts[c];
        }
        Self {
            q_degree,
            l_degree,
            entries,
            col_starts,
        }
    }

    pub fn q_degree(&self) -> usize {
        self.q_degree
    }

    pub fn l_degree(&self) -> usize {
        self.l_degree
    }

    pub fn p_degree(&self) -> usize {
        self.q_degree + self.l_degree
    }

    /// `Q·L`.
    pub fn rows(&self) -> usize {
        num_coeffs(self.q_degree) * num_coeffs(self.l_degree)
    }

    /// `P`.
    pub fn cols(&self) -> usize {
        num_coeffs(self.p_degree())
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[CgEntry] {
        &self.entries
    }

    /// Nonzero entries of column `p`, sorted by row.
    pub fn column(&self, p: usize) -> &[CgEntry] {
        &self.entries[self.col_starts[p]..self.col_starts[p + 1]]
    }

    /// Splits a row index into its `(q, l)` pair.
    #[inline]
    pub fn split_row(&self, row: usize) -> (usize, usize) {
        let l = num_coeffs(self.l_degree);
        (row / l, row % l)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.column(col)
            .binary_search_by_key(&row, |e| e.row)
            .map(|k| self.column(col)[k].value)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for e in &self.entries {
            m[(e.row, e.col)] = e.value;
        }
        m
    }

    /// `C · Y^(P)(dir)`, one value per row.
    pub fn apply_to_harmonics(&self, yp: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for e in &self.entries {
            out[e.row] += yp[e.col] * e.value;
        }
        out
    }
}

/// Analytic construction from Gaunt integrals.
pub fn build_cg_matrix(q_degree: usize, l_degree: usize) -> CgMatrix {
    let big_l = num_coeffs(l_degree);
    let p_degree = q_degree + l_degree;
    let mut entries = Vec::new();
    for p in 0..num_coeffs(p_degree) {
        let (np, mp) = degree_order(p);
        for q in 0..num_coeffs(q_degree) {
            let (nq, mq) = degree_order(q);
            let ml = mp - mq;
            let lo = nq.abs_diff(np).max(ml.unsigned_abs() as usize);
            let hi = (nq + np).min(l_degree);
            for nl in lo..=hi {
                if (nq + nl + np) % 2 == 1 {
                    continue;
                }
                let value = gaunt(nq, mq, nl, ml, np, mp).expect("indices are in range");
                if value != 0.0 {
                    let l = nl * nl + nl;
                    let l = (l as i64 + ml) as usize;
                    entries.push(CgEntry {
                        row: q * big_l + l,
                        col: p,
                        value,
                    });
                }
            }
        }
    }
    CgMatrix::from_entries(q_degree, l_degree, entries)
}

/// Area-uniform random directions.
pub fn random_directions(count: usize, seed: u64) -> Vec<Direction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let phi: f64 = std::f64::consts::PI * (2.0 * rng.random::<f64>() - 1.0);
            Direction::new(z.clamp(-1.0, 1.0).acos(), phi).expect("theta in range")
        })
        .collect()
}

/// Construction by least squares over `n_angles` sampled directions: solves
/// `Y^(Q)(d) ⊗ Y^(L)(d) = C Y^(P)(d)` for all sampled `d`.
pub fn build_cg_matrix_lsq(
    q_degree: usize,
    l_degree: usize,
    n_angles: usize,
    seed: u64,
) -> Result<CgMatrix> {
    let p_degree = q_degree + l_degree;
    let (big_q, big_l, big_p) = (
        num_coeffs(q_degree),
        num_coeffs(l_degree),
        num_coeffs(p_degree),
    );
    if n_angles < big_p {
        return Err(Error::Underdetermined {
            angles: n_angles,
            unknowns: big_p,
        });
    }

    let mut ev = ShEvaluator::new(p_degree);
    let mut yp = vec![Complex64::new(0.0, 0.0); big_p];
    let mut design = DMatrix::<Complex64>::zeros(n_angles, big_p);
    let mut rhs = DMatrix::<Complex64>::zeros(n_angles, big_q * big_l);
    for (k, d) in random_directions(n_angles, seed).iter().enumerate() {
        ev.eval_into(d, &mut yp);
        for p in 0..big_p {
            design[(k, p)] = yp[p];
        }
        // lower-degree harmonics are a prefix of the degree-P̃ vector
        for q in 0..big_q {
            for l in 0..big_l {
                rhs[(k, q * big_l + l)] = yp[q] * yp[l];
            }
        }
    }

    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }
    // solution has shape P × QL, i.e. C transposed
    let ct = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let max_imag = ct.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag >= LSQ_IMAG_TOLERANCE {
        return Err(Error::ImaginaryResidue(max_imag));
    }
    let mut entries = Vec::new();
    for p in 0..big_p {
        for row in 0..big_q * big_l {
            let value = ct[(p, row)].re;
            if value.abs() > LSQ_PRUNE {
                entries.push(CgEntry { row, col: p, value });
            }
        }
    }
    Ok(CgMatrix::from_entries(q_degree, l_degree, entries))
}

/// `C^T (a ⊗ b)`: the expansion of the pointwise product of the functions
/// represented by `a` and `b`.
pub fn expand_product(a: &ShVector, b: &ShVector, cg: &CgMatrix) -> Result<ShVector> {
    a.expect_basis(Basis::Complex)?;
    b.expect_basis(Basis::Complex)?;
    a.expect_degree(cg.q_degree())?;
    b.expect_degree(cg.l_degree())?;
    let (ac, bc) = (a.coeffs(), b.coeffs());
    let mut out = vec![Complex64::new(0.0, 0.0); cg.cols()];
    for (p, o) in out.iter_mut().enumerate() {
        for e in cg.column(p) {
            let (q, l) = cg.split_row(e.row);
            *o += ac[q] * (bc[l] * e.value);
        }
    }
    ShVector::new(out, Basis::Complex, a.kind())
}

const CACHE_MAGIC: &[u8; 4] = b"AECG";
const CACHE_VERSION: u32 = 1;

/// Cache file name for a `(Q̃, L̃)` matrix.
pub fn cache_file_name(q_degree: usize, l_degree: usize) -> String {
    format!("cg_q{q_degree}_l{l_degree}_complex.bin")
}

/// Writes the matrix as a versioned little-endian triplet file:
///
/// ```text
/// "AECG" | version u32 | q_degree u32 | l_degree u32 | basis u8 (0 = complex)
/// | nnz u64 | nnz × (row u32, col u32, value f64)
/// ```
pub fn write_cache(cg: &CgMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(cg.q_degree as u32).to_le_bytes())?;
    w.write_all(&(cg.l_degree as u32).to_le_bytes())?;
    w.write_all(&[0u8])?;
    w.write_all(&(cg.nnz() as u64).to_le_bytes())?;
    for e in &cg.entries {
        w.write_all(&(e.row as u32).to_le_bytes())?;
        w.write_all(&(e.col as u32).to_le_bytes())?;
        w.write_all(&e.value.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<CgMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format("bad cache magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let q_degree = read_u32(&mut r)? as usize;
    let l_degree = read_u32(&mut r)? as usize;
    let mut basis = [0u8; 1];
    r.read_exact(&mut basis)?;
    if basis[0] != 0 {
        return Err(Error::Format(format!("unsupported basis tag {}", basis[0])));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let nnz = u64::from_le_bytes(buf8) as usize;
    let (rows, cols) = (
        num_coeffs(q_degree) * num_coeffs(l_degree),
        num_coeffs(q_degree + l_degree),
    );
    let mut entries = Vec::with_capacity(nnz.min(rows * cols));
    for _ in 0..nnz {
        let row = read_u32(&mut r)? as usize;
        let col = read_u32(&mut r)? as usize;
        r.read_exact(&mut buf8)?;
        if row >= rows || col >= cols {
            return Err(Error::Format(format!("entry ({row}, {col}) out of bounds")));
        }
        entries.push(CgEntry {
            row,
            col,
            value: f64::from_le_bytes(buf8),
        });
    }
    Ok(CgMatrix::from_entries(q_degree, l_degree, entries))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Loads the analytic matrix from `dir` if cached, otherwise builds and
/// stores it. Unreadable cache files are rebuilt.
pub fn load_or_build(q_degree: usize, l_degree: usize, dir: Option<&Path>) -> Result<CgMatrix> {
    let Some(dir) = dir else {
        return Ok(build_cg_matrix(q_degree, l_degree));
    };
    let path: PathBuf = dir.join(cache_file_name(q_degree, l_degree));
    if let Ok(cg) = read_cache(&path) {
        if cg.q_degree == q_degree && cg.l_degree == l_degree {
            return Ok(cg);
        }
    }
    let cg = build_cg_matrix(q_degree, l_degree);
    std::fs::create_dir_all(dir)?;
    write_cache(&cg, &path)?;
    Ok(cg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::{eval_sh_vector, Kind, Y00};

    fn max_identity_residual(cg: &CgMatrix, dirs: &[Direction]) -> f64 {
        let (bq, bl) = (num_coeffs(cg.q_degree()), num_coeffs(cg.l_degree()));
        let mut worst: f64 = 0.0;
        for d in dirs {
            let yp = eval_sh_vector(cg.p_degree(), d);
            let lhs: Vec<Complex64> = (0..bq * bl).map(|r| yp[r / bl] * yp[r % bl]).collect();
            let rhs = cg.apply_to_harmonics(&yp);
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    #[test]
    fn trivial_shapes() {
        let c = build_cg_matrix(0, 0);
        assert_eq!((c.rows(), c.cols()), (1, 1));
        assert_eq!(c.get(0, 0), Y00);

        let c = build_cg_matrix(1, 0);
        assert_eq!((c.rows(), c.cols()), (4, 4));
        for r in 0..4 {
            for p in 0..4 {
                assert_eq!(c.get(r, p), if r == p { Y00 } else { 0.0 });
            }
        }
    }

    #[test]
    fn kronecker_rows_are_signal_major() {
        let c = build_cg_matrix(1, 2);
        assert_eq!((c.rows(), c.cols()), (36, 16));
        // row (q = 0, l) carries Y_0 · Y_l = Y00 · Y_l
        for l in 0..9 {
            assert_eq!(c.get(l, l), Y00);
        }
        // row (q = 2, l = 0) carries Y_2 · Y_0
        assert_eq!(c.split_row(2 * 9), (2, 0));
        assert_eq!(c.get(18, 2), Y00);
        let dirs = random_directions(1000, 11);
        assert!(max_identity_residual(&c, &dirs) < 1e-10);
    }

    #[test]
    fn selection_rules_and_sparsity() {
        let c = build_cg_matrix(2, 3);
        for e in c.entries() {
            let (q, l) = c.split_row(e.row);
            let ((nq, mq), (nl, ml), (np, mp)) = (degree_order(q), degree_order(l), degree_order(e.col));
            assert_eq!(mq + ml, mp);
            assert!(np >= nq.abs_diff(nl) && np <= nq + nl);
            assert_eq!((nq + nl + np) % 2, 0);
        }
        assert!(c.nnz() * 10 < c.rows() * c.cols());
    }

    #[test]
    fn column_zero_is_sphere_average() {
        let c = build_cg_matrix(2, 2);
        // Y_q Y_l projected on Y_0 is Y00 · δ(l, conj(q))
        for e in c.column(0) {
            let (q, l) = c.split_row(e.row);
            assert_eq!(l, crate::sh::conj_index(q));
            assert!((e.value - Y00).abs() < 1e-15);
        }
        assert_eq!(c.column(0).len(), 9);
    }

    #[test]
    fn lsq_examples() {
        let c = build_cg_matrix_lsq(0, 0, 4, 7).unwrap();
        assert!((c.get(0, 0) - Y00).abs() < 1e-10);

        let exact = build_cg_matrix(1, 2).to_dense();
        let lsq = build_cg_matrix_lsq(1, 2, 64, 3).unwrap().to_dense();
        assert!((exact - lsq).abs().max() < 1e-8);

        assert!(matches!(
            build_cg_matrix_lsq(2, 2, 20, 1),
            Err(Error::Underdetermined {
                angles: 20,
                unknowns: 25
            })
        ));
    }

    #[test]
    fn expand_product_examples() {
        let c = build_cg_matrix(2, 1);
        let a = ShVector::new(
            (0..9).map(|k| Complex64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.2)).collect(),
            Basis::Complex,
            Kind::Signal,
        )
        .unwrap();
        let one = ShVector::constant(1, 1.0, Basis::Complex, Kind::Kernel);
        let out = expand_product(&a, &one, &c).unwrap();
        assert_eq!(out, a.zero_padded(3));

        let c0 = build_cg_matrix(0, 0);
        let k = ShVector::constant(0, 1.0, Basis::Complex, Kind::Kernel);
        let prod = expand_product(&k, &k, &c0).unwrap();
        assert!((prod.coeffs()[0].re * Y00 - 1.0).abs() < 1e-15);

        assert!(matches!(
            expand_product(&one, &a, &c),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = build_cg_matrix(2, 2);
        let built = load_or_build(2, 2, Some(dir.path())).unwrap();
        assert_eq!(built, c);
        let path = dir.path().join(cache_file_name(2, 2));
        assert!(path.exists());
        assert_eq!(read_cache(&path).unwrap(), c);

        std::fs::write(&path, b"junk").unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Format(_)) | Err(Error::Io(_))));
        // a corrupt cache is rebuilt
        assert_eq!(load_or_build(2, 2, Some(dir.path())).unwrap(), c);
    }
}
