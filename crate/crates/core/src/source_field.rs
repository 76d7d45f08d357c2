//! Source fields on sphere grids: evaluation, projection back to SH, the
//! brute-force emphasis oracle, plane-wave encoding and raster export.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::emphasis::{apply_g, remove_g, EmphasisKernel};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::sh::{num_coeffs, Basis, Direction, Kind, ShEvaluator, ShVector};

/// Relative residual above which a projection is rejected.
pub const PROJECTION_RESIDUAL: f64 = 1e-9;

/// Quadrature nodes on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    nodes: Vec<Direction>,
    weights: Vec<f64>,
    design_degree: usize,
    shape: Option<(usize, usize)>,
}

impl SphereGrid {
    pub fn nodes(&self) -> &[Direction] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest degree `D` for which products of two harmonics of degree
    /// at most `D` integrate exactly.
    pub fn design_degree(&self) -> usize {
        self.design_degree
    }

    /// `(rows, cols)` = `(θ samples, φ samples)` for raster grids.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    /// Typical node spacing in radians.
    pub fn resolution(&self) -> f64 {
        (4.0 * PI / self.len() as f64).sqrt()
    }

    /// Gauss-Legendre in `cos θ` (`D + 1` rows, `θ` ascending) times `2D + 1`
    /// uniform azimuths starting at `-π`.
    pub fn gauss(design_degree: usize) -> Self {
        let (xs, ws) = gauss_legendre(design_degree + 1);
        let n_phi = 2 * design_degree + 1;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(xs.len() * n_phi);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (&x, &w) in xs.iter().zip(&ws) {
            let theta = x.clamp(-1.0, 1.0).acos();
            for k in 0..n_phi {
                nodes.push(Direction::new(theta, -PI + dphi * k as f64).expect("colatitude in range"));
                weights.push(w * dphi);
            }
        }
        Self {
            nodes,
            weights,
            design_degree,
            shape: Some((xs.len(), n_phi)),
        }
    }

    /// Near-uniform spiral of `count` equal-weight nodes.
    pub fn fibonacci(count: usize) -> Self {
        let golden = PI * (3.0 - 5f64.sqrt());
        let nodes = (0..count)
            .map(|i| {
                let z = 1.0 - (2 * i + 1) as f64 / count as f64;
                let theta = z.clamp(-1.0, 1.0).acos();
                Direction::new(theta, golden * i as f64).expect("colatitude in range")
            })
            .collect();
        Self {
            nodes,
            weights: vec![4.0 * PI / count as f64; count],
            design_degree: 0,
            shape: None,
        }
    }

    /// Equiangular raster with cell-centred samples, for visual export.
    pub fn equirectangular(rows: usize, cols: usize) -> Self {
        let (dt, dp) = (PI / rows as f64, 2.0 * PI / cols as f64);
        let mut nodes = Vec::with_capacity(rows * cols);
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let theta = (r as f64 + 0.5) * dt;
            let w = 2.0 * dp * (dt / 2.0).sin() * theta.sin();
            for c in 0..cols {
                nodes.push(Direction::new(theta, -PI + (c as f64 + 0.5) * dp).expect("colatitude in range"));
                weights.push(w);
            }
        }
        Self {
            nodes,
            weights,
            design_degree: 0,
            shape: Some((rows, cols)),
        }
    }
}

pub fn gauss_grid(design_degree: usize) -> SphereGrid {
    SphereGrid::gauss(design_degree)
}

/// `Σ_i c_i Y_i(d)` at every node.
pub fn eval_expansion(coeffs: &[Complex64], grid: &SphereGrid) -> Result<Vec<Complex64>> {
    let degree = crate::sh::degree_for_len(coeffs.len()).ok_or(Error::LengthMismatch {
        expected: num_coeffs(crate::sh::isqrt(coeffs.len())),
        found: coeffs.len(),
    })?;
    let mut ev = ShEvaluator::new(degree);
    let mut y = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    Ok(grid
        .nodes()
        .iter()
        .map(|d| {
            ev.eval_into(d, &mut y);
            y.iter().zip(coeffs).map(|(y, c)| y * c).sum()
        })
        .collect())
}

/// Source field `Σ_q g_q B_q Y_q(d)` of the ambisonics coefficients `B`.
pub fn eval_source_field(b: &ShVector, grid: &SphereGrid) -> Result<Vec<Complex64>> {
    b.expect_basis(Basis::Complex)?;
    let mut gamma = b.coeffs().to_vec();
    apply_g(&mut gamma);
    eval_expansion(&gamma, grid)
}

/// Quadrature projection `Σ_nodes w f(d) conj(Y_i(d))` onto degree `degree`.
///
/// The projection is re-evaluated on the grid and rejected if it does not
/// reproduce the samples.
pub fn project_to_sh(field: &[Complex64], grid: &SphereGrid, degree: usize) -> Result<ShVector> {
    if field.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: field.len(),
        });
    }
    if degree > grid.design_degree() {
        return Err(Error::InsufficientGrid {
            grid: grid.design_degree(),
            required: degree,
        });
    }
    let n = num_coeffs(degree);
    let mut ev = ShEvaluator::new(degree);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for ((d, w), f) in grid.nodes().iter().zip(grid.weights()).zip(field) {
        ev.eval_into(d, &mut y);
        let wf = f * *w;
        for (c, y) in coeffs.iter_mut().zip(&y) {
            *c += wf * y.conj();
        }
    }

    let recon = eval_expansion(&coeffs, grid)?;
    let (mut err, mut norm) = (0.0, 0.0);
    for ((r, f), w) in recon.iter().zip(field).zip(grid.weights()) {
        err += w * (r - f).norm_sqr();
        norm += w * f.norm_sqr();
    }
    let residual = if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() };
    if residual > PROJECTION_RESIDUAL {
        return Err(Error::NotBandLimited { degree, residual });
    }
    ShVector::new(coeffs, Basis::Complex, Kind::SourceField)
}

/// Design degree of the grid used by [`oracle_emphasize`].
pub fn oracle_grid_degree(q_degree: usize, l_degree: usize) -> usize {
    q_degree + l_degree + q_degree.max(l_degree) + 2
}

/// Emphasis computed literally: evaluate the source field and the kernel on
/// a grid, multiply pointwise, project, and divide by `g`.
pub fn oracle_emphasize(b: &ShVector, kernel: &EmphasisKernel) -> Result<ShVector> {
    b.expect_basis(Basis::Complex)?;
    let (q, l) = (b.degree(), kernel.degree());
    let grid = gauss_grid(oracle_grid_degree(q, l));
    let mu = eval_source_field(b, &grid)?;
    let v = eval_expansion(kernel.coeffs(), &grid)?;
    let product: Vec<Complex64> = mu.iter().zip(&v).map(|(m, v)| m * v).collect();
    let gamma = project_to_sh(&product, &grid, q + l)?;
    let mut out = gamma.with_kind(Kind::Signal);
    remove_g(out.coeffs_mut());
    Ok(out)
}

/// Coefficients whose source field is the degree-`degree` truncated delta at
/// `u`: `B_q = conj(Y_q(u)) / g_q`.
pub fn encode_plane_wave(u: &Direction, degree: usize) -> ShVector {
    let mut coeffs: Vec<Complex64> = ShEvaluator::new(degree).eval(u).into_iter().map(|y| y.conj()).collect();
    remove_g(&mut coeffs);
    ShVector::new(coeffs, Basis::Complex, Kind::Signal).expect("length matches degree")
}

/// Node with the largest value.
pub fn grid_argmax(values: &[f64], grid: &SphereGrid) -> Option<Direction> {
    values
        .iter()
        .zip(grid.nodes())
        .filter(|(v, _)| !v.is_nan())
        .max_by(|a, b| a.0.total_cmp(b.0))
        .map(|(_, d)| *d)
}

/// `(1/4π) ∫ |f| dΩ` by the grid's quadrature.
pub fn mean_abs_field(values: &[Complex64], grid: &SphereGrid) -> f64 {
    values.iter().zip(grid.weights()).map(|(v, w)| w * v.norm()).sum::<f64>() / (4.0 * PI)
}

/// `∫ |f|² dΩ` restricted to nodes within `radius` of `center`.
pub fn cap_power(values: &[Complex64], grid: &SphereGrid, center: &Direction, radius: f64) -> f64 {
    values
        .iter()
        .zip(grid.nodes().iter().zip(grid.weights()))
        .filter(|(_, (d, _))| d.angle_to(center) <= radius)
        .map(|(v, (_, w))| w * v.norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityFormat {
    Csv,
    Pgm,
}

/// Writes `|values|` on `grid` to `path`.
///
/// CSV rows are `theta,phi,value` in node order (row-major by `θ` on raster
/// grids) with shortest round-trip float formatting. PGM is an 8-bit binary
/// raster, linearly scaled, with the range recorded in a comment.
pub fn export_density(values: &[f64], grid: &SphereGrid, path: &Path, format: DensityFormat) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    match format {
        DensityFormat::Csv => {
            let mut text = String::from("theta,phi,value\n");
            for (d, v) in grid.nodes().iter().zip(values) {
                writeln!(text, "{},{},{}", d.theta(), d.phi(), v.abs()).expect("writing to a String");
            }
            fs::write(path, text)?;
        }
        DensityFormat::Pgm => {
            let (rows, cols) = grid.shape().ok_or(Error::NotRaster)?;
            let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
            let min = mags.iter().copied().fold(f64::INFINITY, f64::min);
            let max = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = max - min;
            let mut out = Vec::with_capacity(64 + mags.len());
            write!(out, "P5\n# min={min} max={max}\n{cols} {rows}\n255\n")?;
            out.extend(mags.iter().map(|m| {
                if span > 0.0 {
                    ((m - min) / span * 255.0).round() as u8
                } else {
                    0
                }
            }));
            fs::write(path, out)?;
        }
    }
    Ok(())
}

/// Reads back a CSV written by [`export_density`] as `(θ, φ, value)` rows.
pub fn read_density_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("theta,phi,value") {
        return Err(Error::Format("missing density header".into()));
    }
    lines
        .map(|line| {
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{line}: {e}"))))
                .collect::<Result<_>>()?;
            match fields[..] {
                [t, p, v] => Ok((t, p, v)),
                _ => Err(Error::Format(format!("expected three fields: {line}"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emphasis::{apply_transfer, axisymmetric_kernel, build_transfer_matrix, normalize_kernel, BetaPolicy};
    use crate::sh::{acn_index, eval_sh, Y00};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_signal(degree: usize, seed: u64) -> ShVector {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_coeffs(degree))
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        ShVector::new(coeffs, Basis::Complex, Kind::Signal).unwrap()
    }

    #[test]
    fn gauss_grid_shapes() {
        let g = gauss_grid(0);
        assert_eq!(g.len(), 1);
        assert!((g.weights()[0] - 4.0 * PI).abs() < 1e-14);
        let g = gauss_grid(4);
        assert_eq!(g.len(), 45);
        assert_eq!(g.shape(), Some((5, 9)));
        assert!((g.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        assert!(g.nodes().windows(2).all(|p| p[0].theta() <= p[1].theta()));
    }

    #[test]
    fn gauss_grid_orthonormality() {
        let d = 4;
        let g = gauss_grid(d);
        let mut ev = ShEvaluator::new(d);
        let ys: Vec<Vec<Complex64>> = g.nodes().iter().map(|x| ev.eval(x)).collect();
        for i in 0..num_coeffs(d) {
            for j in 0..num_coeffs(d) {
                let s: Complex64 = ys.iter().zip(g.weights()).map(|(y, w)| y[i] * y[j].conj() * *w).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-12, "({i},{j}) -> {s}");
            }
        }
    }

    #[test]
    fn fibonacci_weights() {
        let g = SphereGrid::fibonacci(1000);
        assert_eq!(g.len(), 1000);
        assert!((g.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        let e = SphereGrid::equirectangular(90, 180);
        assert!((e.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn source_field_examples() {
        let g = gauss_grid(3);
        let unit = ShVector::new(vec![c(1.0, 0.0)], Basis::Complex, Kind::Signal).unwrap();
        for v in eval_source_field(&unit, &g).unwrap() {
            assert!((v - c(Y00, 0.0)).norm() < 1e-15);
        }

        let u = Direction::new(1.0, 2.0).unwrap();
        let b = encode_plane_wave(&u, 3);
        let field = eval_source_field(&b, &g).unwrap();
        let mut ev = ShEvaluator::new(3);
        let yu = ev.eval(&u);
        for (d, f) in g.nodes().iter().zip(&field) {
            let want: Complex64 = yu.iter().zip(ev.eval(d)).map(|(a, b)| a.conj() * b).sum();
            assert!((f - want).norm() < 1e-13);
            assert!(f.im.abs() < 1e-13);
        }
    }

    #[test]
    fn parseval() {
        let b = random_signal(3, 11);
        let g = gauss_grid(3);
        let power: f64 = eval_source_field(&b, &g)
            .unwrap()
            .iter()
            .zip(g.weights())
            .map(|(f, w)| w * f.norm_sqr())
            .sum();
        let want: f64 = b.coeffs().iter().map(|c| c.norm_sqr()).sum();
        assert!((power - want).abs() < 1e-10);
    }

    #[test]
    fn projection_examples() {
        let g = gauss_grid(4);
        let ones = vec![c(1.0, 0.0); g.len()];
        let p = project_to_sh(&ones, &g, 2).unwrap();
        assert!((p.coeffs()[0].re - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert!(p.coeffs()[1..].iter().all(|z| z.norm() < 1e-12));

        let y21: Vec<Complex64> = g.nodes().iter().map(|d| eval_sh(2, 1, d).unwrap()).collect();
        let p = project_to_sh(&y21, &g, 3).unwrap();
        let k = acn_index(2, 1).unwrap();
        assert_eq!(k, 7);
        for (i, z) in p.coeffs().iter().enumerate() {
            let want = if i == k { 1.0 } else { 0.0 };
            assert!((z - want).norm() < 1e-12);
        }

        let b = random_signal(3, 5);
        let g = gauss_grid(6);
        let mut gamma = project_to_sh(&eval_source_field(&b, &g).unwrap(), &g, 3).unwrap();
        remove_g(gamma.coeffs_mut());
        for (x, y) in gamma.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() < 1e-11);
        }
    }

    #[test]
    fn projection_rejects_coarse_grids() {
        let g = gauss_grid(2);
        assert!(matches!(
            project_to_sh(&vec![c(1.0, 0.0); g.len()], &g, 3),
            Err(Error::InsufficientGrid { grid: 2, required: 3 })
        ));
        // degree 4 content cannot be represented at degree 2
        let g4 = gauss_grid(4);
        let y40_fine: Vec<Complex64> = g4.nodes().iter().map(|d| eval_sh(4, 0, d).unwrap()).collect();
        assert!(matches!(project_to_sh(&y40_fine, &g4, 2), Err(Error::NotBandLimited { .. })));
    }

    #[test]
    fn oracle_identity_and_transfer_agreement() {
        let b = random_signal(2, 1);
        let one = EmphasisKernel::constant(2, 1.0);
        let out = oracle_emphasize(&b, &one).unwrap();
        for (x, y) in out.coeffs().iter().zip(b.zero_padded(4).coeffs()) {
            assert!((x - y).norm() < 1e-12);
        }

        let axis = Direction::new(0.7, -1.1).unwrap();
        let k = axisymmetric_kernel(&axis, 3, 2.0).unwrap();
        let cg = crate::cg::build_cg_matrix(2, 3);
        let t = build_transfer_matrix(&k, 2, &cg).unwrap();
        let fast = apply_transfer(&t, &b).unwrap();
        let slow = oracle_emphasize(&b, &k).unwrap();
        for (x, y) in fast.coeffs().iter().zip(slow.coeffs()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn plane_wave_encoding_examples() {
        let b = encode_plane_wave(&Direction::north_pole(), 0);
        assert!((b.coeffs()[0] - c(Y00, 0.0)).norm() < 1e-15);

        let b = encode_plane_wave(&Direction::north_pole(), 1);
        for (i, z) in b.coeffs().iter().enumerate() {
            assert_eq!(z.norm() == 0.0, i != 0 && i != 2, "index {i}");
        }

        let u = Direction::new(1.9, 0.6).unwrap();
        let grid = SphereGrid::fibonacci(4000);
        let field = eval_source_field(&encode_plane_wave(&u, 3), &grid).unwrap();
        let re: Vec<f64> = field.iter().map(|z| z.re).collect();
        let peak = grid_argmax(&re, &grid).unwrap();
        assert!(peak.angle_to(&u) <= grid.resolution());
    }

    #[test]
    fn spotlight_raises_directivity() {
        let u = Direction::new(1.3, 2.2).unwrap();
        let b = encode_plane_wave(&u, 2);
        let k = normalize_kernel(&axisymmetric_kernel(&u, 2, 2.0).unwrap(), BetaPolicy::UnitPeak).unwrap();
        let out = oracle_emphasize(&b, &k).unwrap();
        let grid = gauss_grid(8);
        let ratio = |v: &ShVector| {
            let f = eval_source_field(v, &grid).unwrap();
            cap_power(&f, &grid, &u, 0.5) / cap_power(&f, &grid, &u, PI)
        };
        assert!(ratio(&out) > ratio(&b), "{} vs {}", ratio(&out), ratio(&b));
    }

    #[test]
    fn density_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = gauss_grid(5);
        let u = Direction::new(0.9, 0.3).unwrap();
        let field = eval_source_field(&encode_plane_wave(&u, 3), &grid).unwrap();
        let mags: Vec<f64> = field.iter().map(|z| z.norm()).collect();

        let csv = dir.path().join("d.csv");
        export_density(&mags, &grid, &csv, DensityFormat::Csv).unwrap();
        let rows = read_density_csv(&csv).unwrap();
        assert_eq!(rows.len(), grid.len());
        for ((t, p, v), (d, m)) in rows.iter().zip(grid.nodes().iter().zip(&mags)) {
            assert_eq!((*t, *p, *v), (d.theta(), d.phi(), *m));
        }

        let pgm = dir.path().join("d.pgm");
        export_density(&mags, &grid, &pgm, DensityFormat::Pgm).unwrap();
        let bytes = fs::read(&pgm).unwrap();
        let header = String::from_utf8_lossy(&bytes[..bytes.len() - grid.len()]);
        assert!(header.starts_with("P5\n# min="));
        assert!(header.ends_with("\n11 6\n255\n"));
        let pixels = &bytes[bytes.len() - grid.len()..];
        assert_eq!(pixels.iter().copied().max(), Some(255));
        assert_eq!(pixels.iter().copied().min(), Some(0));

        let flat = vec![2.5; grid.len()];
        export_density(&flat, &grid, &pgm, DensityFormat::Pgm).unwrap();
        let bytes = fs::read(&pgm).unwrap();
        let pixels = &bytes[bytes.len() - grid.len()..];
        assert!(pixels.iter().all(|&p| p == pixels[0]));

        assert!(matches!(
            export_density(&flat[..10], &SphereGrid::fibonacci(10), &pgm, DensityFormat::Pgm),
            Err(Error::NotRaster)
        ));
    }
}
