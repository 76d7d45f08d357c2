//! Time-averaged magnitude of the source field on an equirectangular raster.

use std::path::Path;

use ambi_emph::emphasis::{apply_g, EmphasisKernel};
use ambi_emph::sh::{num_coeffs, ShEvaluator};
use ambi_emph::source_field::{export_density, DensityFormat};
use ambi_emph::SphereGrid;
use num_complex::Complex64;

use crate::ambix::{file_to_signal, AmbixAudio};
use crate::error::Result;

pub const RASTER_ROWS: usize = 36;
pub const RASTER_COLS: usize = 72;
/// Frames averaged at most; longer files are strided evenly.
pub const MAX_FRAMES: usize = 4096;

pub fn raster() -> SphereGrid {
    SphereGrid::equirectangular(RASTER_ROWS, RASTER_COLS)
}

/// `(1/T) Σ_t |μ_t(d)|` at every node of `grid`.
pub fn mean_abs_source_field(audio: &AmbixAudio, grid: &SphereGrid) -> Result<Vec<f64>> {
    let n = num_coeffs(audio.degree());
    let mut ev = ShEvaluator::new(audio.degree());
    let ys: Vec<Vec<Complex64>> = grid.nodes().iter().map(|d| ev.eval(d)).collect();
    let mut acc = vec![0.0; grid.len()];
    let stride = audio.frames().div_ceil(MAX_FRAMES).max(1);
    let mut used = 0usize;
    for t in (0..audio.frames()).step_by(stride) {
        let values: Vec<Complex64> = audio.frame(t).iter().map(|&x| Complex64::new(x as f64, 0.0)).collect();
        let mut gamma = file_to_signal(&values)?.into_coeffs();
        apply_g(&mut gamma);
        for (a, y) in acc.iter_mut().zip(&ys) {
            let mu: Complex64 = y[..n].iter().zip(&gamma).map(|(y, g)| y * g).sum();
            *a += mu.norm();
        }
        used += 1;
    }
    if used > 0 {
        acc.iter_mut().for_each(|a| *a /= used as f64);
    }
    Ok(acc)
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.pgm`; returns the file names.
pub fn write_maps(dir: &Path, stem: &str, values: &[f64], grid: &SphereGrid) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (ext, format) in [("csv", DensityFormat::Csv), ("pgm", DensityFormat::Pgm)] {
        let name = format!("{stem}.{ext}");
        export_density(values, grid, &dir.join(&name), format)?;
        names.push(name);
    }
    Ok(names)
}

pub fn kernel_values(kernel: &EmphasisKernel, grid: &SphereGrid) -> Vec<f64> {
    kernel.sample(grid)
}

pub fn sphere_mean(values: &[f64], grid: &SphereGrid) -> f64 {
    values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum::<f64>() / (4.0 * std::f64::consts::PI)
}
