//! File-level static and adaptive emphasis.

use std::path::Path;
use std::time::Instant;

use ambi_emph::adaptive::{estimate_kernel, raise_emphasis, CovarianceAccumulator, UpdateSchedule};
use ambi_emph::emphasis::{
    apply_kron_counted, apply_transfer_counted, axisymmetric_kernel, build_transfer_matrix, normalize_kernel,
    BetaPolicy, EmphasisKernel, MulCount,
};
use ambi_emph::sh::{num_coeffs, Direction};
use ambi_emph::{load_or_build, AdaptiveOrder, Averaging, Basis, CgMatrix, Kind, ShVector, SphereGrid};
use num_complex::Complex64;

use crate::ambix::{file_to_signal, read_ambix, write_ambix, AmbixAudio};
use crate::config::{Domain, KernelSpec, StreamConfig};
use crate::density;
use crate::error::{PipelineError, Result};
use crate::operator::FileOperator;
use crate::report::{DensityReport, KernelReport, MultiplyReport, Report, Timing, TrajectoryPoint};
use crate::stft::Stft;

/// Probe nodes used for the min/peak diagnostic.
pub const DIAGNOSTIC_NODES: usize = 2000;

/// Processed audio with its report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub audio: AmbixAudio,
    pub report: Report,
    /// Kernel in force at the end of the file.
    pub kernel: EmphasisKernel,
}

struct Adaptive {
    order: AdaptiveOrder,
    beta: BetaPolicy,
    averaging: Averaging,
    schedule: UpdateSchedule,
    cg_signal: CgMatrix,
    cg_square: Option<CgMatrix>,
}

impl Adaptive {
    /// `None` when the accumulator holds no usable energy.
    fn kernel(&self, acc: &CovarianceAccumulator) -> Result<Option<EmphasisKernel>> {
        use ambi_emph::Error as E;
        let k = match estimate_kernel(acc, &self.cg_signal, self.beta) {
            Ok(k) => k,
            Err(E::DegenerateKernel(_) | E::EmptyAccumulator) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if self.order == AdaptiveOrder::Two {
            return Ok(Some(k));
        }
        let cg = self.cg_square.as_ref().expect("square matrix for the fourth order");
        let k4 = raise_emphasis(&k, cg)?;
        Ok(Some(match self.beta {
            BetaPolicy::Fixed(_) => k4,
            policy => match normalize_kernel(&k4, policy) {
                Ok(k) => k,
                Err(E::DegenerateKernel(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            },
        }))
    }
}

struct Diagnostics {
    probe: SphereGrid,
    trajectory: Vec<TrajectoryPoint>,
    worst: f64,
    fallbacks: usize,
    updates: usize,
}

impl Diagnostics {
    fn new() -> Self {
        Self {
            probe: SphereGrid::fibonacci(DIAGNOSTIC_NODES),
            trajectory: Vec::new(),
            worst: f64::INFINITY,
            fallbacks: 0,
            updates: 0,
        }
    }

    fn record(&mut self, kernel: &EmphasisKernel, start_sample: usize) {
        let (peak, at) = kernel.peak();
        let min = kernel.sample(&self.probe).into_iter().fold(f64::INFINITY, f64::min);
        let ratio = if peak != 0.0 { min / peak } else { 0.0 };
        self.worst = self.worst.min(ratio);
        self.trajectory.push(TrajectoryPoint {
            start_sample,
            theta: at.theta(),
            phi: at.phi(),
            peak,
            min_over_peak: ratio,
        });
    }
}

fn cache_dir(config: &StreamConfig) -> Option<std::path::PathBuf> {
    config
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("AMBI_EMPH_CACHE_DIR").map(Into::into))
}

fn operator_for(kernel: &EmphasisKernel, q: usize, cg: &CgMatrix) -> Result<FileOperator> {
    FileOperator::from_transfer(&build_transfer_matrix(kernel, q, cg)?)
}

/// Runs the configured emphasis over `input` in memory.
pub fn process(config: &StreamConfig, input: &AmbixAudio) -> Result<Outcome> {
    let q = input.degree();
    let rate = input.sample_rate();
    config.validate(q, rate)?;
    let l = config.kernel_degree(q);
    let p = q + l;
    let out_degree = config.truncate_out.unwrap_or(p);
    let w = num_coeffs(out_degree);
    let cache = cache_dir(config);
    let cache = cache.as_deref();

    let started = Instant::now();
    let cg = load_or_build(q, l, cache)?;
    let mut diag = Diagnostics::new();

    let (data, kernel) = match &config.kernel {
        KernelSpec::Static {
            axis,
            sharpness,
            degree,
        } => {
            let kernel = normalize_kernel(&axisymmetric_kernel(axis, *degree, *sharpness)?, config.beta)?;
            let op = operator_for(&kernel, q, &cg)?;
            diag.record(&kernel, 0);
            diag.updates = 1;
            let data = match config.domain {
                Domain::Time => static_time(input, &op, w),
                Domain::Stft { window, hop } => {
                    let stft = Stft::new(window, hop)?;
                    let frames = stft.frame_count(input.frames());
                    run_stft(input, &stft, w, frames.max(1), |_, _| Ok(Some(vec![op.clone()])))?
                }
            };
            (data, kernel)
        }
        KernelSpec::Adaptive {
            order,
            undersample,
            block_size,
            ..
        } => {
            let adaptive = Adaptive {
                order: *order,
                beta: config.beta,
                averaging: config.averaging(rate)?,
                schedule: UpdateSchedule::new(*block_size, *undersample)?,
                cg_signal: load_or_build(q, q, cache)?,
                cg_square: match order {
                    AdaptiveOrder::Two => None,
                    AdaptiveOrder::Four => Some(load_or_build(2 * q, 2 * q, cache)?),
                },
            };
            match config.domain {
                Domain::Time => adaptive_time(input, &adaptive, &cg, w, l, &mut diag)?,
                Domain::Stft { window, hop } => adaptive_stft(input, &adaptive, &cg, w, l, window, hop, &mut diag)?,
            }
        }
    };

    let mut audio = AmbixAudio::new(rate, w, data)?;
    if config.projection {
        project_low_degree(input, &mut audio);
    }
    let seconds = started.elapsed().as_secs_f64();

    let multiplies = count_multiplies(&kernel, q, &cg, w)?;
    let density = match &config.density_out {
        Some(dir) => Some(write_density(dir, input, &audio, &kernel, q)?),
        None => None,
    };

    let (axis, sharpness) = match &config.kernel {
        KernelSpec::Static { axis, sharpness, .. } => (Some([axis.theta(), axis.phi()]), Some(*sharpness)),
        _ => (None, None),
    };
    let (alpha, forgetting, undersample, block_size) = match &config.kernel {
        KernelSpec::Adaptive {
            order,
            undersample,
            block_size,
            ..
        } => (
            Some(order.alpha()),
            match config.averaging(rate)? {
                Averaging::Forgetting(l) => Some(l),
                Averaging::AbsorbingMean => None,
            },
            Some(*undersample),
            Some(*block_size),
        ),
        _ => (None, None, None, None),
    };
    let report = Report {
        mode: if config.is_adaptive() { "adaptive" } else { "static" }.into(),
        domain: config.domain.name().into(),
        sample_rate: rate,
        frames: input.frames(),
        input_degree: q,
        kernel_degree: l,
        emphasized_degree: p,
        output_degree: out_degree,
        output_channels: w,
        projection: config.projection,
        seed: config.seed,
        multiplies,
        kernel: KernelReport {
            kind: if config.is_adaptive() { "adaptive" } else { "spotlight" }.into(),
            axis,
            sharpness,
            alpha,
            forgetting,
            undersample,
            block_size,
            beta: kernel.beta(),
            updates: diag.updates,
            fallbacks: diag.fallbacks,
            probe_resolution: diag.probe.resolution(),
            trajectory: diag.trajectory,
            worst_min_over_peak: if diag.worst.is_finite() { diag.worst } else { 0.0 },
        },
        density,
        timing: Timing {
            processing_seconds: seconds,
            realtime_factor: if seconds > 0.0 { input.duration() / seconds } else { f64::INFINITY },
        },
    };
    Ok(Outcome { audio, report, kernel })
}

fn static_time(input: &AmbixAudio, op: &FileOperator, w: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; input.frames() * w];
    for (frame, o) in input.data().chunks_exact(input.channels()).zip(out.chunks_exact_mut(w)) {
        op.apply_frame(frame, o);
    }
    out
}

fn to_complex(frame: &[f32]) -> Vec<Complex64> {
    frame.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect()
}

fn adaptive_time(
    input: &AmbixAudio,
    adaptive: &Adaptive,
    cg: &CgMatrix,
    w: usize,
    l: usize,
    diag: &mut Diagnostics,
) -> Result<(Vec<f32>, EmphasisKernel)> {
    let q = input.degree();
    let mut acc = CovarianceAccumulator::new(q, adaptive.averaging)?;
    let mut out = vec![0.0f32; input.frames() * w];
    let mut kernel = EmphasisKernel::constant(l, 1.0);
    let block = adaptive.schedule.block_size();
    for start in (0..input.frames()).step_by(block) {
        let end = (start + block).min(input.frames());
        for t in start..end {
            if adaptive.schedule.accumulates(t) {
                acc.accumulate(&file_to_signal(&to_complex(input.frame(t)))?)?;
            }
        }
        diag.updates += 1;
        let op = match adaptive.kernel(&acc)? {
            Some(k) => {
                diag.record(&k, start);
                let op = operator_for(&k, q, cg)?;
                kernel = k;
                op
            }
            None => {
                diag.fallbacks += 1;
                FileOperator::identity(q, q + l)
            }
        };
        let c = input.channels();
        for t in start..end {
            op.apply_frame(&input.data()[t * c..(t + 1) * c], &mut out[t * w..(t + 1) * w]);
        }
    }
    Ok((out, kernel))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_stft(
    input: &AmbixAudio,
    adaptive: &Adaptive,
    cg: &CgMatrix,
    w: usize,
    l: usize,
    window: usize,
    hop: usize,
    diag: &mut Diagnostics,
) -> Result<(Vec<f32>, EmphasisKernel)> {
    let q = input.degree();
    let stft = Stft::new(window, hop)?;
    let block_frames = (adaptive.schedule.block_size() / hop).max(1);
    let mut accs = vec![CovarianceAccumulator::new(q, adaptive.averaging)?; stft.bins()];
    let mut kernel = EmphasisKernel::constant(l, 1.0);
    let data = run_stft(input, &stft, w, block_frames, |first, spectra| {
        for (i, spec) in spectra.iter().enumerate() {
            if adaptive.schedule.accumulates(first + i) {
                for (bin, acc) in accs.iter_mut().enumerate() {
                    let x: Vec<Complex64> = spec.iter().map(|ch| ch[bin]).collect();
                    acc.accumulate(&file_to_signal(&x)?)?;
                }
            }
        }
        diag.updates += 1;
        // the bin carrying the most energy represents the block in the report
        let loudest = accs
            .iter()
            .enumerate()
            .map(|(b, a)| (b, (0..a.covariance().nrows()).map(|i| a.covariance()[(i, i)].re).sum::<f64>()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(b, _)| b)
            .unwrap_or(0);
        let mut ops = Vec::with_capacity(accs.len());
        for (bin, acc) in accs.iter().enumerate() {
            ops.push(match adaptive.kernel(acc)? {
                Some(k) => {
                    let op = operator_for(&k, q, cg)?;
                    if bin == loudest {
                        diag.record(&k, (first * hop).saturating_sub(hop));
                        kernel = k;
                    }
                    op
                }
                None => {
                    diag.fallbacks += 1;
                    FileOperator::identity(q, q + l)
                }
            });
        }
        Ok(Some(ops))
    })?;
    Ok((data, kernel))
}

/// Block-wise STFT processing. `operators` receives the first frame index of
/// each block and its spectra (`[frame][channel][bin]`) and returns either one
/// operator for every bin or one per bin.
fn run_stft<F>(input: &AmbixAudio, stft: &Stft, w: usize, block_frames: usize, mut operators: F) -> Result<Vec<f32>>
where
    F: FnMut(usize, &[Vec<Vec<Complex64>>]) -> Result<Option<Vec<FileOperator>>>,
{
    let len = input.frames();
    let channels: Vec<Vec<f64>> = (0..input.channels())
        .map(|c| input.channel(c).into_iter().map(f64::from).collect())
        .collect();
    let bins = stft.bins();
    let total = stft.frame_count(len);
    let mut outs = vec![vec![0.0f64; len]; w];
    let mut x = vec![Complex64::new(0.0, 0.0); channels.len()];
    let mut y = vec![Complex64::new(0.0, 0.0); w];
    let mut out_spec = vec![vec![Complex64::new(0.0, 0.0); bins]; w];
    let mut current: Vec<FileOperator> = Vec::new();
    for first in (0..total).step_by(block_frames) {
        let last = (first + block_frames).min(total);
        let spectra: Vec<Vec<Vec<Complex64>>> = (first..last)
            .map(|f| {
                channels
                    .iter()
                    .map(|ch| {
                        let mut s = vec![Complex64::new(0.0, 0.0); bins];
                        stft.analyze_frame(ch, f, &mut s);
                        s
                    })
                    .collect()
            })
            .collect();
        if let Some(ops) = operators(first, &spectra)? {
            current = ops;
        }
        for (i, spec) in spectra.iter().enumerate() {
            for bin in 0..bins {
                for (xc, ch) in x.iter_mut().zip(spec) {
                    *xc = ch[bin];
                }
                let op = if current.len() == 1 { &current[0] } else { &current[bin] };
                op.apply_complex(&x, &mut y);
                for (o, v) in out_spec.iter_mut().zip(&y) {
                    o[bin] = *v;
                }
            }
            for (o, sig) in out_spec.iter().zip(outs.iter_mut()) {
                stft.synthesize_frame(o, first + i, sig);
            }
        }
    }
    let mut data = vec![0.0f32; len * w];
    for (c, sig) in outs.iter().enumerate() {
        for (t, v) in sig.iter().enumerate() {
            data[t * w + c] = *v as f32;
        }
    }
    Ok(data)
}

/// Overwrites the input-degree channels of `out` with the input samples.
fn project_low_degree(input: &AmbixAudio, out: &mut AmbixAudio) {
    let (c, w) = (input.channels(), out.channels());
    let k = c.min(w);
    for (src, dst) in input.data().chunks_exact(c).zip(out.data_mut().chunks_exact_mut(w)) {
        dst[..k].copy_from_slice(&src[..k]);
    }
}

fn count_multiplies(kernel: &EmphasisKernel, q: usize, cg: &CgMatrix, w: usize) -> Result<MultiplyReport> {
    let probe = ShVector::zeros(q, Basis::Complex, Kind::Signal);
    let mut transfer = MulCount::default();
    apply_transfer_counted(&build_transfer_matrix(kernel, q, cg)?, &probe, &mut transfer)?;
    let mut kron = MulCount::default();
    apply_kron_counted(cg, kernel, &probe, &mut kron)?;
    Ok(MultiplyReport {
        transfer_complex: transfer.complex,
        kron_complex: kron.complex,
        kron_real_scalings: kron.real_scale,
        file_operator_real: (w * num_coeffs(q)) as u64,
    })
}

fn write_density(
    dir: &Path,
    input: &AmbixAudio,
    output: &AmbixAudio,
    kernel: &EmphasisKernel,
    q: usize,
) -> Result<DensityReport> {
    let grid = density::raster();
    let before = density::mean_abs_source_field(input, &grid)?;
    let after = density::mean_abs_source_field(output, &grid)?;
    let truncated = density::mean_abs_source_field(&output.truncated(q.min(output.degree())), &grid)?;
    let mut files = density::write_maps(dir, "input_density", &before, &grid)?;
    files.extend(density::write_maps(dir, "output_density", &after, &grid)?);
    files.extend(density::write_maps(dir, "output_truncated_density", &truncated, &grid)?);
    files.extend(density::write_maps(dir, "kernel", &density::kernel_values(kernel, &grid), &grid)?);
    Ok(DensityReport {
        files,
        mean_abs_input: density::sphere_mean(&before, &grid),
        mean_abs_output: density::sphere_mean(&after, &grid),
        mean_abs_output_truncated: density::sphere_mean(&truncated, &grid),
    })
}

/// Reads `in_path`, processes it, writes `out_path`.
pub fn run(config: &StreamConfig, in_path: &Path, out_path: &Path) -> Result<Report> {
    let input = read_ambix(in_path)?;
    let outcome = process(config, &input)?;
    write_ambix(out_path, &outcome.audio)?;
    Ok(outcome.report)
}

pub fn run_static(config: &StreamConfig, in_path: &Path, out_path: &Path) -> Result<Report> {
    if config.is_adaptive() {
        return Err(PipelineError::Config("static run requested with an adaptive kernel".into()));
    }
    run(config, in_path, out_path)
}

pub fn run_adaptive(config: &StreamConfig, in_path: &Path, out_path: &Path) -> Result<Report> {
    if !config.is_adaptive() {
        return Err(PipelineError::Config("adaptive run requested with a static kernel".into()));
    }
    run(config, in_path, out_path)
}

/// Parses `"theta,phi"` in radians.
pub fn parse_direction(s: &str) -> Result<Direction> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [t, p] = parts[..] else {
        return Err(PipelineError::Config(format!("direction {s:?} is not \"theta,phi\"")));
    };
    let parse = |x: &str| {
        x.parse::<f64>()
            .map_err(|e| PipelineError::Config(format!("direction {s:?}: {e}")))
    };
    Direction::new(parse(t)?, parse(p)?).map_err(|e| PipelineError::Config(e.to_string()))
}
