use std::f64::consts::PI;

use ambi_emph::source_field::{cap_power, eval_source_field, gauss_grid};
use ambi_emph::{AdaptiveOrder, Direction};
use ambi_emph_pipeline::ambix::{file_to_signal, read_ambix, write_ambix, AmbixAudio};
use ambi_emph_pipeline::synth::{synth_scene, PlaneWave, SourceSignal};
use ambi_emph_pipeline::{process, run, run_adaptive, run_static, Domain, Memory, KernelSpec, StreamConfig};
use num_complex::Complex64;

fn noise(direction: Direction, gain: f64) -> PlaneWave {
    PlaneWave {
        direction,
        gain,
        signal: SourceSignal::Noise,
    }
}

fn cap_ratio(audio: &AmbixAudio, a: &Direction, b: &Direction, radius: f64) -> f64 {
    let grid = gauss_grid(30);
    let (mut pa, mut pb) = (0.0, 0.0);
    for t in (0..audio.frames()).step_by(25) {
        let x: Vec<Complex64> = audio.frame(t).iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
        let f = eval_source_field(&file_to_signal(&x).unwrap(), &grid).unwrap();
        pa += cap_power(&f, &grid, a, radius);
        pb += cap_power(&f, &grid, b, radius);
    }
    pa / pb
}

#[test]
fn identity_kernel_reproduces_input() {
    let input = synth_scene(&[noise(Direction::new(1.0, 1.0).unwrap(), 0.5)], 1, 8000, 2000, 1);
    let config = StreamConfig::spotlight(Direction::north_pole(), 0.0, 2);
    let out = process(&config, &input).unwrap().audio;
    assert_eq!(out.channels(), 16);
    for t in 0..input.frames() {
        let (x, y) = (input.frame(t), out.frame(t));
        for c in 0..4 {
            assert!((x[c] - y[c]).abs() <= f32::EPSILON * x[c].abs().max(1e-30));
        }
        assert!(y[4..].iter().all(|v| v.abs() < 1e-12));
    }

    let mut projected = config.clone();
    projected.projection = true;
    let out = process(&projected, &input).unwrap().audio;
    assert_eq!(out.truncated(1), input);
}

#[test]
fn static_spotlight_favours_its_source() {
    let a = Direction::new(PI / 2.0, 0.0).unwrap();
    let b = Direction::new(PI / 2.0, PI / 2.0).unwrap();
    let input = synth_scene(&[noise(a, 1.0), noise(b, 1.0)], 2, 8000, 3000, 2);
    let config = StreamConfig::spotlight(a, 4.0, 4);
    let outcome = process(&config, &input).unwrap();
    assert_eq!(outcome.audio.channels(), 49);
    assert_eq!(outcome.report.emphasized_degree, 6);
    let cap = 20f64.to_radians();
    assert!(cap_ratio(&outcome.audio, &a, &b, cap) > cap_ratio(&input, &a, &b, cap));
}

#[test]
fn stft_static_matches_time_domain() {
    let input = synth_scene(&[noise(Direction::new(0.7, -2.0).unwrap(), 0.5)], 1, 8000, 1500, 3);
    let mut config = StreamConfig::spotlight(Direction::new(0.5, 0.5).unwrap(), 2.0, 2);
    let time = process(&config, &input).unwrap().audio;
    config.domain = Domain::Stft { window: 128, hop: 64 };
    let stft = process(&config, &input).unwrap().audio;
    let err = time.data().iter().zip(stft.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn adaptive_kernel_finds_stationary_source() {
    let u = Direction::new(1.1, -0.6).unwrap();
    let input = synth_scene(&[noise(u, 0.5)], 2, 8000, 4000, 4);
    let mut config = StreamConfig::adaptive(AdaptiveOrder::Two);
    config.projection = true;
    let outcome = process(&config, &input).unwrap();
    let report = &outcome.report;
    assert_eq!(report.kernel_degree, 4);
    assert_eq!(report.output_channels, 49);
    assert_eq!(report.kernel.updates, 1);
    for p in &report.kernel.trajectory {
        let d = Direction::new(p.theta, p.phi).unwrap();
        assert!(d.angle_to(&u) <= report.kernel.probe_resolution, "{p:?}");
    }
    assert_eq!(outcome.audio.truncated(2), input);
}

#[test]
fn fourth_order_bookkeeping() {
    let u = Direction::new(2.0, 0.4).unwrap();
    let input = synth_scene(&[noise(u, 0.5)], 2, 8000, 1024, 5);
    let mut config = StreamConfig::adaptive(AdaptiveOrder::Four);
    if let KernelSpec::Adaptive { block_size, .. } = &mut config.kernel {
        *block_size = 512;
    }
    let outcome = process(&config, &input).unwrap();
    assert_eq!(outcome.kernel.degree(), 8);
    assert_eq!(outcome.report.emphasized_degree, 10);
    assert_eq!(outcome.audio.channels(), 121);
    assert_eq!(outcome.report.kernel.updates, 2);
    assert!(outcome.report.kernel.worst_min_over_peak > -0.1);
}

#[test]
fn adaptive_stft_runs_per_bin() {
    let u = Direction::new(0.9, 2.5).unwrap();
    let input = synth_scene(&[noise(u, 0.5)], 1, 8000, 2048, 6);
    let mut config = StreamConfig::adaptive(AdaptiveOrder::Two);
    config.domain = Domain::Stft { window: 64, hop: 32 };
    config.projection = true;
    if let KernelSpec::Adaptive { block_size, memory, .. } = &mut config.kernel {
        *block_size = 1024;
        *memory = Memory::Unbounded;
    }
    let outcome = process(&config, &input).unwrap();
    assert_eq!(outcome.audio.channels(), 16);
    assert_eq!(outcome.audio.truncated(1), input);
    let last = outcome.report.kernel.trajectory.last().unwrap();
    let d = Direction::new(last.theta, last.phi).unwrap();
    assert!(d.angle_to(&u) < 0.1, "{last:?}");
}

#[test]
fn silent_input_falls_back_to_identity() {
    let input = AmbixAudio::silent(8000, 1, 3000);
    let config = StreamConfig::adaptive(AdaptiveOrder::Two);
    let outcome = process(&config, &input).unwrap();
    assert!(outcome.audio.data().iter().all(|&x| x == 0.0));
    assert_eq!(outcome.report.kernel.fallbacks, 1);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_scene(&[noise(Direction::new(1.3, 0.2).unwrap(), 0.4)], 1, 8000, 3000, 7);
    let in_path = dir.path().join("in.wav");
    write_ambix(&in_path, &input).unwrap();
    let mut config = StreamConfig::adaptive(AdaptiveOrder::Two);
    config.seed = 9;
    if let KernelSpec::Adaptive { block_size, .. } = &mut config.kernel {
        *block_size = 1000;
    }
    let a = run_adaptive(&config, &in_path, &dir.path().join("a.wav")).unwrap();
    let b = run_adaptive(&config, &in_path, &dir.path().join("b.wav")).unwrap();
    assert_eq!(a.to_json_without_timing().unwrap(), b.to_json_without_timing().unwrap());
    assert!(!a.to_json_without_timing().unwrap().contains("processing_seconds"));
    assert_eq!(
        std::fs::read(dir.path().join("a.wav")).unwrap(),
        std::fs::read(dir.path().join("b.wav")).unwrap()
    );
    assert_eq!(a.kernel.trajectory.len(), 3);
    assert!(run_static(&config, &in_path, &dir.path().join("c.wav")).is_err());
}

#[test]
fn truncated_output_and_density_maps() {
    let dir = tempfile::tempdir().unwrap();
    let u = Direction::new(0.8, 1.0).unwrap();
    let input = synth_scene(&[noise(u, 0.5)], 1, 8000, 1000, 8);
    let in_path = dir.path().join("in.wav");
    let out_path = dir.path().join("out.wav");
    write_ambix(&in_path, &input).unwrap();
    let mut config = StreamConfig::spotlight(u, 2.0, 2);
    config.truncate_out = Some(2);
    config.density_out = Some(dir.path().join("maps"));
    let report = run(&config, &in_path, &out_path).unwrap();
    let out = read_ambix(&out_path).unwrap();
    assert_eq!(out.channels(), 9);
    assert_eq!(report.output_channels, 9);
    assert_eq!(report.multiplies.transfer_complex, 64);
    assert_eq!(report.multiplies.file_operator_real, 36);
    let density = report.density.unwrap();
    assert_eq!(density.files.len(), 8);
    for f in &density.files {
        assert!(dir.path().join("maps").join(f).exists());
    }
    let rows = ambi_emph::source_field::read_density_csv(&dir.path().join("maps/input_density.csv")).unwrap();
    let best = rows.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    assert!(Direction::new(best.0, best.1).unwrap().angle_to(&u) < 0.1);
}

#[test]
fn config_errors_are_reported() {
    let input = AmbixAudio::silent(8000, 1, 10);
    let mut config = StreamConfig::spotlight(Direction::north_pole(), 2.0, 2);
    config.input_degree = Some(2);
    let err = process(&config, &input).unwrap_err();
    assert_eq!(err.category(), "config");
    config.input_degree = None;
    config.domain = Domain::Stft { window: 100, hop: 50 };
    assert_eq!(process(&config, &input).unwrap_err().category(), "config");
}
