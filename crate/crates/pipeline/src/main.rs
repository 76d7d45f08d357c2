use std::path::PathBuf;
use std::process::ExitCode;

use ambi_emph::{AdaptiveOrder, BetaPolicy};
use ambi_emph_pipeline::ambix::write_ambix;
use ambi_emph_pipeline::pipeline::parse_direction;
use ambi_emph_pipeline::synth::{synth_scene, PlaneWave, SourceSignal};
use ambi_emph_pipeline::{run, Domain, KernelSpec, Memory, PipelineError, Result, StreamConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ambi-emph", version, about = "Directional emphasis of ambisonics (ambix) recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a static spotlight or an adaptive emphasis kernel to a file.
    Emphasize(EmphasizeArgs),
    /// Write a synthetic plane-wave scene.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Static,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Time,
    Stft,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct EmphasizeArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// Expected input degree; checked against the channel count.
    #[arg(long)]
    degree: Option<usize>,
    /// Static kernel degree.
    #[arg(long, default_value_t = 4)]
    kernel_degree: usize,
    /// Spotlight direction as "theta,phi" in radians (colatitude, azimuth).
    #[arg(long, default_value = "1.5707963267948966,0")]
    axis: String,
    #[arg(long, default_value_t = 2.0)]
    sharpness: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=4))]
    alpha: u32,
    #[arg(long, value_enum, default_value_t = DomainArg::Time)]
    domain: DomainArg,
    #[arg(long, default_value_t = ambi_emph_pipeline::stft::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = ambi_emph_pipeline::stft::DEFAULT_HOP)]
    hop: usize,
    #[arg(long, default_value_t = ambi_emph_pipeline::config::DEFAULT_BLOCK)]
    block: usize,
    #[arg(long, default_value_t = ambi_emph_pipeline::config::DEFAULT_UNDERSAMPLE)]
    undersample: usize,
    /// Averaging time constant in seconds.
    #[arg(long, default_value_t = ambi_emph_pipeline::config::DEFAULT_TIME_CONSTANT)]
    time_constant: f64,
    /// Per-update forgetting factor; overrides the time constant. 1 averages everything.
    #[arg(long)]
    forgetting: Option<f64>,
    /// "peak", "mean" or a fixed positive factor.
    #[arg(long, default_value = "peak")]
    beta: String,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    project: Switch,
    /// Write only the channels up to this degree.
    #[arg(long)]
    truncate_out: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    density_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for cached coupling matrices.
    #[arg(long, env = "AMBI_EMPH_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long)]
    degree: usize,
    /// "theta,phi" or "theta,phi,gain"; repeat for several sources.
    #[arg(long = "source", required = true)]
    sources: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    seconds: f64,
    #[arg(long, default_value_t = 48_000)]
    rate: u32,
    /// Sine frequency in Hz; white noise when absent.
    #[arg(long)]
    sine: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn beta_policy(s: &str) -> Result<BetaPolicy> {
    match s {
        "peak" => Ok(BetaPolicy::UnitPeak),
        "mean" => Ok(BetaPolicy::UnitMean),
        x => x
            .parse::<f64>()
            .map(BetaPolicy::Fixed)
            .map_err(|_| PipelineError::Config(format!("beta {x:?} is not peak, mean or a number"))),
    }
}

fn emphasize(a: EmphasizeArgs) -> Result<()> {
    let kernel = match a.mode {
        Mode::Static => KernelSpec::Static {
            axis: parse_direction(&a.axis)?,
            sharpness: a.sharpness,
            degree: a.kernel_degree,
        },
        Mode::Adaptive => KernelSpec::Adaptive {
            order: AdaptiveOrder::from_alpha(a.alpha)?,
            memory: match a.forgetting {
                Some(1.0) => Memory::Unbounded,
                Some(l) => Memory::Factor(l),
                None => Memory::TimeConstant(a.time_constant),
            },
            undersample: a.undersample,
            block_size: a.block,
        },
    };
    let mut config = StreamConfig::new(kernel);
    config.domain = match a.domain {
        DomainArg::Time => Domain::Time,
        DomainArg::Stft => Domain::Stft {
            window: a.window,
            hop: a.hop,
        },
    };
    config.projection = matches!(a.project, Switch::On);
    config.beta = beta_policy(&a.beta)?;
    config.input_degree = a.degree;
    config.truncate_out = a.truncate_out;
    config.density_out = a.density_out;
    config.cache_dir = a.cache_dir;
    config.seed = a.seed;

    let report = run(&config, &a.input, &a.output)?;
    if let Some(path) = a.report {
        std::fs::write(path, report.to_json()? + "\n")?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let signal = match a.sine {
        Some(f) => SourceSignal::Sine(f),
        None => SourceSignal::Noise,
    };
    let sources = a
        .sources
        .iter()
        .map(|s| {
            let (dir, gain) = match s.splitn(3, ',').collect::<Vec<_>>()[..] {
                [t, p, g] => (
                    format!("{t},{p}"),
                    g.trim()
                        .parse::<f64>()
                        .map_err(|e| PipelineError::Config(format!("source {s:?}: {e}")))?,
                ),
                _ => (s.clone(), 1.0),
            };
            Ok(PlaneWave {
                direction: parse_direction(&dir)?,
                gain,
                signal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !a.seconds.is_finite() || a.seconds < 0.0 || a.rate == 0 {
        return Err(PipelineError::Config("duration and rate must be positive".into()));
    }
    let frames = (a.seconds * a.rate as f64).round() as usize;
    write_ambix(&a.output, &synth_scene(&sources, a.degree, a.rate, frames, a.seed))
}

fn fail(category: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": category, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    let result = match cli.command {
        Command::Emphasize(a) => emphasize(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e.to_string(), e.exit_code() as u8),
    }
}
