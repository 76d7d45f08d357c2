//! Ambisonics files in, emphasized ambisonics files out.

pub mod ambix;
pub mod config;
pub mod density;
pub mod error;
pub mod operator;
pub mod pipeline;
pub mod report;
pub mod stft;
pub mod synth;

pub use config::{Domain, KernelSpec, Memory, StreamConfig};
pub use error::{PipelineError, Result};
pub use pipeline::{process, run, run_adaptive, run_static, Outcome};
