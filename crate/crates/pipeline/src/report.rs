//! Machine-readable run summary.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub mode: String,
    pub domain: String,
    pub sample_rate: u32,
    pub frames: usize,
    pub input_degree: usize,
    pub kernel_degree: usize,
    pub emphasized_degree: usize,
    pub output_degree: usize,
    pub output_channels: usize,
    pub projection: bool,
    pub seed: u64,
    pub multiplies: MultiplyReport,
    pub kernel: KernelReport,
    pub density: Option<DensityReport>,
    pub timing: Timing,
}

/// Per-sample operation counts of the three equivalent application paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplyReport {
    pub transfer_complex: u64,
    pub kron_complex: u64,
    pub kron_real_scalings: u64,
    pub file_operator_real: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub kind: String,
    pub axis: Option<[f64; 2]>,
    pub sharpness: Option<f64>,
    pub alpha: Option<u32>,
    pub forgetting: Option<f64>,
    pub undersample: Option<usize>,
    pub block_size: Option<usize>,
    pub beta: f64,
    pub updates: usize,
    /// Blocks (or bins) with no usable signal energy, emphasized by the
    /// identity kernel.
    pub fallbacks: usize,
    pub probe_resolution: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub worst_min_over_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub start_sample: usize,
    pub theta: f64,
    pub phi: f64,
    pub peak: f64,
    pub min_over_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub files: Vec<String>,
    pub mean_abs_input: f64,
    pub mean_abs_output: f64,
    pub mean_abs_output_truncated: f64,
}

/// Wall-clock figures; excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub processing_seconds: f64,
    pub realtime_factor: f64,
}

impl Report {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn to_json_without_timing(&self) -> serde_json::Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v)
    }
}
