//! Flat TOML run configuration. Every key is optional; missing keys keep the
//! library defaults and command-line flags override whatever the file sets.

use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use stml_core::harness::{Method, MotionKind, RunConfig, SynthSpec};
use stml_core::StopMode;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub spatial_levels: Option<usize>,
    pub temporal_coarsest_size: Option<usize>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub stop_mode: Option<StopArg>,
    pub method: Option<MethodArg>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,

    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub memory: Option<usize>,

    // synthetic data
    pub dims: Option<Vec<usize>>,
    pub frames: Option<usize>,
    pub translation_amplitude: Option<f64>,
    pub rotation_amplitude_deg: Option<f64>,
    pub motion: Option<MotionArg>,
    pub noise: Option<f64>,
    pub blobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StopArg {
    Dissim,
    Param,
}

impl From<StopArg> for StopMode {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Dissim => StopMode::Dissimilarity,
            StopArg::Param => StopMode::Parameter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Stml,
    Spml,
    Both,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Stml => Method::Stml,
            MethodArg::Spml => Method::Spml,
            MethodArg::Both => Method::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MotionArg {
    Sinusoidal,
    Linear,
}

impl From<MotionArg> for MotionKind {
    fn from(m: MotionArg) -> Self {
        match m {
            MotionArg::Sinusoidal => MotionKind::Sinusoidal,
            MotionArg::Linear => MotionKind::Linear,
        }
    }
}

/// Registration flags shared by `register` and `bench`.
#[derive(Debug, Default, Args)]
pub struct RunFlags {
    /// Temporal smoothness weight of the least-squares predictor
    #[arg(long)]
    pub beta: Option<f64>,
    /// Drift penalty weight (derived from the data when omitted)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relative tolerance of the temporal stopping rule
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub stop_mode: Option<StopArg>,
    #[arg(long)]
    pub spatial_levels: Option<usize>,
    /// Size of the coarsest temporal level
    #[arg(long)]
    pub temporal_coarsest: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for objective evaluation, 0 for all cores
    #[arg(long)]
    pub threads: Option<usize>,
    /// Optimizer iteration cap per solve
    #[arg(long)]
    pub max_iters: Option<usize>,
}

/// Synthetic data flags shared by `synth` and `bench`.
#[derive(Debug, Default, Args)]
pub struct SynthFlags {
    /// Grid size, e.g. `64,64`
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long, value_enum)]
    pub motion: Option<MotionArg>,
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Layers defaults, then the file, then the flags.
pub fn run_config(file: &FileConfig, flags: &RunFlags, method: Option<MethodArg>) -> RunConfig {
    let mut c = RunConfig::default();
    let set = |dst: &mut usize, a: Option<usize>, b: Option<usize>| {
        if let Some(v) = b.or(a) {
            *dst = v;
        }
    };
    set(&mut c.spatial_levels, file.spatial_levels, flags.spatial_levels);
    set(&mut c.temporal_coarsest_size, file.temporal_coarsest_size, flags.temporal_coarsest);
    set(&mut c.threads, file.threads, flags.threads);
    set(&mut c.optim.max_iters, file.max_iters, flags.max_iters);
    set(&mut c.optim.memory, file.memory, None);
    c.beta = flags.beta.or(file.beta).unwrap_or(c.beta);
    c.lambda = flags.lambda.or(file.lambda).or(c.lambda);
    c.eps = flags.eps.or(file.eps).unwrap_or(c.eps);
    c.optim.grad_tol = file.grad_tol.unwrap_or(c.optim.grad_tol);
    if let Some(m) = flags.stop_mode.or(file.stop_mode) {
        c.stop_mode = m.into();
    }
    if let Some(m) = method.or(file.method) {
        c.method = m.into();
    }
    c.seed = flags.seed.or(file.seed).unwrap_or(c.seed);
    c
}

pub fn synth_spec(file: &FileConfig, flags: &SynthFlags, seed: Option<u64>) -> SynthSpec {
    let mut s = SynthSpec::default();
    if let Some(d) = flags.dims.clone().or_else(|| file.dims.clone()) {
        s.dims = d;
    }
    s.frames = flags.frames.or(file.frames).unwrap_or(s.frames);
    s.translation_amplitude = file.translation_amplitude.unwrap_or(s.translation_amplitude);
    s.rotation_amplitude_deg = file.rotation_amplitude_deg.unwrap_or(s.rotation_amplitude_deg);
    if let Some(m) = flags.motion.or(file.motion) {
        s.motion = m.into();
    }
    s.noise = flags.noise.or(file.noise).unwrap_or(s.noise);
    s.blobs = file.blobs.unwrap_or(s.blobs);
    s.seed = seed.or(file.seed).unwrap_or(s.seed);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("beta = 0.5\neps = 0.1\nstop_mode = \"param\"\nseed = 7").unwrap();
        let flags = RunFlags { eps: Some(0.2), ..Default::default() };
        let c = run_config(&file, &flags, Some(MethodArg::Spml));
        assert_eq!(c.beta, 0.5);
        assert_eq!(c.eps, 0.2);
        assert_eq!(c.stop_mode, StopMode::Parameter);
        assert_eq!(c.method, Method::Spml);
        assert_eq!(c.seed, 7);
        assert_eq!(c.spatial_levels, RunConfig::default().spatial_levels);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("betta = 1.0").is_err());
    }

    #[test]
    fn synth_keys() {
        let file: FileConfig = toml::from_str("dims = [32, 32]\nmotion = \"linear\"\nnoise = 0.0").unwrap();
        let s = synth_spec(&file, &SynthFlags { frames: Some(9), ..Default::default() }, Some(3));
        assert_eq!(s.dims, vec![32, 32]);
        assert_eq!(s.frames, 9);
        assert_eq!(s.motion, MotionKind::Linear);
        assert_eq!(s.seed, 3);
    }
}
