//! Synthetic benchmark comparing the two multilevel drivers.

mod metrics;
mod report;
mod synth;

pub use metrics::{gauge_fix, recovery_error, reduction_in_d, rel_diff_y, RecoveryError};
pub use report::{aggregate_reports, write_line_profile, ReportRow, REPORT_HEADER};
pub use synth::{ground_truth, synth_generate, MotionKind, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageSequence;
use crate::optimizer::OptimOptions;
use crate::pyramid::{build_pyramid, SpatialPyramid};
use crate::similarity::min_consecutive_rho;
use crate::temporal::{
    build_temporal_levels, default_lambda, full_dissimilarity, spml_run, stml_run, DriverConfig, LevelRun,
    StopMode, StoppingPolicy,
};
use crate::transform::AffineStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Stml,
    Spml,
    Both,
}

impl Method {
    pub fn runs_stml(self) -> bool {
        matches!(self, Method::Stml | Method::Both)
    }

    pub fn runs_spml(self) -> bool {
        matches!(self, Method::Spml | Method::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spatial_levels: usize,
    pub temporal_coarsest_size: usize,
    pub beta: f64,
    /// Drift penalty weight; `0.01 * D_unregistered` on the coarsest level when unset.
    pub lambda: Option<f64>,
    pub eps: f64,
    pub stop_mode: StopMode,
    pub optim: OptimOptions,
    pub seed: u64,
    pub method: Method,
    /// Worker threads for objective evaluation, 0 for the global pool.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spatial_levels: 3,
            temporal_coarsest_size: 3,
            beta: 1e-5,
            lambda: None,
            eps: 1e-3,
            stop_mode: StopMode::Dissimilarity,
            optim: OptimOptions { max_iters: 200, ..OptimOptions::default() },
            seed: 42,
            method: Method::Both,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spatial_levels == 0 {
            return Err(Error::InvalidConfig("spatial_levels must be at least 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if self.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {:?}", self.lambda)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be non-negative, got {}", self.eps)));
        }
        self.optim.validate()
    }

    pub fn driver_config(&self, lambda: f64) -> DriverConfig {
        DriverConfig {
            beta: self.beta,
            lambda,
            stopping: StoppingPolicy { mode: self.stop_mode, eps: self.eps },
            optim: self.optim.clone(),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (the global pool for 0).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

/// Per spatial level cost and quality of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub spatial_level: usize,
    pub reduction_pct: Option<f64>,
    pub time_s: f64,
    pub evaluations: usize,
    pub frame_evaluations: f64,
    pub d_registered: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub levels: Vec<LevelStats>,
    pub total_time_s: f64,
    pub total_evaluations: usize,
    pub total_frame_evaluations: f64,
    pub recovery: Option<RecoveryError>,
    pub non_positive_determinants: Vec<usize>,
    pub runs: Vec<LevelRun>,
    #[serde(skip)]
    pub transforms: Option<AffineStack>,
    /// All-frame estimate at the end of each spatial level.
    #[serde(skip)]
    pub level_solutions: Vec<AffineStack>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub grids: Vec<String>,
    pub frames: usize,
    pub lambda: f64,
    pub min_rho: f64,
    pub d_unregistered: Vec<f64>,
    pub spml: Option<MethodReport>,
    pub stml: Option<MethodReport>,
    /// SpML vs STML, per spatial level.
    pub rel_diff_y_pct: Vec<Option<f64>>,
    pub speedup: Option<f64>,
    /// STML over SpML frame-weighted evaluations on the finest level.
    pub finest_eval_ratio: Option<f64>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn summarize(
    method: &str,
    pyramid: &SpatialPyramid,
    d_unreg: &[f64],
    (y, runs): (AffineStack, Vec<LevelRun>),
    truth: Option<&AffineStack>,
) -> Result<MethodReport> {
    let mut levels = Vec::new();
    let mut level_solutions = Vec::new();
    for (l, level) in pyramid.levels().iter().enumerate() {
        let here: Vec<&LevelRun> = runs.iter().filter(|r| r.spatial_level == l).collect();
        let last = here.last().ok_or_else(|| Error::InvalidSchedule(format!("no runs at level {l}")))?;
        let estimate = last.estimate.clone().expect("drivers record level estimates");
        let d_reg = full_dissimilarity(level, &estimate)?;
        level_solutions.push(estimate);
        levels.push(LevelStats {
            spatial_level: l,
            reduction_pct: reduction_in_d(d_unreg[l], d_reg),
            time_s: here.iter().map(|r| r.wall_ms).sum::<f64>() / 1e3,
            evaluations: here.iter().map(|r| r.evaluations).sum(),
            frame_evaluations: here.iter().map(|r| r.frame_evaluations).sum(),
            d_registered: d_reg,
        });
    }
    let recovery = truth
        .map(|t| recovery_error(&y, t, pyramid.finest().grid().spacing()))
        .transpose()?;
    Ok(MethodReport {
        method: method.to_string(),
        total_time_s: levels.iter().map(|l| l.time_s).sum(),
        total_evaluations: levels.iter().map(|l| l.evaluations).sum(),
        total_frame_evaluations: levels.iter().map(|l| l.frame_evaluations).sum(),
        levels,
        recovery,
        non_positive_determinants: y.non_positive_determinants(),
        runs,
        transforms: Some(y),
        level_solutions,
    })
}

/// Registers `seq` with the configured method(s) and assembles the report.
/// `truth`, when known, adds ground-truth recovery errors.
pub fn register_sequence(seq: &ImageSequence, truth: Option<&AffineStack>, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    with_threads(config.threads, || register_inner(seq, truth, config))?
}

fn register_inner(seq: &ImageSequence, truth: Option<&AffineStack>, config: &RunConfig) -> Result<RunReport> {
    let pyramid = build_pyramid(seq, config.spatial_levels)?;
    let dim = seq.grid().dim();
    let n = seq.len();
    let lambda = match config.lambda {
        Some(l) => l,
        None => default_lambda(&pyramid)?,
    };
    let driver = config.driver_config(lambda);
    let id = AffineStack::identity_all(dim, n)?;
    let d_unreg = pyramid
        .levels()
        .iter()
        .map(|l| full_dissimilarity(l, &id))
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut spml = None;
    if config.method.runs_spml() {
        match spml_run(&pyramid, &driver).and_then(|out| summarize("spml", &pyramid, &d_unreg, out, truth)) {
            Ok(r) => spml = Some(r),
            Err(e) => failures.push(format!("spml: {e}")),
        }
    }
    let mut stml = None;
    if config.method.runs_stml() {
        let result = build_temporal_levels(n, config.temporal_coarsest_size)
            .and_then(|schedule| stml_run(&pyramid, &schedule, &driver))
            .and_then(|out| summarize("stml", &pyramid, &d_unreg, out, truth));
        match result {
            Ok(r) => stml = Some(r),
            Err(e) => failures.push(format!("stml: {e}")),
        }
    }

    let (rel_diff_y_pct, speedup, finest_eval_ratio) = match (&spml, &stml) {
        (Some(a), Some(b)) => {
            let rel = a
                .level_solutions
                .iter()
                .zip(&b.level_solutions)
                .map(|(ya, yb)| rel_diff_y(ya, yb).ok())
                .collect();
            let speedup = (b.total_time_s > 0.0).then(|| a.total_time_s / b.total_time_s);
            let fa = a.levels.last().unwrap().frame_evaluations;
            let fb = b.levels.last().unwrap().frame_evaluations;
            (rel, speedup, (fa > 0.0).then(|| fb / fa))
        }
        _ => (vec![None; pyramid.level_count()], None, None),
    };

    Ok(RunReport {
        grids: pyramid
            .levels()
            .iter()
            .map(|l| l.grid().dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x"))
            .collect(),
        frames: n,
        lambda,
        min_rho: min_consecutive_rho(seq, &id)?,
        d_unregistered: d_unreg,
        spml,
        stml,
        rel_diff_y_pct,
        speedup,
        finest_eval_ratio,
        failures,
    })
}

/// Generates a synthetic sequence and runs the configured method(s) on it.
pub fn run_benchmark(config: &RunConfig, spec: &SynthSpec) -> Result<(RunReport, ImageSequence, AffineStack)> {
    let spec = SynthSpec { seed: config.seed, ..spec.clone() };
    let (seq, truth) = synth_generate(&spec)?;
    let report = register_sequence(&seq, Some(&truth), config)?;
    Ok((report, seq, truth))
}
