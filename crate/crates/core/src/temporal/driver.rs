//! Groupwise registration on frame subsets and the two multilevel drivers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageSequence;
use crate::optimizer::{lbfgs_minimize, ObjectiveEval, OptimOptions, OptimResult, StopReason};
use crate::penalty::{penalty_gradient, penalty_value, recenter};
use crate::pyramid::SpatialPyramid;
use crate::similarity::{correlation_state, dissimilarity, dissimilarity_and_gradient, quad_weights};
use crate::transform::{param_count, stack_norm, AffineStack};

use super::predict::{interpolate_to, ls_predict};
use super::schedule::TemporalSchedule;
use super::stopping::{check_stop, StoppingPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub beta: f64,
    pub lambda: f64,
    pub stopping: StoppingPolicy,
    pub optim: OptimOptions,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            beta: 1e-5,
            lambda: 0.0,
            stopping: StoppingPolicy::default(),
            optim: OptimOptions::default(),
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.stopping.eps >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be non-negative, got {}", self.stopping.eps)));
        }
        self.optim.validate()
    }
}

/// One registration solve at spatial level `spatial_level` on the frame
/// subset of temporal level `temporal_level` (`None` for all frames).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelRun {
    pub spatial_level: usize,
    pub temporal_level: Option<usize>,
    pub active_frames: usize,
    pub frame_count: usize,
    pub iterations: usize,
    pub evaluations: usize,
    /// Evaluations weighted by `active_frames / frame_count`.
    pub frame_evaluations: f64,
    pub reason: Option<StopReason>,
    /// Objective at the starting stack (the first evaluation of the solve).
    pub objective_start: f64,
    pub objective_end: f64,
    /// Dissimilarity over the active frames before and after the solve.
    pub d_before: f64,
    pub d_after: f64,
    /// Dissimilarity over all frames of the all-frame estimate after this run.
    pub d_all: f64,
    /// Set when the stopping rule fired after this run.
    pub stopped: bool,
    pub wall_ms: f64,
    #[serde(skip)]
    pub start: Option<AffineStack>,
    /// All-frame estimate of the spatial level, on its last run only.
    #[serde(skip)]
    pub estimate: Option<AffineStack>,
}

/// Trapezoidal weights of `frames` on the sequence's default time interval.
pub fn frame_weights(level: &ImageSequence, frames: &[usize]) -> Result<Vec<f64>> {
    let (a, b) = level.time_interval();
    let times: Vec<f64> = frames.iter().map(|&k| level.time(k)).collect();
    quad_weights(&times, a, b)
}

/// `D` over all frames of `level`.
pub fn full_dissimilarity(level: &ImageSequence, y: &AffineStack) -> Result<f64> {
    let frames: Vec<usize> = (1..=level.len()).collect();
    let w = frame_weights(level, &frames)?;
    let state = correlation_state(level, y, &frames, &w, level.grid().cell_volume())?;
    Ok(dissimilarity(&state))
}

/// `0.01 * D_unregistered` on the coarsest level, a unit parameter drift
/// costing `P = lambda`.
pub fn default_lambda(pyramid: &SpatialPyramid) -> Result<f64> {
    let level = pyramid.coarsest();
    let id = AffineStack::identity_all(level.grid().dim(), level.len())?;
    Ok(0.01 * full_dissimilarity(level, &id)?)
}

/// `J = D + P` restricted to a frame subset of one spatial level.
///
/// The optimizer works on scaled parameters: matrix entries are multiplied
/// by the RMS radius of the grid so that a unit change of any variable moves
/// image content by roughly one world unit.
pub struct GirProblem<'a> {
    level: &'a ImageSequence,
    frames: Vec<usize>,
    weights: Vec<f64>,
    cell_volume: f64,
    lambda: f64,
    scales: Vec<f64>,
}

impl<'a> GirProblem<'a> {
    pub fn new(level: &'a ImageSequence, frames: &[usize], lambda: f64) -> Result<Self> {
        let weights = frame_weights(level, frames)?;
        let d = level.grid().dim();
        let radius = level.grid().rms_radius().max(f64::EPSILON);
        let mut scales = vec![radius; d * d];
        scales.extend(std::iter::repeat_n(1.0, d));
        Ok(Self {
            level,
            frames: frames.to_vec(),
            weights,
            cell_volume: level.grid().cell_volume(),
            lambda,
            scales,
        })
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    fn dim(&self) -> usize {
        self.level.grid().dim()
    }

    pub fn dissimilarity(&self, y: &AffineStack) -> Result<f64> {
        let state = correlation_state(self.level, y, &self.frames, &self.weights, self.cell_volume)?;
        Ok(dissimilarity(&state))
    }

    pub fn objective(&self, y: &AffineStack) -> Result<f64> {
        let y = y.restrict(&self.frames)?;
        Ok(self.dissimilarity(&y)? + penalty_value(&y, self.lambda))
    }

    pub fn to_scaled(&self, y: &AffineStack) -> Result<Vec<f64>> {
        let np = param_count(self.dim());
        let mut x = y.restrict(&self.frames)?.params();
        for (i, v) in x.iter_mut().enumerate() {
            *v *= self.scales[i % np];
        }
        Ok(x)
    }

    pub fn from_scaled(&self, x: &[f64]) -> AffineStack {
        let np = param_count(self.dim());
        let p: Vec<f64> = x.iter().enumerate().map(|(i, v)| v / self.scales[i % np]).collect();
        AffineStack::from_params(self.dim(), self.level.len(), &self.frames, &p).expect("parameter layout")
    }

    /// Objective and gradient with respect to the scaled parameters.
    pub fn evaluate(&self, x: &[f64]) -> ObjectiveEval {
        let y = self.from_scaled(x);
        let (d, gd) = dissimilarity_and_gradient(self.level, &y, &self.frames, &self.weights, self.cell_volume)
            .expect("subset validated at construction");
        let gp = penalty_gradient(&y, self.lambda);
        let np = param_count(self.dim());
        let gradient = gd
            .iter()
            .zip(&gp)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(a, b)| a + b))
            .enumerate()
            .map(|(i, g)| g / self.scales[i % np])
            .collect();
        ObjectiveEval { value: d + penalty_value(&y, self.lambda), gradient }
    }

    pub fn gradient_inf_norm(&self, y: &AffineStack) -> Result<f64> {
        let g = self.evaluate(&self.to_scaled(y)?).gradient;
        Ok(g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn solve(&self, start: &AffineStack, opts: &OptimOptions) -> Result<(AffineStack, OptimResult)> {
        let x0 = self.to_scaled(start)?;
        let result = lbfgs_minimize(|x| self.evaluate(x), &x0, opts)?;
        Ok((self.from_scaled(&result.x), result))
    }
}

/// Curvature scale carried from one solve to the next. The objective's
/// Hessian grows with the cell volume and shrinks with the subset size.
#[derive(Clone, Copy)]
struct CurvatureHint {
    gamma: f64,
    frames: usize,
    cell_volume: f64,
}

impl CurvatureHint {
    fn for_problem(&self, frames: usize, cell_volume: f64) -> f64 {
        self.gamma * (self.cell_volume / cell_volume) * (frames as f64 / self.frames as f64)
    }
}

/// Shared state of one spatial level.
struct LevelSolver<'a> {
    index: usize,
    level: &'a ImageSequence,
    config: &'a DriverConfig,
    grad_scale: f64,
}

impl<'a> LevelSolver<'a> {
    fn new(index: usize, level: &'a ImageSequence, config: &'a DriverConfig) -> Result<Self> {
        let all: Vec<usize> = (1..=level.len()).collect();
        let id = AffineStack::identity_all(level.grid().dim(), level.len())?;
        let grad_scale = match config.optim.grad_scale {
            Some(s) => s,
            None => GirProblem::new(level, &all, config.lambda)?.gradient_inf_norm(&id)?,
        };
        Ok(Self { index, level, config, grad_scale })
    }

    fn solve(
        &self,
        temporal_level: Option<usize>,
        frames: &[usize],
        start: &AffineStack,
        hint: &mut Option<CurvatureHint>,
    ) -> Result<(AffineStack, LevelRun)> {
        let clock = Instant::now();
        let problem = GirProblem::new(self.level, frames, self.config.lambda)?;
        // fix the gauge of the start so the penalty of its subset vanishes
        let start = recenter(&start.restrict(frames)?);
        let h = self.level.grid().cell_volume();
        let mut opts = self.config.optim.clone();
        opts.grad_scale = Some(self.grad_scale);
        let gamma0 = hint.map(|c| c.for_problem(frames.len(), h));
        let d_before = problem.dissimilarity(&start)?;

        let x0 = problem.to_scaled(&start)?;
        let result = match gamma0 {
            Some(g) => {
                // the optimizer's first step is `initial_step / |g0|`; express
                // the carried curvature in the same form
                let g0 = problem.evaluate(&x0).gradient;
                let g0n = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
                opts.initial_step = (g0n > 0.0).then_some(g * g0n);
                lbfgs_minimize(|x| problem.evaluate(x), &x0, &opts)?
            }
            None => lbfgs_minimize(|x| problem.evaluate(x), &x0, &opts)?,
        };
        let y = problem.from_scaled(&result.x);
        if let Some(gamma) = result.gamma {
            *hint = Some(CurvatureHint { gamma, frames: frames.len(), cell_volume: h });
        }
        let n = self.level.len();
        let run = LevelRun {
            spatial_level: self.index,
            temporal_level,
            active_frames: frames.len(),
            frame_count: n,
            iterations: result.iterations,
            evaluations: result.evaluations,
            frame_evaluations: result.evaluations as f64 * frames.len() as f64 / n as f64,
            reason: Some(result.reason),
            objective_start: result.initial_value,
            objective_end: result.value,
            d_before,
            d_after: problem.dissimilarity(&y)?,
            d_all: f64::NAN,
            stopped: false,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            start: Some(start),
            estimate: None,
        };
        Ok((y, run))
    }
}

fn check_pyramid(pyramid: &SpatialPyramid) -> Result<(usize, usize)> {
    let finest = pyramid.finest();
    Ok((finest.grid().dim(), finest.len()))
}

/// Spatial-only multilevel registration: every spatial level registers all
/// frames, starting from the previous level's solution (identity first).
pub fn spml_run(pyramid: &SpatialPyramid, config: &DriverConfig) -> Result<(AffineStack, Vec<LevelRun>)> {
    config.validate()?;
    let (dim, n) = check_pyramid(pyramid)?;
    let all: Vec<usize> = (1..=n).collect();
    let mut y = AffineStack::identity_all(dim, n)?;
    let mut runs = Vec::new();
    let mut hint = None;
    for (l, level) in pyramid.levels().iter().enumerate() {
        let solver = LevelSolver::new(l, level, config)?;
        let (next, mut run) = solver.solve(None, &all, &y, &mut hint)?;
        run.d_all = run.d_after;
        run.estimate = Some(next.clone());
        runs.push(run);
        y = next;
    }
    Ok((y, runs))
}

/// Spatio-temporal multilevel registration.
///
/// At every spatial level the frames of `K_0` are registered first. Each
/// following temporal level is initialised from a prediction and corrected
/// by registering its frames. On the coarsest spatial level the prediction
/// interpolates linearly in time; on finer levels it is the least-squares
/// predictor anchored to the previous spatial level's solution. After
/// every temporal level `q >= 1` the stopping rule may skip the remaining
/// ones; on the finest spatial level all frames are still corrected once.
pub fn stml_run(
    pyramid: &SpatialPyramid,
    schedule: &TemporalSchedule,
    config: &DriverConfig,
) -> Result<(AffineStack, Vec<LevelRun>)> {
    config.validate()?;
    let (dim, n) = check_pyramid(pyramid)?;
    if schedule.frame_count() != n {
        return Err(Error::InvalidSchedule(format!(
            "schedule covers {} frames, sequence has {n}",
            schedule.frame_count()
        )));
    }
    let all: Vec<usize> = (1..=n).collect();
    let top = schedule.finest_level();
    let last_level = pyramid.level_count() - 1;

    let mut previous_solution: Option<AffineStack> = None;
    let mut runs = Vec::new();
    let mut hint = None;

    for (l, level) in pyramid.levels().iter().enumerate() {
        let solver = LevelSolver::new(l, level, config)?;
        let times = level.times();
        let reference_norm = match &previous_solution {
            Some(y) => stack_norm(y),
            None => stack_norm(&AffineStack::identity_all(dim, n)?),
        };
        // all-frame estimate from a solution on a subset
        let extend = |y: &AffineStack, frames: &[usize], reference: Option<&AffineStack>| -> Result<AffineStack> {
            if frames.len() == n {
                return Ok(y.clone());
            }
            match reference {
                Some(r) => ls_predict(y, r, config.beta),
                None => interpolate_to(y, &all, times),
            }
        };

        let mut level_runs: Vec<LevelRun> = Vec::new();
        let k0 = schedule.level(0);
        let start = match &previous_solution {
            Some(y) => y.clone(),
            None => AffineStack::identity(dim, n, k0.iter().copied())?,
        };
        let (mut y, mut run) = solver.solve(Some(0), k0, &start, &mut hint)?;
        let mut estimate = extend(&y, k0, previous_solution.as_ref())?;
        run.d_all = full_dissimilarity(level, &estimate)?;
        level_runs.push(run);

        let mut q = 0;
        while q < top {
            let next = q + 1;
            let frames = schedule.level(next);
            let start = match &previous_solution {
                None => interpolate_to(&y, &all, times)?,
                Some(_) => estimate.restrict(frames)?,
            };
            let (solution, mut run) = solver.solve(Some(next), frames, &start, &mut hint)?;
            let reference = previous_solution.as_ref().map(|_| &estimate);
            let next_estimate = extend(&solution, frames, reference)?;
            run.d_all = full_dissimilarity(level, &next_estimate)?;
            level_runs.push(run);

            let stop = next < top
                && check_stop(
                    &config.stopping,
                    &level_runs,
                    &estimate,
                    &next_estimate,
                    reference_norm,
                )?;
            y = solution;
            estimate = next_estimate;
            q = next;

            if stop {
                level_runs.last_mut().unwrap().stopped = true;
                if l == last_level {
                    let (solution, mut run) = solver.solve(Some(top), &all, &estimate, &mut hint)?;
                    run.d_all = run.d_after;
                    level_runs.push(run);
                    estimate = solution;
                }
                break;
            }
        }
        level_runs.last_mut().unwrap().estimate = Some(estimate.clone());
        runs.extend(level_runs);
        previous_solution = Some(estimate);
    }
    Ok((previous_solution.expect("pyramid has a level"), runs))
}
