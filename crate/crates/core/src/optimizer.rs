//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `|g|_inf <= grad_tol * scale`.
    pub grad_tol: f64,
    /// Reference gradient magnitude; the first iterate's `|g|_inf` when unset.
    pub grad_scale: Option<f64>,
    /// Stop when an accepted step satisfies `|s|_inf <= step_tol * (1 + |x|_inf)`.
    pub step_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Length of the first trial step; `1 / |g_0|_2` scaling when unset.
    pub initial_step: Option<f64>,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            memory: 5,
            max_iters: 50,
            grad_tol: 1e-4,
            grad_scale: None,
            step_tol: 1e-7,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 20,
            initial_step: None,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.memory > 0
            && self.max_iters > 0
            && self.grad_tol >= 0.0
            && self.step_tol >= 0.0
            && self.armijo_c1 > 0.0
            && self.armijo_c1 < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.max_backtracks > 0
            && self.grad_scale.is_none_or(|s| s >= 0.0)
            && self.initial_step.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("optimizer options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    StepTol,
    MaxIters,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective value at `x0`, i.e. the first evaluation.
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    /// Final inverse Hessian scaling `s'y / y'y`, if any pair was stored.
    pub gamma: Option<f64>,
    pub trace: Vec<IterRecord>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H g`.
fn direction(g: &[f64], pairs: &VecDeque<Pair>, gamma: f64) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(q, y)| *q -= a * y);
        alpha.push(a);
    }
    q.iter_mut().for_each(|v| *v *= gamma);
    for (p, a) in pairs.iter().zip(alpha.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub fn lbfgs_minimize<F>(mut objective: F, x0: &[f64], opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> ObjectiveEval,
{
    opts.validate()?;
    let mut x = x0.to_vec();
    let first = objective(&x);
    let mut evaluations = 1;
    if !first.value.is_finite() || first.gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    assert_eq!(first.gradient.len(), x.len(), "gradient length");
    let initial_value = first.value;
    let mut f = first.value;
    let mut g = first.gradient;

    let gtol = opts.grad_tol * opts.grad_scale.unwrap_or_else(|| norm_inf(&g));
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut gamma: Option<f64> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;

    let finish = |x, value, iterations, evaluations, reason, gamma, trace| OptimResult {
        x,
        value,
        initial_value,
        iterations,
        evaluations,
        reason,
        gamma,
        trace,
    };

    if norm_inf(&g) <= gtol {
        return Ok(finish(x, f, 0, evaluations, StopReason::GradTol, gamma, trace));
    }

    loop {
        if iterations >= opts.max_iters {
            return Ok(finish(x, f, iterations, evaluations, StopReason::MaxIters, gamma, trace));
        }
        let h0 = gamma.unwrap_or_else(|| opts.initial_step.unwrap_or(1.0) / dot(&g, &g).sqrt());
        let mut d = direction(&g, &pairs, h0);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -h0 * v).collect();
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + step * d).collect();
            let trial = objective(&xt);
            evaluations += 1;
            if trial.value.is_finite() && trial.value <= f + opts.armijo_c1 * step * slope {
                accepted = Some((xt, trial));
                break;
            }
            step *= opts.backtrack_factor;
        }
        let Some((xn, eval)) = accepted else {
            return Ok(finish(x, f, iterations, evaluations, StopReason::LineSearchFailure, gamma, trace));
        };
        iterations += 1;

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = eval.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * yy.sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            gamma = Some(sy / yy);
            pairs.push_back(Pair { s: s.clone(), y, rho: 1.0 / sy });
        }

        x = xn;
        f = eval.value;
        g = eval.gradient;
        let gnorm = norm_inf(&g);
        let snorm = norm_inf(&s);
        trace.push(IterRecord {
            iter: iterations,
            value: f,
            grad_norm: gnorm,
            step,
            evals: evaluations,
        });

        if gnorm <= gtol {
            return Ok(finish(x, f, iterations, evaluations, StopReason::GradTol, gamma, trace));
        }
        if snorm <= opts.step_tol * (1.0 + norm_inf(&x)) {
            return Ok(finish(x, f, iterations, evaluations, StopReason::StepTol, gamma, trace));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[f64]) -> ObjectiveEval {
        move |x| ObjectiveEval {
            value: x.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum(),
            gradient: x.iter().zip(&c).map(|(x, c)| 2.0 * (x - c)).collect(),
        }
    }

    #[test]
    fn shifted_quadratic() {
        let r = lbfgs_minimize(quadratic(vec![1.0, 2.0]), &[0.0, 0.0], &OptimOptions::default()).unwrap();
        assert!(r.iterations <= 5);
        let err = ((r.x[0] - 1.0).powi(2) + (r.x[1] - 2.0).powi(2)).sqrt();
        assert!(err < 1e-6, "error {err}");
        assert!(r.evaluations >= r.iterations);
    }

    #[test]
    fn stationary_start() {
        let r = lbfgs_minimize(quadratic(vec![1.0, 2.0]), &[1.0, 2.0], &OptimOptions::default()).unwrap();
        assert_eq!(r.reason, StopReason::GradTol);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| ObjectiveEval { value: f64::NAN, gradient: vec![0.0] };
        assert!(matches!(
            lbfgs_minimize(f, &[0.0], &OptimOptions::default()),
            Err(Error::NonFiniteObjective)
        ));
    }

    #[test]
    fn line_search_failure_keeps_best() {
        // gradient points the wrong way, so no step decreases f
        let f = |x: &[f64]| ObjectiveEval { value: x[0] * x[0], gradient: vec![-1.0] };
        let r = lbfgs_minimize(f, &[0.5], &OptimOptions::default()).unwrap();
        assert_eq!(r.reason, StopReason::LineSearchFailure);
        assert_eq!(r.x, vec![0.5]);
        assert_eq!(r.evaluations, 22);
    }

    #[test]
    fn invalid_options() {
        let opts = OptimOptions { armijo_c1: 1.5, ..Default::default() };
        assert!(lbfgs_minimize(quadratic(vec![0.0]), &[1.0], &opts).is_err());
    }
}
