//! Correlation-based groupwise dissimilarity.
//!
//! Each warped frame is reduced to a centered, unit-norm feature vector
//! over all grid cells. With `rho_ij = <f_i, f_j>`, trapezoidal time
//! weights `w` and cell volume `h_d`,
//!
//! ```text
//! D = h_d * sum_{i != j} w_i w_j (1 - rho_ij^2)
//! ```
//!
//! which is zero exactly when every pair of frames is perfectly
//! (anti-)correlated. All pair sums run in ascending index order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ImageSequence, Points};
use crate::transform::{param_count, AffineStack};

/// Trapezoidal weights for `times` on `[a, b]`, the end intervals
/// `[a, t_1]` and `[t_N, b]` assigned fully to the end points.
pub fn quad_weights(times: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidSubset("no time points".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::TimesNotIncreasing);
    }
    let n = times.len();
    if a > times[0] || b < times[n - 1] {
        return Err(Error::InvalidConfig(format!(
            "interval [{a}, {b}] does not contain [{}, {}]",
            times[0],
            times[n - 1]
        )));
    }
    if n == 1 {
        return Ok(vec![b - a]);
    }
    let mut w = Vec::with_capacity(n);
    w.push((times[0] - a) + 0.5 * (times[1] - times[0]));
    for i in 1..n - 1 {
        w.push(0.5 * (times[i + 1] - times[i - 1]));
    }
    w.push(0.5 * (times[n - 1] - times[n - 2]) + (b - times[n - 1]));
    Ok(w)
}

/// Centered, unit-norm version of an intensity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub values: Vec<f64>,
    /// Norm of the centered vector before normalization.
    pub norm: f64,
    pub degenerate: bool,
}

pub fn feature(intensities: &[f64]) -> Feature {
    let m = intensities.len();
    let mean = intensities.iter().sum::<f64>() / m as f64;
    let mut values: Vec<f64> = intensities.iter().map(|v| v - mean).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let vmax = intensities.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if norm < 1e-12 * (m as f64).sqrt() * (1.0 + vmax) {
        values.fill(0.0);
        return Feature { values, norm, degenerate: true };
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Feature { values, norm, degenerate: false }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A frame resampled at the cell centers under its transform.
struct Warped {
    values: Vec<f64>,
    /// Spatial image gradient at the transformed points, `d` per cell.
    gradient: Option<Vec<f64>>,
}

fn warp(level: &ImageSequence, y: &AffineStack, k: usize, centers: &Points, with_gradient: bool) -> Result<Warped> {
    let t = y
        .get(k)
        .ok_or_else(|| Error::InvalidSubset(format!("no transform for frame {k}")))?;
    let img = level.frame(k);
    let d = centers.dim();
    let m = centers.len();
    let mut values = Vec::with_capacity(m);
    let mut gradient = with_gradient.then(|| vec![0.0; m * d]);
    let mut yx = [0.0; 3];
    for (i, x) in centers.iter().enumerate() {
        t.apply_point(x, &mut yx[..d]);
        let g = gradient.as_mut().map(|g| &mut g[i * d..(i + 1) * d]);
        values.push(img.sample_point(&yx[..d], g));
    }
    Ok(Warped { values, gradient })
}

/// Features and pairwise correlations of the frames in `subset`.
#[derive(Debug, Clone)]
pub struct CorrelationState {
    subset: Vec<usize>,
    features: Vec<Feature>,
    corr: Vec<f64>,
    weights: Vec<f64>,
    cell_volume: f64,
}

impl CorrelationState {
    fn assemble(subset: Vec<usize>, features: Vec<Feature>, weights: Vec<f64>, cell_volume: f64) -> Self {
        let s = subset.len();
        let mut corr = vec![0.0; s * s];
        for i in 0..s {
            for j in i..s {
                let r = dot(&features[i].values, &features[j].values);
                corr[i * s + j] = r;
                corr[j * s + i] = r;
            }
        }
        Self { subset, features, corr, weights, cell_volume }
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Correlation between the `i`-th and `j`-th subset members.
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.corr[i * self.subset.len() + j]
    }

    /// Row-major `|S| x |S|` correlation matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.corr
    }

    /// Sum of `h_d w_i w_j (1 - rho_ij^2)` over ordered pairs `i != j` for
    /// which `include(i, j)` holds (positions within the subset).
    fn pair_sum(&self, include: impl Fn(usize, usize) -> bool) -> f64 {
        let s = self.subset.len();
        let mut acc = 0.0;
        for i in 0..s {
            for j in 0..s {
                if i != j && include(i, j) {
                    let r = self.rho(i, j);
                    acc += self.weights[i] * self.weights[j] * (1.0 - r * r);
                }
            }
        }
        self.cell_volume * acc
    }
}

fn check_subset(level: &ImageSequence, subset: &[usize], weights: &[f64]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    if subset.windows(2).any(|w| w[1] <= w[0]) || subset[0] == 0 || subset[subset.len() - 1] > level.len() {
        return Err(Error::InvalidSubset(format!(
            "{subset:?} is not an increasing subset of 1..={}",
            level.len()
        )));
    }
    if weights.len() != subset.len() {
        return Err(Error::InvalidSubset(format!(
            "{} weights for {} frames",
            weights.len(),
            subset.len()
        )));
    }
    Ok(())
}

fn warp_all(level: &ImageSequence, y: &AffineStack, subset: &[usize], with_gradient: bool) -> Result<Vec<Warped>> {
    let centers = level.grid().cell_centers();
    subset
        .par_iter()
        .map(|&k| warp(level, y, k, &centers, with_gradient))
        .collect()
}

pub fn correlation_state(
    level: &ImageSequence,
    y: &AffineStack,
    subset: &[usize],
    weights: &[f64],
    cell_volume: f64,
) -> Result<CorrelationState> {
    check_subset(level, subset, weights)?;
    let warped = warp_all(level, y, subset, false)?;
    let features = warped.par_iter().map(|w| feature(&w.values)).collect();
    Ok(CorrelationState::assemble(subset.to_vec(), features, weights.to_vec(), cell_volume))
}

pub fn dissimilarity(state: &CorrelationState) -> f64 {
    state.pair_sum(|_, _| true)
}

/// Gradient of `D` with respect to each subset frame's affine parameters.
fn gradient_from(state: &CorrelationState, warped: &[Warped], centers: &Points) -> Vec<Vec<f64>> {
    let s = state.subset.len();
    let d = centers.dim();
    let np = param_count(d);
    let m = centers.len();
    (0..s)
        .into_par_iter()
        .map(|k| {
            let fk = &state.features[k];
            let mut g = vec![0.0; np];
            if fk.degenerate {
                return g;
            }
            // r = sum_i w_i rho_ik (f_i - rho_ik f_k); then dD/dv_k = -4 h w_k r / |c_k|
            let mut r = vec![0.0; m];
            for i in 0..s {
                if i == k {
                    continue;
                }
                let rho = state.rho(i, k);
                let wi = state.weights[i] * rho;
                if wi == 0.0 {
                    continue;
                }
                let fi = &state.features[i].values;
                for ((r, a), b) in r.iter_mut().zip(fi).zip(&fk.values) {
                    *r += wi * (a - rho * b);
                }
            }
            let scale = -4.0 * state.cell_volume * state.weights[k] / fk.norm;
            let grad_img = warped[k].gradient.as_ref().expect("warp with gradient");
            for (cell, x) in centers.iter().enumerate() {
                let rc = r[cell];
                if rc == 0.0 {
                    continue;
                }
                let gi = &grad_img[cell * d..(cell + 1) * d];
                for a in 0..d {
                    let t = rc * gi[a];
                    for b in 0..d {
                        g[a * d + b] += t * x[b];
                    }
                    g[d * d + a] += t;
                }
            }
            g.iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect()
}

/// Dissimilarity and its per-frame parameter gradient in one pass.
pub fn dissimilarity_and_gradient(
    level: &ImageSequence,
    y: &AffineStack,
    subset: &[usize],
    weights: &[f64],
    cell_volume: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_subset(level, subset, weights)?;
    let centers = level.grid().cell_centers();
    let warped = warp_all(level, y, subset, true)?;
    let features = warped.par_iter().map(|w| feature(&w.values)).collect();
    let state = CorrelationState::assemble(subset.to_vec(), features, weights.to_vec(), cell_volume);
    let grad = gradient_from(&state, &warped, &centers);
    Ok((dissimilarity(&state), grad))
}

/// Per-frame gradient of `D` for an already assembled state, in subset order.
pub fn dissimilarity_gradient(
    state: &CorrelationState,
    level: &ImageSequence,
    y: &AffineStack,
) -> Result<Vec<Vec<f64>>> {
    let centers = level.grid().cell_centers();
    let warped = warp_all(level, y, &state.subset, true)?;
    Ok(gradient_from(state, &warped, &centers))
}

/// Splits `D` over `frames` into pairs inside `part`, pairs inside the
/// complement and mixed pairs. The three terms sum to the full `D`.
pub fn decompose(
    level: &ImageSequence,
    y: &AffineStack,
    frames: &[usize],
    weights: &[f64],
    cell_volume: f64,
    part: &[usize],
) -> Result<(f64, f64, f64)> {
    if part.is_empty() || part.len() >= frames.len() || part.iter().any(|k| !frames.contains(k)) {
        return Err(Error::InvalidSubset(format!(
            "{part:?} is not a nonempty proper subset of {frames:?}"
        )));
    }
    let state = correlation_state(level, y, frames, weights, cell_volume)?;
    let inside: Vec<bool> = frames.iter().map(|k| part.contains(k)).collect();
    let within = state.pair_sum(|i, j| inside[i] && inside[j]);
    let rest = state.pair_sum(|i, j| !inside[i] && !inside[j]);
    let mixed = state.pair_sum(|i, j| inside[i] != inside[j]);
    Ok((within, rest, mixed))
}

/// Smallest correlation between consecutive frames `k, k+1` under `y`.
pub fn min_consecutive_rho(seq: &ImageSequence, y: &AffineStack) -> Result<f64> {
    let frames: Vec<usize> = (1..=seq.len()).collect();
    let weights = vec![1.0; frames.len()];
    let state = correlation_state(seq, y, &frames, &weights, 1.0)?;
    Ok((0..frames.len() - 1)
        .map(|i| state.rho(i, i + 1))
        .fold(f64::INFINITY, f64::min))
}
