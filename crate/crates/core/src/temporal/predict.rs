//! Predictors that carry transforms from a frame subset to more frames.

use crate::error::{Error, Result};
use crate::transform::{Affine, AffineStack};

use super::schedule::TemporalSchedule;
use super::tridiag::{thomas_solve, TridiagSystem};

/// Injection on the known frames and time-proportional linear interpolation
/// of the parameters between the nearest known neighbours elsewhere.
/// `times[k - 1]` is the time of frame `k`.
pub fn interpolate_to(y: &AffineStack, targets: &[usize], times: &[f64]) -> Result<AffineStack> {
    let known = y.indices();
    let mut out = AffineStack::new(y.dim(), y.frame_count())?;
    for &k in targets {
        if let Some(t) = y.get(k) {
            out.insert(k, t.clone())?;
            continue;
        }
        let pos = known.partition_point(|&j| j < k);
        if pos == 0 || pos == known.len() {
            return Err(Error::InvalidSubset(format!(
                "frame {k} is not bracketed by the known frames {known:?}"
            )));
        }
        let (left, right) = (known[pos - 1], known[pos]);
        let (tl, tr) = (times[left - 1], times[right - 1]);
        let theta = (times[k - 1] - tl) / (tr - tl);
        let pl = y.get(left).unwrap().params();
        let pr = y.get(right).unwrap().params();
        let p: Vec<f64> = pl
            .iter()
            .zip(&pr)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        out.insert(k, Affine::from_params(y.dim(), &p)?)?;
    }
    Ok(out)
}

/// Starting values on `K_{q+1}` from the solution on `K_q`.
pub fn linear_predict(y: &AffineStack, schedule: &TemporalSchedule, q: usize, times: &[f64]) -> Result<AffineStack> {
    if q >= schedule.finest_level() {
        return Err(Error::InvalidSchedule(format!("no temporal level after {q}")));
    }
    interpolate_to(y, schedule.level(q + 1), times)
}

/// Least-squares predictor for all frames `1..=n`.
///
/// Each parameter component `zeta` minimizes
///
/// ```text
/// sum_{k in K} (zeta_k - eta_k)^2 + beta * sum_{k=1}^{n-1} ((zeta_{k+1} - zeta_k) - (r_{k+1} - r_k))^2
/// ```
///
/// where `eta` are the registered values on `K` and `r` a reference
/// trajectory on all frames. The normal equations `(M + beta L) zeta =
/// M eta + beta L r` are tridiagonal, `M` the indicator of `K` and `L` the
/// path-graph Laplacian.
pub fn ls_predict(eta: &AffineStack, reference: &AffineStack, beta: f64) -> Result<AffineStack> {
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    if eta.is_empty() {
        return Err(Error::InvalidSubset("no registered frames".into()));
    }
    if eta.dim() != reference.dim() || eta.frame_count() != reference.frame_count() {
        return Err(Error::ShapeMismatch("eta and reference stacks differ in shape".into()));
    }
    let n = reference.frame_count();
    if reference.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "reference covers {} of {n} frames",
            reference.len()
        )));
    }
    let d = eta.dim();
    let ref_params: Vec<Vec<f64>> = reference.iter().map(|(_, t)| t.params()).collect();
    let eta_params: Vec<Option<Vec<f64>>> = (1..=n).map(|k| eta.get(k).map(Affine::params)).collect();
    let np = ref_params[0].len();

    let mut sub = vec![-beta; n - 1];
    let mut sup = vec![-beta; n - 1];
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let degree = (k > 0) as usize + (k + 1 < n) as usize;
        diag[k] = beta * degree as f64 + if eta_params[k].is_some() { 1.0 } else { 0.0 };
    }
    if n == 1 {
        sub.clear();
        sup.clear();
    }

    let mut columns = Vec::with_capacity(np);
    for c in 0..np {
        let r: Vec<f64> = ref_params.iter().map(|p| p[c]).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|k| {
                // (L r)_k
                let mut lr = 0.0;
                if k > 0 {
                    lr += r[k] - r[k - 1];
                }
                if k + 1 < n {
                    lr += r[k] - r[k + 1];
                }
                let data = eta_params[k].as_ref().map_or(0.0, |p| p[c]);
                data + beta * lr
            })
            .collect();
        let sys = TridiagSystem { sub: sub.clone(), diag: diag.clone(), sup: sup.clone(), rhs };
        columns.push(thomas_solve(&sys)?);
    }

    let mut out = AffineStack::new(d, n)?;
    for k in 0..n {
        let p: Vec<f64> = columns.iter().map(|col| col[k]).collect();
        out.insert(k + 1, Affine::from_params(d, &p)?)?;
    }
    Ok(out)
}
