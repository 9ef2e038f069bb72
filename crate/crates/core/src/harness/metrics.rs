//! Comparison measures between registration results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{stack_diff_norm, stack_norm, Affine, AffineStack};

/// `100 (D_unreg - D_reg) / D_unreg`; `None` when `D_unreg` is zero.
pub fn reduction_in_d(d_unregistered: f64, d_registered: f64) -> Option<f64> {
    (d_unregistered != 0.0).then(|| 100.0 * (d_unregistered - d_registered) / d_unregistered)
}

fn minus_identity(y: &AffineStack) -> Result<AffineStack> {
    let id = Affine::identity(y.dim())?.params();
    let mut out = AffineStack::new(y.dim(), y.frame_count())?;
    for (k, t) in y.iter() {
        let p: Vec<f64> = t.params().iter().zip(&id).map(|(a, b)| a - b).collect();
        out.insert(k, Affine::from_params(y.dim(), &p)?)?;
    }
    Ok(out)
}

/// `100 |Ya - Yb| / |Ya - Id|` in percent, `Ya` the reference.
pub fn rel_diff_y(ya: &AffineStack, yb: &AffineStack) -> Result<f64> {
    if ya.indices() != yb.indices() || ya.dim() != yb.dim() {
        return Err(Error::ShapeMismatch("stacks cover different frames".into()));
    }
    let denom = stack_norm(&minus_identity(ya)?);
    if denom == 0.0 {
        return Err(Error::ShapeMismatch("reference stack equals the identity".into()));
    }
    Ok(100.0 * stack_diff_norm(ya, yb)? / denom)
}

/// `y_k ∘ y_1^{-1}` for every frame, so frame 1 becomes the identity.
pub fn gauge_fix(y: &AffineStack) -> Result<AffineStack> {
    let first = y
        .get(1)
        .ok_or_else(|| Error::ShapeMismatch("gauge fixing needs frame 1".into()))?;
    let inv = first
        .inverse()
        .ok_or_else(|| Error::ShapeMismatch("frame 1 transform is singular".into()))?;
    let mut out = AffineStack::new(y.dim(), y.frame_count())?;
    for (k, t) in y.iter() {
        out.insert(k, t.compose(&inv))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryError {
    /// Largest translation component error, in cells.
    pub max_translation_cells: f64,
    /// Largest matrix entry error.
    pub max_matrix: f64,
}

/// Compares gauge-fixed estimates to gauge-fixed ground truth.
pub fn recovery_error(estimate: &AffineStack, truth: &AffineStack, spacing: &[f64]) -> Result<RecoveryError> {
    let (e, t) = (gauge_fix(estimate)?, gauge_fix(truth)?);
    let mut out = RecoveryError { max_translation_cells: 0.0, max_matrix: 0.0 };
    for (k, te) in e.iter() {
        let tt = t
            .get(k)
            .ok_or_else(|| Error::ShapeMismatch(format!("ground truth lacks frame {k}")))?;
        for ((a, b), h) in te.offset().iter().zip(tt.offset()).zip(spacing) {
            out.max_translation_cells = out.max_translation_cells.max((a - b).abs() / h);
        }
        for (a, b) in te.matrix().iter().zip(tt.matrix()) {
            out.max_matrix = out.max_matrix.max((a - b).abs());
        }
    }
    Ok(out)
}
