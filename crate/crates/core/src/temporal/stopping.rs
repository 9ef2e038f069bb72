use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{stack_diff_norm, AffineStack};

use super::driver::LevelRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// `|D_q - D_{q-1}| <= eps * |D_0|` on all-frame estimates.
    Dissimilarity,
    /// `|Y_q - Y_{q-1}| <= eps * |Y_ref|` on all-frame estimates.
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingPolicy {
    pub mode: StopMode,
    pub eps: f64,
}

impl Default for StoppingPolicy {
    fn default() -> Self {
        Self { mode: StopMode::Dissimilarity, eps: 1e-3 }
    }
}

/// Decides whether the remaining temporal levels of the current spatial
/// level can be skipped.
///
/// `history` holds the runs of the current spatial level, oldest first;
/// `previous` and `current` are the all-frame estimates after the last two
/// of them. `reference_norm` is the parameter norm of the previous spatial
/// level's solution.
pub fn check_stop(
    policy: &StoppingPolicy,
    history: &[LevelRun],
    previous: &AffineStack,
    current: &AffineStack,
    reference_norm: f64,
) -> Result<bool> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory(history.len()));
    }
    Ok(match policy.mode {
        StopMode::Dissimilarity => {
            let d0 = history[0].d_all;
            let dq = history[history.len() - 1].d_all;
            let dp = history[history.len() - 2].d_all;
            (dq - dp).abs() <= policy.eps * d0.abs()
        }
        StopMode::Parameter => stack_diff_norm(current, previous)? <= policy.eps * reference_norm,
    })
}
