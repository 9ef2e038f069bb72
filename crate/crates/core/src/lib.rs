//! Groupwise affine registration of image sequences.
//!
//! Two coarse-to-fine drivers are provided. [`temporal::spml_run`] registers
//! every frame at every spatial resolution. [`temporal::stml_run`] adds a
//! nested hierarchy of frame subsets at each resolution: a few frames are
//! registered first, the transforms of the remaining frames are predicted by
//! interpolation, and the prediction is corrected by registering the larger
//! subset.
//!
//! The objective for a subset `K` of frames with transforms `Y` is
//!
//! ```text
//! J(Y) = h_d * sum_{i != j in K} w_i w_j (1 - rho_ij^2) + lambda * |mean(p) - p_id|^2
//! ```
//!
//! where `rho_ij` is the normalized cross-correlation of the warped frames,
//! `w` are trapezoidal time weights and `p` the stacked affine parameters.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod grid;
pub mod harness;
pub mod optimizer;
pub mod penalty;
pub mod pyramid;
pub mod similarity;
pub mod temporal;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{Grid, Image, ImageSequence, Points};
pub use optimizer::{lbfgs_minimize, ObjectiveEval, OptimOptions, OptimResult, StopReason};
pub use pyramid::SpatialPyramid;
pub use similarity::CorrelationState;
pub use temporal::{LevelRun, StoppingPolicy, StopMode, TemporalSchedule};
pub use transform::{Affine, AffineStack};
