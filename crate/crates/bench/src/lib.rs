//! Shared fixtures for the criterion benches.

use stml_core::harness::{synth_generate, SynthSpec};
use stml_core::pyramid::build_pyramid;
use stml_core::temporal::TridiagSystem;
use stml_core::{ImageSequence, SpatialPyramid};

/// Diagonally dominant system of size `n` with a deterministic pattern.
pub fn tridiag(n: usize) -> TridiagSystem {
    let wave = |i: usize, k: f64| ((i as f64) * k).sin();
    TridiagSystem {
        sub: (0..n - 1).map(|i| wave(i, 0.7)).collect(),
        diag: (0..n).map(|i| 3.0 + wave(i, 0.3)).collect(),
        sup: (0..n - 1).map(|i| wave(i, 1.1)).collect(),
        rhs: (0..n).map(|i| wave(i, 0.13)).collect(),
    }
}

pub fn sequence(dims: &[usize], frames: usize) -> ImageSequence {
    let spec = SynthSpec { dims: dims.to_vec(), frames, ..SynthSpec::default() };
    synth_generate(&spec).expect("default amplitudes stay correlated").0
}

pub fn pyramid(dims: &[usize], frames: usize, levels: usize) -> SpatialPyramid {
    build_pyramid(&sequence(dims, frames), levels).expect("grid is large enough")
}
