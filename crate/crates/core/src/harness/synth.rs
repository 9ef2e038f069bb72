//! Synthetic sequences with known affine motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Image, ImageSequence};
use crate::similarity::min_consecutive_rho;
use crate::transform::{Affine, AffineStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    /// Rotation and translation following sinusoids in time.
    Sinusoidal,
    /// Pure translation growing linearly in time.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub dims: Vec<usize>,
    pub frames: usize,
    /// Peak translation in cells.
    pub translation_amplitude: f64,
    /// Peak rotation in degrees (2-D only).
    pub rotation_amplitude_deg: f64,
    pub motion: MotionKind,
    /// Noise standard deviation as a fraction of the pattern's dynamic range.
    pub noise: f64,
    pub blobs: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dims: vec![64, 64],
            frames: 17,
            translation_amplitude: 1.5,
            rotation_amplitude_deg: 2.0,
            motion: MotionKind::Sinusoidal,
            noise: 0.005,
            blobs: 24,
            seed: 42,
        }
    }
}

struct Blob {
    center: Vec<f64>,
    inv_two_sigma2: f64,
    amplitude: f64,
}

/// Smooth random pattern: Gaussian blobs kept well inside the grid so the
/// intensity is close to zero at the boundary.
fn blob_field(grid: &Grid, count: usize, rng: &mut ChaCha8Rng) -> Vec<Blob> {
    let d = grid.dim();
    let extent = grid
        .dims()
        .iter()
        .zip(grid.spacing())
        .map(|(&n, &h)| n as f64 * h)
        .fold(f64::INFINITY, f64::min);
    let center_radius = 0.22 * extent;
    let (smin, smax) = (0.03 * extent, 0.08 * extent);
    (0..count)
        .map(|_| {
            let center = (0..d)
                .map(|a| {
                    let mid = grid.origin()[a] + 0.5 * grid.dims()[a] as f64 * grid.spacing()[a];
                    mid + rng.random_range(-center_radius..center_radius)
                })
                .collect();
            let sigma: f64 = rng.random_range(smin..smax);
            let sign = if rng.random_bool(0.7) { 1.0 } else { -0.6 };
            Blob {
                center,
                inv_two_sigma2: 1.0 / (2.0 * sigma * sigma),
                amplitude: sign * rng.random_range(0.5..1.0),
            }
        })
        .collect()
}

fn eval_blobs(blobs: &[Blob], x: &[f64]) -> f64 {
    blobs
        .iter()
        .map(|b| {
            let r2: f64 = b.center.iter().zip(x).map(|(c, x)| (x - c).powi(2)).sum();
            b.amplitude * (-r2 * b.inv_two_sigma2).exp()
        })
        .sum()
}

/// Ground-truth transform of frame `k` (1-based); frame 1 is the identity.
pub fn ground_truth(spec: &SynthSpec, spacing: f64, k: usize) -> Affine {
    let d = spec.dims.len();
    let s = if spec.frames > 1 { (k - 1) as f64 / (spec.frames - 1) as f64 } else { 0.0 };
    let amp = spec.translation_amplitude * spacing;
    let pi = std::f64::consts::PI;
    match spec.motion {
        MotionKind::Linear => {
            let dir = [1.0, -0.6, 0.4];
            let t: Vec<f64> = (0..d).map(|a| amp * s * dir[a]).collect();
            Affine::translation(&t).expect("2-D or 3-D")
        }
        MotionKind::Sinusoidal => {
            let t = [amp * (1.5 * pi * s).sin(), amp * (pi * s).sin(), 0.5 * amp * (2.0 * pi * s).sin()];
            let angle = spec.rotation_amplitude_deg.to_radians() * (2.0 * pi * s).sin();
            let (sn, cs) = angle.sin_cos();
            let mut m = Affine::identity(d).expect("2-D or 3-D").matrix().to_vec();
            // rotation in the plane of the first two axes
            m[0] = cs;
            m[1] = -sn;
            m[d] = sn;
            m[d + 1] = cs;
            Affine::new(d, m, t[..d].to_vec()).expect("consistent shape")
        }
    }
}

/// Frame `k` is the pattern warped by the ground truth `g_k`, i.e.
/// `frame_k(g_k(x)) = pattern(x)`, plus seeded Gaussian noise.
pub fn synth_generate(spec: &SynthSpec) -> Result<(ImageSequence, AffineStack)> {
    let d = spec.dims.len();
    if !(2..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if spec.frames < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 frames, got {}", spec.frames)));
    }
    if !(spec.noise >= 0.0) || !spec.translation_amplitude.is_finite() || !spec.rotation_amplitude_deg.is_finite() {
        return Err(Error::InvalidConfig("amplitudes and noise must be finite, noise >= 0".into()));
    }
    let grid = Grid::centered(spec.dims.clone(), vec![1.0; d])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blobs = blob_field(&grid, spec.blobs, &mut rng);

    let centers = grid.cell_centers();
    let clean = |g: &Affine| -> Vec<f64> {
        let inv = g.inverse().expect("rotation is invertible");
        let mut p = vec![0.0; d];
        centers
            .iter()
            .map(|x| {
                inv.apply_point(x, &mut p);
                eval_blobs(&blobs, &p)
            })
            .collect()
    };

    let truths: Vec<Affine> = (1..=spec.frames).map(|k| ground_truth(spec, 1.0, k)).collect();
    let pattern = clean(&truths[0]);
    let (lo, hi) = pattern
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let sigma = spec.noise * (hi - lo);
    let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth = AffineStack::new(d, spec.frames)?;
    for (k, g) in truths.iter().enumerate() {
        let mut values = clean(g);
        if sigma > 0.0 {
            values.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        frames.push(Image::new(grid.clone(), values)?);
        truth.insert(k + 1, g.clone())?;
    }
    let seq = ImageSequence::uniform(frames)?;

    let id = AffineStack::identity_all(d, spec.frames)?;
    let rho = min_consecutive_rho(&seq, &id)?;
    if !(rho > 0.9) {
        return Err(Error::MotionTooLarge(rho));
    }
    Ok((seq, truth))
}
