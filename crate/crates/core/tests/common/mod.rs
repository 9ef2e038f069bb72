#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stml_core::{Affine, AffineStack, Grid, Image, ImageSequence};


pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random frames: a few random Gaussian bumps plus a little noise.
pub fn random_sequence(rng: &mut impl Rng, dims: &[usize], frames: usize) -> ImageSequence {
    let grid = Grid::centered(dims.to_vec(), vec![1.0; dims.len()]).unwrap();
    let extent = dims[0] as f64;
    let images = (0..frames)
        .map(|_| {
            let bumps: Vec<(Vec<f64>, f64, f64)> = (0..4)
                .map(|_| {
                    let c = (0..dims.len()).map(|_| rng.random_range(-0.3..0.3) * extent).collect();
                    (c, rng.random_range(0.15..0.3) * extent, rng.random_range(0.5..1.5))
                })
                .collect();
            let mut img = Image::from_fn(grid.clone(), |x| {
                bumps
                    .iter()
                    .map(|(c, s, a)| {
                        let r2: f64 = x.iter().zip(c).map(|(x, c)| (x - c).powi(2)).sum();
                        a * (-r2 / (2.0 * s * s)).exp()
                    })
                    .sum()
            })
            .unwrap()
            .into_values();
            img.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
            Image::new(grid.clone(), img).unwrap()
        })
        .collect();
    ImageSequence::uniform(images).unwrap()
}

/// Random affine maps near the identity. Translations avoid integers so
/// sample points stay off the interpolation nodes.
pub fn random_stack(rng: &mut impl Rng, dim: usize, frames: usize, scale: f64) -> AffineStack {
    let mut y = AffineStack::new(dim, frames).unwrap();
    for k in 1..=frames {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                m[i * dim + j] = if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.05..0.05) * scale;
            }
        }
        let t = (0..dim).map(|_| rng.random_range(0.1..0.4) * if rng.random() { 1.0 } else { -1.0 }).collect();
        y.insert(k, Affine::new(dim, m, t).unwrap()).unwrap();
    }
    y
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least-squares solution of the overdetermined system `a x ~ b` by
/// Householder QR.
pub fn qr_least_squares(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let (m, n) = (a.len(), a[0].len());
    for c in 0..n {
        let alpha = -(c..m).map(|r| a[r][c] * a[r][c]).sum::<f64>().sqrt().copysign(a[c][c]);
        let mut v: Vec<f64> = (c..m).map(|r| a[r][c]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in c..n {
            let s: f64 = (c..m).map(|r| v[r - c] * a[r][j]).sum::<f64>() * 2.0 / vv;
            for r in c..m {
                a[r][j] -= s * v[r - c];
            }
        }
        let s: f64 = (c..m).map(|r| v[r - c] * b[r]).sum::<f64>() * 2.0 / vv;
        for r in c..m {
            b[r] -= s * v[r - c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub const STEP: f64 = 1e-5;

pub fn perturbed(y: &AffineStack, k: usize, p: usize, delta: f64) -> AffineStack {
    let mut params = y.get(k).unwrap().params();
    params[p] += delta;
    let mut out = y.clone();
    out.insert(k, Affine::from_params(y.dim(), &params).unwrap()).unwrap();
    out
}

pub fn central_differences(y: &AffineStack, frames: &[usize], f: impl Fn(&AffineStack) -> f64) -> Vec<f64> {
    let np = y.get(frames[0]).unwrap().params().len();
    let mut g = Vec::new();
    for &k in frames {
        for p in 0..np {
            g.push((f(&perturbed(y, k, p, STEP)) - f(&perturbed(y, k, p, -STEP))) / (2.0 * STEP));
        }
    }
    g
}

/// Multilinear sampling is not differentiable where a sample point lies on
/// a node line; finite differences are only meaningful away from those.
pub fn clear_of_nodes(seq: &ImageSequence, y: &AffineStack) -> bool {
    let grid = seq.grid();
    let centers = grid.cell_centers();
    y.iter().all(|(_, t)| {
        t.apply(&centers).iter().all(|x| {
            (0..x.len()).all(|a| {
                let u = (x[a] - grid.origin()[a]) / grid.spacing()[a] - 0.5;
                (u - u.round()).abs() > 1e-4
            })
        })
    })
}

pub fn gradient_instance(r: &mut impl rand::Rng, dims: &[usize], frames: usize) -> (ImageSequence, AffineStack) {
    loop {
        let seq = random_sequence(r, dims, frames);
        let y = random_stack(r, dims.len(), frames, 1.0);
        if clear_of_nodes(&seq, &y) {
            return (seq, y);
        }
    }
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(b).max(f64::MIN_POSITIVE)
}

