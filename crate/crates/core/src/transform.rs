//! Affine transforms in world coordinates and per-frame stacks of them.
//!
//! Parameters are vectorized as row-major `A` followed by `b`, so a 2-D
//! transform has parameters `[a11, a12, a21, a22, b1, b2]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Image, Points};

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    dim: usize,
    matrix: Vec<f64>,
    translation: Vec<f64>,
}

pub fn param_count(dim: usize) -> usize {
    dim * dim + dim
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

impl Affine {
    pub fn new(dim: usize, matrix: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if matrix.len() != dim * dim || translation.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} affine needs {} matrix and {} translation entries",
                dim,
                dim,
                dim * dim,
                dim
            )));
        }
        Ok(Self { dim, matrix, translation })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Ok(Self { dim, matrix, translation: vec![0.0; dim] })
    }

    pub fn translation(t: &[f64]) -> Result<Self> {
        let mut a = Self::identity(t.len())?;
        a.translation.copy_from_slice(t);
        Ok(a)
    }

    /// Planar rotation by `angle` radians followed by translation `t`.
    pub fn rigid_2d(angle: f64, t: [f64; 2]) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            dim: 2,
            matrix: vec![c, -s, s, c],
            translation: t.to_vec(),
        }
    }

    pub fn from_params(dim: usize, params: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if params.len() != param_count(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a {dim}-D affine",
                params.len()
            )));
        }
        let (m, t) = params.split_at(dim * dim);
        Ok(Self { dim, matrix: m.to_vec(), translation: t.to_vec() })
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.matrix.clone();
        p.extend_from_slice(&self.translation);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major matrix entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.translation
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        match self.dim {
            2 => m[0] * m[3] - m[1] * m[2],
            _ => {
                m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                    + m[2] * (m[3] * m[7] - m[4] * m[6])
            }
        }
    }

    pub fn apply_point(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.matrix[i * d..(i + 1) * d];
            out[i] = self.translation[i] + row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        }
    }

    pub fn apply(&self, points: &Points) -> Points {
        let d = self.dim;
        assert_eq!(points.dim(), d, "point dimension");
        let mut coords = vec![0.0; points.coords().len()];
        for (x, y) in points.iter().zip(coords.chunks_exact_mut(d)) {
            self.apply_point(x, y);
        }
        Points::new(d, coords).expect("same layout")
    }

    /// `self ∘ other`, i.e. `x -> self(other(x))`.
    pub fn compose(&self, other: &Affine) -> Affine {
        let d = self.dim;
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                matrix[i * d + j] = (0..d).map(|k| self.matrix[i * d + k] * other.matrix[k * d + j]).sum();
            }
        }
        let mut translation = vec![0.0; d];
        self.apply_point(&other.translation, &mut translation);
        Affine { dim: d, matrix, translation }
    }

    pub fn inverse(&self) -> Option<Affine> {
        let d = self.dim;
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.matrix;
        let inv: Vec<f64> = match d {
            2 => vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det],
            _ => {
                let c = |r0: usize, c0: usize, r1: usize, c1: usize| {
                    m[r0 * 3 + c0] * m[r1 * 3 + c1] - m[r0 * 3 + c1] * m[r1 * 3 + c0]
                };
                let adj = [
                    c(1, 1, 2, 2),
                    -c(0, 1, 2, 2),
                    c(0, 1, 1, 2),
                    -c(1, 0, 2, 2),
                    c(0, 0, 2, 2),
                    -c(0, 0, 1, 2),
                    c(1, 0, 2, 1),
                    -c(0, 0, 2, 1),
                    c(0, 0, 1, 1),
                ];
                adj.iter().map(|v| v / det).collect()
            }
        };
        let mut translation = vec![0.0; d];
        for i in 0..d {
            translation[i] = -(0..d).map(|k| inv[i * d + k] * self.translation[k]).sum::<f64>();
        }
        Some(Affine { dim: d, matrix: inv, translation })
    }
}

pub fn identity_affine(dim: usize) -> Result<Affine> {
    Affine::identity(dim)
}

pub fn apply_affine(t: &Affine, points: &Points) -> Points {
    t.apply(points)
}

/// Resamples `img` on its own grid: `out(x) = img(A x + b)` at each cell center.
pub fn transform_image(img: &Image, t: &Affine) -> Image {
    let centers = img.grid().cell_centers();
    let values = img.sample(&t.apply(&centers));
    Image::new(img.grid().clone(), values).expect("sampling yields finite values")
}

/// Affine transforms for a subset of the frames `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineStack {
    dim: usize,
    frame_count: usize,
    items: BTreeMap<usize, Affine>,
}

impl AffineStack {
    pub fn new(dim: usize, frame_count: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim, frame_count, items: BTreeMap::new() })
    }

    pub fn identity(dim: usize, frame_count: usize, frames: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::new(dim, frame_count)?;
        for k in frames {
            s.insert(k, Affine::identity(dim)?)?;
        }
        Ok(s)
    }

    pub fn identity_all(dim: usize, frame_count: usize) -> Result<Self> {
        Self::identity(dim, frame_count, 1..=frame_count)
    }

    pub fn insert(&mut self, k: usize, t: Affine) -> Result<()> {
        if k == 0 || k > self.frame_count {
            return Err(Error::ShapeMismatch(format!(
                "frame {k} outside 1..={}",
                self.frame_count
            )));
        }
        if t.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "{}-D transform in a {}-D stack",
                t.dim(),
                self.dim
            )));
        }
        self.items.insert(k, t);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&Affine> {
        self.items.get(&k)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.items.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Affine)> {
        self.items.iter().map(|(&k, t)| (k, t))
    }

    /// The transforms of `frames`, all of which must be present.
    pub fn restrict(&self, frames: &[usize]) -> Result<AffineStack> {
        let mut out = Self::new(self.dim, self.frame_count)?;
        for &k in frames {
            let t = self
                .get(k)
                .ok_or_else(|| Error::ShapeMismatch(format!("frame {k} missing from stack")))?;
            out.insert(k, t.clone())?;
        }
        Ok(out)
    }

    /// Concatenated parameter vectors in ascending frame order.
    pub fn params(&self) -> Vec<f64> {
        self.items.values().flat_map(|t| t.params()).collect()
    }

    /// Replaces the transforms of `frames` by consecutive chunks of `params`.
    pub fn from_params(dim: usize, frame_count: usize, frames: &[usize], params: &[f64]) -> Result<Self> {
        let p = param_count(dim);
        if params.len() != p * frames.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for {} frames",
                params.len(),
                frames.len()
            )));
        }
        let mut s = Self::new(dim, frame_count)?;
        for (&k, chunk) in frames.iter().zip(params.chunks_exact(p)) {
            s.insert(k, Affine::from_params(dim, chunk)?)?;
        }
        Ok(s)
    }

    /// Overwrites or adds every transform of `other`.
    pub fn merge(&mut self, other: &AffineStack) -> Result<()> {
        for (k, t) in other.iter() {
            self.insert(k, t.clone())?;
        }
        Ok(())
    }

    /// Frames whose matrix has a non-positive determinant.
    pub fn non_positive_determinants(&self) -> Vec<usize> {
        self.iter()
            .filter(|(_, t)| t.determinant() <= 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, t) in self.iter() {
            let _ = write!(s, "{k}:");
            for v in t.params() {
                let _ = write!(s, " {v:?}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the `k: a11 a12 .. b1 b2` line format. The spatial dimension
    /// is inferred from the parameter count.
    pub fn from_text(text: &str, frame_count: usize) -> Result<Self> {
        let mut dim = None;
        let mut stack: Option<AffineStack> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |why: &str| Error::Parse(format!("line {}: {why}", lineno + 1));
            let (k, rest) = line.split_once(':').ok_or_else(|| bad("missing `:`"))?;
            let k: usize = k.trim().parse().map_err(|_| bad("bad frame index"))?;
            let params: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            let d = match params.len() {
                6 => 2,
                12 => 3,
                n => return Err(bad(&format!("{n} parameters"))),
            };
            if *dim.get_or_insert(d) != d {
                return Err(bad("mixed dimensions"));
            }
            let s = match &mut stack {
                Some(s) => s,
                None => stack.insert(Self::new(d, frame_count)?),
            };
            s.insert(k, Affine::from_params(d, &params)?)?;
        }
        stack.ok_or_else(|| Error::Parse("no transforms".into()))
    }
}

fn check_same_shape(a: &AffineStack, b: &AffineStack) -> Result<()> {
    if a.dim != b.dim || a.frame_count != b.frame_count {
        return Err(Error::ShapeMismatch(format!(
            "stacks of {}-D/{} frames and {}-D/{} frames",
            a.dim, a.frame_count, b.dim, b.frame_count
        )));
    }
    Ok(())
}

/// Euclidean norm of the concatenated parameter vectors.
pub fn stack_norm(y: &AffineStack) -> f64 {
    y.params().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norm of the parameter difference over the frames present in both stacks.
pub fn stack_diff_norm(a: &AffineStack, b: &AffineStack) -> Result<f64> {
    check_same_shape(a, b)?;
    let mut ss = 0.0;
    for (k, ta) in a.iter() {
        if let Some(tb) = b.get(k) {
            ss += ta
                .params()
                .iter()
                .zip(tb.params())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
        }
    }
    Ok(ss.sqrt())
}
