//! Cell-centered spatial grids, scalar images and image sequences.
//!
//! Image values are stored with the first axis varying fastest:
//! the value of cell `(i0, i1, i2)` lives at `i0 + d0 * (i1 + d1 * i2)`.

mod stsq;

pub use stsq::{read_sequence, write_sequence};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        let d = dims.len();
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if spacing.len() != d || origin.len() != d {
            return Err(Error::InvalidGrid(format!(
                "dims/spacing/origin lengths differ: {}/{}/{}",
                d,
                spacing.len(),
                origin.len()
            )));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid(format!("all dims must be >= 2, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Grid centered on the world origin with unit-free `spacing`.
    pub fn centered(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        let origin = dims
            .iter()
            .zip(&spacing)
            .map(|(&n, &h)| -0.5 * n as f64 * h)
            .collect();
        Self::new(dims, spacing, origin)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// `h_d`, the product of the spacings.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// World coordinates of all cell centers in storage order.
    pub fn cell_centers(&self) -> Points {
        let d = self.dim();
        let n = self.cell_count();
        let mut coords = Vec::with_capacity(n * d);
        let mut idx = vec![0usize; d];
        for _ in 0..n {
            for a in 0..d {
                coords.push(self.origin[a] + (idx[a] as f64 + 0.5) * self.spacing[a]);
            }
            for a in 0..d {
                idx[a] += 1;
                if idx[a] < self.dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Points { dim: d, coords }
    }

    /// Root mean square distance of the cell centers from the world origin.
    pub fn rms_radius(&self) -> f64 {
        let centers = self.cell_centers();
        let ss: f64 = centers.coords.iter().map(|c| c * c).sum();
        (ss / centers.len() as f64).sqrt()
    }

    pub(crate) fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for (a, &n) in self.dims.iter().enumerate() {
            s[a] = acc;
            acc *= n;
        }
        s
    }
}

/// A flat list of points of a fixed spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<const D: usize>(pts: &[[f64; D]]) -> Self {
        Self {
            dim: D,
            coords: pts.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: Grid,
    values: Vec<f64>,
}

impl Image {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::InvalidImage(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite intensity".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let n = grid.cell_count();
        Self { grid, values: vec![value; n] }
    }

    /// Evaluates `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = grid.cell_centers().iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Multilinear interpolation of the cell-centered values.
    ///
    /// Values outside the grid are taken as zero, so the interpolant decays
    /// linearly to zero over the first cell beyond the outermost centers and
    /// vanishes further out.
    pub fn sample(&self, points: &Points) -> Vec<f64> {
        assert_eq!(points.dim(), self.grid.dim(), "point dimension");
        points.iter().map(|x| self.sample_point(x, None)).collect()
    }

    /// Interpolated value at `x`, with the spatial gradient written into
    /// `grad` when given.
    pub fn sample_point(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        let strides = g.strides();
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..d {
            let u = (x[a] - g.origin[a]) / g.spacing[a] - 0.5;
            if !(u > -1.0 && u < g.dims[a] as f64) {
                if let Some(gr) = grad {
                    gr[..d].fill(0.0);
                }
                return 0.0;
            }
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }

        let mut value = 0.0;
        let mut dval = [0.0f64; 3];
        'corner: for corner in 0..(1usize << d) {
            let mut offset = 0usize;
            let mut weight = 1.0;
            let mut dweight = [1.0f64; 3];
            for a in 0..d {
                let hi = (corner >> a) & 1 == 1;
                let i = base[a] + hi as isize;
                if i < 0 || i >= g.dims[a] as isize {
                    continue 'corner;
                }
                offset += i as usize * strides[a];
                let (w, dw) = if hi { (frac[a], 1.0) } else { (1.0 - frac[a], -1.0) };
                for b in 0..d {
                    dweight[b] *= if a == b { dw } else { w };
                }
                weight *= w;
            }
            let v = self.values[offset];
            value += weight * v;
            for a in 0..d {
                dval[a] += dweight[a] * v;
            }
        }
        if let Some(gr) = grad {
            for a in 0..d {
                gr[a] = dval[a] / g.spacing[a];
            }
        }
        value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    frames: Vec<Image>,
    times: Vec<f64>,
}

impl ImageSequence {
    pub fn new(frames: Vec<Image>, times: Vec<f64>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidSequence(format!(
                "need at least 2 frames, got {}",
                frames.len()
            )));
        }
        if times.len() != frames.len() {
            return Err(Error::InvalidSequence(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::TimesNotIncreasing);
        }
        let grid = frames[0].grid();
        if frames.iter().any(|f| f.grid() != grid) {
            return Err(Error::InvalidSequence("frames do not share one grid".into()));
        }
        Ok(Self { frames, times })
    }

    /// Sequence with times `0, 1, .., n-1`.
    pub fn uniform(frames: Vec<Image>) -> Result<Self> {
        let times = (0..frames.len()).map(|k| k as f64).collect();
        Self::new(frames, times)
    }

    pub fn grid(&self) -> &Grid {
        self.frames[0].grid()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    /// Frame with 1-based index `k`.
    pub fn frame(&self, k: usize) -> &Image {
        &self.frames[k - 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Time of the frame with 1-based index `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.times[k - 1]
    }

    /// Default integration interval `[t_1 - dt/2, t_n + dt/2]`, `dt` the mean spacing.
    pub fn time_interval(&self) -> (f64, f64) {
        let n = self.times.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        let dt = (t1 - t0) / (n - 1) as f64;
        (t0 - 0.5 * dt, t1 + 0.5 * dt)
    }
}

pub fn cell_centers(grid: &Grid) -> Points {
    grid.cell_centers()
}

pub fn sample(image: &Image, points: &Points) -> Vec<f64> {
    image.sample(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid1(n: usize, h: f64, o: f64) -> Grid {
        Grid::new(vec![n], vec![h], vec![o]).unwrap()
    }

    #[test]
    fn cell_centers_1d() {
        assert_eq!(grid1(2, 1.0, 0.0).cell_centers().coords(), &[0.5, 1.5]);
        assert_eq!(grid1(3, 2.0, -3.0).cell_centers().coords(), &[-2.0, 0.0, 2.0]);
    }

    #[test]
    fn cell_centers_2d_fastest_axis_first() {
        let g = Grid::new(vec![2, 2], vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        assert_eq!(
            g.cell_centers().coords(),
            &[0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75]
        );
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![1, 4], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![4, 4], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![4, 4], vec![1.0], vec![0.0, 0.0]).is_err());
        let g = Grid::new(vec![4, 5, 6], vec![0.5, 2.0, 3.0], vec![0.0; 3]).unwrap();
        assert_eq!(g.cell_volume(), 3.0);
    }

    #[test]
    fn sample_linear_midpoint() {
        let img = Image::new(grid1(2, 1.0, 0.0), vec![0.0, 1.0]).unwrap();
        let v = img.sample(&Points::from_points(&[[1.0], [0.5], [1.5]]));
        assert_eq!(v, vec![0.5, 0.0, 1.0]);
    }

    #[test]
    fn sample_constant_inside_hull() {
        let g = Grid::new(vec![4, 3], vec![1.0, 0.5], vec![-1.0, 2.0]).unwrap();
        let img = Image::constant(g, 2.5);
        let pts = Points::from_points(&[[-0.5, 2.25], [0.3, 2.6], [2.5, 3.25], [1.0, 2.9]]);
        for v in img.sample(&pts) {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn sample_zero_far_outside() {
        let g = Grid::new(vec![4, 4], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let img = Image::constant(g, 7.0);
        let pts = Points::from_points(&[[-0.6, 2.0], [2.0, 4.6], [10.0, 10.0], [-1.0, -1.0]]);
        assert_eq!(img.sample(&pts), vec![0.0; 4]);
        // halfway between the last center and the padded zero
        let v = img.sample(&Points::from_points(&[[4.0, 2.0]]));
        assert_abs_diff_eq!(v[0], 3.5, epsilon = 1e-14);
    }

    #[test]
    fn sample_reproduces_affine_fields() {
        let g = Grid::new(vec![5, 4, 3], vec![1.0, 0.5, 2.0], vec![0.3, -1.0, 0.0]).unwrap();
        let f = |x: &[f64]| 1.5 + 0.25 * x[0] - 2.0 * x[1] + 0.75 * x[2];
        let img = Image::from_fn(g.clone(), f).unwrap();
        let pts = Points::from_points(&[[0.9, -0.6, 1.1], [4.7, 0.7, 4.9], [2.2, 0.0, 3.0]]);
        let mut grad = [0.0; 3];
        for x in pts.iter() {
            let v = img.sample_point(x, Some(&mut grad));
            assert_abs_diff_eq!(v, f(x), epsilon = 1e-12);
            assert_abs_diff_eq!(grad[0], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(grad[1], -2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(grad[2], 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        let g = Grid::new(vec![6, 5], vec![1.0, 1.5], vec![0.0, 0.0]).unwrap();
        let img = Image::from_fn(g, |x| (0.7 * x[0]).sin() + x[1] * x[1] * 0.1).unwrap();
        let x = [2.3, 3.1];
        let mut grad = [0.0; 2];
        img.sample_point(&x, Some(&mut grad));
        for a in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (img.sample_point(&xp, None) - img.sample_point(&xm, None)) / (2.0 * h);
            assert_abs_diff_eq!(grad[a], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn sequence_validation() {
        let g = grid1(4, 1.0, 0.0);
        let f = Image::constant(g.clone(), 1.0);
        assert!(ImageSequence::new(vec![f.clone()], vec![0.0]).is_err());
        assert!(matches!(
            ImageSequence::new(vec![f.clone(), f.clone()], vec![1.0, 1.0]),
            Err(Error::TimesNotIncreasing)
        ));
        let other = Image::constant(grid1(5, 1.0, 0.0), 1.0);
        assert!(ImageSequence::new(vec![f.clone(), other], vec![0.0, 1.0]).is_err());
        let s = ImageSequence::uniform(vec![f.clone(), f.clone(), f]).unwrap();
        assert_eq!(s.time_interval(), (-0.5, 2.5));
    }
}
