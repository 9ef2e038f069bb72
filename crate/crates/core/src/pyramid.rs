//! Spatial multilevel representation of a sequence.
//!
//! Smoothing and restriction act on each frame separately; the time axis
//! is never filtered or subsampled.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Image, ImageSequence};

const KERNEL: [f64; 3] = [0.25, 0.5, 0.25];

/// Minimum cells per axis on the coarsest level.
pub const MIN_COARSE_DIM: usize = 4;

/// Separable `[1, 2, 1] / 4` filter along every axis with half-sample
/// symmetric boundaries (`x[-1] = x[0]`).
pub fn smooth(image: &Image) -> Image {
    let grid = image.grid();
    let dims = grid.dims();
    let strides = grid.strides();
    let mut cur = image.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    for (a, &n) in dims.iter().enumerate() {
        let s = strides[a];
        for (idx, out) in next.iter_mut().enumerate() {
            let i = (idx / s) % n;
            let left = if i == 0 { idx } else { idx - s };
            let right = if i + 1 == n { idx } else { idx + s };
            *out = KERNEL[0] * cur[left] + KERNEL[1] * cur[idx] + KERNEL[2] * cur[right];
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Image::new(grid.clone(), cur).expect("smoothing preserves the grid")
}

/// Block mean over groups of `2^d` cells. Odd axes end in a block of one
/// cell. The coarse grid keeps the origin and doubles the spacing.
pub fn restrict(image: &Image) -> Image {
    let grid = image.grid();
    let d = grid.dim();
    let coarse_dims: Vec<usize> = grid.dims().iter().map(|&n| n.div_ceil(2)).collect();
    let coarse_spacing: Vec<f64> = grid.spacing().iter().map(|h| 2.0 * h).collect();
    let coarse = Grid::new(coarse_dims.clone(), coarse_spacing, grid.origin().to_vec())
        .expect("restriction needs dims >= 4");

    let fine_dims = grid.dims();
    let fs = grid.strides();
    let cs = coarse.strides();
    let mut sums = vec![0.0; coarse.cell_count()];
    let mut counts = vec![0u32; coarse.cell_count()];
    for (idx, &v) in image.values().iter().enumerate() {
        let mut cidx = 0;
        for a in 0..d {
            let i = (idx / fs[a]) % fine_dims[a];
            cidx += (i / 2) * cs[a];
        }
        sums[cidx] += v;
        counts[cidx] += 1;
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Image::new(coarse, values).expect("restriction preserves finiteness")
}

#[derive(Debug, Clone)]
pub struct SpatialPyramid {
    levels: Vec<ImageSequence>,
}

impl SpatialPyramid {
    /// Levels ordered coarse to fine.
    pub fn levels(&self) -> &[ImageSequence] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &ImageSequence {
        self.levels.last().expect("pyramid has a level")
    }

    pub fn coarsest(&self) -> &ImageSequence {
        &self.levels[0]
    }
}

pub fn build_pyramid(seq: &ImageSequence, level_count: usize) -> Result<SpatialPyramid> {
    if level_count == 0 {
        return Err(Error::TooManyLevels {
            levels: 0,
            dims: seq.grid().dims().to_vec(),
        });
    }
    let too_many = || Error::TooManyLevels {
        levels: level_count,
        dims: seq.grid().dims().to_vec(),
    };
    let mut dims = seq.grid().dims().to_vec();
    for _ in 1..level_count {
        dims.iter_mut().for_each(|n| *n = n.div_ceil(2));
        if dims.iter().any(|&n| n < MIN_COARSE_DIM) {
            return Err(too_many());
        }
    }

    let mut levels = vec![seq.clone()];
    for _ in 1..level_count {
        let finer = levels.last().unwrap();
        let frames: Vec<Image> = finer
            .frames()
            .par_iter()
            .map(|f| restrict(&smooth(f)))
            .collect();
        levels.push(ImageSequence::new(frames, finer.times().to_vec())?);
    }
    levels.reverse();
    Ok(SpatialPyramid { levels })
}
