use serde::Serialize;

use crate::error::{Error, Result};

/// Nested frame index sets `K_0 ⊂ K_1 ⊂ .. ⊂ K_T = {1..n}`, coarse first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemporalSchedule {
    levels: Vec<Vec<usize>>,
}

impl TemporalSchedule {
    /// A schedule with the single level `{1..n}`.
    pub fn flat(n: usize) -> Self {
        Self { levels: vec![(1..=n).collect()] }
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn level(&self, q: usize) -> &[usize] {
        &self.levels[q]
    }

    /// Index `T` of the finest level.
    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn frame_count(&self) -> usize {
        self.levels.last().map_or(0, Vec::len)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

/// Binary-tree coarsening: each coarser level keeps every second frame of
/// the finer one, starting with frame 1, and always keeps frame `n`.
/// Coarsening stops once a level has at most `coarsest_size` frames.
pub fn build_temporal_levels(n: usize, coarsest_size: usize) -> Result<TemporalSchedule> {
    if n < 3 {
        return Err(Error::InvalidSchedule(format!("need at least 3 frames, got {n}")));
    }
    if coarsest_size < 3 {
        return Err(Error::InvalidSchedule(format!(
            "coarsest level needs at least 3 frames, got {coarsest_size}"
        )));
    }
    let mut levels = vec![(1..=n).collect::<Vec<_>>()];
    loop {
        let finer = levels.last().unwrap();
        if finer.len() <= coarsest_size {
            break;
        }
        let mut coarser: Vec<usize> = finer.iter().step_by(2).copied().collect();
        if *coarser.last().unwrap() != n {
            coarser.push(n);
        }
        levels.push(coarser);
    }
    levels.reverse();
    Ok(TemporalSchedule { levels })
}
