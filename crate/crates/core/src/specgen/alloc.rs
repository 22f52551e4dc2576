use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::SpecgenError;
use crate::rng::SeededRng;

/// Subcarriers per link.
pub const BLOCK_WIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAssignment {
    /// Index into the connection set.
    pub connection: usize,
    /// First subcarrier of the block.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    pub n_subcarriers: usize,
    /// In placement order. Connections that found no room are absent.
    pub assignments: Vec<BlockAssignment>,
    pub mask: Vec<bool>,
}

/// Most blocks that fit in `n_s` bins with a guard bin between blocks and at
/// each band edge: `5k + (k + 1) <= n_s`.
pub fn max_blocks(n_s: usize) -> usize {
    n_s.saturating_sub(1) / (BLOCK_WIDTH + 1)
}

/// Places each connection, in random order, on a uniformly chosen feasible
/// block. Connections left without a feasible block are dropped.
pub fn allocate_subcarriers(n_connections: usize, n_s: usize, rng: &mut SeededRng) -> Result<OccupancyMap, SpecgenError> {
    if n_s < BLOCK_WIDTH + 2 {
        return Err(SpecgenError::Domain(format!(
            "need at least {} subcarriers, got {n_s}",
            BLOCK_WIDTH + 2
        )));
    }
    let mut order: Vec<usize> = (0..n_connections).collect();
    order.shuffle(rng);

    // Maximal idle runs [lo, hi]; a block at s fits a run iff lo < s and
    // s + BLOCK_WIDTH < hi, i.e. s in [lo + 1, hi - BLOCK_WIDTH].
    let mut runs: Vec<(usize, usize)> = vec![(0, n_s - 1)];
    let starts_in = |&(lo, hi): &(usize, usize)| (hi - lo).saturating_sub(BLOCK_WIDTH);

    let mut assignments = Vec::new();
    let mut mask = vec![false; n_s];
    for connection in order {
        let total: usize = runs.iter().map(starts_in).sum();
        if total == 0 {
            break;
        }
        let mut pick = rng.random_range(0..total);
        let (idx, start) = runs
            .iter()
            .enumerate()
            .find_map(|(i, r)| {
                let n = starts_in(r);
                if pick < n {
                    Some((i, r.0 + 1 + pick))
                } else {
                    pick -= n;
                    None
                }
            })
            .expect("pick within total");
        let (lo, hi) = runs[idx];
        runs.splice(idx..=idx, [(lo, start - 1), (start + BLOCK_WIDTH, hi)]);
        mask[start..start + BLOCK_WIDTH].iter_mut().for_each(|m| *m = true);
        assignments.push(BlockAssignment { connection, start });
    }
    Ok(OccupancyMap {
        n_subcarriers: n_s,
        assignments,
        mask,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum MaskViolation {
    #[error("occupied run at {start} has width {width}")]
    Width { start: usize, width: usize },
    #[error("band edge bin {0} is occupied")]
    Edge(usize),
}

/// Checks the guard and width rules on a bare mask: both edge bins idle and
/// every maximal run of occupied bins exactly [`BLOCK_WIDTH`] long.
pub fn validate_mask(mask: &[bool]) -> Result<(), MaskViolation> {
    if let Some(true) = mask.first() {
        return Err(MaskViolation::Edge(0));
    }
    if let Some(true) = mask.last() {
        return Err(MaskViolation::Edge(mask.len() - 1));
    }
    let mut k = 0;
    while k < mask.len() {
        if mask[k] {
            let start = k;
            while k < mask.len() && mask[k] {
                k += 1;
            }
            if k - start != BLOCK_WIDTH {
                return Err(MaskViolation::Width {
                    start,
                    width: k - start,
                });
            }
        } else {
            k += 1;
        }
    }
    Ok(())
}
