//! Seeded Monte Carlo trajectories of a transition kernel.
//!
//! Run `k` of a batch draws from ChaCha8 seeded with the batch seed on stream
//! `k`, so batches are reproducible and can be split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::VertexSet;
use crate::kernel::TransitionKernel;

/// Cumulative row tables for inverse-CDF sampling.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    cdf: Vec<f64>,
}

impl WalkSampler {
    pub fn new(kernel: &TransitionKernel) -> Self {
        let n = kernel.len();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut cdf = Vec::new();
        for x in 0..n {
            let mut acc = 0.0;
            for (y, p) in kernel.row(x) {
                acc += p;
                cols.push(y);
                cdf.push(acc);
            }
            offsets.push(cols.len());
        }
        Self { offsets, cols, cdf }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One step from `x`, or `None` if the walk is killed (substochastic row).
    pub fn step<R: Rng>(&self, x: usize, rng: &mut R) -> Option<usize> {
        let (lo, hi) = (self.offsets[x], self.offsets[x + 1]);
        if lo == hi {
            return None;
        }
        let u: f64 = rng.gen();
        let row = &self.cdf[lo..hi];
        let i = row.partition_point(|&c| c <= u);
        if i == row.len() {
            // u beyond the row total: killed, or rounding on a full row
            if row[row.len() - 1] >= 1.0 - 1e-12 {
                Some(self.cols[hi - 1])
            } else {
                None
            }
        } else {
            Some(self.cols[lo + i])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub start: usize,
    pub steps: u64,
    pub final_vertex: Option<usize>,
    /// First time each recorder set was visited (time 0 counts).
    pub first_hits: Vec<Option<u64>>,
}

/// Runs one trajectory of at most `horizon` steps and records the first
/// visit time of each recorder set. A zero horizon gives an empty summary.
pub fn simulate_walk(
    kernel: &TransitionKernel,
    start: usize,
    horizon: u64,
    seed: u64,
    recorders: &[VertexSet],
) -> Result<TrajectorySummary> {
    if start >= kernel.len() {
        return Err(invalid(format!("start {start} out of range")));
    }
    let mut summary = TrajectorySummary {
        start,
        steps: 0,
        final_vertex: Some(start),
        first_hits: vec![None; recorders.len()],
    };
    if horizon == 0 {
        return Ok(summary);
    }
    let sampler = WalkSampler::new(kernel);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start;
    let mut t = 0u64;
    loop {
        for (k, r) in recorders.iter().enumerate() {
            if summary.first_hits[k].is_none() && r.contains(x) {
                summary.first_hits[k] = Some(t);
            }
        }
        if t == horizon {
            break;
        }
        match sampler.step(x, &mut rng) {
            Some(y) => x = y,
            None => {
                summary.final_vertex = None;
                summary.steps = t + 1;
                return Ok(summary);
            }
        }
        t += 1;
    }
    summary.steps = t;
    summary.final_vertex = Some(x);
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitEstimate {
    pub samples: u64,
    pub hits: u64,
    /// Runs that reached neither set within the horizon.
    pub undecided: u64,
    pub p_hat: f64,
    pub standard_error: f64,
    pub wilson_interval: (f64, f64),
    pub seed: u64,
}

/// Wilson score interval for `hits` successes out of `n` at level `z`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Estimates `Pr_x[T_A < T_B]` from `samples` independent runs.
pub fn estimate_hit_probability(
    kernel: &TransitionKernel,
    start: usize,
    a: &VertexSet,
    b: &VertexSet,
    samples: u64,
    seed: u64,
    horizon: u64,
) -> Result<HitEstimate> {
    if samples == 0 {
        return Err(invalid("at least one sample is needed"));
    }
    if start >= kernel.len() {
        return Err(invalid(format!("start {start} out of range")));
    }
    let n = kernel.len();
    let in_a = a.mask(n);
    let in_b = b.mask(n);
    let sampler = WalkSampler::new(kernel);
    let outcomes: Vec<Option<bool>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut x = start;
            for _ in 0..=horizon {
                if in_a[x] {
                    return Some(true);
                }
                if in_b[x] {
                    return Some(false);
                }
                x = sampler.step(x, &mut rng)?;
            }
            None
        })
        .collect();
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    let undecided = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let p_hat = hits as f64 / samples as f64;
    Ok(HitEstimate {
        samples,
        hits,
        undecided,
        p_hat,
        standard_error: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
        wilson_interval: wilson_interval(hits, samples, 1.96),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    #[test]
    fn recorder_containing_start_hits_at_zero() {
        let g = WeightedGraph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let p = TransitionKernel::lazy(&g).unwrap();
        let rec = vec![VertexSet::new(vec![0], 3).unwrap(), VertexSet::new(vec![2], 3).unwrap()];
        let s = simulate_walk(&p, 0, 50, 7, &rec).unwrap();
        assert_eq!(s.first_hits[0], Some(0));
        let empty = simulate_walk(&p, 0, 0, 7, &rec).unwrap();
        assert_eq!(empty.steps, 0);
        assert_eq!(empty.first_hits, vec![None, None]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let g = WeightedGraph::unweighted(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let p = TransitionKernel::lazy(&g).unwrap();
        let rec = vec![VertexSet::new(vec![3], 5).unwrap()];
        let a = simulate_walk(&p, 0, 100, 11, &rec).unwrap();
        let b = simulate_walk(&p, 0, 100, 11, &rec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }
}
