//! ρ-percolation on the d-ary tree.
//!
//! An edge into a vertex is open when the vertex's uniform falls below p, so
//! a single seed yields a monotone coupling across the whole p grid. The
//! best open fraction is the depth-n surrogate for the liminf along a ray:
//! a branch-and-bound DFS maximises the open count at the terminal level.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::treesim::{replica_seed, DisorderOracle};
use crate::weights::WeightLaw;

/// How a leaf's score is defined when maximising over leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FractionMode {
    /// Open count at the terminal level divided by depth.
    #[default]
    Terminal,
    /// Minimum over k ≤ depth of (open count up to k)/k; a stricter
    /// surrogate for the liminf, exposed for comparison.
    RunningMin,
}

fn bernoulli_p(oracle: &DisorderOracle) -> Result<f64> {
    match oracle.law() {
        WeightLaw::Bernoulli { p, .. } => Ok(*p),
        other => Err(Error::Domain(format!(
            "percolation needs a Bernoulli law, got {other}"
        ))),
    }
}

/// Max over leaves of the open-edge count on the root path, by DFS with
/// branch-and-bound pruning (exact: a branch is cut only when it cannot beat
/// the incumbent). O(depth) memory.
fn best_open_count(oracle: &DisorderOracle, p: f64, depth: u32) -> u32 {
    let d = oracle.d() as u64;
    let mut best: u32 = 0;
    // stack of (level, index, open count up to and including this vertex)
    let mut stack: Vec<(u32, u64, u32)> = Vec::with_capacity((depth as usize + 1) * d as usize);
    for c in (0..d).rev() {
        stack.push((1, c, 0));
    }
    while let Some((level, index, count_above)) = stack.pop() {
        let open = (oracle.vertex_uniform_unchecked(level, index) < p) as u32;
        let count = count_above + open;
        let remaining = depth - level;
        if count + remaining <= best {
            continue;
        }
        if level == depth {
            if count > best {
                best = count;
                if best == depth {
                    return best;
                }
            }
            continue;
        }
        let base = index * d;
        for c in (0..d).rev() {
            stack.push((level + 1, base + c, count));
        }
    }
    best
}

fn best_running_min_fraction(oracle: &DisorderOracle, p: f64, depth: u32) -> f64 {
    let d = oracle.d() as u64;
    let mut best = f64::NEG_INFINITY;
    let mut stack: Vec<(u32, u64, u32, f64)> = Vec::new();
    for c in (0..d).rev() {
        stack.push((1, c, 0, f64::INFINITY));
    }
    while let Some((level, index, count_above, runmin)) = stack.pop() {
        let open = (oracle.vertex_uniform_unchecked(level, index) < p) as u32;
        let count = count_above + open;
        let runmin = runmin.min(count as f64 / level as f64);
        if runmin <= best {
            continue; // running min can only decrease along the path
        }
        if level == depth {
            if runmin > best {
                best = runmin;
            }
            continue;
        }
        let base = index * d;
        for c in (0..d).rev() {
            stack.push((level + 1, base + c, count, runmin));
        }
    }
    best
}

/// Best open fraction over the leaves of a depth-n tree, in {0, 1/n, …, 1}.
pub fn best_open_fraction(oracle: &DisorderOracle, depth: u32) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Domain("depth must be >= 1".into()));
    }
    let p = bernoulli_p(oracle)?;
    Ok(best_open_count(oracle, p, depth) as f64 / depth as f64)
}

/// One (p, ρ) cell of the occurrence experiment.
#[derive(Debug, Clone)]
pub struct PercolationRun {
    pub d: u32,
    pub p: f64,
    pub rho: f64,
    pub depth: u32,
    pub replicas: u32,
    /// Best fraction per replica, in replica order.
    pub best_fractions: Vec<f64>,
}

impl PercolationRun {
    pub fn occurrence_frequency(&self) -> f64 {
        let hits = self
            .best_fractions
            .iter()
            .filter(|&&f| f >= self.rho)
            .count();
        hits as f64 / self.best_fractions.len() as f64
    }

    pub fn mean_best_fraction(&self) -> f64 {
        self.best_fractions.iter().sum::<f64>() / self.best_fractions.len() as f64
    }
}

/// Runs the occurrence experiment over a p grid with common uniforms:
/// replica r uses the same disorder seed at every p, so its best fraction is
/// nondecreasing across the grid.
pub fn percolation_curve(
    d: u32,
    rho: f64,
    p_grid: &[f64],
    depth: u32,
    replicas: u32,
    run_salt: u64,
    mode: FractionMode,
) -> Result<Vec<PercolationRun>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho={rho} must lie in (0,1]")));
    }
    if depth == 0 || replicas == 0 {
        return Err(Error::Domain("depth and replicas must be >= 1".into()));
    }
    for &p in p_grid {
        if !(p >= 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("p={p} outside [0,1]")));
        }
    }
    p_grid
        .iter()
        .map(|&p| {
            // the closed endpoints are allowed here: openness thresholds the
            // uniforms directly, the law is carried for bookkeeping only
            let law = WeightLaw::Bernoulli {
                p,
                one_value: 1.0,
                zero_value: 0.0,
            };
            let model = crate::analytics::Model::new(d, law)?;
            let best_fractions: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let oracle =
                        DisorderOracle::new(model.clone(), replica_seed(run_salt, r as u64));
                    match mode {
                        FractionMode::Terminal => {
                            best_open_count(&oracle, p, depth) as f64 / depth as f64
                        }
                        FractionMode::RunningMin => best_running_min_fraction(&oracle, p, depth),
                    }
                })
                .collect();
            Ok(PercolationRun {
                d,
                p,
                rho,
                depth,
                replicas,
                best_fractions,
            })
        })
        .collect()
}
