//! Supporting-subtree construction and top-K restricted energies.
//!
//! The subtree keeps, level by level, the vertices whose path average clears
//! λ'(β) − δ_k (children of killed vertices stay killed), and reports sizes
//! and restricted partition sums together with fitted growth rates. The
//! top-K operation selects the ⌈e^{cn}⌉ best terminal vertices and compares
//! their restricted energy against the rate-function prediction.

use rayon::prelude::*;

use crate::analytics::legendre;
use crate::error::{Error, Result};
use crate::numerics::{bisect, ols_slope, REDUCE_CHUNK};
use crate::treesim::{check_array_budget, expand_level, scaled_log_sum_exp, DisorderOracle};

/// Slack sequence δ_k for the prefix filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSchedule {
    /// δ_k = a / √k.
    InvSqrt { a: f64 },
    /// δ_k = c for every level.
    Constant { c: f64 },
    /// δ_k = +∞: no filtering, the subtree is the full tree.
    Infinite,
}

impl DeltaSchedule {
    pub fn delta(&self, level: u32) -> f64 {
        match *self {
            DeltaSchedule::InvSqrt { a } => a / (level as f64).sqrt(),
            DeltaSchedule::Constant { c } => c,
            DeltaSchedule::Infinite => f64::INFINITY,
        }
    }

    /// Default amplitude for the 1/√k schedule: 1.5 standard deviations of
    /// the β-tilted law, the scale at which the filter thins the tree
    /// without starving it at desk-scale depths.
    pub fn default_inv_sqrt(law: &crate::weights::WeightLaw, beta: f64) -> Result<DeltaSchedule> {
        let var = law.log_mgf_second_deriv(beta)?;
        Ok(DeltaSchedule::InvSqrt {
            a: 1.5 * var.sqrt(),
        })
    }
}

impl std::fmt::Display for DeltaSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeltaSchedule::InvSqrt { a } => write!(f, "a/sqrt:{a}"),
            DeltaSchedule::Constant { c } => write!(f, "const:{c}"),
            DeltaSchedule::Infinite => write!(f, "infinite"),
        }
    }
}

impl std::str::FromStr for DeltaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "infinite" {
            return Ok(DeltaSchedule::Infinite);
        }
        if let Some(a) = s.strip_prefix("a/sqrt:") {
            let a = a
                .parse()
                .map_err(|e| Error::Parse(format!("bad schedule amplitude in `{s}`: {e}")))?;
            return Ok(DeltaSchedule::InvSqrt { a });
        }
        if let Some(c) = s.strip_prefix("const:") {
            let c = c
                .parse()
                .map_err(|e| Error::Parse(format!("bad schedule constant in `{s}`: {e}")))?;
            return Ok(DeltaSchedule::Constant { c });
        }
        Err(Error::Parse(format!(
            "unknown delta schedule `{s}` (expected a/sqrt:<a>, const:<c> or infinite)"
        )))
    }
}

/// Level-by-level record of the filtered subtree.
#[derive(Debug, Clone)]
pub struct SubtreeReport {
    pub beta: f64,
    pub schedule: DeltaSchedule,
    /// |T̃_k| for k = 1..depth.
    pub sizes: Vec<u64>,
    /// log Σ_{v ∈ T̃_k} e^{β·prefix(v)}; −∞ on empty levels.
    pub restricted_log_sums: Vec<f64>,
    /// OLS slope of log|T̃_k| over the last half of levels, with stderr.
    /// NaN when an empty level falls inside the fit window.
    pub growth_rate: (f64, f64),
    /// OLS slope of the restricted log-sums over the same window.
    pub restricted_energy_rate: (f64, f64),
}

impl SubtreeReport {
    pub fn survivor_fraction(&self, d: u32, level: u32) -> f64 {
        self.sizes[(level - 1) as usize] as f64 / (d as f64).powi(level as i32)
    }
}

fn fit_window(depth: u32) -> std::ops::Range<usize> {
    let start = depth.div_ceil(2); // levels ceil(depth/2)..=depth
    (start - 1) as usize..depth as usize
}

/// Builds the prefix-filtered subtree:
/// keep v at level k iff its parent survived and prefix(v)/k ≥ λ'(β) − δ_k.
pub fn extract_supporting_subtree(
    oracle: &DisorderOracle,
    depth: u32,
    beta: f64,
    schedule: DeltaSchedule,
) -> Result<SubtreeReport> {
    check_array_budget(oracle.d(), depth)?;
    let beta_c = oracle.model().critical_beta()?;
    if !(beta > 0.0 && beta < beta_c) {
        return Err(Error::Domain(format!(
            "supporting subtree needs 0 < beta < beta_c = {beta_c}, got {beta}"
        )));
    }
    let slope = oracle.law().log_mgf_deriv(beta)?;

    let mut sizes = Vec::with_capacity(depth as usize);
    let mut restricted = Vec::with_capacity(depth as usize);
    let mut prev_sums = vec![0.0f64];
    let mut prev_alive = vec![true];
    let d = oracle.d() as usize;
    for k in 1..=depth {
        let sums = expand_level(oracle, &prev_sums, k);
        let threshold = slope - schedule.delta(k);
        let kf = k as f64;
        let mut alive = vec![false; sums.len()];
        alive
            .par_chunks_mut(REDUCE_CHUNK)
            .zip(sums.par_chunks(REDUCE_CHUNK))
            .enumerate()
            .for_each(|(ci, (ac, sc))| {
                let base = ci * REDUCE_CHUNK;
                for (off, (a, &s)) in ac.iter_mut().zip(sc).enumerate() {
                    let j = base + off;
                    *a = prev_alive[j / d] && s / kf >= threshold;
                }
            });
        let size: u64 = alive
            .par_chunks(REDUCE_CHUNK)
            .map(|c| c.iter().filter(|&&x| x).count() as u64)
            .sum();
        sizes.push(size);
        restricted.push(scaled_log_sum_exp(&sums, beta, Some(&alive)));
        prev_sums = sums;
        prev_alive = alive;
    }

    let window = fit_window(depth);
    let ks: Vec<f64> = window.clone().map(|i| (i + 1) as f64).collect();
    let log_sizes: Vec<f64> = window.clone().map(|i| (sizes[i] as f64).ln()).collect();
    let growth_rate = if sizes[window.clone()].iter().any(|&s| s == 0) {
        (f64::NAN, f64::NAN)
    } else {
        ols_slope(&ks, &log_sizes)
    };
    let rs: Vec<f64> = window.clone().map(|i| restricted[i]).collect();
    let restricted_energy_rate = if rs.iter().any(|v| !v.is_finite()) {
        (f64::NAN, f64::NAN)
    } else {
        ols_slope(&ks, &rs)
    };

    Ok(SubtreeReport {
        beta,
        schedule,
        sizes,
        restricted_log_sums: restricted,
        growth_rate,
        restricted_energy_rate,
    })
}

/// Result of the top-K restricted-energy measurement.
#[derive(Debug, Clone, Copy)]
pub struct TopKResult {
    /// (1/n) log Σ_{v ∈ A_n} e^{β·prefix(v)} at n = depth.
    pub empirical: f64,
    /// c + β·α(c), where α(c) solves log d − λ*(α) = c.
    pub predicted: f64,
    /// |A_n| actually used (⌈e^{cn}⌉ capped at d^n).
    pub k_used: u64,
}

/// Solves log d − λ*(α) = c for α in (E V, ess sup).
pub fn alpha_for_count_rate(oracle: &DisorderOracle, c: f64) -> Result<f64> {
    let law = oracle.law();
    let log_d = oracle.model().log_d();
    let target = log_d - c; // lambda*(alpha) = target
    let mean = law.mean();
    let (hi_v, _) = law.ess_sup();
    let hi = if hi_v.is_finite() {
        hi_v
    } else {
        // expand until the rate function clears the target
        let mut hi = mean.abs().max(1.0);
        while legendre(law, hi)? < target {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::Internal(format!("cannot bracket lambda* = {target}")));
            }
        }
        hi
    };
    let g = |a: f64| legendre(law, a).unwrap() - target;
    // interior bracket: lambda* = 0 at the mean and -> log(1/mass) at the sup
    let lo = mean + 1e-12 * (hi - mean).abs().max(1.0);
    if g(hi) < 0.0 {
        return Err(Error::Domain(format!(
            "count rate c={c} is not reached below the essential supremum"
        )));
    }
    Ok(bisect(lo, hi, g, 1e-12))
}

/// Top-K restricted energy at the terminal level, with the analytic
/// prediction. Requires c < f(β).
pub fn topk_restricted_energy(
    oracle: &DisorderOracle,
    depth: u32,
    beta: f64,
    c: f64,
) -> Result<TopKResult> {
    let f_beta = oracle.model().entropy_f(beta)?;
    if !(c > 0.0 && c < f_beta) {
        return Err(Error::Domain(format!(
            "top-K rate must satisfy 0 < c < f(beta) = {f_beta}, got {c}"
        )));
    }
    topk_restricted_energy_unchecked(oracle, depth, beta, c)
}

/// Same computation without the `c < f(β)` guard; lets tests drive the
/// no-restriction limit where A_n = T_n.
pub fn topk_restricted_energy_unchecked(
    oracle: &DisorderOracle,
    depth: u32,
    beta: f64,
    c: f64,
) -> Result<TopKResult> {
    let leaves = check_array_budget(oracle.d(), depth)?;
    let n = depth as f64;

    let mut sums = vec![0.0f64];
    for k in 1..=depth {
        sums = expand_level(oracle, &sums, k);
    }

    let k_exact = (c * n).exp().ceil();
    let k_used = if k_exact >= leaves as f64 {
        leaves
    } else {
        k_exact as u64
    };

    // exact selection; ties on the prefix sum break by ascending vertex index
    let mut order: Vec<u32> = (0..sums.len() as u32).collect();
    let kk = k_used as usize;
    order.select_nth_unstable_by(kk - 1, |&a, &b| {
        sums[b as usize]
            .partial_cmp(&sums[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut top: Vec<u32> = order[..kk].to_vec();
    top.sort_unstable(); // fixed summation order
    let m = top
        .iter()
        .map(|&i| beta * sums[i as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = top.iter().map(|&i| (beta * sums[i as usize] - m).exp()).sum();
    let empirical = (m + total.ln()) / n;

    let alpha = alpha_for_count_rate(oracle, c)?;
    Ok(TopKResult {
        empirical,
        predicted: c + beta * alpha,
        k_used,
    })
}
