//! Log-domain reductions and the small numeric kernels shared across modules.
//!
//! Everything that aggregates over level arrays goes through the fixed-chunk
//! helpers here so that results are bit-identical for any worker count: the
//! chunk boundaries are a constant of the algorithm, each chunk is reduced
//! sequentially in index order, and partials are combined in chunk order.

use rayon::prelude::*;

/// Chunk width for parallel level-array reductions. Fixed so that the
/// summation tree does not depend on thread count.
pub const REDUCE_CHUNK: usize = 1 << 14;

#[inline(always)]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Online log-sum-exp accumulator with O(1) state.
#[derive(Debug, Clone, Copy)]
pub struct StreamLse {
    shift: f64,
    sum: f64,
}

impl StreamLse {
    pub fn new() -> Self {
        StreamLse {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.shift {
            self.sum += (x - self.shift).exp();
        } else {
            self.sum = self.sum * (self.shift - x).exp() + 1.0;
            self.shift = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.sum.ln()
        }
    }
}

impl Default for StreamLse {
    fn default() -> Self {
        Self::new()
    }
}

/// Maximum of a slice, reduced in parallel. `f64::max` is associative and
/// commutative on non-NaN inputs, so the result is order independent.
pub fn par_max(xs: &[f64]) -> f64 {
    xs.par_chunks(REDUCE_CHUNK)
        .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// log Σ exp(xs[i]) over the whole slice: global max first, then per-chunk
/// shifted sums gathered sequentially in chunk order. Bit-identical for any
/// worker count.
pub fn par_log_sum_exp(xs: &[f64]) -> f64 {
    let m = par_max(xs);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let partials: Vec<f64> = xs
        .par_chunks(REDUCE_CHUNK)
        .map(|c| c.iter().map(|&x| (x - m).exp()).sum::<f64>())
        .collect();
    let total: f64 = partials.iter().sum();
    m + total.ln()
}

/// Masked variant of [`par_log_sum_exp`]; positions with `mask[i] == false`
/// are skipped. With an all-true mask this follows the exact same summation
/// order as the unmasked reduction.
pub fn par_log_sum_exp_masked(xs: &[f64], mask: &[bool]) -> f64 {
    debug_assert_eq!(xs.len(), mask.len());
    let m = xs
        .par_chunks(REDUCE_CHUNK)
        .zip(mask.par_chunks(REDUCE_CHUNK))
        .map(|(c, mc)| {
            c.iter()
                .zip(mc)
                .filter(|(_, &keep)| keep)
                .map(|(&x, _)| x)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let partials: Vec<f64> = xs
        .par_chunks(REDUCE_CHUNK)
        .zip(mask.par_chunks(REDUCE_CHUNK))
        .map(|(c, mc)| {
            c.iter()
                .zip(mc)
                .filter(|(_, &keep)| keep)
                .map(|(&x, _)| (x - m).exp())
                .sum::<f64>()
        })
        .collect();
    let total: f64 = partials.iter().sum();
    m + total.ln()
}

/// Bisect a monotone or sign-changing continuous function on [lo, hi] down to
/// an interval of width `tol`. Requires f(lo) and f(hi) of opposite sign.
pub fn bisect<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F, tol: f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(
        flo.signum() != fhi.signum(),
        "bisect needs a sign change: f({lo})={flo}, f({hi})={fhi}"
    );
    let sign_lo = flo.signum();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break; // interval at floating-point resolution
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinary least squares of y against x. Returns (slope, slope standard
/// error); stderr is NaN with fewer than three points.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, f64::NAN);
    }
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let se = (ss_res / (n - 2.0) / sxx).sqrt();
    (slope, se)
}
