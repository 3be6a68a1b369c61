//! Closed-form and root-found quantities for a `(d, law)` pair: the entropy
//! function f, the critical inverse temperature, the free energy, the
//! Legendre-Fenchel rate function, and the ρ-percolation threshold.

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::weights::WeightLaw;

/// Root-finder tolerance on the independent variable.
const ROOT_TOL: f64 = 1e-12;
/// Give up bracketing the root of f beyond this β.
const BETA_BRACKET_MAX: f64 = 1e4;

/// A branching number together with a weight law.
#[derive(Debug, Clone)]
pub struct Model {
    d: u32,
    law: WeightLaw,
}

impl Model {
    pub fn new(d: u32, law: WeightLaw) -> Result<Model> {
        if d < 2 {
            return Err(Error::Domain(format!("branching number d={d} must be >= 2")));
        }
        Ok(Model { d, law })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn law(&self) -> &WeightLaw {
        &self.law
    }

    pub fn log_d(&self) -> f64 {
        (self.d as f64).ln()
    }

    /// f(β) = λ(β) + log d − βλ'(β); f(0) = log d, strictly decreasing.
    pub fn entropy_f(&self, beta: f64) -> Result<f64> {
        if !(beta >= 0.0) {
            return Err(Error::Domain(format!("entropy f needs beta >= 0, got {beta}")));
        }
        Ok(self.law.log_mgf(beta)? + self.log_d() - beta * self.law.log_mgf_deriv(beta)?)
    }

    /// The positive root of f, or +∞ when none exists. The existence
    /// criterion (unbounded law, or boundary atom mass below 1/d) is applied
    /// before any bracketing.
    pub fn critical_beta(&self) -> Result<f64> {
        let (w, mass) = self.law.ess_sup();
        let has_root = w.is_infinite() || mass < 1.0 / self.d as f64;
        if !has_root {
            return Ok(f64::INFINITY);
        }
        let f = |b: f64| self.entropy_f(b).unwrap();
        let lo = 1e-8;
        if f(lo) <= 0.0 {
            return Ok(lo);
        }
        let mut hi = 1.0;
        while f(hi) > 0.0 {
            hi *= 2.0;
            if hi > BETA_BRACKET_MAX {
                return Err(Error::Internal(format!(
                    "criterion predicts a root of f but none bracketed below beta={BETA_BRACKET_MAX}"
                )));
            }
        }
        Ok(bisect(lo, hi, f, ROOT_TOL))
    }

    /// φ(β): λ(β)+log d up to β_c, then linear in β.
    pub fn free_energy(&self, beta: f64) -> Result<f64> {
        if !(beta >= 0.0) {
            return Err(Error::Domain(format!("free energy needs beta >= 0, got {beta}")));
        }
        let beta_c = self.critical_beta()?;
        if beta <= beta_c {
            Ok(self.law.log_mgf(beta)? + self.log_d())
        } else {
            Ok(beta / beta_c * (self.law.log_mgf(beta_c)? + self.log_d()))
        }
    }

    /// log d − λ*(α): the exponential growth rate of the count of vertices
    /// with path average at least α.
    pub fn spectrum_prediction(&self, alpha: f64) -> Result<f64> {
        let mean = self.law.mean();
        if alpha < mean {
            return Err(Error::Domain(format!(
                "spectrum prediction needs alpha >= E V = {mean}, got {alpha}"
            )));
        }
        let rate = legendre(&self.law, alpha)?;
        // allow the boundary case lambda*(alpha) == log d up to rounding
        if rate > self.log_d() + 1e-9 {
            return Err(Error::Domain(format!(
                "lambda*({alpha}) = {rate} exceeds log d = {}",
                self.log_d()
            )));
        }
        Ok(self.log_d() - rate)
    }

    /// lim (1/n) max path sum: λ'(β_c) when β_c is finite, ess sup V
    /// otherwise.
    pub fn max_path_growth(&self) -> Result<f64> {
        let beta_c = self.critical_beta()?;
        if beta_c.is_finite() {
            self.law.log_mgf_deriv(beta_c)
        } else {
            let (w, _) = self.law.ess_sup();
            if w.is_infinite() {
                return Err(Error::Internal(
                    "unbounded law cannot have infinite critical beta".into(),
                ));
            }
            Ok(w)
        }
    }
}

/// λ*(α) = sup_β {αβ − λ(β)} by monotone bisection on λ'(β) = α.
///
/// Interior α only, except that a finite-support boundary resolves to the
/// lower-semicontinuous limit −log(atom mass) (+∞ for zero mass).
pub fn legendre(law: &WeightLaw, alpha: f64) -> Result<f64> {
    let (hi_v, hi_mass) = law.ess_sup();
    let (lo_v, lo_mass) = law.ess_inf();
    if alpha == hi_v {
        return Ok(if hi_mass > 0.0 { -hi_mass.ln() } else { f64::INFINITY });
    }
    if alpha == lo_v {
        return Ok(if lo_mass > 0.0 { -lo_mass.ln() } else { f64::INFINITY });
    }
    if !(alpha > lo_v && alpha < hi_v) {
        return Err(Error::AlphaOutOfRange {
            alpha,
            lo: lo_v,
            hi: hi_v,
        });
    }
    let deriv = |b: f64| law.log_mgf_deriv(b).unwrap();
    let mut lo = -1.0;
    let mut hi = 1.0;
    while deriv(lo) >= alpha {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(Error::Internal(format!("cannot bracket lambda'={alpha} from below")));
        }
    }
    while deriv(hi) <= alpha {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Internal(format!("cannot bracket lambda'={alpha} from above")));
        }
    }
    let beta = bisect(lo, hi, |b| deriv(b) - alpha, ROOT_TOL);
    Ok(alpha * beta - law.log_mgf(beta)?)
}

/// Binary relative entropy α log(α/p) + (1−α) log((1−α)/(1−p)).
pub fn binary_relative_entropy(alpha: f64, p: f64) -> f64 {
    let t1 = if alpha == 0.0 { 0.0 } else { alpha * (alpha / p).ln() };
    let t2 = if alpha == 1.0 {
        0.0
    } else {
        (1.0 - alpha) * ((1.0 - alpha) / (1.0 - p)).ln()
    };
    t1 + t2
}

/// α_c(p): 1 for p ≥ 1/d, otherwise the unique solution of
/// λ_p*(α) = log d in (p, 1).
pub fn alpha_critical(d: u32, p: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("d={d} must be >= 2")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p={p} must lie in (0,1)")));
    }
    let log_d = (d as f64).ln();
    if p >= 1.0 / d as f64 {
        return Ok(1.0);
    }
    Ok(bisect(p, 1.0, |a| binary_relative_entropy(a, p) - log_d, ROOT_TOL))
}

/// ρ-percolation threshold on the d-ary tree: 1/d for ρ = 1, otherwise the
/// unique root of p^ρ (1−p)^{1−ρ} d = ρ^ρ (1−ρ)^{1−ρ} in (0, ρ).
pub fn rho_percolation_pc(d: u32, rho: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("d={d} must be >= 2")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho={rho} must lie in (0,1]")));
    }
    if rho == 1.0 {
        return Ok(1.0 / d as f64);
    }
    let log_d = (d as f64).ln();
    let target = rho * rho.ln() + (1.0 - rho) * (1.0 - rho).ln();
    // same sign as the defining equation's residual, evaluated in logs
    let g = |p: f64| rho * p.ln() + (1.0 - rho) * (1.0 - p).ln() + log_d - target;
    Ok(bisect(rho * 1e-15, rho, g, 1e-14))
}

/// One row of the tabulated β-curves.
#[derive(Debug, Clone, Copy)]
pub struct BetaSample {
    pub beta: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

/// Derived scalars and curves for a model: β_c, λ'(β_c), tabulated
/// λ/λ'/f/φ over β, and λ* over α.
#[derive(Debug, Clone)]
pub struct AnalyticProfile {
    pub beta_c: f64,
    /// λ'(β_c), with the convention ess sup V when β_c = ∞.
    pub slope_c: f64,
    pub beta_curve: Vec<BetaSample>,
    pub legendre_curve: Vec<(f64, f64)>,
}

pub const DEFAULT_CURVE_POINTS: usize = 400;

impl AnalyticProfile {
    pub fn compute(model: &Model, beta_points: usize, alpha_points: usize) -> Result<AnalyticProfile> {
        let beta_c = model.critical_beta()?;
        let slope_c = model.max_path_growth()?;
        let beta_hi = if beta_c.is_finite() { 4.0 * beta_c } else { 8.0 };

        let n = beta_points.max(2);
        let mut beta_curve = Vec::with_capacity(n);
        for i in 0..n {
            let beta = beta_hi * i as f64 / (n - 1) as f64;
            beta_curve.push(BetaSample {
                beta,
                lambda: model.law().log_mgf(beta)?,
                lambda_prime: model.law().log_mgf_deriv(beta)?,
                entropy: model.entropy_f(beta)?,
                free_energy: model.free_energy(beta)?,
            });
        }

        let mean = model.law().mean();
        let (hi_v, _) = model.law().ess_sup();
        let alpha_hi = if hi_v.is_finite() {
            hi_v
        } else {
            model.law().log_mgf_deriv(8.0)?
        };
        let m = alpha_points.max(2);
        let mut legendre_curve = Vec::with_capacity(m);
        // interior grid: the endpoints of the slope range are excluded
        for i in 1..=m {
            let alpha = mean + (alpha_hi - mean) * i as f64 / (m + 1) as f64;
            legendre_curve.push((alpha, legendre(model.law(), alpha)?));
        }

        Ok(AnalyticProfile {
            beta_c,
            slope_c,
            beta_curve,
            legendre_curve,
        })
    }
}
