//! Weight laws for the vertex disorder: exact log-MGF, its derivatives,
//! exponential tilting on finite support, and inverse-CDF sampling.
//!
//! Every supported law has finite exponential moments of all orders, which is
//! what the analytic layer assumes throughout.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numerics::logsumexp2;

const PROB_SUM_TOL: f64 = 1e-12;

/// A weight distribution with all exponential moments.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightLaw {
    /// Finitely many atoms `(value, probability)`, held sorted by value with
    /// equal values merged.
    DiscreteFinite(Vec<(f64, f64)>),
    StandardNormal,
    Uniform01,
    /// `one_value` with probability `p`, `zero_value` otherwise.
    Bernoulli {
        p: f64,
        one_value: f64,
        zero_value: f64,
    },
}

impl WeightLaw {
    /// Builds a finite-support law, validating and normalising atom order.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<WeightLaw> {
        if atoms.is_empty() {
            return Err(Error::Domain("discrete law needs at least one atom".into()));
        }
        let mut atoms = atoms;
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::Domain(format!("atom value {v} is not finite")));
            }
            if !(p > 0.0) {
                return Err(Error::Domain(format!(
                    "atom probability {p} must be strictly positive"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge exact duplicates so ess-sup atom mass is well defined
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Domain(format!(
                "atom probabilities sum to {total}, expected 1 within {PROB_SUM_TOL}"
            )));
        }
        Ok(WeightLaw::DiscreteFinite(merged))
    }

    pub fn bernoulli(p: f64) -> Result<WeightLaw> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("bernoulli p={p} must lie in (0,1)")));
        }
        Ok(WeightLaw::Bernoulli {
            p,
            one_value: 1.0,
            zero_value: 0.0,
        })
    }

    /// The two-atom view of a Bernoulli law; used to share discrete code paths.
    fn as_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            WeightLaw::DiscreteFinite(atoms) => Some(atoms.clone()),
            WeightLaw::Bernoulli {
                p,
                one_value,
                zero_value,
            } => {
                let mut atoms = vec![(*zero_value, 1.0 - p), (*one_value, *p)];
                atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                Some(atoms)
            }
            _ => None,
        }
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(
            self,
            WeightLaw::DiscreteFinite(_) | WeightLaw::Bernoulli { .. }
        )
    }

    /// λ(β) = log E e^{βV}, exact per kind.
    pub fn log_mgf(&self, beta: f64) -> Result<f64> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta {beta} is not finite")));
        }
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            WeightLaw::DiscreteFinite(atoms) => atoms
                .iter()
                .map(|&(v, p)| p.ln() + beta * v)
                .fold(f64::NEG_INFINITY, logsumexp2),
            WeightLaw::StandardNormal => 0.5 * beta * beta,
            WeightLaw::Uniform01 => log_mgf_uniform01(beta),
            WeightLaw::Bernoulli {
                p,
                one_value,
                zero_value,
            } => logsumexp2(p.ln() + beta * one_value, (1.0 - p).ln() + beta * zero_value),
        })
    }

    /// λ'(β) = E[V e^{βV}] / E[e^{βV}]; monotone nondecreasing in β.
    pub fn log_mgf_deriv(&self, beta: f64) -> Result<f64> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta {beta} is not finite")));
        }
        Ok(match self {
            WeightLaw::StandardNormal => beta,
            WeightLaw::Uniform01 => log_mgf_deriv_uniform01(beta),
            _ => {
                let atoms = self.as_atoms().unwrap();
                tilted_moments(&atoms, beta).0
            }
        })
    }

    /// λ''(β), the variance of the β-tilted law.
    pub fn log_mgf_second_deriv(&self, beta: f64) -> Result<f64> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta {beta} is not finite")));
        }
        Ok(match self {
            WeightLaw::StandardNormal => 1.0,
            WeightLaw::Uniform01 => log_mgf_second_deriv_uniform01(beta),
            _ => {
                let atoms = self.as_atoms().unwrap();
                tilted_moments(&atoms, beta).1
            }
        })
    }

    pub fn mean(&self) -> f64 {
        self.log_mgf_deriv(0.0).unwrap()
    }

    pub fn variance(&self) -> f64 {
        self.log_mgf_second_deriv(0.0).unwrap()
    }

    /// Essential supremum and the probability mass sitting on it.
    pub fn ess_sup(&self) -> (f64, f64) {
        match self {
            WeightLaw::DiscreteFinite(atoms) => {
                let &(v, p) = atoms.last().unwrap();
                (v, p)
            }
            WeightLaw::StandardNormal => (f64::INFINITY, 0.0),
            WeightLaw::Uniform01 => (1.0, 0.0),
            WeightLaw::Bernoulli {
                p,
                one_value,
                zero_value,
            } => {
                if one_value > zero_value {
                    (*one_value, *p)
                } else {
                    (*zero_value, 1.0 - p)
                }
            }
        }
    }

    /// Essential infimum and its mass (mirror of [`ess_sup`](Self::ess_sup)).
    pub fn ess_inf(&self) -> (f64, f64) {
        match self {
            WeightLaw::DiscreteFinite(atoms) => {
                let &(v, p) = atoms.first().unwrap();
                (v, p)
            }
            WeightLaw::StandardNormal => (f64::NEG_INFINITY, 0.0),
            WeightLaw::Uniform01 => (0.0, 0.0),
            WeightLaw::Bernoulli {
                p,
                one_value,
                zero_value,
            } => {
                if one_value > zero_value {
                    (*zero_value, 1.0 - p)
                } else {
                    (*one_value, *p)
                }
            }
        }
    }

    /// Exponential tilt: atom probabilities reweighted by e^{βv − λ(β)}.
    /// Exact on finite support only.
    pub fn exponential_tilt(&self, beta: f64) -> Result<WeightLaw> {
        let atoms = self.as_atoms().ok_or_else(|| {
            Error::Unsupported("exponential tilt is implemented for finite-support laws only".into())
        })?;
        let lam = self.log_mgf(beta)?;
        let tilted: Vec<(f64, f64)> = atoms
            .iter()
            .map(|&(v, p)| (v, (p.ln() + beta * v - lam).exp()))
            .collect();
        WeightLaw::discrete(tilted)
    }

    /// Deterministic inverse-CDF sample from a uniform deviate in [0,1).
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("uniform deviate {u} outside [0,1)")));
        }
        Ok(match self {
            WeightLaw::Uniform01 => u,
            WeightLaw::StandardNormal => {
                // statrs' inverse normal CDF is accurate to well below 1e-9
                Normal::new(0.0, 1.0).unwrap().inverse_cdf(u.max(f64::MIN_POSITIVE))
            }
            _ => {
                let atoms = self.as_atoms().unwrap();
                let mut cum = 0.0;
                for &(v, p) in &atoms {
                    cum += p;
                    if u < cum {
                        return Ok(v);
                    }
                }
                atoms.last().unwrap().0
            }
        })
    }
}

/// Shifted first and second tilted moments for a finite-support law:
/// returns (λ'(β), λ''(β)).
fn tilted_moments(atoms: &[(f64, f64)], beta: f64) -> (f64, f64) {
    let m = atoms
        .iter()
        .map(|&(v, p)| p.ln() + beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for &(v, p) in atoms {
        let w = (p.ln() + beta * v - m).exp();
        z += w;
        m1 += v * w;
        m2 += v * v * w;
    }
    let mean = m1 / z;
    (mean, (m2 / z - mean * mean).max(0.0))
}

const UNIFORM01_SERIES_CUTOFF: f64 = 1e-4;

/// λ(β) = log((e^β − 1)/β) for U[0,1], with a series near zero.
fn log_mgf_uniform01(beta: f64) -> f64 {
    if beta.abs() < UNIFORM01_SERIES_CUTOFF {
        // (e^b - 1)/b = 1 + b/2 + b^2/6 + b^3/24 + O(b^4)
        let b = beta;
        (b / 2.0 + b * b / 6.0 + b * b * b / 24.0).ln_1p()
    } else if beta > 0.0 {
        beta + (-(-beta).exp()).ln_1p() - beta.ln()
    } else {
        (-beta.exp()).ln_1p() - (-beta).ln()
    }
}

fn log_mgf_deriv_uniform01(beta: f64) -> f64 {
    if beta.abs() < UNIFORM01_SERIES_CUTOFF {
        // 1/2 + b/12 - b^3/720 + O(b^5)
        0.5 + beta / 12.0 - beta * beta * beta / 720.0
    } else {
        // e^b/(e^b - 1) - 1/b = 1/(1 - e^{-b}) - 1/b
        1.0 / (1.0 - (-beta).exp()) - 1.0 / beta
    }
}

fn log_mgf_second_deriv_uniform01(beta: f64) -> f64 {
    if beta.abs() < UNIFORM01_SERIES_CUTOFF {
        // 1/12 - b^2/240 + O(b^4)
        1.0 / 12.0 - beta * beta / 240.0
    } else {
        let e = (-beta).exp(); // e^{-b}
        1.0 / (beta * beta) - e / ((1.0 - e) * (1.0 - e))
    }
}

impl fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightLaw::StandardNormal => write!(f, "normal"),
            WeightLaw::Uniform01 => write!(f, "uniform01"),
            WeightLaw::Bernoulli { p, .. } => write!(f, "bernoulli:p={p}"),
            WeightLaw::DiscreteFinite(atoms) => {
                write!(f, "discrete:")?;
                for (i, (v, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}@{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for WeightLaw {
    type Err = Error;

    /// Compact syntax: `normal`, `uniform01`, `bernoulli:p=0.25`,
    /// `discrete:1@0.25,-1@0.75`.
    fn from_str(s: &str) -> Result<WeightLaw> {
        let s = s.trim();
        match s {
            "normal" => return Ok(WeightLaw::StandardNormal),
            "uniform01" => return Ok(WeightLaw::Uniform01),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("bernoulli:") {
            let p = rest
                .strip_prefix("p=")
                .ok_or_else(|| Error::Parse(format!("expected bernoulli:p=<x>, got `{s}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad bernoulli p in `{s}`: {e}")))?;
            return WeightLaw::bernoulli(p);
        }
        if let Some(rest) = s.strip_prefix("discrete:") {
            let mut atoms = Vec::new();
            for part in rest.split(',') {
                let (v, p) = part
                    .split_once('@')
                    .ok_or_else(|| Error::Parse(format!("expected value@prob, got `{part}`")))?;
                let v = v
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad atom value `{v}`: {e}")))?;
                let p = p
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad atom probability `{p}`: {e}")))?;
                atoms.push((v, p));
            }
            return WeightLaw::discrete(atoms);
        }
        Err(Error::Parse(format!(
            "unknown law `{s}` (expected normal, uniform01, bernoulli:p=<x> or discrete:v@p,...)"
        )))
    }
}
