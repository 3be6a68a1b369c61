//! Directed polymers on disordered d-ary trees.
//!
//! The crate has two halves. The analytic half ([`weights`], [`analytics`])
//! computes the exact objects attached to a `(d, law)` pair: the log-moment
//! generating function and its Legendre transform, the entropy function and
//! its positive root, the free energy, and the ρ-percolation threshold. The
//! simulation half ([`treesim`], [`localization`], [`percolation`],
//! [`spine`]) generates reproducible disorder from a counter-based oracle and
//! measures the finite-depth counterparts of those quantities: partition
//! functions, martingale means, multifractal counts, supporting subtrees,
//! top-K restricted energies, open-path fractions, and conditioned spine
//! walks.
//!
//! All partition-function arithmetic is done in the log domain; no raw
//! exponential of a path sum appears anywhere.

pub mod analytics;
pub mod error;
pub mod localization;
pub mod numerics;
pub mod percolation;
pub mod spine;
pub mod treesim;
pub mod weights;

pub use analytics::{
    alpha_critical, legendre, rho_percolation_pc, AnalyticProfile, BetaSample, Model,
};
pub use error::{Error, Result};
pub use treesim::{
    level_scan, martingale_mean, replica_seed, sample_gibbs_ray, DisorderOracle, Engine,
    GibbsSampler, LevelAggregates, RayTrace, UniformStream,
};
pub use weights::WeightLaw;
