//! Feature generating machine (FGM) for budget-constrained sparse feature and
//! group selection in linear classification.
//!
//! Training alternates two stages. A worst-case analysis scores every
//! candidate unit (feature, group, tree node or degree-2 polynomial
//! coordinate) against the current dual variables and returns the `B`
//! highest-scoring ones as a new constraint. The subproblem restricted to all
//! constraints generated so far is an ℓ₁²-regularized smooth loss, solved in
//! the primal by accelerated proximal gradient with a closed-form proximal
//! step. Dual variables recovered from the primal margins drive the next
//! round of generation.
//!
//! ```no_run
//! use fgm::dataset::{generate_synthetic, SyntheticSpec, Weighting};
//! use fgm::engine::{fgm_train, SolverConfig, Structure};
//!
//! let spec = SyntheticSpec { n: 512, m: 2048, informative: 100, weighting: Weighting::TypeI, seed: 7 };
//! let (train, _truth) = generate_synthetic(&spec).unwrap();
//! let cfg = SolverConfig { budget: 10, ..SolverConfig::default() };
//! let model = fgm_train(&train, &Structure::Plain, &cfg).unwrap();
//! println!("{} features selected", model.support_units().len());
//! ```

pub mod baseline;
pub mod bench;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod loss;
pub mod subsolver;
pub mod worstcase;

pub use error::{FgmError, Result};
