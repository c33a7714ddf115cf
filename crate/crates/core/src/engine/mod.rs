//! The cutting-plane training loop, its feature cache and the resulting
//! model.

mod active_set;
mod model;
mod train;
mod units;

pub use active_set::{ActiveSet, Coordinate};
pub use model::{Model, ModelKind, ModelMode, StopReason, WeightEntry, MODEL_VERSION};
pub use train::{
    eval_bounds, fgm_train, neg_dual_value, BoundsTrace, L0Policy, SolverConfig, Structure,
    TraceRecord,
};
pub use units::UnitSpace;
