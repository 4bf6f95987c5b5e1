//! Range-only collision prediction between mobile agents.
//!
//! The crate estimates collision-prediction (CP) parameters `(d_m, t_m, v)`
//! from UWB range measurements with four estimators (pairwise regression,
//! TDOA tracking, an MDS baseline and the distributed FACT tracker), computes
//! Cramér-Rao bounds for pairwise, anchor and friend measurement models,
//! simulates the O(N) multi-node ranging protocol, and scores detectors with
//! ROC and RMSE sweeps.

// NaN-rejecting validation is written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crlb;
pub mod csvfmt;
pub mod error;
pub mod estimators;
pub mod fact;
pub mod geom;
pub mod harness;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use geom::{
    collision_time, cp_params, min_distance_oracle, AgentState, BodyGeometry, CpParams, Vec2,
};
