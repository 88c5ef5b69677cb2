//! Dual-arm parallel-jaw grasp pair generation and dexterity labeling for
//! large objects, plus synthetic depth scenes for classifier training.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antipodal;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod pairs;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
