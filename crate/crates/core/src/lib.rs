//! Falsifying digital twins against observational data.
//!
//! Observational trajectories under an unknown, possibly confounded policy
//! only partially identify interventional means. This crate computes the
//! identified bounds for a family of conditional hypotheses, compares them
//! with samples drawn from a twin under the same actions, and reports which
//! hypotheses the data reject.
//!
//! The pipeline is:
//!
//! 1. [`trajectory`]: schemas, datasets, splits and action binning.
//! 2. [`hypothesis`]: hypothesis specs and automatic generation.
//! 3. [`bounds`]: sample-level bounds on the interventional mean.
//! 4. [`twin`]: sessions with a twin and twin datasets.
//! 5. [`testing`]: Hoeffding and bootstrap tests plus Holm's correction.
//! 6. [`report`]: end-to-end assessment and its artifacts.
//!
//! [`worlds`] holds finite synthetic worlds whose laws are known exactly.

pub mod bounds;
pub mod error;
pub mod hypothesis;
pub mod quantile;
pub mod report;
pub mod seed;
pub mod testing;
pub mod trajectory;
pub mod twin;
pub mod worlds;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/hypotheses.md")]
    mod hypotheses {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/twins.md")]
    mod twins {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/worlds.md")]
    mod worlds {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
