//! Shrinking-target dynamics on expanding maps.
//!
//! The crate is `no_std` with `alloc`. It provides the map catalog, target
//! schedules, finite transfer-operator models with the martingale
//! decomposition, a Monte Carlo ensemble kernel and the hypothesis checkers.
//! IO, configuration and threading live in the `shrinktarget` crate.
#![no_std]
#![forbid(unsafe_code)]
// NaN must fail validation, hence the `!(x > 0.0)` forms
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod diagnostics;
pub mod dyadic;
pub mod dynamics;
pub mod error;
pub mod math;
pub mod mcstats;
pub mod targets;
pub mod transfer;

pub use dynamics::{MapKind, MapSystem, MarkovBranch, Point};
pub use error::{Error, Result};
pub use targets::{TargetSchedule, TargetShape};
