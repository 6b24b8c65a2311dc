//! Differentially private sanitization of trajectory databases.
//!
//! A raw database of location sequences is turned into a noisy prefix tree
//! (one Laplace-noised count per node, a uniform per-level budget, and a
//! statistical shortcut for the never-visited children), the tree counts are
//! made consistent by constrained inference, and a synthetic database is read
//! back off the tree. The [`utility`] module measures what survives: count
//! query relative error and top-k frequent sequential patterns.
//!
//! The crate is `no_std` + `alloc`. The `parallel` feature turns on rayon for
//! tree levels and query workloads; every result is independent of the thread
//! count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod datagen;
pub mod dp;
mod error;
pub mod inference;
pub mod model;
pub mod release;
pub mod tree;
pub mod utility;

pub use error::{Error, Result};
pub use model::{LocationId, LocationUniverse, Trajectory, TrajectoryDb};
