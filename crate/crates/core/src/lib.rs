//! Numerical laboratory for smooth expanding circle dynamics.
//!
//! The crate connects three descriptions of the same object:
//!
//! * expanding circle maps of degree `d` and their Markov interval
//!   partitions ([`circle`]),
//! * solenoid functions, i.e. positive functions on the `d`-adic integers
//!   subject to the matching condition ([`solenoid`], [`dadic`],
//!   [`ultrametric`]),
//! * tilings of the line that are fixed points of the `d`-amalgamation
//!   operator, and the self-similar grids they generate ([`tiling`]).
//!
//! On top of that, [`distortion`] measures ratio and cross-ratio distortion
//! of interval homeomorphisms over nested grids, and [`classify`] turns the
//! asymptotic order of those distortions into a smoothness verdict.
//!
//! Everything here is pure computation over finite truncations. The crate is
//! `no_std` (with `alloc`); file formats, the command line and parallel
//! orchestration live in the `solenoid-lab` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circle;
pub mod classify;
pub mod dadic;
pub mod distortion;
mod error;
pub mod math;
pub mod solenoid;
pub mod tiling;
pub mod ultrametric;

pub use error::{Error, GridAxiom, Result};
