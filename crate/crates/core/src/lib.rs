//! Layout of wiring trees in 3-D under ℓ1 separation constraints.
//!
//! The pipeline runs bottom-up: an [`diagram::Instance`] is discretized into
//! per-tree grid graphs by [`gridgen`], turned into a 0/1 program by
//! [`milp`], solved exactly by [`engine`], and checked independently by
//! [`validate`]. [`synth`] produces reproducible synthetic instances,
//! [`bench`] times the solver over a suite and [`scene`] writes layouts out
//! for viewing.

pub mod bench;
pub mod diagram;
pub mod engine;
pub mod geometry;
pub mod gridgen;
pub mod milp;
pub mod scene;
pub mod synth;
pub mod validate;
