//! Simulator for dynamic computing RAM built from solid-state memcapacitive
//! cells.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod device;
pub mod numerics;
pub mod circuit;
pub mod memops;
pub mod logic;
pub mod compiler;
pub mod config;
pub mod manifest;
pub mod cli;
