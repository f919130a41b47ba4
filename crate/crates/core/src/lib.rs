//! Deterministic simulator of magnetic tumbling microrobots.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod locomotion;
pub mod magnetics;
pub mod microrobot;
pub mod scene;
pub mod teleop;
pub mod thermics;
