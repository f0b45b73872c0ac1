//! Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gait;
pub mod guides;
pub mod interp;
pub mod lip;
pub mod replanner;
pub mod sim;
pub mod stabilizer;
pub mod svg;
