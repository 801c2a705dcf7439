// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod cli;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod router;
pub mod verify;
