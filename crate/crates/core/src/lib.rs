// Validation guards are written as `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beast;
pub mod events;
pub mod hurst;
pub mod infotheory;
pub mod neighbors;
pub mod pmime;
pub mod report;
pub mod series;
pub mod synth;
