//! Coded caching for users grouped into classes with heterogeneous file demand sets.
//!
//! Three schemes are modelled: all files treated as common (Scheme 1), common and
//! unique files split across a tunable cache fraction `x` (Scheme 2), and every class
//! served independently (Scheme 3). The crate provides analytic peak and
//! uniform-average rates, a cut-set lower bound with gap factors, the cache-split
//! optimizer, and a segment-level placement/delivery simulator that serves as the
//! ground truth for the formulas at integer parameters.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod combinat;
mod error;
pub mod model;
pub mod optimizer;
pub mod ratecalc;
pub mod simcore;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{DemandProfile, DemandVector, DistinctStats, SystemConfig};
pub use optimizer::XSearch;
pub use ratecalc::{AvgMode, Estimate, RateReport, Scheme, SchemeParams};
