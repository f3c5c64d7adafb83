//! Secure-key rates, physical-noise thresholds and optimal reduced-state
//! encodings for high-dimensional BB84-type QKD.
//!
//! A `k`-symbol signal set is embedded in a `d`-dimensional space and Bob's
//! `(k+1)`-outcome filter discards detections outside it. The crate provides
//! closed forms for the kept probability `alpha` and dit error `Q` under
//! depolarizing, nearest-neighbour (modulo) and block-bias noise, the
//! Devetak–Winter rate built on them, encoding optimizers with an exhaustive
//! oracle, a symbol-level Monte Carlo simulator, and an ingest/fit pipeline
//! for measured confusion counts.
//!
//! The closed-form code is generic over [`Real`] (`f32` or `f64`); block
//! overlaps and adjacency counts are exact. The aliases below fix the scalar
//! to `f64`, which the simulator and ingest pipeline use.

pub mod channels;
pub mod encoding;
pub mod entropy;
pub mod error;
pub mod ingest;
pub mod montecarlo;
pub mod scalar;
pub mod sweep;

pub use channels::{Basis, ChannelSpec, ConfusionModel, KeptStats};
pub use encoding::{AdjacencyCounts, IndexEncoding, Objective, Topology};
pub use entropy::{KaryParams, RateReport};
pub use error::{Error, Result};
pub use scalar::Real;

/// Exact block overlap / objective values.
pub type Rational = num_rational::Ratio<u64>;

pub type ChannelSpecF64 = ChannelSpec<f64>;
pub type KeptStatsF64 = KeptStats<f64>;
pub type ConfusionModelF64 = ConfusionModel<f64>;
pub type RateReportF64 = RateReport<f64>;

pub type ChannelSpecF32 = ChannelSpec<f32>;
pub type KeptStatsF32 = KeptStats<f32>;
pub type ConfusionModelF32 = ConfusionModel<f32>;
