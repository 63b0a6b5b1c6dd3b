//! Uplink-CSI based downlink precoding for FDD massive MIMO.
//!
//! The crate covers the whole estimation pipeline:
//!
//! - [`dataset`]: position-tagged CSI records, subcarrier averaging and the
//!   virtual uplink/downlink split, plus the `CSI1` binary container.
//! - [`synthgen`]: a geometric multipath generator producing datasets with
//!   known ground truth.
//! - [`metrics`]: the normalized received power, its dataset average, and the
//!   random-precoding and principal-component baselines.
//! - [`neural`]: dense networks trained with the `1 - P` loss, including the
//!   encoder/decoder variants with free or angle-of-arrival latent spaces.
//! - [`evaluation`]: checkerboard seen/unseen evaluation, grid-size sweeps and
//!   heatmaps.
//! - [`cli`]: the command-line front end.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common concrete choices.

pub mod cli;
pub mod complex;
pub mod dataset;
pub mod evaluation;
pub mod metrics;
pub mod neural;
pub mod provenance;
pub mod scalar;
pub mod synthgen;

pub use complex::CMatrix;
pub use scalar::Scalar;

pub type CsiRecord64 = dataset::CsiRecord<f64>;
pub type CsiRecord32 = dataset::CsiRecord<f32>;
pub type SamplePair64 = dataset::SamplePair<f64>;
pub type SamplePair32 = dataset::SamplePair<f32>;
pub type DatasetMeta64 = dataset::DatasetMeta<f64>;
pub type Scene64 = synthgen::Scene<f64>;
pub type PrecodingVector64 = metrics::PrecodingVector<f64>;
pub type PrecodingVector32 = metrics::PrecodingVector<f32>;
pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type TrainedModel64 = neural::TrainedModel<f64>;
pub type TrainedModel32 = neural::TrainedModel<f32>;
