//! Point-cloud anomaly detection by point-offset prediction.
//!
//! Training sees only normal clouds. Each training pass displaces one
//! nearest-neighbour patch of a normal cloud along its surface normals,
//! producing a pseudo anomaly whose per-point offsets are known exactly.
//! A small per-point network learns to predict those offsets from
//! geometric features, supervised by an L1 distance term plus a negative
//! cosine direction term. At test time the predicted offset magnitudes are
//! the anomaly scores: per point for localization, averaged for detection.
//!
//! The crate is `no_std` (it needs `alloc`) and free of IO; file formats,
//! configuration and the command-line tool live in the `ptoffset` crate.
//!
//! Module map:
//! - [`cloud`], [`knn`]: point clouds, normalization, rotation, noise,
//!   normal estimation and exact k-NN.
//! - [`augment`]: patch partition and pseudo-anomaly synthesis.
//! - [`voxel`], [`features`]: voxel grid and per-point feature rows.
//! - [`net`], [`loss`], [`optim`], [`train`]: the offset predictor and its
//!   training.
//! - [`score`], [`metrics`], [`eval`]: scoring and evaluation.
//! - [`synth`]: synthetic benchmark categories.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod augment;
pub mod cloud;
pub mod error;
pub mod eval;
pub mod features;
pub mod knn;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod rng;
pub mod score;
pub mod synth;
pub mod train;
pub mod voxel;

pub use augment::{PatchPartition, PseudoAnomalySample, WeightMatrix};
pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use eval::{EvalReport, LabeledInstance, TestInstance};
pub use features::FeatureMatrix;
pub use loss::LossBreakdown;
pub use math::Vec3;
pub use net::OffsetNet;
pub use score::ScoredCloud;
pub use train::{FeatureConfig, TrainConfig, Variant};
pub use voxel::VoxelGrid;
