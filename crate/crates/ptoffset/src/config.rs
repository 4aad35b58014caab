//! Run configuration, read from and written to TOML.
//!
//! Every key is optional; missing keys take the defaults below. Example:
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/sphere"
//!
//! [train]
//! epochs = 150          # 1000
//! batch_size = 8        # 32
//! replication = 2       # 100
//! lr = 0.001
//! patches = 64
//! beta_min = 0.06
//! beta_max = 0.12
//! voxel_size = 0.03
//! neighbours = 16
//! hidden = 64
//! variant = "full"      # full | dist_only | dir_only | random_direction
//!
//! [bench]
//! shape = "sphere"      # sphere | cylinder | torus | capsule
//! points = 2048
//! train_count = 4
//! test_count = 40
//! anomaly_fraction = 0.5
//! anomaly_patches = 64
//! beta_min = 0.05
//! beta_max = 0.14
//! jitter = 0.02
//! # test_seed = 11     # defaults to `seed`
//!
//! [eval]
//! point_aggregation = "pooled"   # pooled | per_instance
//! sigmas = [0.0, 0.001, 0.003, 0.005]
//! patch_counts = [16, 32, 64, 128]
//! normal_neighbours = 16         # k for normals of files without them
//! ```
//!
//! Precedence, highest first: command-line flags, the `PTOFFSET_OUT`
//! environment variable (output directory only), the config file, defaults.

use std::path::PathBuf;

use ptoffset_core::eval::{PointAggregation, DEFAULT_PATCH_SWEEP, DEFAULT_SIGMAS};
use ptoffset_core::synth::{Shape, SynthCategory};
use ptoffset_core::{FeatureConfig, TrainConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_ENV: &str = "PTOFFSET_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub train: TrainSection,
    pub bench: BenchSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("ptoffset-out"),
            train: TrainSection::default(),
            bench: BenchSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub replication: usize,
    pub lr: f64,
    pub patches: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub voxel_size: f64,
    pub neighbours: usize,
    pub hidden: usize,
    pub variant: Variant,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self::from_core(&TrainConfig::default())
    }
}

impl TrainSection {
    pub fn from_core(c: &TrainConfig) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            replication: c.replication,
            lr: c.lr0,
            patches: c.patches,
            beta_min: c.beta_range.0,
            beta_max: c.beta_range.1,
            voxel_size: c.features.voxel_size,
            neighbours: c.features.neighbours,
            hidden: c.hidden,
            variant: c.variant,
        }
    }

    /// The reduced desk schedule (150 epochs, batch 8, 2x replication).
    pub fn desk() -> Self {
        Self::from_core(&TrainConfig::desk())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig { voxel_size: self.voxel_size, neighbours: self.neighbours }
    }

    pub fn to_core(&self, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr,
            replication: self.replication,
            beta_range: (self.beta_min, self.beta_max),
            patches: self.patches,
            features: self.features(),
            hidden: self.hidden,
            seed,
            variant: self.variant,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub shape: String,
    /// Shape dimensions; unset ones keep the shape's default proportions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub major: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub points: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub anomaly_fraction: f64,
    pub anomaly_patches: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub jitter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_seed: Option<u64>,
}

impl Default for BenchSection {
    fn default() -> Self {
        let c = SynthCategory::sphere(0);
        Self {
            shape: c.shape.kind().to_string(),
            radius: None,
            height: None,
            major: None,
            minor: None,
            length: None,
            points: c.points,
            train_count: c.train_count,
            test_count: c.test_count,
            anomaly_fraction: c.anomaly_fraction,
            anomaly_patches: c.anomaly_patches,
            beta_min: c.anomaly_beta_range.0,
            beta_max: c.anomaly_beta_range.1,
            jitter: c.jitter,
            test_seed: None,
        }
    }
}

impl BenchSection {
    pub fn to_category(&self, seed: u64) -> Result<SynthCategory> {
        let base = Shape::default_of(&self.shape)
            .ok_or_else(|| Error::Config(format!("unknown shape {:?} (sphere, cylinder, torus, capsule)", self.shape)))?;
        let given = |slot: Option<f64>, name: &str| -> Result<()> {
            match slot {
                Some(_) => Err(Error::Config(format!("shape {} has no {name} dimension", self.shape))),
                None => Ok(()),
            }
        };
        let shape = match base {
            Shape::Sphere { radius } => {
                given(self.height, "height")?;
                given(self.major, "major")?;
                given(self.minor, "minor")?;
                given(self.length, "length")?;
                Shape::Sphere { radius: self.radius.unwrap_or(radius) }
            }
            Shape::Cylinder { radius, height } => {
                given(self.major, "major")?;
                given(self.minor, "minor")?;
                given(self.length, "length")?;
                Shape::Cylinder { radius: self.radius.unwrap_or(radius), height: self.height.unwrap_or(height) }
            }
            Shape::Torus { major, minor } => {
                given(self.radius, "radius")?;
                given(self.height, "height")?;
                given(self.length, "length")?;
                Shape::Torus { major: self.major.unwrap_or(major), minor: self.minor.unwrap_or(minor) }
            }
            Shape::Capsule { radius, length } => {
                given(self.height, "height")?;
                given(self.major, "major")?;
                given(self.minor, "minor")?;
                Shape::Capsule { radius: self.radius.unwrap_or(radius), length: self.length.unwrap_or(length) }
            }
        };
        let cat = SynthCategory {
            points: self.points,
            train_count: self.train_count,
            test_count: self.test_count,
            anomaly_fraction: self.anomaly_fraction,
            anomaly_patches: self.anomaly_patches,
            anomaly_beta_range: (self.beta_min, self.beta_max),
            jitter: self.jitter,
            test_seed: self.test_seed,
            ..SynthCategory::new(shape, seed)
        };
        cat.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub point_aggregation: PointAggregation,
    pub sigmas: Vec<f64>,
    pub patch_counts: Vec<usize>,
    pub normal_neighbours: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            point_aggregation: PointAggregation::Pooled,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            patch_counts: DEFAULT_PATCH_SWEEP.to_vec(),
            normal_neighbours: 16,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
