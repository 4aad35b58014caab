//! Training loop: rotate, normalize, synthesize a pseudo anomaly, extract
//! features, accumulate offset-loss gradients over a batch, take an Adam step
//! on a cosine-annealed learning rate.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::augment::{generate_pseudo_anomaly, generate_random_direction_anomaly, PseudoAnomalySample, DEFAULT_BETA_RANGE, DEFAULT_PATCHES};
use crate::cloud::{normalize, random_rotation, PointCloud};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureMatrix, DEFAULT_NEIGHBOURS, FEATURE_DIM};
use crate::loss::{loss_and_grad, Gradients, LossBreakdown, LossTerms};
use crate::net::{OffsetNet, DEFAULT_HIDDEN};
use crate::optim::{adam_step, cosine_lr, AdamState, DEFAULT_LR};
use crate::rng::{stream_rng, ChaCha8Rng, Stream};
use crate::voxel::{voxelize, DEFAULT_VOXEL_SIZE};

/// Training objective / augmentation combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Variant {
    /// Distance and direction loss, normal-guided anomalies.
    #[default]
    Full,
    /// Distance loss only.
    DistOnly,
    /// Direction loss only.
    DirOnly,
    /// Full loss, anomalies displaced along a random direction.
    RandomDirection,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::DistOnly, Variant::DirOnly, Variant::RandomDirection];

    pub fn loss_terms(self) -> LossTerms {
        match self {
            Variant::Full | Variant::RandomDirection => LossTerms::FULL,
            Variant::DistOnly => LossTerms::DIST_ONLY,
            Variant::DirOnly => LossTerms::DIR_ONLY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::DistOnly => "dist_only",
            Variant::DirOnly => "dir_only",
            Variant::RandomDirection => "random_direction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// How feature rows are computed from a cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureConfig {
    pub voxel_size: f64,
    pub neighbours: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { voxel_size: DEFAULT_VOXEL_SIZE, neighbours: DEFAULT_NEIGHBOURS }
    }
}

impl FeatureConfig {
    pub fn compute(&self, cloud: &PointCloud) -> Result<FeatureMatrix> {
        let grid = voxelize(cloud, self.voxel_size)?;
        extract_features(cloud, &grid, self.neighbours)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Each training cloud appears this many times per epoch.
    pub replication: usize,
    pub beta_range: (f64, f64),
    pub patches: usize,
    pub features: FeatureConfig,
    pub hidden: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    /// Full-scale settings: 1000 epochs, batch 32, learning rate 0.001,
    /// 100x replication, 64 patches, beta in [0.06, 0.12], voxel 0.03.
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 32,
            lr0: DEFAULT_LR,
            replication: 100,
            beta_range: DEFAULT_BETA_RANGE,
            patches: DEFAULT_PATCHES,
            features: FeatureConfig::default(),
            hidden: DEFAULT_HIDDEN,
            seed: 0,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    /// Reduced schedule that trains in well under a minute on one core.
    pub fn desk() -> Self {
        Self { epochs: 150, batch_size: 8, replication: 2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.replication == 0 || self.patches == 0 || self.hidden == 0 {
            return Err(Error::invalid("train config", "batch size, replication, patches and hidden width must be positive"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::invalid("train config", "learning rate must be positive"));
        }
        let (lo, hi) = self.beta_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("beta range", "need 0 <= low <= high"));
        }
        if !(self.features.voxel_size > 0.0) || self.features.neighbours < 4 {
            return Err(Error::invalid("feature config", "voxel size must be positive and k >= 4"));
        }
        Ok(())
    }

    fn steps_per_epoch(&self, dataset_len: usize) -> usize {
        (dataset_len * self.replication).div_ceil(self.batch_size)
    }
}

/// A trained network and its per-epoch mean losses.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: OffsetNet,
    pub history: Vec<LossBreakdown>,
}

/// Network initialization used by [`train`], exposed so callers can compare
/// against the untrained state.
pub fn initial_net(cfg: &TrainConfig) -> Result<OffsetNet> {
    OffsetNet::new(FEATURE_DIM, cfg.hidden, &mut stream_rng(cfg.seed, Stream::Init))
}

/// Pseudo-anomalous training sample for one pass over `cloud`: random
/// rotation, normalization, then augmentation per `cfg.variant`.
pub fn training_sample(cloud: &PointCloud, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<PseudoAnomalySample> {
    let rotated = random_rotation(cloud, rng);
    let normalized = normalize(&rotated)?;
    match cfg.variant {
        Variant::RandomDirection => generate_random_direction_anomaly(&normalized, cfg.patches, cfg.beta_range, rng),
        _ => generate_pseudo_anomaly(&normalized, cfg.patches, cfg.beta_range, rng),
    }
}

/// Train from `cfg.seed`; see [`train_with_progress`].
pub fn train(dataset: &[PointCloud], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(dataset, cfg, |_, _| {})
}

/// Deterministic in `cfg.seed`. `progress` is called after every epoch with
/// the epoch index and its mean loss.
pub fn train_with_progress<F>(dataset: &[PointCloud], cfg: &TrainConfig, mut progress: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, &LossBreakdown),
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset", "need at least one training cloud"));
    }
    if cfg.variant != Variant::RandomDirection {
        for cloud in dataset {
            cloud.require_normals()?;
        }
    }
    let mut net = initial_net(cfg)?;
    let mut rng = stream_rng(cfg.seed, Stream::Train);
    let mut adam = AdamState::new(net.param_count());
    let terms = cfg.variant.loss_terms();
    let total_steps = (cfg.epochs * cfg.steps_per_epoch(dataset.len())) as u64;
    let mut order: Vec<usize> = (0..cfg.replication).flat_map(|_| 0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            for &s in batch {
                let sample = training_sample(&dataset[s], cfg, &mut rng)?;
                let features = cfg.features.compute(&sample.cloud)?;
                let (loss, g) = loss_and_grad(&net, &features, &sample.gt_offsets, terms)?;
                grads.add_assign(&g);
                sum.0 += loss.l_dist;
                sum.1 += loss.l_dir;
            }
            grads.scale(1.0 / batch.len() as f64);
            let lr = cosine_lr(step, total_steps, cfg.lr0)?;
            adam_step(&mut net, &grads, &mut adam, lr)?;
            step += 1;
        }
        let mean = LossBreakdown::new(sum.0 / order.len() as f64, sum.1 / order.len() as f64);
        progress(epoch, &mean);
        history.push(mean);
    }
    Ok(TrainOutcome { net, history })
}
