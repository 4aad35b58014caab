//! Evaluation: labelled test instances, object/point metrics, noise and
//! patch-count sweeps, and method comparisons.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cloud::{add_gaussian_noise, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::{auc_pr, auc_roc, mean_rank};
use crate::net::OffsetNet;
use crate::rng::{substream_rng, Stream};
use crate::score::{score_instance, ScoredCloud};
use crate::train::{train, FeatureConfig, TrainConfig};

/// Noise levels of the default robustness sweep.
pub const DEFAULT_SIGMAS: [f64; 4] = [0.0, 0.001, 0.003, 0.005];
/// Patch counts of the default patch sweep.
pub const DEFAULT_PATCH_SWEEP: [usize; 4] = [16, 32, 64, 128];

/// Ground truth for one test cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub object_label: bool,
    pub point_labels: Option<Vec<bool>>,
}

impl LabeledInstance {
    /// Object label derived from the point labels.
    pub fn new(point_labels: Option<Vec<bool>>) -> Result<Self> {
        match point_labels {
            Some(labels) => Ok(Self { object_label: labels.iter().any(|&l| l), point_labels: Some(labels) }),
            None => Err(Error::invalid("labels", "use LabeledInstance::object_only without point labels")),
        }
    }

    pub fn object_only(object_label: bool) -> Self {
        Self { object_label, point_labels: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestInstance {
    pub cloud: PointCloud,
    pub label: LabeledInstance,
}

/// How point-level AUC combines several test clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum PointAggregation {
    /// One curve over every labelled point of every instance.
    #[default]
    Pooled,
    /// Mean of per-instance AUCs over instances that contain both classes.
    PerInstance,
}

/// Metrics of one model on one category.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub object_auc_roc: f64,
    pub object_auc_pr: f64,
    /// `None` when no instance carries point labels.
    pub point_auc_roc: Option<f64>,
}

/// Metrics from precomputed scores.
pub fn evaluate_scores(scored: &[ScoredCloud], labels: &[LabeledInstance], aggregation: PointAggregation) -> Result<Metrics> {
    if scored.len() != labels.len() {
        return Err(Error::LengthMismatch { what: "test labels", expected: scored.len(), found: labels.len() });
    }
    let object_scores: Vec<f64> = scored.iter().map(|s| s.object_score).collect();
    let object_labels: Vec<bool> = labels.iter().map(|l| l.object_label).collect();
    let object_auc_roc = auc_roc(&object_scores, &object_labels)?;
    let object_auc_pr = auc_pr(&object_scores, &object_labels)?;

    let labelled: Vec<(&ScoredCloud, &Vec<bool>)> =
        scored.iter().zip(labels).filter_map(|(s, l)| l.point_labels.as_ref().map(|p| (s, p))).collect();
    for (s, p) in &labelled {
        if s.point_scores.len() != p.len() {
            return Err(Error::LengthMismatch { what: "point labels", expected: s.point_scores.len(), found: p.len() });
        }
    }
    let point_auc_roc = if labelled.is_empty() {
        None
    } else {
        Some(match aggregation {
            PointAggregation::Pooled => {
                let scores: Vec<f64> = labelled.iter().flat_map(|(s, _)| s.point_scores.iter().copied()).collect();
                let flags: Vec<bool> = labelled.iter().flat_map(|(_, p)| p.iter().copied()).collect();
                auc_roc(&scores, &flags)?
            }
            PointAggregation::PerInstance => {
                let per: Vec<f64> =
                    labelled.iter().filter_map(|(s, p)| auc_roc(&s.point_scores, p).ok()).collect();
                if per.is_empty() {
                    return Err(Error::SingleClass);
                }
                per.iter().sum::<f64>() / per.len() as f64
            }
        })
    };
    Ok(Metrics { object_auc_roc, object_auc_pr, point_auc_roc })
}

pub fn score_all(net: &OffsetNet, features: &FeatureConfig, test: &[TestInstance]) -> Result<Vec<ScoredCloud>> {
    test.iter().map(|t| score_instance(net, &t.cloud, features)).collect()
}

/// Score every test instance and compute metrics.
pub fn evaluate_model(net: &OffsetNet, features: &FeatureConfig, test: &[TestInstance], aggregation: PointAggregation) -> Result<Metrics> {
    let scored = score_all(net, features, test)?;
    let labels: Vec<LabeledInstance> = test.iter().map(|t| t.label.clone()).collect();
    evaluate_scores(&scored, &labels, aggregation)
}

/// Metrics at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessRow {
    pub sigma: f64,
    pub metrics: Metrics,
}

/// Re-evaluate under Gaussian noise of each `sigma`. Noise for level `s`
/// and instance `i` comes from its own sub-stream of `seed`, so a zero sigma
/// reproduces the clean evaluation exactly.
pub fn robustness_sweep(
    net: &OffsetNet,
    features: &FeatureConfig,
    test: &[TestInstance],
    sigmas: &[f64],
    seed: u64,
    aggregation: PointAggregation,
) -> Result<Vec<RobustnessRow>> {
    sigmas
        .iter()
        .enumerate()
        .map(|(level, &sigma)| {
            let noisy = test
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut rng = substream_rng(seed, Stream::Noise, ((level as u64) << 32) | i as u64);
                    Ok(TestInstance { cloud: add_gaussian_noise(&t.cloud, sigma, &mut rng)?, label: t.label.clone() })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RobustnessRow { sigma, metrics: evaluate_model(net, features, &noisy, aggregation)? })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSweepRow {
    pub patches: usize,
    pub object_auc_roc: f64,
    pub point_auc_roc: Option<f64>,
}

/// Train one model per patch count (everything else, including the seed,
/// shared) and evaluate each on the same test set.
pub fn patch_sweep(train_set: &[PointCloud], test: &[TestInstance], patch_counts: &[usize], cfg: &TrainConfig) -> Result<Vec<PatchSweepRow>> {
    let min_points = train_set.iter().map(PointCloud::len).min().unwrap_or(0);
    patch_counts
        .iter()
        .map(|&patches| {
            if patches > min_points {
                return Err(Error::TooFewPoints { needed: patches, found: min_points });
            }
            let cfg = TrainConfig { patches, ..cfg.clone() };
            let outcome = train(train_set, &cfg)?;
            let m = evaluate_model(&outcome.net, &cfg.features, test, PointAggregation::Pooled)?;
            Ok(PatchSweepRow { patches, object_auc_roc: m.object_auc_roc, point_auc_roc: m.point_auc_roc })
        })
        .collect()
}

/// Metrics of one method on one category, tagged for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMetrics {
    pub category: String,
    pub metrics: Metrics,
}

/// Evaluation of one model over one or more categories.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub categories: Vec<CategoryMetrics>,
    /// Means over categories.
    pub object_auc_roc: f64,
    pub object_auc_pr: f64,
    pub point_auc_roc: Option<f64>,
    pub robustness: Vec<RobustnessRow>,
}

impl EvalReport {
    pub fn from_categories(categories: Vec<CategoryMetrics>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::invalid("report", "needs at least one category"));
        }
        let n = categories.len() as f64;
        let object_auc_roc = categories.iter().map(|c| c.metrics.object_auc_roc).sum::<f64>() / n;
        let object_auc_pr = categories.iter().map(|c| c.metrics.object_auc_pr).sum::<f64>() / n;
        let points: Option<Vec<f64>> = categories.iter().map(|c| c.metrics.point_auc_roc).collect();
        let point_auc_roc = points.map(|p| p.iter().sum::<f64>() / n);
        Ok(Self { categories, object_auc_roc, object_auc_pr, point_auc_roc, robustness: Vec::new() })
    }
}

/// Several methods over the same categories, ranked per category by object
/// AUC-ROC.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodComparison {
    pub methods: Vec<String>,
    pub categories: Vec<String>,
    /// `reports[m]` holds method `m`'s metrics, one entry per category.
    pub reports: Vec<Vec<Metrics>>,
    pub mean_rank: Vec<f64>,
}

impl MethodComparison {
    pub fn new(methods: Vec<String>, categories: Vec<String>, reports: Vec<Vec<Metrics>>) -> Result<Self> {
        if reports.len() != methods.len() {
            return Err(Error::LengthMismatch { what: "method reports", expected: methods.len(), found: reports.len() });
        }
        let table: Vec<Vec<f64>> = reports.iter().map(|r| r.iter().map(|m| m.object_auc_roc).collect()).collect();
        let mean_rank = mean_rank(&table)?;
        Ok(Self { methods, categories, reports, mean_rank })
    }
}
