//! Anomaly scores from predicted offsets.

use alloc::vec::Vec;

use crate::cloud::{normalize, PointCloud};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::net::OffsetNet;
use crate::train::FeatureConfig;

/// Point score: sum of absolute offset components.
#[inline]
pub fn point_score(offset: Vec3) -> f64 {
    offset.l1_norm()
}

/// Object score: mean point score.
pub fn object_score(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCloud {
    pub point_scores: Vec<f64>,
    pub object_score: f64,
    /// Raw predicted offsets, in normalized coordinates.
    pub offsets: Vec<Vec3>,
}

impl ScoredCloud {
    pub fn from_offsets(offsets: Vec<Vec3>) -> Result<Self> {
        let point_scores: Vec<f64> = offsets.iter().map(|&o| point_score(o)).collect();
        let object_score = object_score(&point_scores)?;
        Ok(Self { point_scores, object_score, offsets })
    }
}

/// Normalize, extract features, predict offsets and score. The cloud must
/// carry normals.
pub fn score_instance(net: &OffsetNet, cloud: &PointCloud, features: &FeatureConfig) -> Result<ScoredCloud> {
    let normalized = normalize(cloud)?;
    let f = features.compute(&normalized)?;
    ScoredCloud::from_offsets(net.forward(&f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_score_examples() {
        assert_eq!(point_score(Vec3::ZERO), 0.0);
        assert!((point_score(Vec3::new(0.1, -0.2, 0.3)) - 0.6).abs() < 1e-15);
        let v = Vec3::new(0.4, -1.5, 2.0);
        assert_eq!(point_score(-v), point_score(v));
    }

    #[test]
    fn object_score_examples() {
        assert!((object_score(&[0.2, 0.4]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(object_score(&[0.25; 5]).unwrap(), 0.25);
        assert!(object_score(&[]).is_err());
    }
}
