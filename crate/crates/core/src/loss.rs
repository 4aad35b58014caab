//! Offset loss: mean per-point L1 distance plus negative mean cosine
//! similarity, equally weighted, with analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::math::{sqrt, Vec3};
use crate::net::{OffsetNet, OUTPUT_DIM};

/// Added to vector norms before dividing in the direction term.
pub const COSINE_EPS: f64 = 1e-8;

/// Loss components of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub l_dist: f64,
    pub l_dir: f64,
    pub l_off: f64,
}

impl LossBreakdown {
    pub fn new(l_dist: f64, l_dir: f64) -> Self {
        Self { l_dist, l_dir, l_off: l_dist + l_dir }
    }
}

/// Which loss terms contribute. Disabled terms are neither evaluated nor
/// differentiated and report 0 in the breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub dist: bool,
    pub dir: bool,
}

impl LossTerms {
    pub const FULL: LossTerms = LossTerms { dist: true, dir: true };
    pub const DIST_ONLY: LossTerms = LossTerms { dist: true, dir: false };
    pub const DIR_ONLY: LossTerms = LossTerms { dist: false, dir: true };
}

fn check_lengths(pred: &[Vec3], gt: &[Vec3]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { what: "ground-truth offsets", expected: pred.len(), found: gt.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// Mean over points of the L1 norm of `pred - gt`.
pub fn loss_dist(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(&p, &g)| (p - g).l1_norm()).sum::<f64>() / pred.len() as f64)
}

#[inline]
fn unit_eps(v: Vec3) -> Vec3 {
    v / (v.norm() + COSINE_EPS)
}

/// Negative mean cosine similarity. Points whose ground truth is the zero
/// vector contribute exactly 0.
pub fn loss_dir(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(-pred.iter().zip(gt).map(|(&p, &g)| unit_eps(p).dot(unit_eps(g))).sum::<f64>() / pred.len() as f64)
}

#[inline]
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss value and its gradient w.r.t. every predicted offset.
pub(crate) fn loss_with_output_grad(pred: &[Vec3], gt: &[Vec3], terms: LossTerms) -> Result<(LossBreakdown, Vec<[f64; OUTPUT_DIM]>)> {
    check_lengths(pred, gt)?;
    let inv_n = 1.0 / pred.len() as f64;
    let mut d_out = vec![[0.0; OUTPUT_DIM]; pred.len()];
    let mut dist = 0.0;
    let mut dir = 0.0;
    for ((&p, &g), d) in pred.iter().zip(gt).zip(d_out.iter_mut()) {
        if terms.dist {
            let r = p - g;
            dist += r.l1_norm();
            for (axis, slot) in d.iter_mut().enumerate() {
                *slot += sign0(r.get(axis)) * inv_n;
            }
        }
        if terms.dir {
            let g_hat = unit_eps(g);
            if g_hat == Vec3::ZERO {
                continue;
            }
            let norm = p.norm();
            let denom = norm + COSINE_EPS;
            let dot = p.dot(g_hat);
            dir -= dot / denom;
            // d/dp (p . g_hat) / (|p| + eps)
            let mut grad = g_hat / denom;
            if norm > 0.0 {
                grad -= p * (dot / (norm * denom * denom));
            }
            for (axis, slot) in d.iter_mut().enumerate() {
                *slot -= grad.get(axis) * inv_n;
            }
        }
    }
    Ok((LossBreakdown::new(dist * inv_n, dir * inv_n), d_out))
}

/// Gradient of the loss w.r.t. every parameter, in the network's flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros_like(net: &OffsetNet) -> Self {
        Gradients(vec![0.0; net.param_count()])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.0 {
            *a *= s;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Loss of `net` on `features` against `gt`, and its parameter gradients.
/// Subgradient conventions: `|x|` has slope 0 at 0, PReLU slope 1 at 0.
pub fn loss_and_grad(net: &OffsetNet, features: &FeatureMatrix, gt: &[Vec3], terms: LossTerms) -> Result<(LossBreakdown, Gradients)> {
    let cache = net.forward_cached(features)?;
    let (loss, d_out) = loss_with_output_grad(&cache.out, gt, terms)?;
    let mut grads = Gradients::zeros_like(net);
    net.backward(features, &cache, &d_out, &mut grads.0, None);
    if let Some(i) = grads.0.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { parameter: net.param_name(i) });
    }
    Ok((loss, grads))
}

/// Per-point saliency: L2 norm of the gradient of the full offset loss
/// w.r.t. that point's feature row.
pub fn export_attention(net: &OffsetNet, features: &FeatureMatrix, gt: &[Vec3]) -> Result<Vec<f64>> {
    let cache = net.forward_cached(features)?;
    let (_, d_out) = loss_with_output_grad(&cache.out, gt, LossTerms::FULL)?;
    let mut grads = Gradients::zeros_like(net);
    let mut d_input = vec![0.0; features.rows() * features.cols()];
    net.backward(features, &cache, &d_out, &mut grads.0, Some(&mut d_input));
    Ok(d_input.chunks(features.cols()).map(|row| sqrt(row.iter().map(|x| x * x).sum())).collect())
}
