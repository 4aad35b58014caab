//! Fixed per-point geometric features.
//!
//! These stand in for a learned sparse-convolution encoder: every point gets
//! a [`FEATURE_DIM`]-wide row built from its voxel, its normal and its
//! k-nearest neighbourhoods at three scales. Lengths are expressed in voxel
//! units so the columns have comparable magnitude.
//!
//! | columns | content |
//! |---------|---------|
//! | 0..3   | offset from the voxel centroid |
//! | 3..6   | point normal |
//! | 6..9   | linearity, planarity, sphericity of the k-neighbourhood |
//! | 9..11  | mean and std of distance to the k-neighbours |
//! | 11     | points in the own voxel divided by k |
//! | 12..15 | eigen descriptors at 2k |
//! | 15..18 | eigen descriptors at 4k |
//! | 18..20 | mean and std of height above the 4k-neighbours along the normal |
//! | 20..32 | zero |

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::knn::KnnIndex;
use crate::math::{covariance, sqrt, SymmetricEigen3, Vec3};
use crate::voxel::VoxelGrid;

/// Width of a feature row.
pub const FEATURE_DIM: usize = 32;
/// Default base neighbourhood size.
pub const DEFAULT_NEIGHBOURS: usize = 16;

pub const VOXEL_OFFSET: Range<usize> = 0..3;
pub const NORMAL: Range<usize> = 3..6;
pub const EIGEN_K: Range<usize> = 6..9;
pub const NEIGHBOUR_DISTANCE: Range<usize> = 9..11;
pub const VOXEL_OCCUPANCY: usize = 11;
pub const EIGEN_2K: Range<usize> = 12..15;
pub const EIGEN_4K: Range<usize> = 15..18;
pub const HEIGHT: Range<usize> = 18..20;
pub const USED: usize = 20;

/// Row-major `rows x cols` matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { what: "feature matrix", expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Linearity, planarity and sphericity from covariance eigenvalues.
fn eigen_descriptors(points: &[Vec3], ids: impl Iterator<Item = usize> + Clone) -> [f64; 3] {
    let (_, cov) = covariance(ids.map(|j| points[j]));
    let e = SymmetricEigen3::new(&cov);
    let [l1, l2, l3] = e.values.map(|v| v.max(0.0));
    if l1 <= f64::MIN_POSITIVE {
        return [0.0; 3];
    }
    [(l1 - l2) / l1, (l2 - l3) / l1, l3 / l1]
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, sqrt(var))
}

/// Feature rows for every point of `cloud`. `k` is the base neighbourhood
/// size (the point itself included); the wider scales use `2k` and `4k`,
/// capped at the point count.
pub fn extract_features(cloud: &PointCloud, grid: &VoxelGrid, k: usize) -> Result<FeatureMatrix> {
    let normals = cloud.require_normals()?;
    let n = cloud.len();
    if k < 4 {
        return Err(Error::invalid("feature neighbourhood", "k must be at least 4"));
    }
    if k > n {
        return Err(Error::TooFewPoints { needed: k, found: n });
    }
    if grid.point_to_voxel.len() != n {
        return Err(Error::LengthMismatch { what: "voxel grid", expected: n, found: grid.point_to_voxel.len() });
    }
    let points = cloud.points();
    let unit = grid.voxel_size;
    let k2 = (2 * k).min(n);
    let k4 = (4 * k).min(n);
    let centroids: Vec<Vec3> = (0..grid.voxel_count()).map(|v| grid.centroid(points, v)).collect();
    let index = KnnIndex::new(points)?;

    let mut out = FeatureMatrix::zeros(n, FEATURE_DIM);
    let mut neighbours = Vec::with_capacity(k4);
    for i in 0..n {
        let p = points[i];
        let normal = normals[i];
        index.query_into(p, k4, &mut neighbours);
        let ids = |m: usize| neighbours[..m].iter().map(|&(_, j)| j);
        let v = grid.point_to_voxel[i];
        let row = out.row_mut(i);

        let off = (p - centroids[v]) / unit;
        row[VOXEL_OFFSET].copy_from_slice(&off.to_array());
        row[NORMAL].copy_from_slice(&normal.to_array());
        row[EIGEN_K].copy_from_slice(&eigen_descriptors(points, ids(k)));
        let (dm, ds) = mean_std(neighbours[..k].iter().filter(|&&(_, j)| j != i).map(|&(d2, _)| sqrt(d2) / unit));
        row[NEIGHBOUR_DISTANCE].copy_from_slice(&[dm, ds]);
        row[VOXEL_OCCUPANCY] = grid.voxel_to_points[v].len() as f64 / k as f64;
        row[EIGEN_2K].copy_from_slice(&eigen_descriptors(points, ids(k2)));
        row[EIGEN_4K].copy_from_slice(&eigen_descriptors(points, ids(k4)));
        let (hm, hs) = mean_std(
            neighbours[..k4].iter().filter(|&&(_, j)| j != i).map(|&(_, j)| normal.dot(p - points[j]) / unit),
        );
        row[HEIGHT].copy_from_slice(&[hm, hs]);

        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index: i });
        }
    }
    Ok(out)
}
