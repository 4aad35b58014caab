//! Sparse voxelization with a two-way voxel/point index.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Default voxel edge length for normalized clouds.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.03;

/// Occupied voxels of a cloud. Voxel ids follow first appearance in point
/// order, so the grid is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub voxel_coords: Vec<[i64; 3]>,
    pub point_to_voxel: Vec<usize>,
    pub voxel_to_points: Vec<Vec<usize>>,
}

impl VoxelGrid {
    pub fn voxel_count(&self) -> usize {
        self.voxel_coords.len()
    }

    /// Mean position of the points in voxel `v`.
    pub fn centroid(&self, points: &[Vec3], v: usize) -> Vec3 {
        let ids = &self.voxel_to_points[v];
        ids.iter().fold(Vec3::ZERO, |acc, &i| acc + points[i]) / ids.len() as f64
    }
}

/// Integer voxel coordinate of `p`: componentwise `floor(p / size)`.
#[inline]
pub fn voxel_coord(p: Vec3, voxel_size: f64) -> [i64; 3] {
    [
        libm::floor(p.x / voxel_size) as i64,
        libm::floor(p.y / voxel_size) as i64,
        libm::floor(p.z / voxel_size) as i64,
    ]
}

pub fn voxelize(cloud: &PointCloud, voxel_size: f64) -> Result<VoxelGrid> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::invalid("voxel size", "must be positive and finite"));
    }
    let mut lookup: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    let mut voxel_coords = Vec::new();
    let mut voxel_to_points: Vec<Vec<usize>> = Vec::new();
    let mut point_to_voxel = Vec::with_capacity(cloud.len());
    for (i, &p) in cloud.points().iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFiniteCoordinate { index: i });
        }
        let key = voxel_coord(p, voxel_size);
        let v = *lookup.entry(key).or_insert_with(|| {
            voxel_coords.push(key);
            voxel_to_points.push(Vec::new());
            voxel_coords.len() - 1
        });
        voxel_to_points[v].push(i);
        point_to_voxel.push(v);
    }
    Ok(VoxelGrid { voxel_size, voxel_coords, point_to_voxel, voxel_to_points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cloud(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect(), None, "v").unwrap()
    }

    #[test]
    fn floor_examples() {
        assert_eq!(voxelize(&cloud(&[0.01, 0.02]), 0.03).unwrap().voxel_count(), 1);
        assert_eq!(voxelize(&cloud(&[0.01, 0.05]), 0.03).unwrap().voxel_count(), 2);
        // A huge voxel still splits at zero: floor(-0.5 / 2) = -1, floor(0.5 / 2) = 0.
        let g = voxelize(&cloud(&[-0.5, 0.5, 0.9]), 2.0).unwrap();
        assert_eq!(g.voxel_coords, vec![[-1, 0, 0], [0, 0, 0]]);
        assert_eq!(voxelize(&cloud(&[0.1, 0.5, 0.9]), 2.0).unwrap().voxel_count(), 1);
    }

    #[test]
    fn index_round_trip() {
        let g = voxelize(&cloud(&[0.0, 0.031, 0.5, 0.001, 0.52]), 0.03).unwrap();
        assert!(g.voxel_count() <= 5);
        for (i, &v) in g.point_to_voxel.iter().enumerate() {
            assert!(g.voxel_to_points[v].contains(&i));
        }
        let mut all: Vec<usize> = g.voxel_to_points.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_bad_size() {
        assert!(voxelize(&cloud(&[0.0]), 0.0).is_err());
        assert!(voxelize(&cloud(&[0.0]), f64::NAN).is_err());
    }
}
