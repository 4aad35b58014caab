//! Pseudo-anomaly synthesis by normal-guided patch displacement.
//!
//! A normal cloud is cut into `J` nearest-neighbour patches. One patch is
//! drawn and every point in it moves along its own normal (outward for a
//! bulge, inward for a concavity) by `(1 - w) * beta`, where `w` is the
//! point's distance from the patch seed, scaled to `[0, 1]`. The seed moves
//! by exactly `beta`; the farthest patch points stay put.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::knn::KnnIndex;
use crate::math::Vec3;
use crate::rng::{uniform_closed, unit_vector};

/// Default number of patches.
pub const DEFAULT_PATCHES: usize = 64;
/// Default range of the seed-point displacement.
pub const DEFAULT_BETA_RANGE: (f64, f64) = (0.06, 0.12);
/// Displacements at or below this magnitude do not count as anomalous points.
pub const DISPLACEMENT_EPSILON: f64 = 1e-9;

/// Disjoint nearest-neighbour patches covering a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPartition {
    /// Patch id of each point.
    pub assignments: Vec<usize>,
    /// Seed (centre) point of each patch.
    pub seeds: Vec<usize>,
    /// Members of each patch, seed first, then by distance from the seed.
    pub members: Vec<Vec<usize>>,
    /// `floor(N / J)`.
    pub nominal_size: usize,
}

impl PatchPartition {
    pub fn patch_count(&self) -> usize {
        self.seeds.len()
    }
}

/// Partition into `patches` groups. Repeatedly draws a uniformly random
/// unassigned seed and gives it its `N_h - 1` nearest unassigned points;
/// the last patch takes whatever remains (`N_h` plus `N mod J` points).
pub fn partition_patches<R: Rng + ?Sized>(cloud: &PointCloud, patches: usize, rng: &mut R) -> Result<PatchPartition> {
    let n = cloud.len();
    if patches == 0 {
        return Err(Error::invalid("patch count", "must be at least 1"));
    }
    if patches > n {
        return Err(Error::TooFewPoints { needed: patches, found: n });
    }
    let nominal = n / patches;
    let index = KnnIndex::new(cloud.points())?;
    let mut assignments = vec![usize::MAX; n];
    // Unassigned point ids in ascending order; seeds are drawn by position.
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut seeds = Vec::with_capacity(patches);
    let mut members = Vec::with_capacity(patches);
    let mut found = Vec::with_capacity(nominal);

    for patch in 0..patches {
        let seed = remaining[rng.gen_range(0..remaining.len())];
        let mut group = vec![seed];
        assignments[seed] = patch;
        if patch + 1 == patches {
            group.extend(remaining.iter().copied().filter(|&i| i != seed));
            sort_by_distance_from(cloud.points(), seed, &mut group[1..]);
        } else if nominal > 1 {
            let taken = &assignments;
            index.query_filtered_into(cloud.points()[seed], nominal - 1, |i| taken[i] == usize::MAX, &mut found);
            group.extend(found.iter().map(|&(_, i)| i));
        }
        for &i in &group {
            assignments[i] = patch;
        }
        remaining.retain(|&i| assignments[i] == usize::MAX);
        seeds.push(seed);
        members.push(group);
    }
    debug_assert!(remaining.is_empty());
    Ok(PatchPartition { assignments, seeds, members, nominal_size: nominal })
}

fn sort_by_distance_from(points: &[Vec3], seed: usize, ids: &mut [usize]) {
    let c = points[seed];
    ids.sort_by(|&a, &b| {
        points[a].distance_squared(c).total_cmp(&points[b].distance_squared(c)).then(a.cmp(&b))
    });
}

/// Normalized distance of each patch member from the patch seed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    /// Point ids, in the same order as `w`.
    pub members: Vec<usize>,
    /// `dist(p, seed) / max dist`, so the seed gets 0 and the farthest 1.
    pub w: Vec<f64>,
}

pub fn patch_weights(cloud: &PointCloud, partition: &PatchPartition, patch_id: usize) -> Result<WeightMatrix> {
    let members = partition
        .members
        .get(patch_id)
        .ok_or(Error::invalid("patch id", "out of range"))?
        .clone();
    let center = cloud.points()[partition.seeds[patch_id]];
    let dist: Vec<f64> = members.iter().map(|&i| cloud.points()[i].distance(center)).collect();
    let max = dist.iter().copied().fold(0.0, f64::max);
    let w = if max > 0.0 { dist.iter().map(|d| d / max).collect() } else { vec![0.0; dist.len()] };
    Ok(WeightMatrix { members, w })
}

/// Outward (+1) or inward (-1) displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Bulge,
    Concavity,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Bulge => 1.0,
            Sign::Concavity => -1.0,
        }
    }
}

/// Random choices behind one pseudo anomaly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub patch_id: usize,
    pub alpha: Sign,
    pub beta: f64,
}

/// Direction each patch point moves in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// Each point along its own normal.
    Normals,
    /// Every point along one shared unit vector.
    Uniform(Vec3),
}

/// A displaced cloud together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoAnomalySample {
    /// Displaced cloud; normals are carried over from the source unchanged.
    pub cloud: PointCloud,
    /// Displaced minus original position, per point.
    pub gt_offsets: Vec<Vec3>,
    /// True on every point of the selected patch.
    pub anomaly_mask: Vec<bool>,
    pub draw: Draw,
}

impl PseudoAnomalySample {
    /// Point labels for evaluation: displacement strictly above
    /// [`DISPLACEMENT_EPSILON`].
    pub fn point_labels(&self) -> Vec<bool> {
        self.gt_offsets.iter().map(|o| o.norm() > DISPLACEMENT_EPSILON).collect()
    }
}

/// Apply the displacement for a fixed draw. `p' = p + alpha * d * (1 - w) * beta`
/// on every point of the drawn patch, with `d` the point's normal or the
/// shared direction.
pub fn displace_patch(
    cloud: &PointCloud,
    partition: &PatchPartition,
    draw: Draw,
    direction: Direction,
) -> Result<PseudoAnomalySample> {
    if partition.assignments.len() != cloud.len() {
        return Err(Error::LengthMismatch { what: "patch partition", expected: cloud.len(), found: partition.assignments.len() });
    }
    let normals = match direction {
        Direction::Normals => Some(cloud.require_normals()?),
        Direction::Uniform(_) => None,
    };
    let weights = patch_weights(cloud, partition, draw.patch_id)?;
    let source = cloud.points();
    let mut displaced = source.to_vec();
    let mut mask = vec![false; cloud.len()];
    for (&i, &w) in weights.members.iter().zip(&weights.w) {
        let d = match direction {
            Direction::Normals => normals.map(|ns| ns[i]).unwrap_or(Vec3::ZERO),
            Direction::Uniform(u) => u,
        };
        displaced[i] = source[i] + d * (draw.alpha.value() * (1.0 - w) * draw.beta);
        mask[i] = true;
    }
    let gt_offsets = displaced.iter().zip(source).map(|(&a, &b)| a - b).collect();
    Ok(PseudoAnomalySample { cloud: cloud.with_points_unchecked(displaced), gt_offsets, anomaly_mask: mask, draw })
}

fn draw<R: Rng + ?Sized>(patches: usize, beta_range: (f64, f64), rng: &mut R) -> Result<Draw> {
    let (lo, hi) = beta_range;
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid("beta range", "need 0 <= low <= high"));
    }
    let patch_id = rng.gen_range(0..patches);
    let alpha = if rng.gen::<bool>() { Sign::Bulge } else { Sign::Concavity };
    let beta = uniform_closed(rng, lo, hi);
    Ok(Draw { patch_id, alpha, beta })
}

/// Normal-guided pseudo anomaly. The cloud is expected to be normalized and
/// must carry normals.
pub fn generate_pseudo_anomaly<R: Rng + ?Sized>(
    cloud: &PointCloud,
    patches: usize,
    beta_range: (f64, f64),
    rng: &mut R,
) -> Result<PseudoAnomalySample> {
    cloud.require_normals()?;
    let partition = partition_patches(cloud, patches, rng)?;
    let d = draw(patches, beta_range, rng)?;
    displace_patch(cloud, &partition, d, Direction::Normals)
}

/// Same as [`generate_pseudo_anomaly`] but the whole patch moves along one
/// random unit direction instead of its normals. Normals are not needed.
pub fn generate_random_direction_anomaly<R: Rng + ?Sized>(
    cloud: &PointCloud,
    patches: usize,
    beta_range: (f64, f64),
    rng: &mut R,
) -> Result<PseudoAnomalySample> {
    let partition = partition_patches(cloud, patches, rng)?;
    let d = draw(patches, beta_range, rng)?;
    let u = unit_vector(rng);
    displace_patch(cloud, &partition, d, Direction::Uniform(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn line(n: usize) -> PointCloud {
        let pts = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let normals = (0..n).map(|_| Vec3::new(0.0, 0.0, 1.0)).collect();
        PointCloud::new(pts, Some(normals), "line").unwrap()
    }

    /// Replays the partition procedure for a forced seed order by brute force.
    fn brute_partition(points: &[Vec3], j: usize, seed_order: &[usize]) -> Vec<Vec<usize>> {
        let nominal = points.len() / j;
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut out = Vec::new();
        for (b, &seed) in seed_order.iter().enumerate() {
            remaining.retain(|&i| i != seed);
            let mut cand = remaining.clone();
            cand.sort_by(|&a, &c| {
                points[a].distance_squared(points[seed]).total_cmp(&points[c].distance_squared(points[seed])).then(a.cmp(&c))
            });
            let take = if b + 1 == j { cand.len() } else { nominal - 1 };
            let mut group = vec![seed];
            group.extend(&cand[..take]);
            remaining.retain(|i| !group.contains(i));
            out.push(group);
        }
        out
    }

    #[test]
    fn collinear_partition_example() {
        let c = line(4);
        // Find a generator whose first seed draw is point 0.
        let mut seed = 0;
        let partition = loop {
            let mut rng = stream_rng(seed, Stream::Augment);
            let p = partition_patches(&c, 2, &mut rng).unwrap();
            if p.seeds[0] == 0 {
                break p;
            }
            seed += 1;
        };
        assert_eq!(partition.members, brute_partition(c.points(), 2, &partition.seeds));
        assert_eq!(partition.members[0], [0, 1]);
        let mut second = partition.members[1].clone();
        second.sort();
        assert_eq!(second, [2, 3]);
        assert_eq!(partition.assignments, [0, 0, 1, 1]);
    }

    #[test]
    fn degenerate_partitions() {
        let c = line(5);
        let mut rng = stream_rng(1, Stream::Augment);
        let one = partition_patches(&c, 1, &mut rng).unwrap();
        assert_eq!(one.members.len(), 1);
        assert_eq!(one.members[0].len(), 5);
        let all = partition_patches(&c, 5, &mut rng).unwrap();
        assert!(all.members.iter().enumerate().all(|(b, m)| m == &[all.seeds[b]]));
        assert!(matches!(partition_patches(&c, 6, &mut rng), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn partition_matches_brute_force_replay() {
        let mut rng = stream_rng(5, Stream::Augment);
        let pts: Vec<Vec3> = (0..103).map(|_| crate::rng::unit_vector(&mut rng)).collect();
        let c = PointCloud::new(pts, None, "s").unwrap();
        for j in [1, 2, 7, 10, 103] {
            let p = partition_patches(&c, j, &mut rng).unwrap();
            assert_eq!(p.members, brute_partition(c.points(), j, &p.seeds), "J={j}");
            for (b, m) in p.members.iter().enumerate() {
                if b + 1 < j {
                    assert_eq!(m.len(), 103 / j);
                }
            }
        }
    }

    #[test]
    fn weights_examples() {
        let c = line(3);
        let partition = PatchPartition {
            assignments: vec![0, 0, 0],
            seeds: vec![0],
            members: vec![vec![0, 1, 2]],
            nominal_size: 3,
        };
        assert_eq!(patch_weights(&c, &partition, 0).unwrap().w, [0.0, 0.5, 1.0]);

        let single = PatchPartition { assignments: vec![0], seeds: vec![0], members: vec![vec![0]], nominal_size: 1 };
        assert_eq!(patch_weights(&line(1), &single, 0).unwrap().w, [0.0]);

        let ring = PointCloud::new(
            vec![Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, 0.0, -2.0)],
            None,
            "r",
        )
        .unwrap();
        let p = PatchPartition { assignments: vec![0; 4], seeds: vec![0], members: vec![vec![0, 1, 2, 3]], nominal_size: 4 };
        assert_eq!(patch_weights(&ring, &p, 0).unwrap().w, [0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn seed_moves_exactly_beta_along_normal() {
        let c = line(3);
        let partition = PatchPartition { assignments: vec![0; 3], seeds: vec![1], members: vec![vec![1, 0, 2]], nominal_size: 3 };
        let draw = Draw { patch_id: 0, alpha: Sign::Bulge, beta: 0.1 };
        let s = displace_patch(&c, &partition, draw, Direction::Normals).unwrap();
        assert_eq!(s.gt_offsets[1], Vec3::new(0.0, 0.0, 0.1));
        assert!((s.gt_offsets[1].norm() - 0.1).abs() < 1e-15);
        // Both ends have w = 1 and stay put, yet remain in the mask.
        assert_eq!(s.gt_offsets[0], Vec3::ZERO);
        assert_eq!(s.gt_offsets[2], Vec3::ZERO);
        assert_eq!(s.anomaly_mask, [true, true, true]);
        assert_eq!(s.point_labels(), [false, true, false]);
    }

    #[test]
    fn forced_direction_moves_center_along_it() {
        let c = line(2);
        let partition = PatchPartition { assignments: vec![0, 0], seeds: vec![0], members: vec![vec![0, 1]], nominal_size: 2 };
        let u = Vec3::new(0.6, 0.8, 0.0);
        let draw = Draw { patch_id: 0, alpha: Sign::Bulge, beta: 0.1 };
        let s = displace_patch(&c, &partition, draw, Direction::Uniform(u)).unwrap();
        assert!((s.gt_offsets[0] - u * 0.1).norm() < 1e-15);
    }

    #[test]
    fn missing_normals_are_rejected() {
        let c = line(8).without_normals();
        let mut rng = stream_rng(1, Stream::Augment);
        assert_eq!(generate_pseudo_anomaly(&c, 2, DEFAULT_BETA_RANGE, &mut rng).unwrap_err(), Error::MissingNormals);
        assert!(generate_random_direction_anomaly(&c, 2, DEFAULT_BETA_RANGE, &mut rng).is_ok());
    }

    #[test]
    fn random_directions_average_out() {
        let c = line(4);
        let mut rng = stream_rng(9, Stream::Augment);
        let mut mean = Vec3::ZERO;
        for _ in 0..1000 {
            let s = generate_random_direction_anomaly(&c, 4, (0.1, 0.1), &mut rng).unwrap();
            let seed = s.gt_offsets.iter().find(|o| o.norm() > 0.0).unwrap();
            mean += *seed / seed.norm();
        }
        assert!((mean / 1000.0).norm() < 0.1);
    }
}
