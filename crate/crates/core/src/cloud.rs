//! Point clouds and the geometric transforms applied before training or
//! scoring: normalization, rotation, noise and normal estimation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::knn::KnnIndex;
use crate::math::{covariance, sqrt, Mat3, SymmetricEigen3, Vec3};
use crate::rng::standard_normal;

/// Tolerance on normal length accepted by [`PointCloud::new`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// N points with optional unit normals and a category tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    category: String,
}

impl PointCloud {
    /// Validates that there is at least one point, that every coordinate is
    /// finite and that normals, when given, are one unit vector per point.
    pub fn new(points: Vec<Vec3>, normals: Option<Vec<Vec3>>, category: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index });
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(Error::LengthMismatch { what: "normals", expected: points.len(), found: ns.len() });
            }
            for (index, n) in ns.iter().enumerate() {
                let length = n.norm();
                if !(libm::fabs(length - 1.0) <= UNIT_TOLERANCE) {
                    return Err(Error::NotUnitNormal { index, length });
                }
            }
        }
        Ok(Self { points, normals, category: category.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; provided for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn set_category(&mut self, category: impl Into<String>) {
        self.category = category.into();
    }

    /// Normals, or [`Error::MissingNormals`].
    pub fn require_normals(&self) -> Result<&[Vec3]> {
        self.normals.as_deref().ok_or(Error::MissingNormals)
    }

    pub fn with_normals(self, normals: Vec<Vec3>) -> Result<Self> {
        Self::new(self.points, Some(normals), self.category)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    /// Replace the points, keeping normals and category. Used by transforms
    /// that preserve the point count.
    pub(crate) fn with_points_unchecked(&self, points: Vec<Vec3>) -> Self {
        debug_assert_eq!(points.len(), self.points.len());
        Self { points, normals: self.normals.clone(), category: self.category.clone() }
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
        sum / self.points.len() as f64
    }
}

/// Center on the centroid, then divide by the largest absolute coordinate so
/// the cloud spans [-1, 1] along its widest axis. The scale is isotropic, so
/// normals are left untouched.
pub fn normalize(cloud: &PointCloud) -> Result<PointCloud> {
    let c = cloud.centroid();
    let centered: Vec<Vec3> = cloud.points.iter().map(|&p| p - c).collect();
    let scale = centered.iter().fold(0.0f64, |m, p| m.max(p.max_abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateScale);
    }
    Ok(cloud.with_points_unchecked(centered.into_iter().map(|p| p / scale).collect()))
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation(Mat3::IDENTITY);

    /// Uniform (Haar) random rotation via a random unit quaternion
    /// (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen::<f64>() * core::f64::consts::TAU;
        let u3: f64 = rng.gen::<f64>() * core::f64::consts::TAU;
        let a = sqrt(1.0 - u1);
        let b = sqrt(u1);
        let (w, x, y, z) = (a * libm::sin(u2), a * libm::cos(u2), b * libm::sin(u3), b * libm::cos(u3));
        Self::from_quaternion(w, x, y, z)
    }

    /// Rotation of `angle` radians about the unit `axis`.
    pub fn about_axis(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
        let (s, c) = (libm::sin(angle / 2.0), libm::cos(angle / 2.0));
        Self::from_quaternion(c, a.x * s, a.y * s, a.z * s)
    }

    fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        Rotation(Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.0.mul_vec(v)
    }

    /// Rotate points and normals by the same matrix.
    pub fn rotate_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points.iter().map(|&p| self.apply(p)).collect();
        let normals = cloud.normals.as_ref().map(|ns| ns.iter().map(|&n| self.apply(n)).collect());
        PointCloud { points, normals, category: cloud.category.clone() }
    }
}

/// Rotate the cloud by a uniformly drawn rotation.
pub fn random_rotation<R: Rng + ?Sized>(cloud: &PointCloud, rng: &mut R) -> PointCloud {
    Rotation::random(rng).rotate_cloud(cloud)
}

/// Independent zero-mean Gaussian perturbation of every coordinate.
/// `sigma == 0` returns an exact copy without consuming randomness.
pub fn add_gaussian_noise<R: Rng + ?Sized>(cloud: &PointCloud, sigma: f64, rng: &mut R) -> Result<PointCloud> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", "must be finite and non-negative"));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            let dx = standard_normal(rng);
            let dy = standard_normal(rng);
            let dz = standard_normal(rng);
            p + Vec3::new(dx, dy, dz) * sigma
        })
        .collect();
    Ok(cloud.with_points_unchecked(points))
}

/// Output of [`estimate_normals`].
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    /// Points whose neighbourhood covariance had rank < 2; their normal is the
    /// radial direction from the centroid instead.
    pub degenerate: Vec<usize>,
}

/// Relative eigenvalue threshold below which a neighbourhood counts as
/// rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// PCA normals: smallest-eigenvalue eigenvector of each point's k-nearest
/// neighbourhood (the point included), oriented away from the centroid.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(Error::invalid("k", "normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(Error::TooFewPoints { needed: k, found: cloud.len() });
    }
    let centroid = cloud.centroid();
    let index = KnnIndex::new(&cloud.points)?;
    let mut neighbours = Vec::with_capacity(k);
    let mut normals = Vec::with_capacity(cloud.len());
    let mut degenerate = Vec::new();
    for (i, &p) in cloud.points.iter().enumerate() {
        index.query_into(p, k, &mut neighbours);
        let (_, cov) = covariance(neighbours.iter().map(|&(_, j)| cloud.points[j]));
        let eig = SymmetricEigen3::new(&cov);
        let radial = p - centroid;
        let normal = if eig.values[1] <= RANK_TOLERANCE * eig.values[0].max(f64::MIN_POSITIVE) {
            degenerate.push(i);
            radial.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0))
        } else {
            let n = eig.vectors[2].normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
            if n.dot(radial) < 0.0 {
                -n
            } else {
                n
            }
        };
        normals.push(normal);
    }
    Ok(NormalEstimate { cloud: cloud.clone().with_normals(normals)?, degenerate })
}
