//! Synthetic benchmark categories: analytic shapes with exact normals and
//! test sets with injected, exactly labelled anomalies.
//!
//! Surfaces are sampled quasi-uniformly. Each shape is split into smooth
//! regions, points are allotted to regions in proportion to area (largest
//! remainder), and within a region a randomly shifted Fibonacci lattice in
//! the unit square is pushed through an area-preserving parametrization:
//!
//! * sphere: `z = 1 - 2u`, azimuth `2 pi v`;
//! * cylinder side: height linear in `u`; caps: radius `sqrt(u)`;
//! * capsule: cylinder side plus two hemispheres with height linear in `u`;
//! * torus: azimuth `2 pi v`, tube angle from inverting the CDF of the
//!   area density `R + r cos(theta)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::augment::{generate_pseudo_anomaly, Draw, DEFAULT_PATCHES};
use crate::cloud::{normalize, PointCloud};
use crate::error::{Error, Result};
use crate::eval::{LabeledInstance, TestInstance};
use crate::math::{sqrt, Vec3};
use crate::rng::{substream_rng, Stream};

/// Inverse golden ratio, the lattice generator.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum Shape {
    Sphere { radius: f64 },
    /// Closed cylinder along z.
    Cylinder { radius: f64, height: f64 },
    /// Torus around z; `major` to the tube centre, `minor` tube radius.
    Torus { major: f64, minor: f64 },
    /// Cylinder of length `length` capped by hemispheres.
    Capsule { radius: f64, length: f64 },
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Torus { .. } => "torus",
            Shape::Capsule { .. } => "capsule",
        }
    }

    /// Default proportions for each kind.
    pub fn default_of(kind: &str) -> Option<Shape> {
        Some(match kind {
            "sphere" => Shape::Sphere { radius: 1.0 },
            "cylinder" => Shape::Cylinder { radius: 0.5, height: 1.6 },
            "torus" => Shape::Torus { major: 1.0, minor: 0.35 },
            "capsule" => Shape::Capsule { radius: 0.45, length: 1.0 },
            _ => return None,
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            Shape::Torus { major, minor } => minor > 0.0 && major > minor,
            Shape::Capsule { radius, length } => radius > 0.0 && length >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("shape", "dimensions must be positive (torus needs major > minor)"))
        }
    }

    fn scaled(&self, f: [f64; 2]) -> Shape {
        match *self {
            Shape::Sphere { radius } => Shape::Sphere { radius: radius * f[0] },
            Shape::Cylinder { radius, height } => Shape::Cylinder { radius: radius * f[0], height: height * f[1] },
            Shape::Torus { major, minor } => Shape::Torus { major: major * f[0], minor: minor * f[1] },
            Shape::Capsule { radius, length } => Shape::Capsule { radius: radius * f[0], length: length * f[1] },
        }
    }
}

/// One synthetic category and its benchmark split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthCategory {
    pub name: String,
    pub shape: Shape,
    pub points: usize,
    pub train_count: usize,
    pub test_count: usize,
    /// Fraction of test instances that get an injected anomaly.
    pub anomaly_fraction: f64,
    /// Patch count used for the injected anomalies.
    pub anomaly_patches: usize,
    pub anomaly_beta_range: (f64, f64),
    /// Relative per-instance jitter of the shape dimensions.
    pub jitter: f64,
    pub seed: u64,
    /// Overrides the seed of the test split only.
    pub test_seed: Option<u64>,
}

impl SynthCategory {
    /// 2048 points, 4 training clouds, 40 test clouds of which half anomalous.
    pub fn new(shape: Shape, seed: u64) -> Self {
        Self {
            name: String::from(shape.kind()),
            shape,
            points: 2048,
            train_count: 4,
            test_count: 40,
            anomaly_fraction: 0.5,
            anomaly_patches: DEFAULT_PATCHES,
            anomaly_beta_range: (0.05, 0.14),
            jitter: 0.02,
            seed,
            test_seed: None,
        }
    }

    pub fn sphere(seed: u64) -> Self {
        Self::new(Shape::Sphere { radius: 1.0 }, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.points < self.anomaly_patches.max(4) {
            return Err(Error::TooFewPoints { needed: self.anomaly_patches.max(4), found: self.points });
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::invalid("anomaly fraction", "must lie strictly between 0 and 1"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::invalid("jitter", "must lie in [0, 0.5)"));
        }
        Ok(())
    }

    pub fn test_seed(&self) -> u64 {
        self.test_seed.unwrap_or(self.seed)
    }

    pub fn anomalous_count(&self) -> usize {
        libm::round(self.anomaly_fraction * self.test_count as f64) as usize
    }
}

/// Quasi-uniform surface samples with analytic outward normals; shape
/// dimensions jittered by up to `category.jitter`.
pub fn sample_shape<R: Rng + ?Sized>(category: &SynthCategory, rng: &mut R) -> Result<PointCloud> {
    category.validate()?;
    let j = category.jitter;
    let factors = [1.0 + uniform(rng, -j, j), 1.0 + uniform(rng, -j, j)];
    let shape = category.shape.scaled(factors);
    let n = category.points;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut push = |p: Vec3, nrm: Vec3| {
        points.push(p);
        normals.push(nrm);
    };
    match shape {
        Shape::Sphere { radius } => {
            for (u, v) in lattice(n, rng) {
                let d = sphere_dir(1.0 - 2.0 * u, v);
                push(d * radius, d);
            }
        }
        Shape::Cylinder { radius, height } => {
            let side = TAU * radius * height;
            let cap = core::f64::consts::PI * radius * radius;
            let counts = allot(n, &[side, cap, cap]);
            for (u, v) in lattice(counts[0], rng) {
                let (s, c) = (libm::sin(TAU * v), libm::cos(TAU * v));
                push(Vec3::new(radius * c, radius * s, (u - 0.5) * height), Vec3::new(c, s, 0.0));
            }
            for (cap_id, sign) in [(1usize, 1.0), (2, -1.0)] {
                for (u, v) in lattice(counts[cap_id], rng) {
                    let r = radius * sqrt(u);
                    let (s, c) = (libm::sin(TAU * v), libm::cos(TAU * v));
                    push(Vec3::new(r * c, r * s, sign * height / 2.0), Vec3::new(0.0, 0.0, sign));
                }
            }
        }
        Shape::Capsule { radius, length } => {
            let side = TAU * radius * length;
            let hemi = TAU * radius * radius;
            let counts = allot(n, &[side, hemi, hemi]);
            for (u, v) in lattice(counts[0], rng) {
                let (s, c) = (libm::sin(TAU * v), libm::cos(TAU * v));
                push(Vec3::new(radius * c, radius * s, (u - 0.5) * length), Vec3::new(c, s, 0.0));
            }
            for (cap_id, sign) in [(1usize, 1.0), (2, -1.0)] {
                for (u, v) in lattice(counts[cap_id], rng) {
                    let d = sphere_dir(sign * u, v);
                    push(d * radius + Vec3::new(0.0, 0.0, sign * length / 2.0), d);
                }
            }
        }
        Shape::Torus { major, minor } => {
            for (u, v) in lattice(n, rng) {
                let theta = torus_angle(u, major, minor);
                let phi = TAU * v;
                let (st, ct) = (libm::sin(theta), libm::cos(theta));
                let (sp, cp) = (libm::sin(phi), libm::cos(phi));
                let ring = major + minor * ct;
                push(Vec3::new(ring * cp, ring * sp, minor * st), Vec3::new(ct * cp, ct * sp, st));
            }
        }
    }
    PointCloud::new(points, Some(normals), category.name.clone())
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Fibonacci lattice of `n` points in the unit square with a random toroidal
/// shift.
fn lattice<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let (su, sv): (f64, f64) = (rng.gen(), rng.gen());
    (0..n)
        .map(|i| {
            let u = fract((i as f64 + 0.5) / n as f64 + su);
            let v = fract(i as f64 * GOLDEN + sv);
            (u, v)
        })
        .collect()
}

fn fract(x: f64) -> f64 {
    x - libm::floor(x)
}

/// Unit vector with height `z` and azimuth `2 pi v`.
fn sphere_dir(z: f64, v: f64) -> Vec3 {
    let r = sqrt((1.0 - z * z).max(0.0));
    Vec3::new(r * libm::cos(TAU * v), r * libm::sin(TAU * v), z)
}

/// Split `n` points over regions by area, largest remainder first.
fn allot(n: usize, areas: &[f64]) -> Vec<usize> {
    let total: f64 = areas.iter().sum();
    let exact: Vec<f64> = areas.iter().map(|a| a / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| libm::floor(e) as usize).collect();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - counts[b] as f64).total_cmp(&(exact[a] - counts[a] as f64)).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Solve `(theta + (r/R) sin theta) / 2 pi = u` for the tube angle.
fn torus_angle(u: f64, major: f64, minor: f64) -> f64 {
    let k = minor / major;
    let target = TAU * u;
    let (mut lo, mut hi) = (0.0, TAU);
    let mut t = target;
    for _ in 0..60 {
        let f = t + k * libm::sin(t) - target;
        if libm::fabs(f) < 1e-14 {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let df = 1.0 + k * libm::cos(t);
        let next = t - f / df;
        t = if next >= lo && next <= hi { next } else { 0.5 * (lo + hi) };
    }
    t
}

/// Train clouds (normal only) and labelled test instances.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub category: SynthCategory,
    pub train: Vec<PointCloud>,
    pub test: Vec<TestInstance>,
    /// The anomaly draw behind each anomalous test instance.
    pub draws: Vec<Option<Draw>>,
}

/// Generate the benchmark. Training clouds come from the training stream of
/// `category.seed`; test clouds, the anomalous subset and the anomaly draws
/// from the test stream of `category.test_seed()`, one sub-stream per item.
pub fn build_benchmark(category: &SynthCategory) -> Result<Benchmark> {
    category.validate()?;
    let train = (0..category.train_count)
        .map(|i| {
            let mut rng = substream_rng(category.seed, Stream::BenchTrain, i as u64);
            let mut cloud = normalize(&sample_shape(category, &mut rng)?)?;
            cloud.set_category(format!("{}/train_{i:03}", category.name));
            Ok(cloud)
        })
        .collect::<Result<Vec<_>>>()?;

    let test_seed = category.test_seed();
    let mut which: Vec<usize> = (0..category.test_count).collect();
    which.shuffle(&mut substream_rng(test_seed, Stream::BenchTest, u64::MAX));
    let mut anomalous = vec![false; category.test_count];
    for &i in which.iter().take(category.anomalous_count()) {
        anomalous[i] = true;
    }

    let mut test = Vec::with_capacity(category.test_count);
    let mut draws = Vec::with_capacity(category.test_count);
    for (i, &is_anomalous) in anomalous.iter().enumerate() {
        let mut rng = substream_rng(test_seed, Stream::BenchTest, i as u64);
        let mut cloud = normalize(&sample_shape(category, &mut rng)?)?;
        cloud.set_category(format!("{}/test_{i:03}", category.name));
        if is_anomalous {
            let sample = generate_pseudo_anomaly(&cloud, category.anomaly_patches, category.anomaly_beta_range, &mut rng)?;
            let labels = sample.point_labels();
            test.push(TestInstance { cloud: sample.cloud, label: LabeledInstance::new(Some(labels))? });
            draws.push(Some(sample.draw));
        } else {
            let labels = vec![false; cloud.len()];
            test.push(TestInstance { cloud, label: LabeledInstance::new(Some(labels))? });
            draws.push(None);
        }
    }
    Ok(Benchmark { category: category.clone(), train, test, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn small(shape: Shape) -> SynthCategory {
        SynthCategory { points: 600, test_count: 6, anomaly_patches: 16, ..SynthCategory::new(shape, 3) }
    }

    #[test]
    fn sphere_points_and_normals() {
        let cat = small(Shape::Sphere { radius: 1.0 });
        let c = sample_shape(&cat, &mut stream_rng(1, Stream::BenchTrain)).unwrap();
        let ns = c.normals().unwrap();
        for (p, n) in c.points().iter().zip(ns) {
            let r = p.norm();
            assert!((0.98 - 1e-12..=1.02 + 1e-12).contains(&r));
            assert!((*p / r - *n).norm() < 1e-12);
        }
    }

    #[test]
    fn cylinder_side_normals_are_radial() {
        let cat = small(Shape::Cylinder { radius: 0.5, height: 1.6 });
        let c = sample_shape(&cat, &mut stream_rng(1, Stream::BenchTrain)).unwrap();
        let axis = Vec3::new(0.0, 0.0, 1.0);
        let side: Vec<_> = c.normals().unwrap().iter().filter(|n| n.z.abs() < 0.5).collect();
        assert!(side.len() > 300);
        for n in side {
            assert!(n.dot(axis).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_and_capsule_normals_are_unit_and_outward() {
        for shape in [Shape::Torus { major: 1.0, minor: 0.35 }, Shape::Capsule { radius: 0.45, length: 1.0 }] {
            let c = sample_shape(&small(shape), &mut stream_rng(2, Stream::BenchTrain)).unwrap();
            let radial = |q: &Vec3| Vec3::new(q.x, q.y, 0.0).norm();
            let (rmin, rmax) = c.points().iter().map(radial).fold((f64::MAX, 0.0f64), |(a, b), r| (a.min(r), b.max(r)));
            let tube_centre = (rmin + rmax) / 2.0;
            for (&p, n) in c.points().iter().zip(c.normals().unwrap()) {
                assert!((n.norm() - 1.0).abs() < 1e-12);
                // Nearest skeleton point: tube centre circle or capsule axis.
                let core = match shape {
                    Shape::Torus { .. } => Vec3::new(p.x, p.y, 0.0).normalized().unwrap() * tube_centre,
                    _ => Vec3::new(0.0, 0.0, p.z.clamp(-0.5, 0.5)),
                };
                assert!(n.dot(p - core) > 0.0);
            }
            assert_eq!(c.len(), 600);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cat = small(Shape::Sphere { radius: 1.0 });
        let a = sample_shape(&cat, &mut stream_rng(5, Stream::BenchTrain)).unwrap();
        let b = sample_shape(&cat, &mut stream_rng(5, Stream::BenchTrain)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_shapes_rejected() {
        let cat = small(Shape::Torus { major: 0.2, minor: 0.5 });
        assert!(sample_shape(&cat, &mut stream_rng(5, Stream::BenchTrain)).is_err());
    }

    #[test]
    fn torus_angle_inverts_cdf() {
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            let t = torus_angle(u, 1.0, 0.35);
            let f = (t + 0.35 * libm::sin(t)) / TAU;
            assert!((f - u).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn allot_sums_to_n() {
        assert_eq!(allot(10, &[1.0, 1.0, 1.0]).iter().sum::<usize>(), 10);
        assert_eq!(allot(7, &[2.0, 1.0]), [5, 2]);
    }
}
