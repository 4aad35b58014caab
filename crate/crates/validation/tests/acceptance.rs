//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cli_driver::run_cli;
use ptoffset::core::augment::{generate_pseudo_anomaly, partition_patches, patch_weights, Sign};
use ptoffset::core::cloud::{normalize, Rotation};
use ptoffset::core::eval::{evaluate_model, robustness_sweep, Metrics, PointAggregation, DEFAULT_SIGMAS};
use ptoffset::core::features::{FeatureMatrix, FEATURE_DIM};
use ptoffset::core::loss::{export_attention, loss_and_grad, LossTerms};
use ptoffset::core::metrics::auc_roc;
use ptoffset::core::rng::{standard_normal, stream_rng, substream_rng, Stream};
use ptoffset::core::synth::{build_benchmark, sample_shape, Benchmark, SynthCategory};
use ptoffset::core::train::train;
use ptoffset::core::{OffsetNet, TrainConfig, Variant, Vec3};
use rand::Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Trained models and their benchmarks, built on first use.
#[derive(Default)]
struct Models {
    benches: BTreeMap<u64, Benchmark>,
    nets: BTreeMap<(u64, &'static str), OffsetNet>,
}

impl Models {
    fn bench(&mut self, seed: u64) -> &Benchmark {
        self.benches.entry(seed).or_insert_with(|| build_benchmark(&SynthCategory::sphere(seed)).unwrap())
    }

    fn net(&mut self, seed: u64, variant: Variant) -> OffsetNet {
        if let Some(n) = self.nets.get(&(seed, variant.name())) {
            return n.clone();
        }
        let cfg = TrainConfig { seed, variant, ..TrainConfig::desk() };
        let net = train(&self.bench(seed).train, &cfg).unwrap().net;
        self.nets.insert((seed, variant.name()), net.clone());
        net
    }

    fn metrics(&mut self, seed: u64, variant: Variant) -> Metrics {
        let net = self.net(seed, variant);
        let cfg = TrainConfig::desk();
        evaluate_model(&net, &cfg.features, &self.bench(seed).test, PointAggregation::Pooled).unwrap()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut rng = substream_rng(seed, Stream::Init, 77);
        let n = rng.gen_range(4..=16);
        let net = OffsetNet::new(FEATURE_DIM, 8, &mut rng).unwrap();
        let data = (0..n * FEATURE_DIM).map(|_| standard_normal(&mut rng)).collect();
        let f = FeatureMatrix::from_vec(n, FEATURE_DIM, data).unwrap();
        let gt: Vec<Vec3> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Vec3::ZERO
                } else {
                    Vec3::new(standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng)) * 0.1
                }
            })
            .collect();
        let loss = |net: &OffsetNet| loss_and_grad(net, &f, &gt, LossTerms::FULL).unwrap().0.l_off;
        let (_, g) = loss_and_grad(&net, &f, &gt, LossTerms::FULL).unwrap();
        for i in 0..net.param_count() {
            let theta = net.params()[i];
            let h = 1e-5 * theta.abs().max(1.0);
            let mut plus = net.clone();
            plus.params_mut()[i] = theta + h;
            let mut minus = net.clone();
            minus.params_mut()[i] = theta - h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let analytic = g.as_slice()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            if rel >= 1e-4 {
                failures.push(format!("seed {seed} {}", net.param_name(i)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 10.0,
        format!("20 instances, worst relative error {worst:.2e} (< 1e-4), {} mismatches, {secs:.2} s (< 10 s)", failures.len()),
    )
}

fn norm_as_suite() -> Outcome {
    let start = Instant::now();
    let mut worst_magnitude: f64 = 0.0;
    let mut worst_equivariance: f64 = 0.0;
    let mut violations = 0usize;
    for trial in 0..100u64 {
        let cat = SynthCategory { points: 400, ..SynthCategory::sphere(trial) };
        let mut rng = substream_rng(trial, Stream::Augment, 0);
        let cloud = normalize(&sample_shape(&cat, &mut rng).unwrap()).unwrap();
        let patches = rng.gen_range(2..=64);
        let sample = generate_pseudo_anomaly(&cloud, patches, (0.06, 0.12), &mut substream_rng(trial, Stream::Augment, 1)).unwrap();
        let partition = partition_patches(&cloud, patches, &mut substream_rng(trial, Stream::Augment, 1)).unwrap();
        let w = patch_weights(&cloud, &partition, sample.draw.patch_id).unwrap();
        let mut weight = vec![None; cloud.len()];
        for (&i, &wi) in w.members.iter().zip(&w.w) {
            weight[i] = Some(wi);
        }
        let normals = cloud.normals().unwrap();
        for i in 0..cloud.len() {
            let off = sample.gt_offsets[i];
            let moved = sample.cloud.points()[i] - cloud.points()[i];
            if (moved - off).max_abs() > 1e-12 {
                violations += 1;
            }
            match weight[i] {
                Some(wi) => {
                    worst_magnitude = worst_magnitude.max((off.norm() - (1.0 - wi) * sample.draw.beta).abs());
                    let sign_ok = off.norm() <= 1e-9 || ((off.dot(normals[i]) > 0.0) == (sample.draw.alpha == Sign::Bulge));
                    if !sample.anomaly_mask[i] || !sign_ok {
                        violations += 1;
                    }
                }
                None => {
                    if sample.anomaly_mask[i] || off != Vec3::ZERO {
                        violations += 1;
                    }
                }
            }
        }
        let labels = sample.point_labels();
        if labels.iter().zip(&sample.anomaly_mask).any(|(&l, &m)| l && !m) || !labels.iter().any(|&l| l) {
            violations += 1;
        }

        let r = Rotation::random(&mut substream_rng(trial, Stream::Train, 0));
        let rotated = generate_pseudo_anomaly(&r.rotate_cloud(&cloud), patches, (0.06, 0.12), &mut substream_rng(trial, Stream::Augment, 1)).unwrap();
        if rotated.anomaly_mask != sample.anomaly_mask || rotated.draw != sample.draw {
            violations += 1;
        }
        for (a, b) in sample.gt_offsets.iter().zip(&rotated.gt_offsets) {
            worst_equivariance = worst_equivariance.max((r.apply(*a) - *b).max_abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_magnitude <= 1e-9 && worst_equivariance <= 1e-9 && violations == 0 && secs < 5.0,
        format!(
            "100 trials, magnitude error {worst_magnitude:.1e}, rotation error {worst_equivariance:.1e} (<= 1e-9), \
             {violations} sign/mask violations, {secs:.2} s (< 5 s)"
        ),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = stream_rng(2024, Stream::Noise);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..40) as f64) / 40.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += match scores[i].total_cmp(&scores[j]) {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        worst = worst.max((auc_roc(&scores, &labels).unwrap() - wins / pairs).abs());
    }
    let example = auc_roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    outcome(worst <= 1e-12 && example == 0.75, format!("200 instances, worst deviation {worst:.1e} (<= 1e-12); worked example {example}"))
}

fn end_to_end(models: &mut Models) -> Outcome {
    let start = Instant::now();
    let m = models.metrics(0, Variant::Full);
    let secs = start.elapsed().as_secs_f64();
    let point = m.point_auc_roc.unwrap_or(0.0);
    outcome(
        m.object_auc_roc >= 0.90 && point >= 0.85 && secs < 300.0,
        format!("sphere, desk preset: object AUC-ROC {:.4} (>= 0.90), point AUC-ROC {point:.4} (>= 0.85), {secs:.0} s (< 300 s)", m.object_auc_roc),
    )
}

fn ablation(models: &mut Models) -> Outcome {
    let mut rd_gap = Vec::new();
    let mut dist_gap = Vec::new();
    let mut cells = Vec::new();
    for seed in SEEDS {
        let full = models.metrics(seed, Variant::Full).object_auc_roc;
        let rd = models.metrics(seed, Variant::RandomDirection).object_auc_roc;
        let dist = models.metrics(seed, Variant::DistOnly).object_auc_roc;
        rd_gap.push(rd - full);
        dist_gap.push(full - dist);
        cells.push(format!("seed {seed}: full {full:.3} random_direction {rd:.3} dist_only {dist:.3}"));
    }
    let rd = median(rd_gap);
    let dist = median(dist_gap);
    outcome(
        rd <= 0.02 && dist >= 0.15,
        format!(
            "median random_direction - full {rd:+.3} (<= +0.02), median full - dist_only {dist:+.3} (>= 0.15) [{}]",
            cells.join("; ")
        ),
    )
}

fn saliency(models: &mut Models) -> Outcome {
    let net = models.net(0, Variant::Full);
    let cfg = TrainConfig::desk();
    let cat = SynthCategory::sphere(0);
    let mut hits = 0;
    for i in 0..50u64 {
        let mut rng = substream_rng(4242, Stream::BenchTest, i);
        let cloud = normalize(&sample_shape(&cat, &mut rng).unwrap()).unwrap();
        let sample = generate_pseudo_anomaly(&cloud, cfg.patches, cfg.beta_range, &mut rng).unwrap();
        let f = cfg.features.compute(&sample.cloud).unwrap();
        let s = export_attention(&net, &f, &sample.gt_offsets).unwrap();
        let mean = |want: bool| {
            let v: Vec<f64> = s.iter().zip(&sample.anomaly_mask).filter(|(_, &m)| m == want).map(|(x, _)| *x).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        if mean(true) > mean(false) {
            hits += 1;
        }
    }
    outcome(hits >= 45, format!("{hits}/50 samples with higher mean saliency on displaced points (>= 45)"))
}

fn robustness(models: &mut Models) -> Outcome {
    let mut gaps = Vec::new();
    let mut cells = Vec::new();
    for seed in SEEDS {
        let net = models.net(seed, Variant::Full);
        let rows = robustness_sweep(&net, &TrainConfig::desk().features, &models.bench(seed).test, &DEFAULT_SIGMAS, seed, PointAggregation::Pooled).unwrap();
        let clean = rows[0].metrics.object_auc_roc;
        let noisy = rows.last().unwrap().metrics.object_auc_roc;
        gaps.push((clean - noisy).abs());
        let trend: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.metrics.object_auc_roc)).collect();
        cells.push(format!("seed {seed}: {}", trend.join(" / ")));
    }
    let gap = median(gaps);
    outcome(gap <= 0.10, format!("median |clean - sigma 0.005| object AUC-ROC {gap:.3} (<= 0.10) [{}]", cells.join("; ")))
}

mod cli_driver {
    use clap::Parser;
    use ptoffset::cli::{run_to, Cli};

    pub fn run_cli(args: &[&str]) {
        let mut full = vec!["ptoffset"];
        full.extend_from_slice(args);
        let cli = Cli::try_parse_from(full).unwrap_or_else(|e| panic!("{e}"));
        run_to(&cli, &mut std::io::sink()).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let original = std::env::current_dir().unwrap();
    let small = ["--epochs", "2", "--batch-size", "4", "--replication", "1", "--patches", "16"];
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        fs::create_dir(&dir).unwrap();
        std::env::set_current_dir(&dir).unwrap();
        run_cli(&["--seed", "3", "--out", "bench", "bench", "--points", "300", "--test-count", "6"]);
        run_cli(&["--seed", "3", "--out", "augment", "augment", "--input", "bench/train/train_000.ply"]);
        let mut t = vec!["--seed", "3", "--out", "model", "train", "--bench", "bench"];
        t.extend_from_slice(&small);
        run_cli(&t);
        run_cli(&["--out", "score", "score", "--model", "model/model.ckpt", "--input", "bench/test/test_001.ply"]);
        run_cli(&["--out", "eval", "eval", "--model", "model/model.ckpt", "--bench", "bench"]);
        run_cli(&["--seed", "3", "--out", "noise", "sweep-noise", "--model", "model/model.ckpt", "--bench", "bench"]);
        let mut p = vec!["--seed", "3", "--out", "patches", "sweep-patches", "--bench", "bench", "--patch-counts", "8,16"];
        p.extend_from_slice(&small);
        run_cli(&p);
        let mut a = vec!["--seed", "3", "--out", "ablate", "ablate", "--bench", "bench"];
        a.extend_from_slice(&small);
        run_cli(&a);
        let mut files = BTreeMap::new();
        collect_files(&dir, &dir, &mut files);
        trees.push(files);
    }
    std::env::set_current_dir(original).unwrap();
    let (a, b) = (&trees[0], &trees[1]);
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .chain(b.keys().filter(|k| !a.contains_key(*k)).map(|k| k.display().to_string()))
        .collect();
    outcome(
        differing.is_empty() && a.len() > 20,
        format!("{} files from 8 subcommands compared across two runs, {} differ {:?}", a.len(), differing.len(), differing),
    )
}

fn main() {
    let mut models = Models::default();
    type Check<'a> = Box<dyn FnOnce(&mut Models) -> Outcome + 'a>;
    let checks: Vec<(&str, Check)> = vec![
        ("gradient oracle", Box::new(|_| gradient_oracle())),
        ("Norm-AS geometry suite", Box::new(|_| norm_as_suite())),
        ("metric oracle", Box::new(|_| metric_oracle())),
        ("end-to-end synthetic benchmark", Box::new(end_to_end)),
        ("ablation direction check", Box::new(ablation)),
        ("saliency check", Box::new(saliency)),
        ("robustness trend", Box::new(robustness)),
        ("determinism", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let o = check(&mut models);
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} criteria, {failed} failed", 8);
    if failed > 0 {
        std::process::exit(1);
    }
}
