//! Command-line interface.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ptoffset_core::augment::{generate_pseudo_anomaly, generate_random_direction_anomaly};
use ptoffset_core::cloud::normalize;
use ptoffset_core::eval::{
    evaluate_scores, patch_sweep, robustness_sweep, score_all, CategoryMetrics, EvalReport, LabeledInstance,
    MethodComparison, Metrics, PointAggregation, TestInstance,
};
use ptoffset_core::rng::{stream_rng, Stream};
use ptoffset_core::score::score_instance;
use ptoffset_core::synth::build_benchmark;
use ptoffset_core::train::train_with_progress;
use ptoffset_core::{PointCloud, Variant};

use crate::checkpoint::{parse_checkpoint, write_checkpoint, write_history, Checkpoint};
use crate::config::{RunConfig, TrainSection, OUTPUT_ENV};
use crate::error::{Error, Result};
use crate::files::{read_benchmark, read_bytes, read_cloud, read_train_dir, write_atomic, write_benchmark, write_manifest};
use crate::formats::{sig6, write_mask_csv, write_offsets_csv, write_ply, write_score_csv};

#[derive(Debug, Parser)]
#[command(name = "ptoffset", version, about = "Point-cloud anomaly detection by point-offset prediction")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUTPUT_ENV)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark directory.
    Bench(BenchArgs),
    /// Write one pseudo-anomalous copy of a cloud with its offsets and mask.
    Augment(AugmentArgs),
    /// Train an offset predictor on normal clouds.
    Train(TrainArgs),
    /// Score one cloud and write a per-point heatmap.
    Score(ScoreArgs),
    /// Evaluate a model on one or more benchmark directories.
    Eval(EvalArgs),
    /// Train and evaluate one model per patch count.
    SweepPatches(SweepPatchesArgs),
    /// Evaluate a model under increasing Gaussian noise.
    SweepNoise(SweepNoiseArgs),
    /// Train and compare the four loss/augmentation variants.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// sphere, cylinder, torus or capsule.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub train_count: Option<usize>,
    #[arg(long)]
    pub test_count: Option<usize>,
    /// Seed of the test split only; defaults to the master seed.
    #[arg(long)]
    pub test_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Source cloud (.obj or .ply).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub patches: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Move the patch along one random direction instead of its normals.
    #[arg(long)]
    pub random_direction: bool,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    /// Start from the reduced desk schedule (150 epochs, batch 8, 2x replication).
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub replication: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patches: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    #[arg(long)]
    pub neighbours: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// full, dist_only, dir_only or random_direction.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s:?} (full, dist_only, dir_only, random_direction)"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Benchmark directory; its `train/` clouds are used.
    #[arg(long, conflicts_with = "train_dir", required_unless_present = "train_dir")]
    pub bench: Option<PathBuf>,
    /// Directory of normal training clouds (.obj or .ply).
    #[arg(long)]
    pub train_dir: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Print the mean loss every this many epochs (0 for silence).
    #[arg(long, default_value_t = 0)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Cloud to score (.obj or .ply).
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalFlags {
    /// pooled or per_instance.
    #[arg(long, value_parser = parse_aggregation)]
    pub point_aggregation: Option<PointAggregation>,
}

fn parse_aggregation(s: &str) -> std::result::Result<PointAggregation, String> {
    match s {
        "pooled" => Ok(PointAggregation::Pooled),
        "per_instance" => Ok(PointAggregation::PerInstance),
        _ => Err(format!("unknown aggregation {s:?} (pooled, per_instance)")),
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Benchmark directories, one category each.
    #[arg(long, required = true, num_args = 1..)]
    pub bench: Vec<PathBuf>,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Debug, Args)]
pub struct SweepPatchesArgs {
    #[arg(long)]
    pub bench: PathBuf,
    /// Patch counts to train with.
    #[arg(long = "patch-counts", value_delimiter = ',')]
    pub patch_counts: Option<Vec<usize>>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct SweepNoiseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    /// Noise standard deviations.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Benchmark directories, one category each.
    #[arg(long, required = true, num_args = 1..)]
    pub bench: Vec<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub eval: EvalFlags,
}

impl TrainFlags {
    fn apply(&self, section: &mut TrainSection) {
        if self.desk {
            let desk = TrainSection::desk();
            section.epochs = desk.epochs;
            section.batch_size = desk.batch_size;
            section.replication = desk.replication;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { section.$field = v; })*};
        }
        set!(epochs, batch_size, replication, lr, patches, beta_min, beta_max, voxel_size, neighbours, hidden, variant);
    }
}

/// Resolve the effective configuration: file, then flags. `--out` (or the
/// environment variable, through clap) replaces `output_dir`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{}: not UTF-8", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match &cli.command {
        Command::Bench(a) => {
            if let Some(v) = &a.shape {
                cfg.bench.shape = v.clone();
            }
            if let Some(v) = a.points {
                cfg.bench.points = v;
            }
            if let Some(v) = a.train_count {
                cfg.bench.train_count = v;
            }
            if let Some(v) = a.test_count {
                cfg.bench.test_count = v;
            }
            if a.test_seed.is_some() {
                cfg.bench.test_seed = a.test_seed;
            }
        }
        Command::Augment(a) => {
            if let Some(v) = a.patches {
                cfg.train.patches = v;
            }
            if let Some(v) = a.beta_min {
                cfg.train.beta_min = v;
            }
            if let Some(v) = a.beta_max {
                cfg.train.beta_max = v;
            }
            if a.random_direction {
                cfg.train.variant = Variant::RandomDirection;
            }
        }
        Command::Train(a) => a.train.apply(&mut cfg.train),
        Command::SweepPatches(a) => {
            a.train.apply(&mut cfg.train);
            if let Some(v) = &a.patch_counts {
                cfg.eval.patch_counts = v.clone();
            }
        }
        Command::Ablate(a) => {
            a.train.apply(&mut cfg.train);
            if let Some(v) = a.eval.point_aggregation {
                cfg.eval.point_aggregation = v;
            }
        }
        Command::Eval(a) => {
            if let Some(v) = a.eval.point_aggregation {
                cfg.eval.point_aggregation = v;
            }
        }
        Command::SweepNoise(a) => {
            if let Some(v) = &a.sigmas {
                cfg.eval.sigmas = v.clone();
            }
            if let Some(v) = a.eval.point_aggregation {
                cfg.eval.point_aggregation = v;
            }
        }
        Command::Score(_) => {}
    }
    Ok(cfg)
}

/// Collects written files relative to the output directory.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn put(&mut self, rel: impl Into<PathBuf>, contents: &[u8]) -> Result<()> {
        let rel = rel.into();
        write_atomic(&self.dir.join(&rel), contents)?;
        self.files.push(rel);
        Ok(())
    }
}

/// Run one command, printing progress and summaries to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    run_to(cli, &mut std::io::stdout().lock())
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {
        $w.write_fmt(format_args!($($arg)*)).map_err(|e| Error::io("<output>", e))?
    };
}

/// Run one command, writing progress and summaries to `w`.
pub fn run_to(cli: &Cli, w: &mut dyn std::io::Write) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let out_dir = cfg.output_dir.clone();
    let mut out = Outputs::new(&out_dir);
    let normal_k = cfg.eval.normal_neighbours;
    match &cli.command {
        Command::Bench(_) => {
            let category = cfg.bench.to_category(cfg.seed)?;
            let bench = build_benchmark(&category)?;
            out.files = write_benchmark(&out_dir, &bench)?;
            let anomalous = bench.test.iter().filter(|t| t.label.object_label).count();
            say!(w, "{}: {} train, {} test ({anomalous} anomalous)\n", category.name, bench.train.len(), bench.test.len());
            write_manifest(&out_dir, "bench", &cfg, &[], &out.files)
        }
        Command::Augment(a) => {
            let source = normalize(&read_cloud(&a.input, normal_k)?.cloud)?;
            let mut rng = stream_rng(cfg.seed, Stream::Augment);
            let range = (cfg.train.beta_min, cfg.train.beta_max);
            let sample = if cfg.train.variant == Variant::RandomDirection {
                generate_random_direction_anomaly(&source, cfg.train.patches, range, &mut rng)?
            } else {
                generate_pseudo_anomaly(&source, cfg.train.patches, range, &mut rng)?
            };
            out.put("augmented.ply", write_ply(&sample.cloud, None)?.as_bytes())?;
            out.put("offsets.csv", write_offsets_csv(&sample.gt_offsets).as_bytes())?;
            out.put("mask.csv", write_mask_csv(&sample.anomaly_mask).as_bytes())?;
            let d = sample.draw;
            let displaced = sample.anomaly_mask.iter().filter(|&&m| m).count();
            say!(w, "patch {} ({displaced} points), {:?}, beta {}\n", d.patch_id, d.alpha, sig6(d.beta));
            write_manifest(&out_dir, "augment", &cfg, &[&a.input], &out.files)
        }
        Command::Train(a) => {
            let (input, train_set) = match (&a.bench, &a.train_dir) {
                (Some(b), _) => (b.as_path(), read_train_dir(&b.join("train"), normal_k)?),
                (None, Some(d)) => (d.as_path(), read_train_dir(d, normal_k)?),
                (None, None) => return Err(Error::Usage("train needs --bench or --train-dir".into())),
            };
            let train_cfg = cfg.train.to_core(cfg.seed)?;
            let log_every = a.log_every;
            let outcome = train_with_progress(&train_set, &train_cfg, |epoch, l| {
                if log_every > 0 && (epoch % log_every == 0 || epoch + 1 == train_cfg.epochs) {
                    let _ = writeln!(w, "epoch {epoch}: l_dist {} l_dir {} l_off {}", sig6(l.l_dist), sig6(l.l_dir), sig6(l.l_off));
                }
            })?;
            let ckpt = Checkpoint { net: outcome.net, features: train_cfg.features };
            out.put("model.ckpt", write_checkpoint(&ckpt).as_bytes())?;
            out.put("loss_history.csv", write_history(&outcome.history).as_bytes())?;
            if let Some(last) = outcome.history.last() {
                say!(w, "trained {} epochs on {} clouds; final l_off {}\n", train_cfg.epochs, train_set.len(), sig6(last.l_off));
            }
            write_manifest(&out_dir, "train", &cfg, &[input], &out.files)
        }
        Command::Score(a) => {
            let ckpt = load_model(&a.model)?;
            let loaded = read_cloud(&a.input, normal_k)?;
            let scored = score_instance(&ckpt.net, &loaded.cloud, &ckpt.features)?;
            let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
            out.put(format!("{stem}_heatmap.ply"), write_ply(&loaded.cloud, Some(&scored.point_scores))?.as_bytes())?;
            out.put(format!("{stem}_scores.csv"), write_score_csv(&loaded.cloud, &scored.point_scores)?.as_bytes())?;
            say!(w, "{stem}: object score {}\n", sig6(scored.object_score));
            write_manifest(&out_dir, "score", &cfg, &[&a.model, &a.input], &out.files)
        }
        Command::Eval(a) => {
            let ckpt = load_model(&a.model)?;
            let mut categories = Vec::new();
            let mut instance_rows = String::from("category,instance,object_score,object_label\n");
            for dir in &a.bench {
                let name = category_name(dir);
                let test = read_benchmark(dir, normal_k)?.test;
                let scored = score_all(&ckpt.net, &ckpt.features, &test)?;
                for (i, (s, t)) in scored.iter().zip(&test).enumerate() {
                    let _ = writeln!(instance_rows, "{name},{i},{},{}", sig6(s.object_score), u8::from(t.label.object_label));
                }
                let labels: Vec<LabeledInstance> = test.iter().map(|t| t.label.clone()).collect();
                let metrics = evaluate_scores(&scored, &labels, cfg.eval.point_aggregation)?;
                categories.push(CategoryMetrics { category: name, metrics });
            }
            let report = EvalReport::from_categories(categories)?;
            out.put("eval.csv", eval_csv(&report).as_bytes())?;
            out.put("instance_scores.csv", instance_rows.as_bytes())?;
            let summary = eval_summary(&report);
            say!(w, "{summary}");
            out.put("summary.txt", summary.as_bytes())?;
            let mut inputs: Vec<&Path> = vec![&a.model];
            inputs.extend(a.bench.iter().map(PathBuf::as_path));
            write_manifest(&out_dir, "eval", &cfg, &inputs, &out.files)
        }
        Command::SweepPatches(a) => {
            let files = read_benchmark(&a.bench, normal_k)?;
            let train_cfg = cfg.train.to_core(cfg.seed)?;
            let rows = patch_sweep(&files.train, &files.test, &cfg.eval.patch_counts, &train_cfg)?;
            let mut csv = String::from("patches,object_auc_roc,point_auc_roc\n");
            for r in &rows {
                let _ = writeln!(csv, "{},{},{}", r.patches, sig6(r.object_auc_roc), opt(r.point_auc_roc));
            }
            say!(w, "{csv}");
            out.put("patch_sweep.csv", csv.as_bytes())?;
            write_manifest(&out_dir, "sweep-patches", &cfg, &[&a.bench], &out.files)
        }
        Command::SweepNoise(a) => {
            let ckpt = load_model(&a.model)?;
            let test = read_benchmark(&a.bench, normal_k)?.test;
            let rows = robustness_sweep(&ckpt.net, &ckpt.features, &test, &cfg.eval.sigmas, cfg.seed, cfg.eval.point_aggregation)?;
            let mut csv = String::from("sigma,object_auc_roc,object_auc_pr,point_auc_roc\n");
            for r in &rows {
                let m = &r.metrics;
                let _ = writeln!(csv, "{},{},{},{}", sig6(r.sigma), sig6(m.object_auc_roc), sig6(m.object_auc_pr), opt(m.point_auc_roc));
            }
            say!(w, "{csv}");
            out.put("robustness.csv", csv.as_bytes())?;
            write_manifest(&out_dir, "sweep-noise", &cfg, &[&a.model, &a.bench], &out.files)
        }
        Command::Ablate(a) => {
            let benches = a
                .bench
                .iter()
                .map(|d| Ok((category_name(d), read_benchmark(d, normal_k)?)))
                .collect::<Result<Vec<_>>>()?;
            let mut reports = Vec::new();
            for variant in Variant::ALL {
                let section = TrainSection { variant, ..cfg.train.clone() };
                let train_cfg = section.to_core(cfg.seed)?;
                let mut per_category = Vec::new();
                for (name, files) in &benches {
                    let outcome = ptoffset_core::train::train(&files.train, &train_cfg)?;
                    let ckpt = Checkpoint { net: outcome.net, features: train_cfg.features };
                    out.put(format!("models/{name}_{}.ckpt", variant.name()), write_checkpoint(&ckpt).as_bytes())?;
                    per_category.push(evaluate_files(&ckpt, &files.test, cfg.eval.point_aggregation)?);
                }
                reports.push(per_category);
            }
            let comparison = MethodComparison::new(
                Variant::ALL.iter().map(|v| v.name().to_string()).collect(),
                benches.iter().map(|(n, _)| n.clone()).collect(),
                reports,
            )?;
            let csv = ablation_csv(&comparison);
            say!(w, "{csv}");
            out.put("ablation.csv", csv.as_bytes())?;
            let inputs: Vec<&Path> = a.bench.iter().map(PathBuf::as_path).collect();
            write_manifest(&out_dir, "ablate", &cfg, &inputs, &out.files)
        }
    }
}

fn load_model(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(&read_bytes(path)?)
}

fn category_name(dir: &Path) -> String {
    dir.file_name().and_then(|s| s.to_str()).unwrap_or("category").to_string()
}

fn evaluate_files(ckpt: &Checkpoint, test: &[TestInstance], aggregation: PointAggregation) -> Result<Metrics> {
    let scored = score_all(&ckpt.net, &ckpt.features, test)?;
    let labels: Vec<LabeledInstance> = test.iter().map(|t| t.label.clone()).collect();
    Ok(evaluate_scores(&scored, &labels, aggregation)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

fn eval_csv(report: &EvalReport) -> String {
    let mut csv = String::from("category,object_auc_roc,object_auc_pr,point_auc_roc\n");
    for c in &report.categories {
        let m = &c.metrics;
        let _ = writeln!(csv, "{},{},{},{}", c.category, sig6(m.object_auc_roc), sig6(m.object_auc_pr), opt(m.point_auc_roc));
    }
    let _ = writeln!(csv, "mean,{},{},{}", sig6(report.object_auc_roc), sig6(report.object_auc_pr), opt(report.point_auc_roc));
    csv
}

fn eval_summary(report: &EvalReport) -> String {
    let mut s = String::new();
    for c in &report.categories {
        let m = &c.metrics;
        let _ = writeln!(
            s,
            "{:<16} object AUC-ROC {:.4}  object AUC-PR {:.4}  point AUC-ROC {}",
            c.category,
            m.object_auc_roc,
            m.object_auc_pr,
            m.point_auc_roc.map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into())
        );
    }
    if report.categories.len() > 1 {
        let _ = writeln!(
            s,
            "{:<16} object AUC-ROC {:.4}  object AUC-PR {:.4}  point AUC-ROC {}",
            "mean",
            report.object_auc_roc,
            report.object_auc_pr,
            report.point_auc_roc.map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into())
        );
    }
    s
}

fn ablation_csv(c: &MethodComparison) -> String {
    let mut csv = String::from("variant,object_auc_roc,object_auc_pr,point_auc_roc,mean_rank\n");
    for ((name, per_category), rank) in c.methods.iter().zip(&c.reports).zip(&c.mean_rank) {
        let n = per_category.len() as f64;
        let roc = per_category.iter().map(|m| m.object_auc_roc).sum::<f64>() / n;
        let pr = per_category.iter().map(|m| m.object_auc_pr).sum::<f64>() / n;
        let point: Option<Vec<f64>> = per_category.iter().map(|m| m.point_auc_roc).collect();
        let point = point.map(|p| p.iter().sum::<f64>() / n);
        let _ = writeln!(csv, "{name},{},{},{},{}", sig6(roc), sig6(pr), opt(point), sig6(*rank));
    }
    csv
}

/// Load a cloud for library callers that want the same fallback as the CLI.
pub fn load_cloud(path: &Path, normal_k: usize) -> Result<PointCloud> {
    Ok(read_cloud(path, normal_k)?.cloud)
}
