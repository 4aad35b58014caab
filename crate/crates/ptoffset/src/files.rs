//! Filesystem access: atomic writes, cloud loading, benchmark directories
//! and run manifests.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ptoffset_core::cloud::estimate_normals;
use ptoffset_core::eval::{LabeledInstance, TestInstance};
use ptoffset_core::synth::Benchmark;
use ptoffset_core::PointCloud;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{parse_mask_csv, parse_obj, parse_ply, write_mask_csv, write_ply};

/// Write through a temporary file in the target directory, then rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// A loaded cloud and, for PLY heatmaps, its stored scores.
#[derive(Debug, Clone)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub scores: Option<Vec<f64>>,
    /// True when the file had no normals and they were estimated.
    pub estimated_normals: bool,
}

/// Load `.obj` or `.ply`; missing normals are estimated from `normal_k`
/// neighbours. The category tag is the file stem.
pub fn read_cloud(path: &Path, normal_k: usize) -> Result<LoadedCloud> {
    let bytes = read_bytes(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (mut cloud, scores) = match ext.as_deref() {
        Some("obj") => (parse_obj(&bytes)?, None),
        Some("ply") => {
            let p = parse_ply(&bytes)?;
            (p.cloud, p.scores)
        }
        _ => return Err(Error::Usage(format!("{}: expected a .obj or .ply file", path.display()))),
    };
    let estimated_normals = cloud.normals().is_none();
    if estimated_normals {
        cloud = estimate_normals(&cloud, normal_k.min(cloud.len()))?.cloud;
    }
    cloud.set_category(path.file_stem().and_then(|s| s.to_str()).unwrap_or(""));
    Ok(LoadedCloud { cloud, scores, estimated_normals })
}

/// Benchmark directory layout:
///
/// ```text
/// train/train_000.ply ...
/// test/test_000.ply ...
/// masks/test_000.csv ...      per-point 0/1 ground truth
/// labels.csv                  instance,file,object_label,mask_file
/// ```
pub fn write_benchmark(dir: &Path, bench: &Benchmark) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |rel: String, contents: &[u8]| -> Result<()> {
        write_atomic(&dir.join(&rel), contents)?;
        written.push(PathBuf::from(rel));
        Ok(())
    };
    for (i, cloud) in bench.train.iter().enumerate() {
        put(format!("train/train_{i:03}.ply"), write_ply(cloud, None)?.as_bytes())?;
    }
    let mut labels = String::from("instance,file,object_label,mask_file\n");
    for (i, t) in bench.test.iter().enumerate() {
        let file = format!("test/test_{i:03}.ply");
        let mask_file = format!("masks/test_{i:03}.csv");
        put(file.clone(), write_ply(&t.cloud, None)?.as_bytes())?;
        let mask = t.label.point_labels.clone().unwrap_or_else(|| vec![false; t.cloud.len()]);
        put(mask_file.clone(), write_mask_csv(&mask).as_bytes())?;
        labels.push_str(&format!("{i},{file},{},{mask_file}\n", u8::from(t.label.object_label)));
    }
    put("labels.csv".into(), labels.as_bytes())?;
    Ok(written)
}

/// Training clouds and labelled test instances read back from a benchmark
/// directory.
#[derive(Debug, Clone)]
pub struct BenchmarkFiles {
    pub train: Vec<PointCloud>,
    pub test: Vec<TestInstance>,
}

pub fn read_benchmark(dir: &Path, normal_k: usize) -> Result<BenchmarkFiles> {
    Ok(BenchmarkFiles { train: read_train_dir(&dir.join("train"), normal_k)?, test: read_labelled_test(dir, normal_k)? })
}

/// Every `.obj`/`.ply` file in `dir`, in file-name order.
pub fn read_train_dir(dir: &Path, normal_k: usize) -> Result<Vec<PointCloud>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ply" | "obj")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Usage(format!("{}: no .ply or .obj training clouds", dir.display())));
    }
    files.iter().map(|p| read_cloud(p, normal_k).map(|l| l.cloud)).collect()
}

fn read_labelled_test(dir: &Path, normal_k: usize) -> Result<Vec<TestInstance>> {
    let labels_path = dir.join("labels.csv");
    let text = String::from_utf8(read_bytes(&labels_path)?).map_err(|_| Error::parse("labels.csv", 0, "not UTF-8 text"))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "instance,file,object_label,mask_file")) => {}
        _ => return Err(Error::parse("labels.csv", 1, "unexpected header")),
    }
    let mut test = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let [_, file, object, mask_file] = fields.as_slice() else {
            return Err(Error::parse("labels.csv", i + 1, "expected 4 fields"));
        };
        let object = match *object {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse("labels.csv", i + 1, format!("object_label must be 0 or 1, found {other:?}"))),
        };
        let cloud = read_cloud(&dir.join(file), normal_k)?.cloud;
        let label = if mask_file.is_empty() {
            LabeledInstance::object_only(object)
        } else {
            let mask = parse_mask_csv(&read_bytes(&dir.join(mask_file))?)?;
            if mask.len() != cloud.len() {
                return Err(Error::parse("labels.csv", i + 1, format!("{mask_file} has {} rows for {} points", mask.len(), cloud.len())));
            }
            let label = LabeledInstance::new(Some(mask))?;
            if label.object_label != object {
                return Err(Error::parse("labels.csv", i + 1, "object_label disagrees with the point mask"));
            }
            label
        };
        test.push(TestInstance { cloud, label });
    }
    if test.is_empty() {
        return Err(Error::parse("labels.csv", 0, "no test instances"));
    }
    Ok(test)
}

/// Record of one command run. Holds no timestamps or absolute output paths,
/// so identical runs produce identical manifests.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub tool_version: &'a str,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: ManifestConfig<'a>,
}

/// The config snapshot minus `output_dir`.
#[derive(Debug, Serialize)]
pub struct ManifestConfig<'a> {
    pub train: &'a crate::config::TrainSection,
    pub bench: &'a crate::config::BenchSection,
    pub eval: &'a crate::config::EvalSection,
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, inputs: &[&Path], outputs: &[PathBuf]) -> Result<()> {
    let mut outputs: Vec<String> = outputs.iter().map(|p| p.to_string_lossy().into_owned()).collect();
    outputs.sort();
    let manifest = Manifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        inputs: inputs.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
        outputs,
        config: ManifestConfig { train: &cfg.train, bench: &cfg.bench, eval: &cfg.eval },
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join("manifest.toml"), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
