//! Model checkpoints and loss histories.
//!
//! A checkpoint is line-oriented text:
//!
//! ```text
//! ptoffset-checkpoint 1
//! input 32
//! hidden 64
//! voxel_size 0.03
//! neighbours 16
//! block w1 64 32
//! ...                      one `block name rows cols` line per parameter block
//! values 4419
//! 0.0123...                one value per line, row-major, blocks in order
//! ```
//!
//! Values use the shortest decimal form that parses back to the same `f64`,
//! so save/load is lossless.

use std::fmt::Write as _;

use ptoffset_core::loss::LossBreakdown;
use ptoffset_core::{FeatureConfig, OffsetNet};

use crate::error::{Error, Result};

const MAGIC: &str = "ptoffset-checkpoint 1";

/// A trained network together with the feature settings it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: OffsetNet,
    pub features: FeatureConfig,
}

pub fn write_checkpoint(ckpt: &Checkpoint) -> String {
    let net = &ckpt.net;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "input {}", net.input_dim());
    let _ = writeln!(out, "hidden {}", net.hidden_dim());
    let _ = writeln!(out, "voxel_size {}", ckpt.features.voxel_size);
    let _ = writeln!(out, "neighbours {}", ckpt.features.neighbours);
    for (name, rows, cols) in net.block_shapes() {
        let _ = writeln!(out, "block {name} {rows} {cols}");
    }
    let _ = writeln!(out, "values {}", net.param_count());
    for v in net.params() {
        let _ = writeln!(out, "{v}");
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner.next().map(|(i, l)| (i + 1, l.trim())).ok_or_else(|| Error::parse("checkpoint", 0, "unexpected end of file"))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, text) = self.next()?;
        let value = text
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::parse("checkpoint", line, format!("expected '{key} <value>'")))?;
        value.parse().map_err(|_| Error::parse("checkpoint", line, format!("bad {key} value {value:?}")))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse("checkpoint", 0, "not UTF-8 text"))?;
    let mut lines = Lines { inner: text.lines().enumerate() };
    if lines.next()?.1 != MAGIC {
        return Err(Error::parse("checkpoint", 1, "not a ptoffset checkpoint"));
    }
    let input: usize = lines.keyed("input")?;
    let hidden: usize = lines.keyed("hidden")?;
    let voxel_size: f64 = lines.keyed("voxel_size")?;
    let neighbours: usize = lines.keyed("neighbours")?;
    let expected = OffsetNet::zeros(input, hidden)?.block_shapes();
    for (name, rows, cols) in &expected {
        let (line, text) = lines.next()?;
        if text != format!("block {name} {rows} {cols}") {
            return Err(Error::parse("checkpoint", line, format!("expected block {name} {rows}x{cols}, found {text:?}")));
        }
    }
    let count: usize = lines.keyed("values")?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, text) = lines.next()?;
        params.push(text.parse().map_err(|_| Error::parse("checkpoint", line, format!("bad value {text:?}")))?);
    }
    let net = OffsetNet::from_params(input, hidden, params)?;
    net.check_finite()?;
    Ok(Checkpoint { net, features: FeatureConfig { voxel_size, neighbours } })
}

/// `epoch,l_dist,l_dir,l_off`, one row per epoch.
pub fn write_history(history: &[LossBreakdown]) -> String {
    let mut out = String::from("epoch,l_dist,l_dir,l_off\n");
    for (epoch, l) in history.iter().enumerate() {
        let _ = writeln!(out, "{epoch},{},{},{}", l.l_dist, l.l_dir, l.l_off);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ptoffset_core::rng::{stream_rng, Stream};

    #[test]
    fn round_trip_is_exact() {
        let net = OffsetNet::new(5, 4, &mut stream_rng(9, Stream::Init)).unwrap();
        let ckpt = Checkpoint { net, features: FeatureConfig { voxel_size: 0.05, neighbours: 8 } };
        let text = write_checkpoint(&ckpt);
        assert_eq!(parse_checkpoint(text.as_bytes()).unwrap(), ckpt);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = OffsetNet::zeros(3, 2).unwrap();
        let text = write_checkpoint(&Checkpoint { net, features: FeatureConfig::default() }).replace("hidden 2", "hidden 3");
        assert!(matches!(parse_checkpoint(text.as_bytes()), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn history_rows() {
        let h = [LossBreakdown::new(0.5, -0.25)];
        assert_eq!(write_history(&h), "epoch,l_dist,l_dir,l_off\n0,0.5,-0.25,0.25\n");
    }
}
