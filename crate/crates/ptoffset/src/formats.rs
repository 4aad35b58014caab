//! Text point-cloud formats: Wavefront OBJ (`v`/`vn` lines only), ASCII PLY
//! and per-point CSV tables.

use std::fmt::Write as _;

use ptoffset_core::{PointCloud, Vec3};

use crate::error::{Error, Result};

/// Normals this close to unit length are kept bit-for-bit, so that
/// parse -> write -> parse is a fixed point.
const UNIT_SLACK: f64 = 4.0 * f64::EPSILON;

fn unit(v: Vec3) -> Option<Vec3> {
    if (v.norm() - 1.0).abs() <= UNIT_SLACK {
        Some(v)
    } else {
        v.normalized()
    }
}

fn utf8<'a>(bytes: &'a [u8], what: &'static str) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::parse(what, 0, format!("not UTF-8 text: {e}")))
}

fn vec3<'a>(mut tokens: impl Iterator<Item = &'a str>, what: &'static str, line: usize) -> Result<Vec3> {
    let mut xyz = [0.0; 3];
    for c in &mut xyz {
        let tok = tokens.next().ok_or_else(|| Error::parse(what, line, "expected three coordinates"))?;
        *c = tok.parse().map_err(|_| Error::parse(what, line, format!("bad number {tok:?}")))?;
    }
    Ok(Vec3::from_array(xyz))
}

/// Parse OBJ vertices. Normals are attached only when there are exactly as
/// many `vn` lines as `v` lines; they are rescaled to unit length.
pub fn parse_obj(bytes: &[u8]) -> Result<PointCloud> {
    let text = utf8(bytes, "obj")?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => points.push(vec3(tokens, "obj", line)?),
            Some("vn") => {
                let n = vec3(tokens, "obj", line)?;
                normals.push(unit(n).ok_or_else(|| Error::parse("obj", line, "zero-length normal"))?);
            }
            _ => {}
        }
    }
    if points.is_empty() {
        return Err(ptoffset_core::Error::EmptyCloud.into());
    }
    let normals = (normals.len() == points.len()).then_some(normals);
    Ok(PointCloud::new(points, normals, "")?)
}

pub fn write_obj(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    for n in cloud.normals().unwrap_or(&[]) {
        let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
    }
    out
}

/// A PLY vertex table, optionally with a per-point `anomaly_score`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyCloud {
    pub cloud: PointCloud,
    pub scores: Option<Vec<f64>>,
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

/// Parse ASCII PLY. The `vertex` element must have `x y z`; `nx ny nz` and
/// `anomaly_score` are read when present, other properties and elements are
/// skipped.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyCloud> {
    let text = utf8(bytes, "ply")?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse("ply", 1, "missing 'ply' magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (line, raw) = lines.next().ok_or_else(|| Error::parse("ply", 0, "missing end_header"))?;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(Error::parse("ply", line, format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::parse("ply", line, "bad element count"))?;
                elements.push(Element { name: (*name).to_string(), count, properties: Vec::new() });
            }
            ["property", "list", .., name] | ["property", _, name] => {
                let el = elements.last_mut().ok_or_else(|| Error::parse("ply", line, "property before element"))?;
                let list = tokens[1] == "list";
                el.properties.push(if list { format!("list:{name}") } else { (*name).to_string() });
            }
            _ => return Err(Error::parse("ply", line, format!("unexpected header line {raw:?}"))),
        }
    }

    let mut result = None;
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next().ok_or_else(|| Error::parse("ply", 0, format!("truncated {} element", el.name)))?;
            }
            continue;
        }
        let col = |name: &str| el.properties.iter().position(|p| p == name);
        if el.properties.iter().any(|p| p.starts_with("list:")) {
            return Err(Error::parse("ply", 0, "list properties on vertices are not supported"));
        }
        let xyz = [col("x"), col("y"), col("z")];
        let [Some(x), Some(y), Some(z)] = xyz else {
            return Err(Error::parse("ply", 0, "vertex element needs x, y and z"));
        };
        let normal_cols = match [col("nx"), col("ny"), col("nz")] {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            _ => None,
        };
        let score_col = col("anomaly_score");
        let mut points = Vec::with_capacity(el.count);
        let mut normals = Vec::with_capacity(if normal_cols.is_some() { el.count } else { 0 });
        let mut scores = Vec::with_capacity(if score_col.is_some() { el.count } else { 0 });
        for _ in 0..el.count {
            let (line, raw) = lines.next().ok_or_else(|| Error::parse("ply", 0, "truncated vertex element"))?;
            let values = raw
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse("ply", line, format!("bad number {t:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != el.properties.len() {
                return Err(Error::parse("ply", line, format!("expected {} values, found {}", el.properties.len(), values.len())));
            }
            points.push(Vec3::new(values[x], values[y], values[z]));
            if let Some([a, b, c]) = normal_cols {
                let n = unit(Vec3::new(values[a], values[b], values[c]))
                    .ok_or_else(|| Error::parse("ply", line, "zero-length normal"))?;
                normals.push(n);
            }
            if let Some(s) = score_col {
                scores.push(values[s]);
            }
        }
        if points.is_empty() {
            return Err(ptoffset_core::Error::EmptyCloud.into());
        }
        let cloud = PointCloud::new(points, normal_cols.map(|_| normals), "")?;
        result = Some(PlyCloud { cloud, scores: score_col.map(|_| scores) });
        break;
    }
    result.ok_or_else(|| Error::parse("ply", 0, "no vertex element"))
}

/// ASCII PLY with double-precision `x y z`, `nx ny nz` when the cloud has
/// normals, and `anomaly_score` when `scores` is given.
pub fn write_ply(cloud: &PointCloud, scores: Option<&[f64]>) -> Result<String> {
    if let Some(s) = scores {
        if s.len() != cloud.len() {
            return Err(ptoffset_core::Error::LengthMismatch { what: "scores", expected: cloud.len(), found: s.len() }.into());
        }
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    for name in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {name}");
    }
    if cloud.normals().is_some() {
        for name in ["nx", "ny", "nz"] {
            let _ = writeln!(out, "property double {name}");
        }
    }
    if scores.is_some() {
        out.push_str("property double anomaly_score\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
        }
        if let Some(s) = scores {
            let _ = write!(out, " {}", s[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// `value` with six significant digits, printf `%g` style.
pub fn sig6(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{value:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, value);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x,y,z,score` per point, six significant digits.
pub fn write_score_csv(cloud: &PointCloud, scores: &[f64]) -> Result<String> {
    if scores.len() != cloud.len() {
        return Err(ptoffset_core::Error::LengthMismatch { what: "scores", expected: cloud.len(), found: scores.len() }.into());
    }
    let mut out = String::from("x,y,z,score\n");
    for (p, &s) in cloud.points().iter().zip(scores) {
        let _ = writeln!(out, "{},{},{},{}", sig6(p.x), sig6(p.y), sig6(p.z), sig6(s));
    }
    Ok(out)
}

/// `dx,dy,dz` per point at full precision.
pub fn write_offsets_csv(offsets: &[Vec3]) -> String {
    let mut out = String::from("dx,dy,dz\n");
    for o in offsets {
        let _ = writeln!(out, "{},{},{}", o.x, o.y, o.z);
    }
    out
}

/// One `0`/`1` per point under a `mask` header.
pub fn write_mask_csv(mask: &[bool]) -> String {
    let mut out = String::from("mask\n");
    for &m in mask {
        out.push(if m { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn parse_mask_csv(bytes: &[u8]) -> Result<Vec<bool>> {
    let text = utf8(bytes, "mask csv")?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "mask")) => {}
        _ => return Err(Error::parse("mask csv", 1, "expected 'mask' header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::parse("mask csv", i + 1, format!("expected 0 or 1, found {other:?}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obj_examples() {
        let c = parse_obj(b"v 0 0 1\nv 1 0 0\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.normals().is_none());

        let c = parse_obj(b"v 0 0 0\nvn 0 0 2\n").unwrap();
        assert_eq!(c.normals().unwrap(), &[Vec3::new(0.0, 0.0, 1.0)]);

        let c = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvn 0 0 1\nf 1 2 3\n").unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.normals().is_none());
    }

    #[test]
    fn obj_errors_carry_line_numbers() {
        match parse_obj(b"# header\nv 0 0 0\nv 1 x 0\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_obj(b"# nothing\nf 1 2 3\n"), Err(Error::Core(ptoffset_core::Error::EmptyCloud))));
    }

    #[test]
    fn ply_reads_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\nproperty float anomaly_score\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n0 0 0 255 0.5\n1 2 3 0 0.25\n3 0 1 1\n";
        let p = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(p.cloud.points()[1], Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(p.scores, Some(vec![0.5, 0.25]));
        assert!(p.cloud.normals().is_none());
    }

    #[test]
    fn ply_rejects_binary() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_ply(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn sig6_examples() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.1234567), "0.123457");
        assert_eq!(sig6(-12.5), "-12.5");
        assert_eq!(sig6(123456789.0), "1.23457e+08");
        assert_eq!(sig6(0.0000123456), "1.23456e-05");
        assert_eq!(sig6(999999.5), "1e+06");
        assert_eq!(sig6(0.0001), "0.0001");
    }

    #[test]
    fn mask_round_trip() {
        let m = vec![true, false, false, true];
        assert_eq!(parse_mask_csv(write_mask_csv(&m).as_bytes()).unwrap(), m);
    }
}
