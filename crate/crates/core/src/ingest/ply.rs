//! ASCII PLY point clouds: `vertex` elements with `x y z` and an optional
//! `uchar chunk` property.
//!
//! Coordinates are written with the shortest decimal that round-trips an f64,
//! so our own reader recovers every point exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::PointCloud;

pub fn encode_ply(cloud: &PointCloud) -> Result<String> {
    let mut out = String::with_capacity(64 + cloud.len() * 32);
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.chunk_ids().is_some() {
        out.push_str("property uchar chunk\n");
    }
    out.push_str("end_header\n");
    match cloud.chunk_ids() {
        None => {
            for p in cloud.points() {
                out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
            }
        }
        Some(ids) => {
            for (p, id) in cloud.points().iter().zip(ids) {
                let id = u8::try_from(*id).map_err(|_| {
                    Error::Validation(format!("chunk id {id} does not fit a uchar property"))
                })?;
                out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, id));
            }
        }
    }
    Ok(out)
}

pub fn save_pointcloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = encode_ply(cloud)?;
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn decode_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let bad = |m: String| Error::format(path, m);
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    if lines.next().map(str::trim) != Some("format ascii 1.0") {
        return Err(bad("only 'format ascii 1.0' is supported".into()));
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    for line in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| bad(format!("bad vertex count '{n}'")))?)
            }
            ["element", other, ..] => return Err(bad(format!("unsupported element '{other}'"))),
            ["property", _ty, name] => props.push(name.to_string()),
            _ => return Err(bad(format!("unexpected header line '{line}'"))),
        }
    }
    let count = count.ok_or_else(|| bad("no vertex element".into()))?;
    let has_chunk = match props.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "chunk"] => true,
        other => return Err(bad(format!("unsupported vertex properties {other:?}"))),
    };
    let mut points = Vec::with_capacity(count);
    let mut ids = Vec::with_capacity(if has_chunk { count } else { 0 });
    for i in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("expected {count} vertices, found {i}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != props.len() {
            return Err(bad(format!("vertex {i} has {} values", vals.len())));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}' at vertex {i}")));
        points.push(Vector3::new(f(vals[0])?, f(vals[1])?, f(vals[2])?));
        if has_chunk {
            ids.push(vals[3].parse::<u8>().map_err(|_| bad(format!("bad chunk id at vertex {i}")))? as u32);
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data after declared vertices".into()));
    }
    if has_chunk {
        PointCloud::with_chunk_ids(points, ids)
    } else {
        PointCloud::new(points)
    }
}

pub fn load_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_ply(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud() {
        let text = encode_ply(&PointCloud::default()).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(decode_ply(Path::new("e.ply"), &text).unwrap().is_empty());
    }

    #[test]
    fn single_point_line() {
        let cloud = PointCloud::new(vec![Vector3::new(1.0, 2.0, 3.0)]).unwrap();
        let text = encode_ply(&cloud).unwrap();
        assert!(text.lines().any(|l| l == "1 2 3"));
    }

    #[test]
    fn chunk_ids_round_trip_and_overflow() {
        let cloud = PointCloud::with_chunk_ids(
            vec![Vector3::new(0.5, -1.25, 3.0), Vector3::new(1e-7, 2.0, 4.0)],
            vec![0, 7],
        )
        .unwrap();
        let back = decode_ply(Path::new("c.ply"), &encode_ply(&cloud).unwrap()).unwrap();
        assert_eq!(back, cloud);

        let big = PointCloud::with_chunk_ids(vec![Vector3::zeros()], vec![300]).unwrap();
        assert!(encode_ply(&big).is_err());
    }

    #[test]
    fn truncated_body_is_format_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 2 3\n";
        assert!(matches!(
            decode_ply(Path::new("t.ply"), text),
            Err(Error::Format { .. })
        ));
    }
}
