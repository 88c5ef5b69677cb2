use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub vertices: usize,
    pub faces: usize,
    /// Zero-area faces removed during loading.
    pub dropped: usize,
}

/// Loads an OBJ (v/f records) or STL (binary or ASCII) mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<(TriangleMesh, LoadReport)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = match ext.as_str() {
        "obj" => parse_obj(path, &String::from_utf8_lossy(&bytes))?,
        "stl" => parse_stl(path, &bytes)?,
        other => return Err(Error::UnsupportedFormat(format!("extension `{other}`"))),
    };
    let (mesh, dropped) = TriangleMesh::new(vertices, faces)?;
    let report = LoadReport {
        vertices: mesh.vertices().len(),
        faces: mesh.face_count(),
        dropped,
    };
    Ok((mesh, report))
}

fn malformed(path: &Path, line: usize, reason: impl std::fmt::Display) -> Error {
    Error::MalformedMesh {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    }
}

fn parse_obj(path: &Path, text: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(path, ln + 1, e))?;
                if c.len() != 3 {
                    return Err(malformed(path, ln + 1, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| malformed(path, ln + 1, format!("bad index `{tok}`")))?;
                    let n = vertices.len() as i64;
                    let abs = if i > 0 { i - 1 } else { n + i };
                    if abs < 0 || abs >= n {
                        return Err(malformed(path, ln + 1, format!("index {i} out of range")));
                    }
                    idx.push(abs as u32);
                }
                if idx.len() < 3 {
                    return Err(malformed(path, ln + 1, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn parse_stl(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let triangles = if is_binary_stl(bytes) {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        (0..n)
            .map(|t| {
                let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
                let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
                // skip the stored normal (3 floats); winding order defines ours
                [0, 1, 2].map(|v| Vec3::new(f(3 + 3 * v), f(4 + 3 * v), f(5 + 3 * v)))
            })
            .collect::<Vec<_>>()
    } else {
        let text = String::from_utf8_lossy(bytes);
        if !text.trim_start().starts_with("solid") {
            return Err(Error::UnsupportedFormat("STL is neither binary nor ASCII".into()));
        }
        let mut pts = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            if it.next() == Some("vertex") {
                let c: Vec<f64> = it
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(path, ln + 1, e))?;
                if c.len() != 3 {
                    return Err(malformed(path, ln + 1, "vertex needs 3 coordinates"));
                }
                pts.push(Vec3::new(c[0], c[1], c[2]));
            }
        }
        if pts.len() % 3 != 0 {
            return Err(malformed(path, 0, "vertex count not a multiple of 3"));
        }
        pts.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    };
    // weld bit-identical corners so shells and closedness are meaningful
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let faces = triangles
        .iter()
        .map(|tri| {
            tri.map(|p| {
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                *index.entry(key).or_insert_with(|| {
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                })
            })
        })
        .collect();
    Ok((vertices, faces))
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + 50 * n
}

/// Writes the mesh as OBJ with shortest round-trip float formatting.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
