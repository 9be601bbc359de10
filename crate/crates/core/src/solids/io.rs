use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::solids::Solid;

/// Loads an ASCII OBJ or ASCII STL triangle soup, recenters it and scales it
/// uniformly so the bounding box fits `[-0.9 L, 0.9 L)^3`.
pub fn load_mesh(path: &Path, l: f64) -> Result<Solid> {
    let text = std::fs::read_to_string(path)?;
    let (vertices, triangles) = parse_mesh_text(&text)?;
    normalize_into_box(vertices, triangles, l)
}

/// Builds a solid from raw soup data after applying the standard
/// recenter-and-scale normalization.
pub fn normalize_into_box(
    mut vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    l: f64,
) -> Result<Solid> {
    if vertices.is_empty() {
        return Err(Error::Parse("mesh has no vertices".into()));
    }
    let mut min = vertices[0];
    let mut max = vertices[0];
    for v in &vertices {
        for a in 0..3 {
            min[a] = min[a].min(v[a]);
            max[a] = max[a].max(v[a]);
        }
    }
    let center = nalgebra::center(&min, &max);
    let half = (max - min).amax() * 0.5;
    if !(half > 0.0) {
        return Err(Error::Parse("mesh bounding box is degenerate".into()));
    }
    let scale = 0.9 * l / half;
    for v in &mut vertices {
        *v = Point3::from((*v - center) * scale);
    }
    Solid::new(vertices, triangles, l)
}

fn parse_mesh_text(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let first = text.split_whitespace().next().unwrap_or("");
    if first.eq_ignore_ascii_case("solid") {
        parse_stl(text)
    } else {
        parse_obj(text)
    }
}

fn parse_obj(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let tok = toks
                        .next()
                        .ok_or_else(|| Error::Parse(format!("line {}: short vertex", ln + 1)))?;
                    *slot = tok
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|tok| parse_obj_face_index(tok, vertices.len(), ln + 1))
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::Parse(format!(
                        "line {}: face with {} vertices, triangle soup expected",
                        ln + 1,
                        idx.len()
                    )));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            // vn/vt/usemtl and friends are irrelevant for a soup
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

fn parse_obj_face_index(tok: &str, vertex_count: usize, line: usize) -> Result<usize> {
    let first = tok.split('/').next().unwrap_or("");
    let signed: i64 = first
        .parse()
        .map_err(|e| Error::Parse(format!("line {line}: bad face index {tok:?}: {e}")))?;
    let idx = if signed < 0 {
        vertex_count as i64 + signed
    } else {
        signed - 1
    };
    if idx < 0 || idx as usize >= vertex_count {
        return Err(Error::Parse(format!("line {line}: face index {signed} out of range")));
    }
    Ok(idx as usize)
}

fn parse_stl(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut weld: HashMap<[u64; 3], usize> = HashMap::new();
    let mut triangles = Vec::new();
    let mut facet: Vec<usize> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("vertex") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let tok = toks
                        .next()
                        .ok_or_else(|| Error::Parse(format!("line {}: short vertex", ln + 1)))?;
                    *slot = tok
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
                }
                let key = [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()];
                let vi = *weld.entry(key).or_insert_with(|| {
                    vertices.push(Point3::new(c[0], c[1], c[2]));
                    vertices.len() - 1
                });
                facet.push(vi);
            }
            Some("endfacet") => {
                if facet.len() != 3 {
                    return Err(Error::Parse(format!(
                        "line {}: facet with {} vertices",
                        ln + 1,
                        facet.len()
                    )));
                }
                triangles.push([facet[0], facet[1], facet[2]]);
                facet.clear();
            }
            _ => {}
        }
    }
    if !facet.is_empty() {
        return Err(Error::Parse("unterminated facet at end of STL".into()));
    }
    Ok((vertices, triangles))
}

/// Writes vertices and faces as ASCII OBJ.
pub fn write_obj(path: &Path, vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    for v in vertices {
        writeln!(w, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
    }
    for t in triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
