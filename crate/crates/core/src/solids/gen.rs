//! Procedural test solids: boxes, icospheres, and a lumpy genus-0 blob.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::Result;
use crate::solids::Solid;

/// Axis-aligned box with the given half-extents, centered at the origin.
pub fn box_mesh(half: Vector3<f64>, l: f64) -> Result<Solid> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    push_box_faces(&mut vertices, &mut triangles, half);
    Solid::new(vertices, triangles, l)
}

pub(crate) fn push_box_faces(
    vertices: &mut Vec<Point3<f64>>,
    triangles: &mut Vec<[usize; 3]>,
    half: Vector3<f64>,
) {
    let base = vertices.len();
    for &z in &[-half[2], half[2]] {
        for &y in &[-half[1], half[1]] {
            for &x in &[-half[0], half[0]] {
                vertices.push(Point3::new(x, y, z));
            }
        }
    }
    // index bit k selects the +axis corner: x = bit0, y = bit1, z = bit2
    let quads: [[usize; 4]; 6] = [
        [0, 2, 3, 1], // z-
        [4, 5, 7, 6], // z+
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    for q in &quads {
        triangles.push([base + q[0], base + q[1], base + q[2]]);
        triangles.push([base + q[0], base + q[2], base + q[3]]);
    }
}

/// Icosahedron subdivided `subdivisions` times and projected to radius `r`.
/// Triangle count is `20 * 4^subdivisions`.
pub fn icosphere(subdivisions: u32, r: f64, l: f64) -> Result<Solid> {
    let (vertices, triangles) = icosphere_soup(subdivisions);
    let vertices = vertices
        .into_iter()
        .map(|v| Point3::from(v.coords.normalize() * r))
        .collect();
    Solid::new(vertices, triangles, l)
}

/// Star-shaped blob: an icosphere with its radius smoothly modulated by the
/// direction, giving an irregular genus-0 mesh of `20 * 4^subdivisions`
/// triangles with lobes and shallow dents.
pub fn blob(subdivisions: u32, mean_radius: f64, l: f64) -> Result<Solid> {
    let (vertices, triangles) = icosphere_soup(subdivisions);
    let vertices = vertices
        .into_iter()
        .map(|v| {
            let u = v.coords.normalize();
            let wobble = 0.22 * (2.1 * u.x + 0.9).sin() * (1.7 * u.y - 0.4).cos()
                + 0.16 * (2.6 * u.z + 1.3).sin()
                + 0.10 * (3.1 * u.y * u.x + 2.0).cos();
            Point3::from(u * mean_radius * (1.0 + wobble))
        })
        .collect();
    Solid::new(vertices, triangles, l)
}

fn icosphere_soup(subdivisions: u32) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
    .collect();

    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let a = t[e];
                let b = t[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoints.entry(key).or_insert_with(|| {
                    let m = nalgebra::center(&vertices[a], &vertices[b]);
                    vertices.push(Point3::from(m.coords.normalize()));
                    vertices.len() - 1
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([t[1], mid[1], mid[0]]);
            next.push([t[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }
    (vertices, triangles)
}
