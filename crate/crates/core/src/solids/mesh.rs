use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solids::{NodeSet, UniformGrid};

/// Triangle count above which point queries go through the bucket grid.
const BUCKET_THRESHOLD: usize = 100_000;

/// Watertight, consistently oriented triangle mesh inside `[-L, L)^3`.
///
/// Immutable after construction; all queries are pure and thread-safe.
#[derive(Clone, Debug)]
pub struct Solid {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    l: f64,
    cumulative_area: Vec<f64>,
    total_area: f64,
    aabb_min: Point3<f64>,
    aabb_max: Point3<f64>,
    buckets: Option<TriBuckets>,
}

impl Solid {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Invalid(format!("half-extent must be positive, got {l}")));
        }
        if triangles.is_empty() {
            return Err(Error::Invalid("mesh has no triangles".into()));
        }
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Parse(format!("triangle {ti} references missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Parse(format!("triangle {ti} is degenerate")));
            }
        }
        for (vi, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite() && -l <= *c && *c < l) {
                return Err(Error::Invalid(format!(
                    "vertex {vi} at {v:?} outside [-{l}, {l})"
                )));
            }
        }
        check_topology(&vertices, &triangles)?;

        let mut cumulative_area = Vec::with_capacity(triangles.len());
        let mut total_area = 0.0;
        for t in &triangles {
            total_area += triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            cumulative_area.push(total_area);
        }

        let mut aabb_min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut aabb_max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            for a in 0..3 {
                aabb_min[a] = aabb_min[a].min(v[a]);
                aabb_max[a] = aabb_max[a].max(v[a]);
            }
        }

        let mut solid = Self {
            vertices,
            triangles,
            l,
            cumulative_area,
            total_area,
            aabb_min,
            aabb_max,
            buckets: None,
        };
        if solid.triangles.len() > BUCKET_THRESHOLD {
            solid.buckets = Some(TriBuckets::build(&solid));
        }
        Ok(solid)
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn aabb(&self) -> (Point3<f64>, Point3<f64>) {
        (self.aabb_min, self.aabb_max)
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Uniformly rescales around the origin. Factors above 1 may push
    /// vertices out of the box and fail.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let vertices = self
            .vertices
            .iter()
            .map(|v| Point3::from(v.coords * factor))
            .collect();
        Self::new(vertices, self.triangles.clone(), self.l)
    }

    fn corners(&self, ti: usize) -> (&Point3<f64>, &Point3<f64>, &Point3<f64>) {
        let t = &self.triangles[ti];
        (&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]])
    }

    /// True iff `x` lies in the closed solid. Ray-crossing parity with the
    /// ray direction re-drawn whenever a cast grazes an edge, vertex, or
    /// coplanar triangle.
    pub fn contains(&self, x: &Point3<f64>) -> bool {
        let slack = 1e-12 * self.l;
        for a in 0..3 {
            if x[a] < self.aabb_min[a] - slack || x[a] > self.aabb_max[a] + slack {
                return false;
            }
        }
        if self.distance_to_boundary(x) <= slack {
            return true;
        }
        for attempt in 0..64u64 {
            let dir = ray_direction(attempt);
            if let Some(inside) = self.contains_with_direction(x, &dir) {
                return inside;
            }
        }
        log::warn!("ray parity stayed degenerate after 64 directions at {x:?}");
        false
    }

    /// Single parity cast; `None` when the cast hits a degenerate
    /// configuration and must be retried with another direction.
    pub fn contains_with_direction(&self, x: &Point3<f64>, dir: &Vector3<f64>) -> Option<bool> {
        let mut crossings = 0usize;
        for ti in 0..self.triangles.len() {
            let (a, b, c) = self.corners(ti);
            match ray_triangle(x, dir, a, b, c) {
                RayHit::Miss => {}
                RayHit::Cross => crossings += 1,
                RayHit::Degenerate => return None,
            }
        }
        Some(crossings % 2 == 1)
    }

    /// Exact distance from `x` to the closest triangle; zero on the surface.
    pub fn distance_to_boundary(&self, x: &Point3<f64>) -> f64 {
        match &self.buckets {
            Some(b) => b.distance(self, x),
            None => self.distance_brute(x),
        }
    }

    pub(crate) fn distance_brute(&self, x: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for ti in 0..self.triangles.len() {
            let (a, b, c) = self.corners(ti);
            let d2 = point_triangle_distance_sq(x, a, b, c);
            if d2 < best {
                best = d2;
            }
        }
        best.sqrt()
    }

    /// Area-weighted random point on the boundary.
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R) -> Point3<f64> {
        let target = rng.random::<f64>() * self.total_area;
        let ti = match self
            .cumulative_area
            .binary_search_by(|probe| probe.partial_cmp(&target).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.min(self.triangles.len() - 1),
        };
        let (a, b, c) = self.corners(ti);
        // uniform barycentric draw
        let mut u = rng.random::<f64>();
        let mut v = rng.random::<f64>();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        a + (b - a) * u + (c - a) * v
    }
}

fn check_topology(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    let _ = vertices;
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            let a = t[e];
            let b = t[(e + 1) % 3];
            *undirected.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &undirected {
        if count != 2 {
            return Err(Error::NotWatertight(format!(
                "edge ({a}, {b}) belongs to {count} triangles, expected 2"
            )));
        }
    }
    for (&(a, b), &count) in &directed {
        if count != 1 {
            return Err(Error::InconsistentOrientation(format!(
                "directed edge ({a}, {b}) traversed {count} times"
            )));
        }
    }
    Ok(())
}

fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Deterministic ray direction for a retry counter.
fn ray_direction(attempt: u64) -> Vector3<f64> {
    // splitmix64 steps; irrational-looking components avoid axis alignment
    let mut s = attempt.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(0x2545f4914f6cdd1d);
    let mut next = || {
        s = s.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) as f64 / u64::MAX as f64) * 2.0 - 1.0
    };
    loop {
        let v = Vector3::new(0.577 + next(), 0.211 + next(), 0.346 + next());
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

enum RayHit {
    Miss,
    Cross,
    Degenerate,
}

/// Watertight-enough Moller-Trumbore: any hit too close to an edge, the
/// origin plane, or a near-parallel triangle is flagged for a retry.
fn ray_triangle(
    orig: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> RayHit {
    const BARY_EPS: f64 = 1e-10;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        // parallel ray; only degenerate if the ray can actually touch the plane
        let n = e1.cross(&e2);
        let dist = (orig - a).dot(&n).abs();
        if dist <= 1e-12 * scale.max(1.0) {
            return RayHit::Degenerate;
        }
        return RayHit::Miss;
    }
    let inv_det = 1.0 / det;
    let tvec = orig - a;
    let u = tvec.dot(&pvec) * inv_det;
    if u < -BARY_EPS || u > 1.0 + BARY_EPS {
        return RayHit::Miss;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return RayHit::Miss;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t <= 0.0 {
        if t > -BARY_EPS {
            return RayHit::Degenerate;
        }
        return RayHit::Miss;
    }
    let near_edge = u < BARY_EPS || v < BARY_EPS || u + v > 1.0 - BARY_EPS;
    let near_origin = t < BARY_EPS;
    if near_edge || near_origin {
        return RayHit::Degenerate;
    }
    RayHit::Cross
}

/// Squared distance from a point to a triangle (closest-point region walk).
pub fn point_triangle_distance_sq(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp + (c - b) * w).norm_squared();
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm_squared()
}

/// Uniform triangle-bucket accelerator for boundary-distance queries on
/// large meshes. Cells store every triangle whose AABB overlaps them; a
/// query expands ring by ring until no closer cell can exist.
#[derive(Clone, Debug)]
pub(crate) struct TriBuckets {
    origin: Point3<f64>,
    cell: f64,
    counts: [usize; 3],
    lists: Vec<Vec<u32>>,
}

impl TriBuckets {
    pub(crate) fn build(solid: &Solid) -> Self {
        let (min, max) = solid.aabb();
        let extent = max - min;
        let target_cells = (solid.triangles.len() as f64).cbrt().ceil().max(4.0);
        let cell = (extent.max() / target_cells).max(1e-9 * solid.l);
        let counts = [
            ((extent[0] / cell).ceil() as usize + 1).max(1),
            ((extent[1] / cell).ceil() as usize + 1).max(1),
            ((extent[2] / cell).ceil() as usize + 1).max(1),
        ];
        let mut lists = vec![Vec::new(); counts[0] * counts[1] * counts[2]];
        for (ti, t) in solid.triangles.iter().enumerate() {
            let mut lo = [usize::MAX; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
                for &vi in t {
                    cmin = cmin.min(solid.vertices[vi][a]);
                    cmax = cmax.max(solid.vertices[vi][a]);
                }
                lo[a] = (((cmin - min[a]) / cell).floor() as isize).clamp(0, counts[a] as isize - 1)
                    as usize;
                hi[a] = (((cmax - min[a]) / cell).floor() as isize).clamp(0, counts[a] as isize - 1)
                    as usize;
            }
            for iz in lo[2]..=hi[2] {
                for iy in lo[1]..=hi[1] {
                    for ix in lo[0]..=hi[0] {
                        lists[(iz * counts[1] + iy) * counts[0] + ix].push(ti as u32);
                    }
                }
            }
        }
        Self { origin: min, cell, counts, lists }
    }

    fn cell_of(&self, x: &Point3<f64>) -> [isize; 3] {
        let mut c = [0isize; 3];
        for a in 0..3 {
            c[a] = ((x[a] - self.origin[a]) / self.cell).floor() as isize;
        }
        c
    }

    pub(crate) fn distance(&self, solid: &Solid, x: &Point3<f64>) -> f64 {
        let home = self.cell_of(x);
        let max_ring = self.counts.iter().map(|&c| c as isize).max().unwrap()
            + home.iter().map(|c| c.abs()).max().unwrap()
            + 2;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // Cells in this ring are at least (ring-1) * cell away.
            if best.is_finite() && (ring - 1) as f64 * self.cell > best.sqrt() {
                break;
            }
            self.for_ring(home, ring, |flat| {
                for &ti in &self.lists[flat] {
                    let (a, b, c) = solid.corners(ti as usize);
                    let d2 = point_triangle_distance_sq(x, a, b, c);
                    if d2 < best {
                        best = d2;
                    }
                }
            });
        }
        best.sqrt()
    }

    fn for_ring(&self, home: [isize; 3], ring: isize, mut visit: impl FnMut(usize)) {
        let (nx, ny, nz) =
            (self.counts[0] as isize, self.counts[1] as isize, self.counts[2] as isize);
        let mut call = |ix: isize, iy: isize, iz: isize| {
            if ix >= 0 && iy >= 0 && iz >= 0 && ix < nx && iy < ny && iz < nz {
                visit(((iz * ny + iy) * nx + ix) as usize);
            }
        };
        if ring == 0 {
            call(home[0], home[1], home[2]);
            return;
        }
        for dz in -ring..=ring {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()).max(dz.abs()) == ring {
                        call(home[0] + dx, home[1] + dy, home[2] + dz);
                    }
                }
            }
        }
    }
}

/// Grid nodes strictly classified by `Solid::contains`.
pub fn interior_nodes(grid: &UniformGrid, solid: &Solid) -> Result<NodeSet> {
    if grid.dim() != 3 {
        return Err(Error::Invalid("interior nodes need a 3D grid".into()));
    }
    let (min, max) = solid.aabb();
    if min.coords.iter().any(|&c| c < -grid.l()) || max.coords.iter().any(|&c| c >= grid.l()) {
        return Err(Error::Invalid("grid does not cover the solid bounding box".into()));
    }
    let indices: Vec<usize> = (0..grid.node_count())
        .into_par_iter()
        .filter(|&idx| solid.contains(&grid.node3(idx)))
        .collect();
    // par_iter keeps index order, so the result is already sorted
    NodeSet::new(indices, grid)
}
