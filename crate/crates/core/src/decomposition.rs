//! Greedy spherical sampling: precompute distance and medial-score fields
//! over the interior grid nodes, select balls in descending score order with
//! protrusion-based elimination, expand by the grid half-diagonal, and drop
//! engulfed balls. Produces the three knot sets `A1`, `A2`, `A3`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KnotSet4;
use crate::solids::{interior_nodes, NodeSet, Solid, UniformGrid};

/// Greedy selection criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Boundary distance, the classic inner-sphere packing priority.
    Distance,
    /// Distance weighted by the count of near-tangent boundary samples, a
    /// proxy for medial-ridge concentration.
    SdfProxy,
}

#[derive(Clone, Debug)]
pub struct DecompositionParams {
    pub mu: f64,
    pub criterion: Criterion,
    pub max_balls: Option<usize>,
    /// Boundary samples for the SDF proxy; default `20 m^(2/3)`.
    pub boundary_sample_count: Option<usize>,
    pub seed: u64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        Self {
            mu: 0.25,
            criterion: Criterion::SdfProxy,
            max_balls: None,
            boundary_sample_count: None,
            seed: 0,
        }
    }
}

impl DecompositionParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Invalid(format!("protrusion factor {} outside [0, 1]", self.mu)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct DecompositionStats {
    pub m: usize,
    pub epsilon: f64,
    pub mu: f64,
    pub n12: usize,
    pub n3: usize,
    pub t0_ms: f64,
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t3_ms: f64,
}

impl DecompositionStats {
    pub fn csv_header() -> &'static str {
        "m,epsilon,mu,n12,n3,t0_ms,t1_ms,t2_ms,t3_ms"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.9e},{},{},{},{:.3},{:.3},{:.3},{:.3}",
            self.m, self.epsilon, self.mu, self.n12, self.n3,
            self.t0_ms, self.t1_ms, self.t2_ms, self.t3_ms
        )
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub a1: KnotSet4,
    pub a2: KnotSet4,
    pub a3: KnotSet4,
    pub epsilon: f64,
    pub stats: DecompositionStats,
}

/// Boundary distance per interior node.
pub fn compute_distance_field(nodes: &NodeSet, grid: &UniformGrid, solid: &Solid) -> Vec<f64> {
    nodes
        .indices()
        .par_iter()
        .map(|&idx| solid.distance_to_boundary(&grid.node3(idx)))
        .collect()
}

/// Medial-concentration score: `r(x)` times the number of boundary samples
/// within `r(x) + delta` of the node, `delta` one grid cell diagonal. Nodes
/// deep on the medial ridges see several near-tangent boundary patches and
/// score high; a node with zero radius scores zero.
pub fn compute_sdf_proxy(
    nodes: &NodeSet,
    grid: &UniformGrid,
    radii: &[f64],
    boundary_samples: &[Point3<f64>],
) -> Result<Vec<f64>> {
    if boundary_samples.is_empty() {
        return Err(Error::Invalid("sdf proxy needs boundary samples".into()));
    }
    let delta = 2.0 * grid.epsilon();
    let buckets = SampleBuckets::build(boundary_samples, delta.max(1e-12));
    Ok(nodes
        .indices()
        .par_iter()
        .zip(radii)
        .map(|(&idx, &r)| {
            if r == 0.0 {
                return 0.0;
            }
            let x = grid.node3(idx);
            let count = buckets.count_within(boundary_samples, &x, r + delta);
            r * count as f64
        })
        .collect())
}

/// Uniform hash grid over boundary samples. Queries count samples in a ball
/// by visiting only the cells that intersect it.
struct SampleBuckets {
    origin: Point3<f64>,
    cell: f64,
    counts: [usize; 3],
    lists: Vec<Vec<u32>>,
}

impl SampleBuckets {
    fn build(samples: &[Point3<f64>], cell: f64) -> Self {
        let mut origin = samples[0];
        let mut max = samples[0];
        for s in samples {
            for a in 0..3 {
                origin[a] = origin[a].min(s[a]);
                max[a] = max[a].max(s[a]);
            }
        }
        let counts = [
            ((max[0] - origin[0]) / cell).floor() as usize + 1,
            ((max[1] - origin[1]) / cell).floor() as usize + 1,
            ((max[2] - origin[2]) / cell).floor() as usize + 1,
        ];
        let mut lists = vec![Vec::new(); counts[0] * counts[1] * counts[2]];
        for (i, s) in samples.iter().enumerate() {
            lists[Self::flat(&Self::cell_of_raw(&origin, cell, s), &counts)].push(i as u32);
        }
        Self { origin, cell, counts, lists }
    }

    fn cell_of_raw(origin: &Point3<f64>, cell: f64, x: &Point3<f64>) -> [isize; 3] {
        [
            ((x[0] - origin[0]) / cell).floor() as isize,
            ((x[1] - origin[1]) / cell).floor() as isize,
            ((x[2] - origin[2]) / cell).floor() as isize,
        ]
    }

    fn flat(c: &[isize; 3], counts: &[usize; 3]) -> usize {
        (c[2] as usize * counts[1] + c[1] as usize) * counts[0] + c[0] as usize
    }

    fn count_within(&self, samples: &[Point3<f64>], x: &Point3<f64>, radius: f64) -> usize {
        let r2 = radius * radius;
        let lo = Self::cell_of_raw(&self.origin, self.cell, &Point3::new(x[0] - radius, x[1] - radius, x[2] - radius));
        let hi = Self::cell_of_raw(&self.origin, self.cell, &Point3::new(x[0] + radius, x[1] + radius, x[2] + radius));
        let mut count = 0;
        for iz in lo[2].max(0)..=hi[2].min(self.counts[2] as isize - 1) {
            for iy in lo[1].max(0)..=hi[1].min(self.counts[1] as isize - 1) {
                for ix in lo[0].max(0)..=hi[0].min(self.counts[0] as isize - 1) {
                    // skip cells whose nearest corner is already too far
                    let mut near2 = 0.0;
                    for (a, &ci) in [ix, iy, iz].iter().enumerate() {
                        let cmin = self.origin[a] + ci as f64 * self.cell;
                        let cmax = cmin + self.cell;
                        let d = if x[a] < cmin {
                            cmin - x[a]
                        } else if x[a] > cmax {
                            x[a] - cmax
                        } else {
                            0.0
                        };
                        near2 += d * d;
                    }
                    if near2 > r2 {
                        continue;
                    }
                    for &si in &self.lists[Self::flat(&[ix, iy, iz], &self.counts)] {
                        if (samples[si as usize] - x).norm_squared() <= r2 {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }
}

/// Max-heap key: score descending, node order ascending on ties.
#[derive(PartialEq)]
struct QueueEntry {
    score: f64,
    order: Reverse<usize>,
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| self.order.cmp(&other.order))
    }
}

/// Greedy ball selection. Pops the highest-score node, emits the ball at its
/// boundary distance, marks covered nodes inside it, and drops from the
/// queue every node whose ball protrudes from the selected one by no more
/// than `mu` times its own radius. Runs until every interior node is
/// covered; each emitted ball stays inside the solid by construction.
pub fn greedy_decompose(
    nodes: &NodeSet,
    grid: &UniformGrid,
    radii: &[f64],
    scores: &[f64],
    params: &DecompositionParams,
) -> Result<KnotSet4> {
    params.validate()?;
    let n = nodes.len();
    if n == 0 {
        return Err(Error::Invalid("no interior nodes to decompose".into()));
    }
    let points: Vec<Point3<f64>> = nodes.indices().iter().map(|&i| grid.node3(i)).collect();

    let mut heap: BinaryHeap<QueueEntry> = (0..n)
        .map(|i| QueueEntry { score: scores[i], order: Reverse(i) })
        .collect();
    let mut popped = vec![false; n];
    let mut covered = vec![false; n];
    let mut covered_count = 0usize;

    let mut centers = Vec::new();
    let mut out_radii = Vec::new();

    while covered_count < n {
        let Some(entry) = heap.pop() else {
            // Score-ordered elimination can discard nodes that no selected
            // ball covers; requeue the stragglers so they select themselves.
            for (i, &c) in covered.iter().enumerate() {
                if !c {
                    popped[i] = false;
                    heap.push(QueueEntry { score: scores[i], order: Reverse(i) });
                }
            }
            continue;
        };
        let i = entry.order.0;
        if popped[i] {
            continue;
        }
        popped[i] = true;
        let r = radii[i];
        if r > 0.0 {
            if let Some(cap) = params.max_balls {
                if centers.len() >= cap {
                    let uncovered = n - covered_count;
                    let partial = knot_set_from(centers, out_radii, grid)?;
                    return Err(Error::PartialDecomposition {
                        partial: Box::new(partial),
                        uncovered,
                    });
                }
            }
            centers.push(points[i]);
            out_radii.push(r);
        }
        let x = points[i];
        for j in 0..n {
            let d = (points[j] - x).norm();
            if d <= r && !covered[j] {
                covered[j] = true;
                covered_count += 1;
            }
            // protrusion test Q(x; mu)
            if !popped[j] && d - (r - radii[j]).abs() <= params.mu * radii[j] {
                popped[j] = true;
            }
        }
        if r == 0.0 && !covered[i] {
            // boundary-exact node: it covers only itself and emits no ball
            covered[i] = true;
            covered_count += 1;
        }
    }
    knot_set_from(centers, out_radii, grid)
}

fn knot_set_from(
    centers: Vec<Point3<f64>>,
    radii: Vec<f64>,
    grid: &UniformGrid,
) -> Result<KnotSet4> {
    let max_r = radii.iter().cloned().fold(0.0f64, f64::max);
    let trim = if max_r >= grid.l() { max_r * (1.0 + 1e-9) } else { grid.l() };
    KnotSet4::new(centers, radii, None, trim)
}

/// Every radius grown by `epsilon`; conservative coverage of the solid.
pub fn expand(a1: &KnotSet4, epsilon: f64) -> Result<KnotSet4> {
    a1.expanded(epsilon)
}

/// Keeps an expanded knot unless its original ball is engulfed by another
/// surviving expanded ball. Candidates are processed largest-original-radius
/// first (index ascending on ties), and only survivors may engulf, so every
/// dropped original ball stays inside a ball that remains in the output.
pub fn reduce(a1: &KnotSet4, a2: &KnotSet4) -> Result<KnotSet4> {
    let n = a1.len();
    if a2.len() != n {
        return Err(Error::Invalid("reduce needs index-aligned inputs".into()));
    }
    for i in 0..n {
        if a1.centers()[i] != a2.centers()[i] || a2.radii()[i] <= a1.radii()[i] {
            return Err(Error::Invalid("second set is not an expansion of the first".into()));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        a1.radii()[b]
            .total_cmp(&a1.radii()[a])
            .then_with(|| a.cmp(&b))
    });
    let mut survivors: Vec<usize> = Vec::new();
    for &i in &order {
        let engulfed = survivors.iter().any(|&j| {
            (a2.centers()[j] - a1.centers()[i]).norm() <= a2.radii()[j] - a1.radii()[i]
        });
        if !engulfed {
            survivors.push(i);
        }
    }
    survivors.sort_unstable();
    let centers = survivors.iter().map(|&i| a2.centers()[i]).collect();
    let radii = survivors.iter().map(|&i| a2.radii()[i]).collect();
    let weights = survivors.iter().map(|&i| a2.weights()[i]).collect();
    KnotSet4::new(centers, radii, Some(weights), a2.trim_l())
}

/// Full pipeline: interior nodes, fields, greedy selection, expansion,
/// reduction. `epsilon` is the grid half-diagonal `sqrt(3) L / m^(1/3)`.
pub fn decompose(
    solid: &Solid,
    grid: &UniformGrid,
    params: &DecompositionParams,
) -> Result<DecompositionResult> {
    params.validate()?;
    if grid.dim() != 3 {
        return Err(Error::Invalid("decomposition needs a 3D grid".into()));
    }
    let epsilon = grid.epsilon();

    let t0 = Instant::now();
    let nodes = interior_nodes(grid, solid)?;
    if nodes.is_empty() {
        return Err(Error::Invalid("solid covers no grid node".into()));
    }
    let radii = compute_distance_field(&nodes, grid, solid);
    let scores = match params.criterion {
        Criterion::Distance => radii.clone(),
        Criterion::SdfProxy => {
            let m = grid.node_count();
            let count = params
                .boundary_sample_count
                .unwrap_or_else(|| (20.0 * (m as f64).powf(2.0 / 3.0)).round() as usize)
                .max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let samples: Vec<Point3<f64>> =
                (0..count).map(|_| solid.sample_boundary(&mut rng)).collect();
            compute_sdf_proxy(&nodes, grid, &radii, &samples)?
        }
    };
    let t0_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let a1 = greedy_decompose(&nodes, grid, &radii, &scores, params)?;
    let t1_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let a2 = expand(&a1, epsilon)?;
    let t2_ms = t2.elapsed().as_secs_f64() * 1e3;

    let t3 = Instant::now();
    let a3 = reduce(&a1, &a2)?;
    let t3_ms = t3.elapsed().as_secs_f64() * 1e3;

    let stats = DecompositionStats {
        m: grid.node_count(),
        epsilon,
        mu: params.mu,
        n12: a1.len(),
        n3: a3.len(),
        t0_ms,
        t1_ms,
        t2_ms,
        t3_ms,
    };
    Ok(DecompositionResult { a1, a2, a3, epsilon, stats })
}
