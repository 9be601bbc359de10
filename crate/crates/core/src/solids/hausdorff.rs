use nalgebra::Point3;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solids::{NodeSet, Solid, UniformGrid};

/// A compact set that can be sampled densely on its boundary and queried for
/// the distance from an arbitrary point to the set (zero inside).
pub trait SetSample: Sync {
    fn boundary_point(&self, rng: &mut ChaCha8Rng) -> Point3<f64>;
    fn distance_to(&self, x: &Point3<f64>) -> f64;
}

/// Symmetric sampled Hausdorff distance: the max of the two directed
/// estimates, each taken over `n_samples` boundary points. Converges to the
/// true metric from below as the sample count grows.
pub fn hausdorff_estimate(
    a: &dyn SetSample,
    b: &dyn SetSample,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Invalid("hausdorff estimate needs at least one sample".into()));
    }
    let d_ab = directed(a, b, n_samples, seed);
    let d_ba = directed(b, a, n_samples, seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(d_ab.max(d_ba))
}

fn directed(from: &dyn SetSample, to: &dyn SetSample, n_samples: usize, seed: u64) -> f64 {
    const CHUNK: usize = 256;
    let chunks = n_samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
                seed.wrapping_add(chunk as u64),
            );
            let count = CHUNK.min(n_samples - chunk * CHUNK);
            let mut worst = 0.0f64;
            for _ in 0..count {
                let p = from.boundary_point(&mut rng);
                worst = worst.max(to.distance_to(&p));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

impl SetSample for Solid {
    fn boundary_point(&self, rng: &mut ChaCha8Rng) -> Point3<f64> {
        self.sample_boundary(rng)
    }

    fn distance_to(&self, x: &Point3<f64>) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            self.distance_to_boundary(x)
        }
    }
}

/// Finite point set (its own boundary), e.g. the interior nodes of a grid.
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("empty point cloud".into()));
        }
        Ok(Self { points })
    }

    pub fn from_nodes(nodes: &NodeSet, grid: &UniformGrid) -> Result<Self> {
        Self::new(nodes.indices().iter().map(|&i| grid.node3(i)).collect())
    }
}

impl SetSample for PointCloud {
    fn boundary_point(&self, rng: &mut ChaCha8Rng) -> Point3<f64> {
        let i = rand::Rng::random_range(rng, 0..self.points.len());
        self.points[i]
    }

    fn distance_to(&self, x: &Point3<f64>) -> f64 {
        self.points
            .iter()
            .map(|p| (p - x).norm())
            .fold(f64::INFINITY, f64::min)
    }
}
