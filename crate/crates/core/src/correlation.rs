//! Discrete Minkowski algebra on knot sets: configuration-obstacle knots for
//! a fixed rotation, offset slices, the exact pairwise collision oracle, and
//! the spatial-domain gap field used as the reference for spectral paths.

use nalgebra::{Matrix3, Point3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{self, BallSet, KnotSet4, MollifierParams};
use crate::motions::RigidMotion;
use crate::solids::{ScalarField, UniformGrid};

/// Pairs above this bail out with a resource error unless a caller raises
/// the cap.
pub const DEFAULT_PAIR_CAP: usize = 100_000_000;

/// Reflects a lifted knot set through the `r = 0` hyperplane. The encoded
/// balls are unchanged; pairwise obstacle sums downstream read the tag and
/// add radii instead of subtracting them.
pub fn mirror_r(k: &KnotSet4) -> KnotSet4 {
    k.with_mirror_toggled()
}

/// Translational-obstacle knots for a fixed rotation: the pairwise sums
/// `(x_i - R x_j, r_i + r_j)` with multiplied weights, `i` outer, `j` inner.
#[derive(Clone, Debug)]
pub struct ObstacleKnots {
    centers: Vec<Point3<f64>>,
    radii: Vec<f64>,
    weights: Vec<f64>,
    rotation: Matrix3<f64>,
    left_len: usize,
}

impl ObstacleKnots {
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// Splits a flat pair index back into `(i, j)`.
    pub fn pair_of(&self, flat: usize) -> (usize, usize) {
        let right_len = if self.left_len == 0 { 1 } else { self.centers.len() / self.left_len };
        (flat / right_len, flat % right_len)
    }

    /// The obstacle is itself a nonequiradius knot set; its lifted primitive
    /// is a cone of the given trim height (double the constituents').
    pub fn to_knot_set4(&self, trim_l: f64) -> Result<KnotSet4> {
        KnotSet4::new(
            self.centers.clone(),
            self.radii.clone(),
            Some(self.weights.clone()),
            trim_l,
        )
    }
}

impl BallSet for ObstacleKnots {
    fn len(&self) -> usize {
        self.centers.len()
    }

    fn center(&self, i: usize) -> Point3<f64> {
        self.centers[i]
    }

    fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

/// Pairwise Minkowski sum of ball centers for one rotation of the second
/// set.
pub fn obstacle_knots(
    k1: &impl BallSet,
    k2: &impl BallSet,
    rotation: &Matrix3<f64>,
    pair_cap: Option<usize>,
) -> Result<ObstacleKnots> {
    let cap = pair_cap.unwrap_or(DEFAULT_PAIR_CAP);
    let pairs = k1.len().checked_mul(k2.len()).filter(|&n| n <= cap);
    let Some(pairs) = pairs else {
        return Err(Error::Resource(format!(
            "{} x {} obstacle knots exceed the pair cap {cap}",
            k1.len(),
            k2.len()
        )));
    };
    let mut centers = Vec::with_capacity(pairs);
    let mut radii = Vec::with_capacity(pairs);
    let mut weights = Vec::with_capacity(pairs);
    let rotated: Vec<Point3<f64>> =
        (0..k2.len()).map(|j| Point3::from(rotation * k2.center(j).coords)).collect();
    for i in 0..k1.len() {
        let ci = k1.center(i);
        for j in 0..k2.len() {
            centers.push(Point3::from(ci - rotated[j].coords));
            radii.push(k1.radius(i) + k2.radius(j));
            weights.push(k1.weight(i) * k2.weight(j));
        }
    }
    Ok(ObstacleKnots {
        centers,
        radii,
        weights,
        rotation: *rotation,
        left_len: k1.len(),
    })
}

/// A weighted ball, the currency of obstacle slices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point3<f64>,
    pub radius: f64,
    pub weight: f64,
}

impl BallSet for Vec<Ball> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn center(&self, i: usize) -> Point3<f64> {
        self[i].center
    }

    fn radius(&self, i: usize) -> f64 {
        self[i].radius
    }

    fn weight(&self, i: usize) -> f64 {
        self[i].weight
    }
}

/// Cross-section of the lifted obstacle at the given level: every radius
/// shrinks by `level` (negative levels expand, the offset-obstacle reading);
/// balls that vanish are dropped.
pub fn slice_at(o: &ObstacleKnots, level: f64) -> Vec<Ball> {
    (0..o.len())
        .filter_map(|k| {
            let radius = o.radius(k) - level;
            (radius > 0.0).then(|| Ball {
                center: o.center(k),
                radius,
                weight: o.weight(k),
            })
        })
        .collect()
}

/// Exact combinatorial collision oracle: the first pair `(i, j)` in
/// lexicographic order with `|R x_j + t - x_i| <= r_i + r_j`, if any.
pub fn collide(
    k1: &impl BallSet,
    k2: &impl BallSet,
    m: &RigidMotion,
) -> Option<(usize, usize)> {
    let moved: Vec<Point3<f64>> = (0..k2.len()).map(|j| m.act_point(&k2.center(j))).collect();
    for i in 0..k1.len() {
        let ci = k1.center(i);
        let ri = k1.radius(i);
        for (j, cj) in moved.iter().enumerate() {
            if (cj - ci).norm() <= ri + k2.radius(j) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Gap field over relative translations, the 0-sublevel of which is the
/// configuration obstacle for the fixed rotation.
#[derive(Clone, Debug)]
pub struct GapField {
    field: ScalarField,
}

impl GapField {
    pub fn from_field(field: ScalarField) -> Result<Self> {
        let max_abs = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = -1e-9 * max_abs;
        if field.values().iter().any(|&v| v < floor) {
            return Err(Error::Invalid(
                "gap field has significantly negative values".into(),
            ));
        }
        Ok(Self { field })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }
}

/// Direct cascade evaluation of the gap over a translation grid with the
/// substituted obstacle kernel `psi(|t - c_ij| / (r_i + r_j))`. This is the
/// spatial reference the spectral paths are checked against.
pub fn gap_field_spatial(
    k1: &impl BallSet,
    k2: &impl BallSet,
    rotation: &Matrix3<f64>,
    grid: &UniformGrid,
    p: MollifierParams,
) -> Result<GapField> {
    let obstacle = obstacle_knots(k1, k2, rotation, None)?;
    let field = kernels::rasterize_ball_set(&obstacle, grid, p)?;
    GapField::from_field(field)
}

/// Gap value at a single relative translation.
pub fn gap_value_at(
    o: &ObstacleKnots,
    t: &nalgebra::Vector3<f64>,
    p: MollifierParams,
    grow: f64,
) -> f64 {
    (0..o.len())
        .into_par_iter()
        .map(|k| {
            let r = o.radius(k) + grow;
            let d = (t - o.center(k).coords).norm();
            if d < r {
                o.weight(k) * kernels::mollifier(d / r, p)
            } else {
                0.0
            }
        })
        .sum()
}
