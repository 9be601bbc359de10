//! The analytic layer: a compactly supported mollifier, ball and trimmed-cone
//! bump kernels, weighted knot sets, and the cascade evaluation of knot
//! densities convolved with those kernels on uniform grids.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solids::{ScalarField, SetSample, UniformGrid};

/// Smoothness exponent for the mollifier. `alpha = inf` degenerates to the
/// sharp indicator of the open unit interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierParams {
    alpha: f64,
}

impl MollifierParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::Invalid(format!("mollifier exponent must be positive, got {alpha}")))
        }
    }

    /// The sharp indicator limit.
    pub fn sharp() -> Self {
        Self { alpha: f64::INFINITY }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_sharp(&self) -> bool {
        self.alpha.is_infinite()
    }
}

impl Default for MollifierParams {
    fn default() -> Self {
        Self { alpha: 2.0 }
    }
}

/// Smooth cutoff `exp((1 - |x|^-alpha)^-1)` on `|x| < 1`, zero outside, one
/// at the origin by continuity.
pub fn mollifier(x: f64, p: MollifierParams) -> f64 {
    let ax = x.abs();
    if ax >= 1.0 {
        return 0.0;
    }
    if p.is_sharp() {
        return 1.0;
    }
    if ax == 0.0 {
        return 1.0;
    }
    let denom = 1.0 - ax.powf(-p.alpha);
    // denom -> 0- as |x| -> 1-, so the exponent runs to -inf
    (1.0 / denom).exp()
}

/// `psi_alpha(|x - center| / radius)`; supported on the open ball.
pub fn ball_bump(x: &Point3<f64>, center: &Point3<f64>, radius: f64, p: MollifierParams) -> f64 {
    mollifier((x - center).norm() / radius, p)
}

/// Trimmed half-cone bump in 4-space. With `(x', r') = a - apex` the value is
/// `psi(|x'| / |r'|) * psi(1 + 2 r' / trim_l)` for `r' < 0` and zero at or
/// above the apex level; the support is the open downward half-cone of
/// height `trim_l`.
pub fn cone_bump(a: &[f64; 4], apex: &[f64; 4], trim_l: f64, p: MollifierParams) -> f64 {
    let dx = [a[0] - apex[0], a[1] - apex[1], a[2] - apex[2]];
    let dr = a[3] - apex[3];
    if dr >= 0.0 {
        return 0.0;
    }
    let radial = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt() / (-dr);
    mollifier(radial, p) * mollifier(1.0 + 2.0 * dr / trim_l, p)
}

/// Read-only view of a set of weighted balls.
pub trait BallSet: Sync {
    fn len(&self) -> usize;
    fn center(&self, i: usize) -> Point3<f64>;
    fn radius(&self, i: usize) -> f64;
    fn weight(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Equiradius knots: ball centers sharing one radius.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotSet3 {
    points: Vec<Point3<f64>>,
    radius: f64,
    weights: Vec<f64>,
}

impl KnotSet3 {
    pub fn new(points: Vec<Point3<f64>>, radius: f64, weights: Option<Vec<f64>>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!("knot radius must be positive, got {radius}")));
        }
        if points.iter().any(|pt| !pt.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Invalid("non-finite knot center".into()));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; points.len()]);
        if weights.len() != points.len() {
            return Err(Error::Invalid("weight count differs from knot count".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Invalid("knot weights must be positive".into()));
        }
        Ok(Self { points, radius, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl BallSet for KnotSet3 {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn center(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    fn radius(&self, _i: usize) -> f64 {
        self.radius
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

/// Nonequiradius knots: (center, radius) pairs under a shared trim height
/// `L`, the height of the lifted cone primitive. The `mirrored` tag marks a
/// set reflected through the `r = 0` hyperplane; the balls it encodes are
/// unchanged, only lifted constructions read the tag.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotSet4 {
    centers: Vec<Point3<f64>>,
    radii: Vec<f64>,
    weights: Vec<f64>,
    trim_l: f64,
    mirrored: bool,
}

impl KnotSet4 {
    pub fn new(
        centers: Vec<Point3<f64>>,
        radii: Vec<f64>,
        weights: Option<Vec<f64>>,
        trim_l: f64,
    ) -> Result<Self> {
        if radii.len() != centers.len() {
            return Err(Error::Invalid("radius count differs from knot count".into()));
        }
        if !(trim_l > 0.0) || !trim_l.is_finite() {
            return Err(Error::Invalid(format!("trim height must be positive, got {trim_l}")));
        }
        for &r in &radii {
            if !(r > 0.0) || r >= trim_l {
                return Err(Error::Invalid(format!(
                    "knot radius {r} outside (0, {trim_l})"
                )));
            }
        }
        if centers.iter().any(|pt| !pt.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Invalid("non-finite knot center".into()));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; centers.len()]);
        if weights.len() != centers.len() {
            return Err(Error::Invalid("weight count differs from knot count".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Invalid("knot weights must be positive".into()));
        }
        Ok(Self { centers, radii, weights, trim_l, mirrored: false })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point3<f64>] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trim_l(&self) -> f64 {
        self.trim_l
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub(crate) fn with_mirror_toggled(&self) -> Self {
        let mut out = self.clone();
        out.mirrored = !out.mirrored;
        out
    }

    /// Apex height along the lifted axis: `r_i`, negated for mirrored sets.
    pub fn apex_height(&self, i: usize) -> f64 {
        if self.mirrored {
            -self.radii[i]
        } else {
            self.radii[i]
        }
    }

    /// Same centers with every radius grown by `delta`; the trim height is
    /// enlarged when a grown radius would reach it.
    pub fn expanded(&self, delta: f64) -> Result<Self> {
        let radii: Vec<f64> = self.radii.iter().map(|r| r + delta).collect();
        let max_r = radii.iter().cloned().fold(0.0f64, f64::max);
        let trim_l = if max_r >= self.trim_l { max_r * (1.0 + 1e-9) } else { self.trim_l };
        let mut out = Self::new(self.centers.clone(), radii, Some(self.weights.clone()), trim_l)?;
        out.mirrored = self.mirrored;
        Ok(out)
    }
}

impl BallSet for KnotSet4 {
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

/// One bit per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyBitmap {
    grid: UniformGrid,
    bits: Vec<bool>,
}

impl OccupancyBitmap {
    pub fn new(grid: UniformGrid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.node_count() {
            return Err(Error::Invalid("bit count differs from node count".into()));
        }
        Ok(Self { grid, bits })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn warn_if_clipped(set: &dyn BallSet, grid: &UniformGrid) {
    let l = grid.l();
    for i in 0..set.len() {
        let c = set.center(i);
        let r = set.radius(i);
        if (0..3).any(|a| c[a] - r < -l || c[a] + r >= l) {
            log::warn!("ball {i} protrudes outside the grid box; its support is clipped");
            return;
        }
    }
}

/// Cascade evaluation of the equiradius knot density convolved with the ball
/// bump: `field[node] = sum_i c_i psi(|node - x_i| / r)`.
pub fn rasterize_bumps3(k: &KnotSet3, g: &UniformGrid, p: MollifierParams) -> Result<ScalarField> {
    rasterize_ball_set(k, g, p)
}

/// Cascade evaluation over any ball set (each knot with its own radius).
pub fn rasterize_ball_set(
    set: &dyn BallSet,
    g: &UniformGrid,
    p: MollifierParams,
) -> Result<ScalarField> {
    if g.dim() != 3 {
        return Err(Error::GridMismatch("ball rasterization needs a 3D grid".into()));
    }
    warn_if_clipped(set, g);
    let xs = g.axis_coords(0);
    let ys = g.axis_coords(1);
    let zs = g.axis_coords(2);
    let nx = xs.len();
    let ny = ys.len();
    let mut values = vec![0.0f64; g.node_count()];
    values
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(iz, slab)| {
            let z = zs[iz];
            for iy in 0..ny {
                let y = ys[iy];
                for (ix, out) in slab[iy * nx..(iy + 1) * nx].iter_mut().enumerate() {
                    let node = Point3::new(xs[ix], y, z);
                    let mut acc = 0.0;
                    for i in 0..set.len() {
                        let r = set.radius(i);
                        let d = node - set.center(i);
                        // cheap reject before the norm
                        if d.x.abs() < r && d.y.abs() < r && d.z.abs() < r {
                            acc += set.weight(i) * mollifier(d.norm() / r, p);
                        }
                    }
                    *out = acc;
                }
            }
        });
    ScalarField::new(g.clone(), values)
}

/// Cascade evaluation of the lifted knot density convolved with the trimmed
/// cone bump on a 4D grid. The `r = 0` slice reproduces the bump field of
/// the encoded union of balls.
pub fn rasterize_bumps4(k: &KnotSet4, g: &UniformGrid, p: MollifierParams) -> Result<ScalarField> {
    if g.dim() != 4 {
        return Err(Error::GridMismatch("cone rasterization needs a 4D grid".into()));
    }
    warn_if_clipped(k, g);
    let trim = k.trim_l();
    let axes: Vec<Vec<f64>> = (0..4).map(|a| g.axis_coords(a)).collect();
    let (nx, ny, nz) = (axes[0].len(), axes[1].len(), axes[2].len());
    let slab = nx * ny * nz;
    let mirrored = k.is_mirrored();
    let mut values = vec![0.0f64; g.node_count()];
    values
        .par_chunks_mut(slab)
        .enumerate()
        .for_each(|(ir, chunk)| {
            let rr = axes[3][ir];
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let mut acc = 0.0;
                        for i in 0..k.len() {
                            let c = k.center(i);
                            let a = [axes[0][ix], axes[1][iy], axes[2][iz], rr];
                            // a mirrored cone opens upward; evaluate it by
                            // reflecting the lifted offset
                            let dr = if mirrored { -(rr - k.apex_height(i)) } else { rr - k.apex_height(i) };
                            let apexed = [a[0] - c.x, a[1] - c.y, a[2] - c.z, dr];
                            acc += k.weight(i)
                                * cone_bump(&apexed, &[0.0; 4], trim, p);
                        }
                        chunk[(iz * ny + iy) * nx + ix] = acc;
                    }
                }
            }
        });
    ScalarField::new(g.clone(), values)
}

/// Default numerical stand-in for the regularized zero sublevel.
pub fn default_sublevel_tau(f: &ScalarField) -> f64 {
    1e-9 * f.max_value().max(0.0)
}

/// Bit set exactly where the field exceeds `tau`.
pub fn sublevel_extract(f: &ScalarField, tau: f64) -> OccupancyBitmap {
    let bits = f.values().iter().map(|&v| v > tau).collect();
    OccupancyBitmap::new(f.grid().clone(), bits).expect("field guarantees the length")
}

/// Riemann sum of the field against the grid volume element.
pub fn volume_functional(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().volume_element()
}

/// `sum f1 * f2 * spacing^D` over identical grids.
pub fn inner_product(f1: &ScalarField, f2: &ScalarField) -> Result<f64> {
    if f1.grid() != f2.grid() {
        return Err(Error::GridMismatch("inner product needs identical grids".into()));
    }
    let s: f64 = f1
        .values()
        .iter()
        .zip(f2.values())
        .map(|(a, b)| a * b)
        .sum();
    Ok(s * f1.grid().volume_element())
}

/// Union-of-balls view for Hausdorff estimation.
pub struct BallUnion<'a>(pub &'a dyn BallSet);

impl SetSample for BallUnion<'_> {
    fn boundary_point(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Point3<f64> {
        use rand::Rng;
        let set = self.0;
        let total: f64 = (0..set.len()).map(|i| set.radius(i) * set.radius(i)).sum();
        loop {
            // area-weighted sphere pick, then reject points buried inside
            // another ball so the draw lands on the union boundary
            let mut target = rng.random::<f64>() * total;
            let mut pick = set.len() - 1;
            for i in 0..set.len() {
                let a = set.radius(i) * set.radius(i);
                if target < a {
                    pick = i;
                    break;
                }
                target -= a;
            }
            let dir = loop {
                let v = nalgebra::Vector3::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                let n = v.norm();
                if n > 1e-6 && n <= 1.0 {
                    break v / n;
                }
            };
            let p = set.center(pick) + dir * set.radius(pick);
            let buried = (0..set.len())
                .any(|j| j != pick && (p - set.center(j)).norm() < set.radius(j) - 1e-15);
            if !buried {
                return p;
            }
        }
    }

    fn distance_to(&self, x: &Point3<f64>) -> f64 {
        let set = self.0;
        (0..set.len())
            .map(|i| (x - set.center(i)).norm() - set.radius(i))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

const KNOT_CSV_HEADER: &str = "x,y,z,r,c";

/// Writes any ball set as knot CSV (header `x,y,z,r,c`); equiradius sets
/// repeat their shared radius per row.
pub fn write_knots_csv(path: &Path, set: &dyn BallSet) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{KNOT_CSV_HEADER}")?;
    for i in 0..set.len() {
        let c = set.center(i);
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.x,
            c.y,
            c.z,
            set.radius(i),
            set.weight(i)
        )?;
    }
    Ok(())
}

/// Reads knot CSV into a nonequiradius set. The trim height is not part of
/// the format; pass one, or let it default to a valid height just above the
/// data (largest radius, with margin, covering the coordinate extent).
pub fn read_knots_csv(path: &Path, trim_l: Option<f64>) -> Result<KnotSet4> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut centers = Vec::new();
    let mut radii = Vec::new();
    let mut weights = Vec::new();
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty knot csv".into()))??;
    if header.trim() != KNOT_CSV_HEADER {
        return Err(Error::Parse(format!(
            "bad knot csv header {header:?}, expected {KNOT_CSV_HEADER:?}"
        )));
    }
    for (ln, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Parse(format!("row {}: expected 5 columns", ln + 2)));
        }
        let mut vals = [0.0f64; 5];
        for (slot, col) in vals.iter_mut().zip(&cols) {
            *slot = col
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", ln + 2)))?;
        }
        centers.push(Point3::new(vals[0], vals[1], vals[2]));
        radii.push(vals[3]);
        weights.push(vals[4]);
    }
    let trim_l = trim_l.unwrap_or_else(|| {
        let max_r = radii.iter().cloned().fold(0.0f64, f64::max);
        let max_c = centers
            .iter()
            .flat_map(|c| c.coords.iter().map(|v| v.abs()))
            .fold(0.0f64, f64::max);
        (max_c + max_r).max(2.0 * max_r).max(1e-9) * (1.0 + 1.0 / 64.0)
    });
    KnotSet4::new(centers, radii, Some(weights), trim_l)
}

/// Converts to an equiradius set; every stored radius must match exactly.
pub fn as_equiradius(k: &KnotSet4) -> Result<KnotSet3> {
    let r0 = *k
        .radii()
        .first()
        .ok_or_else(|| Error::Invalid("empty knot set".into()))?;
    if k.radii().iter().any(|&r| r != r0) {
        return Err(Error::Invalid("knot radii vary, not an equiradius set".into()));
    }
    KnotSet3::new(k.centers().to_vec(), r0, Some(k.weights().to_vec()))
}
