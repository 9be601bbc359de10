use crate::error::{Error, Result};

/// Uniform node lattice over `[-L, L)` per axis, 3D or 4D.
///
/// Along an axis with `n` nodes the coordinates are the integer multiples of
/// `2L/n` that fall in `[-L, L)`, i.e. `(i - n/2) * 2L/n` for `i` in `0..n`.
/// Values attached to the lattice are stored x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid {
    l: f64,
    dims: Vec<usize>,
}

/// Integer cube root if `m` is a perfect cube.
pub fn exact_cube_root(m: usize) -> Option<usize> {
    if m == 0 {
        return None;
    }
    let mut k = (m as f64).cbrt().round() as usize;
    while k > 1 && k * k * k > m {
        k -= 1;
    }
    while (k + 1) * (k + 1) * (k + 1) <= m {
        k += 1;
    }
    (k * k * k == m).then_some(k)
}

impl UniformGrid {
    /// Cubic 3D grid with `m` nodes total; `m` must be a perfect cube.
    pub fn cubic3(l: f64, m: usize) -> Result<Self> {
        let k = exact_cube_root(m)
            .ok_or_else(|| Error::Invalid(format!("node count {m} is not a perfect cube")))?;
        Self::with_dims(l, vec![k, k, k])
    }

    /// 4D grid with `n` nodes per axis.
    pub fn cubic4(l: f64, n: usize) -> Result<Self> {
        Self::with_dims(l, vec![n, n, n, n])
    }

    pub fn with_dims(l: f64, dims: Vec<usize>) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Invalid(format!("half-extent must be positive, got {l}")));
        }
        if dims.len() != 3 && dims.len() != 4 {
            return Err(Error::Invalid(format!("grid must be 3D or 4D, got {}D", dims.len())));
        }
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::Invalid("grid axis with zero nodes".into()));
        }
        Ok(Self { l, dims })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.l / self.dims[axis] as f64
    }

    /// Product of per-axis spacings; the Riemann volume element.
    pub fn volume_element(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Half the diagonal of a grid cell: `sqrt(D)/2 * spacing` for cubic
    /// grids. Equals `sqrt(3) * L / m^(1/3)` on a cubic 3D grid.
    pub fn epsilon(&self) -> f64 {
        let sum_sq: f64 = (0..self.dim()).map(|a| self.spacing(a).powi(2)).sum();
        0.5 * sum_sq.sqrt()
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        (i as i64 - (self.dims[axis] / 2) as i64) as f64 * self.spacing(axis)
    }

    /// Coordinates of every node along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.dims[axis]).map(|i| self.axis_coord(axis, i)).collect()
    }

    pub fn index_of(&self, per_axis: &[usize]) -> usize {
        debug_assert_eq!(per_axis.len(), self.dim());
        let mut idx = 0;
        for axis in (0..self.dim()).rev() {
            debug_assert!(per_axis[axis] < self.dims[axis]);
            idx = idx * self.dims[axis] + per_axis[axis];
        }
        idx
    }

    /// Per-axis indices of a flat node index; `out` uses the first `dim()`
    /// entries.
    pub fn split_index(&self, idx: usize, out: &mut [usize; 4]) {
        let mut rest = idx;
        for axis in 0..self.dim() {
            out[axis] = rest % self.dims[axis];
            rest /= self.dims[axis];
        }
        debug_assert_eq!(rest, 0);
    }

    /// Node coordinates for a flat index; `out` uses the first `dim()`
    /// entries.
    pub fn node_coords(&self, idx: usize, out: &mut [f64; 4]) {
        let mut per_axis = [0usize; 4];
        self.split_index(idx, &mut per_axis);
        for axis in 0..self.dim() {
            out[axis] = self.axis_coord(axis, per_axis[axis]);
        }
    }

    /// 3D node position (grid must be 3D).
    pub fn node3(&self, idx: usize) -> nalgebra::Point3<f64> {
        debug_assert_eq!(self.dim(), 3);
        let mut c = [0.0; 4];
        self.node_coords(idx, &mut c);
        nalgebra::Point3::new(c[0], c[1], c[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root_detection() {
        assert_eq!(exact_cube_root(4096), Some(16));
        assert_eq!(exact_cube_root(1000), Some(10));
        assert_eq!(exact_cube_root(1001), None);
        assert_eq!(exact_cube_root(1), Some(1));
        assert_eq!(exact_cube_root(0), None);
    }

    #[test]
    fn node_set_matches_lattice_definition() {
        // Nodes are exactly (2L/k) Z^3 intersected with [-L, L)^3.
        let g = UniformGrid::cubic3(1.0, 8 * 8 * 8).unwrap();
        let h = g.spacing(0);
        assert_eq!(g.node_count(), 512);
        for i in 0..8 {
            let x = g.axis_coord(0, i);
            assert!(x >= -1.0 && x < 1.0);
            let steps = x / h;
            assert!((steps - steps.round()).abs() < 1e-12);
        }
        assert_eq!(g.axis_coord(0, 0), -1.0);
        assert!((g.axis_coord(0, 7) - (1.0 - h)).abs() < 1e-12);
    }

    #[test]
    fn odd_axis_counts_are_centered() {
        let g = UniformGrid::with_dims(1.0, vec![5, 5, 5]).unwrap();
        assert_eq!(g.axis_coord(0, 2), 0.0);
        assert!(g.axis_coord(0, 0) >= -1.0);
        assert!(g.axis_coord(0, 4) < 1.0);
    }

    #[test]
    fn epsilon_is_half_cell_diagonal() {
        let g = UniformGrid::cubic3(1.0, 4096).unwrap();
        let expect = 3.0_f64.sqrt() * 1.0 / 16.0;
        assert!((g.epsilon() - expect).abs() < 1e-15);
    }

    #[test]
    fn flat_index_round_trip() {
        let g = UniformGrid::with_dims(1.0, vec![3, 4, 5]).unwrap();
        let mut per_axis = [0usize; 4];
        for idx in 0..g.node_count() {
            g.split_index(idx, &mut per_axis);
            assert_eq!(g.index_of(&per_axis[..3]), idx);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(UniformGrid::cubic3(1.0, 12).is_err());
        assert!(UniformGrid::with_dims(0.0, vec![4, 4, 4]).is_err());
        assert!(UniformGrid::with_dims(1.0, vec![4, 4]).is_err());
    }
}
