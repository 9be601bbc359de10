use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solids::UniformGrid;

/// One real value per grid node, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Invalid(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        let n = grid.node_count();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.volume_element();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }

    /// Header "D NX [NY NZ [NR]] L", one value per line after it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        write!(w, "{}", self.grid.dim())?;
        for &n in self.grid.dims() {
            write!(w, " {n}")?;
        }
        writeln!(w, " {:.16e}", self.grid.l())?;
        for v in &self.values {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty scalar field file".into()))??;
        let (grid, _) = parse_field_header(&header)?;
        let mut values = Vec::with_capacity(grid.node_count());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad field value {t:?}: {e}")))?,
            );
        }
        Self::new(grid, values)
    }
}

/// Parses "D NX [NY NZ [NR]] L"; returns the grid and the token count used.
pub fn parse_field_header(header: &str) -> Result<(UniformGrid, usize)> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 3 {
        return Err(Error::Parse(format!("short field header {header:?}")));
    }
    let d: usize = toks[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension token {:?}", toks[0])))?;
    if toks.len() != d + 2 {
        return Err(Error::Parse(format!(
            "field header for {d}D needs {} tokens, got {}",
            d + 2,
            toks.len()
        )));
    }
    let mut dims = Vec::with_capacity(d);
    for tok in &toks[1..=d] {
        dims.push(
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad axis count {tok:?}")))?,
        );
    }
    let l: f64 = toks[d + 1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad half-extent {:?}", toks[d + 1])))?;
    Ok((UniformGrid::with_dims(l, dims)?, toks.len()))
}

/// Ordered node indices into a grid, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSet {
    indices: Vec<usize>,
}

impl NodeSet {
    pub fn new(indices: Vec<usize>, grid: &UniformGrid) -> Result<Self> {
        let n = grid.node_count();
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Invalid("node indices must be strictly increasing".into()));
            }
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::Invalid("node index out of range".into()));
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
