//! Rectilinear N-dimensional grids with periodic dimensions, multilinear
//! interpolation, and finite-difference stencils.
//!
//! Non-periodic dimensions place nodes on both endpoints with spacing
//! `(upper - lower) / (nodes - 1)`. Periodic dimensions identify `x` with
//! `x + (upper - lower)` and drop the duplicate endpoint, so the spacing is
//! `(upper - lower) / nodes`. Values are stored row-major with the last
//! dimension contiguous.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Upper bound on grid rank; keeps per-node scratch on the stack.
pub const MAX_DIMS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDim {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl GridDim {
    pub fn new(lower: f64, upper: f64, nodes: usize, periodic: bool) -> Self {
        Self {
            lower,
            upper,
            nodes,
            periodic,
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.upper - self.lower) / self.nodes as f64
        } else {
            (self.upper - self.lower) / (self.nodes - 1) as f64
        }
    }

    /// Coordinate of the `i`-th node.
    pub fn coord(&self, i: usize) -> f64 {
        self.lower + self.spacing() * i as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<GridDim>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(dims: Vec<GridDim>) -> Result<Arc<Self>> {
        if dims.is_empty() || dims.len() > MAX_DIMS {
            return Err(Error::InvalidArgument(format!(
                "grid rank must be in 1..={MAX_DIMS}, got {}",
                dims.len()
            )));
        }
        for (i, d) in dims.iter().enumerate() {
            if d.nodes < 3 {
                return Err(Error::InvalidArgument(format!(
                    "dimension {i} needs at least 3 nodes, got {}",
                    d.nodes
                )));
            }
            if !(d.upper > d.lower) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "dimension {i} bounds invalid: [{}, {}]",
                    d.lower, d.upper
                )));
            }
        }
        let mut strides = vec![0usize; dims.len()];
        let mut acc = 1usize;
        for (i, d) in dims.iter().enumerate().rev() {
            strides[i] = acc;
            acc = acc
                .checked_mul(d.nodes)
                .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        }
        Ok(Arc::new(Self {
            dims,
            strides,
            len: acc,
        }))
    }

    /// Convenience constructor from parallel bound/node/periodic lists.
    pub fn from_bounds(
        lower: &[f64],
        upper: &[f64],
        nodes: &[usize],
        periodic: &[bool],
    ) -> Result<Arc<Self>> {
        if lower.len() != upper.len() || lower.len() != nodes.len() || lower.len() != periodic.len()
        {
            return Err(Error::InvalidArgument(
                "grid spec lists must have equal lengths".into(),
            ));
        }
        Grid::new(
            (0..lower.len())
                .map(|i| GridDim::new(lower[i], upper[i], nodes[i], periodic[i]))
                .collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[GridDim] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> &GridDim {
        &self.dims[i]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacing(&self, i: usize) -> f64 {
        self.dims[i].spacing()
    }

    /// Decode a flat index into per-dimension node indices.
    pub fn unflatten(&self, flat: usize, idx: &mut [usize]) {
        let mut rem = flat;
        for i in 0..self.dims.len() {
            idx[i] = rem / self.strides[i];
            rem %= self.strides[i];
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    /// Node coordinates for a flat index.
    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for i in 0..self.dims.len() {
            let k = rem / self.strides[i];
            rem %= self.strides[i];
            out[i] = self.dims[i].coord(k);
        }
    }

    /// Wrap a coordinate into the periodic fundamental interval; identity on
    /// non-periodic dimensions.
    pub fn wrap(&self, dim: usize, x: f64) -> f64 {
        let d = &self.dims[dim];
        if !d.periodic {
            return x;
        }
        let width = d.upper - d.lower;
        let mut y = (x - d.lower).rem_euclid(width) + d.lower;
        if y >= d.upper {
            y = d.lower;
        }
        y
    }

    /// Locate `x` in dimension `dim`: returns (left node index, fraction).
    /// Errors on non-periodic out-of-bounds points (small slosh tolerated).
    fn locate(&self, dim: usize, x: f64) -> Result<(usize, f64)> {
        let d = &self.dims[dim];
        let h = d.spacing();
        if d.periodic {
            let y = self.wrap(dim, x);
            let u = (y - d.lower) / h;
            let mut i = u.floor() as usize;
            if i >= d.nodes {
                i = d.nodes - 1;
            }
            return Ok((i, u - i as f64));
        }
        let tol = 1e-9 * (d.upper - d.lower).abs();
        if x < d.lower - tol || x > d.upper + tol {
            return Err(Error::OutOfDomain {
                dim,
                value: x,
                lower: d.lower,
                upper: d.upper,
            });
        }
        let u = ((x - d.lower) / h).clamp(0.0, (d.nodes - 1) as f64);
        let mut i = u.floor() as usize;
        if i >= d.nodes - 1 {
            i = d.nodes - 2;
        }
        Ok((i, u - i as f64))
    }

    /// Left/right neighbor of node `i` in dimension `dim` with periodic wrap.
    /// At non-periodic boundaries the missing neighbor is reported as `None`.
    pub fn neighbor(&self, dim: usize, i: usize, right: bool) -> Option<usize> {
        let d = &self.dims[dim];
        if right {
            if i + 1 < d.nodes {
                Some(i + 1)
            } else if d.periodic {
                Some(0)
            } else {
                None
            }
        } else if i > 0 {
            Some(i - 1)
        } else if d.periodic {
            Some(d.nodes - 1)
        } else {
            None
        }
    }
}

/// Scalar field sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "value count {} does not match grid node count {}",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid function values must be finite".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Sample a function at every node.
    pub fn sample<F: FnMut(&[f64]) -> f64>(grid: Arc<Grid>, mut f: F) -> Result<Self> {
        let mut coords = [0.0; MAX_DIMS];
        let n = grid.rank();
        let values = (0..grid.len())
            .map(|flat| {
                grid.node_coords(flat, &mut coords[..n]);
                f(&coords[..n])
            })
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Multilinear interpolation. Exact at nodes and for affine functions
    /// along non-periodic dimensions.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.grid.rank();
        if x.len() != n {
            return Err(Error::InvalidArgument(format!(
                "query point rank {} does not match grid rank {n}",
                x.len()
            )));
        }
        let mut base = [0usize; MAX_DIMS];
        let mut frac = [0.0f64; MAX_DIMS];
        for i in 0..n {
            let (b, f) = self.grid.locate(i, x[i])?;
            base[i] = b;
            frac[i] = f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for i in 0..n {
                let hi = (corner >> i) & 1 == 1;
                weight *= if hi { frac[i] } else { 1.0 - frac[i] };
                if weight == 0.0 {
                    break;
                }
                let idx = if hi {
                    self.grid
                        .neighbor(i, base[i], true)
                        .unwrap_or(base[i])
                } else {
                    base[i]
                };
                flat += idx * self.grid.strides()[i];
            }
            if weight != 0.0 {
                acc += weight * self.values[flat];
            }
        }
        Ok(acc)
    }

    /// Per-dimension derivative field: central differences in the interior,
    /// one-sided second order at non-periodic boundaries, wrapped central
    /// differences on periodic dimensions.
    pub fn gradient(&self) -> Vec<GridFunction> {
        (0..self.grid.rank())
            .map(|dim| self.derivative(dim))
            .collect()
    }

    fn derivative(&self, dim: usize) -> GridFunction {
        let g = &self.grid;
        let n = g.rank();
        let h = g.spacing(dim);
        let stride = g.strides()[dim];
        let count = g.dim(dim).nodes;
        let periodic = g.dim(dim).periodic;
        let mut out = vec![0.0; self.values.len()];
        let mut idx = [0usize; MAX_DIMS];
        for flat in 0..self.values.len() {
            g.unflatten(flat, &mut idx[..n]);
            let i = idx[dim];
            let v = &self.values;
            out[flat] = if periodic {
                let im = if i == 0 { count - 1 } else { i - 1 };
                let ip = if i + 1 == count { 0 } else { i + 1 };
                let fm = v[flat - i * stride + im * stride];
                let fp = v[flat - i * stride + ip * stride];
                (fp - fm) / (2.0 * h)
            } else if i == 0 {
                (-3.0 * v[flat] + 4.0 * v[flat + stride] - v[flat + 2 * stride]) / (2.0 * h)
            } else if i + 1 == count {
                (3.0 * v[flat] - 4.0 * v[flat - stride] + v[flat - 2 * stride]) / (2.0 * h)
            } else {
                (v[flat + stride] - v[flat - stride]) / (2.0 * h)
            };
        }
        GridFunction {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// First-order one-sided differences `(D⁻, D⁺)` along `dim` with periodic
    /// wrapping. At non-periodic boundaries the outward value copies the
    /// adjacent interior difference.
    pub fn upwind_pair(&self, dim: usize) -> (GridFunction, GridFunction) {
        let g = &self.grid;
        let n = g.rank();
        let h = g.spacing(dim);
        let stride = g.strides()[dim];
        let count = g.dim(dim).nodes;
        let periodic = g.dim(dim).periodic;
        let len = self.values.len();
        let mut left = vec![0.0; len];
        let mut right = vec![0.0; len];
        let mut idx = [0usize; MAX_DIMS];
        for flat in 0..len {
            g.unflatten(flat, &mut idx[..n]);
            let i = idx[dim];
            let v = &self.values;
            let line = flat - i * stride;
            let fm = if i > 0 {
                Some(v[line + (i - 1) * stride])
            } else if periodic {
                Some(v[line + (count - 1) * stride])
            } else {
                None
            };
            let fp = if i + 1 < count {
                Some(v[line + (i + 1) * stride])
            } else if periodic {
                Some(v[line])
            } else {
                None
            };
            let f = v[flat];
            let dm = fm.map(|fm| (f - fm) / h);
            let dp = fp.map(|fp| (fp - f) / h);
            left[flat] = dm.unwrap_or_else(|| dp.unwrap());
            right[flat] = dp.unwrap_or_else(|| dm.unwrap());
        }
        (
            GridFunction {
                grid: self.grid.clone(),
                values: left,
            },
            GridFunction {
                grid: self.grid.clone(),
                values: right,
            },
        )
    }
}
