//! Uniform tensor-product grids with homogeneous Dirichlet closure.
//!
//! Only interior nodes carry unknowns. Boundary nodes are implicit and
//! always hold zero, so every stencil below reads `0.0` when it steps off
//! the interior block. Node `j` along axis `a` sits at `(j + 1) * h_a`.
//!
//! Storage is lexicographic with axis 0 running fastest.
//!
//! Norms use midpoint quadrature with the cell volume `h_0 * h_1 * ...`,
//! and the gradient is measured on the faces between neighbouring nodes
//! (including the half-cells next to the boundary). With these choices the
//! discrete Green identity `-(Δ_h u, u) * vol = ‖∇_h u‖²` holds exactly.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid dimension {0}, expected 1, 2 or 3")]
    InvalidDimension(usize),
    #[error("expected {expected} entries per axis, got {got}")]
    AxisCountMismatch { expected: usize, got: usize },
    #[error("extent along axis {axis} must be positive, got {value}")]
    NonPositiveExtent { axis: usize, value: f64 },
    #[error("axis {axis} needs at least 3 interior nodes, got {count}")]
    TooFewNodes { axis: usize, count: usize },
    #[error("value vector has length {got}, grid has {expected} interior nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative weight {value} at node {index}")]
    NegativeWeight { index: usize, value: f64 },
}

/// Rectangular box `[0, L_0] x ... x [0, L_{d-1}]` with uniform spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    strides: [usize; MAX_DIM],
}

/// Builds a grid from per-axis extents and interior node counts.
pub fn build_grid(dim: usize, extents: &[f64], counts: &[usize]) -> Result<Grid, GridError> {
    Grid::new(dim, extents, counts)
}

impl Grid {
    pub fn new(dim: usize, extents: &[f64], counts: &[usize]) -> Result<Self, GridError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        for got in [extents.len(), counts.len()] {
            if got != dim {
                return Err(GridError::AxisCountMismatch { expected: dim, got });
            }
        }
        let mut grid = Grid {
            dim,
            extents: [1.0; MAX_DIM],
            counts: [1; MAX_DIM],
            spacing: [1.0; MAX_DIM],
            strides: [0; MAX_DIM],
        };
        let mut stride = 1;
        for axis in 0..dim {
            let (extent, count) = (extents[axis], counts[axis]);
            if !(extent > 0.0 && extent.is_finite()) {
                return Err(GridError::NonPositiveExtent { axis, value: extent });
            }
            if count < 3 {
                return Err(GridError::TooFewNodes { axis, count });
            }
            grid.extents[axis] = extent;
            grid.counts[axis] = count;
            grid.spacing[axis] = extent / (count + 1) as f64;
            grid.strides[axis] = stride;
            stride *= count;
        }
        Ok(grid)
    }

    /// Unit interval with `n` interior nodes.
    pub fn unit_interval(n: usize) -> Result<Self, GridError> {
        Self::new(1, &[1.0], &[n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Multi-index of a flat node index.
    pub fn unravel(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for (axis, slot) in out.iter_mut().enumerate().take(self.dim) {
            *slot = index % self.counts[axis];
            index /= self.counts[axis];
        }
        out
    }

    /// Physical coordinates of a node.
    pub fn coords(&self, index: usize) -> [f64; MAX_DIM] {
        let multi = self.unravel(index);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = (multi[axis] + 1) as f64 * self.spacing[axis];
        }
        x
    }

    /// Evaluates `f` at every interior node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = (0..self.len())
            .map(|i| {
                let x = self.coords(i);
                f(&x[..self.dim])
            })
            .collect();
        GridFunction { grid: *self, values }
    }

    /// Number of faces normal to `axis`: one more than nodes along that axis.
    pub fn face_count(&self, axis: usize) -> usize {
        self.len() / self.counts[axis] * (self.counts[axis] + 1)
    }
}

/// Nodal values on the interior of a [`Grid`]; zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { grid: *grid, values: vec![value; grid.len()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Nodewise combination of two functions on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid functions live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        self.scale(rhs)
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.scale(-1.0)
    }
}

/// Discrete norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBundle {
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    /// `‖∇u‖_{L²}`
    pub h1_semi: f64,
}

impl NormBundle {
    /// Full H¹ norm `sqrt(‖u‖² + ‖∇u‖²)`.
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

/// Plain Euclidean dot product of nodal values (no cell volume).
pub fn dot(u: &GridFunction, v: &GridFunction) -> f64 {
    assert_eq!(u.grid, v.grid, "grid functions live on different grids");
    u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum()
}

/// Quadrature inner product `Σ u v · vol`.
pub fn l2_inner(u: &GridFunction, v: &GridFunction) -> f64 {
    dot(u, v) * u.grid.cell_volume()
}

/// `‖u‖²_{L²}` by midpoint quadrature.
pub fn l2_sq(u: &GridFunction) -> f64 {
    l2_inner(u, u)
}

/// Applies the `(2d+1)`-point Laplacian with zero boundary values.
pub fn laplacian(u: &GridFunction) -> GridFunction {
    let grid = &u.grid;
    let vals = &u.values;
    let mut out = vec![0.0; vals.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let multi = grid.unravel(i);
        let centre = vals[i];
        let mut acc = 0.0;
        for axis in 0..grid.dim {
            let h = grid.spacing[axis];
            let s = grid.strides[axis];
            let left = if multi[axis] > 0 { vals[i - s] } else { 0.0 };
            let right = if multi[axis] + 1 < grid.counts[axis] { vals[i + s] } else { 0.0 };
            acc += (left - 2.0 * centre + right) / (h * h);
        }
        *slot = acc;
    }
    GridFunction { grid: *grid, values: out }
}

/// Face-centred differences `(u_j - u_{j-1}) / h` normal to `axis`.
///
/// Faces are ordered like nodes, with the face index along `axis` running
/// over `0..=n_axis` (face `j` lies between nodes `j-1` and `j`).
pub fn face_gradient(u: &GridFunction, axis: usize) -> Vec<f64> {
    let grid = &u.grid;
    assert!(axis < grid.dim, "axis {axis} out of range");
    let n = grid.counts[axis];
    let h = grid.spacing[axis];
    let s = grid.strides[axis];
    let mut out = Vec::with_capacity(grid.face_count(axis));
    // Faces are laid out with the same lexicographic order as nodes but with
    // `n + 1` entries along `axis`.
    let mut face_counts = grid.counts;
    face_counts[axis] = n + 1;
    let total: usize = face_counts[..grid.dim].iter().product();
    for f in 0..total {
        let mut rem = f;
        let mut node = 0;
        let mut j_axis = 0;
        for a in 0..grid.dim {
            let j = rem % face_counts[a];
            rem /= face_counts[a];
            if a == axis {
                j_axis = j;
            } else {
                node += j * grid.strides[a];
            }
        }
        let right = if j_axis < n { u.values[node + j_axis * s] } else { 0.0 };
        let left = if j_axis > 0 { u.values[node + (j_axis - 1) * s] } else { 0.0 };
        out.push((right - left) / h);
    }
    out
}

/// `‖∇u‖²_{L²}` summed over every face, boundary half-cells included.
pub fn gradient_sq(u: &GridFunction) -> f64 {
    let grid = &u.grid;
    let vals = &u.values;
    let mut acc = 0.0;
    for axis in 0..grid.dim {
        let h = grid.spacing[axis];
        let s = grid.strides[axis];
        let n = grid.counts[axis];
        let mut axis_sum = 0.0;
        for (i, &centre) in vals.iter().enumerate() {
            let j = (i / s) % n;
            let left = if j > 0 { vals[i - s] } else { 0.0 };
            axis_sum += (centre - left) * (centre - left);
            if j + 1 == n {
                axis_sum += centre * centre;
            }
        }
        acc += axis_sum / (h * h);
    }
    acc * grid.cell_volume()
}

pub fn norms(u: &GridFunction) -> NormBundle {
    let vol = u.grid.cell_volume();
    let (mut s2, mut s4, mut linf) = (0.0, 0.0, 0.0_f64);
    for &v in &u.values {
        let v2 = v * v;
        s2 += v2;
        s4 += v2 * v2;
        linf = linf.max(v.abs());
    }
    NormBundle {
        l2: (s2 * vol).sqrt(),
        l4: (s4 * vol).powf(0.25),
        linf,
        h1_semi: gradient_sq(u).sqrt(),
    }
}

/// `sqrt(Σ w u² vol)`; rejects negative weights.
pub fn weighted_l2(u: &GridFunction, w: &GridFunction) -> Result<f64, GridError> {
    assert_eq!(u.grid, w.grid, "grid functions live on different grids");
    let mut acc = 0.0;
    for (index, (&ui, &wi)) in u.values.iter().zip(&w.values).enumerate() {
        if wi < 0.0 || wi.is_nan() {
            return Err(GridError::NegativeWeight { index, value: wi });
        }
        acc += wi * ui * ui;
    }
    Ok((acc * u.grid.cell_volume()).sqrt())
}
