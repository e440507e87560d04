//! Sparse SPD operators on grid functions and the solvers the steppers use.
//!
//! Every implicit step in this crate inverts an operator of the form
//! `diag(w) + σ(-Δ_h)` with `w > 0`, which is symmetric positive definite.
//! CG with a Jacobi preconditioner is the workhorse; the Thomas algorithm
//! is kept as an independent oracle for 1D operators.

use thiserror::Error;

use crate::grid::{Grid, GridFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("mass weight must be positive, got {value} at node {index}")]
    NonPositiveMassWeight { index: usize, value: f64 },
    #[error("stiffness coefficient must be non-negative and finite, got {0}")]
    InvalidSigma(f64),
    #[error("operator has an entry at ({row}, {col}) outside the tridiagonal band")]
    NotTridiagonal { row: usize, col: usize },
    #[error("dimension mismatch: operator is {expected}x{expected}, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numeric breakdown in {0}")]
    NumericBreakdown(&'static str),
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("inverse iteration did not converge after {iterations} iterations (last change {change:e})")]
    EigenNoConvergence { iterations: usize, change: f64 },
    #[error("inner solve failed to converge: residual {residual:e} after {iterations} iterations")]
    InnerSolveFailed { iterations: usize, residual: f64 },
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_offsets: Vec<usize>,
    column_indices: Vec<usize>,
    coefficients: Vec<f64>,
}

/// Mass term of an assembled operator.
#[derive(Debug, Clone, Copy)]
pub enum MassWeights<'a> {
    Uniform(f64),
    Field(&'a GridFunction),
}

impl MassWeights<'_> {
    fn at(&self, index: usize) -> f64 {
        match self {
            MassWeights::Uniform(w) => *w,
            MassWeights::Field(f) => f.values()[index],
        }
    }
}

/// Assembles `diag(w) + σ(-Δ_h)` on `grid`.
pub fn assemble_operator(
    mass: MassWeights<'_>,
    sigma: f64,
    grid: &Grid,
) -> Result<SparseOperator, LinalgError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(LinalgError::InvalidSigma(sigma));
    }
    if let MassWeights::Field(f) = mass {
        assert_eq!(f.grid(), grid, "mass weights live on a different grid");
    }
    for index in 0..grid.len() {
        let value = mass.at(index);
        if !(value > 0.0 && value.is_finite()) {
            return Err(LinalgError::NonPositiveMassWeight { index, value });
        }
    }
    Ok(stencil_operator(grid, sigma, |i| mass.at(i)))
}

fn stencil_operator(grid: &Grid, sigma: f64, diag: impl Fn(usize) -> f64) -> SparseOperator {
    let n = grid.len();
    let dim = grid.dim();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut column_indices = Vec::with_capacity(n * (2 * dim + 1));
    let mut coefficients = Vec::with_capacity(n * (2 * dim + 1));
    row_offsets.push(0);
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let centre: f64 = 2.0 * sigma * inv_h2.iter().sum::<f64>();
    for i in 0..n {
        let multi = grid.unravel(i);
        // Columns are emitted in increasing order: far-left neighbours first.
        for axis in (0..dim).rev() {
            if multi[axis] > 0 && sigma != 0.0 {
                column_indices.push(i - grid.stride(axis));
                coefficients.push(-sigma * inv_h2[axis]);
            }
        }
        column_indices.push(i);
        coefficients.push(diag(i) + centre);
        for axis in 0..dim {
            if multi[axis] + 1 < grid.counts()[axis] && sigma != 0.0 {
                column_indices.push(i + grid.stride(axis));
                coefficients.push(-sigma * inv_h2[axis]);
            }
        }
        row_offsets.push(column_indices.len());
    }
    SparseOperator { n, row_offsets, column_indices, coefficients }
}

impl SparseOperator {
    /// `-Δ_h` with homogeneous Dirichlet closure.
    pub fn negative_laplacian(grid: &Grid) -> Self {
        stencil_operator(grid, 1.0, |_| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_offsets: (0..=n).collect(),
            column_indices: (0..n).collect(),
            coefficients: diag.to_vec(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of bounds for n = {n}");
            match rows[r].iter_mut().find(|(col, _)| *col == c) {
                Some(entry) => entry.1 += v,
                None => rows[r].push((c, v)),
            }
        }
        let mut op = Self {
            n,
            row_offsets: vec![0],
            column_indices: Vec::new(),
            coefficients: Vec::new(),
        };
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                op.column_indices.push(c);
                op.coefficients.push(v);
            }
            op.row_offsets.push(op.column_indices.len());
        }
        op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.coefficients.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Entries `(col, value)` of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.column_indices[range.clone()].iter().copied().zip(self.coefficients[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    /// Checks that every stored `(i, j)` has a matching `(j, i)` within `tol`
    /// relative to the largest coefficient.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.coefficients.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * scale))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative preconditioned residual `sqrt(rᵀD⁻¹r / bᵀD⁻¹b)`.
    pub final_residual: f64,
    pub converged: bool,
}

/// Tolerance and iteration cap for CG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` means `10 * n`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: None }
    }
}

impl SolverOptions {
    pub fn max_iterations_for(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n.max(1))
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn cg_solve(
    a: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    cg_solve_from(a, b, None, tol, max_iterations)
}

/// As [`cg_solve`], warm-started from `x0` when given.
pub fn cg_solve_from(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let n = a.n();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm_sq: f64 = b.iter().zip(&inv_diag).map(|(bi, di)| bi * bi * di).sum();
    if !b_norm_sq.is_finite() {
        return Err(LinalgError::NumericBreakdown("right-hand side"));
    }
    if b_norm_sq == 0.0 {
        let report = SolveReport { iterations: 0, final_residual: 0.0, converged: true };
        return Ok((vec![0.0; n], report));
    }

    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, got: x0.len() });
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.apply(&x);
        r.iter_mut().zip(&ax).for_each(|(ri, axi)| *ri -= axi);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut residual = (rz / b_norm_sq).sqrt();
    let mut iterations = 0;

    while residual > tol && iterations < max_iterations {
        a.apply_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !pap.is_finite() || pap <= 0.0 {
            return Err(LinalgError::NumericBreakdown("conjugate gradients (pᵀAp ≤ 0 or NaN)"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        if !rz_new.is_finite() {
            return Err(LinalgError::NumericBreakdown("conjugate gradients (residual is NaN)"));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        residual = (rz.max(0.0) / b_norm_sq).sqrt();
    }
    let report = SolveReport { iterations, final_residual: residual, converged: residual <= tol };
    Ok((x, report))
}

/// Thomas algorithm for operators whose entries all satisfy `|i - j| <= 1`.
pub fn direct_tridiagonal_solve(a: &SparseOperator, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.n();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        for (j, v) in a.row(i) {
            match j as isize - i as isize {
                -1 => lower[i] = v,
                0 => diag[i] = v,
                1 => upper[i] = v,
                _ => return Err(LinalgError::NotTridiagonal { row: i, col: j }),
            }
        }
    }
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 0..n {
        let denom = diag[i] - if i > 0 { lower[i] * c_prime[i - 1] } else { 0.0 };
        if denom == 0.0 || !denom.is_finite() {
            return Err(LinalgError::ZeroPivot(i));
        }
        c_prime[i] = upper[i] / denom;
        let prev = if i > 0 { lower[i] * d_prime[i - 1] } else { 0.0 };
        d_prime[i] = (b[i] - prev) / denom;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d_prime[i] - if i + 1 < n { c_prime[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}

/// Smallest eigenvalue of an SPD operator by inverse power iteration.
///
/// Each iteration solves with CG; convergence is declared when the Rayleigh
/// quotient changes by less than `tol` relative.
pub fn smallest_eigenvalue(a: &SparseOperator, tol: f64) -> Result<f64, LinalgError> {
    const MAX_ITERATIONS: usize = 1000;
    let n = a.n();
    let inner_tol = (tol * 1e-2).clamp(1e-13, 1e-10);
    let maxit = 20 * n.max(10);
    // Deterministic start with a component along every smooth mode.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * (0.37 * i as f64).sin()).collect();
    normalize(&mut x);
    let mut lambda = rayleigh(a, &x);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (mut y, report) = cg_solve_from(a, &x, Some(&x), inner_tol, maxit)?;
        if !report.converged {
            return Err(LinalgError::InnerSolveFailed {
                iterations: report.iterations,
                residual: report.final_residual,
            });
        }
        normalize(&mut y);
        let next = rayleigh(a, &y);
        if !next.is_finite() {
            return Err(LinalgError::NumericBreakdown("inverse iteration"));
        }
        change = (next - lambda).abs() / next.abs();
        x = y;
        lambda = next;
        if change <= tol {
            return Ok(lambda);
        }
    }
    Err(LinalgError::EigenNoConvergence { iterations: MAX_ITERATIONS, change })
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

fn rayleigh(a: &SparseOperator, x: &[f64]) -> f64 {
    let ax = a.apply(x);
    let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|v| v * v).sum();
    num / den
}
