//! Temperature steppers.
//!
//! Hyperbolic (Cattaneo) form, `τ > 0`:
//!
//! ```text
//! τm Θ_tt + (m + τℓ) Θ_t + ℓΘ - κΔΘ = S + f
//! ```
//!
//! discretised with central differences and the Newmark `β = 1/4` average
//! `(Θ⁺ + 2Θⁿ + Θ⁻)/4` on the reaction and diffusion terms, so each step is
//! one SPD solve with `(τm/dt² + (m+τℓ)/(2dt) + ℓ/4) I + (κ/4)(-Δ_h)`.
//!
//! Parabolic (Fourier) form, `τ = 0`: `mΘ_t + ℓΘ - κΔΘ = S + f` with
//! Crank–Nicolson.
//!
//! The Cattaneo flux `q` is not part of the dynamics; [`flux_reconstruct`]
//! integrates `τq_t + q = -κ∇Θ` on the faces for diagnostics.

use thiserror::Error;

use crate::grid::{face_gradient, laplacian, GridFunction};
use crate::linalg::{assemble_operator, cg_solve_from, LinalgError, MassWeights, SolveReport, SolverOptions};
use crate::medium::MediumParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("relaxation time is zero; the hyperbolic form is undefined")]
    TauZero,
    #[error("state is in {found:?} mode, expected {expected:?}")]
    ModeMismatch { expected: ThermalMode, found: ThermalMode },
    #[error("linear solve did not converge: residual {:e} after {} iterations", .0.final_residual, .0.iterations)]
    SolverNoConvergence(SolveReport),
    #[error("linear solver: {0}")]
    Solver(#[from] LinalgError),
    #[error("flux has {found} components on axis {axis}, grid has {expected} faces")]
    FluxShape { axis: usize, expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalMode {
    Hyperbolic,
    Parabolic,
}

/// Temperature history.
///
/// `theta_t_curr` is the backward quotient `(θ_curr - θ_prev)/dt`. In
/// parabolic mode `theta_prev` is carried along but never enters a step.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub theta_prev: GridFunction,
    pub theta_curr: GridFunction,
    pub theta_t_curr: GridFunction,
    pub dt: f64,
    pub t: f64,
    pub mode: ThermalMode,
}

impl ThermalState {
    /// Hyperbolic start with the Taylor ghost level
    /// `Θ⁻¹ = Θ0 - dt Θ1 + dt²/2 Θ2`.
    pub fn start_hyperbolic(theta0: &GridFunction, theta1: &GridFunction, theta2: &GridFunction, dt: f64) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        let prev = theta0.axpy(-dt, theta1).axpy(0.5 * dt * dt, theta2);
        Self::from_levels(prev, theta0.clone(), dt, ThermalMode::Hyperbolic)
    }

    /// Parabolic start. `theta_prev` is an optional reconstruction used only
    /// by reports; it defaults to `theta0`.
    pub fn start_parabolic(theta0: &GridFunction, theta_prev: Option<GridFunction>, dt: f64) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        let prev = theta_prev.unwrap_or_else(|| theta0.clone());
        Self::from_levels(prev, theta0.clone(), dt, ThermalMode::Parabolic)
    }

    fn from_levels(prev: GridFunction, curr: GridFunction, dt: f64, mode: ThermalMode) -> Self {
        let theta_t_curr = curr.zip_map(&prev, |a, b| (a - b) / dt);
        Self { theta_prev: prev, theta_curr: curr, theta_t_curr, dt, t: 0.0, mode }
    }

    fn advance(&self, next: GridFunction) -> Self {
        Self::from_levels(self.theta_curr.clone(), next, self.dt, self.mode).at_time(self.t + self.dt)
    }

    fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }
}

/// Face-centred flux, one vector per axis in the layout of
/// [`face_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct FluxState {
    pub q: Vec<Vec<f64>>,
    pub t: f64,
}

impl FluxState {
    pub fn zeros(grid: &crate::grid::Grid) -> Self {
        Self { q: (0..grid.dim()).map(|a| vec![0.0; grid.face_count(a)]).collect(), t: 0.0 }
    }

    /// Fourier flux `-κ∇Θ`.
    pub fn fourier(theta: &GridFunction, kappa: f64, t: f64) -> Self {
        let q = (0..theta.grid().dim())
            .map(|a| face_gradient(theta, a).into_iter().map(|g| -kappa * g).collect())
            .collect();
        Self { q, t }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// `Θ_tt(0)` from
/// `τmΘ_tt(0) = -(m+τℓ)Θ1 - ℓΘ0 + κΔΘ0 + Q(p1) + τ ∂_tQ(p1, p2)`.
pub fn init_theta2(
    params: &MediumParams,
    theta0: &GridFunction,
    theta1: &GridFunction,
    p1: &GridFunction,
    p2: &GridFunction,
) -> Result<GridFunction, ThermalError> {
    if !(params.tau > 0.0) {
        return Err(ThermalError::TauZero);
    }
    let (m, ell, tau, kappa) = (params.m(), params.ell(), params.tau, params.kappa_a);
    let q = params.q_coefficient();
    let lap0 = laplacian(theta0);
    let mut out = GridFunction::zeros(theta0.grid());
    for (i, slot) in out.values_mut().iter_mut().enumerate() {
        let (v1, v2) = (p1.values()[i], p2.values()[i]);
        let rhs = -(m + tau * ell) * theta1.values()[i] - ell * theta0.values()[i]
            + kappa * lap0.values()[i]
            + q * v1 * v1
            + tau * 2.0 * q * v1 * v2;
        *slot = rhs / (tau * m);
    }
    Ok(out)
}

fn solve(
    operator: &crate::linalg::SparseOperator,
    rhs: &GridFunction,
    guess: &GridFunction,
    solver: &SolverOptions,
) -> Result<GridFunction, ThermalError> {
    let maxit = solver.max_iterations_for(rhs.len());
    let (x, report) = cg_solve_from(operator, rhs.values(), Some(guess.values()), solver.tol, maxit)?;
    if !report.converged {
        return Err(ThermalError::SolverNoConvergence(report));
    }
    Ok(GridFunction::from_values(rhs.grid(), x).expect("solver preserves length"))
}

/// One hyperbolic step; `source` is `Q + τ∂_tQ` at `tⁿ`.
pub fn thermal_step_hyperbolic(
    state: &ThermalState,
    source: &GridFunction,
    params: &MediumParams,
    forcing: Option<&GridFunction>,
    solver: &SolverOptions,
) -> Result<ThermalState, ThermalError> {
    if state.mode != ThermalMode::Hyperbolic {
        return Err(ThermalError::ModeMismatch { expected: ThermalMode::Hyperbolic, found: state.mode });
    }
    if !(params.tau > 0.0) {
        return Err(ThermalError::TauZero);
    }
    let dt = state.dt;
    let (m, ell, tau, kappa) = (params.m(), params.ell(), params.tau, params.kappa_a);
    let inertia = tau * m / (dt * dt);
    let damping = (m + tau * ell) / (2.0 * dt);
    let grid = state.theta_curr.grid();
    let operator = assemble_operator(MassWeights::Uniform(inertia + damping + 0.25 * ell), 0.25 * kappa, grid)?;

    let (prev, curr) = (&state.theta_prev, &state.theta_curr);
    let stiff_arg = curr.scale(2.0).axpy(1.0, prev);
    let lap = laplacian(&stiff_arg);
    let mut rhs = GridFunction::zeros(grid);
    for (i, slot) in rhs.values_mut().iter_mut().enumerate() {
        let (a, b) = (curr.values()[i], prev.values()[i]);
        let f = forcing.map_or(0.0, |f| f.values()[i]);
        *slot = inertia * (2.0 * a - b) + damping * b - 0.25 * ell * stiff_arg.values()[i]
            + 0.25 * kappa * lap.values()[i]
            + source.values()[i]
            + f;
    }
    let guess = curr.scale(2.0).axpy(-1.0, prev);
    let next = solve(&operator, &rhs, &guess, solver)?;
    Ok(state.advance(next))
}

/// One Crank–Nicolson step; `source` and `forcing` are taken at `tⁿ⁺½`.
pub fn thermal_step_parabolic(
    state: &ThermalState,
    source: &GridFunction,
    params: &MediumParams,
    forcing: Option<&GridFunction>,
    solver: &SolverOptions,
) -> Result<ThermalState, ThermalError> {
    if state.mode != ThermalMode::Parabolic {
        return Err(ThermalError::ModeMismatch { expected: ThermalMode::Parabolic, found: state.mode });
    }
    let dt = state.dt;
    let (m, ell, kappa) = (params.m(), params.ell(), params.kappa_a);
    let grid = state.theta_curr.grid();
    let operator = assemble_operator(MassWeights::Uniform(m / dt + 0.5 * ell), 0.5 * kappa, grid)?;
    let curr = &state.theta_curr;
    let lap = laplacian(curr);
    let mut rhs = GridFunction::zeros(grid);
    for (i, slot) in rhs.values_mut().iter_mut().enumerate() {
        let f = forcing.map_or(0.0, |f| f.values()[i]);
        *slot = (m / dt - 0.5 * ell) * curr.values()[i] + 0.5 * kappa * lap.values()[i] + source.values()[i] + f;
    }
    let next = solve(&operator, &rhs, curr, solver)?;
    Ok(state.advance(next))
}

/// Exponential-integrator update of `τq_t + q = -κ∇Θ` over `dt`, with
/// `theta` held fixed over the step.
pub fn flux_reconstruct(
    flux: &FluxState,
    theta: &GridFunction,
    params: &MediumParams,
    dt: f64,
) -> Result<FluxState, ThermalError> {
    if !(params.tau > 0.0) {
        return Err(ThermalError::TauZero);
    }
    let grid = theta.grid();
    let decay = (-dt / params.tau).exp();
    let mut q = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let old = &flux.q[axis];
        if old.len() != grid.face_count(axis) {
            return Err(ThermalError::FluxShape { axis, expected: grid.face_count(axis), found: old.len() });
        }
        let grad = face_gradient(theta, axis);
        q.push(
            old.iter()
                .zip(&grad)
                .map(|(&qo, &g)| decay * qo + (1.0 - decay) * (-params.kappa_a * g))
                .collect(),
        );
    }
    Ok(FluxState { q, t: flux.t + dt })
}
