//! Implicit stepper for the temperature-coupled Westervelt equation
//!
//! ```text
//! (1 - 2k(Θ)p) p_tt - h(0)Δp - bΔp_t = 2k(Θ) p_t² + h̃(Θ)Δp + f
//! ```
//!
//! with homogeneous Dirichlet data. The scheme is three-level and centred at
//! `tⁿ`:
//!
//! ```text
//! w (p⁺ - 2pⁿ + p⁻)/dt² - h(Θⁿ) Δ_h (p⁺ + 2pⁿ + p⁻)/4 - b Δ_h (p⁺ - p⁻)/(2dt)
//!     = 2k(Θⁿ) ((p⁺ - p⁻)/(2dt))² + f(tⁿ),        w = 1 - 2k(Θⁿ)pⁿ
//! ```
//!
//! The stiffness average is the Newmark `β = 1/4` rule, which keeps the
//! scheme second order and unconditionally stable for the linear wave
//! part. The only nonlinearity left in `p⁺` is the squared velocity, which
//! is resolved by Picard iteration. Each iterate solves
//!
//! ```text
//! diag(w / (dt² σ)) p⁺ - Δ_h p⁺ = rhs / σ,        σ = h(Θⁿ)/4 + b/(2dt)
//! ```
//!
//! i.e. the row-scaled system, which stays symmetric positive definite even
//! though `h(Θⁿ)` varies in space.

use thiserror::Error;

use crate::grid::{laplacian, GridFunction};
use crate::linalg::{assemble_operator, cg_solve_from, LinalgError, MassWeights, SolveReport, SolverOptions};
use crate::medium::{coefficient_fields, MediumError, MediumParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticError {
    #[error("initial data degenerate: 1 - 2k(Θ0)p0 = {value} at node {index} is below the floor {floor}")]
    DegenerateInitialData { index: usize, value: f64, floor: f64 },
    #[error("degeneracy abort: 1 - 2k(Θ)p ranges over [{min_coeff}, {max_coeff}], outside [{floor}, {ceiling}]")]
    DegeneracyAbort { min_coeff: f64, max_coeff: f64, floor: f64, ceiling: f64 },
    #[error("Picard iteration failed after {iterations} iterates (last relative update {last_update:e})")]
    PicardNoConvergence { iterations: usize, last_update: f64 },
    #[error("linear solve did not converge: residual {:e} after {} iterations", .0.final_residual, .0.iterations)]
    SolverNoConvergence(SolveReport),
    #[error("linear solver: {0}")]
    Solver(#[from] LinalgError),
    #[error("medium: {0}")]
    Medium(#[from] MediumError),
    #[error("insufficient history: {0}")]
    InsufficientHistory(&'static str),
    #[error("invalid degeneracy configuration: floor_alpha = {floor_alpha}, cap_m = {cap_m}")]
    InvalidDegeneracyConfig { floor_alpha: f64, cap_m: f64 },
}

/// Admissible window for the coefficient `1 - 2k(Θ)p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyConfig {
    /// Abort when `min(1 - 2k(Θ)p)` drops below this.
    pub floor_alpha: f64,
    /// Bound on `2 max|k(Θ)p|`; the window's upper edge is `1 + cap_m`.
    pub cap_m: f64,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        Self { floor_alpha: 0.5, cap_m: 0.5 }
    }
}

impl DegeneracyConfig {
    pub fn validate(&self) -> Result<(), AcousticError> {
        let ok = self.floor_alpha > 0.0
            && self.floor_alpha < 1.0
            && self.cap_m > 0.0
            && self.cap_m < 1.0
            && self.floor_alpha <= 1.0 - self.cap_m;
        if ok {
            Ok(())
        } else {
            Err(AcousticError::InvalidDegeneracyConfig { floor_alpha: self.floor_alpha, cap_m: self.cap_m })
        }
    }

    pub fn ceiling(&self) -> f64 {
        1.0 + self.cap_m
    }

    fn check(&self, min_coeff: f64, max_coeff: f64) -> Result<(), AcousticError> {
        if min_coeff >= self.floor_alpha && max_coeff <= self.ceiling() {
            Ok(())
        } else {
            Err(AcousticError::DegeneracyAbort {
                min_coeff,
                max_coeff,
                floor: self.floor_alpha,
                ceiling: self.ceiling(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Relative update `‖p⁽ˢ⁺¹⁾ - p⁽ˢ⁾‖ / ‖p⁽ˢ⁺¹⁾‖` that ends the iteration.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 25 }
    }
}

/// Pressure history for the three-level scheme.
///
/// `p_tt_curr` is the centred second difference at `t - dt` (the newest
/// level that has both neighbours); `p_tt_prev` is the one before it.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticState {
    pub p_prev: GridFunction,
    pub p_curr: GridFunction,
    pub p_tt_curr: Option<GridFunction>,
    pub p_tt_prev: Option<GridFunction>,
    pub dt: f64,
    /// Time of `p_curr`.
    pub t: f64,
}

impl AcousticState {
    /// Starts from `p(0)`, `p_t(0)`, `p_tt(0)` with the Taylor ghost level
    /// `p⁻¹ = p0 - dt p1 + dt²/2 p2`.
    pub fn start(p0: &GridFunction, p1: &GridFunction, p2: &GridFunction, dt: f64) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        let p_prev = p0.zip_map(p1, |a, b| a - dt * b).axpy(0.5 * dt * dt, p2);
        Self { p_prev, p_curr: p0.clone(), p_tt_curr: None, p_tt_prev: None, dt, t: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub picard_iterations: usize,
    /// Relative update of every Picard iterate.
    pub picard_updates: Vec<f64>,
    pub cg_iterations: usize,
    pub last_solve: SolveReport,
    /// Extremes of `1 - 2k(Θⁿ)p` over the current level and every iterate.
    pub min_coeff: f64,
    pub max_coeff: f64,
    /// `2 max|k p| > cap_m` was observed (only possible if the window is
    /// wider than the cap, which the default configuration does not allow).
    pub cap_exceeded: bool,
}

/// `p_tt(0)` from `(1 - 2k(Θ0)p0) p_tt(0) = h(Θ0)Δp0 + bΔp1 + 2k(Θ0)p1²`.
pub fn init_p2(
    params: &MediumParams,
    p0: &GridFunction,
    p1: &GridFunction,
    theta0: &GridFunction,
    degeneracy: &DegeneracyConfig,
) -> Result<GridFunction, AcousticError> {
    let coef = coefficient_fields(params, theta0)?;
    let w = coef.k.zip_map(p0, |k, p| 1.0 - 2.0 * k * p);
    if let Some((index, &value)) = w
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= degeneracy.floor_alpha))
    {
        return Err(AcousticError::DegenerateInitialData { index, value, floor: degeneracy.floor_alpha });
    }
    let lap_p0 = laplacian(p0);
    let lap_p1 = laplacian(p1);
    let mut p2 = GridFunction::zeros(p0.grid());
    for (i, slot) in p2.values_mut().iter_mut().enumerate() {
        let k = coef.k.values()[i];
        let v1 = p1.values()[i];
        let rhs = coef.h.values()[i] * lap_p0.values()[i] + params.b * lap_p1.values()[i] + 2.0 * k * v1 * v1;
        *slot = rhs / w.values()[i];
    }
    Ok(p2)
}

/// `p_ttt` at `t - dt` by backward differencing of the stored `p_tt` levels.
pub fn p_ttt_estimate(state: &AcousticState) -> Result<GridFunction, AcousticError> {
    match (&state.p_tt_curr, &state.p_tt_prev) {
        (Some(curr), Some(prev)) => Ok(curr.zip_map(prev, |a, b| (a - b) / state.dt)),
        _ => Err(AcousticError::InsufficientHistory("p_ttt needs two stored p_tt levels")),
    }
}

/// The linear system solved by one Picard iterate, with `Θⁿ` and `pⁿ`
/// frozen.
#[derive(Debug, Clone)]
pub struct PicardSystem {
    operator: crate::linalg::SparseOperator,
    /// `σ = h(Θⁿ)/4 + b/(2dt)` per node.
    sigma: GridFunction,
    /// Everything on the right-hand side except `2k p_t²`.
    fixed_rhs: GridFunction,
    k: GridFunction,
    p_prev: GridFunction,
    dt: f64,
    nonlinear: bool,
}

impl PicardSystem {
    pub fn new(
        state: &AcousticState,
        theta: &GridFunction,
        params: &MediumParams,
        forcing: Option<&GridFunction>,
    ) -> Result<(Self, GridFunction), AcousticError> {
        let dt = state.dt;
        let coef = coefficient_fields(params, theta)?;
        let w = coef.k.zip_map(&state.p_curr, |k, p| 1.0 - 2.0 * k * p);
        let damping = params.b / (2.0 * dt);
        let sigma = coef.h.map(|h| 0.25 * h + damping);
        let mass = w.zip_map(&sigma, |wi, si| wi / (dt * dt * si));
        // The window check runs before assembly, so a degenerate mass is
        // reported as such rather than as an assembly error.
        let operator = match assemble_operator(MassWeights::Field(&mass), 1.0, theta.grid()) {
            Ok(op) => op,
            Err(LinalgError::NonPositiveMassWeight { .. }) => {
                return Err(AcousticError::DegeneracyAbort {
                    min_coeff: w.min(),
                    max_coeff: w.max(),
                    floor: 0.0,
                    ceiling: f64::INFINITY,
                })
            }
            Err(e) => return Err(e.into()),
        };

        let (p_prev, p_curr) = (&state.p_prev, &state.p_curr);
        let stiff = laplacian(&p_curr.scale(2.0).axpy(1.0, p_prev));
        let lap_prev = laplacian(p_prev);
        let mut fixed_rhs = GridFunction::zeros(theta.grid());
        for (i, slot) in fixed_rhs.values_mut().iter_mut().enumerate() {
            let inertia = w.values()[i] * (2.0 * p_curr.values()[i] - p_prev.values()[i]) / (dt * dt);
            let f = forcing.map_or(0.0, |f| f.values()[i]);
            *slot = inertia + 0.25 * coef.h.values()[i] * stiff.values()[i] - damping * lap_prev.values()[i] + f;
        }
        let nonlinear = coef.k.values().iter().any(|&k| k != 0.0);
        let system = Self { operator, sigma, fixed_rhs, k: coef.k, p_prev: p_prev.clone(), dt, nonlinear };
        Ok((system, w))
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    /// Row-scaled right-hand side for a given guess of `p⁺`.
    pub fn rhs(&self, guess: &GridFunction) -> Vec<f64> {
        let inv_2dt = 1.0 / (2.0 * self.dt);
        (0..guess.len())
            .map(|i| {
                let p_t = (guess.values()[i] - self.p_prev.values()[i]) * inv_2dt;
                let nl = 2.0 * self.k.values()[i] * p_t * p_t;
                (self.fixed_rhs.values()[i] + nl) / self.sigma.values()[i]
            })
            .collect()
    }

    /// One Picard iterate: solve with the nonlinearity frozen at `guess`.
    pub fn iterate(
        &self,
        guess: &GridFunction,
        tol: f64,
        max_iterations: usize,
    ) -> Result<(GridFunction, SolveReport), AcousticError> {
        let b = self.rhs(guess);
        let (x, report) = cg_solve_from(&self.operator, &b, Some(guess.values()), tol, max_iterations)?;
        if !report.converged {
            return Err(AcousticError::SolverNoConvergence(report));
        }
        Ok((GridFunction::from_values(guess.grid(), x).expect("solver preserves length"), report))
    }
}

fn euclid(v: &GridFunction) -> f64 {
    v.values().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Advances the pressure one step with `theta` (= `Θⁿ`) frozen.
pub fn acoustic_step(
    state: &AcousticState,
    theta: &GridFunction,
    params: &MediumParams,
    forcing: Option<&GridFunction>,
    degeneracy: &DegeneracyConfig,
    picard: &PicardOptions,
    solver: &SolverOptions,
) -> Result<(AcousticState, StepDiagnostics), AcousticError> {
    acoustic_step_from(state, theta, params, forcing, degeneracy, picard, solver, None)
}

/// [`acoustic_step`] with an explicit first Picard guess for `p⁺`; the
/// default guess is the extrapolation `2pⁿ - pⁿ⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn acoustic_step_from(
    state: &AcousticState,
    theta: &GridFunction,
    params: &MediumParams,
    forcing: Option<&GridFunction>,
    degeneracy: &DegeneracyConfig,
    picard: &PicardOptions,
    solver: &SolverOptions,
    guess: Option<&GridFunction>,
) -> Result<(AcousticState, StepDiagnostics), AcousticError> {
    let (system, w) = PicardSystem::new(state, theta, params, forcing)?;
    let (mut min_coeff, mut max_coeff) = (w.min(), w.max());
    degeneracy.check(min_coeff, max_coeff)?;

    let cg_tol = solver.tol.min(1e-2 * picard.tol).max(1e-14);
    let maxit = solver.max_iterations_for(theta.len());
    let noise = (100.0 * cg_tol).max(1e3 * f64::EPSILON);

    let mut guess = match guess {
        Some(g) => g.clone(),
        None => state.p_curr.scale(2.0).axpy(-1.0, &state.p_prev),
    };
    let mut updates = Vec::new();
    let mut cg_iterations = 0;
    let k = &system.k;
    let next = loop {
        let (candidate, report) = system.iterate(&guess, cg_tol, maxit)?;
        cg_iterations += report.iterations;
        let coeff = k.zip_map(&candidate, |k, p| 1.0 - 2.0 * k * p);
        min_coeff = min_coeff.min(coeff.min());
        max_coeff = max_coeff.max(coeff.max());
        degeneracy.check(min_coeff, max_coeff)?;

        let norm = euclid(&candidate);
        let delta = euclid(&(&candidate - &guess));
        let update = if norm > 0.0 { delta / norm } else { delta };
        updates.push(update);
        let done = !system.is_nonlinear() || update <= picard.tol;
        if done {
            break (candidate, report);
        }
        let n = updates.len();
        let growing = n >= 2 && update > updates[n - 2] && update > noise;
        if growing || n >= picard.max_iterations {
            return Err(AcousticError::PicardNoConvergence { iterations: n, last_update: update });
        }
        guess = candidate;
    };
    let (p_next, last_solve) = next;

    let dt = state.dt;
    let p_tt = p_next.zip_map(&state.p_curr, |a, b| a - 2.0 * b).axpy(1.0, &state.p_prev).scale(1.0 / (dt * dt));
    let cap_exceeded = 1.0 - min_coeff > degeneracy.cap_m || max_coeff - 1.0 > degeneracy.cap_m;
    let new_state = AcousticState {
        p_prev: state.p_curr.clone(),
        p_curr: p_next,
        p_tt_prev: state.p_tt_curr.clone(),
        p_tt_curr: Some(p_tt),
        dt,
        t: state.t + dt,
    };
    let diagnostics = StepDiagnostics {
        picard_iterations: updates.len(),
        picard_updates: updates,
        cg_iterations,
        last_solve,
        min_coeff,
        max_coeff,
        cap_exceeded,
    };
    Ok((new_state, diagnostics))
}
