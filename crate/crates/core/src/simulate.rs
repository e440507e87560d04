//! Coupled time loop, manufactured-solution studies and the relaxation
//! limit study.
//!
//! One coupled step from level `n` to `n + 1`:
//!
//! 1. pressure step with `Θⁿ` frozen in `h` and `k`;
//! 2. heat source from the new pressure level: `Q(p_tⁿ) + τ∂_tQ(p_tⁿ, p_ttⁿ)`
//!    with central quotients (hyperbolic), or `Q(p_t^{n+½})` with
//!    `p_t^{n+½} = (pⁿ⁺¹ - pⁿ)/dt` (parabolic);
//! 3. temperature step.
//!
//! Step 1 only reads `Θⁿ` and step 3 only reads pressure levels that step 1
//! has already produced, so the staggering introduces no splitting error and
//! repeated coupling sweeps reproduce the first sweep up to solver
//! tolerance.
//!
//! The energy report for level `n` needs level `n + 1`, so a run to `T`
//! takes one step past `T`; the fields returned as "final" are those at `T`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::acoustic::{
    acoustic_step_from, init_p2, AcousticError, AcousticState, DegeneracyConfig, PicardOptions,
};
use crate::energy::{
    acoustic_energy_report, combine, thermal_energy_report, AcousticDerivs, EnergyError, EnergyReport,
    ThermalDerivs,
};
use crate::grid::{l2_sq, laplacian, Grid, GridError, GridFunction};
use crate::linalg::SolverOptions;
use crate::medium::{
    coefficient_fields, eval_medium, q_source, q_source_dt, validate_assumptions, MediumError, MediumParams,
};
use crate::thermal::{
    init_theta2, thermal_step_hyperbolic, thermal_step_parabolic, ThermalError, ThermalMode, ThermalState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("medium: {0}")]
    Medium(#[from] MediumError),
    #[error("assumptions violated on θ ∈ [{lo}, {hi}]: {}", .failures.join(", "))]
    Assumptions { lo: f64, hi: f64, failures: Vec<&'static str> },
    #[error("step {step}: {source}")]
    Thermal { step: usize, source: ThermalError },
    #[error("step {step}: {source}")]
    Acoustic { step: usize, source: AcousticError },
    #[error("step {step}: energy report: {source}")]
    Energy { step: usize, source: EnergyError },
    #[error("study needs at least {needed} entries, got {found}")]
    TooFewLevels { needed: usize, found: usize },
    #[error("run {label} ended early: {termination:?}")]
    RunIncomplete { label: String, termination: Termination },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 1, extents: vec![1.0], counts: vec![63] }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(self.dim, &self.extents, &self.counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `A · Π sin(π x_i / L_i)` for each field.
    SineMode,
    /// `A · exp(-|x - c|² / (2 w²))` centred in the box; the Dirichlet
    /// closure clips it at the boundary.
    GaussianBump,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::SineMode => "sine-mode",
            Preset::GaussianBump => "gaussian-bump",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sine-mode" => Some(Preset::SineMode),
            "gaussian-bump" => Some(Preset::GaussianBump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub preset: Preset,
    pub p0_amplitude: f64,
    pub p1_amplitude: f64,
    pub theta0_amplitude: f64,
    pub theta1_amplitude: f64,
    /// Gaussian width `w`; ignored by the sine preset.
    pub width: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            preset: Preset::SineMode,
            p0_amplitude: 1e-3,
            p1_amplitude: 0.0,
            theta0_amplitude: 1e-3,
            theta1_amplitude: 0.0,
            width: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Report every `energy_every` steps; the report at `T` is always kept.
    pub energy_every: usize,
    /// Field snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { energy_every: 1, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub medium: MediumParams,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialConfig,
    pub coupling_sweeps: usize,
    pub degeneracy: DegeneracyConfig,
    pub picard: PicardOptions,
    pub solver: SolverOptions,
    pub output: OutputConfig,
    /// Temperature interval on which the structural assumptions on `h` and
    /// `k` are checked before a run.
    pub theta_range: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            medium: MediumParams::default(),
            dt: 0.01,
            t_final: 1.0,
            initial: InitialConfig::default(),
            coupling_sweeps: 1,
            degeneracy: DegeneracyConfig::default(),
            picard: PicardOptions::default(),
            solver: SolverOptions::default(),
            output: OutputConfig::default(),
            theta_range: (-1.0, 1.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |msg: String| Err(SimulateError::InvalidConfig(msg));
        self.grid.build()?;
        self.medium.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be positive", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt < self.t_final) {
            return bad(format!("dt = {} must lie in (0, t_final)", self.dt));
        }
        if self.coupling_sweeps == 0 {
            return bad("coupling_sweeps must be at least 1".into());
        }
        if self.degeneracy.validate().is_err() {
            return bad(format!(
                "degeneracy window floor_alpha = {}, cap_m = {} needs 0 < floor_alpha <= 1 - cap_m < 1",
                self.degeneracy.floor_alpha, self.degeneracy.cap_m
            ));
        }
        if !(self.picard.tol > 0.0) || self.picard.max_iterations == 0 {
            return bad("picard_tol must be positive and max_picard at least 1".into());
        }
        if !(self.solver.tol > 0.0) {
            return bad("solver_tol must be positive".into());
        }
        if self.output.energy_every == 0 {
            return bad("energy_every must be at least 1".into());
        }
        if !(self.initial.width > 0.0) {
            return bad("width must be positive".into());
        }
        let (lo, hi) = self.theta_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return bad(format!("theta range [{lo}, {hi}] is empty"));
        }
        Ok(())
    }

    /// Number of steps to reach `t_final`.
    pub fn step_count(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn thermal_mode(&self) -> ThermalMode {
        if self.medium.is_hyperbolic() {
            ThermalMode::Hyperbolic
        } else {
            ThermalMode::Parabolic
        }
    }
}

/// `Π sin(π x_i / L_i)`.
pub fn sine_mode(grid: &Grid) -> GridFunction {
    let ext: Vec<f64> = grid.extents().to_vec();
    grid.sample(|x| x.iter().zip(&ext).map(|(xi, l)| (PI * xi / l).sin()).product())
}

/// Sum over axes of `(π / L_i)²`: the continuum eigenvalue of [`sine_mode`].
pub fn sine_mode_eigenvalue(grid: &Grid) -> f64 {
    grid.extents().iter().map(|l| (PI / l).powi(2)).sum()
}

fn gaussian_bump(grid: &Grid, width: f64) -> GridFunction {
    let centre: Vec<f64> = grid.extents().iter().map(|l| 0.5 * l).collect();
    grid.sample(|x| {
        let r2: f64 = x.iter().zip(&centre).map(|(a, c)| (a - c) * (a - c)).sum();
        (-r2 / (2.0 * width * width)).exp()
    })
}

/// Initial fields; `p2` and `theta2` default to the compatibility values.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub p0: GridFunction,
    pub p1: GridFunction,
    pub p2: Option<GridFunction>,
    pub theta0: GridFunction,
    pub theta1: GridFunction,
    pub theta2: Option<GridFunction>,
}

impl InitialData {
    pub fn from_preset(grid: &Grid, init: &InitialConfig) -> Self {
        let shape = match init.preset {
            Preset::SineMode => sine_mode(grid),
            Preset::GaussianBump => gaussian_bump(grid, init.width),
        };
        Self {
            p0: shape.scale(init.p0_amplitude),
            p1: shape.scale(init.p1_amplitude),
            p2: None,
            theta0: shape.scale(init.theta0_amplitude),
            theta1: shape.scale(init.theta1_amplitude),
            theta2: None,
        }
    }
}

/// Time-dependent right-hand sides added to the two equations.
///
/// The pressure forcing is sampled at `tⁿ`; the temperature forcing at `tⁿ`
/// for the hyperbolic scheme and at `tⁿ⁺½` for Crank–Nicolson.
pub trait Forcing: Sync {
    fn acoustic(&self, t: f64) -> Option<GridFunction>;
    fn thermal(&self, t: f64) -> Option<GridFunction>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    DegeneracyAbort { step: usize, t: f64, min_coeff: f64, max_coeff: f64 },
    SolverFailure { step: usize, t: f64, message: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::DegeneracyAbort { .. } => "degeneracy-abort",
            Termination::SolverFailure { .. } => "solver-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub p: GridFunction,
    pub theta: GridFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub reports: Vec<EnergyReport>,
    pub termination: Termination,
    pub snapshots: Vec<Snapshot>,
    /// Extremes of `1 - 2k(Θ)p` over every accepted step and iterate.
    pub min_coeff: f64,
    pub max_coeff: f64,
    /// A step saw `2 max|k p| > cap_m` without leaving the window.
    pub cap_warning: bool,
    pub picard_iterations: usize,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub series: TimeSeries,
    /// Fields at `t_final`, present when the run reached it.
    pub final_fields: Option<(GridFunction, GridFunction)>,
}

fn source_for(
    mode: ThermalMode,
    params: &MediumParams,
    before: &AcousticState,
    after: &AcousticState,
) -> GridFunction {
    let dt = before.dt;
    match mode {
        ThermalMode::Hyperbolic => {
            let p_t = after.p_curr.zip_map(&before.p_prev, |a, b| (a - b) / (2.0 * dt));
            let p_tt = after.p_tt_curr.as_ref().expect("a completed step stores p_tt");
            q_source(params, &p_t).axpy(params.tau, &q_source_dt(params, &p_t, p_tt))
        }
        ThermalMode::Parabolic => {
            let p_t = after.p_curr.zip_map(&before.p_curr, |a, b| (a - b) / dt);
            q_source(params, &p_t)
        }
    }
}

/// Runs the coupled system from preset initial data.
pub fn run_coupled(config: &ScenarioConfig) -> Result<TimeSeries, SimulateError> {
    Ok(run_coupled_full(config, None, None)?.series)
}

/// Runs the coupled system; `initial` overrides the preset.
pub fn run_coupled_full(
    config: &ScenarioConfig,
    initial: Option<InitialData>,
    forcing: Option<&dyn Forcing>,
) -> Result<RunOutcome, SimulateError> {
    config.validate()?;
    let params = &config.medium;
    let (lo, hi) = config.theta_range;
    let assumptions = validate_assumptions(params, config.theta_range, 257);
    if !assumptions.passed {
        return Err(SimulateError::Assumptions { lo, hi, failures: assumptions.failures });
    }
    let grid = config.grid.build()?;
    let data = initial.unwrap_or_else(|| InitialData::from_preset(&grid, &config.initial));
    for f in [&data.p0, &data.p1, &data.theta0, &data.theta1] {
        assert_eq!(f.grid(), &grid, "initial data lives on a different grid");
    }
    let dt = config.dt;
    let mode = config.thermal_mode();
    let steps = config.step_count();
    let mut series = TimeSeries {
        times: Vec::new(),
        reports: Vec::new(),
        termination: Termination::Completed,
        snapshots: Vec::new(),
        min_coeff: f64::INFINITY,
        max_coeff: f64::NEG_INFINITY,
        cap_warning: false,
        picard_iterations: 0,
        cg_iterations: 0,
    };

    let p2 = match data.p2.clone() {
        Some(p2) => p2,
        None => match init_p2(params, &data.p0, &data.p1, &data.theta0, &config.degeneracy) {
            Ok(p2) => p2,
            Err(AcousticError::DegenerateInitialData { .. }) => {
                let w = coefficient_fields(params, &data.theta0)?.k.zip_map(&data.p0, |k, p| 1.0 - 2.0 * k * p);
                series.min_coeff = w.min();
                series.max_coeff = w.max();
                series.termination =
                    Termination::DegeneracyAbort { step: 0, t: 0.0, min_coeff: w.min(), max_coeff: w.max() };
                return Ok(RunOutcome { series, final_fields: None });
            }
            Err(source) => return Err(SimulateError::Acoustic { step: 0, source }),
        },
    };
    let mut acoustic = AcousticState::start(&data.p0, &data.p1, &p2, dt);
    let mut thermal = match mode {
        ThermalMode::Hyperbolic => {
            let theta2 = match data.theta2.clone() {
                Some(t2) => t2,
                None => init_theta2(params, &data.theta0, &data.theta1, &data.p1, &p2)
                    .map_err(|source| SimulateError::Thermal { step: 0, source })?,
            };
            ThermalState::start_hyperbolic(&data.theta0, &data.theta1, &theta2, dt)
        }
        ThermalMode::Parabolic => {
            // Reports need Θ at t = -dt; use the equation's own Θ_t(0).
            let mut rate = laplacian(&data.theta0)
                .scale(params.kappa_a)
                .axpy(-params.ell(), &data.theta0)
                .axpy(1.0, &q_source(params, &data.p1));
            if let Some(f) = forcing.and_then(|f| f.thermal(0.0)) {
                rate = rate.axpy(1.0, &f);
            }
            let prev = data.theta0.axpy(-dt / params.m(), &rate);
            ThermalState::start_parabolic(&data.theta0, Some(prev), dt)
        }
    };

    let mut final_fields = None;
    for n in 0..=steps {
        let t = n as f64 * dt;
        if n == steps {
            final_fields = Some((acoustic.p_curr.clone(), thermal.theta_curr.clone()));
        }
        if config.output.snapshot_every > 0 && (n % config.output.snapshot_every == 0 || n == steps) {
            series.snapshots.push(Snapshot {
                step: n,
                t,
                p: acoustic.p_curr.clone(),
                theta: thermal.theta_curr.clone(),
            });
        }

        let acoustic_forcing = forcing.and_then(|f| f.acoustic(t));
        let thermal_forcing = forcing.and_then(|f| match mode {
            ThermalMode::Hyperbolic => f.thermal(t),
            ThermalMode::Parabolic => f.thermal(t + 0.5 * dt),
        });
        let mut guess: Option<GridFunction> = None;
        let mut result = None;
        for _ in 0..config.coupling_sweeps {
            let step = acoustic_step_from(
                &acoustic,
                &thermal.theta_curr,
                params,
                acoustic_forcing.as_ref(),
                &config.degeneracy,
                &config.picard,
                &config.solver,
                guess.as_ref(),
            );
            let (next_acoustic, diag) = match step {
                Ok(ok) => ok,
                Err(AcousticError::DegeneracyAbort { min_coeff, max_coeff, .. }) => {
                    series.min_coeff = series.min_coeff.min(min_coeff);
                    series.max_coeff = series.max_coeff.max(max_coeff);
                    series.termination = Termination::DegeneracyAbort { step: n, t, min_coeff, max_coeff };
                    return Ok(RunOutcome { series, final_fields });
                }
                Err(e @ (AcousticError::PicardNoConvergence { .. }
                | AcousticError::SolverNoConvergence(_)
                | AcousticError::Solver(_))) => {
                    series.termination = Termination::SolverFailure { step: n, t, message: e.to_string() };
                    return Ok(RunOutcome { series, final_fields });
                }
                Err(source) => return Err(SimulateError::Acoustic { step: n, source }),
            };
            series.picard_iterations += diag.picard_iterations;
            series.cg_iterations += diag.cg_iterations;
            series.min_coeff = series.min_coeff.min(diag.min_coeff);
            series.max_coeff = series.max_coeff.max(diag.max_coeff);
            series.cap_warning |= diag.cap_exceeded;

            let source = source_for(mode, params, &acoustic, &next_acoustic);
            let stepped = match mode {
                ThermalMode::Hyperbolic => {
                    thermal_step_hyperbolic(&thermal, &source, params, thermal_forcing.as_ref(), &config.solver)
                }
                ThermalMode::Parabolic => {
                    thermal_step_parabolic(&thermal, &source, params, thermal_forcing.as_ref(), &config.solver)
                }
            };
            let next_thermal = match stepped {
                Ok(s) => s,
                Err(e @ (ThermalError::SolverNoConvergence(_) | ThermalError::Solver(_))) => {
                    series.termination = Termination::SolverFailure { step: n, t, message: e.to_string() };
                    return Ok(RunOutcome { series, final_fields });
                }
                Err(source) => return Err(SimulateError::Thermal { step: n, source }),
            };
            guess = Some(next_acoustic.p_curr.clone());
            result = Some((next_acoustic, next_thermal));
        }
        let (next_acoustic, next_thermal) = result.expect("at least one coupling sweep");

        if n % config.output.energy_every == 0 || n == steps {
            let a = AcousticDerivs::from_levels(
                &acoustic.p_prev,
                &acoustic.p_curr,
                &next_acoustic.p_curr,
                next_acoustic.p_tt_prev.as_ref(),
                dt,
            );
            let th = ThermalDerivs::from_levels(&thermal.theta_prev, &thermal.theta_curr, &next_thermal.theta_curr, dt);
            let acoustic_e = acoustic_energy_report(&a, &thermal.theta_curr, params)
                .map_err(|source| SimulateError::Energy { step: n, source })?;
            let thermal_e = thermal_energy_report(&th, params);
            series.times.push(t);
            series.reports.push(combine(t, &thermal_e, &acoustic_e));
        }
        acoustic = next_acoustic;
        thermal = next_thermal;
    }
    Ok(RunOutcome { series, final_fields })
}

/// Runs `f` on a rayon pool with at most `threads` workers.
pub fn with_thread_cap<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsKind {
    /// `k ≡ 0`, `h̃ ≡ 0`; only the pressure error is measured.
    AcousticLinear,
    /// No pressure; hyperbolic temperature error.
    ThermalHyperbolic,
    /// No pressure, `τ = 0`; Crank–Nicolson temperature error.
    ThermalParabolic,
    /// Both fields forced with the full nonlinear coupling.
    Coupled,
}

impl MmsKind {
    pub fn name(&self) -> &'static str {
        match self {
            MmsKind::AcousticLinear => "acoustic-linear",
            MmsKind::ThermalHyperbolic => "thermal-hyperbolic",
            MmsKind::ThermalParabolic => "thermal-parabolic",
            MmsKind::Coupled => "coupled",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::AcousticLinear, Self::ThermalHyperbolic, Self::ThermalParabolic, Self::Coupled]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

/// `p* = A_p S(x) cos t`, `Θ* = A_θ S(x) e^{-t}` with `S` the first sine
/// mode; the forcing uses the continuum Laplacian `ΔS = -λ S`.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub params: MediumParams,
    pub mode: ThermalMode,
    pub shape: GridFunction,
    pub lambda: f64,
    pub amp_p: f64,
    pub amp_theta: f64,
}

impl Manufactured {
    pub fn p(&self, t: f64) -> GridFunction {
        self.shape.scale(self.amp_p * t.cos())
    }

    pub fn theta(&self, t: f64) -> GridFunction {
        self.shape.scale(self.amp_theta * (-t).exp())
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            p0: self.p(0.0),
            p1: GridFunction::zeros(self.shape.grid()),
            p2: Some(self.shape.scale(-self.amp_p)),
            theta0: self.theta(0.0),
            theta1: self.shape.scale(-self.amp_theta),
            theta2: Some(self.shape.scale(self.amp_theta)),
        }
    }
}

impl Forcing for Manufactured {
    fn acoustic(&self, t: f64) -> Option<GridFunction> {
        if self.amp_p == 0.0 {
            return None;
        }
        let (b, lam) = (self.params.b, self.lambda);
        let mut out = GridFunction::zeros(self.shape.grid());
        for (i, slot) in out.values_mut().iter_mut().enumerate() {
            let s = self.shape.values()[i];
            let (p, p_t, p_tt) = (self.amp_p * s * t.cos(), -self.amp_p * s * t.sin(), -self.amp_p * s * t.cos());
            let theta = self.amp_theta * s * (-t).exp();
            let e = eval_medium(&self.params, theta).expect("manufactured temperature within the medium's range");
            // w p_tt - h Δp - b Δp_t - 2k p_t², with Δ → -λ.
            *slot = (1.0 - 2.0 * e.k * p) * p_tt + e.h * lam * p + b * lam * p_t - 2.0 * e.k * p_t * p_t;
        }
        Some(out)
    }

    fn thermal(&self, t: f64) -> Option<GridFunction> {
        let prm = &self.params;
        let (m, ell, tau, kappa, lam) = (prm.m(), prm.ell(), prm.tau, prm.kappa_a, self.lambda);
        let q = prm.q_coefficient();
        let mut out = GridFunction::zeros(self.shape.grid());
        for (i, slot) in out.values_mut().iter_mut().enumerate() {
            let s = self.shape.values()[i];
            let th = self.amp_theta * s * (-t).exp();
            let (p_t, p_tt) = (-self.amp_p * s * t.sin(), -self.amp_p * s * t.cos());
            *slot = match self.mode {
                // Θ_t = -Θ, Θ_tt = Θ.
                ThermalMode::Hyperbolic => {
                    tau * m * th - (m + tau * ell) * th + ell * th + kappa * lam * th
                        - (q * p_t * p_t + tau * 2.0 * q * p_t * p_tt)
                }
                ThermalMode::Parabolic => -m * th + ell * th + kappa * lam * th - q * p_t * p_t,
            };
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub error_p: f64,
    pub error_theta: f64,
    /// Error used for the order: pressure, temperature, or the larger.
    pub error: f64,
    /// `log₂(e_{i-1} / e_i)`; `None` on the coarsest level.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsSpec {
    pub kind: MmsKind,
    /// Nodes per axis on each level; each level halves `h`.
    pub levels: Vec<usize>,
    /// `dt = dt_ratio · h` on every level.
    pub dt_ratio: f64,
    pub amplitude: f64,
}

impl Default for MmsSpec {
    fn default() -> Self {
        Self { kind: MmsKind::AcousticLinear, levels: vec![31, 63, 127], dt_ratio: 0.25, amplitude: 1.0 }
    }
}

fn mms_level(base: &ScenarioConfig, spec: &MmsSpec, n: usize) -> Result<MmsRow, SimulateError> {
    let mut config = base.clone();
    config.grid.counts = vec![n; config.grid.dim];
    let grid = config.grid.build()?;
    let h = grid.spacing()[0];
    config.dt = spec.dt_ratio * h;
    config.output.energy_every = usize::MAX;
    config.output.snapshot_every = 0;
    let (amp_p, amp_theta) = match spec.kind {
        MmsKind::AcousticLinear => {
            config.medium.beta = 0.0;
            config.medium.speed_poly.clear();
            (spec.amplitude, 0.0)
        }
        MmsKind::ThermalHyperbolic => {
            if !(config.medium.tau > 0.0) {
                return Err(SimulateError::InvalidConfig("hyperbolic study needs tau > 0".into()));
            }
            (0.0, spec.amplitude)
        }
        MmsKind::ThermalParabolic => {
            config.medium.tau = 0.0;
            (0.0, spec.amplitude)
        }
        MmsKind::Coupled => (spec.amplitude, spec.amplitude),
    };
    let manufactured = Manufactured {
        params: config.medium.clone(),
        mode: config.thermal_mode(),
        lambda: sine_mode_eigenvalue(&grid),
        shape: sine_mode(&grid),
        amp_p,
        amp_theta,
    };
    let mut initial = manufactured.initial_data();
    if config.thermal_mode() == ThermalMode::Parabolic {
        initial.theta2 = None;
    }
    let outcome = run_coupled_full(&config, Some(initial), Some(&manufactured))?;
    let (p, theta) = outcome.final_fields.ok_or_else(|| SimulateError::RunIncomplete {
        label: format!("mms n={n}"),
        termination: outcome.series.termination.clone(),
    })?;
    let t_end = config.step_count() as f64 * config.dt;
    let error_p = l2_sq(&(&p - &manufactured.p(t_end))).sqrt();
    let error_theta = l2_sq(&(&theta - &manufactured.theta(t_end))).sqrt();
    let error = match spec.kind {
        MmsKind::AcousticLinear => error_p,
        MmsKind::ThermalHyperbolic | MmsKind::ThermalParabolic => error_theta,
        MmsKind::Coupled => error_p.max(error_theta),
    };
    Ok(MmsRow { n, h, dt: config.dt, error_p, error_theta, error, observed_order: None })
}

/// Manufactured-solution refinement study; levels run in parallel.
pub fn mms_study(base: &ScenarioConfig, spec: &MmsSpec) -> Result<Vec<MmsRow>, SimulateError> {
    if spec.levels.len() < 3 {
        return Err(SimulateError::TooFewLevels { needed: 3, found: spec.levels.len() });
    }
    let rows: Result<Vec<MmsRow>, SimulateError> =
        spec.levels.par_iter().map(|&n| mms_level(base, spec, n)).collect();
    let mut rows = rows?;
    for i in 1..rows.len() {
        let ratio = rows[i - 1].error / rows[i].error;
        let h_ratio = rows[i - 1].h / rows[i].h;
        rows[i].observed_order = Some(ratio.ln() / h_ratio.ln());
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauRow {
    pub tau: f64,
    pub gap_theta: f64,
    pub gap_p: f64,
}

fn final_fields(config: &ScenarioConfig, label: String) -> Result<(GridFunction, GridFunction), SimulateError> {
    let outcome = run_coupled_full(config, None, None)?;
    outcome
        .final_fields
        .filter(|_| outcome.series.termination == Termination::Completed)
        .ok_or(SimulateError::RunIncomplete { label, termination: outcome.series.termination })
}

/// Final-time gaps between Cattaneo runs (one per `τ`) and the Fourier
/// run. The Fourier run ignores `Θ1`.
pub fn tau_limit_study(config: &ScenarioConfig, tau_list: &[f64]) -> Result<Vec<TauRow>, SimulateError> {
    if tau_list.is_empty() {
        return Err(SimulateError::TooFewLevels { needed: 1, found: 0 });
    }
    if tau_list.iter().any(|&t| !(t > 0.0)) || tau_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SimulateError::InvalidConfig("tau list must be positive and strictly decreasing".into()));
    }
    let mut config = config.clone();
    config.output.energy_every = usize::MAX;
    config.output.snapshot_every = 0;
    let mut fourier_cfg = config.clone();
    fourier_cfg.medium.tau = 0.0;
    let fourier = final_fields(&fourier_cfg, "fourier".into())?;
    let rows: Result<Vec<TauRow>, SimulateError> = tau_list
        .par_iter()
        .map(|&tau| {
            let mut cfg = config.clone();
            cfg.medium.tau = tau;
            let (p, theta) = final_fields(&cfg, format!("tau={tau}"))?;
            Ok(TauRow {
                tau,
                gap_theta: l2_sq(&(&theta - &fourier.1)).sqrt(),
                gap_p: l2_sq(&(&p - &fourier.0)).sqrt(),
            })
        })
        .collect();
    rows
}
