//! Energy and dissipation functionals, decay-rate fits and Gronwall
//! certificates.
//!
//! Thermal functionals (`k = 0, 1`):
//!
//! ```text
//! ℰ_k = ½(m+ℓ+τℓ)‖∂ₜᵏΘ‖² + ½τm‖∂ₜᵏΘ_t‖² + ½κ‖∇∂ₜᵏΘ‖²
//! 𝒟_k = ℓ‖∂ₜᵏΘ‖² + (m+τℓ)‖∂ₜᵏΘ_t‖² + κ‖∇∂ₜᵏΘ‖²
//! ℰ   = ℰ₀ + ℰ₁ + τm‖∇Θ_t‖² + κ‖ΔΘ‖²
//! 𝒟   = 𝒟₀ + 𝒟₁ + (m+τℓ)‖∇Θ_t‖² + κ‖ΔΘ‖²
//! ```
//!
//! Acoustic functionals:
//!
//! ```text
//! E₁ = ½(‖√(1-2k(Θ)p) p_tt‖² + (1+h(0))‖∇p_t‖² + (b+h(0))‖Δp‖²)
//! E₂ = ½((1+b)‖∇p_tt‖² + b‖∇Δp‖² + h(0)‖Δp_t‖²)
//! D₁ = b‖∇p_tt‖² + h(0)‖Δp‖² + b‖Δp_t‖²
//! D₂ = h(0)‖∇Δp‖² + b‖Δp_tt‖² + ‖p_ttt‖²
//! ```
//!
//! and `E_low = E₁ + ℰ₀`, `E_high = E₁ + E₂ + ℰ`, `D_low = D₁ + 𝒟₀`,
//! `D_high = D₁ + D₂ + 𝒟`.

use thiserror::Error;

use crate::grid::{gradient_sq, l2_sq, laplacian, weighted_l2, GridError, GridFunction};
use crate::medium::{coefficient_fields, MediumError, MediumParams};
use crate::simulate::TimeSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("sample {value} at t = {t} is not strictly positive")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("need at least 3 samples in the window, found {found}")]
    TooFewSamples { found: usize },
    #[error("weight: {0}")]
    NegativeWeight(#[from] GridError),
    #[error("medium: {0}")]
    Medium(#[from] MediumError),
}

/// Temperature and its time difference quotients at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalDerivs {
    pub theta: GridFunction,
    pub theta_t: GridFunction,
    pub theta_tt: GridFunction,
}

impl ThermalDerivs {
    /// Central quotients at the middle of three consecutive levels.
    pub fn from_levels(prev: &GridFunction, curr: &GridFunction, next: &GridFunction, dt: f64) -> Self {
        Self {
            theta: curr.clone(),
            theta_t: next.zip_map(prev, |a, b| (a - b) / (2.0 * dt)),
            theta_tt: next.axpy(-2.0, curr).axpy(1.0, prev).scale(1.0 / (dt * dt)),
        }
    }

    pub fn zeros(grid: &crate::grid::Grid) -> Self {
        let z = GridFunction::zeros(grid);
        Self { theta: z.clone(), theta_t: z.clone(), theta_tt: z }
    }
}

/// Pressure and its time difference quotients at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticDerivs {
    pub p: GridFunction,
    pub p_t: GridFunction,
    pub p_tt: GridFunction,
    /// `None` when the history is too short for a third difference.
    pub p_ttt: Option<GridFunction>,
}

impl AcousticDerivs {
    /// Central quotients at the middle level; `p_tt_before` is the second
    /// difference one level earlier, used for the backward `p_ttt`.
    pub fn from_levels(
        prev: &GridFunction,
        curr: &GridFunction,
        next: &GridFunction,
        p_tt_before: Option<&GridFunction>,
        dt: f64,
    ) -> Self {
        let p_tt = next.axpy(-2.0, curr).axpy(1.0, prev).scale(1.0 / (dt * dt));
        let p_ttt = p_tt_before.map(|before| p_tt.zip_map(before, |a, b| (a - b) / dt));
        Self { p: curr.clone(), p_t: next.zip_map(prev, |a, b| (a - b) / (2.0 * dt)), p_tt, p_ttt }
    }

    pub fn zeros(grid: &crate::grid::Grid) -> Self {
        let z = GridFunction::zeros(grid);
        Self { p: z.clone(), p_t: z.clone(), p_tt: z.clone(), p_ttt: Some(z) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThermalEnergies {
    pub e0: f64,
    pub e1: f64,
    pub total: f64,
    pub d0: f64,
    pub d1: f64,
    pub d_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcousticEnergies {
    pub e1: f64,
    pub e2: f64,
    pub d1: f64,
    pub d2: f64,
    pub min_coeff: f64,
    pub max_coeff: f64,
    pub p_ttt_available: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub e_theta_0: f64,
    pub e_theta_1: f64,
    pub e_theta_total: f64,
    pub d_theta_0: f64,
    pub d_theta_1: f64,
    pub d_theta_total: f64,
    pub e1: f64,
    pub e2: f64,
    pub d1: f64,
    pub d2: f64,
    pub e_low: f64,
    pub e_high: f64,
    pub d_low: f64,
    pub d_high: f64,
    pub min_coeff: f64,
    pub max_coeff: f64,
    pub p_ttt_available: bool,
}

/// Selects one scalar of an [`EnergyReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyField {
    E1,
    E2,
    D1,
    D2,
    EnergyTheta0,
    EnergyTheta1,
    EnergyTheta,
    DissipationTheta0,
    DissipationTheta1,
    DissipationTheta,
    ELow,
    EHigh,
    DLow,
    DHigh,
}

impl EnergyReport {
    pub fn get(&self, field: EnergyField) -> f64 {
        match field {
            EnergyField::E1 => self.e1,
            EnergyField::E2 => self.e2,
            EnergyField::D1 => self.d1,
            EnergyField::D2 => self.d2,
            EnergyField::EnergyTheta0 => self.e_theta_0,
            EnergyField::EnergyTheta1 => self.e_theta_1,
            EnergyField::EnergyTheta => self.e_theta_total,
            EnergyField::DissipationTheta0 => self.d_theta_0,
            EnergyField::DissipationTheta1 => self.d_theta_1,
            EnergyField::DissipationTheta => self.d_theta_total,
            EnergyField::ELow => self.e_low,
            EnergyField::EHigh => self.e_high,
            EnergyField::DLow => self.d_low,
            EnergyField::DHigh => self.d_high,
        }
    }
}

pub fn thermal_energy_report(derivs: &ThermalDerivs, params: &MediumParams) -> ThermalEnergies {
    let (m, ell, tau, kappa) = (params.m(), params.ell(), params.tau, params.kappa_a);
    let n_theta = l2_sq(&derivs.theta);
    let n_theta_t = l2_sq(&derivs.theta_t);
    let n_theta_tt = l2_sq(&derivs.theta_tt);
    let g_theta = gradient_sq(&derivs.theta);
    let g_theta_t = gradient_sq(&derivs.theta_t);
    let lap_theta = l2_sq(&laplacian(&derivs.theta));

    let zeroth = 0.5 * (m + ell + tau * ell);
    let e0 = zeroth * n_theta + 0.5 * tau * m * n_theta_t + 0.5 * kappa * g_theta;
    let e1 = zeroth * n_theta_t + 0.5 * tau * m * n_theta_tt + 0.5 * kappa * g_theta_t;
    let d0 = ell * n_theta + (m + tau * ell) * n_theta_t + kappa * g_theta;
    let d1 = ell * n_theta_t + (m + tau * ell) * n_theta_tt + kappa * g_theta_t;
    ThermalEnergies {
        e0,
        e1,
        total: e0 + e1 + tau * m * g_theta_t + kappa * lap_theta,
        d0,
        d1,
        d_total: d0 + d1 + (m + tau * ell) * g_theta_t + kappa * lap_theta,
    }
}

pub fn acoustic_energy_report(
    derivs: &AcousticDerivs,
    theta: &GridFunction,
    params: &MediumParams,
) -> Result<AcousticEnergies, EnergyError> {
    let (b, h0) = (params.b, params.h0());
    let coef = coefficient_fields(params, theta)?;
    let w = coef.k.zip_map(&derivs.p, |k, p| 1.0 - 2.0 * k * p);
    let weighted = weighted_l2(&derivs.p_tt, &w)?;

    let lap_p = laplacian(&derivs.p);
    let lap_p_t = laplacian(&derivs.p_t);
    let lap_p_tt = laplacian(&derivs.p_tt);
    let g_p_t = gradient_sq(&derivs.p_t);
    let g_p_tt = gradient_sq(&derivs.p_tt);
    let g_lap_p = gradient_sq(&lap_p);
    let n_lap_p = l2_sq(&lap_p);
    let n_lap_p_t = l2_sq(&lap_p_t);
    let n_lap_p_tt = l2_sq(&lap_p_tt);
    let n_p_ttt = derivs.p_ttt.as_ref().map_or(0.0, l2_sq);

    Ok(AcousticEnergies {
        e1: 0.5 * (weighted * weighted + (1.0 + h0) * g_p_t + (b + h0) * n_lap_p),
        e2: 0.5 * ((1.0 + b) * g_p_tt + b * g_lap_p + h0 * n_lap_p_t),
        d1: b * g_p_tt + h0 * n_lap_p + b * n_lap_p_t,
        d2: h0 * g_lap_p + b * n_lap_p_tt + n_p_ttt,
        min_coeff: w.min(),
        max_coeff: w.max(),
        p_ttt_available: derivs.p_ttt.is_some(),
    })
}

/// Assembles the combined report; the sums are formed exactly here.
pub fn combine(t: f64, thermal: &ThermalEnergies, acoustic: &AcousticEnergies) -> EnergyReport {
    EnergyReport {
        t,
        e_theta_0: thermal.e0,
        e_theta_1: thermal.e1,
        e_theta_total: thermal.total,
        d_theta_0: thermal.d0,
        d_theta_1: thermal.d1,
        d_theta_total: thermal.d_total,
        e1: acoustic.e1,
        e2: acoustic.e2,
        d1: acoustic.d1,
        d2: acoustic.d2,
        e_low: acoustic.e1 + thermal.e0,
        e_high: acoustic.e1 + acoustic.e2 + thermal.total,
        d_low: acoustic.d1 + thermal.d0,
        d_high: acoustic.d1 + acoustic.d2 + thermal.d_total,
        min_coeff: acoustic.min_coeff,
        max_coeff: acoustic.max_coeff,
        p_ttt_available: acoustic.p_ttt_available,
    }
}

/// Log-linear fit `ln y ≈ intercept - omega t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub omega: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-linear regression; 0 when
    /// the logged samples have no variance.
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Fits over the samples with `window.0 <= t <= window.1`.
pub fn fit_decay_samples(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit, EnergyError> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(y > 0.0) {
            return Err(EnergyError::NonPositiveSample { t, value: y });
        }
        xs.push(t);
        ys.push(y.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(EnergyError::TooFewSamples { found: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(DecayFit { omega: -slope, intercept, r_squared, window, samples: n })
}

pub fn fit_decay_rate(series: &TimeSeries, field: EnergyField, window: (f64, f64)) -> Result<DecayFit, EnergyError> {
    let values: Vec<f64> = series.reports.iter().map(|r| r.get(field)).collect();
    fit_decay_samples(&series.times, &values, window)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
    pub nu: f64,
    /// `y(t) + ν∫ₛᵗ y ≤ y(s) + tol` on every sampled pair.
    pub hypothesis_holds: bool,
    /// `y(t) ≤ y(0) e^{-νt} + tol` on every sample; only checked when the
    /// hypothesis holds.
    pub conclusion_holds: bool,
    /// Pair `(s, t)` with the smallest slack `y(s) + tol - y(t) - ν∫ₛᵗ y`.
    pub worst_pair: (f64, f64),
    pub worst_margin: f64,
    pub worst_tolerance: f64,
    /// Time with the smallest conclusion slack and that slack.
    pub conclusion_worst: (f64, f64),
}

impl GronwallReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_holds && self.conclusion_holds
    }
}

/// Checks the integral Gronwall hypothesis on samples `(times, y)`.
///
/// The trapezoid integral over `[s, t]` is trusted up to
/// `2 · ν (t - s) Δ²/12 · max|y''|`, with `Δ` the largest sample spacing and
/// `y''` from second divided differences (which miss the end intervals,
/// hence the factor 2), plus a relative `1e-12`.
pub fn gronwall_samples(times: &[f64], y: &[f64], nu: f64) -> GronwallReport {
    assert_eq!(times.len(), y.len(), "times and values differ in length");
    assert!(y.iter().all(|&v| v >= 0.0), "Gronwall check needs nonnegative samples");
    let n = times.len();
    let mut prefix = vec![0.0; n];
    for i in 1..n {
        prefix[i] = prefix[i - 1] + 0.5 * (times[i] - times[i - 1]) * (y[i] + y[i - 1]);
    }
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let curvature = (1..n.saturating_sub(1))
        .map(|i| {
            let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
            let d = 2.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0) / (h0 + h1);
            d.abs()
        })
        .fold(0.0, f64::max);
    let scale = y.iter().copied().fold(0.0, f64::max);

    let mut worst = (f64::INFINITY, (0.0, 0.0), 0.0);
    for s in 0..n {
        for t in s + 1..n {
            let tol = 2.0 * nu * (times[t] - times[s]) * spacing * spacing / 12.0 * curvature + 1e-12 * scale;
            let margin = y[s] + tol - y[t] - nu * (prefix[t] - prefix[s]);
            if margin < worst.0 {
                worst = (margin, (times[s], times[t]), tol);
            }
        }
    }
    let hypothesis_holds = n < 2 || worst.0 >= 0.0;

    let mut conclusion_worst = (times.first().copied().unwrap_or(0.0), f64::INFINITY);
    if let (Some(&t0), Some(&y0)) = (times.first(), y.first()) {
        for (&t, &v) in times.iter().zip(y) {
            let tol = 2.0 * nu * (t - t0) * spacing * spacing / 12.0 * curvature + 1e-12 * scale;
            let slack = y0 * (-nu * (t - t0)).exp() + tol - v;
            if slack < conclusion_worst.1 {
                conclusion_worst = (t, slack);
            }
        }
    }
    let conclusion_holds = hypothesis_holds && conclusion_worst.1 >= 0.0;
    GronwallReport {
        nu,
        hypothesis_holds,
        conclusion_holds,
        worst_pair: worst.1,
        worst_margin: if n < 2 { 0.0 } else { worst.0 },
        worst_tolerance: worst.2,
        conclusion_worst,
    }
}

pub fn gronwall_check(series: &TimeSeries, field: EnergyField, nu: f64) -> GronwallReport {
    let values: Vec<f64> = series.reports.iter().map(|r| r.get(field)).collect();
    gronwall_samples(&series.times, &values, nu)
}
