//! Medium parameters and temperature-dependent acoustic coefficients.
//!
//! The squared sound speed is a polynomial in the temperature excess
//! `θ = Θ̄ - Θ_a`:
//!
//! ```text
//! h(θ) = c²(θ + Θ_a) = c_a² (1 + a_1 θ + a_2 θ² + ... + a_J θ^J)
//! h̃(θ) = h(θ) - h(0)
//! k(θ) = β / (ρ h(θ))
//! ```
//!
//! An empty coefficient list gives the constant-speed Westervelt equation.

use thiserror::Error;

use crate::grid::GridFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("parameter `{name}` is invalid: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("h({theta}) = {h} fell below the floor h1 = {h1}; temperature left the validated range")]
    HBelowFloor { theta: f64, h: f64, h1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediumParams {
    /// Ambient sound speed.
    pub c_a: f64,
    /// Sound diffusivity.
    pub b: f64,
    /// Parameter of nonlinearity.
    pub beta: f64,
    /// Mass density.
    pub rho: f64,
    /// Ambient tissue density.
    pub rho_a: f64,
    /// Ambient tissue heat capacity.
    pub heat_capacity_a: f64,
    /// Blood density.
    pub rho_b: f64,
    /// Blood heat capacity.
    pub heat_capacity_b: f64,
    /// Volumetric perfusion rate.
    pub perfusion: f64,
    /// Thermal conductivity.
    pub kappa_a: f64,
    /// Thermal relaxation time; zero selects the Fourier law.
    pub tau: f64,
    /// Ambient temperature. Only enters through the shift `θ = Θ̄ - Θ_a`.
    pub theta_a: f64,
    /// `a_1..a_J` in `h(θ) = c_a²(1 + Σ a_j θ^j)`.
    pub speed_poly: Vec<f64>,
    /// Lower bound required of `h` on the validated temperature range.
    pub h1: f64,
}

impl Default for MediumParams {
    /// A nondimensional medium with unit acoustic and thermal scales.
    fn default() -> Self {
        Self {
            c_a: 1.0,
            b: 1.0,
            beta: 1.0,
            rho: 1.0,
            rho_a: 1.0,
            heat_capacity_a: 1.0,
            rho_b: 1.0,
            heat_capacity_b: 1.0,
            perfusion: 1.0,
            kappa_a: 0.1,
            tau: 0.05,
            theta_a: 37.0,
            speed_poly: Vec::new(),
            h1: 0.5,
        }
    }
}

impl MediumParams {
    pub fn validate(&self) -> Result<(), MediumError> {
        let positive = [
            ("c_a", self.c_a),
            ("b", self.b),
            ("rho", self.rho),
            ("rho_a", self.rho_a),
            ("heat_capacity_a", self.heat_capacity_a),
            ("kappa_a", self.kappa_a),
            ("h1", self.h1),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MediumError::InvalidParameter { name, value });
            }
        }
        let non_negative = [
            ("rho_b", self.rho_b),
            ("heat_capacity_b", self.heat_capacity_b),
            ("perfusion", self.perfusion),
            ("tau", self.tau),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MediumError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("beta", self.beta), ("theta_a", self.theta_a)] {
            if !value.is_finite() {
                return Err(MediumError::InvalidParameter { name, value });
            }
        }
        if let Some(&value) = self.speed_poly.iter().find(|a| !a.is_finite()) {
            return Err(MediumError::InvalidParameter { name: "speed_poly", value });
        }
        Ok(())
    }

    /// `m = ρ_a C_a`
    pub fn m(&self) -> f64 {
        self.rho_a * self.heat_capacity_a
    }

    /// `ℓ = ρ_b C_b W`
    pub fn ell(&self) -> f64 {
        self.rho_b * self.heat_capacity_b * self.perfusion
    }

    /// `h(0) = c_a²`
    pub fn h0(&self) -> f64 {
        self.c_a * self.c_a
    }

    /// `k1 = |β| / (ρ h1)`
    pub fn k1(&self) -> f64 {
        self.beta.abs() / (self.rho * self.h1)
    }

    /// Coefficient of `Q(p_t) = q_coefficient · p_t²`.
    pub fn q_coefficient(&self) -> f64 {
        2.0 * self.b / (self.rho_a * self.c_a.powi(4))
    }

    /// Whether the temperature equation is hyperbolic (Cattaneo law).
    pub fn is_hyperbolic(&self) -> bool {
        self.tau > 0.0
    }

    /// `h̃(θ) = c_a² Σ a_j θ^j`, without the floor check.
    pub fn h_tilde_raw(&self, theta: f64) -> f64 {
        let tail = self.speed_poly.iter().rev().fold(0.0, |acc, &a| (acc + a) * theta);
        self.h0() * tail
    }

    fn h_prime(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &a) in self.speed_poly.iter().enumerate().rev() {
            acc = acc * theta + (j + 1) as f64 * a;
        }
        self.h0() * acc
    }

    fn h_second(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &a) in self.speed_poly.iter().enumerate().skip(1).rev() {
            let power = (j + 1) as f64;
            acc = acc * theta + power * (power - 1.0) * a;
        }
        self.h0() * acc
    }
}

/// Coefficients at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumEval {
    pub h: f64,
    pub h_tilde: f64,
    pub k: f64,
}

pub fn eval_medium(params: &MediumParams, theta: f64) -> Result<MediumEval, MediumError> {
    let h_tilde = params.h_tilde_raw(theta);
    let h = params.h0() + h_tilde;
    if !(h >= params.h1) {
        return Err(MediumError::HBelowFloor { theta, h, h1: params.h1 });
    }
    Ok(MediumEval { h, h_tilde, k: params.beta / (params.rho * h) })
}

/// `h(Θ)` and `k(Θ)` sampled on a temperature field.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    pub h: GridFunction,
    pub k: GridFunction,
}

pub fn coefficient_fields(
    params: &MediumParams,
    theta: &GridFunction,
) -> Result<CoefficientFields, MediumError> {
    let mut h = GridFunction::zeros(theta.grid());
    let mut k = GridFunction::zeros(theta.grid());
    for ((&t, hi), ki) in theta.values().iter().zip(h.values_mut()).zip(k.values_mut()) {
        let e = eval_medium(params, t)?;
        *hi = e.h;
        *ki = e.k;
    }
    Ok(CoefficientFields { h, k })
}

/// Acoustic heat source `Q(p_t) = 2b/(ρ_a c_a⁴) p_t²`.
pub fn q_source(params: &MediumParams, p_t: &GridFunction) -> GridFunction {
    let c = params.q_coefficient();
    p_t.map(|v| c * v * v)
}

/// `∂_t Q(p_t) = 4b/(ρ_a c_a⁴) p_t p_tt`.
pub fn q_source_dt(params: &MediumParams, p_t: &GridFunction, p_tt: &GridFunction) -> GridFunction {
    let c = 2.0 * params.q_coefficient();
    p_t.zip_map(p_tt, |a, b| c * a * b)
}

/// Outcome of sampling the structural assumptions on `h` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub theta_range: (f64, f64),
    pub samples: usize,
    pub h_min_observed: f64,
    /// Growth exponent for `|h''| <= C(1 + |s|^γ1)`; `max(0, J - 2)`.
    pub gamma1: f64,
    /// Growth exponent for `|k''| <= C(1 + |s|^γ2)` obtained from
    /// `|k''| ≲ k1²|h''| + k1³|h'|²`.
    pub gamma2: f64,
    pub k1: f64,
    pub max_abs_k: f64,
    /// Smallest constants making each growth bound hold on the samples,
    /// in the order H2, H3, K2 (for `k''`), K2 (for `k'`).
    pub growth_constants: [f64; 4],
    /// Names of violated assumptions (`H1`, `H2`, `H3`, `K1`, `K2`).
    pub failures: Vec<&'static str>,
    pub passed: bool,
}

pub fn validate_assumptions(
    params: &MediumParams,
    theta_range: (f64, f64),
    samples: usize,
) -> AssumptionReport {
    let (lo, hi) = theta_range;
    let samples = samples.max(2);
    let degree = params.speed_poly.len();
    let gamma1 = degree.saturating_sub(2) as f64;
    let gamma2 = if degree == 0 { 0.0 } else { 2.0 + 2.0 * gamma1 };
    let k1 = params.k1();
    let coef = params.beta / params.rho;

    let mut h_min = f64::INFINITY;
    let mut max_abs_k = 0.0_f64;
    let mut constants = [0.0_f64; 4];
    let mut failures = Vec::new();
    let fail = |name: &'static str, failures: &mut Vec<&'static str>| {
        if !failures.contains(&name) {
            failures.push(name);
        }
    };

    for i in 0..samples {
        let s = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let h = params.h0() + params.h_tilde_raw(s);
        let dh = params.h_prime(s);
        let d2h = params.h_second(s);
        h_min = h_min.min(h);
        if !(h >= params.h1) {
            fail("H1", &mut failures);
            continue;
        }
        let k = coef / h;
        let dk = -coef * dh / (h * h);
        let d2k = -coef * (d2h / (h * h) - 2.0 * dh * dh / (h * h * h));
        max_abs_k = max_abs_k.max(k.abs());
        if k.abs() > k1 * (1.0 + 1e-12) {
            fail("K1", &mut failures);
        }
        let ratios = [
            d2h.abs() / (1.0 + s.abs().powf(gamma1)),
            dh.abs() / (1.0 + s.abs().powf(1.0 + gamma1)),
            d2k.abs() / (1.0 + s.abs().powf(gamma2)),
            dk.abs() / (1.0 + s.abs().powf(1.0 + gamma2)),
        ];
        for (slot, (r, name)) in constants.iter_mut().zip(ratios.into_iter().zip(["H2", "H3", "K2", "K2"])) {
            if r.is_finite() {
                *slot = slot.max(r);
            } else {
                fail(name, &mut failures);
            }
        }
    }
    if !h_min.is_finite() {
        fail("H1", &mut failures);
    }

    AssumptionReport {
        theta_range,
        samples,
        h_min_observed: h_min,
        gamma1,
        gamma2,
        k1,
        max_abs_k,
        growth_constants: constants,
        passed: failures.is_empty(),
        failures,
    }
}
