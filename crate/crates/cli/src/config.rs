//! Line-based configuration: `[section]` headers, `key = value` pairs and
//! `#` comments. Lists are comma separated. Unknown sections and keys are
//! rejected with their line number.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;
use westcat_core::medium::MediumError;
use westcat_core::simulate::{MmsKind, Preset, ScenarioConfig, SimulateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {second}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
}

/// Settings for the study commands (`mms`, `tau-study`, `inequalities`).
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub mms_kind: MmsKind,
    pub mms_levels: Vec<usize>,
    pub mms_dt_ratio: f64,
    pub mms_amplitude: f64,
    pub tau_list: Vec<f64>,
    pub inequality_samples: usize,
    pub inequality_levels: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            mms_kind: MmsKind::AcousticLinear,
            mms_levels: vec![31, 63, 127],
            mms_dt_ratio: 0.25,
            mms_amplitude: 1.0,
            tau_list: vec![1e-1, 1e-2, 1e-3],
            inequality_samples: 100,
            inequality_levels: vec![31, 63, 127],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub study: StudyConfig,
}

const SECTIONS: [&str; 7] = ["grid", "medium", "time", "initial", "coupling", "output", "study"];

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), message: message.into() }
}

fn real(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| invalid(key, format!("`{v}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, format!("`{v}` is not finite")))
    }
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| invalid(key, format!("`{v}` is not a nonnegative integer")))
}

fn list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(key, s.trim())).collect()
}

fn set(cfg: &mut Config, section: &str, key: &str, v: &str) -> Result<bool, ConfigError> {
    let sc = &mut cfg.scenario;
    let md = &mut sc.medium;
    let st = &mut cfg.study;
    match (section, key) {
        ("grid", "dim") => sc.grid.dim = count(key, v)?,
        ("grid", "extents") => sc.grid.extents = list(key, v, real)?,
        ("grid", "counts") => sc.grid.counts = list(key, v, count)?,
        ("medium", "c_a") => md.c_a = real(key, v)?,
        ("medium", "b") => md.b = real(key, v)?,
        ("medium", "beta") => md.beta = real(key, v)?,
        ("medium", "rho") => md.rho = real(key, v)?,
        ("medium", "rho_a") => md.rho_a = real(key, v)?,
        ("medium", "heat_capacity_a") => md.heat_capacity_a = real(key, v)?,
        ("medium", "rho_b") => md.rho_b = real(key, v)?,
        ("medium", "heat_capacity_b") => md.heat_capacity_b = real(key, v)?,
        ("medium", "perfusion") => md.perfusion = real(key, v)?,
        ("medium", "kappa_a") => md.kappa_a = real(key, v)?,
        ("medium", "tau") => md.tau = real(key, v)?,
        ("medium", "theta_a") => md.theta_a = real(key, v)?,
        ("medium", "speed_poly") => md.speed_poly = list(key, v, real)?,
        ("medium", "h1") => md.h1 = real(key, v)?,
        ("medium", "theta_min") => sc.theta_range.0 = real(key, v)?,
        ("medium", "theta_max") => sc.theta_range.1 = real(key, v)?,
        ("time", "dt") => sc.dt = real(key, v)?,
        ("time", "t_final") => sc.t_final = real(key, v)?,
        ("initial", "preset") => {
            sc.initial.preset = Preset::from_name(v).ok_or_else(|| invalid(key, format!("unknown preset `{v}`")))?
        }
        ("initial", "p0_amplitude") => sc.initial.p0_amplitude = real(key, v)?,
        ("initial", "p1_amplitude") => sc.initial.p1_amplitude = real(key, v)?,
        ("initial", "theta0_amplitude") => sc.initial.theta0_amplitude = real(key, v)?,
        ("initial", "theta1_amplitude") => sc.initial.theta1_amplitude = real(key, v)?,
        ("initial", "width") => sc.initial.width = real(key, v)?,
        ("coupling", "sweeps") => sc.coupling_sweeps = count(key, v)?,
        ("coupling", "floor_alpha") => sc.degeneracy.floor_alpha = real(key, v)?,
        ("coupling", "cap_m") => sc.degeneracy.cap_m = real(key, v)?,
        ("coupling", "picard_tol") => sc.picard.tol = real(key, v)?,
        ("coupling", "max_picard") => sc.picard.max_iterations = count(key, v)?,
        ("coupling", "solver_tol") => sc.solver.tol = real(key, v)?,
        ("coupling", "max_cg") => {
            let n = count(key, v)?;
            sc.solver.max_iterations = (n > 0).then_some(n);
        }
        ("output", "energy_every") => sc.output.energy_every = count(key, v)?,
        ("output", "snapshot_every") => sc.output.snapshot_every = count(key, v)?,
        ("study", "seed") => sc.seed = v.parse().map_err(|_| invalid(key, format!("`{v}` is not a u64")))?,
        ("study", "mms_kind") => {
            st.mms_kind = MmsKind::from_name(v).ok_or_else(|| invalid(key, format!("unknown study kind `{v}`")))?
        }
        ("study", "mms_levels") => st.mms_levels = list(key, v, count)?,
        ("study", "mms_dt_ratio") => st.mms_dt_ratio = real(key, v)?,
        ("study", "mms_amplitude") => st.mms_amplitude = real(key, v)?,
        ("study", "tau_list") => st.tau_list = list(key, v, real)?,
        ("study", "inequality_samples") => st.inequality_samples = count(key, v)?,
        ("study", "inequality_levels") => st.inequality_levels = list(key, v, count)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Parses and validates a configuration. Keys not mentioned keep their
/// defaults.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut section: Option<String> = None;
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse { line, message: format!("malformed section header `{content}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection { line, section: name.to_string() });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected `key = value`, found `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Parse { line, message: "empty key".into() });
        }
        let sec = section
            .clone()
            .ok_or_else(|| ConfigError::Parse { line, message: format!("key `{key}` appears before any section") })?;
        if let Some(&first) = seen.get(&(sec.clone(), key.to_string())) {
            return Err(ConfigError::DuplicateKey { key: key.to_string(), first, second: line });
        }
        seen.insert((sec.clone(), key.to_string()), line);
        if !set(&mut cfg, &sec, key, value)? {
            return Err(ConfigError::UnknownKey { line, section: sec, key: key.to_string() });
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &Config) -> Result<(), ConfigError> {
    let sc = &cfg.scenario;
    if sc.grid.extents.len() != sc.grid.dim || sc.grid.counts.len() != sc.grid.dim {
        return Err(invalid("dim", "extents and counts need one entry per axis"));
    }
    sc.validate().map_err(|e| match e {
        SimulateError::Medium(MediumError::InvalidParameter { name, value }) => {
            invalid(name, format!("{value} is out of range"))
        }
        SimulateError::Grid(g) => invalid("grid", g.to_string()),
        other => invalid("config", other.to_string()),
    })?;
    let st = &cfg.study;
    if !(st.mms_dt_ratio > 0.0) {
        return Err(invalid("mms_dt_ratio", "must be positive"));
    }
    if st.mms_levels.iter().any(|&n| n < 3) || st.inequality_levels.iter().any(|&n| n < 3) {
        return Err(invalid("levels", "every level needs at least 3 nodes per axis"));
    }
    if st.tau_list.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("tau_list", "entries must be positive"));
    }
    if st.inequality_samples == 0 {
        return Err(invalid("inequality_samples", "must be at least 1"));
    }
    Ok(())
}

fn join<T: std::fmt::Debug>(items: &[T]) -> String {
    items.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Canonical text form; `parse_config(&serialize(c)) == c`.
pub fn serialize(cfg: &Config) -> String {
    let sc = &cfg.scenario;
    let md = &sc.medium;
    let st = &cfg.study;
    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w("[grid]".into());
    w(format!("dim = {}", sc.grid.dim));
    w(format!("extents = {}", join(&sc.grid.extents)));
    w(format!("counts = {}", join(&sc.grid.counts)));
    w("\n[medium]".into());
    for (k, v) in [
        ("c_a", md.c_a),
        ("b", md.b),
        ("beta", md.beta),
        ("rho", md.rho),
        ("rho_a", md.rho_a),
        ("heat_capacity_a", md.heat_capacity_a),
        ("rho_b", md.rho_b),
        ("heat_capacity_b", md.heat_capacity_b),
        ("perfusion", md.perfusion),
        ("kappa_a", md.kappa_a),
        ("tau", md.tau),
        ("theta_a", md.theta_a),
    ] {
        w(format!("{k} = {v:?}"));
    }
    w(format!("speed_poly = {}", join(&md.speed_poly)));
    w(format!("h1 = {:?}", md.h1));
    w(format!("theta_min = {:?}", sc.theta_range.0));
    w(format!("theta_max = {:?}", sc.theta_range.1));
    w("\n[time]".into());
    w(format!("dt = {:?}", sc.dt));
    w(format!("t_final = {:?}", sc.t_final));
    w("\n[initial]".into());
    w(format!("preset = {}", sc.initial.preset.name()));
    w(format!("p0_amplitude = {:?}", sc.initial.p0_amplitude));
    w(format!("p1_amplitude = {:?}", sc.initial.p1_amplitude));
    w(format!("theta0_amplitude = {:?}", sc.initial.theta0_amplitude));
    w(format!("theta1_amplitude = {:?}", sc.initial.theta1_amplitude));
    w(format!("width = {:?}", sc.initial.width));
    w("\n[coupling]".into());
    w(format!("sweeps = {}", sc.coupling_sweeps));
    w(format!("floor_alpha = {:?}", sc.degeneracy.floor_alpha));
    w(format!("cap_m = {:?}", sc.degeneracy.cap_m));
    w(format!("picard_tol = {:?}", sc.picard.tol));
    w(format!("max_picard = {}", sc.picard.max_iterations));
    w(format!("solver_tol = {:?}", sc.solver.tol));
    w(format!("max_cg = {}", sc.solver.max_iterations.unwrap_or(0)));
    w("\n[output]".into());
    w(format!("energy_every = {}", sc.output.energy_every));
    w(format!("snapshot_every = {}", sc.output.snapshot_every));
    w("\n[study]".into());
    w(format!("seed = {}", sc.seed));
    w(format!("mms_kind = {}", st.mms_kind.name()));
    w(format!("mms_levels = {}", join(&st.mms_levels)));
    w(format!("mms_dt_ratio = {:?}", st.mms_dt_ratio));
    w(format!("mms_amplitude = {:?}", st.mms_amplitude));
    w(format!("tau_list = {}", join(&st.tau_list)));
    w(format!("inequality_samples = {}", st.inequality_samples));
    w(format!("inequality_levels = {}", join(&st.inequality_levels)));
    s
}

/// Hex SHA-256 of the canonical form, so edits that do not change the
/// parsed configuration keep the digest.
pub fn config_digest(cfg: &Config) -> String {
    use sha2::{Digest, Sha256};
    let hash = Sha256::digest(serialize(cfg).as_bytes());
    let mut out = String::with_capacity(64);
    for byte in hash {
        let _ = write!(out, "{byte:02x}");
    }
    out
}
