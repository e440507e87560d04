//! Command execution: runs the matching study, writes CSV files and the
//! manifest, and maps the outcome to an exit code.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use westcat_core::analysis::check_interpolation;
use westcat_core::energy::EnergyReport;
use westcat_core::grid::Grid;
use westcat_core::medium::validate_assumptions;
use westcat_core::simulate::{
    mms_study, run_coupled_full, tau_limit_study, with_thread_cap, MmsSpec, SimulateError, Snapshot, Termination,
};

use crate::config::{config_digest, Config};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DEGENERACY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub const ENERGY_HEADER: &str =
    "t,E1,E2,D1,D2,Etheta0,Etheta1,Etheta,Dtheta,Elow,Ehigh,Dlow,Dhigh,min_coeff,max_coeff";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Mms,
    TauStudy,
    Inequalities,
    Validate,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Run, Command::Mms, Command::TauStudy, Command::Inequalities, Command::Validate];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Mms => "mms",
            Command::TauStudy => "tau-study",
            Command::Inequalities => "inequalities",
            Command::Validate => "validate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    /// Forces a single worker thread.
    pub deterministic: bool,
    /// Upper bound on worker threads, usually from `WESTCAT_THREADS`.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub exit_code: i32,
    pub termination: String,
    pub outputs: Vec<PathBuf>,
    pub messages: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_digest: String,
    seed: u64,
    deterministic: bool,
    threads: Option<usize>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    termination: &'a str,
    exit_code: i32,
    outputs: Vec<String>,
    notes: &'a [String],
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn energy_row(r: &EnergyReport) -> String {
    [
        r.t,
        r.e1,
        r.e2,
        r.d1,
        r.d2,
        r.e_theta_0,
        r.e_theta_1,
        r.e_theta_total,
        r.d_theta_total,
        r.e_low,
        r.e_high,
        r.d_low,
        r.d_high,
        r.min_coeff,
        r.max_coeff,
    ]
    .iter()
    .map(|&x| fmt(x))
    .collect::<Vec<_>>()
    .join(",")
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()
}

fn write_snapshot(path: &Path, snap: &Snapshot) -> io::Result<()> {
    let grid = snap.p.grid();
    let axes: Vec<String> = (0..grid.dim()).map(|a| format!("x{a}")).collect();
    let header = format!("index,{},p,theta", axes.join(","));
    let rows = (0..grid.len()).map(|i| {
        let c = grid.coords(i);
        let coords: Vec<String> = c[..grid.dim()].iter().map(|&x| fmt(x)).collect();
        format!("{i},{},{},{}", coords.join(","), fmt(snap.p.values()[i]), fmt(snap.theta.values()[i]))
    });
    write_lines(path, &header, rows)
}

fn classify(err: &SimulateError) -> (i32, &'static str) {
    match err {
        SimulateError::InvalidConfig(_)
        | SimulateError::Grid(_)
        | SimulateError::Medium(_)
        | SimulateError::Assumptions { .. }
        | SimulateError::TooFewLevels { .. } => (EXIT_CONFIG, "config-error"),
        SimulateError::RunIncomplete { termination: Termination::DegeneracyAbort { .. }, .. } => {
            (EXIT_DEGENERACY, "degeneracy-abort")
        }
        _ => (EXIT_SOLVER, "solver-failure"),
    }
}

fn termination_code(t: &Termination) -> i32 {
    match t {
        Termination::Completed => EXIT_OK,
        Termination::DegeneracyAbort { .. } => EXIT_DEGENERACY,
        Termination::SolverFailure { .. } => EXIT_SOLVER,
    }
}

struct Outcome {
    exit_code: i32,
    termination: String,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { exit_code: EXIT_OK, termination: "completed".into(), outputs: Vec::new(), notes: Vec::new() }
    }

    fn fail(&mut self, err: &SimulateError) {
        let (code, label) = classify(err);
        self.exit_code = code;
        self.termination = label.into();
        self.notes.push(err.to_string());
    }
}

fn execute(cfg: &Config, command: Command, out: &Path) -> io::Result<Outcome> {
    let mut o = Outcome::new();
    let sc = &cfg.scenario;
    match command {
        Command::Run => {
            match run_coupled_full(sc, None, None) {
                Ok(run) => {
                    let series = run.series;
                    let path = out.join("energy.csv");
                    write_lines(&path, ENERGY_HEADER, series.reports.iter().map(energy_row))?;
                    o.outputs.push(path);
                    if !series.snapshots.is_empty() {
                        let dir = out.join("snapshots");
                        fs::create_dir_all(&dir)?;
                        for snap in &series.snapshots {
                            let path = dir.join(format!("step_{:08}.csv", snap.step));
                            write_snapshot(&path, snap)?;
                            o.outputs.push(path);
                        }
                    }
                    o.exit_code = termination_code(&series.termination);
                    o.termination = series.termination.label().into();
                    match &series.termination {
                        Termination::Completed => {}
                        Termination::DegeneracyAbort { step, t, min_coeff, max_coeff } => o.notes.push(format!(
                            "degeneracy abort at step {step} (t = {t}): 1 - 2k(θ)p in [{min_coeff}, {max_coeff}]"
                        )),
                        Termination::SolverFailure { step, t, message } => {
                            o.notes.push(format!("solver failure at step {step} (t = {t}): {message}"))
                        }
                    }
                    if series.cap_warning {
                        o.notes.push("2 max|k p| exceeded cap_m inside the admissible window".into());
                    }
                    o.notes.push(format!(
                        "coefficient 1 - 2k(θ)p over the run: [{}, {}]",
                        series.min_coeff, series.max_coeff
                    ));
                    o.notes.push(
                        "E2 and D2 take gradients of the discrete Laplacian with zero ghost values, so they include \
                         the boundary layer of the zero-extended field"
                            .into(),
                    );
                    o.notes.push("D2 omits the p_ttt term at t = 0 (no history yet)".into());
                }
                Err(e) => o.fail(&e),
            }
        }
        Command::Mms => {
            let spec = MmsSpec {
                kind: cfg.study.mms_kind,
                levels: cfg.study.mms_levels.clone(),
                dt_ratio: cfg.study.mms_dt_ratio,
                amplitude: cfg.study.mms_amplitude,
            };
            match mms_study(sc, &spec) {
                Ok(rows) => {
                    let path = out.join("mms.csv");
                    write_lines(
                        &path,
                        "n,h,dt,error_p,error_theta,error,observed_order",
                        rows.iter().map(|r| {
                            let order = r.observed_order.map(fmt).unwrap_or_default();
                            format!(
                                "{},{},{},{},{},{},{}",
                                r.n,
                                fmt(r.h),
                                fmt(r.dt),
                                fmt(r.error_p),
                                fmt(r.error_theta),
                                fmt(r.error),
                                order
                            )
                        }),
                    )?;
                    o.outputs.push(path);
                }
                Err(e) => o.fail(&e),
            }
        }
        Command::TauStudy => match tau_limit_study(sc, &cfg.study.tau_list) {
            Ok(rows) => {
                let path = out.join("tau.csv");
                write_lines(
                    &path,
                    "tau,gap_theta,gap_p",
                    rows.iter().map(|r| format!("{},{},{}", fmt(r.tau), fmt(r.gap_theta), fmt(r.gap_p))),
                )?;
                o.outputs.push(path);
            }
            Err(e) => o.fail(&e),
        },
        Command::Inequalities => {
            let mut rows = Vec::new();
            for &n in &cfg.study.inequality_levels {
                let counts = vec![n; sc.grid.dim];
                let grid = match Grid::new(sc.grid.dim, &sc.grid.extents, &counts) {
                    Ok(g) => g,
                    Err(e) => {
                        o.fail(&SimulateError::Grid(e));
                        return Ok(o);
                    }
                };
                match check_interpolation(&grid, cfg.study.inequality_samples, sc.seed) {
                    Ok(reports) => {
                        for r in reports {
                            rows.push(format!(
                                "{n},{},{},{},{}",
                                r.name,
                                fmt(r.worst_ratio),
                                r.sample_count,
                                fmt(r.constant_estimate)
                            ));
                        }
                    }
                    Err(e) => {
                        o.exit_code = EXIT_SOLVER;
                        o.termination = "solver-failure".into();
                        o.notes.push(e.to_string());
                        break;
                    }
                }
            }
            let path = out.join("inequalities.csv");
            write_lines(&path, "n,name,worst_ratio,sample_count,constant_estimate", rows)?;
            o.outputs.push(path);
        }
        Command::Validate => {
            let report = validate_assumptions(&sc.medium, sc.theta_range, 1025);
            let mut lines = vec![
                format!("theta_range = [{}, {}]", sc.theta_range.0, sc.theta_range.1),
                format!("h_min = {}", report.h_min_observed),
                format!("k1 = {}", report.k1),
                format!("max_abs_k = {}", report.max_abs_k),
                format!("gamma1 = {}", report.gamma1),
                format!("gamma2 = {}", report.gamma2),
            ];
            if report.passed {
                lines.push("status = passed".into());
            } else {
                lines.push(format!("status = failed: {}", report.failures.join(", ")));
                o.exit_code = EXIT_CONFIG;
                o.termination = "config-error".into();
                o.notes.push(format!("failing assumptions: {}", report.failures.join(", ")));
            }
            let path = out.join("validate.txt");
            fs::write(&path, lines.join("\n") + "\n")?;
            o.outputs.push(path);
        }
    }
    Ok(o)
}

/// Runs `command` and writes its outputs plus `manifest.json` to
/// `opts.out_dir`.
pub fn run_scenario(cfg: &Config, command: Command, opts: &RunOptions) -> io::Result<RunResult> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.scenario.seed = seed;
    }
    fs::create_dir_all(&opts.out_dir)?;
    let threads = if opts.deterministic { Some(1) } else { opts.threads };
    let started = now_ms();
    let outcome = with_thread_cap(threads, || execute(&cfg, command, &opts.out_dir))?;
    let finished = now_ms();

    let manifest_path = opts.out_dir.join("manifest.json");
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_digest: config_digest(&cfg),
        seed: cfg.scenario.seed,
        deterministic: opts.deterministic,
        threads,
        started_unix_ms: started,
        finished_unix_ms: finished,
        termination: &outcome.termination,
        exit_code: outcome.exit_code,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        notes: &outcome.notes,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(&manifest_path, json + "\n")?;

    let mut outputs = outcome.outputs;
    outputs.push(manifest_path);
    Ok(RunResult { exit_code: outcome.exit_code, termination: outcome.termination, outputs, messages: outcome.notes })
}
