use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::{entropies, sample_trajectory, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::estimation::{fit_decoherence_law, run_ensemble, saturation_size, Cell, EnsembleStats, LawConstants, ScalingFit};
use crate::model::{build_system, SystemConfig};
use crate::oracle::{evolve_capped, reduce, vn_entropy};
use crate::recurrence::recurrence_stats;
use crate::rng::derive_seed;

use super::config::RunConfig;
use super::output::{fmt_float, read_csv, CsvTable, Provenance, INCOMPLETE_MARKER};

const TIME_UNITS: &str = "t in gt; entropy in nats";
/// Oracle-check tolerances.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Time points per system in oracle-check.
pub const ORACLE_TIMES: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ensemble,
    Sweep,
    FitScaling,
    Recurrence,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::Ensemble,
        Command::Sweep,
        Command::FitScaling,
        Command::Recurrence,
        Command::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Sweep => "sweep",
            Command::FitScaling => "fit-scaling",
            Command::Recurrence => "recurrence",
            Command::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown subcommand `{s}`")))
    }
}

/// Extra inputs that are not part of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Existing sweep table for `fit-scaling`.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// False when oracle-check found a delta over tolerance.
    pub passed: bool,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

/// Runs one subcommand into `config.out`. On error an `INCOMPLETE` marker
/// holding the message is left next to whatever was already written.
pub fn run(command: Command, config: &RunConfig, options: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    let out = config.out.clone();
    fs::create_dir_all(&out)?;
    let marker = out.join(INCOMPLETE_MARKER);
    fs::write(&marker, format!("{command} started\n"))?;
    let result = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
            .install(|| dispatch(command, config, options)),
        None => dispatch(command, config, options),
    };
    match &result {
        Ok(_) => fs::remove_file(&marker)?,
        Err(e) => fs::write(&marker, format!("{command} failed: {e}\n"))?,
    }
    result
}

fn dispatch(command: Command, config: &RunConfig, options: &RunOptions) -> Result<RunReport> {
    let prov = Provenance::new(command.name(), config);
    let out = config.out.as_path();
    match command {
        Command::Simulate => simulate(config, out, &prov),
        Command::Ensemble => ensemble(config, out, &prov),
        Command::Sweep => {
            let (_, report) = sweep(config, out, &prov)?;
            Ok(report)
        }
        Command::FitScaling => fit_scaling(config, options.input.as_deref(), out, &prov),
        Command::Recurrence => recurrence(config, out, &prov),
        Command::OracleCheck => oracle_check(config, out, &prov),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_float)
}

fn simulate(config: &RunConfig, out: &Path, prov: &Provenance) -> Result<RunReport> {
    let system = build_system(&config.system())?;
    let n = system.n_particles();
    let options = TrajectoryOptions { per_particle: config.z_columns, entropy: config.entropy, ..Default::default() };
    let traj = sample_trajectory(&system, config.dt, config.n_samples(), options)?;

    let mut columns = vec!["t".to_string(), "xi".to_string()];
    if config.z_columns {
        columns.extend((1..=n).map(|l| format!("z_{l}")));
    }
    if config.entropy {
        columns.extend(["s_tot", "s_scaled", "xi_plus_s_scaled"].map(String::from));
    }
    let mut table = CsvTable::new("trajectory", TIME_UNITS, columns);
    let scale = 2.0 * n as f64 * std::f64::consts::LN_2;
    for k in 0..traj.len() {
        let mut row = vec![traj.time(k), traj.xi[k]];
        if let Some(z) = &traj.abs_coherence {
            row.extend(z.iter().map(|col| col[k]));
        }
        if let Some(s) = &traj.entropy_total {
            let scaled = s[k] / scale;
            row.extend([s[k], scaled, traj.xi[k] + scaled]);
        }
        table.push(row.into_iter().map(fmt_float));
    }
    let path = table.write(out, "trajectory.csv", prov)?;
    let summary = format!("trajectory: {} samples of N={n} up to t={}", traj.len(), traj.t_end());
    Ok(RunReport { files: vec![path], passed: true, summary })
}

fn stats_columns() -> Vec<&'static str> {
    vec!["n", "rho", "d", "eta", "epsilon", "seed", "runs", "mean_tau", "std_tau", "mean_xi", "std_xi", "failures"]
}

fn stats_row(stats: &EnsembleStats, seed: u64) -> Vec<String> {
    let c = &stats.cell;
    vec![
        c.n_particles.to_string(),
        fmt_float(c.density),
        c.dimension.to_string(),
        fmt_float(c.eta),
        fmt_float(c.epsilon),
        seed.to_string(),
        stats.runs.to_string(),
        fmt_float(stats.mean_tau),
        opt(stats.std_tau),
        fmt_float(stats.mean_xi),
        opt(stats.std_xi),
        stats.failures.to_string(),
    ]
}

fn ensemble(config: &RunConfig, out: &Path, prov: &Provenance) -> Result<RunReport> {
    let spec = config.ensemble_spec(config.n, config.rho, config.d);
    let stats = run_ensemble(&spec, config.u, config.seed)?;

    let mut runs = CsvTable::with_columns(
        "ensemble-runs",
        TIME_UNITS,
        &["index", "seed", "tau", "c", "residual", "iterations", "converged", "window_end", "mean_xi", "error"],
    );
    for r in &stats.records {
        let fit_fields = match &r.fit {
            Some(f) => vec![
                fmt_float(f.tau),
                fmt_float(f.c),
                fmt_float(f.residual),
                f.iterations.to_string(),
                f.converged.to_string(),
                fmt_float(f.window_end),
            ],
            None => vec![String::new(); 6],
        };
        let mut row = vec![r.index.to_string(), r.seed.to_string()];
        row.extend(fit_fields);
        row.push(fmt_float(r.mean_xi));
        row.push(r.error.clone().unwrap_or_default().replace(',', ";"));
        runs.push(row);
    }
    let mut summary = CsvTable::with_columns("ensemble-stats", TIME_UNITS, &stats_columns());
    summary.push(stats_row(&stats, config.seed));
    let files = vec![runs.write(out, "runs.csv", prov)?, summary.write(out, "stats.csv", prov)?];
    let text = format!(
        "N={} rho={} D={}: tau_d = {} (std {}), <Xi> = {}, {} of {} runs failed",
        config.n,
        config.rho,
        config.d,
        fmt_float(stats.mean_tau),
        opt(stats.std_tau),
        fmt_float(stats.mean_xi),
        stats.failures,
        stats.runs
    );
    Ok(RunReport { files, passed: true, summary: text })
}

/// Runs every sweep cell; cell `k` uses master seed `derive_seed(seed, k)`.
/// The stats table is rewritten after each cell.
fn sweep(config: &RunConfig, out: &Path, prov: &Provenance) -> Result<(Vec<EnsembleStats>, RunReport)> {
    if config.n_list.is_empty() && config.rho_list.is_empty() {
        return Err(Error::Validation("sweep needs a non-empty n_list or rho_list".into()));
    }
    let cells = config.sweep_cells();
    let mut table = CsvTable::with_columns("sweep-stats", TIME_UNITS, &stats_columns());
    let mut all = Vec::with_capacity(cells.len());
    let mut path = out.join("sweep.csv");
    for (k, &(n, rho, d)) in cells.iter().enumerate() {
        let seed = derive_seed(config.seed, k as u64);
        let stats = run_ensemble(&config.ensemble_spec(n, rho, d), config.u, seed)?;
        table.push(stats_row(&stats, seed));
        path = table.write(out, "sweep.csv", prov)?;
        all.push(stats);
    }
    let summary = format!("{} cells with {} runs each", all.len(), config.u);
    Ok((all, RunReport { files: vec![path], passed: true, summary }))
}

/// Reads a stats table written by `sweep` or `ensemble`.
pub fn read_sweep(text: &str) -> Result<Vec<EnsembleStats>> {
    let (header, rows) = read_csv(text);
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("missing column `{name}`") })
    };
    let idx = ["n", "rho", "d", "eta", "epsilon", "runs", "mean_tau", "mean_xi", "std_xi", "failures"]
        .map(col);
    let [n, rho, d, eta, epsilon, runs, mean_tau, mean_xi, std_xi, failures] = idx;
    let (n, rho, d, eta, epsilon, runs, mean_tau, mean_xi, std_xi, failures) =
        (n?, rho?, d?, eta?, epsilon?, runs?, mean_tau?, mean_xi?, std_xi?, failures?);
    rows.into_iter()
        .map(|(line, fields)| {
            let get = |i: usize| {
                fields.get(i).ok_or_else(|| Error::Parse { line, message: format!("expected {} fields", header.len()) })
            };
            let num = |i: usize| -> Result<f64> {
                get(i)?.parse().map_err(|_| Error::Parse { line, message: format!("bad number in column {}", header[i]) })
            };
            let int = |i: usize| -> Result<usize> {
                get(i)?.parse().map_err(|_| Error::Parse { line, message: format!("bad integer in column {}", header[i]) })
            };
            let std_xi = match get(std_xi)?.as_str() {
                "" => None,
                _ => Some(num(std_xi)?),
            };
            Ok(EnsembleStats {
                cell: Cell {
                    n_particles: int(n)?,
                    density: num(rho)?,
                    dimension: int(d)?,
                    eta: num(eta)?,
                    epsilon: num(epsilon)?,
                },
                runs: int(runs)?,
                mean_tau: num(mean_tau)?,
                std_tau: None,
                mean_xi: num(mean_xi)?,
                std_xi,
                failures: int(failures)?,
                records: Vec::new(),
            })
        })
        .collect()
}

fn fit_scaling(config: &RunConfig, input: Option<&Path>, out: &Path, prov: &Provenance) -> Result<RunReport> {
    let (cells, mut files) = match input {
        Some(path) => (read_sweep(&fs::read_to_string(path)?)?, Vec::new()),
        None => {
            let (cells, report) = sweep(config, out, prov)?;
            (cells, report.files)
        }
    };
    let mut dims: Vec<usize> = cells.iter().map(|c| c.cell.dimension).collect();
    dims.sort_unstable();
    dims.dedup();
    let fits: Vec<ScalingFit> = dims
        .iter()
        .map(|&d| {
            let subset: Vec<EnsembleStats> = cells.iter().filter(|c| c.cell.dimension == d).cloned().collect();
            fit_decoherence_law(&subset)
        })
        .collect::<Result<_>>()?;

    let mut table = CsvTable::with_columns(
        "scaling",
        TIME_UNITS,
        &[
            "d", "eta", "epsilon", "p", "p_err", "q", "q_err", "r", "r_err", "s", "s_err", "s_r2", "a", "b", "ab_r2",
            "fluct_amplitude", "fluct_rate",
        ],
    );
    let mut report = String::new();
    for fit in &fits {
        let c = &fit.constants;
        let level = fit.mean_level.as_ref();
        let fluct = fit.fluctuation.as_ref();
        table.push([
            fit.dimension.to_string(),
            fmt_float(fit.eta),
            fmt_float(fit.epsilon),
            fmt_float(c.p),
            opt(fit.p_err),
            fmt_float(c.q),
            opt(fit.q_err),
            fmt_float(c.r),
            opt(fit.r_err),
            fmt_float(c.s),
            opt(fit.s_err),
            fmt_float(fit.s_r_squared),
            opt(level.map(|l| l.amplitude)),
            opt(level.map(|l| l.rate)),
            opt(level.map(|l| l.r_squared)),
            opt(fluct.map(|l| l.amplitude)),
            opt(fluct.map(|l| l.rate)),
        ]);
        report.push_str(&describe_fit(fit));
    }
    files.push(table.write(out, "scaling.csv", prov)?);
    let txt = out.join("scaling.txt");
    fs::write(&txt, format!("# config_sha256: {}\n# master_seed: {}\n\n{report}", prov.config_hash, prov.master_seed))?;
    files.push(txt);
    Ok(RunReport { files, passed: true, summary: report })
}

fn describe_fit(fit: &ScalingFit) -> String {
    let c = &fit.constants;
    let pm = |v: f64, e: Option<f64>| match e {
        Some(e) => format!("{v:.4} ± {e:.4}"),
        None => format!("{v:.4}"),
    };
    let mut s = format!("D = {} (eta = {}, epsilon = {})\n", fit.dimension, fit.eta, fit.epsilon);
    s.push_str("  tau_d = (P / N^Q + R) / (eta rho^S)\n");
    s.push_str(&format!("  P = {}\n  Q = {}\n  R = {}\n", pm(c.p, fit.p_err), pm(c.q, fit.q_err), pm(c.r, fit.r_err)));
    s.push_str(&format!("  S = {}  (log-log r^2 = {:.4})\n", pm(c.s, fit.s_err), fit.s_r_squared));
    s.push_str(&format!("  N-grid at rho = {}: {} points\n", fit.n_grid_density, fit.n_grid.len()));
    s.push_str(&format!("  rho-grid at N = {}: {} points\n", fit.rho_grid_particles, fit.rho_grid.len()));
    if let Some(level) = &fit.mean_level {
        s.push_str(&format!(
            "  <Xi> = A exp(-B N): A = {:.4}, B = {:.4} (r^2 = {:.4})\n",
            level.amplitude,
            level.rate,
            level.r_squared
        ));
    }
    if let Ok(n) = saturation_size(0.99, c) {
        s.push_str(&format!("  tau_d within 1% of its large-N limit from N = {n}\n"));
    }
    if let Some(reference) = LawConstants::published(fit.dimension) {
        s.push_str(&format!(
            "  reference constants: P = {}, Q = {}, R = {}, S = {}\n",
            reference.p, reference.q, reference.r, reference.s
        ));
    }
    s.push('\n');
    s
}

fn recurrence(config: &RunConfig, out: &Path, prov: &Provenance) -> Result<RunReport> {
    let cells = config.grid_cells();
    let mut table = CsvTable::with_columns(
        "recurrence",
        TIME_UNITS,
        &["n", "rho", "d", "seed", "samples", "degenerate", "mean", "log10_mean_period", "mean_log10", "std", "median"],
    );
    let mut samples = CsvTable::with_columns("recurrence-samples", TIME_UNITS, &["n", "rho", "d", "sample", "period"]);
    for (k, &(n, rho, d)) in cells.iter().enumerate() {
        let seed = derive_seed(config.seed, k as u64);
        let system = SystemConfig { n_particles: n, density: rho, dimension: d, ..config.system() };
        let s = recurrence_stats(&system, config.samples, seed)?;
        table.push([
            n.to_string(),
            fmt_float(rho),
            d.to_string(),
            seed.to_string(),
            s.samples.to_string(),
            s.degenerate.to_string(),
            fmt_float(s.mean),
            fmt_float(s.mean.log10()),
            fmt_float(s.log10_mean),
            fmt_float(s.std),
            fmt_float(s.median),
        ]);
        for (u, p) in s.periods.iter().enumerate() {
            samples.push([n.to_string(), fmt_float(rho), d.to_string(), u.to_string(), fmt_float(*p)]);
        }
    }
    let files = vec![table.write(out, "recurrence.csv", prov)?, samples.write(out, "recurrence_samples.csv", prov)?];
    Ok(RunReport { files, passed: true, summary: format!("{} recurrence cells", cells.len()) })
}

/// Largest deltas between closed-form and brute-force dynamics for one system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDeltas {
    pub coherence: f64,
    pub entropy: f64,
    pub norm: f64,
}

/// Compares `|z_l|` and per-particle entropies with the state-vector oracle
/// at `times`.
pub fn oracle_deltas(system: &crate::model::SpinSystem, times: &[f64], cap: usize) -> Result<OracleDeltas> {
    let mut d = OracleDeltas { coherence: 0.0, entropy: 0.0, norm: 0.0 };
    for &t in times {
        let state = evolve_capped(system, t, cap)?;
        d.norm = d.norm.max((state.norm_sqr() - 1.0).abs());
        let closed = entropies(system, t)?;
        for (l, &s_closed) in closed.iter().enumerate() {
            let rho = reduce(&state, l)?;
            let z = crate::dynamics::coherence(system, l, t)?;
            d.coherence = d.coherence.max((rho.off_diagonal().norm() - z.norm()).abs());
            d.entropy = d.entropy.max((vn_entropy(&rho)? - s_closed).abs());
        }
    }
    Ok(d)
}

fn oracle_check(config: &RunConfig, out: &Path, prov: &Provenance) -> Result<RunReport> {
    let sizes = if config.n_list.is_empty() { vec![config.n] } else { config.n_list.clone() };
    if let Some(&n) = sizes.iter().find(|&&n| n > config.oracle_cap) {
        return Err(Error::OracleCap { n, cap: config.oracle_cap });
    }
    let times: Vec<f64> = (0..ORACLE_TIMES).map(|k| config.t_max * k as f64 / (ORACLE_TIMES - 1) as f64).collect();
    let mut table = CsvTable::with_columns(
        "oracle-check",
        TIME_UNITS,
        &["index", "n", "seed", "max_coherence_delta", "max_entropy_delta", "max_norm_delta", "pass"],
    );
    let mut worst = OracleDeltas { coherence: 0.0, entropy: 0.0, norm: 0.0 };
    let mut index = 0;
    for &n in &sizes {
        for _ in 0..config.samples {
            let seed = derive_seed(config.seed, index as u64);
            let system = build_system(&SystemConfig { n_particles: n, rng_seed: seed, ..config.system() })?;
            let d = oracle_deltas(&system, &times, config.oracle_cap)?;
            let pass = d.coherence < ORACLE_TOLERANCE && d.entropy < ORACLE_TOLERANCE && d.norm < NORM_TOLERANCE;
            table.push([
                index.to_string(),
                n.to_string(),
                seed.to_string(),
                fmt_float(d.coherence),
                fmt_float(d.entropy),
                fmt_float(d.norm),
                pass.to_string(),
            ]);
            worst.coherence = worst.coherence.max(d.coherence);
            worst.entropy = worst.entropy.max(d.entropy);
            worst.norm = worst.norm.max(d.norm);
            index += 1;
        }
    }
    let passed = worst.coherence < ORACLE_TOLERANCE && worst.entropy < ORACLE_TOLERANCE && worst.norm < NORM_TOLERANCE;
    let path = table.write(out, "oracle.csv", prov)?;
    let summary = format!(
        "{}: max |d|z|| = {:e}, max |dS| = {:e}, max |d norm| = {:e} over {index} systems",
        if passed { "PASS" } else { "FAIL" },
        worst.coherence,
        worst.entropy,
        worst.norm
    );
    Ok(RunReport { files: vec![path], passed, summary })
}
