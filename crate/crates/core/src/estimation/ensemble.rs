use rayon::prelude::*;

use crate::dynamics::{sample_trajectory, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::model::{build_system, SystemConfig};
use crate::rng::derive_seed;

use super::fit::{fit_decay, time_average, DecayFit, FitWindow};

/// Runs may fail to converge up to this fraction before the ensemble errors.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

/// One parameter cell plus the sampling and averaging protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    /// `rng_seed` is ignored; member seeds come from the master seed.
    pub system: SystemConfig,
    pub dt: f64,
    pub t_max: f64,
    pub t1: f64,
    pub t2: f64,
    pub fit_window: FitWindow,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self { system: SystemConfig::default(), dt: 0.05, t_max: 100.0, t1: 50.0, t2: 100.0, fit_window: FitWindow::default() }
    }
}

impl EnsembleSpec {
    pub fn n_samples(&self) -> usize {
        (self.t_max / self.dt).round() as usize + 1
    }
}

/// Parameters identifying a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n_particles: usize,
    pub density: f64,
    pub dimension: usize,
    pub eta: f64,
    pub epsilon: f64,
}

impl From<&SystemConfig> for Cell {
    fn from(c: &SystemConfig) -> Self {
        Self { n_particles: c.n_particles, density: c.density, dimension: c.dimension, eta: c.eta, epsilon: c.epsilon }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub fit: Option<DecayFit>,
    /// ⟨Ξ⟩ over `[t1, t2]`.
    pub mean_xi: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub cell: Cell,
    pub runs: usize,
    /// τ_d, the mean of the fitted τ_u.
    pub mean_tau: f64,
    /// Population standard deviation; `None` for fewer than two fitted runs.
    pub std_tau: Option<f64>,
    pub mean_xi: f64,
    pub std_xi: Option<f64>,
    /// Runs without a fit or with a non-converged one.
    pub failures: usize,
    pub records: Vec<RunRecord>,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt());
    (mean, std)
}

fn run_member(spec: &EnsembleSpec, index: usize, seed: u64) -> Result<RunRecord> {
    let system = build_system(&spec.system.with_seed(seed))?;
    let trajectory = sample_trajectory(&system, spec.dt, spec.n_samples(), TrajectoryOptions::default())?;
    let mean_xi = time_average(&trajectory, spec.t1, spec.t2)?;
    let (fit, error) = match fit_decay(&trajectory, spec.fit_window) {
        Ok(f) => (Some(f), None),
        Err(e @ Error::DegenerateWindow(_)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(RunRecord { index, seed, fit, mean_xi, error })
}

/// Builds `runs` independent systems (member `u` seeded with
/// `derive_seed(master_seed, u)`), fits each one and aggregates. Members run
/// in parallel; the result does not depend on the thread count.
pub fn run_ensemble(spec: &EnsembleSpec, runs: usize, master_seed: u64) -> Result<EnsembleStats> {
    if runs < 1 {
        return Err(Error::Domain("an ensemble needs at least one run".into()));
    }
    spec.system.validate()?;
    let records: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|u| run_member(spec, u, derive_seed(master_seed, u as u64)))
        .collect::<Result<_>>()?;

    let failures = records.iter().filter(|r| !r.fit.is_some_and(|f| f.converged)).count();
    if failures as f64 > MAX_FAILURE_FRACTION * runs as f64 {
        return Err(Error::EnsembleFailure { failed: failures, total: runs });
    }
    let taus: Vec<f64> = records.iter().filter_map(|r| r.fit.map(|f| f.tau)).collect();
    if taus.is_empty() {
        return Err(Error::EnsembleFailure { failed: failures, total: runs });
    }
    let levels: Vec<f64> = records.iter().map(|r| r.mean_xi).collect();
    let (mean_tau, std_tau) = mean_std(&taus);
    let (mean_xi, std_xi) = mean_std(&levels);
    Ok(EnsembleStats {
        cell: Cell::from(&spec.system),
        runs,
        mean_tau,
        std_tau,
        mean_xi,
        std_xi,
        failures,
        records,
    })
}
