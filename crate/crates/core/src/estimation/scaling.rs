//! Cross-cell scaling laws: `⟨Ξ⟩(N) = A e^{−BN}` and
//! `τ_d = (1/η)(P/N^Q + R) ρ^{−S}`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::ensemble::EnsembleStats;
use super::lsq::{minimize, LeastSquaresProblem, SolverOptions};

/// Constants of the decoherence-time law for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawConstants {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl LawConstants {
    /// Published fit constants for `D = 1, 2, 3` (ε = 1).
    pub fn published(dimension: usize) -> Option<Self> {
        match dimension {
            1 => Some(Self { p: 3.73, q: 1.49, r: 0.415, s: 1.80 }),
            2 => Some(Self { p: 0.77, q: 0.80, r: 0.166, s: 1.00 }),
            3 => Some(Self { p: 0.45, q: 0.55, r: 0.128, s: 0.67 }),
            _ => None,
        }
    }

    /// Published uncertainties, same order as [`LawConstants::published`].
    pub fn published_errors(dimension: usize) -> Option<Self> {
        match dimension {
            1 => Some(Self { p: 1.0, q: 0.3, r: 0.022, s: 0.05 }),
            2 => Some(Self { p: 0.3, q: 0.1, r: 0.004, s: 0.05 }),
            3 => Some(Self { p: 0.1, q: 0.05, r: 0.003, s: 0.05 }),
            _ => None,
        }
    }

    /// τ_d at `(N, ρ, η)`.
    pub fn decoherence_time(&self, n_particles: f64, density: f64, eta: f64) -> f64 {
        (self.p / n_particles.powf(self.q) + self.r) * density.powf(-self.s) / eta
    }
}

/// Smallest `N` whose size-dependent term is at most `1 − f` of τ_d, i.e.
/// `P/N^Q ≤ (1/f − 1) R`.
pub fn saturation_size(target_fraction: f64, constants: &LawConstants) -> Result<u64> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::Domain(format!("target fraction must lie in (0, 1), got {target_fraction}")));
    }
    let bound = (1.0 / target_fraction - 1.0) * constants.r;
    let holds = |n: u64| constants.p / (n as f64).powf(constants.q) <= bound;
    let estimate = (constants.p / bound).powf(1.0 / constants.q).ceil().max(1.0);
    if !estimate.is_finite() || estimate > 1e18 {
        return Err(Error::Domain("saturation size overflows".into()));
    }
    let mut n = estimate as u64;
    while n > 1 && holds(n - 1) {
        n -= 1;
    }
    while !holds(n) {
        n += 1;
    }
    Ok(n)
}

/// `y = A e^{−B x}` fitted by linear regression of `ln y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialLaw {
    pub amplitude: f64,
    pub rate: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope x`; returns
/// `(intercept, slope, r², slope standard error)`.
pub(crate) fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let se = if xs.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (intercept, slope, r_squared, se)
}

pub fn fit_mean_level(points: &[(f64, f64)]) -> Result<ExponentialLaw> {
    if points.len() < 3 {
        return Err(Error::InsufficientGrid(format!("{} points, need at least 3", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::Domain(format!("value {y} at {x} is not positive")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope, r_squared, _) = linear_regression(&xs, &ys);
    Ok(ExponentialLaw { amplitude: intercept.exp(), rate: -slope, r_squared })
}

/// Result of the two-stage decoherence-time law fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub dimension: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub constants: LawConstants,
    /// Standard errors; `None` where the grid leaves no degrees of freedom.
    pub p_err: Option<f64>,
    pub q_err: Option<f64>,
    pub r_err: Option<f64>,
    pub s_err: Option<f64>,
    /// r² of the log-log regression of τ_d on ρ.
    pub s_r_squared: f64,
    /// Density of the N-grid and particle number of the ρ-grid.
    pub n_grid_density: f64,
    pub rho_grid_particles: usize,
    pub n_grid: Vec<(usize, f64)>,
    pub rho_grid: Vec<(f64, f64)>,
    pub mean_level: Option<ExponentialLaw>,
    pub fluctuation: Option<ExponentialLaw>,
}

struct SaturatingPowerLaw<'a> {
    n: &'a [f64],
    y: &'a [f64],
}

impl LeastSquaresProblem for SaturatingPowerLaw<'_> {
    fn n_params(&self) -> usize {
        3
    }

    fn n_residuals(&self) -> usize {
        self.n.len()
    }

    // Parameters are (ln P, ln Q, ln R) so all three stay positive.
    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let (p, q, r) = (x[0].exp(), x[1].exp(), x[2].exp());
        for ((o, &n), &y) in out.iter_mut().zip(self.n).zip(self.y) {
            *o = p * n.powf(-q) + r - y;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (p, q, r) = (x[0].exp(), x[1].exp(), x[2].exp());
        for (row, &n) in out.chunks_mut(3).zip(self.n) {
            let term = p * n.powf(-q);
            row[0] = term;
            row[1] = -term * n.ln() * q;
            row[2] = r;
        }
    }
}

fn std_errors(n: &[f64], residual: f64, c: &LawConstants) -> [Option<f64>; 3] {
    let dof = n.len() as f64 - 3.0;
    if dof < 1.0 {
        return [None; 3];
    }
    let rows: Vec<f64> = n
        .iter()
        .flat_map(|&v| {
            let term = v.powf(-c.q);
            [term, -c.p * term * v.ln(), 1.0]
        })
        .collect();
    let j = DMatrix::from_row_slice(n.len(), 3, &rows);
    let Some(inv) = (j.transpose() * j).try_inverse() else {
        return [None; 3];
    };
    let s2 = residual / dof;
    [0, 1, 2].map(|i| {
        let v = inv[(i, i)] * s2;
        (v >= 0.0).then(|| v.sqrt())
    })
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

/// Two-stage fit over a sweep that contains an N-grid at fixed ρ and a ρ-grid
/// at fixed N (same D, η, ε). Stage one gets `S` from the log-log slope of
/// τ_d against ρ; stage two fits `(P, Q, R)` to `τ_d η ρ^S` against N.
pub fn fit_decoherence_law(cells: &[EnsembleStats]) -> Result<ScalingFit> {
    let first = cells.first().ok_or_else(|| Error::InsufficientGrid("empty sweep".into()))?.cell;
    if cells.iter().any(|c| c.cell.dimension != first.dimension || c.cell.eta != first.eta || c.cell.epsilon != first.epsilon) {
        return Err(Error::InsufficientGrid("cells mix dimension, eta or epsilon".into()));
    }

    let mut by_density: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut by_n: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
    for c in cells {
        by_density.entry(key(c.cell.density)).or_default().insert(c.cell.n_particles, c.mean_tau);
        by_n.entry(c.cell.n_particles).or_default().insert(key(c.cell.density), c.mean_tau);
    }
    let (density_bits, n_line) =
        by_density.iter().max_by_key(|(_, m)| m.len()).map(|(k, m)| (*k, m.clone())).unwrap_or_default();
    let (grid_n, rho_line) = by_n.iter().max_by_key(|(_, m)| m.len()).map(|(k, m)| (*k, m.clone())).unwrap_or_default();
    if n_line.len() < 4 {
        return Err(Error::InsufficientGrid(format!("N-grid has {} points, need at least 4", n_line.len())));
    }
    if rho_line.len() < 3 {
        return Err(Error::InsufficientGrid(format!("density grid has {} points, need at least 3", rho_line.len())));
    }
    if n_line.values().chain(rho_line.values()).any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("decoherence times must be positive".into()));
    }

    let rho_grid: Vec<(f64, f64)> = rho_line.iter().map(|(&k, &t)| (f64::from_bits(k), t)).collect();
    let log_rho: Vec<f64> = rho_grid.iter().map(|p| p.0.ln()).collect();
    let log_tau: Vec<f64> = rho_grid.iter().map(|p| p.1.ln()).collect();
    let (_, slope, s_r_squared, s_se) = linear_regression(&log_rho, &log_tau);
    let s = -slope;

    let density = f64::from_bits(density_bits);
    let n_grid: Vec<(usize, f64)> = n_line.into_iter().collect();
    let ns: Vec<f64> = n_grid.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = n_grid.iter().map(|p| p.1 * first.eta * density.powf(s)).collect();

    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let r0 = 0.5 * y_min;
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let log_excess: Vec<f64> = ys.iter().map(|y| (y - r0).ln()).collect();
    let (intercept, slope, _, _) = linear_regression(&log_n, &log_excess);
    let q0 = if -slope > 1e-3 { -slope } else { 0.5 };
    let p0 = intercept.exp();

    let problem = SaturatingPowerLaw { n: &ns, y: &ys };
    let options = SolverOptions { max_iterations: 500, ..SolverOptions::default() };
    let report = minimize(&problem, &[p0.ln(), q0.ln(), r0.ln()], &[1.0, 1.0, 1.0], options);
    if !report.converged {
        return Err(Error::NonConvergence(format!("(P, Q, R) stage after {} iterations", report.iterations)));
    }
    let constants = LawConstants { p: report.x[0].exp(), q: report.x[1].exp(), r: report.x[2].exp(), s };
    let [p_err, q_err, r_err] = std_errors(&ns, report.cost, &constants);

    let n_cells: Vec<&EnsembleStats> = cells.iter().filter(|c| key(c.cell.density) == density_bits).collect();
    let level_points: Vec<(f64, f64)> = n_cells.iter().map(|c| (c.cell.n_particles as f64, c.mean_xi)).collect();
    let fluct_points: Option<Vec<(f64, f64)>> =
        n_cells.iter().map(|c| c.std_xi.map(|s| (c.cell.n_particles as f64, s))).collect();

    Ok(ScalingFit {
        dimension: first.dimension,
        eta: first.eta,
        epsilon: first.epsilon,
        constants,
        p_err,
        q_err,
        r_err,
        s_err: s_se.is_finite().then_some(s_se),
        s_r_squared,
        n_grid_density: density,
        rho_grid_particles: grid_n,
        n_grid,
        rho_grid,
        mean_level: fit_mean_level(&level_points).ok(),
        fluctuation: fluct_points.and_then(|p| fit_mean_level(&p).ok()),
    })
}
