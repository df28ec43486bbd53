use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

use super::lsq::{minimize, LeastSquaresProblem, SolverOptions};

/// Upper bound for the fitted level `c`, which must stay below 0.5.
const C_MAX: f64 = 0.5 - 1e-12;
/// Relative slack when checking a window edge against the grid end.
const GRID_SLACK: f64 = 1e-9;

/// `ξ(t) = (0.5 − c) e^{−t/τ} + c`.
pub fn decay_model(t: f64, tau: f64, c: f64) -> f64 {
    (0.5 - c) * (-t / tau).exp() + c
}

/// Which early part of Ξ(t) the decay fit sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// `[0, min(factor · τ₀, cap)]` with τ₀ the initial guess.
    Auto { factor: f64, cap: f64 },
    /// `[0, t_end]`.
    UpTo(f64),
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::Auto { factor: 20.0, cap: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub tau: f64,
    pub c: f64,
    /// Sum of squared residuals over the window.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tau0: f64,
    pub c0: f64,
    /// End of the window actually used.
    pub window_end: f64,
    pub window_samples: usize,
}

/// Time average of Ξ over `[t1, t2]` by the trapezoidal rule on the linear
/// interpolant of the samples.
pub fn time_average(trajectory: &Trajectory, t1: f64, t2: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(Error::Domain(format!("time-average window needs t1 < t2, got [{t1}, {t2}]")));
    }
    let end = trajectory.t_end();
    if t1 < 0.0 || t2 > end * (1.0 + GRID_SLACK) {
        return Err(Error::WindowOutsideTrajectory { t1, t2, start: 0.0, end });
    }
    let t2 = t2.min(end);
    Ok(integrate(trajectory, t1, t2) / (t2 - t1))
}

fn value_at(trajectory: &Trajectory, t: f64) -> f64 {
    let pos = t / trajectory.dt;
    let k = (pos.floor() as usize).min(trajectory.len() - 2);
    let frac = pos - k as f64;
    trajectory.xi[k] * (1.0 - frac) + trajectory.xi[k + 1] * frac
}

fn snap(pos: f64) -> f64 {
    let r = pos.round();
    if (pos - r).abs() < 1e-9 {
        r
    } else {
        pos
    }
}

fn integrate(trajectory: &Trajectory, t1: f64, t2: f64) -> f64 {
    let dt = trajectory.dt;
    let first = snap(t1 / dt).ceil() as usize;
    let last = snap(t2 / dt).floor() as usize;
    if first > last {
        return 0.5 * (value_at(trajectory, t1) + value_at(trajectory, t2)) * (t2 - t1);
    }
    let xs = &trajectory.xi;
    let mut sum = 0.0;
    let t_first = trajectory.time(first);
    if t_first > t1 {
        sum += 0.5 * (value_at(trajectory, t1) + xs[first]) * (t_first - t1);
    }
    for k in first..last {
        sum += 0.5 * (xs[k] + xs[k + 1]) * dt;
    }
    let t_last = trajectory.time(last);
    if t2 > t_last {
        sum += 0.5 * (xs[last] + value_at(trajectory, t2)) * (t2 - t_last);
    }
    sum
}

/// Initial guesses `(τ₀, c₀)`: `c₀` is the mean of the second half of the
/// trajectory, `τ₀` the first (interpolated) time Ξ drops below
/// `c₀ + (0.5 − c₀)/e`, or 1 if it never does.
pub fn initial_guess(trajectory: &Trajectory) -> (f64, f64) {
    let half = trajectory.t_end() / 2.0;
    let tail: Vec<f64> = trajectory.times().zip(&trajectory.xi).filter(|(t, _)| *t >= half).map(|(_, &v)| v).collect();
    let c0 = (tail.iter().sum::<f64>() / tail.len() as f64).clamp(0.0, C_MAX);
    let level = c0 + (0.5 - c0) / std::f64::consts::E;
    let tau0 = trajectory
        .xi
        .windows(2)
        .enumerate()
        .find(|(_, w)| w[1] < level)
        .map(|(k, w)| {
            let frac = if w[0] > w[1] { ((w[0] - level) / (w[0] - w[1])).clamp(0.0, 1.0) } else { 1.0 };
            trajectory.time(k) + frac * trajectory.dt
        })
        .filter(|&t| t > 0.0)
        .unwrap_or(1.0);
    (tau0, c0)
}

struct DecayProblem<'a> {
    times: &'a [f64],
    values: &'a [f64],
}

impl LeastSquaresProblem for DecayProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.times.len()
    }

    // Parameters are (ln τ, c).
    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let tau = x[0].exp();
        for ((o, &t), &v) in out.iter_mut().zip(self.times).zip(self.values) {
            *o = decay_model(t, tau, x[1]) - v;
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let tau = x[0].exp();
        for (row, &t) in out.chunks_mut(2).zip(self.times) {
            let e = (-t / tau).exp();
            row[0] = (0.5 - x[1]) * e * (t / tau);
            row[1] = 1.0 - e;
        }
    }

    fn project(&self, x: &mut [f64]) {
        x[1] = x[1].clamp(0.0, C_MAX);
    }

    // With s = t/τ: ∂²r/∂(ln τ)² = (0.5 − c) e^{−s} s (s − 1),
    // ∂²r/∂(ln τ)∂c = −e^{−s} s, ∂²r/∂c² = 0.
    fn residual_curvature(&self, x: &[f64], r: &[f64], out: &mut [f64]) -> bool {
        let tau = x[0].exp();
        let (mut uu, mut uc) = (0.0, 0.0);
        for (&t, &ri) in self.times.iter().zip(r) {
            let s = t / tau;
            let e = (-s).exp();
            uu += ri * (0.5 - x[1]) * e * s * (s - 1.0);
            uc -= ri * e * s;
        }
        out.copy_from_slice(&[uu, uc, uc, 0.0]);
        true
    }
}

/// Least-squares fit of `ξ(t)` to the early part of Ξ(t).
pub fn fit_decay(trajectory: &Trajectory, window: FitWindow) -> Result<DecayFit> {
    let (tau0, c0) = initial_guess(trajectory);
    let window_end = match window {
        FitWindow::Auto { factor, cap } => (factor * tau0).min(cap),
        FitWindow::UpTo(t) => t,
    };
    if !(window_end > 0.0) {
        return Err(Error::DegenerateWindow(format!("window end {window_end} is not positive")));
    }
    let count = trajectory.times().take_while(|&t| t <= window_end * (1.0 + GRID_SLACK)).count();
    if count < 3 {
        return Err(Error::DegenerateWindow(format!("{count} samples in [0, {window_end}]")));
    }
    let times: Vec<f64> = trajectory.times().take(count).collect();
    let problem = DecayProblem { times: &times, values: &trajectory.xi[..count] };
    let report = minimize(&problem, &[tau0.ln(), c0], &[1.0, 0.5], SolverOptions::default());
    Ok(DecayFit {
        tau: report.x[0].exp(),
        c: report.x[1],
        residual: report.cost,
        iterations: report.iterations,
        converged: report.converged,
        tau0,
        c0,
        window_end: window_end.min(trajectory.t_end()),
        window_samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn synthetic(tau: f64, c: f64, dt: f64, n: usize) -> Trajectory {
        Trajectory::from_samples(dt, (0..n).map(|k| decay_model(k as f64 * dt, tau, c)).collect()).unwrap()
    }

    #[test]
    fn constant_average() {
        let traj = Trajectory::from_samples(0.05, vec![0.5; 2001]).unwrap();
        assert_relative_eq!(time_average(&traj, 50.0, 100.0).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn ramp_average_exact() {
        let traj = Trajectory::from_samples(0.1, (0..11).map(|k| k as f64 / 10.0).collect()).unwrap();
        assert_relative_eq!(time_average(&traj, 0.0, 1.0).unwrap(), 0.5, max_relative = 1e-14);
        // Off-grid windows interpolate linearly.
        assert_relative_eq!(time_average(&traj, 0.25, 0.75).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(time_average(&traj, 0.31, 0.37).unwrap(), 0.34, max_relative = 1e-13);
    }

    #[test]
    fn average_window_errors() {
        let traj = Trajectory::from_samples(0.1, vec![0.2; 11]).unwrap();
        assert!(matches!(time_average(&traj, 0.5, 2.0), Err(Error::WindowOutsideTrajectory { .. })));
        assert!(matches!(time_average(&traj, -0.5, 0.5), Err(Error::WindowOutsideTrajectory { .. })));
        assert!(matches!(time_average(&traj, 0.8, 0.2), Err(Error::Domain(_))));
    }

    #[test]
    fn recovers_own_model() {
        let traj = synthetic(2.5, 0.1, 0.05, 2001);
        let fit = fit_decay(&traj, FitWindow::default()).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.tau, 2.5, max_relative = 1e-6);
        assert_relative_eq!(fit.c, 0.1, max_relative = 1e-6);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn open_system_limit() {
        // c → 0 reduces the model to ½ e^{−t/τ}.
        let traj = synthetic(0.8, 0.0, 0.01, 5001);
        let fit = fit_decay(&traj, FitWindow::default()).unwrap();
        assert!(fit.c.abs() < 1e-9);
        assert_relative_eq!(fit.tau, 0.8, max_relative = 1e-7);
        assert_relative_eq!(decay_model(1.3, fit.tau, 0.0), 0.5 * (-1.3f64 / 0.8).exp(), max_relative = 1e-6);
    }

    #[test]
    fn initial_guess_and_window() {
        let traj = synthetic(1.0, 0.2, 0.01, 10001);
        let (tau0, c0) = initial_guess(&traj);
        assert_relative_eq!(c0, 0.2, max_relative = 1e-9);
        assert_relative_eq!(tau0, 1.0, max_relative = 1e-3);
        let fit = fit_decay(&traj, FitWindow::default()).unwrap();
        assert_relative_eq!(fit.window_end, 20.0 * tau0, max_relative = 1e-12);
        let fixed = fit_decay(&traj, FitWindow::UpTo(5.0)).unwrap();
        assert_eq!(fixed.window_samples, 501);
    }

    #[test]
    fn flat_trajectory_falls_back() {
        let traj = Trajectory::from_samples(0.05, vec![0.5; 200]).unwrap();
        let (tau0, _) = initial_guess(&traj);
        assert_eq!(tau0, 1.0);
    }

    #[test]
    fn degenerate_window() {
        let traj = synthetic(1.0, 0.1, 1.0, 50);
        assert!(matches!(fit_decay(&traj, FitWindow::UpTo(1.0)), Err(Error::DegenerateWindow(_))));
        assert!(matches!(fit_decay(&traj, FitWindow::UpTo(-1.0)), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| 0.3 + 0.1 * (3.0 * t).cos()).collect();
        let p = DecayProblem { times: &times, values: &values };
        let x = [0.2f64.ln(), 0.15];
        let m = times.len();
        let mut r = vec![0.0; m];
        p.residuals(&x, &mut r);
        let mut analytic = [0.0; 4];
        assert!(p.residual_curvature(&x, &r, &mut analytic));
        let h = 1e-6;
        for k in 0..2 {
            let (mut up, mut down) = (x, x);
            up[k] += h;
            down[k] -= h;
            let (mut ju, mut jd) = (vec![0.0; 2 * m], vec![0.0; 2 * m]);
            p.jacobian(&up, &mut ju);
            p.jacobian(&down, &mut jd);
            for i in 0..2 {
                let numeric: f64 = (0..m).map(|row| r[row] * (ju[2 * row + i] - jd[2 * row + i]) / (2.0 * h)).sum();
                assert_relative_eq!(analytic[2 * k + i], numeric, epsilon = 1e-7, max_relative = 1e-6);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn self_consistent_fit(tau in 0.2f64..8.0, c in 0.0f64..0.45) {
            let traj = synthetic(tau, c, 0.02, 5001);
            let fit = fit_decay(&traj, FitWindow::default()).unwrap();
            prop_assert!(fit.residual < 1e-10);
            prop_assert!((fit.tau - tau).abs() < 1e-6 * tau);
            prop_assert!(fit.tau > 0.0 && (0.0..0.5).contains(&fit.c));
        }
    }
}
