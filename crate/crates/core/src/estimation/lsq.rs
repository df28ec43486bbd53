//! Small dense damped Gauss–Newton (Levenberg–Marquardt with Marquardt's
//! diagonal scaling). Problems here have two or three parameters, so the
//! normal equations are solved directly.

use nalgebra::{DMatrix, DVector};

/// Residuals and Jacobian at a parameter vector.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `n_residuals × n_params`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    /// Maps a trial point back into the feasible set.
    fn project(&self, _x: &mut [f64]) {}
    /// Writes `Σ r_i ∇²r_i` (row-major `n_params × n_params`) and returns true
    /// if the problem provides it. Adding it to `JᵀJ` gives Newton steps,
    /// which matter when the residual at the optimum is large.
    fn residual_curvature(&self, _x: &[f64], _r: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Converged when every `|Δx_i| ≤ step_tolerance · scale_i`.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 200, step_tolerance: 1e-8, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimises `Σ r_i(x)²` from `x0`. `scale` sets the per-parameter size used
/// by the step test.
pub fn minimize<P: LeastSquaresProblem>(problem: &P, x0: &[f64], scale: &[f64], options: SolverOptions) -> SolverReport {
    let (n, m) = (problem.n_params(), problem.n_residuals());
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    problem.residuals(&x, &mut r);
    let mut cost = sum_sq(&r);
    let mut damping = options.initial_damping;
    let mut trial = vec![0.0; n];
    let mut trial_r = vec![0.0; m];
    let mut curvature = vec![0.0; n * n];

    for iteration in 1..=options.max_iterations {
        problem.jacobian(&x, &mut jac);
        let j = DMatrix::from_row_slice(m, n, &jac);
        let jtj = j.transpose() * &j;
        let mut hessian = jtj.clone();
        if problem.residual_curvature(&x, &r, &mut curvature) {
            hessian += DMatrix::from_row_slice(n, n, &curvature);
        }
        let grad = j.transpose() * DVector::from_column_slice(&r);
        if cost == 0.0 || grad.amax() == 0.0 {
            return SolverReport { x, cost, iterations: iteration, converged: true };
        }

        let mut accepted = false;
        while damping < 1e16 {
            let Some(step) = constrained_step(problem, &x, &hessian, &jtj, &grad, damping) else {
                damping *= 10.0;
                continue;
            };
            for i in 0..n {
                trial[i] = x[i] + step[i];
            }
            problem.project(&mut trial);
            problem.residuals(&trial, &mut trial_r);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = (0..n).all(|i| (trial[i] - x[i]).abs() <= options.step_tolerance * scale[i]);
                x.copy_from_slice(&trial);
                r.copy_from_slice(&trial_r);
                cost = trial_cost;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return SolverReport { x, cost, iterations: iteration, converged: true };
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision.
            return SolverReport { x, cost, iterations: iteration, converged: true };
        }
    }
    SolverReport { x, cost, iterations: options.max_iterations, converged: false }
}

/// Damped step over the parameters not held at a bound. A parameter is
/// frozen when projection would leave it where it is; the step is then solved
/// again without it.
fn constrained_step<P: LeastSquaresProblem>(
    problem: &P,
    x: &[f64],
    hessian: &DMatrix<f64>,
    jtj: &DMatrix<f64>,
    grad: &DVector<f64>,
    damping: f64,
) -> Option<Vec<f64>> {
    let n = x.len();
    let mut free: Vec<usize> = (0..n).collect();
    loop {
        let k = free.len();
        let mut lhs = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for (a, &i) in free.iter().enumerate() {
            rhs[a] = -grad[i];
            for (b, &j) in free.iter().enumerate() {
                lhs[(a, b)] = hessian[(i, j)];
            }
            lhs[(a, a)] += damping * jtj[(i, i)].max(1e-300);
        }
        let solved = lhs.cholesky()?.solve(&rhs);
        let mut step = vec![0.0; n];
        for (a, &i) in free.iter().enumerate() {
            step[i] = solved[a];
        }
        let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        problem.project(&mut trial);
        let pinned: Vec<usize> = free.iter().copied().filter(|&i| step[i] != 0.0 && trial[i] == x[i]).collect();
        if pinned.is_empty() || pinned.len() == free.len() {
            return Some(step);
        }
        free.retain(|i| !pinned.contains(i));
    }
}
