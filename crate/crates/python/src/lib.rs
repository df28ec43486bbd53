//! Python bindings: `import spindeco`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spin_decoherence as core;
use spin_decoherence::{
    AmplitudeMode, Complex64, CouplingMode, Couplings, EnsembleSpec, Error, FitWindow, LawConstants, SpinAmplitude,
    SystemConfig, Trajectory, TrajectoryOptions,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ (Error::Domain(_)
        | Error::Validation(_)
        | Error::Parse { .. }
        | Error::IndexOutOfRange { .. }
        | Error::EmptySubset
        | Error::OracleCap { .. }
        | Error::WindowOutsideTrajectory { .. }
        | Error::DegenerateWindow(_)
        | Error::InsufficientGrid(_)) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn amplitude_mode(name: &str) -> PyResult<AmplitudeMode> {
    match name {
        "equal" => Ok(AmplitudeMode::EqualSuperposition),
        "random" => Ok(AmplitudeMode::RandomComplex),
        _ => Err(PyValueError::new_err(format!("amplitudes must be 'equal' or 'random', got {name:?}"))),
    }
}

fn coupling_mode(name: &str) -> PyResult<CouplingMode> {
    match name {
        "potential" => Ok(CouplingMode::Potential),
        "uniform" => Ok(CouplingMode::UniformRandom),
        _ => Err(PyValueError::new_err(format!("couplings must be 'potential' or 'uniform', got {name:?}"))),
    }
}

fn fit_window(window: Option<f64>) -> FitWindow {
    window.map_or_else(FitWindow::default, FitWindow::UpTo)
}

/// N spins with fixed couplings and initial amplitudes.
#[pyclass(name = "SpinSystem", module = "spindeco", frozen)]
struct PySpinSystem {
    inner: core::SpinSystem,
}

#[pymethods]
impl PySpinSystem {
    /// Random placement in a box of side `(n / rho)^(1/d)`.
    #[new]
    #[pyo3(signature = (n, d=3, rho=1.0, eta=1.0, epsilon=1.0, amplitudes="equal", couplings="potential", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(n: usize, d: usize, rho: f64, eta: f64, epsilon: f64, amplitudes: &str, couplings: &str, seed: u64) -> PyResult<Self> {
        let config = SystemConfig {
            n_particles: n,
            dimension: d,
            density: rho,
            eta,
            epsilon,
            amplitude_mode: amplitude_mode(amplitudes)?,
            coupling_mode: coupling_mode(couplings)?,
            rng_seed: seed,
        };
        Ok(Self { inner: core::build_system(&config).map_err(to_py)? })
    }

    /// From a symmetric coupling matrix; amplitudes default to equal
    /// superpositions.
    #[staticmethod]
    #[pyo3(signature = (couplings, amplitudes=None))]
    fn from_couplings(couplings: Vec<Vec<f64>>, amplitudes: Option<Vec<(Complex64, Complex64)>>) -> PyResult<Self> {
        let couplings = Couplings::from_rows(&couplings).map_err(to_py)?;
        let inner = match amplitudes {
            None => core::SpinSystem::with_equal_superpositions(couplings),
            Some(amps) => {
                core::SpinSystem::from_parts(couplings, amps.into_iter().map(|(a, b)| SpinAmplitude::new(a, b)).collect())
            }
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_particles()
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        self.inner.positions.clone()
    }

    #[getter]
    fn couplings(&self) -> Vec<Vec<f64>> {
        self.inner.couplings.to_rows()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<(Complex64, Complex64)> {
        self.inner.amplitudes.iter().map(|a| (a.a, a.b)).collect()
    }

    fn coherence(&self, l: usize, t: f64) -> PyResult<Complex64> {
        core::coherence(&self.inner, l, t).map_err(to_py)
    }

    fn coherences(&self, t: f64) -> Vec<Complex64> {
        core::coherences(&self.inner, t)
    }

    fn xi(&self, t: f64) -> f64 {
        core::xi(&self.inner, t)
    }

    fn xi_subset(&self, subset: Vec<usize>, t: f64) -> PyResult<f64> {
        core::xi_subset(&self.inner, &subset, t).map_err(to_py)
    }

    fn y_complement(&self, t: f64) -> f64 {
        core::y_complement(&self.inner, t)
    }

    /// `(λ₊, λ₋)` of every single-particle reduced density matrix.
    fn eigenvalues(&self, t: f64) -> PyResult<Vec<(f64, f64)>> {
        (0..self.inner.n_particles())
            .map(|l| core::CoherenceSample::at(&self.inner, l, t).map(|s| s.eigenvalues))
            .collect::<core::Result<_>>()
            .map_err(to_py)
    }

    fn entropies(&self, t: f64) -> PyResult<Vec<f64>> {
        core::dynamics::entropies(&self.inner, t).map_err(to_py)
    }

    fn entropy_total(&self, t: f64) -> PyResult<f64> {
        core::entropy_total(&self.inner, t).map_err(to_py)
    }

    /// Samples on `t_k = k dt`; returns a dict with `t`, `xi` and optionally
    /// `abs_z` (per particle) and `s_tot`.
    #[pyo3(signature = (dt, n_samples, per_particle=false, entropy=false))]
    fn trajectory<'py>(
        &self,
        py: Python<'py>,
        dt: f64,
        n_samples: usize,
        per_particle: bool,
        entropy: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let options = TrajectoryOptions { per_particle, entropy, ..Default::default() };
        let traj = py.detach(|| core::sample_trajectory(&self.inner, dt, n_samples, options)).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("t", traj.times().collect::<Vec<_>>())?;
        out.set_item("xi", &traj.xi)?;
        if let Some(z) = &traj.abs_coherence {
            out.set_item("abs_z", z)?;
        }
        if let Some(s) = &traj.entropy_total {
            out.set_item("s_tot", s)?;
        }
        Ok(out)
    }

    /// Recurrence estimate: dict with `period`, `frequencies`, `pair`, `degenerate`.
    fn recurrence<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let est = core::recurrence_time(&self.inner).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("period", est.period)?;
        out.set_item("frequencies", est.frequencies)?;
        out.set_item("pair", est.pair)?;
        out.set_item("degenerate", est.degenerate)?;
        Ok(out)
    }

    /// Full state vector by brute force; bit `k` of the index is particle `k`.
    #[pyo3(signature = (t, cap=core::oracle::DEFAULT_PARTICLE_CAP))]
    fn oracle_state(&self, t: f64, cap: usize) -> PyResult<Vec<Complex64>> {
        core::oracle::evolve_capped(&self.inner, t, cap).map(|s| s.amplitudes().to_vec()).map_err(to_py)
    }

    /// Reduced density matrix of particle `l` from the state vector.
    fn oracle_reduced(&self, l: usize, t: f64) -> PyResult<[[Complex64; 2]; 2]> {
        let state = core::oracle::evolve(&self.inner, t).map_err(to_py)?;
        let rho = core::oracle::reduce(&state, l).map_err(to_py)?.0;
        Ok([[rho[(0, 0)], rho[(0, 1)]], [rho[(1, 0)], rho[(1, 1)]]])
    }

    fn oracle_entropy(&self, l: usize, t: f64) -> PyResult<f64> {
        let state = core::oracle::evolve(&self.inner, t).map_err(to_py)?;
        core::oracle::reduce(&state, l).and_then(|r| core::oracle::vn_entropy(&r)).map_err(to_py)
    }

    fn mutual_information(&self, t: f64) -> PyResult<f64> {
        core::oracle::mutual_information(&self.inner, t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SpinSystem(n={}, d={})", self.inner.n_particles(), self.inner.dimension)
    }
}

/// Eigenvalues `(λ₊, λ₋)` of `[[|a|², z], [z*, |b|²]]`.
#[pyfunction]
fn eigenvalues(a: Complex64, b: Complex64, z: Complex64) -> PyResult<(f64, f64)> {
    core::eigenvalues(a, b, z).map_err(to_py)
}

/// Fits `(0.5 − c) e^{−t/τ} + c` to samples on `t_k = k dt`. `window` is the
/// end of a fixed fit window; by default the window is chosen from the
/// initial guess.
#[pyfunction]
#[pyo3(signature = (xi, dt, window=None))]
fn fit_decay<'py>(py: Python<'py>, xi: Vec<f64>, dt: f64, window: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let traj = Trajectory::from_samples(dt, xi).map_err(to_py)?;
    let fit = core::fit_decay(&traj, fit_window(window)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("tau", fit.tau)?;
    out.set_item("c", fit.c)?;
    out.set_item("residual", fit.residual)?;
    out.set_item("iterations", fit.iterations)?;
    out.set_item("converged", fit.converged)?;
    out.set_item("window_end", fit.window_end)?;
    Ok(out)
}

#[pyfunction]
fn time_average(xi: Vec<f64>, dt: f64, t1: f64, t2: f64) -> PyResult<f64> {
    let traj = Trajectory::from_samples(dt, xi).map_err(to_py)?;
    core::time_average(&traj, t1, t2).map_err(to_py)
}

/// Ensemble of `runs` random systems; returns the cell statistics and the
/// per-run `taus` and `levels`.
#[pyfunction]
#[pyo3(signature = (n, runs, seed=0, d=3, rho=1.0, eta=1.0, epsilon=1.0, dt=0.05, t_max=100.0, t1=50.0, t2=100.0, window=None))]
#[allow(clippy::too_many_arguments)]
fn run_ensemble<'py>(
    py: Python<'py>,
    n: usize,
    runs: usize,
    seed: u64,
    d: usize,
    rho: f64,
    eta: f64,
    epsilon: f64,
    dt: f64,
    t_max: f64,
    t1: f64,
    t2: f64,
    window: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = EnsembleSpec {
        system: SystemConfig { n_particles: n, dimension: d, density: rho, eta, epsilon, ..Default::default() },
        dt,
        t_max,
        t1,
        t2,
        fit_window: fit_window(window),
    };
    let stats = py.detach(|| core::run_ensemble(&spec, runs, seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("runs", stats.runs)?;
    out.set_item("mean_tau", stats.mean_tau)?;
    out.set_item("std_tau", stats.std_tau)?;
    out.set_item("mean_xi", stats.mean_xi)?;
    out.set_item("std_xi", stats.std_xi)?;
    out.set_item("failures", stats.failures)?;
    out.set_item("taus", stats.records.iter().map(|r| r.fit.map(|f| f.tau)).collect::<Vec<_>>())?;
    out.set_item("levels", stats.records.iter().map(|r| r.mean_xi).collect::<Vec<_>>())?;
    out.set_item("seeds", stats.records.iter().map(|r| r.seed).collect::<Vec<_>>())?;
    Ok(out)
}

/// `(A, B, r²)` of `level ≈ A e^{−B N}`.
#[pyfunction]
fn fit_mean_level(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let law = core::fit_mean_level(&points).map_err(to_py)?;
    Ok((law.amplitude, law.rate, law.r_squared))
}

fn published(d: usize) -> PyResult<LawConstants> {
    LawConstants::published(d).ok_or_else(|| PyValueError::new_err(format!("no reference constants for d = {d}")))
}

/// Reference `(P, Q, R, S)` for dimension `d`.
#[pyfunction]
fn law_constants(d: usize) -> PyResult<(f64, f64, f64, f64)> {
    let c = published(d)?;
    Ok((c.p, c.q, c.r, c.s))
}

/// `(P/N^Q + R) / (η ρ^S)` with the reference constants for `d`.
#[pyfunction]
#[pyo3(signature = (n, rho, eta, d=3))]
fn decoherence_time(n: f64, rho: f64, eta: f64, d: usize) -> PyResult<f64> {
    Ok(published(d)?.decoherence_time(n, rho, eta))
}

#[pyfunction]
#[pyo3(signature = (fraction, d=3))]
fn saturation_size(fraction: f64, d: usize) -> PyResult<u64> {
    core::saturation_size(fraction, &published(d)?).map_err(to_py)
}

/// Recurrence-time statistics over `samples` random systems.
#[pyfunction]
#[pyo3(signature = (n, samples, seed=0, d=1, rho=1.0))]
fn recurrence_stats<'py>(
    py: Python<'py>,
    n: usize,
    samples: usize,
    seed: u64,
    d: usize,
    rho: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SystemConfig { n_particles: n, dimension: d, density: rho, ..Default::default() };
    let s = py.detach(|| core::recurrence_stats(&config, samples, seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mean", s.mean)?;
    out.set_item("std", s.std)?;
    out.set_item("median", s.median)?;
    out.set_item("log10_mean", s.log10_mean)?;
    out.set_item("degenerate", s.degenerate)?;
    out.set_item("periods", s.periods)?;
    Ok(out)
}

#[pymodule]
fn spindeco(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpinSystem>()?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    m.add_function(wrap_pyfunction!(time_average, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mean_level, m)?)?;
    m.add_function(wrap_pyfunction!(law_constants, m)?)?;
    m.add_function(wrap_pyfunction!(decoherence_time, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_size, m)?)?;
    m.add_function(wrap_pyfunction!(recurrence_stats, m)?)?;
    Ok(())
}
