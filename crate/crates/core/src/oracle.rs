//! Brute-force reference: the full `2^N` state vector under the pairwise
//! `σ_z ⊗ σ_z` Hamiltonian, single-particle partial traces and von Neumann
//! entropies from a numerical eigendecomposition.
//!
//! Basis index bit `k` holds particle `k`: 0 for `|+⟩` (σ_z = +1), 1 for `|−⟩`.
//! The Hamiltonian is diagonal in this basis, so evolution multiplies each
//! amplitude by `exp(−i E(s) t)` with `E(s) = Σ_{j<i} g_ij s_i s_j`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SpinSystem;

pub const DEFAULT_PARTICLE_CAP: usize = 14;
/// Eigenvalues below `-NEGATIVE_EIGENVALUE_TOLERANCE` are rejected.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-10;
pub const PURITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_particles: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }
}

/// Single-particle density matrix, index 0 = `|+⟩`, 1 = `|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedDensityMatrix(pub Matrix2<Complex64>);

impl ReducedDensityMatrix {
    pub fn off_diagonal(&self) -> Complex64 {
        self.0[(0, 1)]
    }

    pub fn diagonal(&self) -> (f64, f64) {
        (self.0[(0, 0)].re, self.0[(1, 1)].re)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues from nalgebra's Hermitian eigensolver, descending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let ev = self.0.symmetric_eigenvalues();
        let (a, b) = (ev[0], ev[1]);
        if a >= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

fn spin_sign(state: usize, k: usize) -> f64 {
    if state >> k & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal energies `E(s)` for every basis state.
pub fn energies(system: &SpinSystem) -> Vec<f64> {
    let n = system.n_particles();
    (0..1usize << n)
        .into_par_iter()
        .map(|s| {
            let mut e = 0.0;
            for j in 0..n {
                let sj = spin_sign(s, j);
                for i in (j + 1)..n {
                    e += system.couplings.get(i, j) * sj * spin_sign(s, i);
                }
            }
            e
        })
        .collect()
}

pub fn evolve(system: &SpinSystem, t: f64) -> Result<StateVector> {
    evolve_capped(system, t, DEFAULT_PARTICLE_CAP)
}

pub fn evolve_capped(system: &SpinSystem, t: f64, cap: usize) -> Result<StateVector> {
    let n = system.n_particles();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    Ok(evolve_with_energies(system, &energies(system), t))
}

/// Evolution with precomputed energies, for many times on one system.
pub fn evolve_with_energies(system: &SpinSystem, energies: &[f64], t: f64) -> StateVector {
    let n = system.n_particles();
    let amplitudes = energies
        .par_iter()
        .enumerate()
        .map(|(s, &e)| {
            let product = system.amplitudes.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (k, amp)| {
                acc * if s >> k & 1 == 0 { amp.a } else { amp.b }
            });
            product * Complex64::from_polar(1.0, -e * t)
        })
        .collect();
    StateVector { n_particles: n, amplitudes }
}

/// Partial trace over every particle except `l`.
pub fn reduce(state: &StateVector, l: usize) -> Result<ReducedDensityMatrix> {
    let n = state.n_particles;
    if l >= n {
        return Err(Error::IndexOutOfRange { index: l, n });
    }
    let bit = 1usize << l;
    let mut rho = Matrix2::<Complex64>::zeros();
    for s in (0..state.amplitudes.len()).filter(|s| s & bit == 0) {
        let plus = state.amplitudes[s];
        let minus = state.amplitudes[s | bit];
        rho[(0, 0)] += plus * plus.conj();
        rho[(0, 1)] += plus * minus.conj();
        rho[(1, 0)] += minus * plus.conj();
        rho[(1, 1)] += minus * minus.conj();
    }
    Ok(ReducedDensityMatrix(rho))
}

/// `−Tr(ρ ln ρ)` in nats from the numerical eigenvalues.
pub fn vn_entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    let (p, m) = rho.eigenvalues();
    let mut s = 0.0;
    for lambda in [p, m] {
        if lambda < -NEGATIVE_EIGENVALUE_TOLERANCE {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        if lambda > 0.0 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s)
}

/// `Σ_l S(ρ_l) − S(ρ)`. The global state is pure, so after checking that the
/// result is the sum of single-particle entropies.
pub fn mutual_information(system: &SpinSystem, t: f64) -> Result<f64> {
    let state = evolve(system, t)?;
    let deviation = (state.norm_sqr() - 1.0).abs();
    if deviation > PURITY_TOLERANCE {
        return Err(Error::PurityViolation(deviation));
    }
    (0..system.n_particles()).map(|l| reduce(&state, l).and_then(|r| vn_entropy(&r))).sum()
}
