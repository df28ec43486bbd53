//! Spin systems: random placement in a `D`-dimensional box, couplings from the
//! `η / r^ε` potential, and initial single-particle amplitudes.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, ChaCha8Rng};

/// Particles closer than this fraction of the box side are resampled.
pub const MIN_SEPARATION_FRACTION: f64 = 1e-9;
/// Resample attempts per particle before placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Amplitudes `(a, b)` of `a|+⟩ + b|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinAmplitude {
    pub a: Complex64,
    pub b: Complex64,
}

impl SpinAmplitude {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    /// `a = b = 1/√2`.
    pub fn equal_superposition() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self { a: h, b: h }
    }

    /// `|a|² + |b|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// The off-diagonal element `a b*` of the initial single-particle density matrix.
    pub fn off_diagonal(&self) -> Complex64 {
        self.a * self.b.conj()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeMode {
    #[default]
    EqualSuperposition,
    /// `|a|²` uniform on `[0, 1]`, independent uniform phases on `a` and `b`.
    RandomComplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `g_ij = η / |r_i − r_j|^ε`.
    #[default]
    Potential,
    /// `g_ij` i.i.d. uniform on `[0, 1)`, independent of positions.
    UniformRandom,
}

/// Symmetric coupling matrix with zero diagonal, stored densely row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    n: usize,
    data: Vec<f64>,
}

impl Couplings {
    /// Builds from the strict upper triangle: `f(i, j)` is called for `i < j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = f(i, j);
                data[i * n + j] = g;
                data[j * n + i] = g;
            }
        }
        Self { n, data }
    }

    /// Checks symmetry, zero diagonal and finite non-negative entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("coupling matrix must be square".into()));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::Domain(format!("g[{i}][{i}] must be zero")));
            }
            for j in 0..n {
                let g = rows[i][j];
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::Domain(format!("g[{i}][{j}] = {g} is not finite and non-negative")));
                }
                if g != rows[j][i] {
                    return Err(Error::Domain(format!("coupling matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data: rows.iter().flatten().copied().collect() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i`, including the zero diagonal entry.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|g| g * factor).collect() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Largest and smallest off-diagonal coupling.
    pub fn off_diagonal_range(&self) -> Option<(f64, f64)> {
        let mut it = (0..self.n).flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)));
        let (i0, j0) = it.next()?;
        let first = self.get(i0, j0);
        Some(it.fold((first, first), |(lo, hi), (i, j)| {
            let g = self.get(i, j);
            (lo.min(g), hi.max(g))
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_particles: usize,
    pub dimension: usize,
    /// Particles per unit volume.
    pub density: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub amplitude_mode: AmplitudeMode,
    pub coupling_mode: CouplingMode,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_particles: 10,
            dimension: 3,
            density: 1.0,
            eta: 1.0,
            epsilon: 1.0,
            amplitude_mode: AmplitudeMode::EqualSuperposition,
            coupling_mode: CouplingMode::Potential,
            rng_seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {}", self.dimension)));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::Domain(format!("density must be positive, got {}", self.density)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn box_side(&self) -> Result<f64> {
        box_side(self.n_particles, self.density, self.dimension)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { rng_seed: seed, ..self.clone() }
    }
}

/// Immutable spin system. `positions` is empty for systems assembled by hand
/// from a coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub dimension: usize,
    pub positions: Vec<[f64; 3]>,
    pub amplitudes: Vec<SpinAmplitude>,
    pub couplings: Couplings,
    pub eta: f64,
    pub epsilon: f64,
}

impl SpinSystem {
    /// Assembles a system from explicit couplings and amplitudes.
    pub fn from_parts(couplings: Couplings, amplitudes: Vec<SpinAmplitude>) -> Result<Self> {
        if couplings.len() != amplitudes.len() {
            return Err(Error::Domain(format!(
                "{} amplitudes for {} particles",
                amplitudes.len(),
                couplings.len()
            )));
        }
        if couplings.is_empty() {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        for (k, amp) in amplitudes.iter().enumerate() {
            if (amp.norm_sqr() - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("amplitudes of particle {k} are not normalised")));
            }
        }
        Ok(Self { dimension: 0, positions: Vec::new(), amplitudes, couplings, eta: 1.0, epsilon: 1.0 })
    }

    /// Equal superpositions on every particle.
    pub fn with_equal_superpositions(couplings: Couplings) -> Result<Self> {
        let n = couplings.len();
        Self::from_parts(couplings, vec![SpinAmplitude::equal_superposition(); n])
    }

    pub fn n_particles(&self) -> usize {
        self.amplitudes.len()
    }

    /// `(1/N) Σ |a_k b_k*|`, the value of Ξ at `t = 0`.
    pub fn initial_coherence(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.off_diagonal().norm()).sum::<f64>() / self.n_particles() as f64
    }

    /// Same system with every coupling multiplied by `factor`.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        Self { couplings: self.couplings.scaled(factor), eta: self.eta * factor, ..self.clone() }
    }
}

/// Side `l = (N/ρ)^(1/D)` of a box holding `N` particles at density `ρ`.
pub fn box_side(n_particles: usize, density: f64, dimension: usize) -> Result<f64> {
    if n_particles < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if !(density > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {density}")));
    }
    if !(1..=3).contains(&dimension) {
        return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dimension}")));
    }
    let volume = n_particles as f64 / density;
    Ok(match dimension {
        1 => volume,
        2 => volume.sqrt(),
        _ => volume.cbrt(),
    })
}

fn distance(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Uniform random positions in `[0, l)^D`. Unused coordinates are zero.
pub fn place_particles(config: &SystemConfig, rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 3]>> {
    config.validate()?;
    let side = config.box_side()?;
    let min_sep = MIN_SEPARATION_FRACTION * side;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(config.n_particles);
    for particle in 0..config.n_particles {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let mut p = [0.0; 3];
            for x in p.iter_mut().take(config.dimension) {
                *x = rng.random::<f64>() * side;
            }
            if positions.iter().all(|q| distance(&p, q) >= min_sep) {
                positions.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement { particle, attempts: MAX_PLACEMENT_ATTEMPTS });
        }
    }
    Ok(positions)
}

/// `g_ij = η / |r_i − r_j|^ε`.
pub fn build_couplings(positions: &[[f64; 3]], eta: f64, epsilon: f64) -> Result<Couplings> {
    let n = positions.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(&positions[i], &positions[j]) == 0.0 {
                return Err(Error::SingularCoupling { i, j });
            }
        }
    }
    Ok(Couplings::from_upper(n, |i, j| {
        let r = distance(&positions[i], &positions[j]);
        if epsilon == 1.0 {
            eta / r
        } else {
            eta / r.powf(epsilon)
        }
    }))
}

fn random_amplitude(rng: &mut ChaCha8Rng) -> SpinAmplitude {
    let weight: f64 = rng.random();
    let phase_a = rng.random::<f64>() * TAU;
    let phase_b = rng.random::<f64>() * TAU;
    SpinAmplitude {
        a: Complex64::from_polar(weight.sqrt(), phase_a),
        b: Complex64::from_polar((1.0 - weight).sqrt(), phase_b),
    }
}

/// Builds a system from its config. Draw order from the seeded stream:
/// positions, then amplitudes (random mode), then couplings (uniform mode).
pub fn build_system(config: &SystemConfig) -> Result<SpinSystem> {
    config.validate()?;
    let mut rng = rng_from_seed(config.rng_seed);
    let positions = place_particles(config, &mut rng)?;
    let amplitudes = match config.amplitude_mode {
        AmplitudeMode::EqualSuperposition => vec![SpinAmplitude::equal_superposition(); config.n_particles],
        AmplitudeMode::RandomComplex => (0..config.n_particles).map(|_| random_amplitude(&mut rng)).collect(),
    };
    let couplings = match config.coupling_mode {
        CouplingMode::Potential => build_couplings(&positions, config.eta, config.epsilon)?,
        CouplingMode::UniformRandom => Couplings::from_upper(config.n_particles, |_, _| rng.random::<f64>()),
    };
    Ok(SpinSystem {
        dimension: config.dimension,
        positions,
        amplitudes,
        couplings,
        eta: config.eta,
        epsilon: config.epsilon,
    })
}
