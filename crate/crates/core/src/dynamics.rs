//! Closed-form single-particle coherences and the quantities built on them.
//!
//! For a product initial state the off-diagonal element of particle `l` is
//!
//! ```text
//! z_l(t) = a_l b_l* Π_{k≠l} (|a_k|² e^{−2i g_lk t} + |b_k|² e^{+2i g_lk t})
//! ```
//!
//! while the diagonal stays at `(|a_l|², |b_l|²)`. Everything here is a pure
//! function of `(system, t)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{SpinAmplitude, SpinSystem};

/// Round-off slack allowed on the eigenvalue radicand before it is an error.
pub const RADICAND_SLACK: f64 = 1e-12;
/// Default cap on `n_samples × N` for trajectories carrying per-particle data.
pub const DEFAULT_MAX_CELLS: usize = 1 << 28;

#[inline]
fn factor(weights: (f64, f64), sin: f64, cos: f64) -> Complex64 {
    // |a|² e^{-iθ} + |b|² e^{+iθ}
    let (wa, wb) = weights;
    Complex64::new((wa + wb) * cos, (wb - wa) * sin)
}

fn weights(amp: &SpinAmplitude) -> (f64, f64) {
    (amp.a.norm_sqr(), amp.b.norm_sqr())
}

/// `z_l(t)`; `l` is zero-based.
pub fn coherence(system: &SpinSystem, l: usize, t: f64) -> Result<Complex64> {
    let n = system.n_particles();
    if l >= n {
        return Err(Error::IndexOutOfRange { index: l, n });
    }
    let row = system.couplings.row(l);
    let z = system
        .amplitudes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != l)
        .fold(system.amplitudes[l].off_diagonal(), |acc, (k, amp)| {
            let (s, c) = (2.0 * row[k] * t).sin_cos();
            acc * factor(weights(amp), s, c)
        });
    Ok(z)
}

/// All `z_l(t)` at once; one `sin_cos` per unordered pair.
pub fn coherences(system: &SpinSystem, t: f64) -> Vec<Complex64> {
    let n = system.n_particles();
    let w: Vec<(f64, f64)> = system.amplitudes.iter().map(weights).collect();
    let mut z: Vec<Complex64> = system.amplitudes.iter().map(SpinAmplitude::off_diagonal).collect();
    for i in 0..n {
        let row = system.couplings.row(i);
        for j in (i + 1)..n {
            let (s, c) = (2.0 * row[j] * t).sin_cos();
            z[i] *= factor(w[j], s, c);
            z[j] *= factor(w[i], s, c);
        }
    }
    z
}

/// Ξ(t) = (1/N) Σ_l |z_l(t)|.
pub fn xi(system: &SpinSystem, t: f64) -> f64 {
    let z = coherences(system, t);
    z.iter().map(|v| v.norm()).sum::<f64>() / z.len() as f64
}

/// Ξ_S(t) over the zero-based particle indices in `subset`.
pub fn xi_subset(system: &SpinSystem, subset: &[usize], t: f64) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = system.n_particles();
    if let Some(&bad) = subset.iter().find(|&&l| l >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    let z = coherences(system, t);
    Ok(subset.iter().map(|&l| z[l].norm()).sum::<f64>() / subset.len() as f64)
}

/// Y(t) = (1/N) Σ |a_k b_k*| − Ξ(t).
pub fn y_complement(system: &SpinSystem, t: f64) -> f64 {
    (system.initial_coherence() - xi(system, t)).max(0.0)
}

/// Eigenvalues `(λ₊, λ₋)` of the single-particle reduced density matrix with
/// diagonal `(|a|², |b|²)` and off-diagonal `z`.
pub fn eigenvalues(a: Complex64, b: Complex64, z: Complex64) -> Result<(f64, f64)> {
    let mut radicand = 1.0 - 4.0 * (a.norm_sqr() * b.norm_sqr() - z.norm_sqr());
    if radicand < 0.0 {
        if radicand < -RADICAND_SLACK {
            return Err(Error::Radicand(radicand));
        }
        radicand = 0.0;
    } else if radicand > 1.0 {
        if radicand > 1.0 + RADICAND_SLACK {
            return Err(Error::Radicand(radicand));
        }
        radicand = 1.0;
    }
    let half_root = 0.5 * radicand.sqrt();
    Ok((0.5 + half_root, 0.5 - half_root))
}

/// `−Σ λ ln λ` with `0 ln 0 = 0`.
pub fn binary_entropy(lambdas: (f64, f64)) -> f64 {
    [lambdas.0, lambdas.1].iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum()
}

/// Snapshot of one particle's reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceSample {
    pub particle: usize,
    pub z: Complex64,
    pub eigenvalues: (f64, f64),
    /// Von Neumann entropy in nats.
    pub entropy: f64,
}

impl CoherenceSample {
    pub fn at(system: &SpinSystem, l: usize, t: f64) -> Result<Self> {
        let z = coherence(system, l, t)?;
        let amp = system.amplitudes[l];
        let eigenvalues = eigenvalues(amp.a, amp.b, z)?;
        Ok(Self { particle: l, z, eigenvalues, entropy: binary_entropy(eigenvalues) })
    }
}

fn entropy_from_coherences(system: &SpinSystem, z: &[Complex64]) -> Result<f64> {
    system
        .amplitudes
        .iter()
        .zip(z)
        .map(|(amp, &zl)| eigenvalues(amp.a, amp.b, zl).map(binary_entropy))
        .sum()
}

/// Per-particle entropies `S(ρ_l)` at time `t`, in nats.
pub fn entropies(system: &SpinSystem, t: f64) -> Result<Vec<f64>> {
    let z = coherences(system, t);
    system
        .amplitudes
        .iter()
        .zip(&z)
        .map(|(amp, &zl)| eigenvalues(amp.a, amp.b, zl).map(binary_entropy))
        .collect()
}

/// S_tot(t) = Σ_l S(ρ_l) in nats.
pub fn entropy_total(system: &SpinSystem, t: f64) -> Result<f64> {
    entropy_from_coherences(system, &coherences(system, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub per_particle: bool,
    pub entropy: bool,
    pub max_cells: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { per_particle: false, entropy: false, max_cells: DEFAULT_MAX_CELLS }
    }
}

impl TrajectoryOptions {
    pub fn full() -> Self {
        Self { per_particle: true, entropy: true, ..Self::default() }
    }
}

/// Ξ(t) sampled on `t_k = k Δt`, with optional `|z_l|` and S_tot channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub xi: Vec<f64>,
    /// `abs_coherence[l][k] = |z_l(t_k)|`.
    pub abs_coherence: Option<Vec<Vec<f64>>>,
    pub entropy_total: Option<Vec<f64>>,
}

impl Trajectory {
    /// Ξ-only trajectory from raw samples on a uniform grid starting at zero.
    pub fn from_samples(dt: f64, xi: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if xi.len() < 2 {
            return Err(Error::Domain("a trajectory needs at least two samples".into()));
        }
        Ok(Self { dt, xi, abs_coherence: None, entropy_total: None })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }
}

/// Samples `n_samples` points starting at `t = 0`. Time points are evaluated
/// in parallel; each one is computed from scratch.
pub fn sample_trajectory(
    system: &SpinSystem,
    dt: f64,
    n_samples: usize,
    options: TrajectoryOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if n_samples < 2 {
        return Err(Error::Domain("n_samples must be at least 2".into()));
    }
    let n = system.n_particles();
    let channels = 1 + usize::from(options.entropy) + if options.per_particle { n } else { 0 };
    let cells = n_samples.saturating_mul(channels);
    if cells > options.max_cells {
        return Err(Error::TrajectoryTooLarge { cells, cap: options.max_cells });
    }

    struct Row {
        xi: f64,
        abs_z: Option<Vec<f64>>,
        s_tot: Option<f64>,
    }

    let rows: Vec<Row> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<Row> {
            let z = coherences(system, k as f64 * dt);
            let abs_z: Vec<f64> = z.iter().map(|v| v.norm()).collect();
            let xi = abs_z.iter().sum::<f64>() / n as f64;
            let s_tot = if options.entropy { Some(entropy_from_coherences(system, &z)?) } else { None };
            Ok(Row { xi, abs_z: options.per_particle.then_some(abs_z), s_tot })
        })
        .collect::<Result<_>>()?;

    let xi = rows.iter().map(|r| r.xi).collect();
    let entropy_total = options.entropy.then(|| rows.iter().map(|r| r.s_tot.unwrap_or(0.0)).collect());
    let abs_coherence = options.per_particle.then(|| {
        (0..n)
            .map(|l| rows.iter().map(|r| r.abs_z.as_ref().map_or(0.0, |v| v[l])).collect())
            .collect()
    });
    Ok(Trajectory { dt, xi, abs_coherence, entropy_total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, AmplitudeMode, Couplings, CouplingMode, SystemConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, LN_2, PI};

    fn pair(g: f64) -> SpinSystem {
        SpinSystem::with_equal_superpositions(Couplings::from_upper(2, |_, _| g)).unwrap()
    }

    fn random_system(n: usize, seed: u64, random_amps: bool) -> SpinSystem {
        build_system(&SystemConfig {
            n_particles: n,
            amplitude_mode: if random_amps { AmplitudeMode::RandomComplex } else { AmplitudeMode::EqualSuperposition },
            rng_seed: seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn coherence_at_zero_is_initial_off_diagonal() {
        let sys = random_system(9, 4, true);
        for l in 0..9 {
            let z = coherence(&sys, l, 0.0).unwrap();
            assert!((z - sys.amplitudes[l].off_diagonal()).norm() < 1e-15);
        }
        let eq = random_system(5, 4, false);
        assert_relative_eq!(coherence(&eq, 3, 0.0).unwrap().norm(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn two_particle_cosine() {
        let g = 0.7;
        let sys = pair(g);
        for &t in &[0.0, 0.3, 1.1, 5.0, 17.25] {
            let expected = 0.5 * (2.0 * g * t).cos().abs();
            assert_relative_eq!(coherence(&sys, 0, t).unwrap().norm(), expected, epsilon = 1e-15);
            assert_relative_eq!(xi_subset(&sys, &[1], t).unwrap(), expected, epsilon = 1e-15);
        }
        let zero = PI / (4.0 * g);
        assert!(coherence(&sys, 0, zero).unwrap().norm() < 1e-15);
    }

    #[test]
    fn index_and_subset_errors() {
        let sys = pair(1.0);
        assert!(matches!(coherence(&sys, 2, 0.0), Err(Error::IndexOutOfRange { index: 2, n: 2 })));
        assert!(matches!(xi_subset(&sys, &[], 0.0), Err(Error::EmptySubset)));
        assert!(matches!(xi_subset(&sys, &[0, 5], 0.0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn xi_edge_cases() {
        assert_relative_eq!(xi(&random_system(13, 1, false), 0.0), 0.5, max_relative = 1e-14);
        let single = random_system(1, 6, true);
        let c = single.amplitudes[0].off_diagonal().norm();
        for &t in &[0.0, 1.0, 1e3] {
            assert_eq!(xi(&single, t), c);
        }
    }

    #[test]
    fn full_subset_equals_xi() {
        let sys = random_system(8, 12, true);
        let all: Vec<usize> = (0..8).collect();
        for &t in &[0.1, 2.0, 33.0] {
            assert_relative_eq!(xi_subset(&sys, &all, t).unwrap(), xi(&sys, t), max_relative = 1e-14);
            let (left, right) = all.split_at(3);
            for s in [left, right] {
                let v = xi_subset(&sys, s, t).unwrap();
                assert!((0.0..=0.5).contains(&v));
            }
        }
    }

    #[test]
    fn complement_values() {
        let sys = random_system(10, 2, false);
        assert_eq!(y_complement(&sys, 0.0), 0.0);
        for &t in &[0.5, 3.0, 70.0] {
            assert_relative_eq!(y_complement(&sys, t) + xi(&sys, t), 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn eigenvalue_extremes() {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let (p, m) = eigenvalues(h, h, Complex64::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-15);
        assert_relative_eq!(m, 0.0, epsilon = 1e-15);
        let (p, m) = eigenvalues(h, h, Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(p, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m, 0.5, epsilon = 1e-15);
        assert_eq!(binary_entropy((1.0, 0.0)), 0.0);
        assert_relative_eq!(binary_entropy((0.5, 0.5)), LN_2, max_relative = 1e-15);
    }

    #[test]
    fn eigenvalue_radicand_guard() {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        // |z| slightly above |ab|: clamped within slack, rejected beyond it.
        assert!(eigenvalues(h, h, Complex64::new(0.5 + 1e-14, 0.0)).is_ok());
        assert!(matches!(eigenvalues(h, h, Complex64::new(0.6, 0.0)), Err(Error::Radicand(_))));
    }

    /// Quadratic formula on the explicit 2×2 Hermitian matrix [[p, z], [z*, q]].
    fn direct_2x2(p: f64, q: f64, z: Complex64) -> (f64, f64) {
        let tr = p + q;
        let det = p * q - z.norm_sqr();
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    #[test]
    fn eigenvalues_match_direct_diagonalization() {
        for seed in 0..40 {
            let sys = random_system(7, seed, true);
            let t = 0.37 * seed as f64;
            for l in 0..7 {
                let amp = sys.amplitudes[l];
                let z = coherence(&sys, l, t).unwrap();
                let (p, m) = eigenvalues(amp.a, amp.b, z).unwrap();
                let (dp, dm) = direct_2x2(amp.a.norm_sqr(), amp.b.norm_sqr(), z);
                assert!((p - dp).abs() < 1e-12 && (m - dm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_total_extremes() {
        let sys = random_system(6, 3, true);
        assert!(entropy_total(&sys, 0.0).unwrap().abs() < 1e-12);
        // Two equal-superposition particles at the first cosine zero are fully mixed.
        let p = pair(1.0);
        assert_relative_eq!(entropy_total(&p, FRAC_PI_4).unwrap(), 2.0 * LN_2, max_relative = 1e-12);
    }

    #[test]
    fn trajectory_grid_and_channels() {
        let sys = random_system(5, 8, false);
        let traj = sample_trajectory(&sys, 0.05, 2001, TrajectoryOptions::full()).unwrap();
        assert_relative_eq!(traj.t_end(), 100.0, max_relative = 1e-14);
        assert_eq!(traj.xi[0], xi(&sys, 0.0));
        let z = traj.abs_coherence.as_ref().unwrap();
        let s = traj.entropy_total.as_ref().unwrap();
        for k in [0, 1, 17, 2000] {
            let t = traj.time(k);
            for l in 0..5 {
                assert_eq!(z[l][k], coherence(&sys, l, t).unwrap().norm());
            }
            assert_relative_eq!(s[k], entropy_total(&sys, t).unwrap(), max_relative = 1e-14, epsilon = 1e-15);
        }
        let plain = sample_trajectory(&sys, 0.05, 2001, TrajectoryOptions::default()).unwrap();
        assert_eq!(plain.xi, traj.xi);
        assert!(plain.abs_coherence.is_none() && plain.entropy_total.is_none());
    }

    #[test]
    fn trajectory_guards() {
        let sys = random_system(5, 8, false);
        assert!(sample_trajectory(&sys, 0.0, 10, TrajectoryOptions::default()).is_err());
        assert!(sample_trajectory(&sys, 0.1, 1, TrajectoryOptions::default()).is_err());
        let tight = TrajectoryOptions { per_particle: true, entropy: false, max_cells: 100 };
        assert!(matches!(sample_trajectory(&sys, 0.1, 50, tight), Err(Error::TrajectoryTooLarge { .. })));
    }

    #[test]
    fn rational_couplings_are_periodic() {
        // g = (1, 2, 3) · g0: every factor cos(2 g t) repeats at T = π / g0.
        let g0 = 0.3;
        let rows = vec![vec![0.0, g0, 2.0 * g0], vec![g0, 0.0, 3.0 * g0], vec![2.0 * g0, 3.0 * g0, 0.0]];
        let sys = SpinSystem::with_equal_superpositions(Couplings::from_rows(&rows).unwrap()).unwrap();
        let period = PI / g0;
        assert_relative_eq!(xi(&sys, period), xi(&sys, 0.0), epsilon = 1e-12);
        assert!(xi(&sys, 0.25 * period) < 0.1);
        for &t in &[0.4, 1.3, 2.9] {
            assert_relative_eq!(xi(&sys, t + period), xi(&sys, t), epsilon = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coherence_bounded_by_initial(seed in any::<u64>(), n in 1usize..15, t in 0.0f64..200.0, random_amps in any::<bool>()) {
            let sys = random_system(n, seed, random_amps);
            let z = coherences(&sys, t);
            for (l, zl) in z.iter().enumerate() {
                prop_assert!(zl.norm() <= sys.amplitudes[l].off_diagonal().norm() * (1.0 + 1e-12));
                prop_assert!((zl - coherence(&sys, l, t).unwrap()).norm() < 1e-14);
            }
            prop_assert!(xi(&sys, t) <= xi(&sys, 0.0) * (1.0 + 1e-12));
            prop_assert!(y_complement(&sys, t) >= 0.0);
        }

        #[test]
        fn factor_modulus_at_most_one(wa in 0.0f64..=1.0, g in 0.0f64..10.0, t in 0.0f64..100.0) {
            let (s, c) = (2.0 * g * t).sin_cos();
            prop_assert!(factor((wa, 1.0 - wa), s, c).norm() <= 1.0 + 1e-15);
        }

        #[test]
        fn equal_superposition_cosine_product(seed in any::<u64>(), n in 1usize..20, t in 0.0f64..100.0, uniform in any::<bool>()) {
            let sys = build_system(&SystemConfig {
                n_particles: n,
                coupling_mode: if uniform { CouplingMode::UniformRandom } else { CouplingMode::Potential },
                rng_seed: seed,
                ..Default::default()
            }).unwrap();
            let mut closed = 0.0;
            for i in 0..n {
                let mut prod = 1.0;
                for j in 0..n {
                    if j != i {
                        prod *= (2.0 * sys.couplings.get(i, j) * t).cos().abs();
                    }
                }
                closed += prod;
            }
            closed /= 2.0 * n as f64;
            prop_assert!((xi(&sys, t) - closed).abs() < 1e-12);
        }

        #[test]
        fn entropy_mirrors_coherence_extremes(seed in any::<u64>(), t in 0.0f64..50.0) {
            let sys = random_system(6, seed, false);
            for l in 0..6 {
                let s = CoherenceSample::at(&sys, l, t).unwrap();
                let (p, m) = s.eigenvalues;
                prop_assert!((p + m - 1.0).abs() < 1e-15);
                prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&m));
                prop_assert!(s.entropy >= 0.0 && s.entropy <= LN_2 + 1e-15);
                prop_assert!((p * m - (0.25 - s.z.norm_sqr())).abs() < 1e-15);
                // λ₊ = ½ + |z| loses half its digits once |z| is tiny.
                prop_assert!((p - (0.5 + s.z.norm())).abs() < 1e-7);
            }
        }
    }
}
