//! Poincaré recurrence estimates for Ξ(t).
//!
//! Each particle gets a slow frequency `ω_i = 2 min |g_ij − g_ij'|` over
//! unordered pairs of distinct partners `j ≠ j'`; the recurrence estimate is
//! `T_P = 2π / min_{i≠i'} |ω_i − ω_i'|`.

use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{build_system, SpinSystem, SystemConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceEstimate {
    /// `T_P` in `gt` units; infinite when degenerate.
    pub period: f64,
    pub frequencies: Vec<f64>,
    /// Particles whose frequencies are closest.
    pub pair: Option<(usize, usize)>,
    pub degenerate: bool,
}

fn min_sorted_gap(values: &mut [f64]) -> Option<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    values.windows(2).enumerate().map(|(k, w)| (w[1] - w[0], k)).min_by(|a, b| a.0.total_cmp(&b.0))
}

/// `ω_i`; zero when two partners share a coupling.
pub fn particle_frequency(system: &SpinSystem, i: usize) -> Result<f64> {
    let n = system.n_particles();
    if n < 3 {
        return Err(Error::Domain(format!("frequencies need at least 3 particles, got {n}")));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let row = system.couplings.row(i);
    let mut partners: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| row[j]).collect();
    let (gap, _) = min_sorted_gap(&mut partners).expect("at least two partners");
    if partners.first() == partners.last() {
        return Err(Error::DegenerateFrequency(format!("all couplings of particle {i} are equal")));
    }
    Ok(2.0 * gap)
}

/// Never errors for `N ≥ 3`: ties in the couplings or frequencies give a
/// flagged infinite estimate.
pub fn recurrence_time(system: &SpinSystem) -> Result<RecurrenceEstimate> {
    let n = system.n_particles();
    if n < 3 {
        return Err(Error::Domain(format!("recurrence estimate needs at least 3 particles, got {n}")));
    }
    let mut frequencies = Vec::with_capacity(n);
    let mut degenerate = false;
    for i in 0..n {
        match particle_frequency(system, i) {
            Ok(w) => frequencies.push(w),
            Err(Error::DegenerateFrequency(_)) => {
                degenerate = true;
                frequencies.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    let (gap, pair) = closest_frequencies(&frequencies);
    if degenerate || gap == 0.0 {
        return Ok(RecurrenceEstimate { period: f64::INFINITY, frequencies, pair: Some(pair), degenerate: true });
    }
    Ok(RecurrenceEstimate { period: TAU / gap, frequencies, pair: Some(pair), degenerate: false })
}

/// Smallest `|ω_i − ω_i'|` and the (ordered) pair attaining it. Needs two or more frequencies.
pub fn closest_frequencies(frequencies: &[f64]) -> (f64, (usize, usize)) {
    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[a].total_cmp(&frequencies[b]));
    let (gap, k) = order
        .windows(2)
        .enumerate()
        .map(|(k, w)| (frequencies[w[1]] - frequencies[w[0]], k))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least two frequencies");
    let (a, b) = (order[k], order[k + 1]);
    (gap, (a.min(b), a.max(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceSummary {
    pub samples: usize,
    pub degenerate: usize,
    /// Statistics over the finite estimates.
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    /// Mean of `log10 T_P`.
    pub log10_mean: f64,
    pub periods: Vec<f64>,
}

/// `T_P` over `samples` random configurations; sample `u` uses
/// `derive_seed(master_seed, u)`.
pub fn recurrence_stats(config: &SystemConfig, samples: usize, master_seed: u64) -> Result<RecurrenceSummary> {
    if samples < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {samples}")));
    }
    let periods: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|u| {
            let system = build_system(&config.with_seed(derive_seed(master_seed, u as u64)))?;
            recurrence_time(&system).map(|e| e.period)
        })
        .collect::<Result<_>>()?;
    let mut finite: Vec<f64> = periods.iter().copied().filter(|p| p.is_finite()).collect();
    let degenerate = samples - finite.len();
    let (mean, std, median, log10_mean) = if finite.is_empty() {
        (f64::INFINITY, f64::NAN, f64::INFINITY, f64::INFINITY)
    } else {
        let m = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / m;
        let std = (finite.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / m).sqrt();
        let log10_mean = finite.iter().map(|p| p.log10()).sum::<f64>() / m;
        finite.sort_by(f64::total_cmp);
        let mid = finite.len() / 2;
        let median = if finite.len() % 2 == 0 { 0.5 * (finite[mid - 1] + finite[mid]) } else { finite[mid] };
        (mean, std, median, log10_mean)
    };
    Ok(RecurrenceSummary { samples, degenerate, mean, std, median, log10_mean, periods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Couplings, CouplingMode};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn from_rows(rows: Vec<Vec<f64>>) -> SpinSystem {
        SpinSystem::with_equal_superpositions(Couplings::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn frequency_of_collinear_triple_partner_set() {
        // Particle 0 couples with {1, 1/3, 1/2}.
        let c = 1.0 / 3.0;
        let sys = from_rows(vec![
            vec![0.0, 1.0, c, 0.5],
            vec![1.0, 0.0, 0.2, 0.7],
            vec![c, 0.2, 0.0, 0.9],
            vec![0.5, 0.7, 0.9, 0.0],
        ]);
        assert_relative_eq!(particle_frequency(&sys, 0).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn equal_partner_couplings() {
        let sys = from_rows(vec![
            vec![0.0, 0.4, 0.4, 0.9],
            vec![0.4, 0.0, 0.1, 0.2],
            vec![0.4, 0.1, 0.0, 0.3],
            vec![0.9, 0.2, 0.3, 0.0],
        ]);
        assert_eq!(particle_frequency(&sys, 0).unwrap(), 0.0);
        let all_equal = from_rows(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        assert!(matches!(particle_frequency(&all_equal, 1), Err(Error::DegenerateFrequency(_))));
        let est = recurrence_time(&all_equal).unwrap();
        assert!(est.degenerate && est.period.is_infinite());
    }

    #[test]
    fn period_from_frequency_list() {
        let (gap, pair) = closest_frequencies(&[0.2, 0.5, 0.9]);
        assert_relative_eq!(TAU / gap, 20.943_951_023_931_955, max_relative = 1e-12);
        assert_eq!(pair, (0, 1));
    }

    #[test]
    fn hand_built_three_particles() {
        // Pair couplings (01, 02, 12) = (0.1, 0.2, 0.45): ω = 2·(0.1, 0.35, 0.25).
        let sys = from_rows(vec![vec![0.0, 0.1, 0.2], vec![0.1, 0.0, 0.45], vec![0.2, 0.45, 0.0]]);
        let est = recurrence_time(&sys).unwrap();
        let w = [2.0 * 0.1f64, 2.0 * 0.35, 2.0 * 0.25];
        for (got, want) in est.frequencies.iter().zip(w) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
        assert_relative_eq!(est.period, TAU / 0.2, max_relative = 1e-12);
        assert_eq!(est.pair, Some((1, 2)));
    }

    #[test]
    fn too_few_particles() {
        let sys = from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(recurrence_time(&sys).is_err());
        assert!(particle_frequency(&sys, 0).is_err());
    }

    #[test]
    fn stats_deterministic_and_density_factor() {
        let cfg = SystemConfig { n_particles: 12, dimension: 1, ..Default::default() };
        let a = recurrence_stats(&cfg, 20, 5).unwrap();
        assert_eq!(a, recurrence_stats(&cfg, 20, 5).unwrap());
        assert_eq!(a.degenerate, 0);
        assert!(a.median > 0.0 && a.log10_mean.is_finite());
        // Denser box with the same seeds: positions shrink by λ^{1/D}, couplings grow by it.
        let dense = recurrence_stats(&SystemConfig { density: 8.0, ..cfg }, 20, 5).unwrap();
        for (p, q) in a.periods.iter().zip(&dense.periods) {
            assert_relative_eq!(*q, p / 8.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn uniform_mode_runs() {
        let cfg = SystemConfig { n_particles: 6, coupling_mode: CouplingMode::UniformRandom, ..Default::default() };
        let s = recurrence_stats(&cfg, 10, 1).unwrap();
        assert_eq!(s.samples, 10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scale_covariance_and_gap_bound(seed in any::<u64>(), n in 3usize..30, d in 1usize..=3, lambda in 0.1f64..10.0) {
            let sys = build_system(&SystemConfig { n_particles: n, dimension: d, rng_seed: seed, ..Default::default() }).unwrap();
            let est = recurrence_time(&sys).unwrap();
            prop_assume!(!est.degenerate);
            let scaled = recurrence_time(&sys.with_scaled_couplings(lambda)).unwrap();
            prop_assert!((scaled.period * lambda / est.period - 1.0).abs() < 1e-6);
            let (lo, hi) = sys.couplings.off_diagonal_range().unwrap();
            prop_assert!(est.period >= TAU / (2.0 * hi - 2.0 * lo) * (1.0 - 1e-12));
        }
    }
}
