//! Closed-system decoherence of `N` fixed spin-1/2 particles coupled through
//! pairwise `σ_z ⊗ σ_z` interactions.
//!
//! The crate evaluates single-particle reduced density matrices in closed form
//! ([`dynamics`]), checks them against brute-force state-vector evolution
//! ([`oracle`]), estimates decoherence times and their scaling laws over random
//! ensembles ([`estimation`]) and estimates Poincaré recurrence times
//! ([`recurrence`]). [`cli`] holds the configuration format, CSV output and the
//! subcommand runner behind the `spindeco` binary.
//!
//! Times are dimensionless (`gt` units); entropies are in nats.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod model;
pub mod oracle;
pub mod recurrence;
pub mod rng;

pub use dynamics::{
    coherence, coherences, eigenvalues, entropy_total, sample_trajectory, xi, xi_subset,
    y_complement, CoherenceSample, Trajectory, TrajectoryOptions,
};
pub use error::{Error, Result};
pub use estimation::{
    fit_decay, fit_decoherence_law, fit_mean_level, run_ensemble, saturation_size, time_average,
    DecayFit, EnsembleSpec, EnsembleStats, ExponentialLaw, FitWindow, LawConstants, ScalingFit,
};
pub use model::{
    box_side, build_couplings, build_system, place_particles, AmplitudeMode, Couplings,
    CouplingMode, SpinAmplitude, SpinSystem, SystemConfig,
};
pub use recurrence::{particle_frequency, recurrence_stats, recurrence_time, RecurrenceEstimate};

pub use num_complex::Complex64;
