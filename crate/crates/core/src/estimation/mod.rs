//! Decay fits, time averages, seeded ensembles and the cross-cell scaling laws.

pub mod ensemble;
pub mod fit;
pub mod lsq;
pub mod scaling;

pub use ensemble::{run_ensemble, Cell, EnsembleSpec, EnsembleStats, RunRecord};
pub use fit::{decay_model, fit_decay, initial_guess, time_average, DecayFit, FitWindow};
pub use scaling::{fit_decoherence_law, fit_mean_level, saturation_size, ExponentialLaw, LawConstants, ScalingFit};
