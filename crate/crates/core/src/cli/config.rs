//! Line-oriented `key = value` run configuration.
//!
//! `#` starts a comment, lists are comma separated and unknown keys are
//! rejected. [`RunConfig::render`] writes every key, and parsing the rendered
//! text gives back the same config.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimation::{EnsembleSpec, FitWindow};
use crate::model::{AmplitudeMode, CouplingMode, SystemConfig};
use crate::oracle::DEFAULT_PARTICLE_CAP;

/// How `sweep` turns the grids into cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// N-list at `rho` plus rho-list at `n`, for every D.
    #[default]
    Cross,
    /// Full Cartesian product of the three lists.
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub amplitudes: AmplitudeMode,
    pub couplings: CouplingMode,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub t1: f64,
    pub t2: f64,
    pub u: usize,
    pub fit_window: FitWindow,
    pub out: PathBuf,
    pub n_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub d_list: Vec<usize>,
    pub sweep_mode: SweepMode,
    /// Recurrence samples per cell and oracle-check system count.
    pub samples: usize,
    pub oracle_cap: usize,
    pub z_columns: bool,
    pub entropy: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 10,
            d: 3,
            rho: 1.0,
            eta: 1.0,
            epsilon: 1.0,
            amplitudes: AmplitudeMode::EqualSuperposition,
            couplings: CouplingMode::Potential,
            seed: 0,
            dt: 0.05,
            t_max: 100.0,
            t1: 50.0,
            t2: 100.0,
            u: 100,
            fit_window: FitWindow::default(),
            out: PathBuf::from("out"),
            n_list: Vec::new(),
            rho_list: Vec::new(),
            d_list: Vec::new(),
            sweep_mode: SweepMode::Cross,
            samples: 100,
            oracle_cap: DEFAULT_PARTICLE_CAP,
            z_columns: true,
            entropy: true,
        }
    }
}

const KEYS: &[&str] = &[
    "n", "d", "rho", "eta", "epsilon", "amplitudes", "couplings", "seed", "dt", "tmax", "t1", "t2", "u",
    "fit_window", "out", "n_list", "rho_list", "d_list", "sweep_mode", "samples", "oracle_cap", "z_columns",
    "entropy",
];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse `{raw}` for `{key}`") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|item| parse_value(line, key, item.trim())).collect()
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse { line, message: format!("`{key}` expects true or false, got `{raw}`") }),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment; `line` is only used in errors.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_value(line, key, value)?,
            "d" => self.d = parse_value(line, key, value)?,
            "rho" => self.rho = parse_value(line, key, value)?,
            "eta" => self.eta = parse_value(line, key, value)?,
            "epsilon" => self.epsilon = parse_value(line, key, value)?,
            "amplitudes" => {
                self.amplitudes = match value {
                    "equal" => AmplitudeMode::EqualSuperposition,
                    "random" => AmplitudeMode::RandomComplex,
                    _ => return Err(Error::Parse { line, message: format!("amplitudes must be equal or random, got `{value}`") }),
                }
            }
            "couplings" => {
                self.couplings = match value {
                    "potential" => CouplingMode::Potential,
                    "uniform" => CouplingMode::UniformRandom,
                    _ => return Err(Error::Parse { line, message: format!("couplings must be potential or uniform, got `{value}`") }),
                }
            }
            "seed" => self.seed = parse_value(line, key, value)?,
            "dt" => self.dt = parse_value(line, key, value)?,
            "tmax" => self.t_max = parse_value(line, key, value)?,
            "t1" => self.t1 = parse_value(line, key, value)?,
            "t2" => self.t2 = parse_value(line, key, value)?,
            "u" => self.u = parse_value(line, key, value)?,
            "fit_window" => {
                self.fit_window = if let Some(rest) = value.strip_prefix("auto") {
                    let parts: Vec<&str> = rest.trim_start_matches(':').split(':').filter(|s| !s.is_empty()).collect();
                    match parts.as_slice() {
                        [] => FitWindow::default(),
                        [f, c] => FitWindow::Auto { factor: parse_value(line, key, f)?, cap: parse_value(line, key, c)? },
                        _ => return Err(Error::Parse { line, message: "fit_window auto takes `auto` or `auto:<factor>:<cap>`".into() }),
                    }
                } else if let Some(t) = value.strip_prefix("fixed:") {
                    FitWindow::UpTo(parse_value(line, key, t)?)
                } else {
                    return Err(Error::Parse { line, message: format!("fit_window must be auto[:f:cap] or fixed:<t>, got `{value}`") });
                }
            }
            "out" => self.out = PathBuf::from(value),
            "n_list" => self.n_list = parse_list(line, key, value)?,
            "rho_list" => self.rho_list = parse_list(line, key, value)?,
            "d_list" => self.d_list = parse_list(line, key, value)?,
            "sweep_mode" => {
                self.sweep_mode = match value {
                    "cross" => SweepMode::Cross,
                    "grid" => SweepMode::Grid,
                    _ => return Err(Error::Parse { line, message: format!("sweep_mode must be cross or grid, got `{value}`") }),
                }
            }
            "samples" => self.samples = parse_value(line, key, value)?,
            "oracle_cap" => self.oracle_cap = parse_value(line, key, value)?,
            "z_columns" => self.z_columns = parse_bool(line, key, value)?,
            "entropy" => self.entropy = parse_bool(line, key, value)?,
            _ => {
                return Err(Error::Parse { line, message: format!("unknown key `{key}` (known: {})", KEYS.join(", ")) })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(m.to_string()));
        if self.n < 1 {
            return fail("n >= 1");
        }
        if !(1..=3).contains(&self.d) || self.d_list.iter().any(|d| !(1..=3).contains(d)) {
            return fail("d in {1, 2, 3}");
        }
        if !(self.rho > 0.0) || self.rho_list.iter().any(|r| !(*r > 0.0)) {
            return fail("rho > 0");
        }
        if self.n_list.iter().any(|&n| n < 1) {
            return fail("n >= 1");
        }
        if !(self.eta > 0.0) {
            return fail("eta > 0");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon > 0");
        }
        if !(self.dt > 0.0) {
            return fail("dt > 0");
        }
        if !(self.t1 >= 0.0) {
            return fail("t1 >= 0");
        }
        if !(self.t1 < self.t2) {
            return fail("t1 < t2");
        }
        if !(self.t2 <= self.t_max) {
            return fail("t2 <= tmax");
        }
        if self.t_max / self.dt < 1.0 {
            return fail("tmax >= dt");
        }
        if self.u < 1 {
            return fail("u >= 1");
        }
        match self.fit_window {
            FitWindow::Auto { factor, cap } if !(factor > 0.0 && cap > 0.0) => return fail("fit window factor and cap > 0"),
            FitWindow::UpTo(t) if !(t > 0.0) => return fail("fixed fit window > 0"),
            _ => {}
        }
        if self.samples < 1 {
            return fail("samples >= 1");
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let amplitudes = match self.amplitudes {
            AmplitudeMode::EqualSuperposition => "equal",
            AmplitudeMode::RandomComplex => "random",
        };
        let couplings = match self.couplings {
            CouplingMode::Potential => "potential",
            CouplingMode::UniformRandom => "uniform",
        };
        let fit_window = match self.fit_window {
            FitWindow::Auto { factor, cap } => format!("auto:{factor}:{cap}"),
            FitWindow::UpTo(t) => format!("fixed:{t}"),
        };
        let sweep_mode = match self.sweep_mode {
            SweepMode::Cross => "cross",
            SweepMode::Grid => "grid",
        };
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "amplitudes = {amplitudes}");
        let _ = writeln!(s, "couplings = {couplings}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "tmax = {}", self.t_max);
        let _ = writeln!(s, "t1 = {}", self.t1);
        let _ = writeln!(s, "t2 = {}", self.t2);
        let _ = writeln!(s, "u = {}", self.u);
        let _ = writeln!(s, "fit_window = {fit_window}");
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "n_list = {}", join(&self.n_list));
        let _ = writeln!(s, "rho_list = {}", join(&self.rho_list));
        let _ = writeln!(s, "d_list = {}", join(&self.d_list));
        let _ = writeln!(s, "sweep_mode = {sweep_mode}");
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "oracle_cap = {}", self.oracle_cap);
        let _ = writeln!(s, "z_columns = {}", self.z_columns);
        let _ = writeln!(s, "entropy = {}", self.entropy);
        s
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            n_particles: self.n,
            dimension: self.d,
            density: self.rho,
            eta: self.eta,
            epsilon: self.epsilon,
            amplitude_mode: self.amplitudes,
            coupling_mode: self.couplings,
            rng_seed: self.seed,
        }
    }

    pub fn ensemble_spec(&self, n: usize, rho: f64, d: usize) -> EnsembleSpec {
        EnsembleSpec {
            system: SystemConfig { n_particles: n, density: rho, dimension: d, ..self.system() },
            dt: self.dt,
            t_max: self.t_max,
            t1: self.t1,
            t2: self.t2,
            fit_window: self.fit_window,
        }
    }

    /// Number of samples on `[0, tmax]` with step `dt`.
    pub fn n_samples(&self) -> usize {
        (self.t_max / self.dt).round() as usize + 1
    }

    fn lists_or_defaults(&self) -> (Vec<usize>, Vec<f64>, Vec<usize>) {
        let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let rhos = if self.rho_list.is_empty() { vec![self.rho] } else { self.rho_list.clone() };
        (or(&self.n_list, self.n), rhos, or(&self.d_list, self.d))
    }

    /// Sweep cells `(n, rho, d)` in output order, without duplicates.
    pub fn sweep_cells(&self) -> Vec<(usize, f64, usize)> {
        let (ns, rhos, ds) = self.lists_or_defaults();
        let mut cells = Vec::new();
        let mut push = |cell: (usize, f64, usize)| {
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        };
        for &d in &ds {
            match self.sweep_mode {
                SweepMode::Grid => {
                    for &n in &ns {
                        for &rho in &rhos {
                            push((n, rho, d));
                        }
                    }
                }
                SweepMode::Cross => {
                    for &n in &ns {
                        push((n, self.rho, d));
                    }
                    for &rho in &rhos {
                        push((self.n, rho, d));
                    }
                }
            }
        }
        cells
    }

    /// Cartesian cells for the recurrence summary.
    pub fn grid_cells(&self) -> Vec<(usize, f64, usize)> {
        let (ns, rhos, ds) = self.lists_or_defaults();
        let mut cells = Vec::new();
        for &d in &ds {
            for &rho in &rhos {
                for &n in &ns {
                    cells.push((n, rho, d));
                }
            }
        }
        cells
    }
}
