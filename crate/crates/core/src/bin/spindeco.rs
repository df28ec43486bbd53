use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spin_decoherence::cli::{run, Command, RunConfig, RunOptions};
use spin_decoherence::Error;

#[derive(Parser, Debug)]
#[command(name = "spindeco", version, about = "Decoherence of fixed spins under pairwise sigma_z coupling")]
struct Args {
    #[command(subcommand)]
    command: Sub,

    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "SPINDECO_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    u: Option<usize>,
    #[arg(long, global = true)]
    tmax: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Any other config key, e.g. `--set n_list=10,20,50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone)]
enum Sub {
    /// Ξ(t), |z_l(t)| and S_tot(t) for one system.
    Simulate,
    /// Decoherence-time statistics over an ensemble of systems.
    Ensemble,
    /// One ensemble per (N, rho, D) cell.
    Sweep,
    /// Fit the decoherence-time scaling law, from a fresh sweep or `--input`.
    FitScaling {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Poincaré recurrence-time statistics.
    Recurrence,
    /// Compare closed-form dynamics with brute-force state-vector evolution.
    OracleCheck,
}

fn build_config(args: &Args) -> Result<RunConfig, Error> {
    let mut config = match &args.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let flags = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("n", args.n.map(|v| v.to_string())),
        ("rho", args.rho.map(|v| v.to_string())),
        ("d", args.d.map(|v| v.to_string())),
        ("u", args.u.map(|v| v.to_string())),
        ("tmax", args.tmax.map(|v| v.to_string())),
        ("dt", args.dt.map(|v| v.to_string())),
        ("out", args.out.as_ref().map(|v| v.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(0, key, &value)?;
        }
    }
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 0, message: format!("--set expects KEY=VALUE, got `{item}`") })?;
        config.set(0, key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, input) = match &args.command {
        Sub::Simulate => (Command::Simulate, None),
        Sub::Ensemble => (Command::Ensemble, None),
        Sub::Sweep => (Command::Sweep, None),
        Sub::FitScaling { input } => (Command::FitScaling, input.clone()),
        Sub::Recurrence => (Command::Recurrence, None),
        Sub::OracleCheck => (Command::OracleCheck, None),
    };
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("spindeco: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let options = RunOptions { threads: args.threads, input };
    match run(command, &config, &options) {
        Ok(report) => {
            println!("{}", report.summary.trim_end());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("spindeco {command}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
