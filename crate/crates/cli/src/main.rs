//! `dol` — fit, simulate, check, and apply lumber duration-of-load damage
//! models from the command line.

mod commands;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dol",
    about = "Damage models for lumber duration-of-load analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to failure-time data.
    Fit {
        /// Which model: us, canadian, or gamma.
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// ABC tolerance bandwidth (canadian).
        #[arg(long)]
        delta: Option<f64>,
        /// Burn-in iterations (canadian, gamma).
        #[arg(long)]
        burnin: Option<usize>,
        /// Thinning interval (canadian, gamma).
        #[arg(long)]
        thin: Option<usize>,
        /// Total MCMC iterations (canadian, gamma).
        #[arg(long)]
        iters: Option<usize>,
        /// Largest breakpoint count to consider (gamma).
        #[arg(long)]
        max_breakpoints: Option<usize>,
        /// Simulations per group for approximate log-likelihood flags
        /// (canadian; 0 skips them).
        #[arg(long)]
        ll_sims: Option<usize>,
    },
    /// Simulate failure records from a fitted model.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Specimens per group.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Goodness of fit: QQ data and the approximate log-likelihood.
    Gof {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Simulated failure times per group.
        #[arg(long, default_value_t = 100_000)]
        n_sim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// BIC / likelihood-ratio table across fitted models.
    Compare {
        /// Directories produced by `gof` (one per model).
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo phi-beta reliability curve under stochastic loads.
    Reliability {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        /// Posterior/chain samples for uncertainty bands (canadian, gamma).
        #[arg(long)]
        param_samples: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        phi_min: f64,
        #[arg(long, default_value_t = 1.5)]
        phi_max: f64,
        #[arg(long, default_value_t = 0.05)]
        phi_step: f64,
        #[arg(long, default_value_t = 100_000)]
        nr: usize,
        /// Load-model config file (defaults are built in).
        #[arg(long)]
        load_config: Option<PathBuf>,
        /// Cap on band parameter samples.
        #[arg(long, default_value_t = 200)]
        band_samples: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate a synthetic dataset following the manifest design.
    Synth {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            model,
            data,
            manifest,
            out,
            seed,
            delta,
            burnin,
            thin,
            iters,
            max_breakpoints,
            ll_sims,
        } => commands::fit(commands::FitArgs {
            model,
            data,
            manifest,
            out,
            seed,
            delta,
            burnin,
            thin,
            iters,
            max_breakpoints,
            ll_sims,
        }),
        Command::Simulate { model, params, manifest, n, out, seed } => {
            commands::simulate(&model, &params, &manifest, n, &out, seed)
        }
        Command::Gof { model, params, data, manifest, out, n_sim, seed } => {
            commands::gof(&model, &params, &data, &manifest, &out, n_sim, seed)
        }
        Command::Compare { results, out } => commands::compare(&results, &out),
        Command::Reliability {
            model,
            params,
            param_samples,
            phi_min,
            phi_max,
            phi_step,
            nr,
            load_config,
            band_samples,
            out,
            seed,
        } => commands::reliability(commands::ReliabilityArgs {
            model,
            params,
            param_samples,
            phi_min,
            phi_max,
            phi_step,
            nr,
            load_config,
            band_samples,
            out,
            seed,
        }),
        Command::Synth { model, params, manifest, out, seed } => {
            commands::synth(&model, &params, &manifest, &out, seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, code) = match &err {
                dol_core::CoreError::Config(_) => ("config", 2),
                dol_core::CoreError::Data(_) => ("data", 3),
                dol_core::CoreError::Domain(_)
                | dol_core::CoreError::Bracket(_)
                | dol_core::CoreError::Convergence(_)
                | dol_core::CoreError::Numeric(_)
                | dol_core::CoreError::Fit { .. } => ("numeric", 4),
                dol_core::CoreError::Io(_) => ("io", 5),
            };
            eprintln!("error[{category}]: {err}");
            ExitCode::from(code)
        }
    }
}
