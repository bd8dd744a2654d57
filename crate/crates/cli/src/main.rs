//! `expl`: learn exemplar priors from a model database, consolidate and
//! reconstruct scans with them, and measure the results.
//!
//! Exit codes: 0 success, 1 other failures (bad configuration, write
//! errors), 2 unreadable input or bad usage, 3 no valid models, 4 library
//! missing, unreadable or without exemplars, 5 nothing in the scan to match,
//! 6 no comparable regions in an evaluation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::{PreferenceSetting, RunConfig};

#[derive(Parser)]
#[command(name = "expl", version, about = "Exemplar local-shape priors for scan consolidation and reconstruction")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the configuration file.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    radius_rel: Option<f64>,
    /// Surface samples per database model.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    moment_order: Option<u32>,
    #[arg(long, global = true)]
    damping: Option<f64>,
    /// "median" or a shared preference value.
    #[arg(long, global = true, value_parser = PreferenceSetting::parse, allow_hyphen_values = true)]
    preference: Option<PreferenceSetting>,
    #[arg(long, global = true)]
    k_candidates: Option<usize>,
    #[arg(long, global = true)]
    mse_tau: Option<f64>,
    /// MLS support radius as a fraction of R.
    #[arg(long, global = true)]
    mls_h: Option<f64>,
    #[arg(long, global = true)]
    mls_iters: Option<usize>,
    #[arg(long, global = true)]
    grid_res: Option<usize>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a prior library from a directory of meshes and pick exemplars.
    Learn {
        models: PathBuf,
        library: PathBuf,
        /// Write every affinity propagation sweep (iter,i,j,r,a) to this CSV.
        #[arg(long)]
        ap_trace: Option<PathBuf>,
    },
    /// Consolidate a scan with a library and mesh it.
    Reconstruct {
        scan: PathBuf,
        library: PathBuf,
        /// Writes PREFIX.ply, PREFIX_mesh.{ply,obj} and PREFIX_report.json.
        prefix: PathBuf,
    },
    /// Compare a reconstruction with the original.
    Eval {
        original: PathBuf,
        reconstructed: PathBuf,
        /// Writes PREFIX.json and PREFIX_hist.csv instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noise and sampling robustness sweep over virtual scans of a mesh.
    Sweep {
        ground_truth: PathBuf,
        library: PathBuf,
        /// Writes PREFIX.csv and PREFIX.json.
        prefix: PathBuf,
    },
    /// Print a library's header and exemplar statistics.
    Inspect { library: PathBuf },
    /// Print the effective configuration.
    DumpConfig,
}

fn effective_config(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.radius_rel {
        cfg.radius_rel = Some(v);
    }
    macro_rules! apply {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = o.$flag { cfg.$field = v; })*
        };
    }
    apply!(samples => samples_per_model, moment_order => moment_order, damping => damping,
        preference => preference, k_candidates => k_candidates, mse_tau => mse_tau, mls_h => mls_h,
        mls_iters => mls_iters, grid_res => grid_res, threads => threads, seed => seed);
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = effective_config(&cli.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Failure::config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Learn {
            models,
            library,
            ap_trace,
        } => commands::learn(&models, &library, ap_trace.as_deref(), &cfg),
        Command::Reconstruct { scan, library, prefix } => commands::reconstruct(&scan, &library, &prefix, &cfg),
        Command::Eval {
            original,
            reconstructed,
            out,
        } => commands::eval(&original, &reconstructed, out.as_deref(), &cfg),
        Command::Sweep {
            ground_truth,
            library,
            prefix,
        } => commands::sweep(&ground_truth, &library, &prefix, &cfg),
        Command::Inspect { library } => commands::inspect(&library),
        Command::DumpConfig => {
            print!("{}", cfg.dump());
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EXPL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
