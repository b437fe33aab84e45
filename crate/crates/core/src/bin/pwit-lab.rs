use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pwit_lab::experiments::{
    run_spectrum_experiment, run_speed_experiment, run_trap_experiment, run_validation_suite,
    ExperimentConfig, ExperimentKind,
};
use pwit_lab::Error;

/// Random-conductance simulation lab: spectra of mean-field kernels and
/// random walks on Poisson weighted infinite trees.
#[derive(Parser)]
#[command(name = "pwit-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue distributions of symmetrized mean-field kernels
    Spectrum(RunArgs),
    /// Walk speed, hitting times, and regeneration structure on the tree
    Speed(RunArgs),
    /// Trap entry/exit statistics along tree walks
    Traps(RunArgs),
    /// Cross-module invariant checks; exits nonzero on any failure
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for all random streams
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lévy measure, e.g. "stable:c=1,alpha=0.5" or "tempered:c=1,alpha=0.5,p=1"
    #[arg(long)]
    levy: Option<String>,
    /// Matrix sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Walk horizon in steps
    #[arg(long)]
    horizon: Option<u64>,
    /// Number of independent replicas
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, pwit_lab::Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_json_file(path)?;
            if cfg.experiment != kind {
                return Err(Error::Config(format!(
                    "config declares experiment \"{}\" but the \"{}\" subcommand was invoked",
                    cfg.experiment.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(levy) = &args.levy {
        cfg.levy = Some(levy.clone());
    }
    if let Some(n) = &args.n {
        cfg.n_list = Some(n.clone());
    }
    if let Some(h) = args.horizon {
        cfg.horizon = Some(h);
    }
    if let Some(r) = args.replicas {
        cfg.replicas = Some(r);
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<ExitCode, pwit_lab::Error> {
    let cfg = build_config(kind, args)?;
    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out-{}", kind.name())));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    pool.install(|| -> Result<ExitCode, pwit_lab::Error> {
        match kind {
            ExperimentKind::Spectrum => {
                let o = run_spectrum_experiment(&cfg, &out_dir)?;
                println!(
                    "spectrum: n = {:?}, eigenvalues in [{:.4}, {:.4}], outputs in {}",
                    o.n_list,
                    o.min_eigenvalue,
                    o.max_eigenvalue,
                    out_dir.display()
                );
                for (a, b, d) in &o.ks_sequence {
                    println!("  KS(n={a}, n={b}) = {d:.5}");
                }
                Ok(ExitCode::SUCCESS)
            }
            ExperimentKind::Speed => {
                let o = run_speed_experiment(&cfg, &out_dir)?;
                println!(
                    "speed: {} replicas over horizon {}, mean point estimate {:.5} ± {:.5}, outputs in {}",
                    o.replicates.len(),
                    o.horizon,
                    o.mean_point,
                    o.stderr_point,
                    out_dir.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            ExperimentKind::Traps => {
                let o = run_trap_experiment(&cfg, &out_dir)?;
                println!(
                    "traps: {} events ({:.1}% censored), threshold {:.4}, outputs in {}",
                    o.n_events,
                    100.0 * o.censored_fraction,
                    o.threshold,
                    out_dir.display()
                );
                if let Some(s) = o.tail_slope {
                    println!("  survival tail slope {s:.3}");
                }
                Ok(ExitCode::SUCCESS)
            }
            ExperimentKind::Validate => {
                let report = run_validation_suite(&cfg, Some(&out_dir))?;
                for c in &report.checks {
                    println!(
                        "{:<32} {:>12.4e} <= {:>8.1e}  {}",
                        c.name,
                        c.value,
                        c.threshold,
                        if c.pass { "ok" } else { "FAIL" }
                    );
                }
                if report.all_passed() {
                    println!("all checks passed; report in {}", out_dir.display());
                    Ok(ExitCode::SUCCESS)
                } else {
                    eprintln!("validation failed; report in {}", out_dir.display());
                    Ok(ExitCode::from(1))
                }
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Speed(a) => (ExperimentKind::Speed, a),
        Command::Traps(a) => (ExperimentKind::Traps, a),
        Command::Validate(a) => (ExperimentKind::Validate, a),
    };
    match run(kind, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::Resource(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
