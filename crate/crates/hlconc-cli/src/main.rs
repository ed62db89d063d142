//! `hlconc`: benchmark CLI for the hidden-layer concatenated ELM solver.
//!
//! Subcommands:
//!
//! * `run`    -- solve one configuration, write `report.json` and
//!   `solution.dat` (gnuplot-ready solution/error field).
//! * `sweep`  -- run the configured `sweep_q1`/`sweep_m` list, write
//!   `sweep.csv` and `sweep.dat`.
//! * `tune`   -- differential-evolution search over the hidden magnitude
//!   vector, write `tune_history.csv`.
//! * `verify` -- manufactured-solution wiring and Jacobian consistency
//!   checks for one problem or the whole catalog.
//!
//! Config files use a flat `key = value` format; see `presets/` for every
//! published table configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hlconc::bench::{
    self, parse_config, report_json, run_sweep, run_tune, solution_plot_data, sweep_csv,
    sweep_plot_data, BenchmarkConfig, ProblemId,
};
use hlconc::netcore::BasisMode;

#[derive(Parser)]
#[command(name = "hlconc", version, about = "HLConcELM PDE benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Path to a flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the basis mode (`hlconc` or `conventional`).
    #[arg(long)]
    mode: Option<String>,
    /// Output directory for report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its report.
    Run(ConfigArgs),
    /// Run the configured resolution or width sweep.
    Sweep(ConfigArgs),
    /// Tune the hidden magnitude vector by differential evolution.
    Tune(ConfigArgs),
    /// Check manufactured data and Jacobian consistency.
    Verify {
        /// Problem to check; all catalog problems when omitted.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_config(args: &ConfigArgs) -> Result<BenchmarkConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = &args.mode {
        config.mode = match mode.as_str() {
            "hlconc" => BasisMode::HlConc,
            "conventional" => BasisMode::Conventional,
            other => bail!("unknown mode '{other}'"),
        };
    }
    Ok(config)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let (prob, outcome) = bench::execute(&config)?;
    let report = write_file(&args.out, "report.json", &report_json(&config, &outcome))?;
    let field = write_file(
        &args.out,
        "solution.dat",
        &solution_plot_data(&prob, &outcome, 101.min(config.q2))?,
    )?;
    let r = &outcome.report;
    println!(
        "{} [{}] q1={} seed={}: max_error {} rms {} residual {:.3e} in {:.2} s ({} iterations)",
        config.problem,
        config.mode,
        config.q1,
        config.seed,
        r.max_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
        r.rms_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
        r.residual_norm,
        r.wall_time,
        r.iterations,
    );
    println!("wrote {} and {}", report.display(), field.display());
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let rows = run_sweep(&config)?;
    let varied_m = !config.sweep_m.is_empty();
    let csv = write_file(&args.out, "sweep.csv", &sweep_csv(&rows))?;
    let dat = write_file(&args.out, "sweep.dat", &sweep_plot_data(&rows, varied_m))?;
    for row in &rows {
        println!(
            "q1={:<3} m={:<5} max_error {:.3e} rms {:.3e} ({:.2} s)",
            row.q1, row.m, row.max_error, row.rms_error, row.train_seconds
        );
    }
    println!("wrote {} and {}", csv.display(), dat.display());
    Ok(())
}

fn cmd_tune(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let (best, history_csv) = run_tune(&config)?;
    let path = write_file(&args.out, "tune_history.csv", &history_csv)?;
    println!(
        "best hidden magnitudes for {}: {:?}",
        config.problem, best.0
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_verify(problem: Option<&str>, seed: u64) -> Result<()> {
    let targets: Vec<ProblemId> = match problem {
        Some(name) => vec![ProblemId::parse(name)?],
        None => ProblemId::ALL.to_vec(),
    };
    let mut failed = false;
    for id in targets {
        let report = bench::verify_problem(id, seed)?;
        // The Burgers solution is quadrature-based; its derivative closures
        // carry the Gauss-Hermite truncation error.
        let wiring_tol = match id {
            ProblemId::BurgersSmall | ProblemId::BurgersFull => 1e-7,
            _ => 1e-10,
        };
        let ok = report.manufactured_residual <= wiring_tol && report.jacobian_fd_error <= 1e-6;
        failed |= !ok;
        println!(
            "{:<16} wiring residual {:.3e} (tol {wiring_tol:.0e})  jacobian fd {:.3e} (tol 1e-6)  {}",
            id.name(),
            report.manufactured_residual,
            report.jacobian_fd_error,
            if ok { "ok" } else { "FAILED" }
        );
    }
    if failed {
        bail!("verification failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Verify { problem, seed } => cmd_verify(problem.as_deref(), *seed),
    }
}
