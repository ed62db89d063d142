//! Benchmark execution: problem catalog, configuration, drivers, and
//! report emission for the CLI.

mod catalog;
mod config;

pub use catalog::{gauss_hermite, ProblemId, BURGERS_NU};
pub use config::{parse_config, BenchmarkConfig, DeConfig};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::detune::{self, DeOptions};
use crate::netcore::{
    draw_coefficients, ArchitectureVector, BasisMode, HiddenMagnitudeVector, NetworkCoefficients,
};
use crate::pdespec::{build_collocation, verify_manufactured, ProblemSpec, ResidualSystem};
use crate::solver::{
    block_time_march, solve_decomposed, solve_single, DecompositionSpec, SolveOutcome,
    SolverOptions,
};
use crate::{Error, Result};

/// Resolve the magnitude vector for an architecture: a single entry is
/// replicated across all hidden layers.
pub fn magnitudes_for(config: &BenchmarkConfig) -> Result<HiddenMagnitudeVector> {
    let hidden = config.arch.len() - 2;
    if config.r.len() == hidden {
        Ok(HiddenMagnitudeVector(config.r.clone()))
    } else if config.r.len() == 1 {
        Ok(HiddenMagnitudeVector::uniform(config.r[0], hidden))
    } else {
        Err(Error::Config(format!(
            "r has {} entries for {hidden} hidden layers",
            config.r.len()
        )))
    }
}

/// Draw the run's networks: one per subdomain, all from a single seeded
/// generator stream.
pub fn build_networks(config: &BenchmarkConfig) -> Result<Vec<NetworkCoefficients>> {
    let arch = ArchitectureVector::new(config.arch.clone())?;
    let magnitudes = magnitudes_for(config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    (0..config.n_subdomains())
        .map(|_| draw_coefficients(&arch, &magnitudes, &mut rng))
        .collect()
}

fn solver_options(config: &BenchmarkConfig) -> SolverOptions {
    let mut opts = SolverOptions {
        rcond: config.rcond,
        eval_q2: config.q2,
        restarts: config.restarts,
        restart_magnitude: config.restart_magnitude,
        restart_tolerance: config.restart_tolerance,
        ..SolverOptions::default()
    };
    opts.nlsq.max_iterations = config.max_gn_iterations;
    opts
}

/// Run one configuration end to end and return the problem plus the solve
/// outcome.
pub fn execute(config: &BenchmarkConfig) -> Result<(ProblemSpec, SolveOutcome)> {
    let prob = config.problem.build()?;
    let nets = build_networks(config)?;
    let opts = solver_options(config);
    let decomp = config.subdomains.as_ref().map(|bp| DecompositionSpec {
        breakpoints: bp.clone(),
        continuity_order: config.continuity,
    });

    let outcome = if config.blocks > 1 {
        block_time_march(
            &prob,
            config.blocks,
            &nets,
            decomp.as_ref(),
            config.q1,
            config.mode,
            &opts,
        )?
    } else if let Some(d) = &decomp {
        solve_decomposed(&prob, d, &nets, config.q1, config.mode, &opts)?
    } else {
        solve_single(&prob, &nets[0], config.q1, config.mode, &opts)?
    };
    Ok((prob, outcome))
}

/// One line of a sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub q1: usize,
    pub m: usize,
    pub max_error: f64,
    pub rms_error: f64,
    pub train_seconds: f64,
    pub mode: String,
    pub seed: u64,
}

/// Run the configured sweep (over `q1` or over one hidden-layer width).
pub fn run_sweep(config: &BenchmarkConfig) -> Result<Vec<SweepRow>> {
    let values: Vec<(usize, BenchmarkConfig)> = if !config.sweep_q1.is_empty() {
        config
            .sweep_q1
            .iter()
            .map(|&q1| {
                let mut c = config.clone();
                c.q1 = q1;
                (q1, c)
            })
            .collect()
    } else if !config.sweep_m.is_empty() {
        config
            .sweep_m
            .iter()
            .map(|&m| {
                let mut c = config.clone();
                c.arch[1 + config.m_layer] = m;
                (m, c)
            })
            .collect()
    } else {
        return Err(Error::Config("no sweep_q1 or sweep_m list configured".into()));
    };

    let mut rows = Vec::with_capacity(values.len());
    for (_, point) in values {
        let started = std::time::Instant::now();
        let (_, outcome) = execute(&point)?;
        rows.push(SweepRow {
            q1: point.q1,
            m: point.arch[1 + point.m_layer],
            max_error: outcome.report.max_error.unwrap_or(f64::NAN),
            rms_error: outcome.report.rms_error.unwrap_or(f64::NAN),
            train_seconds: started.elapsed().as_secs_f64(),
            mode: point.mode.to_string(),
            seed: point.seed,
        });
    }
    Ok(rows)
}

/// Stable CSV rendering (identical content for identical config + seed,
/// modulo the wall-time column).
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("q1,m,max_error,rms_error,train_seconds,mode,seed\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:e},{:e},{:.3},{},{}\n",
            row.q1, row.m, row.max_error, row.rms_error, row.train_seconds, row.mode, row.seed
        ));
    }
    out
}

/// Whitespace-delimited columns (`x max_error rms_error`) for plotting
/// error-vs-resolution curves.
pub fn sweep_plot_data(rows: &[SweepRow], varied_m: bool) -> String {
    let mut out = String::from("# x max_error rms_error\n");
    for row in rows {
        let x = if varied_m { row.m } else { row.q1 };
        out.push_str(&format!("{} {:e} {:e}\n", x, row.max_error, row.rms_error));
    }
    out
}

/// The JSON report of one run.
#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a BenchmarkConfig,
    report: &'a crate::solver::SolveReport,
    n_pieces: usize,
}

pub fn report_json(config: &BenchmarkConfig, outcome: &SolveOutcome) -> String {
    serde_json::to_string_pretty(&RunReport {
        config,
        report: &outcome.report,
        n_pieces: outcome.pieces.len(),
    })
    .expect("report serialization cannot fail")
}

/// Solution/error field on the evaluation grid of every trained piece, in
/// gnuplot-ready whitespace-delimited blocks: `coords.. u u_exact |err|`
/// with a blank line after each x-scanline.
pub fn solution_plot_data(prob: &ProblemSpec, outcome: &SolveOutcome, n: usize) -> Result<String> {
    let mut out = String::from("# x [t] u u_exact abs_error\n");
    for piece in &outcome.pieces {
        let grid = build_collocation(&piece.domain, n)?;
        let u = piece.output(&grid.points)?;
        let dim = piece.domain.dim();
        for p in 0..grid.n_points() {
            let mut x = [0.0f64; 2];
            for c in 0..dim {
                x[c] = grid.points[(p, c)];
            }
            let mut global = x;
            global[dim - 1] += piece.t_offset;
            let truth = prob
                .exact
                .as_ref()
                .map(|e| (e.value)(&global[..dim]))
                .unwrap_or(f64::NAN);
            for c in 0..dim {
                out.push_str(&format!("{:.12e} ", global[c]));
            }
            out.push_str(&format!(
                "{:.12e} {:.12e} {:.12e}\n",
                u[p],
                truth,
                (u[p] - truth).abs()
            ));
            if dim == 2 && (p + 1) % n == 0 {
                out.push('\n');
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Outcome of the `verify` checks for one problem.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub problem: String,
    /// Max residual of the exact solution pushed through the operator
    /// closures (manufactured-solution wiring check).
    pub manufactured_residual: f64,
    /// Max relative deviation between the analytic Jacobian and central
    /// finite differences on a small network.
    pub jacobian_fd_error: f64,
}

/// Max relative FD-vs-analytic Jacobian error for `prob` on a small net.
pub fn fd_jacobian_error(
    prob: &ProblemSpec,
    layers: &[usize],
    q1: usize,
    n_beta: usize,
    seed: u64,
) -> Result<f64> {
    use rand::Rng;
    let arch = ArchitectureVector::new(layers.to_vec())?;
    let magnitudes = HiddenMagnitudeVector::uniform(0.8, arch.n_hidden_layers());
    let net = crate::netcore::assign_random_coefficients(&arch, &magnitudes, seed)?;
    let colloc = build_collocation(&prob.domain, q1)?;
    let basis = net.basis(&colloc.points, &prob.required_keys(), BasisMode::HlConc)?;
    let sys = ResidualSystem::build(prob, &colloc, &basis)?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    // The FD step balances subtractive cancellation against curvature: the
    // residual magnitude is dominated by the manufactured source (KdV's
    // reaches ~4e4), which cancels in the central difference only up to
    // roundoff at that scale.
    let r0_scale = sys.residual(&DVector::zeros(arch.n_basis()))
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let base_h = 1e-6 * (1.0 + r0_scale.cbrt());
    let mut worst = 0.0f64;
    for _ in 0..n_beta {
        let beta = DVector::from_fn(arch.n_basis(), |_, _| rng.gen_range(-1.0..1.0));
        let jac = sys.jacobian(&beta);
        for k in 0..beta.len() {
            let h = base_h * (1.0 + beta[k].abs());
            let mut bp = beta.clone();
            bp[k] += h;
            let mut bm = beta.clone();
            bm[k] -= h;
            let fd = (sys.residual(&bp) - sys.residual(&bm)) / (2.0 * h);
            // Deviations are measured relative to the column scale: entries
            // of third-derivative columns reach O(1e3) and set the floor of
            // what the finite difference itself can resolve.
            let col_scale = jac
                .column(k)
                .iter()
                .fold(1.0f64, |m, v| m.max(v.abs()));
            for (row, fd_val) in fd.iter().enumerate() {
                let a = jac[(row, k)];
                worst = worst.max((a - fd_val).abs() / col_scale);
            }
        }
    }
    Ok(worst)
}

/// Run the wiring and Jacobian checks for one problem.
pub fn verify_problem(id: ProblemId, seed: u64) -> Result<VerifyReport> {
    let prob = id.build()?;
    let manufactured_residual = verify_manufactured(&prob, 13)?;
    let d = prob.dim();
    let jacobian_fd_error = fd_jacobian_error(&prob, &[d, 10, 8, 1], 6, 3, seed)?;
    Ok(VerifyReport {
        problem: id.name().to_string(),
        manufactured_residual,
        jacobian_fd_error,
    })
}

/// Tune the hidden magnitude vector for the configured problem using the
/// config's DE settings; returns the best vector and the history CSV.
pub fn run_tune(config: &BenchmarkConfig) -> Result<(HiddenMagnitudeVector, String)> {
    let prob = config.problem.build()?;
    let arch = ArchitectureVector::new(config.arch.clone())?;
    let n = arch.n_hidden_layers();
    let (lo, hi) = if config.de.lo.len() == n && config.de.hi.len() == n {
        (config.de.lo.clone(), config.de.hi.clone())
    } else if config.de.lo.is_empty() && config.de.hi.is_empty() {
        (vec![0.01; n], vec![3.5; n])
    } else {
        return Err(Error::Config(
            "de_lo/de_hi must both list one bound per hidden layer".into(),
        ));
    };
    let bounds: Vec<(f64, f64)> = lo.into_iter().zip(hi).collect();
    let mut opts = DeOptions::standard(bounds);
    if let Some(pop) = config.de.population {
        opts.population_size = pop;
    }
    opts.generations = config.de.generations;
    opts.mutation_factor = config.de.mutation_factor;
    opts.crossover_rate = config.de.crossover_rate;
    opts.seed = config.de.seed;
    opts.candidate_q1 = config.de.q1;
    opts.candidate_q2 = config.de.q2;
    if let Some(objective) = config.de.objective {
        opts.objective = objective;
    }
    let (best, history) = detune::tune_hidden_magnitudes(&prob, &arch, config.seed, &opts)?;
    Ok((best, history.to_csv()))
}
