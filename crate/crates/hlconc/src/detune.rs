//! Differential-evolution search over the hidden magnitude vector `R`.
//!
//! The magnitudes are the method's only real hyperparameters, and their
//! useful range spans orders of magnitude.  [`minimize`] implements the
//! classic DE/rand/1/bin scheme on a box: for each target vector a mutant
//! `a + F (b - c)` is formed from three distinct population members,
//! crossed over binomially, clipped to the bounds, and kept only if it
//! scores at least as well (greedy selection).  [`tune_hidden_magnitudes`]
//! wraps a per-candidate PDE solve (at reduced, configurable fidelity) as
//! the objective.
//!
//! A candidate whose solve fails scores `+inf` and is simply never
//! selected; the search itself does not abort.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::netcore::{
    assign_random_coefficients, ArchitectureVector, BasisMode, HiddenMagnitudeVector,
};
use crate::pdespec::ProblemSpec;
use crate::solver::{evaluate_pieces, solve_single, SolverOptions};
use crate::{Error, Result};

/// What a candidate `R` is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximum error against the exact solution on the candidate grid.
    ExactError,
    /// RMS of the PDE residual on a held-out grid offset by half a cell.
    ValidationResidual,
}

/// Options for the DE search.
#[derive(Debug, Clone)]
pub struct DeOptions {
    pub population_size: usize,
    pub generations: usize,
    /// Differential weight `F` in `(0, 2)`.
    pub mutation_factor: f64,
    /// Crossover rate `CR` in `(0, 1]`.
    pub crossover_rate: f64,
    /// Per-component search box for `R`.
    pub bounds: Vec<(f64, f64)>,
    pub objective: Objective,
    pub seed: u64,
    /// Collocation resolution of each candidate solve.
    pub candidate_q1: usize,
    /// Error-grid resolution of each candidate solve.
    pub candidate_q2: usize,
    /// Gauss-Newton budget per candidate (nonlinear problems).
    pub max_gn_iterations: usize,
}

impl DeOptions {
    /// Standard defaults for an `n`-component magnitude vector:
    /// `pop = 10 n`, `F = 0.7`, `CR = 0.9`.
    pub fn standard(bounds: Vec<(f64, f64)>) -> Self {
        let n = bounds.len().max(1);
        DeOptions {
            population_size: 10 * n,
            generations: 20,
            mutation_factor: 0.7,
            crossover_rate: 0.9,
            bounds,
            objective: Objective::ExactError,
            seed: 0,
            candidate_q1: 15,
            candidate_q2: 41,
            max_gn_iterations: 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::invalid("DE population must have at least 4 members"));
        }
        if !(0.0 < self.mutation_factor && self.mutation_factor < 2.0) {
            return Err(Error::invalid("mutation factor must lie in (0, 2)"));
        }
        if !(0.0 < self.crossover_rate && self.crossover_rate <= 1.0) {
            return Err(Error::invalid("crossover rate must lie in (0, 1]"));
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid("bounds must be finite with positive width"));
        }
        Ok(())
    }
}

/// Best candidate of one generation.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_objective: f64,
    pub best_point: Vec<f64>,
}

/// Per-generation best-objective trace; non-increasing by construction.
#[derive(Debug, Clone, Serialize)]
pub struct TuneHistory {
    pub records: Vec<GenerationRecord>,
}

impl TuneHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_objective");
        let n = self.records.first().map_or(0, |r| r.best_point.len());
        for k in 0..n {
            out.push_str(&format!(",r{}", k + 1));
        }
        out.push('\n');
        for rec in &self.records {
            out.push_str(&format!("{},{:e}", rec.generation, rec.best_objective));
            for v in &rec.best_point {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// DE/rand/1/bin minimization of `objective` over the bounded box.
/// Deterministic for a fixed seed; every evaluated candidate lies within
/// the bounds.
pub fn minimize<F>(mut objective: F, opts: &DeOptions) -> Result<(Vec<f64>, f64, TuneHistory)>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let dim = opts.bounds.len();
    let np = opts.population_size;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            opts.bounds
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                .collect()
        })
        .collect();
    let mut scores: Vec<f64> = population.iter().map(|x| objective(x)).collect();

    let mut history = TuneHistory {
        records: Vec::with_capacity(opts.generations),
    };
    let record_best = |population: &[Vec<f64>], scores: &[f64], gen: usize| {
        let (best, _) = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty population");
        GenerationRecord {
            generation: gen,
            best_objective: scores[best],
            best_point: population[best].clone(),
        }
    };
    history.records.push(record_best(&population, &scores, 0));

    for gen in 1..=opts.generations {
        for i in 0..np {
            // Three distinct members, all different from the target.
            let mut pick = || loop {
                let k = rng.gen_range(0..np);
                if k != i {
                    return k;
                }
            };
            let (a, mut b, mut c) = (pick(), pick(), pick());
            while b == a {
                b = pick();
            }
            while c == a || c == b {
                c = pick();
            }

            let mut trial = population[i].clone();
            let j_rand = rng.gen_range(0..dim);
            for j in 0..dim {
                let mutant_j = population[a][j]
                    + opts.mutation_factor * (population[b][j] - population[c][j]);
                if rng.gen::<f64>() < opts.crossover_rate || j == j_rand {
                    trial[j] = mutant_j;
                }
            }
            clip(&mut trial, &opts.bounds);

            let score = objective(&trial);
            if score <= scores[i] {
                population[i] = trial;
                scores[i] = score;
            }
        }
        history.records.push(record_best(&population, &scores, gen));
    }

    let last = history.records.last().expect("at least one generation");
    Ok((last.best_point.clone(), last.best_objective, history))
}

/// RMS of the PDE residual of a trained piece on a grid offset by half a
/// cell from the training grid (the held-out validation set).
fn validation_residual(
    prob: &ProblemSpec,
    piece: &crate::solver::TrainedPiece,
    q1: usize,
) -> Result<f64> {
    use nalgebra::DMatrix;
    let d = prob.dim();
    let n = q1 - 1;
    let q = n.pow(d as u32);
    let h: Vec<f64> = (0..d)
        .map(|c| (prob.domain.hi[c] - prob.domain.lo[c]) / (q1 - 1) as f64)
        .collect();
    let mut points = DMatrix::zeros(q, d);
    for p in 0..q {
        let mut rem = p;
        for c in (0..d).rev() {
            let i = rem % n;
            rem /= n;
            points[(p, c)] = prob.domain.lo[c] + (i as f64 + 0.5) * h[c];
        }
    }
    let keys = prob.required_keys();
    let basis = piece.basis(&points, &keys)?;
    let beta = &piece.net.beta;
    let mut sum_sq = 0.0;
    for p in 0..q {
        let x = points.row(p).iter().copied().collect::<Vec<_>>();
        let mut r = -(prob.source)(&x);
        for term in &prob.linear_terms {
            let m = basis.matrix(term.key)?;
            let row_dot: f64 = (0..basis.n_basis()).map(|j| m[(p, j)] * beta[j]).sum();
            r += term.coeff.eval(&x) * row_dot;
        }
        if let Some(nl) = &prob.nonlinear {
            let u: f64 = (0..basis.n_basis())
                .map(|j| basis.psi[(p, j)] * beta[j])
                .sum();
            let w = if nl.uses_grad {
                let m = basis.matrix(nl.grad_key)?;
                (0..basis.n_basis()).map(|j| m[(p, j)] * beta[j]).sum()
            } else {
                0.0
            };
            r += (nl.value)(u, w);
        }
        sum_sq += r * r;
    }
    Ok((sum_sq / q as f64).sqrt())
}

/// Score one magnitude vector by a reduced-fidelity single-domain solve.
fn candidate_objective(
    prob: &ProblemSpec,
    arch: &ArchitectureVector,
    seed: u64,
    r: &[f64],
    opts: &DeOptions,
) -> f64 {
    let magnitudes = HiddenMagnitudeVector(r.to_vec());
    let Ok(net) = assign_random_coefficients(arch, &magnitudes, seed) else {
        return f64::INFINITY;
    };
    let mut solver_opts = SolverOptions {
        eval_q2: opts.candidate_q2,
        ..SolverOptions::default()
    };
    solver_opts.nlsq.max_iterations = opts.max_gn_iterations;
    let outcome = match solve_single(prob, &net, opts.candidate_q1, BasisMode::HlConc, &solver_opts)
    {
        Ok(o) => o,
        Err(_) => return f64::INFINITY,
    };
    let score = match opts.objective {
        Objective::ExactError => {
            match evaluate_pieces(prob, &outcome.pieces, opts.candidate_q2) {
                Ok(Some((max, _))) => max,
                _ => f64::INFINITY,
            }
        }
        Objective::ValidationResidual => {
            match validation_residual(prob, &outcome.pieces[0], opts.candidate_q1) {
                Ok(v) => v,
                Err(_) => f64::INFINITY,
            }
        }
    };
    if score.is_finite() {
        score
    } else {
        f64::INFINITY
    }
}

/// Search for the best hidden magnitude vector for `(prob, arch)`.
///
/// The objective is `ExactError` when the problem carries an exact
/// solution, otherwise `ValidationResidual`.  Every candidate is evaluated
/// by a fresh single-domain solve on `candidate_q1` collocation points with
/// the network drawn from `seed` (the same base vector `xi` for every
/// candidate, so the search varies only `R`).
pub fn tune_hidden_magnitudes(
    prob: &ProblemSpec,
    arch: &ArchitectureVector,
    seed: u64,
    opts: &DeOptions,
) -> Result<(HiddenMagnitudeVector, TuneHistory)> {
    if opts.bounds.len() != arch.n_hidden_layers() {
        return Err(Error::invalid(format!(
            "{} bound pairs supplied for {} hidden layers",
            opts.bounds.len(),
            arch.n_hidden_layers()
        )));
    }
    let mut opts = opts.clone();
    if opts.objective == Objective::ExactError && prob.exact.is_none() {
        opts.objective = Objective::ValidationResidual;
    }
    let (best, _, history) = minimize(
        |r| candidate_objective(prob, arch, seed, r, &opts),
        &opts,
    )?;
    Ok((HiddenMagnitudeVector(best), history))
}
