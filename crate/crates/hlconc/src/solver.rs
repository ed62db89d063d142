//! End-to-end solve drivers and the error-evaluation protocol.
//!
//! [`solve_single`] trains one network on one domain: the basis derivatives
//! are evaluated once, the collocation system is assembled, and the output
//! weights come from minimum-norm linear least squares (linear problems) or
//! trust-region Gauss-Newton from `beta = 0` (nonlinear problems).
//!
//! [`block_time_march`] splits the time axis into uniform blocks, solves
//! them in sequence, and feeds each block's terminal state to the next block
//! as its initial condition.  Every block is affinely translated onto the
//! first block's time interval before training, so the same network and
//! hidden magnitudes work across blocks and the per-block basis matrices can
//! be reused verbatim.
//!
//! [`solve_decomposed`] assigns one network per subdomain along the first
//! coordinate and trains all of them jointly: the stacked system holds every
//! subdomain's PDE/boundary rows plus `C^k` continuity rows (`u` and, for
//! `k = 1`, `du/dx`) at the collocation points shared by neighboring
//! subdomains.  Interface rows couple exactly two subdomains.
//!
//! Errors are always measured on a fine uniform evaluation grid (default
//! `101 x 101` per block/subdomain, strictly finer than any training grid in
//! use): the maximum and root-mean-square of `|u_net - u_exact|`, aggregated
//! across pieces as max-of-max and rms-over-the-union.
//!
//! # Input normalization
//!
//! Networks never see physical coordinates: every (sub)domain is affinely
//! mapped onto the reference square `[-1, 1]^d` before basis evaluation,
//! and the basis derivative matrices are chain-rule scaled back to physical
//! coordinates (`d/dx = (2 / width) d/dx_ref` per axis and order).  Random
//! weights drawn on `[-R, R]` then act on balanced inputs regardless of
//! where the domain sits, which is what makes a single hidden magnitude
//! vector transfer across time blocks and subdomains; accuracy on
//! off-center domains collapses by orders of magnitude without this.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::lstsq::{
    gauss_newton_trust_region, linear_least_squares_with, LinearSystem, NlsqOptions, Termination,
};
use crate::netcore::{BasisDerivatives, BasisMode, DerivKey, NetworkCoefficients};
use crate::pdespec::{
    build_collocation, field, BoundaryCondition, CollocationSet, Domain, ExactSolution,
    ProblemSpec, ResidualSystem, ScalarField, Side,
};
use crate::{Error, Result};

/// Knobs shared by all drivers.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub nlsq: NlsqOptions,
    /// Relative singular-value cutoff for the linear path (and the
    /// Gauss-Newton subproblem); `None` uses the standard rank heuristic.
    pub rcond: Option<f64>,
    /// Starting `beta` for the first (or only) solve instead of zeros.
    pub warm_start: Option<DVector<f64>>,
    /// Warm-start each time block from the previous block's solution.
    pub march_warm_start: bool,
    /// Evaluation grid resolution per direction.
    pub eval_q2: usize,
    /// Extra Gauss-Newton attempts from random perturbed starts whenever
    /// the converged residual norm stays above `restart_tolerance`.  Some
    /// strongly nonlinear problems (the cosh Helmholtz, notably) have a
    /// spurious stationary point that captures the zero start; a handful of
    /// uniform draws of magnitude `restart_magnitude` reliably escapes it.
    /// The best attempt wins.  `0` disables restarts.
    pub restarts: usize,
    pub restart_magnitude: f64,
    pub restart_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nlsq: NlsqOptions::default(),
            rcond: None,
            warm_start: None,
            march_warm_start: false,
            eval_q2: 101,
            restarts: 0,
            restart_magnitude: 0.1,
            restart_tolerance: 1e-3,
        }
    }
}

/// Outcome statistics of one driver run.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub mode: BasisMode,
    /// Final `||r||_2` (for marching: the worst block).
    pub residual_norm: f64,
    pub max_error: Option<f64>,
    pub rms_error: Option<f64>,
    /// Jacobian factorizations spent (1 for a linear solve).
    pub iterations: usize,
    pub wall_time: f64,
    /// Gauss-Newton stopping reason; `None` on the linear path.
    pub termination: Option<Termination>,
}

/// Map physical points of `domain` onto the reference square `[-1, 1]^d`.
fn normalize_points(domain: &Domain, points: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = points.clone();
    for c in 0..domain.dim() {
        let (lo, hi) = (domain.lo[c], domain.hi[c]);
        for v in out.column_mut(c).iter_mut() {
            *v = 2.0 * (*v - lo) / (hi - lo) - 1.0;
        }
    }
    out
}

/// Evaluate a network on physical points through the reference-square map,
/// rescaling derivative matrices back to physical coordinates.
pub(crate) fn scaled_basis(
    net: &NetworkCoefficients,
    domain: &Domain,
    points: &DMatrix<f64>,
    keys: &[DerivKey],
    mode: BasisMode,
) -> Result<BasisDerivatives> {
    let reference = normalize_points(domain, points);
    let mut basis = net.basis(&reference, keys, mode)?;
    for (key, matrix) in basis.derivs.iter_mut() {
        let gain = 2.0 / (domain.hi[key.coord] - domain.lo[key.coord]);
        *matrix *= gain.powi(key.order as i32);
    }
    // Assembly evaluates coefficient fields against these points, so keep
    // them physical.
    basis.points = points.clone();
    Ok(basis)
}

/// One trained network tile: a (sub)domain in block-local coordinates plus
/// the time offset mapping local to global time.
#[derive(Debug, Clone)]
pub struct TrainedPiece {
    /// Domain in local coordinates (time axis translated per block).
    pub domain: Domain,
    /// Add to the local time coordinate to obtain global time.
    pub t_offset: f64,
    pub block: usize,
    pub subdomain: usize,
    pub mode: BasisMode,
    /// Network with the trained `beta` stored.
    pub net: NetworkCoefficients,
}

impl TrainedPiece {
    /// Does this piece's domain contain the local point `x`?
    pub fn contains(&self, x: &[f64]) -> bool {
        let eps = 1e-12;
        x.iter()
            .zip(self.domain.lo.iter().zip(&self.domain.hi))
            .all(|(v, (lo, hi))| *v >= lo - eps * (1.0 + lo.abs()) && *v <= hi + eps * (1.0 + hi.abs()))
    }

    /// Basis fields of this piece at physical points.
    pub fn basis(&self, points: &DMatrix<f64>, keys: &[DerivKey]) -> Result<BasisDerivatives> {
        scaled_basis(&self.net, &self.domain, points, keys, self.mode)
    }

    /// Network output at (physical, block-local) points.
    pub fn output(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        let basis = self.basis(points, &[])?;
        Ok(&basis.psi * &self.net.beta)
    }

    /// Network output and its first x-derivative at physical points.
    pub fn output_and_xderiv(&self, points: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let key = DerivKey::new(0, 1);
        let basis = self.basis(points, &[key])?;
        let u = &basis.psi * &self.net.beta;
        let ux = basis.matrix(key)? * &self.net.beta;
        Ok((u, ux))
    }
}

/// Everything a driver run produces: the aggregate report, the trained
/// pieces tiling the domain, and per-block reports when marching.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub pieces: Vec<TrainedPiece>,
    pub block_reports: Vec<SolveReport>,
}

/// Subdomain decomposition along the first coordinate.
#[derive(Debug, Clone)]
pub struct DecompositionSpec {
    /// Strictly increasing breakpoints spanning the domain's x extent.
    pub breakpoints: Vec<f64>,
    /// Continuity order enforced at interfaces: 0 or 1.
    pub continuity_order: usize,
}

impl DecompositionSpec {
    pub fn n_subdomains(&self) -> usize {
        self.breakpoints.len() - 1
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        if self.breakpoints.len() < 2 {
            return Err(Error::invalid("decomposition needs at least two breakpoints"));
        }
        if self.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if self.continuity_order > 1 {
            return Err(Error::invalid("continuity order must be 0 or 1"));
        }
        let span = domain.hi[0] - domain.lo[0];
        let eps = 1e-12 * (1.0 + span.abs());
        if (self.breakpoints[0] - domain.lo[0]).abs() > eps
            || (self.breakpoints.last().unwrap() - domain.hi[0]).abs() > eps
        {
            return Err(Error::invalid("breakpoints must span the domain"));
        }
        Ok(())
    }
}

/// Wrap a field so that its last coordinate is shifted by `offset` before
/// evaluation (local block time -> global time).
fn shift_field(f: ScalarField, dim: usize, offset: f64) -> ScalarField {
    if offset == 0.0 {
        return f;
    }
    field(move |x: &[f64]| {
        let mut g = [0.0f64; 2];
        g[..dim].copy_from_slice(x);
        g[dim - 1] += offset;
        f(&g[..dim])
    })
}

fn shift_coefficient(
    c: &crate::pdespec::Coefficient,
    dim: usize,
    offset: f64,
) -> crate::pdespec::Coefficient {
    match c {
        crate::pdespec::Coefficient::Constant(v) => crate::pdespec::Coefficient::Constant(*v),
        crate::pdespec::Coefficient::Field(f) => {
            crate::pdespec::Coefficient::Field(shift_field(f.clone(), dim, offset))
        }
    }
}

/// A copy of `prob` expressed in block-local time: the domain's time axis
/// is replaced by `[t_lo, t_lo + delta]` and every field is evaluated at
/// `t + offset`.
fn shift_problem_time(prob: &ProblemSpec, offset: f64, local_t_hi: f64) -> ProblemSpec {
    let dim = prob.dim();
    let mut out = prob.clone();
    out.domain.hi[dim - 1] = local_t_hi;
    if offset == 0.0 {
        return out;
    }
    let shift_terms = |terms: &[crate::pdespec::LinearTerm]| {
        terms
            .iter()
            .map(|t| crate::pdespec::LinearTerm {
                coeff: shift_coefficient(&t.coeff, dim, offset),
                key: t.key,
            })
            .collect::<Vec<_>>()
    };
    out.linear_terms = shift_terms(&prob.linear_terms);
    out.source = shift_field(prob.source.clone(), dim, offset);
    out.boundary = prob
        .boundary
        .iter()
        .map(|bc| match bc {
            BoundaryCondition::Standard {
                coord,
                side,
                operator,
                nonlinear,
                data,
            } => BoundaryCondition::Standard {
                coord: *coord,
                side: *side,
                operator: shift_terms(operator),
                nonlinear: nonlinear.clone(),
                data: shift_field(data.clone(), dim, offset),
            },
            BoundaryCondition::PairDifference {
                coord,
                operator,
                data,
            } => BoundaryCondition::PairDifference {
                coord: *coord,
                operator: shift_terms(operator),
                data: shift_field(data.clone(), dim, offset),
            },
        })
        .collect();
    out.exact = prob.exact.as_ref().map(|ex| {
        let value = shift_field(ex.value.clone(), dim, offset);
        let inner = ex.derivative.clone();
        ExactSolution {
            value,
            derivative: Arc::new(move |x: &[f64], key| {
                let mut g = [0.0f64; 2];
                g[..dim].copy_from_slice(x);
                g[dim - 1] += offset;
                inner(&g[..dim], key)
            }),
        }
    });
    out
}

/// Restrict a problem to one subdomain along coordinate 0: exterior x-face
/// conditions stay only on the outermost subdomains; every other condition
/// applies to all of them.
fn subdomain_problem(prob: &ProblemSpec, x_lo: f64, x_hi: f64, first: bool, last: bool) -> Result<ProblemSpec> {
    let mut out = prob.clone();
    out.domain.lo[0] = x_lo;
    out.domain.hi[0] = x_hi;
    let mut boundary = Vec::new();
    for bc in &prob.boundary {
        match bc {
            BoundaryCondition::Standard { coord, side, .. } => {
                let keep = *coord != 0
                    || match side {
                        Side::Low => first,
                        Side::High => last,
                    };
                if keep {
                    boundary.push(bc.clone());
                }
            }
            BoundaryCondition::PairDifference { coord, .. } => {
                if *coord == 0 {
                    return Err(Error::invalid(
                        "periodic conditions along the decomposed coordinate are not supported",
                    ));
                }
                boundary.push(bc.clone());
            }
        }
    }
    out.boundary = boundary;
    Ok(out)
}

/// Cached per-subdomain collocation grid and basis matrices; computed once
/// and reused across Gauss-Newton iterations and across time blocks.
struct Prepared {
    colloc: CollocationSet,
    basis: BasisDerivatives,
}

fn prepare(
    net: &NetworkCoefficients,
    domain: &Domain,
    q1: usize,
    keys: &[DerivKey],
    mode: BasisMode,
) -> Result<Prepared> {
    let colloc = build_collocation(domain, q1)?;
    let basis = scaled_basis(net, domain, &colloc.points, keys, mode)?;
    Ok(Prepared { colloc, basis })
}

/// The stacked residual system of a multi-subdomain solve: block-diagonal
/// subdomain systems plus full-width interface continuity rows at the
/// bottom.
struct JointSystem {
    blocks: Vec<ResidualSystem>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    interface: DMatrix<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl JointSystem {
    fn is_linear(&self) -> bool {
        self.blocks.iter().all(|b| b.is_linear())
    }

    fn residual(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_rows);
        for (i, block) in self.blocks.iter().enumerate() {
            let beta_s = beta.rows(self.col_offsets[i], block.n_cols()).clone_owned();
            let r_s = block.residual(&beta_s);
            r.rows_mut(self.row_offsets[i], block.n_rows()).copy_from(&r_s);
        }
        if self.interface.nrows() > 0 {
            let tail = &self.interface * beta;
            r.rows_mut(self.n_rows - tail.len(), tail.len()).copy_from(&tail);
        }
        r
    }

    fn jacobian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, block) in self.blocks.iter().enumerate() {
            let beta_s = beta.rows(self.col_offsets[i], block.n_cols()).clone_owned();
            let j_s = block.jacobian(&beta_s);
            jac.view_mut(
                (self.row_offsets[i], self.col_offsets[i]),
                (block.n_rows(), block.n_cols()),
            )
            .copy_from(&j_s);
        }
        if self.interface.nrows() > 0 {
            jac.view_mut(
                (self.n_rows - self.interface.nrows(), 0),
                (self.interface.nrows(), self.n_cols),
            )
            .copy_from(&self.interface);
        }
        jac
    }
}

fn build_joint_system(
    probs: &[ProblemSpec],
    prepared: &[Prepared],
    continuity_order: usize,
) -> Result<JointSystem> {
    let mut blocks = Vec::with_capacity(probs.len());
    for (prob, prep) in probs.iter().zip(prepared) {
        blocks.push(ResidualSystem::build(prob, &prep.colloc, &prep.basis)?);
    }
    let mut row_offsets = Vec::with_capacity(blocks.len());
    let mut col_offsets = Vec::with_capacity(blocks.len());
    let mut rows = 0;
    let mut cols = 0;
    for block in &blocks {
        row_offsets.push(rows);
        col_offsets.push(cols);
        rows += block.n_rows();
        cols += block.n_cols();
    }

    // Interface rows: C^0 (and C^1) continuity at the collocation points
    // shared by neighboring subdomains.
    let mut iface_rows = 0;
    for i in 1..prepared.len() {
        let n_pts = prepared[i].colloc.face(0, Side::Low).len();
        iface_rows += n_pts * (continuity_order + 1);
    }
    let mut interface = DMatrix::zeros(iface_rows, cols);
    let mut row = 0;
    for i in 1..prepared.len() {
        let left = &prepared[i - 1];
        let right = &prepared[i];
        let left_face = left.colloc.face(0, Side::High);
        let right_face = right.colloc.face(0, Side::Low);
        if left_face.len() != right_face.len() {
            return Err(Error::invalid("mismatched interface collocation counts"));
        }
        for order in 0..=continuity_order {
            let key = DerivKey::new(0, order);
            let m_left = left.basis.matrix(key)?;
            let m_right = right.basis.matrix(key)?;
            for (&pl, &pr) in left_face.iter().zip(right_face) {
                for j in 0..left.basis.n_basis() {
                    interface[(row, col_offsets[i - 1] + j)] = m_left[(pl, j)];
                }
                for j in 0..right.basis.n_basis() {
                    interface[(row, col_offsets[i] + j)] = -m_right[(pr, j)];
                }
                row += 1;
            }
        }
    }
    let n_rows = rows + iface_rows;
    Ok(JointSystem {
        blocks,
        row_offsets,
        col_offsets,
        interface,
        n_rows,
        n_cols: cols,
    })
}

/// Train the stacked system: minimum-norm linear least squares when every
/// block is linear, trust-region Gauss-Newton otherwise (with optional
/// perturbation restarts).
fn train(
    joint: &JointSystem,
    opts: &SolverOptions,
    warm: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, f64, usize, Option<Termination>)> {
    let rcond = opts
        .rcond
        .unwrap_or_else(|| crate::lstsq::default_rcond(joint.n_rows, joint.n_cols));
    if joint.is_linear() {
        let zeros = DVector::zeros(joint.n_cols);
        let a = joint.jacobian(&zeros);
        let b = -joint.residual(&zeros);
        let beta = linear_least_squares_with(&LinearSystem::new(a, b)?, rcond)?;
        let norm = joint.residual(&beta).norm();
        return Ok((beta, norm, 1, None));
    }

    let mut nlsq = opts.nlsq.clone();
    nlsq.rcond = Some(rcond);
    let attempt = |beta0: DVector<f64>| {
        gauss_newton_trust_region(|b| joint.residual(b), |b| joint.jacobian(b), beta0, &nlsq)
    };

    let beta0 = warm.cloned().unwrap_or_else(|| DVector::zeros(joint.n_cols));
    let (mut best_beta, first) = attempt(beta0)?;
    let mut best_residual = first.final_residual_norm;
    let mut best_termination = first.termination;
    let mut iterations = first.iterations;

    if opts.restarts > 0 && best_residual > opts.restart_tolerance {
        let mut rng = ChaCha20Rng::seed_from_u64(0x7e57_4274);
        for _ in 0..opts.restarts {
            let m = opts.restart_magnitude;
            let beta0 =
                DVector::from_fn(joint.n_cols, |_, _| rng.gen_range(-m..m));
            match attempt(beta0) {
                Ok((beta, report)) => {
                    iterations += report.iterations;
                    if report.final_residual_norm < best_residual {
                        best_beta = beta;
                        best_residual = report.final_residual_norm;
                        best_termination = report.termination;
                    }
                }
                // A diverged restart is just a failed try; keep the best
                // finite answer found so far.
                Err(Error::SolverDiverged {
                    iterations: spent, ..
                }) => iterations += spent,
                Err(other) => return Err(other),
            }
            if best_residual <= opts.restart_tolerance {
                break;
            }
        }
    }
    Ok((best_beta, best_residual, iterations, Some(best_termination)))
}

/// Accumulator for max / rms aggregation over evaluation points.
#[derive(Default, Clone, Copy)]
struct ErrorAccum {
    max: f64,
    sum_sq: f64,
    count: usize,
}

impl ErrorAccum {
    fn push(&mut self, err: f64) {
        self.max = self.max.max(err.abs());
        self.sum_sq += err * err;
        self.count += 1;
    }

    fn merge(&mut self, other: ErrorAccum) {
        self.max = self.max.max(other.max);
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }

    fn rms(&self) -> f64 {
        (self.sum_sq / self.count.max(1) as f64).sqrt()
    }
}

/// Evaluation grid over one piece, in chunks to bound transient memory.
fn accumulate_piece_errors(
    exact: &ExactSolution,
    piece: &TrainedPiece,
    q2: usize,
    acc: &mut ErrorAccum,
) -> Result<()> {
    let grid = build_collocation(&piece.domain, q2)?;
    let dim = piece.domain.dim();
    let q = grid.n_points();
    let chunk = 4096;
    let mut start = 0;
    while start < q {
        let len = chunk.min(q - start);
        let pts = grid.points.rows(start, len).clone_owned();
        let u = piece.output(&pts)?;
        for (k, u_val) in u.iter().enumerate() {
            let mut x = [0.0f64; 2];
            for c in 0..dim {
                x[c] = pts[(k, c)];
            }
            x[dim - 1] += piece.t_offset;
            let truth = (exact.value)(&x[..dim]);
            acc.push(u_val - truth);
        }
        start += len;
    }
    Ok(())
}

/// Max /rms errors of a set of trained pieces against the problem's exact
/// solution; `None` when the problem has no exact solution.
pub fn evaluate_pieces(
    prob: &ProblemSpec,
    pieces: &[TrainedPiece],
    q2: usize,
) -> Result<Option<(f64, f64)>> {
    let Some(exact) = &prob.exact else {
        return Ok(None);
    };
    let mut acc = ErrorAccum::default();
    for piece in pieces {
        accumulate_piece_errors(exact, piece, q2, &mut acc)?;
    }
    Ok(Some((acc.max, acc.rms())))
}

/// Errors of one trained network over the problem domain on a
/// `q2`-per-direction grid (the paper-style evaluation protocol).
pub fn evaluate_errors(
    prob: &ProblemSpec,
    net: &NetworkCoefficients,
    beta: &DVector<f64>,
    mode: BasisMode,
    q2: usize,
) -> Result<(f64, f64)> {
    if prob.exact.is_none() {
        return Err(Error::invalid("error evaluation needs an exact solution"));
    }
    let piece = TrainedPiece {
        domain: prob.domain.clone(),
        t_offset: 0.0,
        block: 0,
        subdomain: 0,
        mode,
        net: net.clone().with_beta(beta.clone(), mode)?,
    };
    let result = evaluate_pieces(prob, std::slice::from_ref(&piece), q2)?;
    Ok(result.expect("exact solution checked above"))
}

fn required_keys_with_continuity(prob: &ProblemSpec, decomp: Option<&DecompositionSpec>) -> Vec<DerivKey> {
    let mut keys = prob.required_keys();
    if let Some(d) = decomp {
        if d.continuity_order >= 1 {
            let key = DerivKey::new(0, 1);
            if !keys.contains(&key) {
                keys.push(key);
                keys.sort();
            }
        }
    }
    keys
}

/// Solve one problem on one (possibly decomposed) domain with prebuilt
/// bases.  This is the shared engine behind the public drivers.
fn solve_prepared(
    prob: &ProblemSpec,
    decomp: Option<&DecompositionSpec>,
    nets: &[NetworkCoefficients],
    prepared: &[Prepared],
    mode: BasisMode,
    opts: &SolverOptions,
    block: usize,
    t_offset: f64,
) -> Result<SolveOutcome> {
    let started = std::time::Instant::now();
    let (probs, continuity) = match decomp {
        Some(d) => {
            let n = d.n_subdomains();
            let mut probs = Vec::with_capacity(n);
            for s in 0..n {
                probs.push(subdomain_problem(
                    prob,
                    d.breakpoints[s],
                    d.breakpoints[s + 1],
                    s == 0,
                    s == n - 1,
                )?);
            }
            (probs, d.continuity_order)
        }
        None => (vec![prob.clone()], 0),
    };

    let joint = build_joint_system(&probs, prepared, continuity)?;
    let (beta, residual_norm, iterations, termination) =
        train(&joint, opts, opts.warm_start.as_ref())?;

    let mut pieces = Vec::with_capacity(probs.len());
    for (s, sub) in probs.iter().enumerate() {
        let beta_s = beta
            .rows(joint.col_offsets[s], joint.blocks[s].n_cols())
            .clone_owned();
        pieces.push(TrainedPiece {
            domain: sub.domain.clone(),
            t_offset,
            block,
            subdomain: s,
            mode,
            net: nets[s].clone().with_beta(beta_s, mode)?,
        });
    }

    let errors = evaluate_pieces(prob, &pieces, opts.eval_q2)?;
    let report = SolveReport {
        mode,
        residual_norm,
        max_error: errors.map(|e| e.0),
        rms_error: errors.map(|e| e.1),
        iterations,
        wall_time: started.elapsed().as_secs_f64(),
        termination,
    };
    Ok(SolveOutcome {
        report,
        pieces,
        block_reports: Vec::new(),
    })
}

/// Train one network on the whole domain.
pub fn solve_single(
    prob: &ProblemSpec,
    net: &NetworkCoefficients,
    q1: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    if net.arch().input_dim() != prob.dim() {
        return Err(Error::invalid(
            "network input dimension does not match the problem",
        ));
    }
    let keys = prob.required_keys();
    let prepared = prepare(net, &prob.domain, q1, &keys, mode)?;
    solve_prepared(
        prob,
        None,
        std::slice::from_ref(net),
        std::slice::from_ref(&prepared),
        mode,
        opts,
        0,
        0.0,
    )
}

/// Train one network per subdomain, coupled by `C^k` interface continuity
/// rows, as a single stacked least-squares problem.
pub fn solve_decomposed(
    prob: &ProblemSpec,
    decomp: &DecompositionSpec,
    nets: &[NetworkCoefficients],
    q1: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    decomp.validate(&prob.domain)?;
    if nets.len() != decomp.n_subdomains() {
        return Err(Error::invalid(format!(
            "{} networks supplied for {} subdomains",
            nets.len(),
            decomp.n_subdomains()
        )));
    }
    let keys = required_keys_with_continuity(prob, Some(decomp));
    let mut prepared = Vec::with_capacity(nets.len());
    for (s, net) in nets.iter().enumerate() {
        let mut dom = prob.domain.clone();
        dom.lo[0] = decomp.breakpoints[s];
        dom.hi[0] = decomp.breakpoints[s + 1];
        prepared.push(
            prepare(net, &dom, q1, &keys, mode)
                .map_err(|e| e.in_context(format!("subdomain {s}")))?,
        );
    }
    solve_prepared(prob, Some(decomp), nets, &prepared, mode, opts, 0, 0.0)
}

/// Divide the time axis into `n_blocks` uniform blocks and solve them
/// sequentially; block `k + 1` takes its initial condition from block `k`
/// evaluated at the shared time line.  `nets` holds one network (no
/// decomposition) or one per subdomain; the same networks are reused for
/// every block.
pub fn block_time_march(
    prob: &ProblemSpec,
    n_blocks: usize,
    nets: &[NetworkCoefficients],
    decomp: Option<&DecompositionSpec>,
    q1: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    if !prob.time_dependent {
        return Err(Error::invalid("block time marching needs a time-dependent problem"));
    }
    if n_blocks == 0 {
        return Err(Error::invalid("need at least one time block"));
    }
    let dim = prob.dim();
    let t_axis = dim - 1;
    let t_lo = prob.domain.lo[t_axis];
    let t_hi = prob.domain.hi[t_axis];
    let delta = (t_hi - t_lo) / n_blocks as f64;
    let local_t_hi = if n_blocks == 1 { t_hi } else { t_lo + delta };

    let ic_index = prob
        .boundary
        .iter()
        .position(|bc| {
            matches!(
                bc,
                BoundaryCondition::Standard {
                    coord,
                    side: Side::Low,
                    ..
                } if *coord == t_axis
            )
        })
        .ok_or_else(|| {
            Error::invalid("time-dependent problem has no initial condition on the low time face")
        })?;

    if let Some(d) = decomp {
        d.validate(&prob.domain)?;
        if nets.len() != d.n_subdomains() {
            return Err(Error::invalid("one network per subdomain required"));
        }
    } else if nets.len() != 1 {
        return Err(Error::invalid("single-domain marching takes exactly one network"));
    }

    // Bases are identical across blocks (same nets, same block-local grid),
    // so prepare them once.
    let keys = required_keys_with_continuity(prob, decomp);
    let mut prepared = Vec::with_capacity(nets.len());
    for (s, net) in nets.iter().enumerate() {
        let mut dom = prob.domain.clone();
        dom.hi[t_axis] = local_t_hi;
        if let Some(d) = decomp {
            dom.lo[0] = d.breakpoints[s];
            dom.hi[0] = d.breakpoints[s + 1];
        }
        prepared.push(
            prepare(net, &dom, q1, &keys, mode)
                .map_err(|e| e.in_context(format!("subdomain {s}")))?,
        );
    }

    let started = std::time::Instant::now();
    let mut all_pieces: Vec<TrainedPiece> = Vec::new();
    let mut block_reports = Vec::with_capacity(n_blocks);
    let mut acc = ErrorAccum::default();
    let mut worst_residual = 0.0f64;
    let mut total_iterations = 0;
    let mut prev_pieces: Option<Arc<Vec<TrainedPiece>>> = None;
    let mut prev_beta: Option<DVector<f64>> = None;

    for k in 0..n_blocks {
        let offset = k as f64 * delta;
        let mut block_prob = shift_problem_time(prob, offset, local_t_hi);
        if let Some(prev) = &prev_pieces {
            // Initial condition of this block: the previous block's network
            // trace at the shared time line.
            let prev = prev.clone();
            let interface_t = local_t_hi;
            let ic_data = field(move |x: &[f64]| {
                let piece = prev
                    .iter()
                    .find(|p| {
                        let mut probe = x.to_vec();
                        probe[t_axis] = interface_t;
                        p.contains(&probe)
                    })
                    .unwrap_or_else(|| prev.last().expect("non-empty block"));
                let mut probe = x.to_vec();
                probe[t_axis] = interface_t;
                let pts = DMatrix::from_row_slice(1, probe.len(), &probe);
                piece.output(&pts).map(|u| u[0]).unwrap_or(f64::NAN)
            });
            if let BoundaryCondition::Standard { data, .. } = &mut block_prob.boundary[ic_index] {
                *data = ic_data;
            }
        }

        let mut block_opts = opts.clone();
        block_opts.warm_start = if k == 0 {
            opts.warm_start.clone()
        } else if opts.march_warm_start {
            prev_beta.clone()
        } else {
            None
        };

        let outcome = solve_prepared(
            &block_prob,
            decomp,
            nets,
            &prepared,
            mode,
            &block_opts,
            k,
            offset,
        )
        .map_err(|e| e.in_context(format!("time block {k}")))?;

        if let Some(exact) = &prob.exact {
            for piece in &outcome.pieces {
                let mut piece_acc = ErrorAccum::default();
                accumulate_piece_errors(exact, piece, opts.eval_q2, &mut piece_acc)?;
                acc.merge(piece_acc);
            }
        }
        worst_residual = worst_residual.max(outcome.report.residual_norm);
        total_iterations += outcome.report.iterations;
        prev_beta = Some(DVector::from_iterator(
            outcome.pieces.iter().map(|p| p.net.beta.len()).sum(),
            outcome.pieces.iter().flat_map(|p| p.net.beta.iter().copied()),
        ));
        prev_pieces = Some(Arc::new(outcome.pieces.clone()));
        block_reports.push(outcome.report);
        all_pieces.extend(outcome.pieces);
    }

    let has_exact = prob.exact.is_some();
    let report = SolveReport {
        mode,
        residual_norm: worst_residual,
        max_error: has_exact.then(|| acc.max),
        rms_error: has_exact.then(|| acc.rms()),
        iterations: total_iterations,
        wall_time: started.elapsed().as_secs_f64(),
        termination: block_reports.last().and_then(|r| r.termination),
    };
    Ok(SolveOutcome {
        report,
        pieces: all_pieces,
        block_reports,
    })
}

/// Worst continuity-row violation of a decomposed solution, sampled on
/// `q2` points per interface: returns (max |u_L - u_R|, max |u'_L - u'_R|).
pub fn interface_jumps(outcome: &SolveOutcome, q2: usize) -> Result<(f64, f64)> {
    let mut max_u = 0.0f64;
    let mut max_ux = 0.0f64;
    let blocks: std::collections::BTreeSet<usize> =
        outcome.pieces.iter().map(|p| p.block).collect();
    for block in blocks {
        let mut pieces: Vec<&TrainedPiece> = outcome
            .pieces
            .iter()
            .filter(|p| p.block == block)
            .collect();
        pieces.sort_by_key(|p| p.subdomain);
        for pair in pieces.windows(2) {
            let (left, right) = (pair[0], pair[1]);
            let x_b = left.domain.hi[0];
            let dim = left.domain.dim();
            let pts = if dim == 1 {
                DMatrix::from_row_slice(1, 1, &[x_b])
            } else {
                let (t_lo, t_hi) = (left.domain.lo[1], left.domain.hi[1]);
                DMatrix::from_fn(q2, 2, |i, c| {
                    if c == 0 {
                        x_b
                    } else {
                        t_lo + (t_hi - t_lo) * i as f64 / (q2 - 1) as f64
                    }
                })
            };
            let (ul, uxl) = left.output_and_xderiv(&pts)?;
            let (ur, uxr) = right.output_and_xderiv(&pts)?;
            for k in 0..ul.len() {
                max_u = max_u.max((ul[k] - ur[k]).abs());
                max_ux = max_ux.max((uxl[k] - uxr[k]).abs());
            }
        }
    }
    Ok((max_u, max_ux))
}
