//! Declarative problem definitions and collocation-system assembly.
//!
//! A [`ProblemSpec`] describes a boundary/initial value problem
//!
//! ```text
//! L u + F(u)     = f     on the domain,
//! B u + G(u)     = g     on each boundary piece,
//! ```
//!
//! where `L` and `B` are sums of coefficient-weighted pure derivatives and
//! `F`, `G` are optional pointwise nonlinearities in `u` and one of its
//! derivatives.  Time-dependent problems treat `t` as the last coordinate;
//! the low face of the time axis carries the initial condition and the high
//! face carries nothing.
//!
//! [`ResidualSystem`] turns a problem, a collocation set, and a cached
//! [`BasisDerivatives`] into the residual vector and Jacobian matrix of the
//! rectangular algebraic system in the output weights `beta`.  Row order is:
//! PDE rows over every collocation point first, then boundary rows per
//! condition in declaration order.  For linear problems the Jacobian is
//! independent of `beta` and is assembled once.

use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::netcore::{BasisDerivatives, DerivKey};
use crate::{Error, Result};

/// A real-valued field on the problem domain.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Wrap a plain closure as a [`ScalarField`].
pub fn field<F>(f: F) -> ScalarField
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// The zero field.
pub fn zero_field() -> ScalarField {
    field(|_| 0.0)
}

/// Coefficient of one operator term: a constant or a spatial field.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(ScalarField),
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// One term `a(x) * d^order u / dx_coord^order` of a linear operator.
/// Order 0 is the identity term.
#[derive(Debug, Clone)]
pub struct LinearTerm {
    pub coeff: Coefficient,
    pub key: DerivKey,
}

impl LinearTerm {
    pub fn constant(c: f64, key: DerivKey) -> Self {
        LinearTerm {
            coeff: Coefficient::Constant(c),
            key,
        }
    }

    pub fn varying(coeff: ScalarField, key: DerivKey) -> Self {
        LinearTerm {
            coeff: Coefficient::Field(coeff),
            key,
        }
    }
}

/// A pointwise nonlinearity `F(u, w)` where `w` is the derivative of `u`
/// selected by `grad_key` (ignored unless `uses_grad`).  `du` and `dgrad`
/// are the partial derivatives of `F`, so the Jacobian contribution of a row
/// is `du * phi + dgrad * phi_w`.
#[derive(Clone)]
pub struct NonlinearTerm {
    pub value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub du: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dgrad: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub uses_grad: bool,
    pub grad_key: DerivKey,
}

impl NonlinearTerm {
    /// A nonlinearity in `u` alone, e.g. `10 cosh(u)`.
    pub fn of_u<F, D>(value: F, du: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        NonlinearTerm {
            value: Arc::new(move |u, _| value(u)),
            du: Arc::new(move |u, _| du(u)),
            dgrad: Arc::new(|_, _| 0.0),
            uses_grad: false,
            grad_key: DerivKey::new(0, 1),
        }
    }

    /// A nonlinearity in `u` and one derivative `w`, e.g. `u u_x` with
    /// `d/du = u_x` and `d/dw = u`.
    pub fn of_u_and_grad<F, D, G>(grad_key: DerivKey, value: F, du: D, dgrad: G) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        NonlinearTerm {
            value: Arc::new(value),
            du: Arc::new(du),
            dgrad: Arc::new(dgrad),
            uses_grad: true,
            grad_key,
        }
    }
}

impl std::fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NonlinearTerm(uses_grad={})", self.uses_grad)
    }
}

/// Which side of an axis a face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// One boundary/initial condition.
#[derive(Clone)]
pub enum BoundaryCondition {
    /// `B u + G(u) = g` enforced on one face of the box.
    Standard {
        coord: usize,
        side: Side,
        operator: Vec<LinearTerm>,
        nonlinear: Option<NonlinearTerm>,
        data: ScalarField,
    },
    /// Two-point linear constraint rows `B u(low) - B u(high) = g(low)`
    /// pairing opposite faces of `coord` (periodic closure).
    PairDifference {
        coord: usize,
        operator: Vec<LinearTerm>,
        data: ScalarField,
    },
}

impl BoundaryCondition {
    /// Dirichlet data on a face.
    pub fn dirichlet(coord: usize, side: Side, data: ScalarField) -> Self {
        BoundaryCondition::Standard {
            coord,
            side,
            operator: vec![LinearTerm::constant(1.0, DerivKey::value())],
            nonlinear: None,
            data,
        }
    }

    /// Periodic identification `u(low) = u(high)` across `coord`.
    pub fn periodic(coord: usize) -> Self {
        BoundaryCondition::PairDifference {
            coord,
            operator: vec![LinearTerm::constant(1.0, DerivKey::value())],
            data: zero_field(),
        }
    }

    fn operator(&self) -> &[LinearTerm] {
        match self {
            BoundaryCondition::Standard { operator, .. } => operator,
            BoundaryCondition::PairDifference { operator, .. } => operator,
        }
    }
}

impl std::fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Standard { coord, side, .. } => {
                write!(f, "Standard(coord={coord}, side={side:?})")
            }
            BoundaryCondition::PairDifference { coord, .. } => {
                write!(f, "PairDifference(coord={coord})")
            }
        }
    }
}

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::invalid("domain must be a 1D or 2D box"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::invalid("degenerate domain box"));
        }
        Ok(Domain { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Exact solution of a problem: value plus analytic pure derivatives, used
/// for manufactured data and error evaluation.  `derivative` returns `None`
/// where a derivative is unavailable (wrong key, or a point where the
/// closed form degenerates).
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub derivative: Arc<dyn Fn(&[f64], DerivKey) -> Option<f64> + Send + Sync>,
}

impl ExactSolution {
    pub fn new<V, D>(value: V, derivative: D) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64], DerivKey) -> Option<f64> + Send + Sync + 'static,
    {
        ExactSolution {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ExactSolution(..)")
    }
}

/// Declarative description of one boundary/initial value problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    /// The linear operator `L`, including any order-0 identity term.
    pub linear_terms: Vec<LinearTerm>,
    pub nonlinear: Option<NonlinearTerm>,
    pub boundary: Vec<BoundaryCondition>,
    pub source: ScalarField,
    pub exact: Option<ExactSolution>,
    /// When set, the last coordinate is time: its low face carries the
    /// initial condition and block time marching applies along it.
    pub time_dependent: bool,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("domain", &self.domain)
            .field("linear_terms", &self.linear_terms)
            .field("nonlinear", &self.nonlinear)
            .field("boundary", &self.boundary)
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinear.is_none()
            && self.boundary.iter().all(|bc| {
                !matches!(
                    bc,
                    BoundaryCondition::Standard {
                        nonlinear: Some(_),
                        ..
                    }
                )
            })
    }

    /// Every derivative key the assembled system needs from the basis.
    pub fn required_keys(&self) -> Vec<DerivKey> {
        fn add_terms(keys: &mut BTreeSet<DerivKey>, terms: &[LinearTerm]) {
            for t in terms {
                if t.key.order > 0 {
                    keys.insert(t.key);
                }
            }
        }
        let mut keys = BTreeSet::new();
        add_terms(&mut keys, &self.linear_terms);
        for bc in &self.boundary {
            add_terms(&mut keys, bc.operator());
            if let BoundaryCondition::Standard {
                nonlinear: Some(nl),
                ..
            } = bc
            {
                if nl.uses_grad {
                    keys.insert(nl.grad_key);
                }
            }
        }
        if let Some(nl) = &self.nonlinear {
            if nl.uses_grad {
                keys.insert(nl.grad_key);
            }
        }
        keys.into_iter().collect()
    }

    fn validate(&self) -> Result<()> {
        if self.boundary.is_empty() {
            return Err(Error::invalid("problem needs at least one boundary condition"));
        }
        for key in self.required_keys() {
            if key.order > crate::jets::MAX_ORDER {
                return Err(Error::invalid(format!(
                    "derivative order {} exceeds the supported maximum",
                    key.order
                )));
            }
            if key.coord >= self.dim() {
                return Err(Error::invalid("derivative coordinate out of range"));
            }
        }
        Ok(())
    }
}

/// Uniform tensor-product collocation grid with per-face index lists.
///
/// Point order is lexicographic with the last axis fastest; faces are listed
/// in the induced order, so the low and high faces of an axis pair up
/// entry by entry (which is what the two-point periodic rows rely on).
/// A corner point appears in every face it belongs to.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub points: DMatrix<f64>,
    /// Grid size per axis (currently equal on all axes).
    pub shape: Vec<usize>,
    /// `faces[2 * coord + side]`: indices of the face points
    /// (side 0 = low, 1 = high).
    pub faces: Vec<Vec<usize>>,
}

impl CollocationSet {
    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn face(&self, coord: usize, side: Side) -> &[usize] {
        let s = match side {
            Side::Low => 0,
            Side::High => 1,
        };
        &self.faces[2 * coord + s]
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        self.points.row(index).iter().copied().collect()
    }
}

/// Build a uniform grid with `q1` points per direction, endpoints included.
pub fn build_collocation(domain: &Domain, q1: usize) -> Result<CollocationSet> {
    if q1 < 2 {
        return Err(Error::invalid("need at least 2 collocation points per direction"));
    }
    let d = domain.dim();
    let axis = |c: usize, i: usize| {
        domain.lo[c] + (domain.hi[c] - domain.lo[c]) * i as f64 / (q1 - 1) as f64
    };
    let q = q1.pow(d as u32);
    let mut points = DMatrix::zeros(q, d);
    let mut faces = vec![Vec::new(); 2 * d];
    for p in 0..q {
        // Decode lexicographic index, last axis fastest.
        let mut rem = p;
        for c in (0..d).rev() {
            let i = rem % q1;
            rem /= q1;
            points[(p, c)] = axis(c, i);
            if i == 0 {
                faces[2 * c].push(p);
            }
            if i == q1 - 1 {
                faces[2 * c + 1].push(p);
            }
        }
    }
    for f in &mut faces {
        f.sort_unstable();
    }
    Ok(CollocationSet {
        points,
        shape: vec![q1; d],
        faces,
    })
}

struct NonlinearBlock {
    rows: Range<usize>,
    /// Collocation-point index behind each row of `rows`.
    point_rows: Vec<usize>,
    term: NonlinearTerm,
}

/// The assembled collocation system: a constant operator matrix plus
/// optional pointwise nonlinear contributions.
///
/// `residual(beta) = matrix * beta - rhs + N(beta)` where `N` collects the
/// `F`/`G` terms evaluated at `u = Psi beta`.  The basis-dependent matrices
/// are computed once at build time and reused across solver iterations.
pub struct ResidualSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub n_pde_rows: usize,
    nonlinear: Vec<NonlinearBlock>,
    psi: Option<DMatrix<f64>>,
    grads: Vec<(DerivKey, DMatrix<f64>)>,
}

impl ResidualSystem {
    pub fn build(
        prob: &ProblemSpec,
        colloc: &CollocationSet,
        basis: &BasisDerivatives,
    ) -> Result<Self> {
        prob.validate()?;
        let q = colloc.n_points();
        if basis.n_points() != q {
            return Err(Error::invalid(
                "basis was evaluated on a different number of points than the collocation set",
            ));
        }
        let nc = basis.n_basis();

        let mut n_rows = q;
        for bc in &prob.boundary {
            n_rows += match bc {
                BoundaryCondition::Standard { coord, side, .. } => {
                    colloc.face(*coord, *side).len()
                }
                BoundaryCondition::PairDifference { coord, .. } => {
                    colloc.face(*coord, Side::Low).len()
                }
            };
        }

        let mut matrix = DMatrix::zeros(n_rows, nc);
        let mut rhs = DVector::zeros(n_rows);

        // PDE block: matrix rows 0..q are L phi.
        for term in &prob.linear_terms {
            let m = basis.matrix(term.key)?;
            match &term.coeff {
                Coefficient::Constant(c) => {
                    for j in 0..nc {
                        matrix.column_mut(j).rows_mut(0, q).axpy(*c, &m.column(j), 1.0);
                    }
                }
                Coefficient::Field(f) => {
                    let c: Vec<f64> = (0..q).map(|p| f(&colloc.point(p))).collect();
                    for j in 0..nc {
                        let src = m.column(j);
                        let mut dst = matrix.column_mut(j);
                        for p in 0..q {
                            dst[p] += c[p] * src[p];
                        }
                    }
                }
            }
        }
        for p in 0..q {
            rhs[p] = (prob.source)(&colloc.point(p));
        }

        let mut nonlinear = Vec::new();
        let mut grad_keys = BTreeSet::new();
        if let Some(term) = &prob.nonlinear {
            if term.uses_grad {
                grad_keys.insert(term.grad_key);
            }
            nonlinear.push(NonlinearBlock {
                rows: 0..q,
                point_rows: (0..q).collect(),
                term: term.clone(),
            });
        }

        // Boundary blocks, in declaration order.
        let mut row = q;
        for bc in &prob.boundary {
            match bc {
                BoundaryCondition::Standard {
                    coord,
                    side,
                    operator,
                    nonlinear: nl,
                    data,
                } => {
                    let face = colloc.face(*coord, *side);
                    for (k, &pt) in face.iter().enumerate() {
                        let x = colloc.point(pt);
                        for term in operator {
                            let c = term.coeff.eval(&x);
                            let m = basis.matrix(term.key)?;
                            for j in 0..nc {
                                matrix[(row + k, j)] += c * m[(pt, j)];
                            }
                        }
                        rhs[row + k] = data(&x);
                    }
                    if let Some(term) = nl {
                        if term.uses_grad {
                            grad_keys.insert(term.grad_key);
                        }
                        nonlinear.push(NonlinearBlock {
                            rows: row..row + face.len(),
                            point_rows: face.to_vec(),
                            term: term.clone(),
                        });
                    }
                    row += face.len();
                }
                BoundaryCondition::PairDifference {
                    coord,
                    operator,
                    data,
                } => {
                    let low = colloc.face(*coord, Side::Low);
                    let high = colloc.face(*coord, Side::High);
                    debug_assert_eq!(low.len(), high.len());
                    for (k, (&lo, &hi)) in low.iter().zip(high).enumerate() {
                        let x_lo = colloc.point(lo);
                        let x_hi = colloc.point(hi);
                        for term in operator {
                            let m = basis.matrix(term.key)?;
                            let c_lo = term.coeff.eval(&x_lo);
                            let c_hi = term.coeff.eval(&x_hi);
                            for j in 0..nc {
                                matrix[(row + k, j)] += c_lo * m[(lo, j)] - c_hi * m[(hi, j)];
                            }
                        }
                        rhs[row + k] = data(&x_lo);
                    }
                    row += low.len();
                }
            }
        }
        debug_assert_eq!(row, n_rows);

        let psi = (!nonlinear.is_empty()).then(|| basis.psi.clone());
        let mut grads = Vec::new();
        for key in grad_keys {
            grads.push((key, basis.matrix(key)?.clone()));
        }

        Ok(ResidualSystem {
            matrix,
            rhs,
            n_pde_rows: q,
            nonlinear,
            psi,
            grads,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinear.is_empty()
    }

    fn grad_matrix(&self, key: DerivKey) -> &DMatrix<f64> {
        &self
            .grads
            .iter()
            .find(|(k, _)| *k == key)
            .expect("grad matrix cached at build time")
            .1
    }

    /// Field values needed by the nonlinear terms at the current `beta`.
    fn nonlinear_inputs(&self, beta: &DVector<f64>) -> (DVector<f64>, Vec<(DerivKey, DVector<f64>)>) {
        let u = self.psi.as_ref().expect("psi cached") * beta;
        let grads = self
            .grads
            .iter()
            .map(|(k, m)| (*k, m * beta))
            .collect();
        (u, grads)
    }

    pub fn residual(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.matrix * beta - &self.rhs;
        if !self.nonlinear.is_empty() {
            let (u, grads) = self.nonlinear_inputs(beta);
            for block in &self.nonlinear {
                let g = block
                    .term
                    .uses_grad
                    .then(|| &grads.iter().find(|(k, _)| *k == block.term.grad_key).unwrap().1);
                for (row, &pt) in block.rows.clone().zip(&block.point_rows) {
                    let w = g.map_or(0.0, |g| g[pt]);
                    r[row] += (block.term.value)(u[pt], w);
                }
            }
        }
        r
    }

    pub fn jacobian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = self.matrix.clone();
        if !self.nonlinear.is_empty() {
            let (u, grads) = self.nonlinear_inputs(beta);
            let psi = self.psi.as_ref().expect("psi cached");
            for block in &self.nonlinear {
                let uses_grad = block.term.uses_grad;
                let gvec = uses_grad
                    .then(|| &grads.iter().find(|(k, _)| *k == block.term.grad_key).unwrap().1);
                let du: Vec<f64> = block
                    .point_rows
                    .iter()
                    .map(|&pt| (block.term.du)(u[pt], gvec.map_or(0.0, |g| g[pt])))
                    .collect();
                let dg: Vec<f64> = block
                    .point_rows
                    .iter()
                    .map(|&pt| (block.term.dgrad)(u[pt], gvec.map_or(0.0, |g| g[pt])))
                    .collect();
                let gmat = uses_grad.then(|| self.grad_matrix(block.term.grad_key));
                for j in 0..jac.ncols() {
                    for (k, (row, &pt)) in block.rows.clone().zip(&block.point_rows).enumerate() {
                        let mut v = du[k] * psi[(pt, j)];
                        if let Some(gm) = gmat {
                            v += dg[k] * gm[(pt, j)];
                        }
                        jac[(row, j)] += v;
                    }
                }
            }
        }
        jac
    }
}

/// Spec-level convenience: assemble the residual vector directly.
pub fn assemble_residual(
    prob: &ProblemSpec,
    colloc: &CollocationSet,
    basis: &BasisDerivatives,
    beta: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(ResidualSystem::build(prob, colloc, basis)?.residual(beta))
}

/// Spec-level convenience: assemble the Jacobian matrix directly.
pub fn assemble_jacobian(
    prob: &ProblemSpec,
    colloc: &CollocationSet,
    basis: &BasisDerivatives,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    Ok(ResidualSystem::build(prob, colloc, basis)?.jacobian(beta))
}

fn exact_term_sum(prob: &ProblemSpec, terms: &[LinearTerm], x: &[f64]) -> Option<f64> {
    let exact = prob.exact.as_ref()?;
    let mut acc = 0.0;
    for term in terms {
        let d = if term.key.order == 0 {
            (exact.value)(x)
        } else {
            (exact.derivative)(x, term.key)?
        };
        acc += term.coeff.eval(x) * d;
    }
    Some(acc)
}

fn exact_nonlinear(prob: &ProblemSpec, term: &NonlinearTerm, x: &[f64]) -> Option<f64> {
    let exact = prob.exact.as_ref()?;
    let u = (exact.value)(x);
    let w = if term.uses_grad {
        (exact.derivative)(x, term.grad_key)?
    } else {
        0.0
    };
    Some((term.value)(u, w))
}

/// Derive the source `f(x) = L u_exact + F(u_exact)` from the exact
/// solution.  Errors if the exact solution or a needed derivative is
/// unavailable (probed at the domain center).
pub fn manufactured_source(prob: &ProblemSpec) -> Result<ScalarField> {
    if prob.exact.is_none() {
        return Err(Error::invalid("manufactured source needs an exact solution"));
    }
    let probe: Vec<f64> = prob
        .domain
        .lo
        .iter()
        .zip(&prob.domain.hi)
        .map(|(l, h)| 0.5 * (l + h))
        .collect();
    let p = prob.clone();
    let check = exact_term_sum(&p, &p.linear_terms, &probe).and_then(|acc| {
        if let Some(nl) = &p.nonlinear {
            exact_nonlinear(&p, nl, &probe).map(|v| acc + v)
        } else {
            Some(acc)
        }
    });
    if check.is_none() {
        return Err(Error::invalid(
            "exact solution is missing a derivative required by the operator",
        ));
    }
    Ok(field(move |x| {
        let mut v = exact_term_sum(&p, &p.linear_terms, x)
            .expect("derivative availability probed at construction");
        if let Some(nl) = &p.nonlinear {
            v += exact_nonlinear(&p, nl, x).expect("derivative availability probed");
        }
        v
    }))
}

/// Replace the source and every standard boundary datum with values derived
/// from the exact solution, making `u_exact` the solution of the returned
/// problem by construction.  Pair-difference data are left untouched.
pub fn with_manufactured_data(prob: &ProblemSpec) -> Result<ProblemSpec> {
    let mut out = prob.clone();
    out.source = manufactured_source(prob)?;
    for bc in &mut out.boundary {
        if let BoundaryCondition::Standard {
            operator,
            nonlinear,
            data,
            ..
        } = bc
        {
            let p = prob.clone();
            let op = operator.clone();
            let nl = nonlinear.clone();
            *data = field(move |x| {
                let mut v = exact_term_sum(&p, &op, x).expect("exact derivative available");
                if let Some(term) = &nl {
                    v += exact_nonlinear(&p, term, x).expect("exact derivative available");
                }
                v
            });
        }
    }
    Ok(out)
}

/// Evaluate the full residual of the *exact solution* (computed through its
/// analytic closures, not through any basis) on an `n`-per-direction grid:
/// the maximum absolute row value is returned.  This validates the operator
/// wiring of a problem -- for manufactured data it must vanish to roundoff.
///
/// Points where the exact solution cannot supply a required derivative
/// (e.g. a time derivative exactly at `t = 0` for a quadrature-based
/// solution) are skipped.
pub fn verify_manufactured(prob: &ProblemSpec, n: usize) -> Result<f64> {
    if prob.exact.is_none() {
        return Err(Error::invalid("verification needs an exact solution"));
    }
    let colloc = build_collocation(&prob.domain, n)?;
    let mut worst = 0.0f64;
    for p in 0..colloc.n_points() {
        let x = colloc.point(p);
        let lhs = exact_term_sum(prob, &prob.linear_terms, &x).and_then(|mut acc| {
            if let Some(nl) = &prob.nonlinear {
                acc += exact_nonlinear(prob, nl, &x)?;
            }
            Some(acc)
        });
        if let Some(lhs) = lhs {
            worst = worst.max((lhs - (prob.source)(&x)).abs());
        }
    }
    for bc in &prob.boundary {
        match bc {
            BoundaryCondition::Standard {
                coord,
                side,
                operator,
                nonlinear,
                data,
            } => {
                for &pt in colloc.face(*coord, *side) {
                    let x = colloc.point(pt);
                    let lhs = exact_term_sum(prob, operator, &x).and_then(|mut acc| {
                        if let Some(nl) = nonlinear {
                            acc += exact_nonlinear(prob, nl, &x)?;
                        }
                        Some(acc)
                    });
                    if let Some(lhs) = lhs {
                        worst = worst.max((lhs - data(&x)).abs());
                    }
                }
            }
            BoundaryCondition::PairDifference {
                coord,
                operator,
                data,
            } => {
                let low = colloc.face(*coord, Side::Low);
                let high = colloc.face(*coord, Side::High);
                for (&lo, &hi) in low.iter().zip(high) {
                    let x_lo = colloc.point(lo);
                    let x_hi = colloc.point(hi);
                    let v = exact_term_sum(prob, operator, &x_lo)
                        .zip(exact_term_sum(prob, operator, &x_hi));
                    if let Some((a, b)) = v {
                        worst = worst.max((a - b - data(&x_lo)).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}
