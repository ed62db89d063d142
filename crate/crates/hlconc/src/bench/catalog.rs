//! The benchmark problem catalog: five boundary/initial value problems with
//! exact solutions and manufactured data.
//!
//! * `poisson_varcoef` -- 2D variable-coefficient Poisson equation on
//!   `[0, 1.6]^2` with `a(x, y) = 2 + sin(x + y)`, written in
//!   non-divergence form `a u_xx + a_x u_x + a u_yy + a_y u_y = f` so only
//!   analytic coefficient derivatives appear.  Exact solution
//!   `u = -sin(pi x^2) sin(pi y^2)`; source and Dirichlet data manufactured.
//! * `advection` -- `u_t - 2 u_x = 0` on `[0, 5] x [0, 40]`, periodic in
//!   `x`, with a tanh-of-cosine travelling profile.  Solved with block time
//!   marching.
//! * `helmholtz_nl` -- `u_xx + u_yy - 100 u + 10 cosh(u) = f` on
//!   `[0, 1.5]^2`, Dirichlet data, exact `u = 4 cos(pi x^2) cos(pi y^2)`.
//! * `burgers` -- viscous Burgers on `[-1, 1]` with `nu = 1/(100 pi)`,
//!   `u(x, 0) = -sin(pi x)`, homogeneous Dirichlet walls.  The exact
//!   solution is the classical integral-ratio form, evaluated by 200-point
//!   Gauss-Hermite quadrature after substituting `eta = 2 sqrt(nu t) s`;
//!   the two integrands share a max-exponent normalization because the
//!   factor `exp(-cos(pi y)/(2 pi nu)) = exp(-50 cos(pi y))` spans 43
//!   orders of magnitude.  Numerically sensitive; treat with respect.
//! * `kdv` -- `u_t - u u_x + u_xxx = f` on `[1, 1.5] x [1, 1.5]` with two
//!   Dirichlet rows, one `du/dx` row at the left wall, and an initial
//!   condition; exact `u = 4 sin(pi x^3) sin(pi t^3)`.  Exercises the
//!   third-derivative path.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::netcore::DerivKey;
use crate::pdespec::{
    field, with_manufactured_data, zero_field, BoundaryCondition, Domain, ExactSolution,
    LinearTerm, NonlinearTerm, ProblemSpec, Side,
};
use crate::{Error, Result};

/// Which benchmark problem a run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    PoissonVarcoef,
    Advection,
    HelmholtzNl,
    BurgersSmall,
    BurgersFull,
    Kdv,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] = [
        ProblemId::PoissonVarcoef,
        ProblemId::Advection,
        ProblemId::HelmholtzNl,
        ProblemId::BurgersSmall,
        ProblemId::BurgersFull,
        ProblemId::Kdv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::PoissonVarcoef => "poisson_varcoef",
            ProblemId::Advection => "advection",
            ProblemId::HelmholtzNl => "helmholtz_nl",
            ProblemId::BurgersSmall => "burgers_small",
            ProblemId::BurgersFull => "burgers_full",
            ProblemId::Kdv => "kdv",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown problem '{name}' (expected one of: {})",
                    Self::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }

    /// Construct the problem with its exact solution and data attached.
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ProblemId::PoissonVarcoef => poisson_varcoef(),
            ProblemId::Advection => advection(),
            ProblemId::HelmholtzNl => helmholtz_nl(),
            ProblemId::BurgersSmall => burgers(0.2),
            ProblemId::BurgersFull => burgers(1.0),
            ProblemId::Kdv => kdv(),
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn dirichlet_faces_2d() -> Vec<BoundaryCondition> {
    vec![
        BoundaryCondition::dirichlet(0, Side::Low, zero_field()),
        BoundaryCondition::dirichlet(0, Side::High, zero_field()),
        BoundaryCondition::dirichlet(1, Side::Low, zero_field()),
        BoundaryCondition::dirichlet(1, Side::High, zero_field()),
    ]
}

/// `u = -sin(pi x^2) sin(pi y^2)` and its pure derivatives.
fn poisson_exact() -> ExactSolution {
    let value = |x: &[f64]| -(PI * x[0] * x[0]).sin() * (PI * x[1] * x[1]).sin();
    let derivative = |x: &[f64], key: DerivKey| {
        let (w, other) = (x[key.coord], x[1 - key.coord]);
        let (s, c) = ((PI * w * w).sin(), (PI * w * w).cos());
        let s_other = (PI * other * other).sin();
        let dw = match key.order {
            1 => -2.0 * PI * w * c,
            2 => -2.0 * PI * c + 4.0 * PI * PI * w * w * s,
            3 => 12.0 * PI * PI * w * s + 8.0 * PI * PI * PI * w * w * w * c,
            _ => return None,
        };
        Some(dw * s_other)
    };
    ExactSolution::new(value, derivative)
}

fn poisson_varcoef() -> Result<ProblemSpec> {
    let a = |x: &[f64]| 2.0 + (x[0] + x[1]).sin();
    let da = |x: &[f64]| (x[0] + x[1]).cos();
    let prob = ProblemSpec {
        domain: Domain::new(vec![0.0, 0.0], vec![1.6, 1.6])?,
        linear_terms: vec![
            LinearTerm::varying(field(a), DerivKey::new(0, 2)),
            LinearTerm::varying(field(da), DerivKey::new(0, 1)),
            LinearTerm::varying(field(a), DerivKey::new(1, 2)),
            LinearTerm::varying(field(da), DerivKey::new(1, 1)),
        ],
        nonlinear: None,
        boundary: dirichlet_faces_2d(),
        source: zero_field(),
        exact: Some(poisson_exact()),
        time_dependent: false,
    };
    with_manufactured_data(&prob)
}

/// `u = 20 tanh(cos(2 pi / 5 (x + 2 t - 3)) / 10)`: satisfies
/// `u_t - 2 u_x = 0` identically and is 5-periodic in `x`.
fn advection_exact() -> ExactSolution {
    let w = 2.0 * PI / 5.0;
    let value = move |x: &[f64]| 20.0 * (0.1 * (w * (x[0] + 2.0 * x[1] - 3.0)).cos()).tanh();
    let derivative = move |x: &[f64], key: DerivKey| {
        if key.order != 1 {
            return None;
        }
        let z = w * (x[0] + 2.0 * x[1] - 3.0);
        let q = 0.1 * z.cos();
        let t = q.tanh();
        let dq_dx = -0.1 * w * z.sin();
        let du_dx = 20.0 * (1.0 - t * t) * dq_dx;
        match key.coord {
            0 => Some(du_dx),
            1 => Some(2.0 * du_dx),
            _ => None,
        }
    };
    ExactSolution::new(value, derivative)
}

fn advection() -> Result<ProblemSpec> {
    let exact = advection_exact();
    let ic = exact.value.clone();
    Ok(ProblemSpec {
        domain: Domain::new(vec![0.0, 0.0], vec![5.0, 40.0])?,
        linear_terms: vec![
            LinearTerm::constant(1.0, DerivKey::new(1, 1)),
            LinearTerm::constant(-2.0, DerivKey::new(0, 1)),
        ],
        nonlinear: None,
        boundary: vec![
            BoundaryCondition::periodic(0),
            BoundaryCondition::Standard {
                coord: 1,
                side: Side::Low,
                operator: vec![LinearTerm::constant(1.0, DerivKey::value())],
                nonlinear: None,
                data: ic,
            },
        ],
        source: zero_field(),
        exact: Some(exact),
        time_dependent: true,
    })
}

/// `u = 4 cos(pi x^2) cos(pi y^2)` and its pure derivatives.
fn helmholtz_exact() -> ExactSolution {
    let value = |x: &[f64]| 4.0 * (PI * x[0] * x[0]).cos() * (PI * x[1] * x[1]).cos();
    let derivative = |x: &[f64], key: DerivKey| {
        let (w, other) = (x[key.coord], x[1 - key.coord]);
        let (s, c) = ((PI * w * w).sin(), (PI * w * w).cos());
        let c_other = (PI * other * other).cos();
        let dw = match key.order {
            1 => -8.0 * PI * w * s,
            2 => -8.0 * PI * s - 16.0 * PI * PI * w * w * c,
            3 => -24.0 * PI * PI * w * c + 32.0 * PI * PI * PI * w * w * w * s,
            _ => return None,
        };
        Some(dw * c_other)
    };
    ExactSolution::new(value, derivative)
}

fn helmholtz_nl() -> Result<ProblemSpec> {
    let prob = ProblemSpec {
        domain: Domain::new(vec![0.0, 0.0], vec![1.5, 1.5])?,
        linear_terms: vec![
            LinearTerm::constant(1.0, DerivKey::new(0, 2)),
            LinearTerm::constant(1.0, DerivKey::new(1, 2)),
            LinearTerm::constant(-100.0, DerivKey::value()),
        ],
        nonlinear: Some(NonlinearTerm::of_u(
            |u| 10.0 * u.cosh(),
            |u| 10.0 * u.sinh(),
        )),
        boundary: dirichlet_faces_2d(),
        source: zero_field(),
        exact: Some(helmholtz_exact()),
        time_dependent: false,
    };
    with_manufactured_data(&prob)
}

/// Burgers viscosity `nu = 1/(100 pi)`.
pub const BURGERS_NU: f64 = 1.0 / (100.0 * PI);

/// Hermite functions `psi_k = Htilde_k exp(-x^2/2)` (orthonormal Hermite
/// polynomials damped by the half-weight) at `x`, returning
/// `(psi_{n-1}, psi_n, sum_{k<n} psi_k^2)`.  Every intermediate stays
/// O(1), so the recurrence is safe far out in the tails where the
/// polynomials themselves overflow.
fn hermite_functions(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0f64;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    let mut sum_sq = cur * cur;
    for k in 0..n {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
            - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if k + 1 < n {
            sum_sq += cur * cur;
        }
    }
    (prev, cur, sum_sq)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule (weight
/// `exp(-s^2)`).
///
/// Nodes start from the Golub-Welsch eigenvalues and are polished by a few
/// Newton steps on the orthonormal Hermite recurrence; the weights use the
/// Christoffel identity `w_i = exp(-x_i^2) / sum_k psi_k(x_i)^2`, which
/// keeps *relative* accuracy even for tail weights near `1e-160` (squared
/// eigenvector components lose them to roundoff, which matters here because
/// the Burgers integrand grows like `exp(+50)` exactly where the weights
/// are smallest).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eigen = jacobi.symmetric_eigen();
    let mut nodes: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut weights = Vec::with_capacity(n);
    for x in &mut nodes {
        for _ in 0..4 {
            let (psi_prev, psi_n, _) = hermite_functions(n, *x);
            let slope = (2.0 * n as f64).sqrt() * psi_prev;
            if slope != 0.0 {
                *x -= psi_n / slope;
            }
        }
        let (_, _, sum_sq) = hermite_functions(n, *x);
        weights.push((-*x * *x).exp() / sum_sq);
    }
    (nodes, weights)
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(200))
}

/// The Cole-Hopf integral-ratio solution of the Burgers problem,
/// differentiated analytically under the quadrature sum.
///
/// With `eta = 2 sqrt(nu t) s` the heat kernel becomes the Gauss-Hermite
/// weight, and
///
/// ```text
/// u(x, t) = -N / D,
/// N = sum_i w_i sin(pi y_i) f(y_i),    D = sum_i w_i f(y_i),
/// y_i = x - 2 sqrt(nu t) s_i,          f(y) = exp(-50 cos(pi y)).
/// ```
///
/// Every `f(y_i)` is computed as `exp(g_i - max_j g_j)`; the shared factor
/// cancels in the ratio and all of its derivatives.
struct BurgersExact;

impl BurgersExact {
    /// `(N, D, N_x, D_x, N_xx, D_xx, N_t, D_t)` with the normalization
    /// factored out.
    #[allow(clippy::type_complexity)]
    fn sums(x: f64, t: f64) -> (f64, f64, f64, f64, f64, f64, f64, f64) {
        let (nodes, weights) = hermite_rule();
        let c = 2.0 * (BURGERS_NU * t).sqrt();
        let dy_dt_factor = -(BURGERS_NU / t).sqrt();

        let g_max = nodes
            .iter()
            .map(|&s| -50.0 * (PI * (x - c * s)).cos())
            .fold(f64::NEG_INFINITY, f64::max);

        let (mut n, mut d) = (0.0, 0.0);
        let (mut nx, mut dx) = (0.0, 0.0);
        let (mut nxx, mut dxx) = (0.0, 0.0);
        let (mut nt, mut dt) = (0.0, 0.0);
        for (&s, &w) in nodes.iter().zip(weights) {
            let y = x - c * s;
            let (sin_py, cos_py) = (PI * y).sin_cos();
            let b = (-50.0 * cos_py - g_max).exp();
            let g1 = 50.0 * PI * sin_py; // (log f)'
            let g2 = 50.0 * PI * PI * cos_py; // (log f)''
            let a0 = sin_py;
            let a1 = PI * cos_py;
            let a2 = -PI * PI * sin_py;
            let b1 = g1 * b;
            let b2 = (g2 + g1 * g1) * b;
            let y_t = dy_dt_factor * s;

            n += w * a0 * b;
            d += w * b;
            nx += w * (a1 * b + a0 * b1);
            dx += w * b1;
            nxx += w * (a2 * b + 2.0 * a1 * b1 + a0 * b2);
            dxx += w * b2;
            nt += w * (a1 * b + a0 * b1) * y_t;
            dt += w * b1 * y_t;
        }
        (n, d, nx, dx, nxx, dxx, nt, dt)
    }

    fn value(x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            // The quadrature degenerates at t = 0; the limit is the
            // initial condition.
            return -(PI * x).sin();
        }
        let (n, d, ..) = Self::sums(x, t);
        -n / d
    }

    fn derivative(x: f64, t: f64, key: DerivKey) -> Option<f64> {
        if t <= 0.0 {
            return match (key.coord, key.order) {
                (0, 1) => Some(-PI * (PI * x).cos()),
                (0, 2) => Some(PI * PI * (PI * x).sin()),
                _ => None,
            };
        }
        let (n, d, nx, dx, nxx, dxx, nt, dt) = Self::sums(x, t);
        let r = n / d;
        let r_x = (nx - r * dx) / d;
        match (key.coord, key.order) {
            (0, 1) => Some(-r_x),
            (0, 2) => Some(-(nxx - 2.0 * r_x * dx - r * dxx) / d),
            (1, 1) => Some(-(nt - r * dt) / d),
            _ => None,
        }
    }
}

fn burgers_exact() -> ExactSolution {
    ExactSolution::new(
        |x: &[f64]| BurgersExact::value(x[0], x[1]),
        |x: &[f64], key| BurgersExact::derivative(x[0], x[1], key),
    )
}

fn burgers(t_end: f64) -> Result<ProblemSpec> {
    let exact = burgers_exact();
    let ic = exact.value.clone();
    Ok(ProblemSpec {
        domain: Domain::new(vec![-1.0, 0.0], vec![1.0, t_end])?,
        linear_terms: vec![
            LinearTerm::constant(1.0, DerivKey::new(1, 1)),
            LinearTerm::constant(-BURGERS_NU, DerivKey::new(0, 2)),
        ],
        nonlinear: Some(NonlinearTerm::of_u_and_grad(
            DerivKey::new(0, 1),
            |u, ux| u * ux,
            |_, ux| ux,
            |u, _| u,
        )),
        boundary: vec![
            BoundaryCondition::dirichlet(0, Side::Low, zero_field()),
            BoundaryCondition::dirichlet(0, Side::High, zero_field()),
            BoundaryCondition::Standard {
                coord: 1,
                side: Side::Low,
                operator: vec![LinearTerm::constant(1.0, DerivKey::value())],
                nonlinear: None,
                data: ic,
            },
        ],
        source: zero_field(),
        exact: Some(exact),
        time_dependent: true,
    })
}

/// `u = 4 sin(pi x^3) sin(pi t^3)` and its pure derivatives: the inner
/// cubic gives `g' = p' cos p`, `g'' = p'' cos p - p'^2 sin p`,
/// `g''' = p''' cos p - 3 p' p'' sin p - p'^3 cos p` with `p = pi w^3`.
fn kdv_exact() -> ExactSolution {
    fn axis_derivative(w: f64, order: usize) -> f64 {
        let p = PI * w * w * w;
        let p1 = 3.0 * PI * w * w;
        let p2 = 6.0 * PI * w;
        let p3 = 6.0 * PI;
        let (s, c) = p.sin_cos();
        match order {
            0 => s,
            1 => p1 * c,
            2 => p2 * c - p1 * p1 * s,
            3 => p3 * c - 3.0 * p1 * p2 * s - p1 * p1 * p1 * c,
            _ => f64::NAN,
        }
    }
    let value = |x: &[f64]| 4.0 * axis_derivative(x[0], 0) * axis_derivative(x[1], 0);
    let derivative = |x: &[f64], key: DerivKey| {
        if key.order > 3 {
            return None;
        }
        let this = axis_derivative(x[key.coord], key.order);
        let other = axis_derivative(x[1 - key.coord], 0);
        Some(4.0 * this * other)
    };
    ExactSolution::new(value, derivative)
}

fn kdv() -> Result<ProblemSpec> {
    let prob = ProblemSpec {
        domain: Domain::new(vec![1.0, 1.0], vec![1.5, 1.5])?,
        linear_terms: vec![
            LinearTerm::constant(1.0, DerivKey::new(1, 1)),
            LinearTerm::constant(1.0, DerivKey::new(0, 3)),
        ],
        nonlinear: Some(NonlinearTerm::of_u_and_grad(
            DerivKey::new(0, 1),
            |u, ux| -u * ux,
            |_, ux| -ux,
            |u, _| -u,
        )),
        boundary: vec![
            BoundaryCondition::dirichlet(0, Side::Low, zero_field()),
            BoundaryCondition::dirichlet(0, Side::High, zero_field()),
            BoundaryCondition::Standard {
                coord: 0,
                side: Side::Low,
                operator: vec![LinearTerm::constant(1.0, DerivKey::new(0, 1))],
                nonlinear: None,
                data: zero_field(),
            },
            BoundaryCondition::dirichlet(1, Side::Low, zero_field()),
        ],
        source: zero_field(),
        exact: Some(kdv_exact()),
        time_dependent: true,
    };
    with_manufactured_data(&prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdespec::verify_manufactured;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (nodes, weights) = gauss_hermite(40);
        let m0: f64 = weights.iter().sum();
        let m2: f64 = nodes.iter().zip(&weights).map(|(s, w)| w * s * s).sum();
        let m4: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * s * s * s * s)
            .sum();
        assert_relative_eq!(m0, PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m2, PI.sqrt() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(m4, 0.75 * PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn poisson_exact_vanishes_on_low_faces() {
        let exact = poisson_exact();
        for v in [0.0, 0.3, 1.0, 1.6] {
            assert_eq!((exact.value)(&[v, 0.0]), 0.0);
            assert_eq!((exact.value)(&[0.0, v]), 0.0);
        }
    }

    #[test]
    fn advection_exact_at_crest() {
        let exact = advection_exact();
        // Direct evaluation: 20 tanh(0.1 cos 0) = 20 tanh(0.1).
        let direct = 20.0 * 0.1f64.tanh();
        assert_relative_eq!((exact.value)(&[3.0, 0.0]), direct, epsilon = 1e-14);
        // Initial profile matches the stated initial condition.
        let w = 2.0 * PI / 5.0;
        for x in [0.0, 1.3, 2.9, 5.0] {
            let ic = 20.0 * (0.1 * (w * (x - 3.0)).cos()).tanh();
            assert_relative_eq!((exact.value)(&[x, 0.0]), ic, epsilon = 1e-14);
        }
        // 5-periodicity backs the periodic closure rows.
        for t in [0.0, 7.3, 40.0] {
            assert_relative_eq!(
                (exact.value)(&[0.0, t]),
                (exact.value)(&[5.0, t]),
                epsilon = 1e-13
            );
        }
    }

    /// Derivative closures of every catalog problem agree with central
    /// finite differences of their own value function.
    #[test]
    fn exact_derivatives_match_finite_differences() {
        let cases: Vec<(ProblemSpec, Vec<(usize, usize)>, &[f64])> = vec![
            (
                poisson_varcoef().unwrap(),
                vec![(0, 1), (0, 2), (1, 1), (1, 2)],
                &[0.7, 1.1],
            ),
            (advection().unwrap(), vec![(0, 1), (1, 1)], &[2.3, 0.4]),
            (
                helmholtz_nl().unwrap(),
                vec![(0, 1), (0, 2), (1, 1), (1, 2)],
                &[0.9, 0.5],
            ),
            (
                burgers(0.2).unwrap(),
                vec![(0, 1), (0, 2), (1, 1)],
                &[0.31, 0.13],
            ),
            (
                kdv().unwrap(),
                vec![(0, 1), (0, 2), (0, 3), (1, 1)],
                &[1.2, 1.3],
            ),
        ];
        for (prob, keys, point) in cases {
            let exact = prob.exact.as_ref().unwrap();
            for (coord, order) in keys {
                let key = DerivKey::new(coord, order);
                let got = (exact.derivative)(point, key).unwrap();
                let f = |h: f64| {
                    let mut p = point.to_vec();
                    p[coord] += h;
                    (exact.value)(&p)
                };
                let h = 1e-4;
                let fd = match order {
                    1 => (f(h) - f(-h)) / (2.0 * h),
                    2 => (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h),
                    3 => {
                        let h = 1e-2;
                        (f(-3.0 * h) - 8.0 * f(-2.0 * h) + 13.0 * f(-h) - 13.0 * f(h)
                            + 8.0 * f(2.0 * h)
                            - f(3.0 * h))
                            / (8.0 * h * h * h)
                    }
                    _ => unreachable!(),
                };
                let scale = 1.0 + got.abs();
                assert!(
                    (got - fd).abs() <= 2e-4 * scale,
                    "{key:?} at {point:?}: closed form {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn burgers_value_approaches_initial_condition() {
        assert_relative_eq!(BurgersExact::value(0.5, 0.0), -1.0, epsilon = 1e-15);
        for x in [-0.7, -0.2, 0.5, 0.9] {
            let limit = BurgersExact::value(x, 1e-10);
            assert_relative_eq!(limit, -(PI * x).sin(), epsilon = 1e-5);
        }
    }

    #[test]
    fn burgers_walls_stay_near_zero() {
        for t in [0.05, 0.1, 0.2] {
            assert!(BurgersExact::value(-1.0, t).abs() <= 1e-10);
            assert!(BurgersExact::value(1.0, t).abs() <= 1e-10);
        }
    }

    /// Adaptive-Simpson oracle on the eta-form of the integrals, compared
    /// against the Gauss-Hermite evaluation.
    #[test]
    fn burgers_quadrature_matches_adaptive_oracle() {
        fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, fa: f64, fb: f64, fm: f64, tol: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, fa, fm, flm, tol / 2.0, depth - 1)
                    + simpson(f, m, b, fm, fb, frm, tol / 2.0, depth - 1)
            }
        }
        fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
            let m = 0.5 * (a + b);
            simpson(f, a, b, f(a), f(b), f(m), tol, 40)
        }

        for (x, t) in [(0.0, 0.5), (0.3, 0.1), (-0.6, 0.2), (0.5, 0.5)] {
            let span = 16.0 * (2.0 * BURGERS_NU * t).sqrt() + 0.05;
            // Shared log-scale normalization so the scaled integrands are
            // O(1) near their peak and the absolute Simpson tolerance is
            // meaningful.
            let exponent =
                move |eta: f64| -50.0 * (PI * (x - eta)).cos() - eta * eta / (4.0 * BURGERS_NU * t);
            let peak = (0..=4096)
                .map(|i| exponent(-span + 2.0 * span * i as f64 / 4096.0))
                .fold(f64::NEG_INFINITY, f64::max);
            let num = move |eta: f64| (PI * (x - eta)).sin() * (exponent(eta) - peak).exp();
            let den = move |eta: f64| (exponent(eta) - peak).exp();
            let n = integrate(num, -span, span, 1e-15);
            let d = integrate(den, -span, span, 1e-15);
            let oracle = -n / d;
            let gh = BurgersExact::value(x, t);
            assert!(
                (gh - oracle).abs() <= 1e-10,
                "({x}, {t}): gh {gh} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn kdv_exact_evaluates() {
        let exact = kdv_exact();
        // sin(pi) factors make the initial line essentially zero.
        assert!((exact.value)(&[1.2, 1.0]).abs() < 1e-14);
        let u = (exact.value)(&[1.3, 1.4]);
        let direct = 4.0 * (PI * 1.3f64.powi(3)).sin() * (PI * 1.4f64.powi(3)).sin();
        assert_relative_eq!(u, direct, epsilon = 1e-14);
    }

    /// Every benchmark's manufactured data must satisfy its own equations
    /// through the exact-solution closures.  The quadrature-based Burgers
    /// solution is checked at a looser tolerance: its derivatives carry the
    /// Gauss-Hermite truncation error.
    #[test]
    fn manufactured_wiring_is_consistent() {
        for id in ProblemId::ALL {
            let prob = id.build().unwrap();
            let worst = verify_manufactured(&prob, 13).unwrap();
            let tol = match id {
                ProblemId::BurgersSmall | ProblemId::BurgersFull => 1e-7,
                _ => 1e-10,
            };
            assert!(worst <= tol, "{id}: wiring residual {worst}");
        }
    }

    /// The spec-level manufactured-source spot checks: independent symbolic
    /// derivation, coded separately from the catalog closures.
    #[test]
    fn manufactured_source_spot_values() {
        // Poisson at (0.5, 0.5): f = a (u_xx + u_yy) + a_x u_x + a_y u_y.
        let (x, y) = (0.5, 0.5);
        let (sx, cx) = ((PI * x * x).sin(), (PI * x * x).cos());
        let (sy, cy) = ((PI * y * y).sin(), (PI * y * y).cos());
        let u_x = -2.0 * PI * x * cx * sy;
        let u_y = -2.0 * PI * y * cy * sx;
        let u_xx = (-2.0 * PI * cx + 4.0 * PI * PI * x * x * sx) * sy;
        let u_yy = (-2.0 * PI * cy + 4.0 * PI * PI * y * y * sy) * sx;
        let a = 2.0 + (x + y).sin();
        let da = (x + y).cos();
        let expected = a * (u_xx + u_yy) + da * u_x + da * u_y;
        let prob = poisson_varcoef().unwrap();
        assert_relative_eq!((prob.source)(&[x, y]), expected, epsilon = 1e-10);

        // Nonlinear Helmholtz at (1.0, 1.0):
        // f = u_xx + u_yy - 100 u + 10 cosh(u).
        let (x, y) = (1.0, 1.0);
        let (sx, cx) = ((PI * x * x).sin(), (PI * x * x).cos());
        let (sy, cy) = ((PI * y * y).sin(), (PI * y * y).cos());
        let u = 4.0 * cx * cy;
        let u_xx = (-8.0 * PI * sx - 16.0 * PI * PI * x * x * cx) * cy;
        let u_yy = (-8.0 * PI * sy - 16.0 * PI * PI * y * y * cy) * cx;
        let expected = u_xx + u_yy - 100.0 * u + 10.0 * u.cosh();
        let prob = helmholtz_nl().unwrap();
        assert_relative_eq!((prob.source)(&[x, y]), expected, epsilon = 1e-10);
    }
}
