//! Hidden-layer concatenated extreme learning machines (HLConcELM) for
//! computational PDEs.
//!
//! An HLConcELM is a feedforward network whose hidden-layer coefficients are
//! random and fixed, and whose *every* hidden node (not just the last hidden
//! layer) is exposed to the linear output layer through a logical
//! concatenation layer.  The union of all hidden-node output fields forms a
//! random basis; a PDE boundary/initial value problem is discretized by
//! enforcing the equations on collocation points, and the output weights are
//! the least-squares solution of the resulting rectangular system -- linear
//! least squares for linear problems, Gauss-Newton with a trust region for
//! nonlinear ones.
//!
//! The crate is organized along the pipeline:
//!
//! * [`jets`] -- forward-mode truncated-Taylor arithmetic; supplies exact
//!   derivatives of the hidden basis fields up to order 3.
//! * [`netcore`] -- network representation: architecture, random coefficient
//!   assignment, concatenated-basis evaluation, and the capacity-preserving
//!   network surgeries (appending layers, widening layers, extending the
//!   coefficient vector).
//! * [`lstsq`] -- dense minimum-norm linear least squares and trust-region
//!   Gauss-Newton.
//! * [`pdespec`] -- declarative problem definitions and assembly of the
//!   collocation residual vector and Jacobian matrix.
//! * [`solver`] -- end-to-end drivers: single-domain solve, block time
//!   marching, domain decomposition with C^k interface continuity, and the
//!   error-evaluation protocol.
//! * [`detune`] -- differential-evolution search over the hidden magnitude
//!   vector.
//! * [`bench`] -- the benchmark problem catalog, run configuration, and
//!   report emission used by the `hlconc` CLI.

pub mod bench;
pub mod detune;
pub mod jets;
pub mod lstsq;
pub mod netcore;
pub mod pdespec;
pub mod solver;

use nalgebra::DVector;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Residual/Jacobian assembly needed a derivative that the cached basis
    /// does not contain.
    #[error("assembly error: basis is missing derivative d^{order}/dx_{coord}^{order}")]
    MissingDerivative { coord: usize, order: usize },

    /// A basis or residual evaluation produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// The nonlinear solver hit non-finite values mid-iteration; carries the
    /// last finite iterate.
    #[error("solver diverged after {iterations} iterations: {reason}")]
    SolverDiverged {
        reason: String,
        iterations: usize,
        last_beta: DVector<f64>,
    },

    /// A driver-level failure, tagged with the block or subdomain it
    /// occurred in.
    #[error("{context}: {source}")]
    InContext {
        context: String,
        #[source]
        source: Box<Error>,
    },

    /// Run-configuration text could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_context(self, context: impl Into<String>) -> Self {
        Error::InContext {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
