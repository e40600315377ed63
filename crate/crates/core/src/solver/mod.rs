//! Constructive solvers on the constraint balls `K(r)`.
//!
//! * [`fixed_point_solve`]: damped iteration of `u -> (-Delta_h)^{-1} D Phi(u)`,
//!   checking at every step that the iterates stay in the ball.
//! * [`minimize_positive`]: projected descent of the energy over the
//!   nonnegative part of `K(r)`.
//! * [`sphere_level_estimate`] and [`multiplicity_search`]: sphere minimax
//!   levels in eigenfunction spans and a deflated search for several
//!   negative-energy solution pairs.

mod banded;
mod descent;
mod fixed_point;
mod multiplicity;
mod sphere;

pub use banded::BandMatrix;
pub use descent::{minimize_positive, positive_witness, projected_descent, DescentOptions, WITNESS_SCALES};
pub use fixed_point::fixed_point_solve;
pub use multiplicity::{
    deflated_newton, multiplicity_search, normalize_sign, DeflationState, DISTINCTNESS, MultiplicityOptions, MultiplicityOutcome,
};
pub use sphere::{select_sphere_radius, sphere_level_estimate, SphereLevel, SphereProblem};

use std::fmt::Write as _;

use thiserror::Error;

use crate::functional::{
    energy, residual_inf, szulkin_certificate, CertificateError, ProblemParams,
};
use crate::grid::{w2n_norm, GridError, GridFunction};

/// Default number of random trial points in solver certificates.
pub const CERTIFICATE_TRIALS: usize = 64;

/// Slack allowed on the ball radius when checking invariance.
pub const BALL_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("max_iter exceeded after {iterations} iterations (residual {residual:e})")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        last: Box<GridFunction>,
    },
    #[error("ball violated at iteration {iteration}: W2n norm {norm:.15e} > radius {radius:.15e}")]
    BallViolated {
        iteration: usize,
        norm: f64,
        radius: f64,
    },
    #[error("descent stalled above tolerance after {iterations} iterations (step measure {step:e})")]
    Stalled { iterations: usize, step: f64 },
    #[error("no negative-energy witness found (best witness energy {best:e})")]
    NoNegativeWitness { best: f64 },
    #[error("starting point is outside the constraint set (W2n norm {norm:e}, radius {radius:e})")]
    InfeasibleStart { norm: f64, radius: f64 },
    #[error("sphere exits K: maximal W2n norm {max_w2n:e} exceeds radius {radius:e}")]
    SphereExitsK { max_w2n: f64, radius: f64 },
    #[error("no sphere radius on the grid gives negative levels up to dimension {k}")]
    NoNegativeSphere { k: usize },
    #[error("{0}")]
    BadArgument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

impl SolverError {
    /// Process exit status associated with the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolverError::BallViolated { .. } => 3,
            SolverError::BadArgument(_) => 1,
            _ => 2,
        }
    }
}

/// `K(r)`, optionally intersected with the nonnegative cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    pub radius: f64,
    pub nonnegative: bool,
}

impl ConstraintSet {
    pub fn new(radius: f64, nonnegative: bool) -> Self {
        ConstraintSet {
            radius,
            nonnegative,
        }
    }

    pub fn contains(&self, u: &GridFunction) -> bool {
        if self.nonnegative && u.min_value() < -1e-12 {
            return false;
        }
        w2n_norm(u) <= self.radius * (1.0 + 1e-12)
    }
}

/// Retraction onto `k`: clamp negatives (sign-constrained sets), then scale
/// radially into the ball. Feasible inputs are returned unchanged.
pub fn project_feasible(u: &GridFunction, k: &ConstraintSet) -> GridFunction {
    if k.contains(u) {
        return u.clone();
    }
    let clamped = if k.nonnegative {
        u.map(|v| v.max(0.0))
    } else {
        u.clone()
    };
    let norm = w2n_norm(&clamped);
    if norm > k.radius {
        let scaled = clamped.scaled(k.radius / norm);
        // rounding can leave the scaled point a hair outside
        if w2n_norm(&scaled) > k.radius * (1.0 + 1e-12) {
            return clamped.scaled(k.radius / norm * (1.0 - 1e-13));
        }
        scaled
    } else {
        clamped
    }
}

/// Diagnostics for a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: String,
    pub solution: GridFunction,
    /// `||-Delta_h u - D Phi(u)||_inf`.
    pub residual_inf: f64,
    pub energy: f64,
    pub iterations: usize,
    pub w2n_norm: f64,
    pub radius: f64,
    pub in_ball: bool,
    /// Whether the ball constraint is active (`||u||_W2n >= 0.99 r`).
    pub ball_active: bool,
    pub min_value: f64,
    pub certificate_slack: f64,
    pub certificate_tolerance: f64,
    /// Set when the constraint set collapses to `{0}`.
    pub degenerate: bool,
    /// Per-iteration trace: W2n norms for the fixed point, energies for descents.
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn certified(&self) -> bool {
        self.certificate_slack >= -self.certificate_tolerance
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method = {}", self.method);
        let _ = writeln!(s, "residual_inf = {:.16e}", self.residual_inf);
        let _ = writeln!(s, "energy = {:.16e}", self.energy);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "w2n_norm = {:.16e}", self.w2n_norm);
        let _ = writeln!(s, "radius = {:.16e}", self.radius);
        let _ = writeln!(s, "in_ball = {}", self.in_ball);
        let _ = writeln!(s, "ball_active = {}", self.ball_active);
        let _ = writeln!(s, "min_value = {:.16e}", self.min_value);
        let _ = writeln!(s, "certificate_slack = {:.16e}", self.certificate_slack);
        let _ = writeln!(s, "certificate_tolerance = {:.16e}", self.certificate_tolerance);
        let _ = writeln!(s, "degenerate = {}", self.degenerate);
        s
    }
}

/// Builds a [`SolveReport`] by recomputing every diagnostic from `u`.
pub(crate) fn assemble_report(
    method: &str,
    u: GridFunction,
    params: &ProblemParams,
    k: &ConstraintSet,
    iterations: usize,
    history: Vec<f64>,
    seed: u64,
) -> SolveReport {
    let norm = w2n_norm(&u);
    let (slack, tol) = match szulkin_certificate(&u, params, k, CERTIFICATE_TRIALS, seed) {
        Ok(c) => (c.min_slack, c.tolerance),
        Err(_) => (f64::NEG_INFINITY, crate::functional::certificate_tolerance(&u)),
    };
    SolveReport {
        method: method.to_string(),
        residual_inf: residual_inf(&u, params),
        energy: energy(&u, params),
        iterations,
        w2n_norm: norm,
        radius: k.radius,
        in_ball: norm <= k.radius + BALL_SLACK,
        ball_active: norm >= 0.99 * k.radius,
        min_value: u.min_value(),
        certificate_slack: slack,
        certificate_tolerance: tol,
        degenerate: k.radius == 0.0,
        history,
        solution: u,
    }
}

/// Replaces the certificate fields of `report` by a certificate with
/// `trials` random trial points.
pub fn recertify(
    report: &mut SolveReport,
    params: &ProblemParams,
    k: &ConstraintSet,
    trials: usize,
    seed: u64,
) {
    let (slack, tol) = match szulkin_certificate(&report.solution, params, k, trials, seed) {
        Ok(c) => (c.min_slack, c.tolerance),
        Err(_) => (
            f64::NEG_INFINITY,
            crate::functional::certificate_tolerance(&report.solution),
        ),
    };
    report.certificate_slack = slack;
    report.certificate_tolerance = tol;
}

/// Recomputes all diagnostics for `u`; never modifies it.
pub fn verify_solution(
    u: &GridFunction,
    params: &ProblemParams,
    k: &ConstraintSet,
    seed: u64,
) -> SolveReport {
    assemble_report("verify", u.clone(), params, k, 0, Vec::new(), seed)
}
