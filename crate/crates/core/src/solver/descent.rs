use crate::functional::{energy, energy_gradient, phi, psi, ProblemParams};
use crate::grid::{eigenpairs, neg_laplacian, GridDomain, GridFunction, PoissonSolver};

use super::{assemble_report, project_feasible, ConstraintSet, SolveReport, SolverError};

/// Witness scalings for the negative-energy check.
pub const WITNESS_SCALES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Stop when the projected step, measured as `||-Delta_h (u - P(u - d))||_inf`,
    /// falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-10,
            max_iter: 5000,
            seed: 0,
        }
    }
}

/// Roundoff allowance when comparing two energies near `u`.
fn energy_noise(u: &GridFunction, params: &ProblemParams) -> f64 {
    1e-14 * (psi(u) + phi(u, params))
}

/// Projected descent of the energy over `k`.
///
/// Each step moves along the H^1_0 Riesz representative of the gradient,
/// `d = (-Delta_h)^{-1} (-Delta_h u - D Phi(u))`, with backtracking on the
/// energy and a retraction onto `k` after the step. A full step lands on
/// the fixed-point image `T(u)`. Returns the final point, the iteration
/// count and the accepted energies.
pub fn projected_descent(
    start: &GridFunction,
    params: &ProblemParams,
    k: &ConstraintSet,
    opts: &DescentOptions,
) -> Result<(GridFunction, usize, Vec<f64>), SolverError> {
    let solver = PoissonSolver::new(*start.domain());
    let mut u = project_feasible(start, k);
    let mut e = energy(&u, params);
    let mut history = vec![e];
    let mut tau = 1.0f64;
    for it in 0..=opts.max_iter {
        let d = solver.solve(&energy_gradient(&u, params))?;
        let full = project_feasible(&u.sub(&d), k);
        let step = neg_laplacian(&u.sub(&full)).max_abs();
        if step <= opts.tol {
            return Ok((u, it, history));
        }
        if it == opts.max_iter {
            break;
        }
        let noise = energy_noise(&u, params);
        let mut t = (2.0 * tau).min(1.0);
        let accepted = loop {
            let cand = if t == 1.0 {
                full.clone()
            } else {
                project_feasible(&u.combine(1.0, &d, -t), k)
            };
            let ce = energy(&cand, params);
            if ce <= e + noise {
                break Some((cand, ce));
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((cand, ce)) = accepted else {
            return Err(SolverError::Stalled {
                iterations: it,
                step,
            });
        };
        tau = t;
        u = cand;
        e = ce;
        history.push(e);
    }
    let d = solver.solve(&energy_gradient(&u, params))?;
    let step = neg_laplacian(&u.sub(&project_feasible(&u.sub(&d), k))).max_abs();
    Err(SolverError::Stalled {
        iterations: opts.max_iter,
        step,
    })
}

/// Best of the points `t e1`, `t` in [`WITNESS_SCALES`], retracted onto `k`,
/// with `e1` the positive first eigenfunction normalized in H^1_0. Fails
/// unless its energy is negative.
pub fn positive_witness(
    domain: &GridDomain,
    params: &ProblemParams,
    k: &ConstraintSet,
) -> Result<(GridFunction, f64), SolverError> {
    let e1 = eigenpairs(domain, 1)?.remove(0).eigenfunction;
    let (witness, best) = WITNESS_SCALES
        .iter()
        .map(|&t| {
            let v = project_feasible(&e1.scaled(t), k);
            let ev = energy(&v, params);
            (v, ev)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("witness set is nonempty");
    if best >= 0.0 {
        return Err(SolverError::NoNegativeWitness { best });
    }
    Ok((witness, best))
}

/// Minimizes the energy over `k` (normally the nonnegative part of `K(r2)`)
/// and returns a negative-energy critical point.
///
/// Without an explicit start the descent begins at [`positive_witness`].
pub fn minimize_positive(
    params: &ProblemParams,
    k: &ConstraintSet,
    domain: &GridDomain,
    start: Option<&GridFunction>,
    opts: &DescentOptions,
) -> Result<SolveReport, SolverError> {
    if k.radius == 0.0 {
        let mut rep = assemble_report(
            "minimize",
            GridFunction::zeros(*domain),
            params,
            k,
            0,
            vec![0.0],
            opts.seed,
        );
        rep.degenerate = true;
        return Ok(rep);
    }
    let (witness, _) = positive_witness(domain, params, k)?;
    let start = match start {
        Some(s) => {
            if s.domain() != domain {
                return Err(crate::grid::GridError::DomainMismatch.into());
            }
            s.clone()
        }
        None => witness,
    };
    let (u, iterations, history) = projected_descent(&start, params, k, opts)?;
    let report = assemble_report("minimize", u, params, k, iterations, history, opts.seed);
    if report.energy >= 0.0 {
        return Err(SolverError::NoNegativeWitness {
            best: report.energy,
        });
    }
    Ok(report)
}
