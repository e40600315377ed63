use crate::functional::{nonlinearity, residual_inf, ProblemParams};
use crate::grid::{w2n_norm, GridFunction, PoissonSolver};

use super::{assemble_report, ConstraintSet, SolveReport, SolverError, BALL_SLACK};

const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Damped iteration `u <- (1 - theta) u + theta T(u)` with
/// `T(u) = (-Delta_h)^{-1} D Phi(u)`.
///
/// `theta` starts at 1, halves whenever the residual would grow and doubles
/// back after accepted steps. Every `T(u_k)` and every iterate is checked
/// against the ball `K(r)`; leaving it is reported as
/// [`SolverError::BallViolated`].
pub fn fixed_point_solve(
    u0: &GridFunction,
    params: &ProblemParams,
    r: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, SolverError> {
    let start_norm = w2n_norm(u0);
    if start_norm > r * (1.0 + 1e-12) {
        return Err(SolverError::InfeasibleStart {
            norm: start_norm,
            radius: r,
        });
    }
    let nonnegative = u0.min_value() >= 0.0;
    let constraint = ConstraintSet::new(r, nonnegative);
    let solver = PoissonSolver::new(*u0.domain());

    let mut u = u0.clone();
    let mut res = residual_inf(&u, params);
    let mut history = vec![start_norm];
    let mut theta = 1.0f64;
    let mut iterations = 0;
    while res > tol {
        if iterations == max_iter {
            return Err(SolverError::MaxIterations {
                iterations,
                residual: res,
                last: Box::new(u),
            });
        }
        iterations += 1;
        let image = solver.solve(&nonlinearity(&u, params))?;
        let image_norm = w2n_norm(&image);
        if image_norm > r + BALL_SLACK {
            return Err(SolverError::BallViolated {
                iteration: iterations,
                norm: image_norm,
                radius: r,
            });
        }
        let (next, next_res) = loop {
            let cand = if theta == 1.0 {
                image.clone()
            } else {
                u.combine(1.0 - theta, &image, theta)
            };
            let cand_res = residual_inf(&cand, params);
            if cand_res <= res || theta <= MIN_DAMPING {
                break (cand, cand_res);
            }
            theta *= 0.5;
        };
        let norm = w2n_norm(&next);
        if norm > r + BALL_SLACK {
            return Err(SolverError::BallViolated {
                iteration: iterations,
                norm,
                radius: r,
            });
        }
        history.push(norm);
        u = next;
        res = next_res;
        theta = (2.0 * theta).min(1.0);
    }
    Ok(assemble_report(
        "fixed_point",
        u,
        params,
        &constraint,
        iterations,
        history,
        0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    #[test]
    fn origin_is_a_fixed_point() {
        let d = GridDomain::unit(2, 6).unwrap();
        let pr = ProblemParams::new(4.0, 1.5, 1.0).unwrap();
        let rep = fixed_point_solve(&GridFunction::zeros(d), &pr, 1.0, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.residual_inf, 0.0);
    }

    #[test]
    fn rejects_start_outside_ball() {
        let d = GridDomain::unit(1, 6).unwrap();
        let pr = ProblemParams::new(3.0, 1.5, 1.0).unwrap();
        let u = GridFunction::constant(d, 1.0);
        assert!(matches!(
            fixed_point_solve(&u, &pr, 1e-3, 1e-10, 10),
            Err(SolverError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn small_ball_is_reported_as_violated() {
        // a radius far above r2 lets the superlinear term push T(u) out
        let d = GridDomain::unit(1, 15).unwrap();
        let pr = ProblemParams::new(3.0, 1.5, 0.1).unwrap();
        let u = GridFunction::from_fn(d, |x| 400.0 * x[0] * (1.0 - x[0])).unwrap();
        let r = w2n_norm(&u);
        let err = fixed_point_solve(&u, &pr, r, 1e-10, 10).unwrap_err();
        assert!(matches!(err, SolverError::BallViolated { iteration: 1, .. }));
        assert_eq!(err.exit_code(), 3);
    }
}
