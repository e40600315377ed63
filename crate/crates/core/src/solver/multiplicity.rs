//! Search for several distinct pairs of negative-energy solutions.
//!
//! Starts are taken on the eigenfunction spheres selected by
//! [`select_sphere_radius`], optionally pushed a few fixed-point sweeps
//! towards a solution, and then driven to a zero of
//! `F(u) = -Delta_h u - D Phi(u)` by a damped Newton iteration on the
//! deflated system `M(u) F(u)`. The deflation factor
//! `M(u) = prod_z (||u - z||^-power + shift)` runs over the origin and
//! `+-u_i` for every solution found so far, which keeps Newton from
//! re-converging to known solutions. Acceptance of a candidate never relies
//! on `M`: residual, energy, ball membership and distance are recomputed
//! from the candidate alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::functional::{energy, energy_gradient, nonlinearity, ProblemParams};
use crate::grid::{GridDomain, GridFunction, PoissonSolver};

use super::sphere::{select_sphere_radius, SphereLevel, SphereProblem};
use super::{assemble_report, BandMatrix, ConstraintSet, SolveReport, SolverError};

/// Distinctness threshold on a unit-measure domain; scaled by `|Omega|^(1/2)`.
pub const DISTINCTNESS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct MultiplicityOptions {
    /// Residual tolerance `||F||_inf` for accepting a solution.
    pub tol: f64,
    pub newton_max_iter: usize,
    /// Numbers of fixed-point sweeps tried before Newton, in order.
    pub presteps: Vec<usize>,
    /// Eigen-directions tried beyond `want`.
    pub extra_directions: usize,
    /// Seeded random starts on the sphere in `span(e_1..e_want)`.
    pub random_starts: usize,
    pub shift: f64,
    pub power: f64,
    pub seed: u64,
}

impl Default for MultiplicityOptions {
    fn default() -> Self {
        MultiplicityOptions {
            tol: 1e-10,
            newton_max_iter: 100,
            presteps: vec![0, 3, 10],
            extra_directions: 6,
            random_starts: 8,
            shift: 1.0,
            power: 2.0,
            seed: 0,
        }
    }
}

/// Solutions found so far together with the deflation shape.
#[derive(Debug, Clone)]
pub struct DeflationState {
    found: Vec<GridFunction>,
    shift: f64,
    power: f64,
    threshold: f64,
}

impl DeflationState {
    pub fn new(domain: &GridDomain, shift: f64, power: f64) -> Result<Self, SolverError> {
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(SolverError::BadArgument(format!("deflation shift must be > 0 (got {shift})")));
        }
        if !(power >= 1.0 && power.is_finite()) {
            return Err(SolverError::BadArgument(format!("deflation power must be >= 1 (got {power})")));
        }
        Ok(DeflationState {
            found: Vec::new(),
            shift,
            power,
            threshold: DISTINCTNESS * domain.measure().sqrt(),
        })
    }

    pub fn found(&self) -> &[GridFunction] {
        &self.found
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Weighted-L2 distance from `u` to the origin and to `+-u_i`.
    pub fn min_distance(&self, u: &GridFunction) -> f64 {
        let zero = u.distance(&GridFunction::zeros(*u.domain()));
        self.found
            .iter()
            .flat_map(|f| [u.distance(f), u.combine(1.0, f, 1.0).distance(&GridFunction::zeros(*u.domain()))])
            .fold(zero, f64::min)
    }

    /// Records `u` if it is farther than the distinctness threshold from the
    /// origin and every recorded pair. Returns whether it was added.
    pub fn push(&mut self, u: GridFunction) -> bool {
        if self.min_distance(&u) <= self.threshold {
            return false;
        }
        self.found.push(u);
        true
    }

    fn targets(&self, domain: &GridDomain) -> Vec<GridFunction> {
        let mut t = vec![GridFunction::zeros(*domain)];
        for f in &self.found {
            t.push(f.clone());
            t.push(f.scaled(-1.0));
        }
        t
    }

    /// Deflation factor `M(u)`.
    pub fn factor(&self, u: &GridFunction) -> f64 {
        self.targets(u.domain())
            .iter()
            .map(|z| u.distance(z).powf(-self.power) + self.shift)
            .product()
    }

    /// `(grad M(u) . delta) / M(u)`, with the gradient taken with respect
    /// to the node values.
    fn log_derivative(&self, u: &GridFunction, delta: &GridFunction) -> f64 {
        self.targets(u.domain())
            .iter()
            .map(|z| {
                let diff = u.sub(z);
                let dist = diff.distance(&GridFunction::zeros(*u.domain()));
                let m = dist.powf(-self.power) + self.shift;
                -self.power * dist.powf(-self.power - 2.0) * diff.dot(delta) / m
            })
            .sum()
    }
}

/// Jacobian `-Delta_h - diag(D^2 Phi(u))` in band storage. `|u|` is floored
/// at `1e-12 max|u|` so the concave term stays finite.
fn jacobian(u: &GridFunction, params: &ProblemParams) -> BandMatrix {
    let domain = *u.domain();
    let n = domain.len();
    let band = domain.stride(0);
    let mut m = BandMatrix::zeros(n, band, band);
    let floor = 1e-12 * u.max_abs();
    let (p, q, mu) = (params.p(), params.q(), params.mu());
    for (i, &v) in u.values().iter().enumerate() {
        let a = v.abs().max(floor);
        let d = if a > 0.0 {
            (p - 1.0) * a.powf(p - 2.0) + mu * (q - 1.0) * a.powf(q - 2.0)
        } else {
            0.0
        };
        m.set(i, i, -d);
    }
    for axis in 0..domain.dim() {
        let inv_h2 = 1.0 / (domain.spacing()[axis] * domain.spacing()[axis]);
        domain.for_each_line(axis, |start, stride, len| {
            for j in 0..len {
                let i = start + j * stride;
                m.set(i, i, m.get(i, i) + 2.0 * inv_h2);
                if j > 0 {
                    m.set(i, i - stride, -inv_h2);
                }
                if j + 1 < len {
                    m.set(i, i + stride, -inv_h2);
                }
            }
        });
    }
    m
}

/// Damped Newton iteration for `F(u) = 0` deflated by `state`.
///
/// The step is the Newton step of `M F`, which is the plain step scaled by
/// `1 / (1 - beta)` with `beta = grad M . delta / M`. Step lengths halve
/// while the residual would grow by more than half. Returns the last
/// iterate, the iteration count and the residual history.
pub fn deflated_newton(
    start: &GridFunction,
    params: &ProblemParams,
    state: &DeflationState,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, usize, Vec<f64>), SolverError> {
    let mut u = start.clone();
    let mut f = energy_gradient(&u, params);
    let mut res = f.max_abs();
    let mut history = vec![res];
    for it in 0..max_iter {
        if res <= tol {
            return Ok((u, it, history));
        }
        let rhs: Vec<f64> = f.values().iter().map(|v| -v).collect();
        let Some(step) = jacobian(&u, params).solve(&rhs) else {
            break;
        };
        let Ok(mut delta) = GridFunction::new(*u.domain(), step) else {
            break;
        };
        let beta = state.log_derivative(&u, &delta);
        if (1.0 - beta).abs() > 1e-14 {
            delta = delta.scaled(1.0 / (1.0 - beta));
        }
        let mut t = 1.0;
        let (next, next_f, next_res) = loop {
            let cand = u.combine(1.0, &delta, t);
            let cf = energy_gradient(&cand, params);
            let cr = cf.max_abs();
            if (cr.is_finite() && cr < 1.5 * (1.0 - 1e-4 * t) * res) || t < 2e-3 {
                break (cand, cf, cr);
            }
            t *= 0.5;
        };
        if !next_res.is_finite() {
            break;
        }
        u = next;
        f = next_f;
        res = next_res;
        history.push(res);
    }
    if res <= tol {
        let n = history.len() - 1;
        return Ok((u, n, history));
    }
    Err(SolverError::MaxIterations {
        iterations: history.len() - 1,
        residual: res,
        last: Box::new(u),
    })
}

/// Flips `u` so that its first node with `|u| > 1e-12 max|u|` is positive.
pub fn normalize_sign(u: GridFunction) -> GridFunction {
    let cut = 1e-12 * u.max_abs();
    match u.values().iter().find(|v| v.abs() > cut) {
        Some(&v) if v < 0.0 => u.scaled(-1.0),
        _ => u,
    }
}

/// Result of [`multiplicity_search`].
#[derive(Debug, Clone)]
pub struct MultiplicityOutcome {
    /// One sign-normalized representative per pair, in discovery order.
    pub solutions: Vec<SolveReport>,
    /// Sphere radius used for the starts.
    pub rho: f64,
    /// Sphere level estimates for `j = 1..want` at `rho`.
    pub levels: Vec<SphereLevel>,
    /// `want - solutions.len()` when the search came up short.
    pub shortfall: usize,
    /// Number of Newton runs attempted.
    pub attempts: usize,
}

impl MultiplicityOutcome {
    fn empty() -> Self {
        MultiplicityOutcome {
            solutions: Vec::new(),
            rho: 0.0,
            levels: Vec::new(),
            shortfall: 0,
            attempts: 0,
        }
    }
}

fn fixed_point_sweeps(
    u: &GridFunction,
    params: &ProblemParams,
    solver: &PoissonSolver,
    count: usize,
) -> Result<GridFunction, SolverError> {
    let mut v = u.clone();
    for _ in 0..count {
        v = solver.solve(&nonlinearity(&v, params))?;
    }
    Ok(v)
}

/// Looks for `want` distinct pairs `+-u` of negative-energy solutions in
/// `k` (normally `K(r2)` without sign constraint).
pub fn multiplicity_search(
    domain: &GridDomain,
    params: &ProblemParams,
    k: &ConstraintSet,
    want: usize,
    opts: &MultiplicityOptions,
) -> Result<MultiplicityOutcome, SolverError> {
    if want == 0 {
        return Ok(MultiplicityOutcome::empty());
    }
    if params.mu() <= 0.0 {
        return Err(SolverError::BadArgument("multiplicity search needs mu > 0".into()));
    }
    if k.radius.is_nan() || k.radius <= 0.0 {
        return Err(SolverError::BadArgument("multiplicity search needs a positive radius".into()));
    }
    if k.nonnegative {
        return Err(SolverError::BadArgument(
            "multiplicity search runs without the sign constraint".into(),
        ));
    }
    let directions = (want + opts.extra_directions).min(domain.len());
    if want > domain.len() {
        return Err(SolverError::BadArgument(format!(
            "want = {want} exceeds the node count {}",
            domain.len()
        )));
    }
    let problem = SphereProblem::new(domain, params, directions)?;
    let (rho, levels) = select_sphere_radius(&problem, want, k.radius, opts.seed)?;

    let mut starts: Vec<GridFunction> = problem.basis().iter().map(|e| e.scaled(rho)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let mut a: Vec<f64> = (0..want).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.iter_mut().for_each(|x| *x /= n);
        starts.push(problem.point(&a, rho));
    }

    let solver = PoissonSolver::new(*domain);
    let mut state = DeflationState::new(domain, opts.shift, opts.power)?;
    let mut reports = Vec::new();
    let mut attempts = 0;
    'starts: for start in &starts {
        for &pre in &opts.presteps {
            if reports.len() == want {
                break 'starts;
            }
            attempts += 1;
            let u0 = fixed_point_sweeps(start, params, &solver, pre)?;
            let Ok((u, iterations, history)) =
                deflated_newton(&u0, params, &state, opts.tol, opts.newton_max_iter)
            else {
                continue;
            };
            if energy(&u, params) >= 0.0 || !k.contains(&u) {
                continue;
            }
            let u = normalize_sign(u);
            if state.push(u.clone()) {
                reports.push(assemble_report(
                    "multiplicity",
                    u,
                    params,
                    k,
                    iterations,
                    history,
                    opts.seed,
                ));
                break;
            }
        }
    }
    let shortfall = want - reports.len();
    Ok(MultiplicityOutcome {
        solutions: reports,
        rho,
        levels,
        shortfall,
        attempts,
    })
}
