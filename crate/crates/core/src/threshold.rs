//! Embedding constants and the invariance threshold.
//!
//! For `u` in the ball `K(r) = { ||Delta_h u||_{L^n} <= r }` the source term
//! obeys `||D Phi(u)||_{L^n} <= C1 r^{p-1} + mu C2 r^{q-1}` where
//! `C1 = d1^{p-1}`, `C2 = d2^{q-1}` and `d1`, `d2` are the embedding
//! constants of the W^{2,n} ball into `L^{n(p-1)}` and `L^{n(q-1)}`. The
//! Poisson solve maps `K(r)` into itself exactly when
//! `h(r) = C1 r^{p-1} + mu C2 r^{q-1} - r <= 0`, which is what this module
//! locates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::functional::ProblemParams;
use crate::grid::{
    eigenpairs, power_mean, power_sum, GridDomain, GridError, GridFunction, PoissonSolver,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("embedding exponent must be positive (got {0})")]
    BadExponent(f64),
    #[error("embedding constants must be positive and finite (d1 = {d1}, d2 = {d2})")]
    BadConstants { d1: f64, d2: f64 },
    #[error("embedding ascent did not settle on any start (best quotient {best:e})")]
    NonConvergence { best: f64 },
    #[error("closed-form mu* {closed:.15e} disagrees with bisection oracle {oracle:.15e}")]
    CrossCheck { closed: f64, oracle: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `d1`, `d2` together with `C1 = d1^{p-1}` and `C2 = d2^{q-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants {
    pub d1: f64,
    pub d2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl EmbeddingConstants {
    pub fn from_d(d1: f64, d2: f64, params: &ProblemParams) -> Result<Self, ThresholdError> {
        if !(d1.is_finite() && d1 > 0.0 && d2.is_finite() && d2 > 0.0) {
            return Err(ThresholdError::BadConstants { d1, d2 });
        }
        Ok(EmbeddingConstants {
            d1,
            d2,
            c1: d1.powf(params.p() - 1.0),
            c2: d2.powf(params.q() - 1.0),
        })
    }

    /// Builds the constants from `C1`, `C2` directly.
    pub fn from_c(c1: f64, c2: f64, params: &ProblemParams) -> Result<Self, ThresholdError> {
        let d1 = c1.powf(1.0 / (params.p() - 1.0));
        let d2 = c2.powf(1.0 / (params.q() - 1.0));
        if !(d1.is_finite() && d1 > 0.0 && d2.is_finite() && d2 > 0.0) {
            return Err(ThresholdError::BadConstants { d1, d2 });
        }
        Ok(EmbeddingConstants { d1, d2, c1, c2 })
    }

    /// Estimates `d1` and `d2` on the grid.
    pub fn estimate(domain: &GridDomain, params: &ProblemParams) -> Result<Self, ThresholdError> {
        let n = domain.dim() as f64;
        let d1 = estimate_embedding_constant(domain, n * (params.p() - 1.0))?;
        let d2 = estimate_embedding_constant(domain, n * (params.q() - 1.0))?;
        Self::from_d(d1, d2, params)
    }

    /// `h(r) = C1 r^{p-1} + mu C2 r^{q-1} - r`.
    pub fn h(&self, params: &ProblemParams, r: f64) -> f64 {
        self.c1 * r.powf(params.p() - 1.0) + params.mu() * self.c2 * r.powf(params.q() - 1.0) - r
    }
}

/// Maximal sublevel interval `{ r > 0 : h(r) <= 0 }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusInterval {
    Interval { r1: f64, r2: f64 },
    /// `mu = 0`: every `r <= r2` works; `r1 = 0` is a sentinel.
    Degenerate { r2: f64 },
    Empty,
}

impl RadiusInterval {
    pub fn r1(&self) -> Option<f64> {
        match *self {
            RadiusInterval::Interval { r1, .. } => Some(r1),
            RadiusInterval::Degenerate { .. } => Some(0.0),
            RadiusInterval::Empty => None,
        }
    }

    pub fn r2(&self) -> Option<f64> {
        match *self {
            RadiusInterval::Interval { r2, .. } | RadiusInterval::Degenerate { r2 } => Some(r2),
            RadiusInterval::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, RadiusInterval::Empty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub mu_star: f64,
    pub r_star: f64,
    /// The `mu` the interval was computed for.
    pub mu: f64,
    pub interval: RadiusInterval,
}

const MU_CHECK_TOL: f64 = 1e-10;

/// Tangency radius `r* = ((2-q) / ((p-q) C1))^{1/(p-2)}`.
pub fn r_star(ec: &EmbeddingConstants, params: &ProblemParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    ((2.0 - q) / ((p - q) * ec.c1)).powf(1.0 / (p - 2.0))
}

fn closed_form_mu_star(ec: &EmbeddingConstants, params: &ProblemParams) -> (f64, f64) {
    let (p, q) = (params.p(), params.q());
    let rs = r_star(ec, params);
    let mu = (rs - ec.c1 * rs.powf(p - 1.0)) / (ec.c2 * rs.powf(q - 1.0));
    (mu, rs)
}

/// Largest radius where the pure-power part stays below the identity.
fn outer_radius(ec: &EmbeddingConstants, params: &ProblemParams) -> f64 {
    ec.c1.powf(-1.0 / (params.p() - 2.0))
}

/// Shrinks `[inside, outside]` until the ends are within `tol`, keeping
/// `pred(inside)` true and `pred(outside)` false. Returns the inside end.
pub(crate) fn bisect_boundary(
    pred: impl Fn(f64) -> bool,
    mut inside: f64,
    mut outside: f64,
    tol: f64,
) -> f64 {
    for _ in 0..2000 {
        if (inside - outside).abs() <= tol {
            break;
        }
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Interval of radii on which the Poisson solve maps `K(r)` into itself.
pub fn radius_interval(ec: &EmbeddingConstants, params: &ProblemParams) -> RadiusInterval {
    let mu = params.mu();
    let outer = outer_radius(ec, params);
    if mu == 0.0 {
        return RadiusInterval::Degenerate { r2: outer };
    }
    let (mu_star, rs) = closed_form_mu_star(ec, params);
    if mu > mu_star {
        return RadiusInterval::Empty;
    }
    let inside = |r: f64| ec.h(params, r) <= 0.0;
    if mu >= mu_star * (1.0 - 1e-13) || !inside(rs) {
        return RadiusInterval::Interval { r1: rs, r2: rs };
    }
    // bisect to adjacent floats so tiny r1 keeps full relative accuracy
    let r1 = bisect_boundary(inside, rs, 0.0, 0.0);
    let r2 = bisect_boundary(inside, rs, outer, 0.0);
    RadiusInterval::Interval { r1, r2 }
}

/// Maximum of `g(r) = r^{2-q} - C1 r^{p-q}` by golden-section search in
/// `log r`. Independent of the tangency algebra.
fn max_concave_gain(ec: &EmbeddingConstants, params: &ProblemParams) -> f64 {
    let (p, q) = (params.p(), params.q());
    let g = |log_r: f64| {
        let r = log_r.exp();
        r.powf(2.0 - q) - ec.c1 * r.powf(p - q)
    };
    let outer = outer_radius(ec, params).ln();
    let (mut a, mut b) = (outer - 60.0, outer);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..200 {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + inv_phi * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - inv_phi * (b - a);
            g1 = g(x1);
        }
    }
    g1.max(g2)
}

/// Largest `mu` for which `h <= 0` somewhere, by bisection in `mu`.
pub fn mu_star_by_bisection(ec: &EmbeddingConstants, params: &ProblemParams) -> f64 {
    let gain = max_concave_gain(ec, params);
    let nonempty = |mu: f64| mu * ec.c2 <= gain;
    let mut hi = 1.0;
    while nonempty(hi) {
        hi *= 2.0;
    }
    bisect_boundary(nonempty, 0.0, hi, 1e-14 * hi)
}

/// `mu*`, `r*` and the radius interval for `params.mu()`.
pub fn mu_star(
    ec: &EmbeddingConstants,
    params: &ProblemParams,
) -> Result<ThresholdResult, ThresholdError> {
    let (closed, rs) = closed_form_mu_star(ec, params);
    let oracle = mu_star_by_bisection(ec, params);
    if (closed - oracle).abs() > MU_CHECK_TOL * closed.max(1.0) {
        return Err(ThresholdError::CrossCheck { closed, oracle });
    }
    Ok(ThresholdResult {
        mu_star: closed,
        r_star: rs,
        mu: params.mu(),
        interval: radius_interval(ec, params),
    })
}

/// Tuning for [`estimate_embedding_constant_with`].
#[derive(Debug, Clone)]
pub struct EmbeddingOptions {
    pub eigen_starts: usize,
    pub random_starts: usize,
    pub seed: u64,
    pub max_steps: usize,
    /// Extra ascent starts, given as grid functions `u` (not sources).
    pub extra_starts: Vec<GridFunction>,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            eigen_starts: 5,
            random_starts: 5,
            seed: 0,
            max_steps: 3000,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingEstimate {
    pub value: f64,
    /// Maximizing grid function found by the ascent.
    pub extremal: GridFunction,
    pub best_start: usize,
    pub converged_starts: usize,
}

/// `||u||_{L^s} / ||Delta_h u||_{L^n}` (a quasi-norm in the numerator when
/// `s < 1`).
pub fn embedding_quotient(u: &GridFunction, s: f64) -> f64 {
    let d = u.domain();
    let w = d.cell_volume();
    let lap = crate::grid::neg_laplacian(u);
    power_mean(u.values(), w, s) / power_mean(lap.values(), w, d.dim() as f64)
}

/// Lower estimate of the best constant of `||u||_{L^s} <= d ||Delta_h u||_{L^n}`.
pub fn estimate_embedding_constant(domain: &GridDomain, s: f64) -> Result<f64, ThresholdError> {
    estimate_embedding_constant_with(domain, s, &EmbeddingOptions::default()).map(|e| e.value)
}

struct Ascent<'a> {
    solver: &'a PoissonSolver,
    s: f64,
    n: f64,
    w: f64,
}

impl Ascent<'_> {
    /// log of the quotient as a function of the source `f = -Delta_h u`.
    fn objective(&self, f: &[f64]) -> f64 {
        let v = self.solver.solve_raw(f);
        power_mean(&v, self.w, self.s).ln() - power_mean(f, self.w, self.n).ln()
    }

    fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let v = self.solver.solve_raw(f);
        let sv = power_sum(&v, self.w, self.s);
        let sf = power_sum(f, self.w, self.n);
        let dv: Vec<f64> = v
            .iter()
            .map(|&x| signed_power(x, self.s - 1.0) * self.w / sv)
            .collect();
        let back = self.solver.solve_raw(&dv);
        back.iter()
            .zip(f)
            .map(|(b, &x)| b - signed_power(x, self.n - 1.0) * self.w / sf)
            .collect()
    }

    /// Normalized gradient ascent with a Barzilai-Borwein trial step and
    /// backtracking. Returns the final source and whether it settled.
    fn run(&self, mut f: Vec<f64>, max_steps: usize) -> (Vec<f64>, f64, bool) {
        let mut value = self.objective(&f);
        let mut grad = self.gradient(&f);
        let mut step = 0.1;
        let mut history = vec![value];
        for _ in 0..max_steps {
            let fnorm = l2(&f);
            let gnorm = l2(&grad);
            // the objective is homogeneous of degree 0, so |grad| scales like 1/|f|
            if gnorm * fnorm <= 1e-12 {
                return (f, value, true);
            }
            let mut accepted = None;
            let mut t = step;
            while t > 1e-16 {
                let trial: Vec<f64> = f
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| x + t * fnorm / gnorm * g)
                    .collect();
                let tv = self.objective(&trial);
                if tv > value {
                    accepted = Some((trial, tv));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, tv)) = accepted else {
                return (f, value, true);
            };
            let new_grad = self.gradient(&trial);
            // BB step in the normalized variable
            let sk: Vec<f64> = trial.iter().zip(&f).map(|(a, b)| a - b).collect();
            let yk: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&sk, &yk);
            let ss = dot(&sk, &sk);
            let new_fnorm = l2(&trial);
            let new_gnorm = l2(&new_grad);
            step = if sy < 0.0 {
                (ss / -sy) * new_gnorm / new_fnorm
            } else {
                2.0 * t
            }
            .clamp(1e-8, 1.0);
            f = trial;
            grad = new_grad;
            value = tv;
            history.push(value);
            if history.len() > 25 {
                let old = history[history.len() - 26];
                // log-quotient difference is the relative change of the quotient
                if (value - old).abs() < 1e-10 {
                    return (f, value, true);
                }
            }
            let m = max_abs(&f);
            if !(1e-100..=1e100).contains(&m) {
                f.iter_mut().for_each(|x| *x /= m);
            }
        }
        (f, value, false)
    }
}

fn signed_power(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Multi-start ascent on the embedding quotient.
///
/// Starts are the first eigenfunctions, seeded random sources, the best
/// single-node source, then any `extra_starts`; the best final value wins
/// with ties going to the lowest start index.
pub fn estimate_embedding_constant_with(
    domain: &GridDomain,
    s: f64,
    opts: &EmbeddingOptions,
) -> Result<EmbeddingEstimate, ThresholdError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(ThresholdError::BadExponent(s));
    }
    let solver = PoissonSolver::new(*domain);
    let ascent = Ascent {
        solver: &solver,
        s,
        n: domain.dim() as f64,
        w: domain.cell_volume(),
    };
    let len = domain.len();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for pair in eigenpairs(domain, opts.eigen_starts.min(len))? {
        starts.push(pair.eigenfunction.into_values());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..len).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    // point sources are the extreme points of the L^1 ball, exact for n = 1
    let mut best_spike = (f64::NEG_INFINITY, 0);
    let mut spike = vec![0.0; len];
    for i in 0..len {
        spike[i] = 1.0;
        let v = ascent.objective(&spike);
        if v > best_spike.0 {
            best_spike = (v, i);
        }
        spike[i] = 0.0;
    }
    spike[best_spike.1] = 1.0;
    starts.push(spike);
    for u in &opts.extra_starts {
        if u.domain() != domain {
            return Err(GridError::DomainMismatch.into());
        }
        starts.push(crate::grid::neg_laplacian(u).into_values());
    }

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut converged_starts = 0;
    for (i, f0) in starts.into_iter().enumerate() {
        if max_abs(&f0) == 0.0 {
            continue;
        }
        let (f, value, converged) = ascent.run(f0, opts.max_steps);
        converged_starts += converged as usize;
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, i, f));
        }
    }
    let (value, best_start, f) = best.ok_or(ThresholdError::NonConvergence { best: 0.0 })?;
    if converged_starts == 0 {
        return Err(ThresholdError::NonConvergence { best: value.exp() });
    }
    let extremal = GridFunction::from_raw(*domain, solver.solve_raw(&f));
    Ok(EmbeddingEstimate {
        value: value.exp(),
        extremal,
        best_start,
        converged_starts,
    })
}
