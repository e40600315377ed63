//! Energy functional `I = Psi - Phi` for the concave-convex problem
//!
//! ```text
//! -Delta u = |u|^{p-2} u + mu |u|^{q-2} u   in the box,  u = 0 on the boundary
//! ```
//!
//! with `Psi(u) = 1/2 ||grad u||^2` and
//! `Phi(u) = (1/p) int |u|^p + (mu/q) int |u|^q`, all integrals taken with the
//! grid quadrature from [`crate::grid`].

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::grid::{eigenpairs, h10_squared, neg_laplacian, power_sum, w2n_norm, GridFunction};
use crate::solver::{project_feasible, ConstraintSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("p must satisfy p > 2 (got {0})")]
    BadP(f64),
    #[error("q must satisfy 1 < q < 2 (got {0})")]
    BadQ(f64),
    #[error("mu must be finite and >= 0 (got {0})")]
    BadMu(f64),
}

/// Exponents `1 < q < 2 < p` and the weight `mu >= 0` of the concave term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    p: f64,
    q: f64,
    mu: f64,
}

impl ProblemParams {
    pub fn new(p: f64, q: f64, mu: f64) -> Result<Self, ParamsError> {
        if !(p.is_finite() && p > 2.0) {
            return Err(ParamsError::BadP(p));
        }
        if !(q > 1.0 && q < 2.0) {
            return Err(ParamsError::BadQ(q));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(ParamsError::BadMu(mu));
        }
        Ok(ProblemParams { p, q, mu })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self, ParamsError> {
        Self::new(self.p, self.q, mu)
    }
}

/// `Psi(u) = 1/2 ||grad_h u||^2`.
pub fn psi(u: &GridFunction) -> f64 {
    0.5 * h10_squared(u)
}

/// `Phi(u) = (1/p) sum w |u|^p + (mu/q) sum w |u|^q`.
pub fn phi(u: &GridFunction, params: &ProblemParams) -> f64 {
    let w = u.domain().cell_volume();
    power_sum(u.values(), w, params.p) / params.p
        + params.mu * power_sum(u.values(), w, params.q) / params.q
}

pub fn energy(u: &GridFunction, params: &ProblemParams) -> f64 {
    psi(u) - phi(u, params)
}

/// Pointwise `|s|^{p-2} s + mu |s|^{q-2} s`, zero at `s = 0`.
#[inline]
pub fn source_term(s: f64, params: &ProblemParams) -> f64 {
    let a = s.abs();
    if a == 0.0 {
        return 0.0;
    }
    s.signum() * (a.powf(params.p - 1.0) + params.mu * a.powf(params.q - 1.0))
}

/// Derivative of [`source_term`]; unbounded as `s -> 0` because `q < 2`.
#[inline]
pub fn source_derivative(s: f64, params: &ProblemParams) -> f64 {
    let a = s.abs();
    (params.p - 1.0) * a.powf(params.p - 2.0) + params.mu * (params.q - 1.0) * a.powf(params.q - 2.0)
}

/// `D Phi(u)` as a grid function.
pub fn nonlinearity(u: &GridFunction, params: &ProblemParams) -> GridFunction {
    u.map(|s| source_term(s, params))
}

/// Strong-form residual `-Delta_h u - D Phi(u)`; its weighted pairing with a
/// direction is the directional derivative of [`energy`].
pub fn energy_gradient(u: &GridFunction, params: &ProblemParams) -> GridFunction {
    neg_laplacian(u).sub(&nonlinearity(u, params))
}

/// `||-Delta_h u - D Phi(u)||_inf`.
pub fn residual_inf(u: &GridFunction, params: &ProblemParams) -> f64 {
    energy_gradient(u, params).max_abs()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("point is not feasible: W2n norm {w2n:e} vs radius {radius:e}, min value {min_value:e}")]
    Infeasible {
        w2n: f64,
        radius: f64,
        min_value: f64,
    },
}

/// Outcome of sampling the critical-point inequality
/// `<D Phi(u), u - v> + Psi(v) - Psi(u) >= 0` over feasible `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub min_slack: f64,
    /// Index of the minimizing trial point (0 is always `v = u`).
    pub worst_index: usize,
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
}

impl CertificateReport {
    pub fn certified(&self) -> bool {
        self.min_slack >= -self.tolerance
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "min_slack = {:.16e}", self.min_slack);
        let _ = writeln!(s, "worst_index = {}", self.worst_index);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "tolerance = {:.16e}", self.tolerance);
        let _ = writeln!(s, "certified = {}", self.certified());
        s
    }
}

/// Acceptance threshold for the sampled inequality at `u`.
pub fn certificate_tolerance(u: &GridFunction) -> f64 {
    1e-8 * (1.0 + w2n_norm(u))
}

/// Evaluates the inequality slack at one trial point.
///
/// Uses `Psi(v) - Psi(u) = <(-Delta_h) u, v - u> + Psi(v - u)`, exact for the
/// quadratic `Psi`, to avoid cancellation between nearby energies.
pub fn slack_at(u: &GridFunction, gradient: &GridFunction, v: &GridFunction) -> f64 {
    let d = v.sub(u);
    gradient.dot(&d) + psi(&d)
}

/// Samples feasible points and reports the smallest slack of the
/// critical-point inequality at `u`.
///
/// The trial family always contains `v = u`, `v = 0`, projected scalings
/// `t u`, and projected perturbations of `u` along low eigenfunctions and
/// the peak node; `trial_count` seeded random feasible points follow.
pub fn szulkin_certificate(
    u: &GridFunction,
    params: &ProblemParams,
    constraint: &ConstraintSet,
    trial_count: usize,
    seed: u64,
) -> Result<CertificateReport, CertificateError> {
    if !constraint.contains(u) {
        return Err(CertificateError::Infeasible {
            w2n: w2n_norm(u),
            radius: constraint.radius,
            min_value: u.min_value(),
        });
    }
    let domain = *u.domain();
    let gradient = energy_gradient(u, params);
    let u_norm = w2n_norm(u);
    let scale = u_norm.max(1e-3 * constraint.radius).max(f64::MIN_POSITIVE);

    let mut trials: Vec<GridFunction> = vec![u.clone(), GridFunction::zeros(domain)];
    for t in [0.5, 0.9, 0.99, 0.999, 1.001, 1.01, 1.1, 1.5, 2.0] {
        trials.push(project_feasible(&u.scaled(t), constraint));
    }

    let basis: Vec<GridFunction> = eigenpairs(&domain, domain.len().min(8))
        .map(|pairs| {
            pairs
                .into_iter()
                .map(|p| {
                    let n = w2n_norm(&p.eigenfunction);
                    p.eigenfunction.scaled(1.0 / n)
                })
                .collect()
        })
        .unwrap_or_default();
    let peak = u
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut spike = GridFunction::zeros(domain).into_values();
    spike[peak] = 1.0;
    let spike = GridFunction::from_raw(domain, spike);
    let spike = spike.scaled(1.0 / w2n_norm(&spike));

    let mut directions: Vec<&GridFunction> = basis.iter().take(3).collect();
    directions.push(&spike);
    for dir in directions {
        for delta in [1e-1, 1e-2, 1e-3] {
            for sign in [1.0, -1.0] {
                let v = u.combine(1.0, dir, sign * delta * scale);
                trials.push(project_feasible(&v, constraint));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    for i in 0..trial_count {
        let mut v: Vec<f64> = vec![0.0; domain.len()];
        for b in &basis {
            let c: f64 = StandardNormal.sample(&mut rng);
            for (x, y) in v.iter_mut().zip(b.values()) {
                *x += c * y;
            }
        }
        let noise = 0.1 / (domain.len() as f64).sqrt();
        for x in v.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += noise * z;
        }
        let dir = GridFunction::from_raw(domain, v);
        let n = w2n_norm(&dir);
        if n == 0.0 {
            continue;
        }
        let candidate = if i % 2 == 0 {
            // nearby point
            let size = 10f64.powf(-3.0 * unit.sample(&mut rng)) * scale;
            u.combine(1.0, &dir, size / n)
        } else {
            // anywhere in the set
            let size = unit.sample(&mut rng) * constraint.radius;
            dir.scaled(size / n)
        };
        trials.push(project_feasible(&candidate, constraint));
    }

    let (worst_index, min_slack) = trials
        .iter()
        .map(|v| slack_at(u, &gradient, v))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| {
            if s < best.1 {
                (i, s)
            } else {
                best
            }
        });
    Ok(CertificateReport {
        min_slack,
        worst_index,
        seed,
        trials: trials.len(),
        tolerance: certificate_tolerance(u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn params(p: f64, q: f64, mu: f64) -> ProblemParams {
        ProblemParams::new(p, q, mu).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(matches!(ProblemParams::new(2.0, 1.5, 0.1), Err(ParamsError::BadP(_))));
        assert!(matches!(ProblemParams::new(3.0, 2.5, 0.1), Err(ParamsError::BadQ(_))));
        assert!(matches!(ProblemParams::new(3.0, 1.0, 0.1), Err(ParamsError::BadQ(_))));
        assert!(matches!(ProblemParams::new(3.0, 1.5, -0.1), Err(ParamsError::BadMu(_))));
        assert!(ProblemParams::new(3.0, 1.5, 0.0).is_ok());
    }

    #[test]
    fn source_term_examples() {
        let pr = params(4.0, 1.5, 0.1);
        assert_eq!(source_term(0.0, &pr), 0.0);
        assert!((source_term(1.0, &pr) - 1.1).abs() < 1e-15);
        assert!((source_term(-2.0, &pr) + 8.141_421_356_237_31).abs() < 1e-12);
    }

    #[test]
    fn zero_is_trivial() {
        let d = GridDomain::unit(2, 5).unwrap();
        let z = GridFunction::zeros(d);
        let pr = params(3.0, 1.5, 0.7);
        assert_eq!(energy(&z, &pr), 0.0);
        assert_eq!(nonlinearity(&z, &pr).max_abs(), 0.0);
        assert_eq!(energy_gradient(&z, &pr).max_abs(), 0.0);
    }

    #[test]
    fn scaled_profile_energy_factorization() {
        let d = GridDomain::unit(1, 31).unwrap();
        let e = eigenpairs(&d, 1).unwrap().remove(0).eigenfunction;
        let pr = params(3.0, 1.5, 2.0);
        let w = d.cell_volume();
        let grad2 = h10_squared(&e);
        let lp = power_sum(e.values(), w, 3.0);
        let lq = power_sum(e.values(), w, 1.5);
        for t in [1e-1f64, 1e-2] {
            let expected: f64 = t.powf(1.5)
                * (t.powf(0.5) / 2.0 * grad2 - t.powf(1.5) / 3.0 * lp - 2.0 / 1.5 * lq);
            let got = energy(&e.scaled(t), &pr);
            assert!((got - expected).abs() <= 1e-14 * expected.abs());
            assert!(got < 0.0);
        }
    }

    #[test]
    fn quadratic_term_dominates_without_concave_part() {
        let d = GridDomain::unit(2, 9).unwrap();
        let e = eigenpairs(&d, 1).unwrap().remove(0).eigenfunction;
        assert!(energy(&e.scaled(1e-3), &params(4.0, 1.5, 0.0)) > 0.0);
    }

    #[test]
    fn certificate_rejects_infeasible_points() {
        let d = GridDomain::unit(1, 9).unwrap();
        let u = GridFunction::constant(d, -1.0);
        let k = ConstraintSet::new(1e3, true);
        let err = szulkin_certificate(&u, &params(3.0, 1.5, 0.1), &k, 4, 0).unwrap_err();
        assert!(matches!(err, CertificateError::Infeasible { .. }));
    }

    #[test]
    fn certificate_trivial_point() {
        // D Phi(0) = 0 so the slack reduces to Psi(v) >= 0, with v = u giving 0.
        let d = GridDomain::unit(2, 7).unwrap();
        let z = GridFunction::zeros(d);
        let k = ConstraintSet::new(1.0, false);
        let rep = szulkin_certificate(&z, &params(4.0, 1.5, 0.3), &k, 20, 7).unwrap();
        assert_eq!(rep.min_slack, 0.0);
        assert!(rep.certified());
    }

    #[test]
    fn certificate_is_seed_deterministic() {
        let d = GridDomain::unit(2, 6).unwrap();
        let u = GridFunction::from_fn(d, |x| 0.01 * (x[0] * (1.0 - x[0]) * x[1])).unwrap();
        let k = ConstraintSet::new(10.0, false);
        let pr = params(4.0, 1.5, 0.3);
        let a = szulkin_certificate(&u, &pr, &k, 30, 11).unwrap();
        let b = szulkin_certificate(&u, &pr, &k, 30, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.to_key_value().contains("seed = 11"));
    }

    #[test]
    fn slack_matches_direct_difference() {
        let d = GridDomain::unit(2, 6).unwrap();
        let pr = params(4.0, 1.5, 0.3);
        let u = GridFunction::from_fn(d, |x| (x[0] * 3.0).sin() * x[1]).unwrap();
        let v = GridFunction::from_fn(d, |x| x[0] * x[1] * (1.0 - x[1])).unwrap();
        let g = energy_gradient(&u, &pr);
        let direct = nonlinearity(&u, &pr).dot(&u.sub(&v)) + psi(&v) - psi(&u);
        assert!((slack_at(&u, &g, &v) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}
