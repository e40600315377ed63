//! Energy on spheres `{ rho * sum_j alpha_j e_j : |alpha| = 1 }` spanned by
//! the first eigenfunctions. These spheres have genus `k`, so a negative
//! supremum over one of them bounds the `k`-th minimax level from above by a
//! negative number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::functional::{energy, energy_gradient, ProblemParams};
use crate::grid::{eigenpairs, neg_laplacian, power_mean, GridDomain, GridFunction};

use super::{ConstraintSet, SolverError};

const RANDOM_STARTS: usize = 8;

/// Result of a sphere level estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereLevel {
    pub k_dim: usize,
    pub rho: f64,
    /// Estimated supremum of the energy over the sphere.
    pub sup_energy: f64,
    /// Coefficients where the supremum was found.
    pub argmax: Vec<f64>,
    /// Estimated maximum of the W2n norm over the sphere.
    pub max_w2n: f64,
}

/// Eigenfunction basis and parameters for repeated sphere evaluations.
#[derive(Debug, Clone)]
pub struct SphereProblem {
    params: ProblemParams,
    basis: Vec<GridFunction>,
}

impl SphereProblem {
    pub fn new(domain: &GridDomain, params: &ProblemParams, k_max: usize) -> Result<Self, SolverError> {
        if k_max == 0 {
            return Err(SolverError::BadArgument("sphere dimension must be >= 1".into()));
        }
        let basis = eigenpairs(domain, k_max)?
            .into_iter()
            .map(|p| p.eigenfunction)
            .collect();
        Ok(SphereProblem {
            params: *params,
            basis,
        })
    }

    pub fn k_max(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[GridFunction] {
        &self.basis
    }

    /// `rho * sum_j alpha_j e_j`.
    pub fn point(&self, alpha: &[f64], rho: f64) -> GridFunction {
        let mut out = GridFunction::zeros(*self.basis[0].domain());
        for (a, e) in alpha.iter().zip(&self.basis) {
            out = out.combine(1.0, e, rho * a);
        }
        out
    }

    pub fn energy_at(&self, alpha: &[f64], rho: f64) -> f64 {
        energy(&self.point(alpha, rho), &self.params)
    }

    pub fn w2n_at(&self, alpha: &[f64], rho: f64) -> f64 {
        let u = self.point(alpha, rho);
        let d = u.domain();
        power_mean(neg_laplacian(&u).values(), d.cell_volume(), d.dim() as f64)
    }

    fn energy_gradient_at(&self, alpha: &[f64], rho: f64) -> Vec<f64> {
        let g = energy_gradient(&self.point(alpha, rho), &self.params);
        self.basis[..alpha.len()]
            .iter()
            .map(|e| rho * g.dot(e))
            .collect()
    }

    fn starts(&self, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut starts = Vec::new();
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let mut a = vec![0.0; k];
                a[j] = sign;
                starts.push(a);
            }
        }
        if k > 1 {
            let c = 1.0 / (k as f64).sqrt();
            starts.push(vec![c; k]);
            starts.push(vec![-c; k]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_STARTS {
            let mut a: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            normalize(&mut a);
            starts.push(a);
        }
        starts
    }

    /// Supremum of the energy and of the W2n norm over the sphere in
    /// `span(e_1..e_k)` of H^1_0 radius `rho`.
    pub fn level(&self, k: usize, rho: f64, seed: u64) -> Result<SphereLevel, SolverError> {
        if k == 0 || k > self.basis.len() {
            return Err(SolverError::BadArgument(format!(
                "sphere dimension {k} outside 1..={}",
                self.basis.len()
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(SolverError::BadArgument(format!("sphere radius must be positive (got {rho})")));
        }
        let starts = self.starts(k, seed);
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut max_w2n = 0.0f64;
        for a in &starts {
            let (a_e, v_e) = sphere_ascent(
                a.clone(),
                |x| self.energy_at(x, rho),
                |x| self.energy_gradient_at(x, rho),
            );
            if v_e > best.0 {
                best = (v_e, a_e);
            }
            let (_, v_n) = sphere_ascent(
                a.clone(),
                |x| self.w2n_at(x, rho),
                |x| numerical_gradient(x, |y| self.w2n_at(y, rho)),
            );
            max_w2n = max_w2n.max(v_n);
        }
        Ok(SphereLevel {
            k_dim: k,
            rho,
            sup_energy: best.0,
            argmax: best.1,
            max_w2n,
        })
    }
}

fn normalize(a: &mut [f64]) {
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    a.iter_mut().for_each(|x| *x /= n);
}

fn numerical_gradient(a: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut x = a.to_vec();
    (0..a.len())
        .map(|i| {
            x[i] = a[i] + h;
            let up = f(&x);
            x[i] = a[i] - h;
            let down = f(&x);
            x[i] = a[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Riemannian gradient ascent on the unit sphere with backtracking.
fn sphere_ascent(
    mut a: Vec<f64>,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let mut value = f(&a);
    let mut step = 0.5;
    for _ in 0..300 {
        let g = grad(&a);
        let radial: f64 = g.iter().zip(&a).map(|(x, y)| x * y).sum();
        let tangent: Vec<f64> = g.iter().zip(&a).map(|(x, y)| x - radial * y).collect();
        let tnorm = tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
        if tnorm <= 1e-14 * (1.0 + value.abs()) {
            break;
        }
        let mut t = step;
        let mut moved = false;
        while t > 1e-10 {
            let mut trial: Vec<f64> = a
                .iter()
                .zip(&tangent)
                .map(|(x, d)| x + t * d / tnorm)
                .collect();
            normalize(&mut trial);
            let tv = f(&trial);
            if tv > value {
                a = trial;
                value = tv;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        step = (2.0 * t).min(1.0);
    }
    (a, value)
}

/// Upper estimate of the `k_dim`-th minimax level at sphere radius `rho`.
///
/// Fails with [`SolverError::SphereExitsK`] when the sphere is not inside `k`.
pub fn sphere_level_estimate(
    domain: &GridDomain,
    params: &ProblemParams,
    k_dim: usize,
    rho: f64,
    k: &ConstraintSet,
    seed: u64,
) -> Result<SphereLevel, SolverError> {
    let problem = SphereProblem::new(domain, params, k_dim)?;
    let level = problem.level(k_dim, rho, seed)?;
    if level.max_w2n > k.radius * (1.0 + 1e-12) {
        return Err(SolverError::SphereExitsK {
            max_w2n: level.max_w2n,
            radius: k.radius,
        });
    }
    Ok(level)
}

/// Largest `rho` in `{2^-1, ..., 2^-20} * r` whose spheres in
/// `span(e_1..e_j)` lie in `K(r)` with negative levels for every `j <= want`.
pub fn select_sphere_radius(
    problem: &SphereProblem,
    want: usize,
    radius: f64,
    seed: u64,
) -> Result<(f64, Vec<SphereLevel>), SolverError> {
    if want == 0 || want > problem.k_max() {
        return Err(SolverError::BadArgument(format!(
            "want = {want} outside 1..={}",
            problem.k_max()
        )));
    }
    for e in 1..=20 {
        let rho = radius * 0.5f64.powi(e);
        let mut levels = Vec::with_capacity(want);
        let mut ok = true;
        for j in (1..=want).rev() {
            let level = problem.level(j, rho, seed)?;
            if level.sup_energy >= 0.0 || level.max_w2n > radius * (1.0 + 1e-12) {
                ok = false;
                break;
            }
            levels.push(level);
        }
        if ok {
            levels.reverse();
            return Ok((rho, levels));
        }
    }
    Err(SolverError::NoNegativeSphere { k: want })
}
