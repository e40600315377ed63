//! Oracles and generators shared by the integration tests. Nothing here
//! calls into the stencil or solver code of the crate.

#![allow(dead_code)]

use ccsolve::grid::{GridDomain, GridFunction};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `-Delta_h` assembled from node multi-indices.
pub fn dense_laplacian(d: &GridDomain) -> DMatrix<f64> {
    let n = d.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mi = d.multi_index(i);
        for j in 0..n {
            let mj = d.multi_index(j);
            let mut diffs = Vec::new();
            for axis in 0..d.dim() {
                if mi[axis] != mj[axis] {
                    diffs.push(axis);
                }
            }
            if i == j {
                a[(i, j)] = (0..d.dim()).map(|k| 2.0 / d.spacing()[k].powi(2)).sum();
            } else if diffs.len() == 1 {
                let k = diffs[0];
                if mi[k].abs_diff(mj[k]) == 1 {
                    a[(i, j)] = -1.0 / d.spacing()[k].powi(2);
                }
            }
        }
    }
    a
}

pub fn to_vector(u: &GridFunction) -> DVector<f64> {
    DVector::from_column_slice(u.values())
}

pub fn random_function(d: &GridDomain, rng: &mut ChaCha8Rng, scale: f64) -> GridFunction {
    let v = (0..d.len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    GridFunction::new(*d, v).unwrap()
}

pub fn random_nonnegative(d: &GridDomain, rng: &mut ChaCha8Rng, scale: f64) -> GridFunction {
    let v = (0..d.len()).map(|_| scale * rng.random_range(0.0..1.0)).collect();
    GridFunction::new(*d, v).unwrap()
}

/// Weighted sum `w * sum |u|^t` computed directly.
pub fn power_sum(u: &GridFunction, t: f64) -> f64 {
    u.domain().cell_volume() * u.values().iter().map(|v| v.abs().powf(t)).sum::<f64>()
}

/// Bisection for the sign change of `f` between `a` and `b`, where `f(a)`
/// and `f(b)` have opposite signs.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) <= 0.0, "no sign change in [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) <= 0.0) == (fa <= 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Largest `mu` for which `C1 r^{p-1} + mu C2 r^{q-1} <= r` has a solution,
/// by bisection in `mu`. Nonemptiness is decided by minimizing the convex
/// function `t -> C1 e^{(p-2)t} + mu C2 e^{(q-2)t}` over `t = log r` with a
/// ternary search.
pub fn mu_star_oracle(c1: f64, c2: f64, p: f64, q: f64) -> f64 {
    let min_ratio = |mu: f64| {
        let g = |t: f64| c1 * ((p - 2.0) * t).exp() + mu * c2 * ((q - 2.0) * t).exp();
        let (mut lo, mut hi) = (-200.0f64, 200.0f64);
        for _ in 0..400 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        g(0.5 * (lo + hi))
    };
    let mut hi = 1.0;
    while min_ratio(hi) <= 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if min_ratio(m) <= 1.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}
