//! Uniform box grids, grid functions, the Dirichlet finite-difference
//! Laplacian and the discrete norms used throughout the crate.
//!
//! Grid functions store values at interior nodes only. Boundary values are
//! identically zero and enter the stencils as ghost zeros. Node ordering is
//! lexicographic with the first axis varying slowest.

mod io;
mod spectral;

pub use io::{read_grid_function, write_grid_function};
pub use spectral::{eigenpairs, poisson_solve, EigenPair, PoissonSolver};

use thiserror::Error;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("expected {expected} entries for {what}, got {got}")]
    AxisCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("side length on axis {axis} must be positive and finite (got {value})")]
    BadLength { axis: usize, value: f64 },
    #[error("axis {axis} needs at least 2 interior nodes (got {value})")]
    TooFewNodes { axis: usize, value: usize },
    #[error("grid function has {got} values but the domain has {expected} interior nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid function value at node {0} is not finite")]
    NonFinite(usize),
    #[error("grid functions live on different domains")]
    DomainMismatch,
    #[error("norm exponent must be >= 1 (got {0})")]
    BadExponent(f64),
    #[error("requested {requested} eigenpairs but the grid has only {available} nodes")]
    TooManyEigenpairs { requested: usize, available: usize },
    #[error("linear solve did not reach tolerance: relative residual {residual:e} after {iterations} iterations")]
    SolveFailed { residual: f64, iterations: usize },
    #[error("grid function text: {0}")]
    Parse(String),
}

/// A box `[0, L_1] x ... x [0, L_d]` with `N_k` interior nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDomain {
    dim: usize,
    lengths: [f64; MAX_DIM],
    nodes: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
}

impl GridDomain {
    pub fn new(dim: usize, lengths: &[f64], nodes: &[usize]) -> Result<Self, GridError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        if lengths.len() != dim {
            return Err(GridError::AxisCount {
                what: "side lengths",
                expected: dim,
                got: lengths.len(),
            });
        }
        if nodes.len() != dim {
            return Err(GridError::AxisCount {
                what: "nodes per axis",
                expected: dim,
                got: nodes.len(),
            });
        }
        let mut out = GridDomain {
            dim,
            lengths: [0.0; MAX_DIM],
            nodes: [1; MAX_DIM],
            spacing: [1.0; MAX_DIM],
        };
        for axis in 0..dim {
            let (l, n) = (lengths[axis], nodes[axis]);
            if !(l.is_finite() && l > 0.0) {
                return Err(GridError::BadLength { axis, value: l });
            }
            if n < 2 {
                return Err(GridError::TooFewNodes { axis, value: n });
            }
            out.lengths[axis] = l;
            out.nodes[axis] = n;
            out.spacing[axis] = l / (n as f64 + 1.0);
        }
        Ok(out)
    }

    /// Unit cube `[0,1]^dim` with the same node count on every axis.
    pub fn unit(dim: usize, nodes_per_axis: usize) -> Result<Self, GridError> {
        Self::new(dim, &vec![1.0; dim], &vec![nodes_per_axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.nodes().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of a single node (the cell volume).
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Distance between consecutive entries along `axis` in the flat array.
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes[axis + 1..self.dim].iter().product()
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.nodes[axis];
            flat /= self.nodes[axis];
        }
        idx
    }

    /// Physical coordinates of a flat node index (unused axes are 0).
    pub fn coordinates(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = (idx[axis] as f64 + 1.0) * self.spacing[axis];
        }
        x
    }

    /// Calls `f(start, stride, len)` for every grid line along `axis`.
    pub(crate) fn for_each_line(&self, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
        let stride = self.stride(axis);
        let len = self.nodes[axis];
        let block = stride * len;
        let total = self.len();
        let mut outer = 0;
        while outer < total {
            for inner in 0..stride {
                f(outer + inner, stride, len);
            }
            outer += block;
        }
    }
}

/// Values at the interior nodes of a [`GridDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: GridDomain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != domain.len() {
            return Err(GridError::LengthMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(GridFunction { domain, values })
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// already-validated inputs.
    pub(crate) fn from_raw(domain: GridDomain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        GridFunction { domain, values }
    }

    pub fn zeros(domain: GridDomain) -> Self {
        GridFunction {
            domain,
            values: vec![0.0; domain.len()],
        }
    }

    pub fn constant(domain: GridDomain, c: f64) -> Self {
        GridFunction {
            domain,
            values: vec![c; domain.len()],
        }
    }

    /// Samples `f` at the interior node coordinates.
    pub fn from_fn(domain: GridDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let values = (0..domain.len())
            .map(|i| f(&domain.coordinates(i)[..domain.dim()]))
            .collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Self {
        debug_assert_eq!(self.domain, other.domain);
        Self::from_raw(
            self.domain,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.combine(1.0, other, -1.0)
    }

    /// Weighted L2 inner product `sum_i w u_i v_i`.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        debug_assert_eq!(self.domain, other.domain);
        self.domain.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Weighted L2 distance between two grid functions.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        let w = self.domain.cell_volume();
        (w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>())
        .sqrt()
    }

    pub fn same_domain(&self, other: &GridFunction) -> Result<(), GridError> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(GridError::DomainMismatch)
        }
    }
}

/// Norm selector for [`norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `(sum w |u|^t)^(1/t)`, t >= 1.
    Lt(f64),
    /// `sqrt(sum w |grad_h u|^2)` with forward differences on all cells.
    H10,
    /// `||-Delta_h u||_{L^n}` with n the domain dimension.
    W2n,
}

/// Applies `-Delta_h` with zero Dirichlet ghost values.
pub fn neg_laplacian(u: &GridFunction) -> GridFunction {
    let domain = *u.domain();
    let x = u.values();
    let mut out = vec![0.0; x.len()];
    for axis in 0..domain.dim() {
        let inv_h2 = 1.0 / (domain.spacing()[axis] * domain.spacing()[axis]);
        domain.for_each_line(axis, |start, stride, len| {
            for j in 0..len {
                let i = start + j * stride;
                let left = if j > 0 { x[i - stride] } else { 0.0 };
                let right = if j + 1 < len { x[i + stride] } else { 0.0 };
                out[i] += (2.0 * x[i] - left - right) * inv_h2;
            }
        });
    }
    GridFunction::from_raw(domain, out)
}

/// Weighted power sum `sum_i w |u_i|^t`.
pub(crate) fn power_sum(values: &[f64], w: f64, t: f64) -> f64 {
    w * values.iter().map(|v| v.abs().powf(t)).sum::<f64>()
}

/// `(sum w |u|^t)^(1/t)` for any t > 0 (a quasi-norm below 1).
pub(crate) fn power_mean(values: &[f64], w: f64, t: f64) -> f64 {
    power_sum(values, w, t).powf(1.0 / t)
}

/// Squared discrete H^1_0 seminorm, forward differences including the
/// boundary cells. Equals `<(-Delta_h) u, u>` in the weighted pairing.
pub fn h10_squared(u: &GridFunction) -> f64 {
    let domain = *u.domain();
    let x = u.values();
    let w = domain.cell_volume();
    let mut total = 0.0;
    for axis in 0..domain.dim() {
        let inv_h2 = 1.0 / (domain.spacing()[axis] * domain.spacing()[axis]);
        let mut axis_sum = 0.0;
        domain.for_each_line(axis, |start, stride, len| {
            let mut prev = 0.0;
            for j in 0..len {
                let cur = x[start + j * stride];
                axis_sum += (cur - prev) * (cur - prev);
                prev = cur;
            }
            axis_sum += prev * prev;
        });
        total += axis_sum * inv_h2;
    }
    w * total
}

pub fn norm(u: &GridFunction, kind: NormKind) -> Result<f64, GridError> {
    match kind {
        NormKind::Lt(t) => {
            if !(t >= 1.0 && t.is_finite()) {
                return Err(GridError::BadExponent(t));
            }
            Ok(power_mean(u.values(), u.domain().cell_volume(), t))
        }
        NormKind::H10 => Ok(h10_squared(u).sqrt()),
        NormKind::W2n => Ok(w2n_norm(u)),
    }
}

/// `||-Delta_h u||_{L^n}`, the norm defining the constraint balls.
pub fn w2n_norm(u: &GridFunction) -> f64 {
    let lap = neg_laplacian(u);
    power_mean(lap.values(), u.domain().cell_volume(), u.domain().dim() as f64)
}
