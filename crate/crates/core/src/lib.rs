//! Constrained variational solver for the concave-convex Dirichlet problem
//!
//! ```text
//! -Delta u = |u|^{p-2} u + mu |u|^{q-2} u  in a box,  u = 0 on the boundary,
//! ```
//!
//! with `1 < q < 2 < p`, on uniform finite-difference grids in one to three
//! dimensions. Solutions are sought in balls `K(r)` of the norm
//! `||-Delta_h u||_{L^n}`, which the solution map `(-Delta_h)^{-1} D Phi`
//! leaves invariant for `r` in an interval `[r1, r2]` that exists whenever
//! `mu` is below a computable threshold `mu*`.
//!
//! * [`grid`]: domains, grid functions, the stencil, Poisson solves,
//!   eigenpairs and discrete norms.
//! * [`functional`]: energy, nonlinearity, gradient and the critical-point
//!   certificate.
//! * [`threshold`]: embedding constants, `mu*`, `r*` and `[r1, r2]`.
//! * [`solver`]: fixed-point iteration, constrained descent and the
//!   multiplicity search.
//! * [`config`] and [`commands`]: the run configuration and the command
//!   runners behind the `ccsolve` binary.

pub mod commands;
pub mod config;
pub mod functional;
pub mod grid;
pub mod solver;
pub mod threshold;
