//! Command runners behind the `ccsolve` binary.
//!
//! Every runner is a pure function of the configuration and the seed. It
//! returns the files to write (name and contents) and the text for standard
//! output; the binary decides where the files go. This keeps reruns
//! byte-identical and makes the runners testable without touching disk.

use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::functional::{ParamsError, ProblemParams};
use crate::grid::{read_grid_function, write_grid_function, GridDomain, GridError, GridFunction};
use crate::solver::{
    fixed_point_solve, minimize_positive, multiplicity_search, positive_witness, recertify,
    verify_solution, ConstraintSet, DescentOptions, MultiplicityOptions, SolveReport, SolverError,
};
use crate::threshold::{mu_star, radius_interval, EmbeddingConstants, ThresholdError, ThresholdResult};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("refusing mu = {mu:.11e}: the method needs 0 < mu < mu* = {mu_star:.11e}")]
    MuOutOfRange { mu: f64, mu_star: f64 },
    #[error("{0}")]
    Usage(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Solver(e) => e.exit_code(),
            CommandError::Threshold(_) => 2,
            _ => 1,
        }
    }
}

/// Files and console text produced by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub stdout: String,
    pub exit_code: i32,
}

/// Name of the run directory: `<command>-<first 16 hex digits of
/// sha256(canonical config, seed)>`.
pub fn run_id(command: &str, config: &RunConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config.to_canonical().as_bytes());
    h.update(format!("\nseed = {seed}\n").as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{command}-{hex}")
}

/// Twelve significant digits.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Domain, parameters and thresholds shared by all commands.
#[derive(Debug, Clone)]
pub struct Setup {
    pub domain: GridDomain,
    pub base: ProblemParams,
    pub constants: EmbeddingConstants,
    pub threshold: ThresholdResult,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self, CommandError> {
        config.validate()?;
        let domain = config.domain()?;
        let base = config.base_params()?;
        let constants = EmbeddingConstants::estimate(&domain, &base)?;
        let threshold = mu_star(&constants, &base)?;
        Ok(Setup {
            domain,
            base,
            constants,
            threshold,
        })
    }

    pub fn mu_star(&self) -> f64 {
        self.threshold.mu_star
    }

    /// Parameters at `mu` with the outer radius `r2`; refuses `mu` outside
    /// `(0, mu*)`.
    pub fn admissible(&self, mu: f64) -> Result<(ProblemParams, f64), CommandError> {
        let out = CommandError::MuOutOfRange {
            mu,
            mu_star: self.mu_star(),
        };
        if !(mu > 0.0 && mu < self.mu_star()) {
            return Err(out);
        }
        let params = self.base.with_mu(mu)?;
        match radius_interval(&self.constants, &params).r2() {
            Some(r2) => Ok((params, r2)),
            None => Err(out),
        }
    }

    fn header(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        let _ = writeln!(s, "# mu_star = {}", num(self.threshold.mu_star));
        let _ = writeln!(s, "# r_star = {}", num(self.threshold.r_star));
        let _ = writeln!(s, "# d1 = {}", num(c.d1));
        let _ = writeln!(s, "# d2 = {}", num(c.d2));
        let _ = writeln!(s, "# C1 = {}", num(c.c1));
        let _ = writeln!(s, "# C2 = {}", num(c.c2));
        s
    }

    fn single_mu(&self, config: &RunConfig) -> Result<f64, CommandError> {
        config
            .resolve_mu(self.mu_star())
            .ok_or(CommandError::Config(ConfigError::Missing("problem.mu")))
    }
}

pub const THRESHOLD_COLUMNS: &str = "mu r1 r2 mu_star r_star d1 d2 C1 C2";

/// `thresholds`: one row per queried `mu` (the sweep values, or the single
/// `mu` of the problem section).
pub fn run_thresholds(config: &RunConfig) -> Result<CommandOutput, CommandError> {
    let setup = Setup::new(config)?;
    let mus = match config.sweep_values(setup.mu_star()) {
        Some(v) => v,
        None => config.resolve_mu(setup.mu_star()).into_iter().collect(),
    };
    let mut table = setup.header();
    table.push_str(THRESHOLD_COLUMNS);
    table.push('\n');
    let c = &setup.constants;
    for mu in mus {
        let params = setup.base.with_mu(mu)?;
        let iv = radius_interval(c, &params);
        let (r1, r2) = match (iv.r1(), iv.r2()) {
            (Some(a), Some(b)) => (num(a), num(b)),
            _ => ("EMPTY".to_string(), "EMPTY".to_string()),
        };
        let _ = writeln!(
            table,
            "{} {r1} {r2} {} {} {} {} {} {}",
            num(mu),
            num(setup.threshold.mu_star),
            num(setup.threshold.r_star),
            num(c.d1),
            num(c.d2),
            num(c.c1),
            num(c.c2)
        );
    }
    Ok(CommandOutput {
        files: vec![("thresholds.txt".into(), table.clone())],
        stdout: table,
        exit_code: 0,
    })
}

/// One summary line per solve: `method=... energy=... residual_inf=...
/// min_value=... iterations=...`.
pub fn summary_line(r: &SolveReport) -> String {
    format!(
        "method={} energy={:.16e} residual_inf={:.16e} min_value={:.16e} iterations={}",
        r.method, r.energy, r.residual_inf, r.min_value, r.iterations
    )
}

fn report_file(r: &SolveReport, mu: f64, seed: u64) -> String {
    format!("mu = {:.16e}\nseed = {seed}\n{}", mu, r.to_key_value())
}

fn descent_options(config: &RunConfig, seed: u64) -> DescentOptions {
    DescentOptions {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        seed,
    }
}

/// Positive solution at `mu` by constrained descent over the nonnegative
/// part of `K(r2)`.
fn solve_minimize(
    setup: &Setup,
    config: &RunConfig,
    params: &ProblemParams,
    r2: f64,
    seed: u64,
) -> Result<SolveReport, SolverError> {
    let k = ConstraintSet::new(r2, true);
    let mut rep = minimize_positive(params, &k, &setup.domain, None, &descent_options(config, seed))?;
    recertify(&mut rep, params, &k, config.solver.certificate_trials, seed);
    Ok(rep)
}

/// `solve`: descent and fixed-point iteration at the configured `mu`.
pub fn run_solve(config: &RunConfig, seed: u64) -> Result<CommandOutput, CommandError> {
    let setup = Setup::new(config)?;
    let mu = setup.single_mu(config)?;
    let (params, r2) = setup.admissible(mu)?;
    let mut out = CommandOutput::default();
    let tol = config.solver.tol;

    let mut results = Vec::new();
    results.push(solve_minimize(&setup, config, &params, r2, seed));
    let fixed = positive_witness(&setup.domain, &params, &ConstraintSet::new(r2, true)).and_then(
        |(u0, _)| {
            let mut rep = fixed_point_solve(&u0, &params, r2, tol, config.solver.max_iter)?;
            recertify(
                &mut rep,
                &params,
                &ConstraintSet::new(r2, true),
                config.solver.certificate_trials,
                seed,
            );
            Ok(rep)
        },
    );
    results.push(fixed);

    for (name, result) in ["minimize", "fixed_point"].iter().zip(results) {
        match result {
            Ok(rep) => {
                out.files.push((format!("{name}.report"), report_file(&rep, mu, seed)));
                out.files.push((format!("{name}.profile"), write_grid_function(&rep.solution)));
                out.stdout.push_str(&summary_line(&rep));
                out.stdout.push('\n');
                let ok = rep.in_ball && rep.certified() && (rep.residual_inf <= tol || rep.ball_active);
                if !ok {
                    out.exit_code = out.exit_code.max(2);
                }
            }
            Err(e) => {
                let _ = writeln!(out.stdout, "method={name} error={e}");
                out.exit_code = out.exit_code.max(e.exit_code());
            }
        }
    }
    Ok(out)
}

pub const SWEEP_HEADER: &str = "mu,r1,r2,energy_min,residual_inf,min_value,solution_count";

fn sweep_row(setup: &Setup, config: &RunConfig, mu: f64, seed: u64) -> String {
    let params = match setup.base.with_mu(mu) {
        Ok(p) => p,
        Err(_) => return format!("{},FAIL,FAIL,FAIL,FAIL,FAIL,FAIL", num(mu)),
    };
    let iv = radius_interval(&setup.constants, &params);
    let (r1, r2) = match (iv.r1(), iv.r2()) {
        (Some(a), Some(b)) => (num(a), num(b)),
        _ => ("EMPTY".into(), "EMPTY".into()),
    };
    let Ok((params, radius)) = setup.admissible(mu) else {
        return format!("{},{r1},{r2},NA,NA,NA,NA", num(mu));
    };
    let solved = match solve_minimize(setup, config, &params, radius, seed) {
        Ok(rep) => format!("{},{},{}", num(rep.energy), num(rep.residual_inf), num(rep.min_value)),
        Err(_) => "FAIL,FAIL,FAIL".to_string(),
    };
    let count = if config.sweep.as_ref().is_some_and(|s| s.solutions) {
        match multiplicity_search(
            &setup.domain,
            &params,
            &ConstraintSet::new(radius, false),
            config.multiplicity.want,
            &multiplicity_options(config, seed),
        ) {
            Ok(o) => o.solutions.len().to_string(),
            Err(_) => "FAIL".to_string(),
        }
    } else {
        "NA".to_string()
    };
    format!("{},{r1},{r2},{solved},{count}", num(mu))
}

/// `sweep`: one CSV row per `mu`, computed on `jobs` threads and written in
/// ascending `mu` order.
pub fn run_sweep(config: &RunConfig, seed: u64, jobs: usize) -> Result<CommandOutput, CommandError> {
    let setup = Setup::new(config)?;
    let mut mus = config
        .sweep_values(setup.mu_star())
        .ok_or(CommandError::Config(ConfigError::Missing("sweep")))?;
    mus.sort_by(f64::total_cmp);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CommandError::Usage(e.to_string()))?;
    let rows: Vec<String> =
        pool.install(|| mus.par_iter().map(|&mu| sweep_row(&setup, config, mu, seed)).collect());
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    let failed = rows.iter().any(|r| r.contains("FAIL"));
    Ok(CommandOutput {
        files: vec![("sweep.csv".into(), csv.clone())],
        stdout: csv,
        exit_code: if failed { 2 } else { 0 },
    })
}

fn multiplicity_options(config: &RunConfig, seed: u64) -> MultiplicityOptions {
    MultiplicityOptions {
        tol: config.solver.tol,
        shift: config.multiplicity.shift,
        power: config.multiplicity.power,
        seed,
        ..MultiplicityOptions::default()
    }
}

/// `multiplicity`: `want` distinct pairs of negative-energy solutions.
pub fn run_multiplicity(config: &RunConfig, seed: u64) -> Result<CommandOutput, CommandError> {
    let setup = Setup::new(config)?;
    let mu = setup.single_mu(config)?;
    let (params, r2) = setup.admissible(mu)?;
    let want = config.multiplicity.want;
    if want == 0 {
        return Err(CommandError::Usage("multiplicity.want must be >= 1".into()));
    }
    let k = ConstraintSet::new(r2, false);
    let mut outcome = multiplicity_search(
        &setup.domain,
        &params,
        &k,
        want,
        &multiplicity_options(config, seed),
    )?;
    for rep in &mut outcome.solutions {
        recertify(rep, &params, &k, config.solver.certificate_trials, seed);
    }

    let mut out = CommandOutput::default();
    let mut summary = String::new();
    let _ = writeln!(summary, "mu = {}", num(mu));
    let _ = writeln!(summary, "mu_star = {}", num(setup.mu_star()));
    let _ = writeln!(summary, "r2 = {}", num(r2));
    let _ = writeln!(summary, "rho = {}", num(outcome.rho));
    for level in &outcome.levels {
        let _ = writeln!(summary, "c{}_upper = {}", level.k_dim, num(level.sup_energy));
    }
    let _ = writeln!(summary, "want = {want}");
    let _ = writeln!(summary, "found = {}", outcome.solutions.len());
    let _ = writeln!(summary, "shortfall = {}", outcome.shortfall);
    let _ = writeln!(summary, "attempts = {}", outcome.attempts);
    for (i, rep) in outcome.solutions.iter().enumerate() {
        let _ = writeln!(
            summary,
            "solution {} energy = {} residual_inf = {}",
            i + 1,
            num(rep.energy),
            num(rep.residual_inf)
        );
        let name = format!("solution_{:02}", i + 1);
        out.files.push((format!("{name}.report"), report_file(rep, mu, seed)));
        out.files.push((format!("{name}.profile"), write_grid_function(&rep.solution)));
        out.stdout.push_str(&summary_line(rep));
        out.stdout.push('\n');
    }
    let sols = &outcome.solutions;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let a = &sols[i].solution;
            let b = &sols[j].solution;
            let d = a.distance(b).min(a.distance(&b.scaled(-1.0)));
            let _ = writeln!(summary, "distance {} {} = {}", i + 1, j + 1, num(d));
        }
    }
    out.files.push(("summary.txt".into(), summary.clone()));
    out.stdout.push_str(&summary);
    out.exit_code = if outcome.shortfall > 0 { 4 } else { 0 };
    Ok(out)
}

/// `verify`: diagnostics of a stored profile against the configured problem.
pub fn run_verify(config: &RunConfig, seed: u64, profile: &str) -> Result<CommandOutput, CommandError> {
    let setup = Setup::new(config)?;
    let mu = setup.single_mu(config)?;
    let (params, r2) = setup.admissible(mu)?;
    let u: GridFunction = read_grid_function(profile)?;
    if u.domain() != &setup.domain {
        return Err(GridError::DomainMismatch.into());
    }
    let k = ConstraintSet::new(r2, false);
    let mut rep = verify_solution(&u, &params, &k, seed);
    recertify(&mut rep, &params, &k, config.solver.certificate_trials, seed);
    let ok = rep.residual_inf <= config.solver.tol && rep.in_ball && rep.certified();
    let text = report_file(&rep, mu, seed);
    Ok(CommandOutput {
        files: vec![("verify.report".into(), text.clone())],
        stdout: text,
        exit_code: if ok { 0 } else { 2 },
    })
}
