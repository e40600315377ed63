//! Run configuration.
//!
//! The file format is TOML: flat `key = value` pairs under section headers.
//!
//! ```toml
//! [domain]
//! dimension = 2
//! lengths = [1.0, 1.0]
//! nodes = [32, 32]
//!
//! [problem]
//! p = 4.0
//! q = 1.5
//! mu_fraction = 0.5      # or: mu = 9.7 (absolute)
//!
//! [sweep]                # optional
//! start = 0.1
//! stop = 0.9
//! count = 8
//! spacing = "linear"     # or "log"
//! relative = true        # start/stop are fractions of mu*
//! solutions = false      # run the multiplicity search on every row
//!
//! [solver]
//! tol = 1e-10
//! max_iter = 5000
//! certificate_trials = 64
//!
//! [multiplicity]
//! want = 3
//! shift = 1.0
//! power = 2.0
//!
//! [run]
//! seed = 0
//! out = "out"
//! ```
//!
//! Only `[domain]` and `[problem]` are required. Unknown keys are rejected.
//! [`RunConfig::to_canonical`] writes every field in a fixed order, and
//! parsing that text gives back the same configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::{ParamsError, ProblemParams};
use crate::grid::{GridDomain, GridError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}` = {value} out of range: {bound}")]
    Range {
        field: &'static str,
        value: String,
        bound: &'static str,
    },
    #[error("config field `{0}` is required for this command")]
    Missing(&'static str),
    #[error("config fields `problem.mu` and `problem.mu_fraction` are mutually exclusive")]
    ConflictingMu,
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dimension: usize,
    pub lengths: Vec<f64>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    #[serde(default)]
    pub relative: bool,
    #[serde(default)]
    pub solutions: bool,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub certificate_trials: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: 1e-10,
            max_iter: 5000,
            certificate_trials: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplicitySection {
    pub want: usize,
    pub shift: f64,
    pub power: f64,
}

impl Default for MultiplicitySection {
    fn default() -> Self {
        MultiplicitySection {
            want: 3,
            shift: 1.0,
            power: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub problem: ProblemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub multiplicity: MultiplicitySection,
    #[serde(default)]
    pub run: RunSection,
}

fn range<T: std::fmt::Display>(
    ok: bool,
    field: &'static str,
    value: T,
    bound: &'static str,
) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            field,
            value: value.to_string(),
            bound,
        })
    }
}

impl RunConfig {
    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form: every field, fixed order.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("config values are always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        range(
            (1..=3).contains(&d.dimension),
            "domain.dimension",
            d.dimension,
            "must be 1, 2 or 3",
        )?;
        range(
            d.lengths.len() == d.dimension,
            "domain.lengths",
            format!("{:?}", d.lengths),
            "needs one entry per dimension",
        )?;
        range(
            d.nodes.len() == d.dimension,
            "domain.nodes",
            format!("{:?}", d.nodes),
            "needs one entry per dimension",
        )?;
        for &l in &d.lengths {
            range(l.is_finite() && l > 0.0, "domain.lengths", l, "lengths must be > 0")?;
        }
        for &n in &d.nodes {
            range(n >= 2, "domain.nodes", n, "at least 2 interior nodes per axis")?;
        }
        let pr = &self.problem;
        range(pr.p.is_finite() && pr.p > 2.0, "problem.p", pr.p, "p > 2")?;
        range(pr.q > 1.0 && pr.q < 2.0, "problem.q", pr.q, "1 < q < 2")?;
        if pr.mu.is_some() && pr.mu_fraction.is_some() {
            return Err(ConfigError::ConflictingMu);
        }
        if let Some(mu) = pr.mu {
            range(mu.is_finite() && mu >= 0.0, "problem.mu", mu, "mu >= 0")?;
        }
        if let Some(f) = pr.mu_fraction {
            range(f.is_finite() && f >= 0.0, "problem.mu_fraction", f, "mu_fraction >= 0")?;
        }
        if let Some(s) = &self.sweep {
            range(s.count >= 1, "sweep.count", s.count, "count >= 1")?;
            range(s.start.is_finite() && s.start >= 0.0, "sweep.start", s.start, "start >= 0")?;
            range(s.stop.is_finite() && s.stop >= s.start, "sweep.stop", s.stop, "stop >= start")?;
            if s.spacing == Spacing::Log {
                range(s.start > 0.0, "sweep.start", s.start, "log spacing needs start > 0")?;
            }
        }
        let so = &self.solver;
        range(so.tol.is_finite() && so.tol > 0.0, "solver.tol", so.tol, "tol > 0")?;
        range(so.max_iter >= 1, "solver.max_iter", so.max_iter, "max_iter >= 1")?;
        let m = &self.multiplicity;
        range(m.shift.is_finite() && m.shift > 0.0, "multiplicity.shift", m.shift, "shift > 0")?;
        range(m.power.is_finite() && m.power >= 1.0, "multiplicity.power", m.power, "power >= 1")?;
        Ok(())
    }

    pub fn domain(&self) -> Result<GridDomain, GridError> {
        GridDomain::new(self.domain.dimension, &self.domain.lengths, &self.domain.nodes)
    }

    /// Problem parameters with `mu = 0`; the actual `mu` may depend on `mu*`.
    pub fn base_params(&self) -> Result<ProblemParams, ParamsError> {
        ProblemParams::new(self.problem.p, self.problem.q, 0.0)
    }

    /// The single `mu` of the run, given `mu*` for relative specifications.
    pub fn resolve_mu(&self, mu_star: f64) -> Option<f64> {
        match (self.problem.mu, self.problem.mu_fraction) {
            (Some(mu), _) => Some(mu),
            (None, Some(f)) => Some(f * mu_star),
            (None, None) => None,
        }
    }

    /// Sweep values in ascending order, given `mu*` for relative sweeps.
    pub fn sweep_values(&self, mu_star: f64) -> Option<Vec<f64>> {
        let s = self.sweep.as_ref()?;
        let scale = if s.relative { mu_star } else { 1.0 };
        let values = (0..s.count)
            .map(|i| {
                let t = if s.count == 1 {
                    0.0
                } else {
                    i as f64 / (s.count - 1) as f64
                };
                let v = match s.spacing {
                    Spacing::Linear => s.start + t * (s.stop - s.start),
                    Spacing::Log => s.start * (s.stop / s.start).powf(t),
                };
                v * scale
            })
            .collect();
        Some(values)
    }

    /// Seed from the command line, else from `[run]`, else 0.
    pub fn seed(&self, cli: Option<u64>) -> u64 {
        cli.or(self.run.seed).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[domain]\ndimension = 1\nlengths = [1.0]\nnodes = [15]\n\n[problem]\np = 3.0\nq = 1.5\nmu = 0.25\n";

    #[test]
    fn defaults_fill_optional_sections() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverSection::default());
        assert_eq!(c.multiplicity.want, 3);
        assert!(c.sweep.is_none());
        assert_eq!(c.seed(None), 0);
        assert_eq!(c.seed(Some(7)), 7);
    }

    #[test]
    fn q_out_of_range_names_field_and_bound() {
        let text = MINIMAL.replace("q = 1.5", "q = 2.5");
        let err = RunConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("problem.q") && msg.contains("1 < q < 2"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn conflicting_mu() {
        let text = format!("{MINIMAL}mu_fraction = 0.5\n");
        assert_eq!(RunConfig::parse(&text).unwrap_err(), ConfigError::ConflictingMu);
    }

    #[test]
    fn sweep_spacings() {
        let text = format!(
            "{MINIMAL}\n[sweep]\nstart = 1.0\nstop = 100.0\ncount = 3\nspacing = \"log\"\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let v = c.sweep_values(5.0).unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        let text = format!(
            "{MINIMAL}\n[sweep]\nstart = 0.2\nstop = 0.6\ncount = 3\nrelative = true\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let v = c.sweep_values(10.0).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] - 4.0).abs() < 1e-12 && (v[2] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let canon = c.to_canonical();
        let again = RunConfig::parse(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_canonical(), canon);
    }
}
