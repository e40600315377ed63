//! Plain-text grid function profiles.
//!
//! ```text
//! dim N1 [N2 [N3]] L1 [L2 [L3]]
//! <value>
//! ...
//! ```
//! Values are in lexicographic node order with 17 significant digits.

use std::fmt::Write as _;

use super::{GridDomain, GridError, GridFunction};

pub fn write_grid_function(u: &GridFunction) -> String {
    let d = u.domain();
    let mut out = String::with_capacity(26 * (u.len() + 1));
    out.push_str(&d.dim().to_string());
    for n in d.nodes() {
        let _ = write!(out, " {n}");
    }
    for l in d.lengths() {
        let _ = write!(out, " {}", format_f64(*l));
    }
    out.push('\n');
    for v in u.values() {
        out.push_str(&format_f64(*v));
        out.push('\n');
    }
    out
}

fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_grid_function(text: &str) -> Result<GridFunction, GridError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| GridError::Parse("missing header line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = fields
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GridError::Parse(format!("bad dimension in header {header:?}")))?;
    if fields.len() != 1 + 2 * dim {
        return Err(GridError::Parse(format!(
            "header {header:?} should have {} fields",
            1 + 2 * dim
        )));
    }
    let nodes = fields[1..=dim]
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| GridError::Parse(format!("node count: {e}")))?;
    let lengths = fields[dim + 1..]
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| GridError::Parse(format!("side length: {e}")))?;
    let domain = GridDomain::new(dim, &lengths, &nodes)?;
    let values = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| GridError::Parse(format!("value {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    GridFunction::new(domain, values)
}
