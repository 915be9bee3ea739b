//! Metric-by-metric comparison of two run reports.

use std::path::Path;

use pilm::report::{sig, Report};

use crate::error::{CliError, CliResult};

/// Absolute tolerances: one default plus per-metric overrides.
#[derive(Debug, Clone, Default)]
pub struct Tolerances {
    pub default: f64,
    pub per_metric: Vec<(String, f64)>,
}

impl Tolerances {
    /// Parse `--tol` values: a bare number sets the default, `key=value`
    /// sets one metric.
    pub fn parse<'a>(specs: impl IntoIterator<Item = &'a str>) -> CliResult<Self> {
        let mut t = Self::default();
        for s in specs {
            let bad = || CliError::Config(format!("tol: expected a number or key=number, got `{s}`"));
            let parse = |v: &str| v.trim().parse::<f64>().ok().filter(|x| *x >= 0.0).ok_or_else(bad);
            match s.split_once('=') {
                Some((k, v)) => t.per_metric.push((k.trim().to_string(), parse(v)?)),
                None => t.default = parse(s)?,
            }
        }
        Ok(t)
    }

    pub fn for_metric(&self, key: &str) -> f64 {
        self.per_metric.iter().rev().find(|(k, _)| k == key).map_or(self.default, |(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// One line per differing metric.
    pub lines: Vec<String>,
    /// Metrics whose difference exceeds the tolerance.
    pub exceeded: Vec<String>,
}

/// Load `report.txt` from a file or a run directory.
pub fn load_report(path: &Path) -> CliResult<Report> {
    let file = if path.is_dir() { path.join("report.txt") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", file.display())))?;
    Report::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))
}

/// Deltas `b − a` for shared metrics. Numeric metrics exceed when
/// `|b − a|` is above their tolerance; any other change always exceeds.
/// Metrics present in only one report are listed but do not count.
pub fn compare(a: &Report, b: &Report, tol: &Tolerances) -> CliResult<Comparison> {
    let (ea, eb) = (a.get("experiment"), b.get("experiment"));
    if ea.is_none() || ea != eb {
        return Err(CliError::Config(format!(
            "reports come from different experiments ({} vs {})",
            ea.unwrap_or("?"),
            eb.unwrap_or("?")
        )));
    }
    let mut lines = Vec::new();
    let mut exceeded = Vec::new();
    for (key, va) in a.entries() {
        let Some(vb) = b.get(key) else {
            lines.push(format!("{key}: {va} -> (missing)"));
            continue;
        };
        if va == vb {
            continue;
        }
        match (va.parse::<f64>(), vb.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                let delta = y - x;
                let over = !(delta.abs() <= tol.for_metric(key));
                lines.push(format!("{key}: {va} -> {vb} (delta {}){}", sig(delta, 6), if over { " *" } else { "" }));
                if over {
                    exceeded.push(key.clone());
                }
            }
            _ => {
                lines.push(format!("{key}: {va} -> {vb} *"));
                exceeded.push(key.clone());
            }
        }
    }
    for (key, vb) in b.entries() {
        if a.get(key).is_none() {
            lines.push(format!("{key}: (missing) -> {vb}"));
        }
    }
    Ok(Comparison { lines, exceeded })
}
