//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use pilm::report::Report;

use crate::error::{CliError, CliResult};

/// A tunable input of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct Knob {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

impl Knob {
    pub const fn new(name: &'static str, default: &'static str, help: &'static str) -> Self {
        Self { name, default, help }
    }
}

/// Resolved knob values for one experiment, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub values: Vec<(String, String)>,
    pub out: PathBuf,
}

impl RunConfig {
    /// All knobs at their defaults.
    pub fn defaults(experiment: &str, knobs: &[Knob], out: PathBuf) -> Self {
        Self {
            experiment: experiment.to_string(),
            values: knobs.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect(),
            out,
        }
    }

    /// Override one knob; unknown names are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match self.values.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => {
                entry.1 = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown knob `{key}` for {}", self.experiment))),
        }
    }

    /// Apply `key=value` text.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v)
    }

    /// Apply a config file. Its `experiment` entry must match; `out` sets the
    /// output directory.
    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = Report::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (k, v) in parsed.entries() {
            match k.as_str() {
                "experiment" if v != &self.experiment => {
                    return Err(CliError::Config(format!(
                        "{} is a config for {v}, not {}",
                        path.display(),
                        self.experiment
                    )))
                }
                "experiment" => {}
                "out" => self.out = PathBuf::from(v),
                _ => self.set(k, v)?,
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut r = Report::new();
        r.set("experiment", &self.experiment);
        for (k, v) in &self.values {
            r.set(k.as_str(), v);
        }
        r.set("out", self.out.display());
        r.render()
    }

    pub fn raw(&self, key: &str) -> CliResult<&str> {
        self.values
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::Config(format!("missing knob `{key}`")))
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        parse_f64(key, self.raw(key)?)
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        let v = self.raw(key)?;
        let out: Vec<f64> = split_list(v).map(|s| parse_f64(key, s)).collect::<CliResult<_>>()?;
        if out.is_empty() {
            return Err(CliError::Config(format!("{key}: empty list")));
        }
        Ok(out)
    }

    pub fn usize_list(&self, key: &str) -> CliResult<Vec<usize>> {
        self.f64_list(key)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(CliError::Config(format!("{key}: expected integers, got {x}")))
                }
            })
            .collect()
    }

    /// Comma-separated `a:b` pairs.
    pub fn pair_list(&self, key: &str) -> CliResult<Vec<(f64, f64)>> {
        split_list(self.raw(key)?)
            .map(|s| {
                let (a, b) = s
                    .split_once(':')
                    .ok_or_else(|| CliError::Config(format!("{key}: expected a:b, got `{s}`")))?;
                Ok((parse_f64(key, a)?, parse_f64(key, b)?))
            })
            .collect()
    }

    /// `start:stop:step`, inclusive of `stop` up to rounding.
    pub fn range(&self, key: &str) -> CliResult<Vec<f64>> {
        let v = self.raw(key)?;
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!("{key}: expected start:stop:step, got `{v}`")));
        }
        let (start, stop, step) = (parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(CliError::Config(format!("{key}: need step > 0 and stop >= start")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    }

    pub fn text(&self, key: &str) -> CliResult<String> {
        Ok(self.raw(key)?.to_string())
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(CliError::Config(format!("{key}: value must be finite")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KNOBS: &[Knob] = &[
        Knob::new("length", "10", "domain length"),
        Knob::new("counts", "13,103", "basis sizes"),
        Knob::new("grid", "0:1:0.25", "grid"),
        Knob::new("ics", "1:0,0.5:0.5", "initial conditions"),
    ];

    #[test]
    fn defaults_overrides_and_round_trip() {
        let mut c = RunConfig::defaults("demo", KNOBS, PathBuf::from("out"));
        assert_eq!(c.f64("length").unwrap(), 10.0);
        assert_eq!(c.usize_list("counts").unwrap(), vec![13, 103]);
        assert_eq!(c.range("grid").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.pair_list("ics").unwrap(), vec![(1.0, 0.0), (0.5, 0.5)]);
        c.set_pair("length = 4").unwrap();
        assert_eq!(c.f64("length").unwrap(), 4.0);
        assert!(matches!(c.set("nope", "1"), Err(CliError::Config(_))));
        assert!(matches!(c.set_pair("length"), Err(CliError::Config(_))));

        let dir = std::env::temp_dir().join(format!("pilm-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.txt");
        std::fs::write(&path, c.render()).unwrap();
        let mut back = RunConfig::defaults("demo", KNOBS, PathBuf::from("elsewhere"));
        back.merge_file(&path).unwrap();
        assert_eq!(back, c);

        let mut other = RunConfig::defaults("other", KNOBS, PathBuf::from("x"));
        assert!(matches!(other.merge_file(&path), Err(CliError::Config(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = RunConfig::defaults("demo", KNOBS, PathBuf::from("out"));
        c.set("length", "ten").unwrap();
        assert!(matches!(c.f64("length"), Err(CliError::Config(_))));
        c.set("counts", "13,1.5").unwrap();
        assert!(matches!(c.usize_list("counts"), Err(CliError::Config(_))));
        c.set("grid", "1:0:0.1").unwrap();
        assert!(matches!(c.range("grid"), Err(CliError::Config(_))));
    }
}
