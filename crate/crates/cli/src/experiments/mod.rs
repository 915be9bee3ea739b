//! Experiment registry. Each experiment reads its knobs from a
//! [`RunConfig`], writes CSV files into the output directory and fills in a
//! run report.

mod diffusion;
mod elasticity;
mod oscillator;
mod strain;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pilm::report::Report;

use crate::config::{Knob, RunConfig};
use crate::error::{CliError, CliResult};

pub trait Experiment: Sync {
    fn name(&self) -> &'static str;
    /// Figure or table the run reproduces.
    fn reference(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn knobs(&self) -> &'static [Knob];
    fn run(&self, config: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()>;
}

pub struct ExperimentRegistry {
    entries: Vec<Box<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut r = Self { entries: Vec::new() };
        r.register(Box::new(oscillator::Forward));
        r.register(Box::new(oscillator::Scaling));
        r.register(Box::new(oscillator::Inverse));
        r.register(Box::new(diffusion::DiffusionInverse));
        r.register(Box::new(elasticity::ElasticityVerify));
        r.register(Box::new(strain::Strain));
        r.register(Box::new(strain::HybridScan));
        r
    }
}

impl ExperimentRegistry {
    pub fn register(&mut self, experiment: Box<dyn Experiment>) {
        self.entries.retain(|e| e.name() != experiment.name());
        self.entries.push(experiment);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

/// Output directory for one run.
pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write one file through a buffered writer.
    pub fn write<F>(&mut self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush())?;
        Ok(())
    }
}

/// Persist the config, run, and write `report.txt`.
pub fn execute(experiment: &dyn Experiment, config: &RunConfig) -> CliResult<Report> {
    let mut out = Outputs::create(&config.out)?;
    out.write("config.txt", |w| w.write_all(config.render().as_bytes()))?;
    let mut report = Report::new();
    report.set("experiment", experiment.name());
    experiment.run(config, &mut out, &mut report)?;
    out.write("report.txt", |w| w.write_all(report.render().as_bytes()))?;
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Decimal places that resolve a grid step, e.g. 2 for 0.01.
pub fn decimals_for(step: f64) -> usize {
    (-step.log10() - 1e-9).ceil().max(0.0) as usize
}

/// `n` evenly spaced points over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
