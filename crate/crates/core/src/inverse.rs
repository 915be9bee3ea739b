//! Profile-likelihood estimation of a scalar equation coefficient.
//!
//! For each trial value θ the coefficients are eliminated in closed form and
//! the resulting loss `L*(θ)` is scanned over a grid.

use std::io::Write;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::error::{PilmError, Result};
use crate::forms::PenaltyMatrix;
use crate::solver::{self, ObservationSystem, PilmFit};

/// Strictly increasing list of trial values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    values: Vec<f64>,
}

impl ParameterGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(PilmError::InvalidParameter("parameter grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PilmError::NonFinite);
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PilmError::InvalidParameter("parameter grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `start, start + step, …` up to and including `stop` (within rounding).
    pub fn arange(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(PilmError::InvalidParameter(format!("bad range {start}..{stop} step {step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| start + i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Observations and weighted penalties at one trial value.
#[derive(Debug, Clone)]
pub struct ProfileSystem {
    pub observations: Arc<ObservationSystem>,
    pub penalties: Vec<(f64, PenaltyMatrix)>,
}

impl ProfileSystem {
    pub fn solve(&self) -> Result<PilmFit> {
        let terms: Vec<(f64, &PenaltyMatrix)> = self.penalties.iter().map(|(w, g)| (*w, g)).collect();
        solver::solve(&self.observations, &terms)
    }
}

/// θ ↦ problem. Closures returning a [`ProfileSystem`] implement this.
pub trait ProfileFamily: Sync {
    fn system(&self, theta: f64) -> Result<ProfileSystem>;
}

impl<F> ProfileFamily for F
where
    F: Fn(f64) -> Result<ProfileSystem> + Sync,
{
    fn system(&self, theta: f64) -> Result<ProfileSystem> {
        self(theta)
    }
}

#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub theta: f64,
    /// Optimal loss, or the failure that made this point unusable.
    pub outcome: std::result::Result<PilmFit, PilmError>,
}

impl ProfilePoint {
    pub fn loss(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|f| f.total_loss)
    }
}

/// Optimal loss at every grid value, in grid order.
pub fn profile_curve<P: ProfileFamily + ?Sized>(family: &P, grid: &ParameterGrid) -> Vec<ProfilePoint> {
    grid.values()
        .par_iter()
        .map(|&theta| {
            let outcome = family.system(theta).and_then(|s| s.solve()).and_then(|f| {
                if f.total_loss.is_finite() {
                    Ok(f)
                } else {
                    Err(PilmError::NonFinite)
                }
            });
            if let Err(e) = &outcome {
                warn!("profile point θ = {theta} unusable: {e}");
            }
            ProfilePoint { theta, outcome }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProfileMinimum {
    pub theta: f64,
    pub index: usize,
    pub fit: PilmFit,
    /// The minimizer sits on the first or last usable grid point.
    pub on_boundary: bool,
}

/// Smallest loss; ties go to the smaller θ.
pub fn argmin(curve: &[ProfilePoint]) -> Result<ProfileMinimum> {
    let usable: Vec<usize> = (0..curve.len()).filter(|&i| curve[i].loss().is_some()).collect();
    let mut best: Option<usize> = None;
    for &i in &usable {
        let l = curve[i].loss().unwrap_or(f64::INFINITY);
        if best.is_none_or(|b| l < curve[b].loss().unwrap_or(f64::INFINITY)) {
            best = Some(i);
        }
    }
    let index = best.ok_or_else(|| PilmError::NoFeasiblePoint("every profile point failed".into()))?;
    let on_boundary = usable.len() > 1 && (index == usable[0] || index == *usable.last().unwrap_or(&index));
    if on_boundary {
        warn!("profile minimum at grid edge θ = {}", curve[index].theta);
    }
    let fit = curve[index].outcome.clone()?;
    Ok(ProfileMinimum { theta: curve[index].theta, index, fit, on_boundary })
}

/// CSV with columns `theta,loss`; failed points have an empty loss.
pub fn write_curve_csv<W: Write>(curve: &[ProfilePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta,loss")?;
    for p in curve {
        match p.loss() {
            Some(l) => writeln!(out, "{},{}", p.theta, l)?,
            None => writeln!(out, "{},", p.theta)?,
        }
    }
    Ok(())
}
