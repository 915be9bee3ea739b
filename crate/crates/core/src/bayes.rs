//! Marginal-likelihood selection of penalty weights.
//!
//! With Gaussian noise of variance σ² and a Gaussian prior whose precision is
//! `G/ρ²`, the weight `α² = σ²/ρ²` is chosen by maximizing the log marginal
//! likelihood
//!
//! ```text
//! LL = ½[−(N−M+P)(ln 2πσ*² + 1) + P ln α² + ln‖G‖ − ln|HᵀH + α²G|]
//! ```
//!
//! where `σ*² = L(a*)/(N−M+P)`, `P` is the rank of `G` and `‖G‖` its
//! pseudo-determinant. Two penalties combine through
//! `G̃ = G₁ + (α²₂/α²₁) G₂`, which turns the two-weight problem into the
//! one-weight formula.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::error::{PilmError, Result};
use crate::forms::{combine, PenaltyMatrix, PenaltyPair, Spectrum, DEFAULT_EIGEN_TOL};
pub use crate::forms::combined_rank;
use crate::linalg;
use crate::solver::{NormalSystem, PilmFit};

#[derive(Debug, Clone)]
pub struct MarginalLikelihoodResult {
    pub alpha2: f64,
    pub log_likelihood: f64,
    /// Optimal noise variance `σ*²`.
    pub sigma2: f64,
    /// Rank `P` of the penalty.
    pub rank: usize,
    /// `ln‖G‖` over the nonzero eigenvalues.
    pub log_pdet: f64,
    /// `N − M + P`.
    pub dof: usize,
    pub fit: PilmFit,
}

impl MarginalLikelihoodResult {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Log marginal likelihood at weight `alpha2`, using the spectrum of `g`
/// at the default relative tolerance.
pub fn log_marginal_likelihood(
    system: &NormalSystem<'_>,
    alpha2: f64,
    g: &PenaltyMatrix,
) -> Result<MarginalLikelihoodResult> {
    let spectrum = g.spectrum(DEFAULT_EIGEN_TOL)?;
    log_marginal_likelihood_with(system, alpha2, g, &spectrum)
}

/// As [`log_marginal_likelihood`] with a precomputed spectrum of `g`.
pub fn log_marginal_likelihood_with(
    system: &NormalSystem<'_>,
    alpha2: f64,
    g: &PenaltyMatrix,
    spectrum: &Spectrum,
) -> Result<MarginalLikelihoodResult> {
    likelihood_from(system, &[(alpha2, g)], alpha2, spectrum.rank, spectrum.log_pdet)
}

/// The likelihood for penalty terms whose weighted sum equals `alpha2 · G`,
/// where `G` has the given rank and log pseudo-determinant.
fn likelihood_from(
    system: &NormalSystem<'_>,
    penalties: &[(f64, &PenaltyMatrix)],
    alpha2: f64,
    rank: usize,
    log_pdet: f64,
) -> Result<MarginalLikelihoodResult> {
    if !(alpha2 > 0.0) || !alpha2.is_finite() {
        return Err(PilmError::InvalidParameter(format!("alpha^2 must be positive and finite, got {alpha2}")));
    }
    let obs = system.observations();
    let (n, m, p) = (obs.len() as i64, obs.parameter_count() as i64, rank as i64);
    let dof = n - m + p;
    if dof <= 0 {
        return Err(PilmError::InsufficientData { dof });
    }
    let fit = system.solve(penalties)?;
    let dof_f = dof as f64;
    let sigma2 = fit.total_loss / dof_f;
    let ll = 0.5
        * (-dof_f * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + p as f64 * alpha2.ln()
            + log_pdet
            - fit.normal_log_det);
    if !ll.is_finite() {
        return Err(PilmError::NonFinite);
    }
    Ok(MarginalLikelihoodResult {
        alpha2,
        log_likelihood: ll,
        sigma2,
        rank,
        log_pdet,
        dof: dof as usize,
        fit,
    })
}

/// `log10 α²` from −12 to 6 in steps of 0.25.
pub fn default_log_alpha_grid() -> Vec<f64> {
    (0..=72).map(|i| -12.0 + 0.25 * i as f64).collect()
}

#[derive(Debug, Clone)]
pub struct AlphaOptimum {
    pub best: MarginalLikelihoodResult,
    /// `(log10 α², LL)` over the coarse grid and the refinement, sorted by
    /// `log10 α²`. Failed points carry `None`.
    pub curve: Vec<(f64, Option<f64>)>,
    /// The coarse maximizer sits on the first or last grid point.
    pub on_boundary: bool,
    /// Largest relative normal-equation residual over every solved point.
    pub worst_normal_residual: f64,
}

fn scan(
    system: &NormalSystem<'_>,
    g: &PenaltyMatrix,
    spectrum: &Spectrum,
    log_grid: &[f64],
) -> Vec<(f64, Result<MarginalLikelihoodResult>)> {
    log_grid
        .par_iter()
        .map(|&la| (la, log_marginal_likelihood_with(system, 10f64.powf(la), g, spectrum)))
        .collect()
}

fn best_index(points: &[(f64, Result<MarginalLikelihoodResult>)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, r)) in points.iter().enumerate() {
        if let Ok(r) = r {
            if best.is_none_or(|(_, b)| r.log_likelihood > b) {
                best = Some((i, r.log_likelihood));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Grid search for the maximizing `α²` over `log10 α²` values (strictly
/// increasing), refined once on a ten times finer grid around the coarse
/// maximizer.
pub fn optimize_alpha(system: &NormalSystem<'_>, g: &PenaltyMatrix, log_grid: &[f64]) -> Result<AlphaOptimum> {
    if log_grid.is_empty() {
        return Err(PilmError::InvalidParameter("alpha grid is empty".into()));
    }
    if log_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PilmError::InvalidParameter("alpha grid must be strictly increasing".into()));
    }
    let spectrum = g.spectrum(DEFAULT_EIGEN_TOL)?;
    let coarse = scan(system, g, &spectrum, log_grid);
    let ci = best_index(&coarse).ok_or_else(|| {
        let reason = coarse.iter().find_map(|(_, r)| r.as_ref().err().cloned());
        PilmError::NoFeasiblePoint(match reason {
            Some(e) => format!("every alpha grid point failed: {e}"),
            None => "every alpha grid point failed".into(),
        })
    })?;
    let usable: Vec<usize> = (0..coarse.len()).filter(|&i| coarse[i].1.is_ok()).collect();
    let on_boundary = usable.len() > 1 && (ci == usable[0] || ci == usable[usable.len() - 1]);
    if on_boundary {
        warn!("marginal likelihood maximum at grid edge log10 alpha^2 = {}", coarse[ci].0);
    }

    let mut fine_grid = Vec::new();
    if log_grid.len() > 1 {
        let lo = if ci > 0 { log_grid[ci - 1] } else { log_grid[ci] };
        let hi = if ci + 1 < log_grid.len() { log_grid[ci + 1] } else { log_grid[ci] };
        let step = (log_grid[1] - log_grid[0]).min(hi - lo) / 10.0;
        let mut v = lo + step;
        while v < hi - 0.5 * step {
            if (v - log_grid[ci]).abs() > 0.5 * step {
                fine_grid.push(v);
            }
            v += step;
        }
    }
    let fine = scan(system, g, &spectrum, &fine_grid);

    let mut all: Vec<(f64, Result<MarginalLikelihoodResult>)> = coarse.into_iter().chain(fine).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let bi = best_index(&all).expect("coarse maximizer is present");
    let curve = all.iter().map(|(la, r)| (*la, r.as_ref().ok().map(|r| r.log_likelihood))).collect();
    let worst_normal_residual = all.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.fit.normal_residual).fold(0.0, f64::max);
    let best = all.swap_remove(bi).1?;
    Ok(AlphaOptimum { best, curve, on_boundary, worst_normal_residual })
}

/// `−2 LL + 2 N_h`.
pub fn abic(log_likelihood: f64, n_hyper: usize) -> f64 {
    -2.0 * log_likelihood + 2.0 * n_hyper as f64
}

/// Which penalty carries the weight when two are folded into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factorization {
    /// `G₁ + (α²₂/α²₁)G₂` with weight `α²₁`.
    First,
    /// `G₂ + (α²₁/α²₂)G₁` with weight `α²₂`.
    Second,
}

/// The folded penalty for one factorization at weights `(alpha2_1, alpha2_2)`.
pub fn folded_penalty(
    g1: &PenaltyMatrix,
    g2: &PenaltyMatrix,
    alpha2_1: f64,
    alpha2_2: f64,
    via: Factorization,
) -> Result<(f64, PenaltyMatrix)> {
    match via {
        Factorization::First => Ok((alpha2_1, combine(&[(1.0, g1), (alpha2_2 / alpha2_1, g2)])?)),
        Factorization::Second => Ok((alpha2_2, combine(&[(alpha2_1 / alpha2_2, g1), (1.0, g2)])?)),
    }
}

/// Two-weight log marginal likelihood computed through one factorization.
/// Both weights must be positive.
///
/// The normal matrix is assembled from the two penalties at their own
/// weights, so both factorizations share it and differ in the weight and
/// pseudo-determinant they use.
pub fn hybrid_log_likelihood(
    system: &NormalSystem<'_>,
    pair: &PenaltyPair<'_>,
    alpha2_1: f64,
    alpha2_2: f64,
    via: Factorization,
) -> Result<MarginalLikelihoodResult> {
    if !(alpha2_1 > 0.0 && alpha2_2 > 0.0) {
        return Err(PilmError::InvalidParameter("both weights must be positive".into()));
    }
    let (weight, log_pdet) = match via {
        Factorization::First => (alpha2_1, pair.log_pdet(1.0, alpha2_2 / alpha2_1)?),
        Factorization::Second => (alpha2_2, pair.log_pdet(alpha2_1 / alpha2_2, 1.0)?),
    };
    let terms = [(alpha2_1, pair.first()), (alpha2_2, pair.second())];
    likelihood_from(system, &terms, weight, pair.rank(), log_pdet)
}

/// Log marginal likelihood over a grid of weight pairs.
#[derive(Debug, Clone)]
pub struct HybridSurface {
    /// Weights of the first penalty (rows). Zero is allowed.
    pub alpha2_first: Vec<f64>,
    /// Weights of the second penalty (columns). Zero is allowed.
    pub alpha2_second: Vec<f64>,
    /// `cells[i][j]` at `(alpha2_first[i], alpha2_second[j])`; failed cells
    /// are `None`.
    pub cells: Vec<Vec<Option<f64>>>,
    pub combined_rank: usize,
    /// Largest relative normal-equation residual over the solved cells.
    pub worst_normal_residual: f64,
}

impl HybridSurface {
    /// Largest finite value and its indices.
    pub fn max(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|b| v > b.2) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// CSV rows `log10_alpha2_math,log10_alpha2_phys,ll` (empty `ll` for a
    /// failed cell; a zero weight prints as `-inf`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "log10_alpha2_math,log10_alpha2_phys,ll")?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let (a, b) = (self.alpha2_first[i].log10(), self.alpha2_second[j].log10());
                match v {
                    Some(v) => writeln!(out, "{a},{b},{v}")?,
                    None => writeln!(out, "{a},{b},")?,
                }
            }
        }
        Ok(())
    }
}

/// Log marginal likelihood at every `(α²₁, α²₂)` pair.
///
/// A zero weight drops that penalty and uses the other one alone with its
/// own spectrum. Two positive weights are folded onto the larger one.
pub fn hybrid_surface(
    system: &NormalSystem<'_>,
    g1: &PenaltyMatrix,
    g2: &PenaltyMatrix,
    alpha2_first: &[f64],
    alpha2_second: &[f64],
) -> Result<HybridSurface> {
    if alpha2_first.is_empty() || alpha2_second.is_empty() {
        return Err(PilmError::InvalidParameter("hybrid grids must be nonempty".into()));
    }
    if alpha2_first.iter().chain(alpha2_second).any(|&a| !(a >= 0.0) || !a.is_finite()) {
        return Err(PilmError::InvalidParameter("hybrid weights must be finite and >= 0".into()));
    }
    let pair = PenaltyPair::new(g1, g2)?;
    let single1 = g1.spectrum(DEFAULT_EIGEN_TOL)?;
    let single2 = g2.spectrum(DEFAULT_EIGEN_TOL)?;

    let pairs: Vec<(usize, usize)> = (0..alpha2_first.len())
        .flat_map(|i| (0..alpha2_second.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<Option<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a1, a2) = (alpha2_first[i], alpha2_second[j]);
            let r = match (a1 > 0.0, a2 > 0.0) {
                (false, false) => return None,
                (true, false) => log_marginal_likelihood_with(system, a1, g1, &single1),
                (false, true) => log_marginal_likelihood_with(system, a2, g2, &single2),
                (true, true) => {
                    let via = if a1 >= a2 { Factorization::First } else { Factorization::Second };
                    hybrid_log_likelihood(system, &pair, a1, a2, via)
                }
            };
            match r {
                Ok(r) => Some((r.log_likelihood, r.fit.normal_residual)),
                Err(e) => {
                    warn!("hybrid cell ({a1:e}, {a2:e}) failed: {e}");
                    None
                }
            }
        })
        .collect();

    let worst_normal_residual = values.iter().flatten().map(|v| v.1).fold(0.0, f64::max);
    let cells = values
        .chunks(alpha2_second.len())
        .map(|c| c.iter().map(|v| v.map(|v| v.0)).collect())
        .collect();
    Ok(HybridSurface {
        alpha2_first: alpha2_first.to_vec(),
        alpha2_second: alpha2_second.to_vec(),
        cells,
        combined_rank: pair.rank(),
        worst_normal_residual,
    })
}

/// `ln|A|` of a symmetric positive-definite matrix from its eigenvalues; a
/// slower cross-check of the factorization value.
pub fn log_det_by_eigenvalues(m: faer::MatRef<'_, f64>) -> Result<f64> {
    let eig = linalg::symmetric_eigenvalues(m)?;
    if eig.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(PilmError::NotPositiveSemidefinite { eigenvalue: eig[0], scale: *eig.last().unwrap_or(&0.0) });
    }
    Ok(eig.iter().map(|v| v.ln()).sum())
}

/// CSV rows `log10_alpha2,ll` (empty `ll` where the point failed).
pub fn write_curve_csv<W: Write>(curve: &[(f64, Option<f64>)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "log10_alpha2,ll")?;
    for (la, v) in curve {
        match v {
            Some(v) => writeln!(out, "{la},{v}")?,
            None => writeln!(out, "{la},")?,
        }
    }
    Ok(())
}

/// One line of a regularization comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub alpha2: f64,
    pub log_likelihood: f64,
    pub sigma: f64,
    pub rmse: f64,
    pub n_hyper: usize,
}

impl SummaryRow {
    pub fn from_result(label: impl Into<String>, r: &MarginalLikelihoodResult, n_hyper: usize) -> Self {
        Self {
            label: label.into(),
            alpha2: r.alpha2,
            log_likelihood: r.log_likelihood,
            sigma: r.sigma(),
            rmse: r.fit.rmse(),
            n_hyper,
        }
    }

    pub fn abic(&self) -> f64 {
        abic(self.log_likelihood, self.n_hyper)
    }
}

/// Fixed-width table: regularization, LL, σ*, RMSE, ABIC.
pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{:<16} {:>12} {:>8} {:>8} {:>12}", "regularization", "LL", "sigma", "RMSE", "ABIC")?;
    for r in rows {
        writeln!(
            out,
            "{:<16} {:>12.2} {:>8.2} {:>8.2} {:>12.2}",
            r.label,
            r.log_likelihood,
            r.sigma,
            r.rmse,
            r.abic()
        )?;
    }
    Ok(())
}
