//! Observation systems and the closed-form penalized least-squares solve
//! `a* = (HᵀH + Σ wᵢ Gᵢ)⁻¹ Hᵀd`.

use faer::{Col, Mat};
use log::warn;

use crate::basis::{BSplineBasis1D, TensorBasis};
use crate::error::{PilmError, Result};
use crate::forms::PenaltyMatrix;
use crate::linalg::{self, Cholesky};

/// Condition estimates above this value are reported as warnings.
pub const CONDITION_WARNING: f64 = 1e12;

/// Upper bound on iterative-refinement steps per solve.
const MAX_REFINEMENTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum RowKind {
    Value,
    Derivative(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub kind: RowKind,
    pub location: Vec<f64>,
    pub component: usize,
}

/// A scalar measurement of one component (or one of its derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct PointDatum {
    pub coords: Vec<f64>,
    pub component: usize,
    pub value: f64,
}

impl PointDatum {
    pub fn new(coords: &[f64], component: usize, value: f64) -> Self {
        Self { coords: coords.to_vec(), component, value }
    }
}

/// Design matrix `H`, data `d`, and what each row measures.
#[derive(Debug, Clone)]
pub struct ObservationSystem {
    h: Mat<f64>,
    d: Col<f64>,
    rows: Vec<ObservationRow>,
}

impl ObservationSystem {
    pub fn from_parts(h: Mat<f64>, d: Col<f64>, rows: Vec<ObservationRow>) -> Result<Self> {
        if h.nrows() != d.nrows() || h.nrows() != rows.len() {
            return Err(PilmError::DimensionMismatch(format!(
                "H has {} rows, d has {}, {} row descriptors",
                h.nrows(),
                d.nrows(),
                rows.len()
            )));
        }
        Ok(Self { h, d, rows })
    }

    pub fn h(&self) -> &Mat<f64> {
        &self.h
    }

    pub fn d(&self) -> &Col<f64> {
        &self.d
    }

    pub fn rows(&self) -> &[ObservationRow] {
        &self.rows
    }

    /// Number of scalar measurements `N`.
    pub fn len(&self) -> usize {
        self.h.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.nrows() == 0
    }

    /// Number of model parameters `M`.
    pub fn parameter_count(&self) -> usize {
        self.h.ncols()
    }

    /// Same design, different data vector.
    pub fn with_data(&self, d: Col<f64>) -> Result<Self> {
        Self::from_parts(self.h.clone(), d, self.rows.clone())
    }

    /// Squared misfit `‖d − Ha‖²`.
    pub fn misfit(&self, a: &Col<f64>) -> f64 {
        let r = &self.d - &self.h * a;
        r.squared_norm_l2()
    }

    /// `HᵀH` and `Hᵀd`.
    pub fn normal_parts(&self) -> (Mat<f64>, Col<f64>) {
        let hth = self.h.transpose() * &self.h;
        let htd = self.h.transpose() * &self.d;
        (hth, htd)
    }
}

/// Row-by-row construction of an [`ObservationSystem`].
pub struct ObservationBuilder<'a> {
    basis: &'a TensorBasis,
    entries: Vec<Vec<(usize, f64)>>,
    data: Vec<f64>,
    rows: Vec<ObservationRow>,
}

impl<'a> ObservationBuilder<'a> {
    pub fn new(basis: &'a TensorBasis) -> Self {
        Self { basis, entries: Vec::new(), data: Vec::new(), rows: Vec::new() }
    }

    pub fn value(&mut self, coords: &[f64], component: usize, value: f64) -> Result<&mut Self> {
        let orders = vec![0; self.basis.dims()];
        let row = self.basis.row(coords, &orders, component)?;
        self.push(row, value, ObservationRow { kind: RowKind::Value, location: coords.to_vec(), component });
        Ok(self)
    }

    pub fn derivative(&mut self, coords: &[f64], orders: &[usize], component: usize, value: f64) -> Result<&mut Self> {
        let row = self.basis.row(coords, orders, component)?;
        self.push(
            row,
            value,
            ObservationRow { kind: RowKind::Derivative(orders.to_vec()), location: coords.to_vec(), component },
        );
        Ok(self)
    }

    fn push(&mut self, row: Vec<(usize, f64)>, value: f64, desc: ObservationRow) {
        self.entries.push(row);
        self.data.push(value);
        self.rows.push(desc);
    }

    pub fn build(self) -> ObservationSystem {
        let n = self.data.len();
        let mut h = Mat::<f64>::zeros(n, self.basis.parameter_count());
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, w) in row {
                h[(i, j)] += w;
            }
        }
        let d = Col::<f64>::from_fn(n, |i| self.data[i]);
        ObservationSystem { h, d, rows: self.rows }
    }
}

/// Initial-condition rows `Φ(0)ᵀa = u₀`, `Φ̇(0)ᵀa = v₀`.
pub fn ic_system(basis: &BSplineBasis1D, u0: f64, v0: f64) -> ObservationSystem {
    let tb = TensorBasis::single(basis.clone());
    let mut b = ObservationBuilder::new(&tb);
    b.value(&[0.0], 0, u0).expect("origin is inside every basis domain");
    b.derivative(&[0.0], &[1], 0, v0).expect("origin is inside every basis domain");
    b.build()
}

/// One row per point measurement. Out-of-domain points are rejected with
/// their index.
pub fn point_system(basis: &TensorBasis, points: &[PointDatum]) -> Result<ObservationSystem> {
    let mut b = ObservationBuilder::new(basis);
    for (i, p) in points.iter().enumerate() {
        b.value(&p.coords, p.component, p.value).map_err(|e| match e {
            PilmError::OutOfDomain { .. } => PilmError::PointOutOfDomain { index: i },
            other => other,
        })?;
    }
    Ok(b.build())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTerm {
    pub weight: f64,
    /// `aᵀ G a` at the solution.
    pub value: f64,
}

/// Optimal coefficients with their loss decomposition.
#[derive(Debug, Clone)]
pub struct PilmFit {
    pub coefficients: Col<f64>,
    /// `‖d − Ha*‖²`.
    pub misfit: f64,
    pub penalties: Vec<PenaltyTerm>,
    /// `misfit + Σ wᵢ aᵀGᵢa`.
    pub total_loss: f64,
    /// `log det (HᵀH + Σ wᵢGᵢ)`.
    pub normal_log_det: f64,
    pub condition_estimate: f64,
    /// `‖(HᵀH + Σ wᵢGᵢ)a* − Hᵀd‖ / ‖Hᵀd‖`.
    pub normal_residual: f64,
    pub observations: usize,
}

impl PilmFit {
    pub fn coefficients_vec(&self) -> Vec<f64> {
        (0..self.coefficients.nrows()).map(|i| self.coefficients[i]).collect()
    }

    /// Root-mean-square data residual.
    pub fn rmse(&self) -> f64 {
        (self.misfit / self.observations as f64).sqrt()
    }
}

/// An observation system with `HᵀH` and `Hᵀd` formed once, for repeated
/// solves under different penalties.
#[derive(Debug, Clone)]
pub struct NormalSystem<'a> {
    obs: &'a ObservationSystem,
    hth: Mat<f64>,
    htd: Col<f64>,
}

impl<'a> NormalSystem<'a> {
    pub fn new(obs: &'a ObservationSystem) -> Self {
        let (hth, htd) = obs.normal_parts();
        Self { obs, hth, htd }
    }

    pub fn observations(&self) -> &'a ObservationSystem {
        self.obs
    }

    /// `HᵀH + Σ wᵢGᵢ` and `Hᵀd`.
    pub fn assemble(&self, penalties: &[(f64, &PenaltyMatrix)]) -> Result<(Mat<f64>, Col<f64>)> {
        let n = self.obs.parameter_count();
        let mut normal = self.hth.clone();
        for &(w, g) in penalties {
            if g.dim() != n {
                return Err(PilmError::DimensionMismatch(format!(
                    "penalty of size {} for {n} parameters",
                    g.dim()
                )));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(PilmError::InvalidParameter(format!("penalty weight must be >= 0, got {w}")));
            }
            if w != 0.0 {
                normal += faer::Scale(w) * g.matrix();
            }
        }
        linalg::symmetrize(&mut normal);
        Ok((normal, self.htd.clone()))
    }

    pub fn solve(&self, penalties: &[(f64, &PenaltyMatrix)]) -> Result<PilmFit> {
        let (normal, rhs) = self.assemble(penalties)?;
        solve_assembled(self.obs, &normal, &rhs, penalties)
    }
}

/// Build `HᵀH + Σ wᵢGᵢ` and `Hᵀd`.
pub fn normal_equations(obs: &ObservationSystem, penalties: &[(f64, &PenaltyMatrix)]) -> Result<(Mat<f64>, Col<f64>)> {
    NormalSystem::new(obs).assemble(penalties)
}

/// Size of the numerical null space of a symmetric matrix that failed to factor.
fn deficiency(normal: &Mat<f64>) -> usize {
    match linalg::symmetric_eigenvalues(normal.as_ref()) {
        Ok(eig) => {
            let max = eig.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            let cutoff = max * normal.nrows() as f64 * f64::EPSILON;
            eig.iter().filter(|&&v| v <= cutoff).count().max(1)
        }
        Err(_) => normal.nrows(),
    }
}

/// Factor the normal matrix, solve with iterative refinement on
/// compensated residuals, and decompose the loss.
pub fn solve(obs: &ObservationSystem, penalties: &[(f64, &PenaltyMatrix)]) -> Result<PilmFit> {
    NormalSystem::new(obs).solve(penalties)
}

fn solve_assembled(
    obs: &ObservationSystem,
    normal: &Mat<f64>,
    rhs: &Col<f64>,
    penalties: &[(f64, &PenaltyMatrix)],
) -> Result<PilmFit> {
    let chol = Cholesky::new(normal.as_ref()).ok_or_else(|| PilmError::Underdetermined {
        size: normal.nrows(),
        deficiency: deficiency(normal),
    })?;
    let mut a = chol.solve(rhs.as_ref());
    let mut r = linalg::accurate_residual(normal.as_ref(), a.as_ref(), rhs.as_ref());
    let mut res = r.norm_l2();
    for _ in 0..MAX_REFINEMENTS {
        let candidate = &a + chol.solve(r.as_ref());
        let next = linalg::accurate_residual(normal.as_ref(), candidate.as_ref(), rhs.as_ref());
        let next_res = next.norm_l2();
        if !(next_res < res) {
            break;
        }
        (a, r, res) = (candidate, next, next_res);
    }

    let rhs_norm = rhs.norm_l2();
    let normal_residual = if rhs_norm > 0.0 { res / rhs_norm } else { res };

    let misfit = obs.misfit(&a);
    let terms: Vec<PenaltyTerm> = penalties
        .iter()
        .map(|&(w, g)| PenaltyTerm { weight: w, value: g.energy(&a) })
        .collect();
    let total_loss = misfit + terms.iter().map(|t| t.weight * t.value).sum::<f64>();
    let condition_estimate = chol.condition_estimate();
    if condition_estimate > CONDITION_WARNING {
        warn!("normal matrix is ill-conditioned (estimate {condition_estimate:.3e})");
    }
    Ok(PilmFit {
        coefficients: a,
        misfit,
        penalties: terms,
        total_loss,
        normal_log_det: chol.log_det(),
        condition_estimate,
        normal_residual,
        observations: obs.len(),
    })
}

/// Sample the expansion (or a derivative) at each point.
pub fn evaluate(
    coefficients: &[f64],
    basis: &TensorBasis,
    points: &[Vec<f64>],
    orders: &[usize],
    component: usize,
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|p| basis.evaluate(coefficients, p, orders, component))
        .collect()
}
