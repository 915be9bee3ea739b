//! Penalty matrices `G` with `aᵀGa = ∫ (residual)²` for linear
//! constant-coefficient differential operators of order at most two.
//!
//! Every penalty is an instance of [`ResidualOperator`]: a list of residual
//! equations, each a weighted sum of partial derivatives of the field
//! components. Squaring a residual and integrating over a rectangle
//! factorizes axis by axis, so each pair of terms contributes a Kronecker
//! product of 1-D integral matrices, first axis on the left.

use std::fmt;
use std::sync::OnceLock;

use faer::{Col, Mat, MatRef};

use crate::basis::MAX_ORDER;
use crate::error::{PilmError, Result};
use crate::integrals::IntegralMatrixSet;
use crate::linalg;

/// Relative eigenvalue cutoff used for rank decisions unless overridden.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;

/// One weighted partial derivative of one field component.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTerm {
    pub component: usize,
    /// Derivative order along each axis.
    pub orders: Vec<usize>,
    pub weight: f64,
}

impl ResidualTerm {
    pub fn new(component: usize, orders: &[usize], weight: f64) -> Self {
        Self { component, orders: orders.to_vec(), weight }
    }
}

/// A system of residual expressions whose squared integrals are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualOperator {
    pub components: usize,
    pub equations: Vec<Vec<ResidualTerm>>,
}

impl ResidualOperator {
    pub fn new(components: usize) -> Self {
        Self { components, equations: Vec::new() }
    }

    pub fn equation(mut self, terms: Vec<ResidualTerm>) -> Self {
        self.equations.push(terms);
        self
    }

    /// Assemble `G` over the given axes.
    pub fn assemble(&self, axes: &[&IntegralMatrixSet]) -> Result<Mat<f64>> {
        if axes.is_empty() {
            return Err(PilmError::DimensionMismatch("no axes given".into()));
        }
        for term in self.equations.iter().flatten() {
            if term.orders.len() != axes.len() {
                return Err(PilmError::DimensionMismatch(format!(
                    "term has {} derivative orders for {} axes",
                    term.orders.len(),
                    axes.len()
                )));
            }
            if let Some(&o) = term.orders.iter().find(|&&o| o > MAX_ORDER) {
                return Err(PilmError::UnsupportedOrder { order: o });
            }
            if term.component >= self.components {
                return Err(PilmError::DimensionMismatch(format!(
                    "term refers to component {} of {}",
                    term.component, self.components
                )));
            }
            if !term.weight.is_finite() {
                return Err(PilmError::InvalidParameter("non-finite residual weight".into()));
            }
        }
        let block: usize = axes.iter().map(|a| a.dim()).product();
        let n = block * self.components;
        let mut g = Mat::<f64>::zeros(n, n);
        for eq in &self.equations {
            for p in eq {
                for q in eq {
                    let w = p.weight * q.weight;
                    if w == 0.0 {
                        continue;
                    }
                    let dst = g.as_mut().submatrix_mut(p.component * block, q.component * block, block, block);
                    add_kron_term(dst, w, axes, &p.orders, &q.orders);
                }
            }
        }
        linalg::symmetrize(&mut g);
        Ok(g)
    }
}

fn add_kron_term(
    dst: faer::MatMut<'_, f64>,
    weight: f64,
    axes: &[&IntegralMatrixSet],
    left: &[usize],
    right: &[usize],
) {
    let factors: Vec<MatRef<'_, f64>> = axes
        .iter()
        .zip(left.iter().zip(right))
        .map(|(ax, (&a, &b))| ax.r(a, b))
        .collect();
    match factors.len() {
        1 => {
            let mut dst = dst;
            let f = factors[0];
            for j in 0..f.ncols() {
                for i in 0..f.nrows() {
                    dst[(i, j)] += weight * f[(i, j)];
                }
            }
        }
        2 => linalg::kron_accumulate(dst, weight, factors[0], factors[1]),
        _ => {
            let head = linalg::kron_chain(&factors[..factors.len() - 1]);
            linalg::kron_accumulate(dst, weight, head.as_ref(), factors[factors.len() - 1]);
        }
    }
}

/// What a penalty encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Ode,
    Pde,
    Math,
    Phys,
    Hybrid,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PenaltyKind::Ode => "ode",
            PenaltyKind::Pde => "pde",
            PenaltyKind::Math => "math",
            PenaltyKind::Phys => "phys",
            PenaltyKind::Hybrid => "hybrid",
        };
        f.write_str(s)
    }
}

/// Rank and log pseudo-determinant of a PSD matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub rank: usize,
    pub log_pdet: f64,
    pub tol: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl Spectrum {
    /// Spectrum summary from eigenvalues sorted in nondecreasing order.
    pub fn from_eigenvalues(eigenvalues: &[f64], tol: f64) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(PilmError::NonFinite);
        }
        let max = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let cutoff = tol * max;
        if min < -cutoff {
            return Err(PilmError::NotPositiveSemidefinite { eigenvalue: min, scale: max });
        }
        let kept: Vec<f64> = eigenvalues.iter().cloned().filter(|&v| v > cutoff).collect();
        Ok(Self {
            rank: kept.len(),
            log_pdet: kept.iter().map(|v| v.ln()).sum(),
            tol,
            min_eigenvalue: if eigenvalues.is_empty() { 0.0 } else { min },
            max_eigenvalue: max,
        })
    }

    /// Spectrum summary whose rank is known in advance: the `rank` largest
    /// eigenvalues form the pseudo-determinant.
    pub fn with_rank(eigenvalues: &[f64], rank: usize) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(PilmError::NonFinite);
        }
        if rank > eigenvalues.len() {
            return Err(PilmError::DimensionMismatch(format!(
                "rank {rank} exceeds {} eigenvalues",
                eigenvalues.len()
            )));
        }
        let kept = &eigenvalues[eigenvalues.len() - rank..];
        if kept.first().is_some_and(|&v| !(v > 0.0)) {
            return Err(PilmError::NotPositiveSemidefinite {
                eigenvalue: kept[0],
                scale: eigenvalues.last().copied().unwrap_or(0.0),
            });
        }
        Ok(Self {
            rank,
            log_pdet: kept.iter().map(|v| v.ln()).sum(),
            tol: 0.0,
            min_eigenvalue: eigenvalues.first().copied().unwrap_or(0.0),
            max_eigenvalue: eigenvalues.last().copied().unwrap_or(0.0),
        })
    }
}

/// Symmetric PSD penalty matrix with a lazily computed eigenvalue list.
#[derive(Debug)]
pub struct PenaltyMatrix {
    matrix: Mat<f64>,
    kind: PenaltyKind,
    eigenvalues: OnceLock<Result<Vec<f64>>>,
}

impl Clone for PenaltyMatrix {
    fn clone(&self) -> Self {
        let eigenvalues = OnceLock::new();
        if let Some(v) = self.eigenvalues.get() {
            let _ = eigenvalues.set(v.clone());
        }
        Self { matrix: self.matrix.clone(), kind: self.kind, eigenvalues }
    }
}

impl PenaltyMatrix {
    /// Wrap a matrix; it is symmetrized and must be finite.
    pub fn new(mut matrix: Mat<f64>, kind: PenaltyKind) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(PilmError::DimensionMismatch(format!(
                "penalty must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !linalg::all_finite(matrix.as_ref()) {
            return Err(PilmError::NonFinite);
        }
        linalg::symmetrize(&mut matrix);
        Ok(Self { matrix, kind, eigenvalues: OnceLock::new() })
    }

    pub fn from_operator(op: &ResidualOperator, axes: &[&IntegralMatrixSet], kind: PenaltyKind) -> Result<Self> {
        Self::new(op.assemble(axes)?, kind)
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `aᵀ G a`.
    pub fn energy(&self, a: &Col<f64>) -> f64 {
        linalg::quadratic_form(self.matrix.as_ref(), a.as_ref())
    }

    /// Eigenvalues in nondecreasing order, computed once.
    pub fn eigenvalues(&self) -> Result<&[f64]> {
        self.eigenvalues
            .get_or_init(|| linalg::symmetric_eigenvalues(self.matrix.as_ref()))
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }

    pub fn spectrum(&self, tol: f64) -> Result<Spectrum> {
        Spectrum::from_eigenvalues(self.eigenvalues()?, tol)
    }
}

/// `m ü + c u̇ + k u` on a single axis.
pub fn ode_operator(m: f64, c: f64, k: f64) -> ResidualOperator {
    ResidualOperator::new(1).equation(vec![
        ResidualTerm::new(0, &[2], m),
        ResidualTerm::new(0, &[1], c),
        ResidualTerm::new(0, &[0], k),
    ])
}

pub fn ode_penalty(r: &IntegralMatrixSet, m: f64, c: f64, k: f64) -> Result<PenaltyMatrix> {
    PenaltyMatrix::from_operator(&ode_operator(m, c, k), &[r], PenaltyKind::Ode)
}

/// Constant coefficients of a scalar second-order PDE in two variables:
/// `Σ weight · ∂^(i,j) u`, first variable on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeCoefficients2D {
    pub terms: Vec<((usize, usize), f64)>,
}

impl PdeCoefficients2D {
    /// `u_t − k u_xx`.
    pub fn diffusion(k: f64) -> Self {
        Self { terms: vec![((1, 0), 1.0), ((0, 2), -k)] }
    }

    pub fn operator(&self) -> ResidualOperator {
        ResidualOperator::new(1).equation(
            self.terms
                .iter()
                .map(|&((i, j), w)| ResidualTerm::new(0, &[i, j], w))
                .collect(),
        )
    }
}

pub fn pde_penalty_2d(
    first: &IntegralMatrixSet,
    second: &IntegralMatrixSet,
    coeffs: &PdeCoefficients2D,
) -> Result<PenaltyMatrix> {
    PenaltyMatrix::from_operator(&coeffs.operator(), &[first, second], PenaltyKind::Pde)
}

/// Integrated squared second derivatives of both velocity components.
pub fn smoothness_operator() -> ResidualOperator {
    let mut op = ResidualOperator::new(2);
    for c in 0..2 {
        op = op
            .equation(vec![ResidualTerm::new(c, &[2, 0], 1.0)])
            .equation(vec![ResidualTerm::new(c, &[1, 1], std::f64::consts::SQRT_2)])
            .equation(vec![ResidualTerm::new(c, &[0, 2], 1.0)]);
    }
    op
}

pub fn smoothness_penalty(rx: &IntegralMatrixSet, ry: &IntegralMatrixSet) -> Result<PenaltyMatrix> {
    PenaltyMatrix::from_operator(&smoothness_operator(), &[rx, ry], PenaltyKind::Math)
}

/// Plane-stress equilibrium constants for a Poisson ratio in `[-1, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    pub nu: f64,
    pub a: f64,
    pub b: f64,
}

impl ElasticConstants {
    pub fn new(nu: f64) -> Result<Self> {
        if !(-1.0..=0.5).contains(&nu) {
            return Err(PilmError::InvalidParameter(format!(
                "Poisson ratio must lie in [-1, 0.5], got {nu}"
            )));
        }
        Ok(Self { nu, a: 2.0 / (1.0 - nu), b: (1.0 + nu) / (1.0 - nu) })
    }
}

/// `(A u_xx + B v_xy + u_yy, A v_yy + B u_xy + v_xx)`.
pub fn elasticity_operator(consts: ElasticConstants) -> ResidualOperator {
    let ElasticConstants { a, b, .. } = consts;
    ResidualOperator::new(2)
        .equation(vec![
            ResidualTerm::new(0, &[2, 0], a),
            ResidualTerm::new(1, &[1, 1], b),
            ResidualTerm::new(0, &[0, 2], 1.0),
        ])
        .equation(vec![
            ResidualTerm::new(1, &[0, 2], a),
            ResidualTerm::new(0, &[1, 1], b),
            ResidualTerm::new(1, &[2, 0], 1.0),
        ])
}

pub fn elasticity_penalty(rx: &IntegralMatrixSet, ry: &IntegralMatrixSet, nu: f64) -> Result<PenaltyMatrix> {
    let consts = ElasticConstants::new(nu)?;
    PenaltyMatrix::from_operator(&elasticity_operator(consts), &[rx, ry], PenaltyKind::Phys)
}

/// Weighted sum `Σ wᵢ Gᵢ`.
pub fn combine(terms: &[(f64, &PenaltyMatrix)]) -> Result<PenaltyMatrix> {
    let first = terms
        .first()
        .ok_or_else(|| PilmError::InvalidParameter("no penalty terms to combine".into()))?;
    let n = first.1.dim();
    let mut out = Mat::<f64>::zeros(n, n);
    let mut kinds = Vec::new();
    for &(w, g) in terms {
        if g.dim() != n {
            return Err(PilmError::DimensionMismatch(format!(
                "cannot combine penalties of size {n} and {}",
                g.dim()
            )));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(PilmError::InvalidParameter(format!("penalty weight must be >= 0, got {w}")));
        }
        if w != 0.0 {
            out += faer::Scale(w) * g.matrix();
            if !kinds.contains(&g.kind()) {
                kinds.push(g.kind());
            }
        }
    }
    let kind = match kinds.as_slice() {
        [single] => *single,
        [] => first.1.kind(),
        _ => PenaltyKind::Hybrid,
    };
    PenaltyMatrix::new(out, kind)
}

/// Rank of `c₁G₁ + c₂G₂` for any `c₁, c₂ > 0`: the dimension outside the
/// common null space. Each penalty is normalized by its largest eigenvalue
/// first so the relative tolerance does not favour either.
pub fn combined_rank(g1: &PenaltyMatrix, g2: &PenaltyMatrix) -> Result<usize> {
    let s1 = g1.spectrum(DEFAULT_EIGEN_TOL)?.max_eigenvalue;
    let s2 = g2.spectrum(DEFAULT_EIGEN_TOL)?.max_eigenvalue;
    let w1 = if s1 > 0.0 { 1.0 / s1 } else { 1.0 };
    let w2 = if s2 > 0.0 { 1.0 / s2 } else { 1.0 };
    let mixed = combine(&[(w1, g1), (w2, g2)])?;
    Ok(mixed.spectrum(DEFAULT_EIGEN_TOL)?.rank)
}

/// Log pseudo-determinant of `w₁G₁ + w₂G₂` for many weight pairs.
///
/// The penalty with the larger weighted top eigenvalue (the dominant one)
/// is diagonalized once. In its eigenbasis the sum splits into a
/// positive-definite block on the dominant range and a Schur complement on
/// the dominant null space, so eigenvalues that only the weaker penalty
/// supplies are not lost to rounding at extreme weight ratios.
pub struct PenaltyPair<'a> {
    first: &'a PenaltyMatrix,
    second: &'a PenaltyMatrix,
    rank: usize,
    views: [OnceLock<Result<DominantView>>; 2],
}

/// The other penalty seen from the eigenbasis of the dominant one, with
/// null directions first. Range rows and columns are scaled by `λ^-½`.
struct DominantView {
    range: Vec<f64>,
    null_dim: usize,
    other: Mat<f64>,
}

impl DominantView {
    fn new(dominant: &PenaltyMatrix, other: &PenaltyMatrix) -> Result<Self> {
        let (values, vectors) = linalg::symmetric_eigen(dominant.matrix())?;
        let top = values.last().copied().unwrap_or(0.0);
        let null_dim = values.iter().filter(|&&v| v <= DEFAULT_EIGEN_TOL * top).count();
        let range = values[null_dim..].to_vec();
        let rotated = vectors.transpose() * other.matrix() * &vectors;
        let scale = |i: usize| if i < null_dim { 1.0 } else { range[i - null_dim].sqrt().recip() };
        let n = values.len();
        let other = Mat::from_fn(n, n, |i, j| rotated[(i, j)] * scale(i) * scale(j));
        Ok(Self { range, null_dim, other })
    }

    /// `ln pdet(w_d D + w_o O)` with the given rank.
    fn log_pdet(&self, w_dominant: f64, w_other: f64, rank: usize) -> Result<f64> {
        let (k, r) = (self.null_dim, self.range.len());
        if rank < r || rank > k + r {
            return Err(PilmError::DimensionMismatch(format!(
                "rank {rank} outside [{r}, {}] for the dominant penalty",
                k + r
            )));
        }
        let rho = w_other / w_dominant;
        // range block: w_d Λ^½ (I + ρ Λ^-½ O_RR Λ^-½) Λ^½
        let mut block = Mat::from_fn(r, r, |i, j| rho * self.other[(k + i, k + j)]);
        for i in 0..r {
            block[(i, i)] += 1.0;
        }
        let chol = linalg::Cholesky::new(block.as_ref()).ok_or(PilmError::NotPositiveSemidefinite {
            eigenvalue: f64::NAN,
            scale: w_dominant,
        })?;
        let mut log_pdet = chol.log_det() + self.range.iter().map(|l| (w_dominant * l).ln()).sum::<f64>();

        let null_rank = rank - r;
        if null_rank > 0 {
            // Schur complement on the null block: w_o (O_NN − ρ Xᵀ (I + ρ Ô_RR)⁻¹ X)
            let x = Mat::from_fn(r, k, |i, j| self.other[(k + i, j)]);
            let y = chol.solve_mat(x.as_ref());
            let coupled = x.transpose() * &y;
            let mut schur = Mat::from_fn(k, k, |i, j| w_other * (self.other[(i, j)] - rho * coupled[(i, j)]));
            linalg::symmetrize(&mut schur);
            let eig = linalg::symmetric_eigenvalues(schur.as_ref())?;
            let spectrum = Spectrum::with_rank(&eig, null_rank)?;
            log_pdet += spectrum.log_pdet;
        }
        Ok(log_pdet)
    }
}

impl<'a> PenaltyPair<'a> {
    pub fn new(first: &'a PenaltyMatrix, second: &'a PenaltyMatrix) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(PilmError::DimensionMismatch(format!(
                "penalties of size {} and {}",
                first.dim(),
                second.dim()
            )));
        }
        let rank = combined_rank(first, second)?;
        Ok(Self { first, second, rank, views: [OnceLock::new(), OnceLock::new()] })
    }

    pub fn first(&self) -> &'a PenaltyMatrix {
        self.first
    }

    pub fn second(&self) -> &'a PenaltyMatrix {
        self.second
    }

    /// Rank of any positive combination.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `ln pdet(w₁G₁ + w₂G₂)` for positive weights.
    pub fn log_pdet(&self, w1: f64, w2: f64) -> Result<f64> {
        if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(PilmError::InvalidParameter(format!("pair weights must be positive, got {w1}, {w2}")));
        }
        let top1 = self.first.spectrum(DEFAULT_EIGEN_TOL)?.max_eigenvalue;
        let top2 = self.second.spectrum(DEFAULT_EIGEN_TOL)?.max_eigenvalue;
        let (slot, dominant, other, wd, wo) = if w1 * top1 >= w2 * top2 {
            (0, self.first, self.second, w1, w2)
        } else {
            (1, self.second, self.first, w2, w1)
        };
        let view = self.views[slot].get_or_init(|| DominantView::new(dominant, other));
        view.as_ref().map_err(|e| e.clone())?.log_pdet(wd, wo, self.rank)
    }
}
