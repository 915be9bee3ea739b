//! Thin dense linear-algebra layer over `faer`.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Col, ColRef, Mat, MatMut, MatRef, Side};

use crate::error::{PilmError, Result};

pub fn all_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn symmetric_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if !all_finite(m) {
        return Err(PilmError::NonFinite);
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| PilmError::EigenFailure)
}

/// Eigenvalues in nondecreasing order with matching orthonormal eigenvectors
/// as columns.
pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    if !all_finite(m) {
        return Err(PilmError::NonFinite);
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| PilmError::EigenFailure)?;
    let (s, u) = (evd.S(), evd.U());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), m.nrows(), |i, j| u[(i, order[j])]);
    Ok((values, vectors))
}

/// Replace `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `dst += weight · (a ⊗ b)`, skipping structurally zero entries of `a`.
pub fn kron_accumulate(mut dst: MatMut<'_, f64>, weight: f64, a: MatRef<'_, f64>, b: MatRef<'_, f64>) {
    let (br, bc) = (b.nrows(), b.ncols());
    assert_eq!(dst.nrows(), a.nrows() * br);
    assert_eq!(dst.ncols(), a.ncols() * bc);
    for ja in 0..a.ncols() {
        for ia in 0..a.nrows() {
            let s = weight * a[(ia, ja)];
            if s == 0.0 {
                continue;
            }
            for jb in 0..bc {
                let col = ja * bc + jb;
                for ib in 0..br {
                    dst[(ia * br + ib, col)] += s * b[(ib, jb)];
                }
            }
        }
    }
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_chain(factors: &[MatRef<'_, f64>]) -> Mat<f64> {
    let mut acc = Mat::<f64>::from_fn(1, 1, |_, _| 1.0);
    for f in factors {
        let mut next = Mat::<f64>::zeros(acc.nrows() * f.nrows(), acc.ncols() * f.ncols());
        kron_accumulate(next.as_mut(), 1.0, acc.as_ref(), *f);
        acc = next;
    }
    acc
}

pub fn quadratic_form(m: MatRef<'_, f64>, x: ColRef<'_, f64>) -> f64 {
    accurate_quadratic_form(m, x)
}

/// `Σ xᵢyᵢ` in twice the working precision (compensated dot product), then
/// rounded once.
pub fn dot2(x: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (a, b) in x {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let s = hi + p;
        let z = s - hi;
        let se = (hi - (s - z)) + (p - z);
        hi = s;
        lo += pe + se;
    }
    hi + lo
}

/// `b − M x` with each entry evaluated by [`dot2`].
pub fn accurate_residual(m: MatRef<'_, f64>, x: ColRef<'_, f64>, b: ColRef<'_, f64>) -> Col<f64> {
    Col::from_fn(m.nrows(), |i| {
        dot2(std::iter::once((b[i], 1.0)).chain((0..m.ncols()).map(|j| (m[(i, j)], -x[j]))))
    })
}

/// `xᵀ M x` with compensated products, accurate when `Mx` is much smaller
/// than `|M||x|`.
pub fn accurate_quadratic_form(m: MatRef<'_, f64>, x: ColRef<'_, f64>) -> f64 {
    let mx: Vec<f64> = (0..m.nrows()).map(|i| dot2((0..m.ncols()).map(|j| (m[(i, j)], x[j])))).collect();
    dot2((0..x.nrows()).map(|i| (x[i], mx[i])))
}

pub fn norm2(x: ColRef<'_, f64>) -> f64 {
    x.norm_l2()
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky {
    llt: Llt<f64>,
}

impl Cholesky {
    pub fn new(m: MatRef<'_, f64>) -> Option<Self> {
        if !all_finite(m) {
            return None;
        }
        let llt = m.llt(Side::Lower).ok()?;
        let l = llt.L();
        if (0..l.nrows()).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
            return None;
        }
        Some(Self { llt })
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    /// `log det` of the factored matrix.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// Square of the ratio between the extreme diagonal entries of the factor.
    /// A cheap lower bound on the spectral condition number.
    pub fn condition_estimate(&self) -> f64 {
        let l = self.llt.L();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            let v = l[(i, i)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (hi / lo).powi(2)
    }

    pub fn solve_mat(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }

    pub fn solve(&self, rhs: ColRef<'_, f64>) -> Col<f64> {
        self.llt.solve(rhs)
    }
}
