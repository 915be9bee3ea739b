//! Exact integrals `R^ab = ∫ Φ^(a) Φ^(b)ᵀ dt` over the basis domain.
//!
//! On every knot interval the four live basis functions are cubics in the
//! local coordinate, so each entry is a sum of integrals of polynomials of
//! degree at most six. These are evaluated in closed form from coefficient
//! products; nothing is sampled.

use std::io::Write;

use faer::{Mat, MatRef};

use crate::basis::{BSplineBasis1D, Cubic, ReferenceSpline, MAX_ORDER};
use crate::error::{PilmError, Result};

const ORDERS: usize = MAX_ORDER + 1;

/// `∫₀¹ p(s) q(s) ds` for two cubics.
fn product_integral(p: &Cubic, q: &Cubic) -> f64 {
    let mut total = 0.0;
    for (i, &a) in p.0.iter().enumerate() {
        for (j, &b) in q.0.iter().enumerate() {
            total += a * b / (i + j + 1) as f64;
        }
    }
    total
}

/// 4×4 element integrals on one unit interval: entry `(p, q)` couples the
/// basis functions `j + p` and `j + q` living on interval `j`.
fn element_matrix(a: usize, b: usize) -> [[f64; 4]; 4] {
    let mut e = [[0.0; 4]; 4];
    for (p, row) in e.iter_mut().enumerate() {
        let fp = ReferenceSpline::local_piece(1 - p as i32).derivative(a);
        for (q, v) in row.iter_mut().enumerate() {
            let fq = ReferenceSpline::local_piece(1 - q as i32).derivative(b);
            *v = product_integral(&fp, &fq);
        }
    }
    e
}

/// All nine `R^ab` for `a, b ∈ {0, 1, 2}` of one 1-D basis.
#[derive(Debug, Clone)]
pub struct IntegralMatrixSet {
    basis: BSplineBasis1D,
    r: Vec<Mat<f64>>,
}

impl IntegralMatrixSet {
    pub fn new(basis: &BSplineBasis1D) -> Self {
        let m = basis.count();
        let delta = basis.spacing();
        let mut r = Vec::with_capacity(ORDERS * ORDERS);
        for a in 0..ORDERS {
            for b in 0..ORDERS {
                let e = element_matrix(a, b);
                let scale = delta.powi(1 - (a + b) as i32);
                let mut mat = Mat::<f64>::zeros(m, m);
                for j in 0..basis.intervals() {
                    for (p, row) in e.iter().enumerate() {
                        for (q, &v) in row.iter().enumerate() {
                            mat[(j + p, j + q)] += scale * v;
                        }
                    }
                }
                r.push(mat);
            }
        }
        Self { basis: basis.clone(), r }
    }

    pub fn basis(&self) -> &BSplineBasis1D {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.count()
    }

    pub fn get(&self, a: usize, b: usize) -> Result<MatRef<'_, f64>> {
        if a > MAX_ORDER || b > MAX_ORDER {
            return Err(PilmError::UnsupportedOrder { order: a.max(b) });
        }
        Ok(self.r[a * ORDERS + b].as_ref())
    }

    /// Same as [`get`](Self::get) for orders known to be valid.
    pub fn r(&self, a: usize, b: usize) -> MatRef<'_, f64> {
        self.r[a * ORDERS + b].as_ref()
    }

    /// Write every matrix as CSV rows `a,b,i,j,value` (nonzero entries only).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "a,b,i,j,value")?;
        for a in 0..ORDERS {
            for b in 0..ORDERS {
                let m = self.r(a, b);
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            writeln!(out, "{a},{b},{i},{j},{v}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
