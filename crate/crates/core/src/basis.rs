//! Cubic B-spline bases on uniform knots.
//!
//! The reference function is the symmetric cubic B-spline supported on
//! `(-2, 2)`. Basis `i` of a 1-D family on `[0, T]` is the reference
//! function centered at `(i - 1)·Δ` with `Δ = T / (M - 3)`, so the first and
//! last three functions are cut off by the domain ends.

use crate::error::{PilmError, Result};

/// Highest derivative order that is continuous across knots.
pub const MAX_ORDER: usize = 2;

/// Six times the coefficients (ascending powers of `x`) of the four pieces
/// on `[-2,-1]`, `[-1,0]`, `[0,1]`, `[1,2]`. Integers, so shifting them is exact.
const PIECES: [[f64; 4]; 4] = [
    [8.0, 12.0, 6.0, 1.0],
    [4.0, 0.0, -6.0, -3.0],
    [4.0, 0.0, -6.0, 3.0],
    [8.0, -12.0, 6.0, -1.0],
];

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(PilmError::UnsupportedOrder { order })
    } else {
        Ok(())
    }
}

/// Cubic polynomial in ascending-power form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.0;
        ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
    }

    pub fn derivative(&self, order: usize) -> Cubic {
        let mut c = self.0;
        for _ in 0..order {
            c = [c[1], 2.0 * c[2], 3.0 * c[3], 0.0];
        }
        Cubic(c)
    }

    /// `p(x + h)` as a polynomial in `x`.
    pub fn shifted(&self, h: f64) -> Cubic {
        let c = &self.0;
        Cubic([
            c[0] + c[1] * h + c[2] * h * h + c[3] * h * h * h,
            c[1] + 2.0 * c[2] * h + 3.0 * c[3] * h * h,
            c[2] + 3.0 * c[3] * h,
            c[3],
        ])
    }
}

/// The reference cubic B-spline and its first two derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceSpline;

impl ReferenceSpline {
    /// Piece `k ∈ {-2, -1, 0, 1}` covering `[k, k + 1]`.
    pub fn piece(k: i32) -> Cubic {
        Cubic(PIECES[(k + 2) as usize].map(|c| c / 6.0))
    }

    /// Piece `k` re-expressed in the local coordinate `s = x - k ∈ [0, 1]`.
    pub fn local_piece(k: i32) -> Cubic {
        Cubic(Cubic(PIECES[(k + 2) as usize]).shifted(k as f64).0.map(|c| c / 6.0))
    }

    pub fn eval(x: f64, order: usize) -> Result<f64> {
        check_order(order)?;
        Ok(Self::eval_unchecked(x, order))
    }

    fn eval_unchecked(x: f64, order: usize) -> f64 {
        if !(x > -2.0 && x < 2.0) {
            return 0.0;
        }
        let k = (x.floor() as i32).clamp(-2, 1);
        Self::piece(k).derivative(order).eval(x)
    }
}

/// `M` translated cubic B-splines on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis1D {
    length: f64,
    count: usize,
    spacing: f64,
}

impl BSplineBasis1D {
    pub fn new(length: f64, count: usize) -> Result<Self> {
        if count < 4 {
            return Err(PilmError::InvalidBasis(format!(
                "at least 4 basis functions are required, got {count}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(PilmError::InvalidBasis(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            length,
            count,
            spacing: length / (count - 3) as f64,
        })
    }

    /// Basis whose knot spacing is `spacing`; `length / spacing` must be an integer.
    pub fn with_spacing(length: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(PilmError::InvalidBasis(format!("spacing must be positive, got {spacing}")));
        }
        let intervals = length / spacing;
        let rounded = intervals.round();
        if rounded < 1.0 || (intervals - rounded).abs() > 1e-9 * intervals.max(1.0) {
            return Err(PilmError::InvalidBasis(format!(
                "spacing {spacing} does not divide the domain length {length}"
            )));
        }
        Self::new(length, rounded as usize + 3)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of knot intervals, `M - 3`.
    pub fn intervals(&self) -> usize {
        self.count - 3
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 - 1.0) * self.spacing
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= 0.0 && t <= self.length
    }

    /// Knot interval containing `t` and the local coordinate inside it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let u = t / self.spacing;
        let j = (u.floor().max(0.0) as usize).min(self.intervals() - 1);
        (j, u - j as f64)
    }

    /// The (at most four) nonzero basis values at `t`: functions
    /// `start..start + 4`, already scaled for the derivative order.
    pub fn eval_local(&self, t: f64, order: usize) -> Result<(usize, [f64; 4])> {
        check_order(order)?;
        if !self.contains(t) {
            return Err(PilmError::OutOfDomain { value: t, lo: 0.0, hi: self.length });
        }
        let (j, s) = self.locate(t);
        let scale = self.spacing.powi(-(order as i32));
        let mut vals = [0.0; 4];
        for (p, v) in vals.iter_mut().enumerate() {
            // basis j + p sees the piece k = 1 - p on this interval
            let k = 1 - p as i32;
            *v = ReferenceSpline::local_piece(k).derivative(order).eval(s) * scale;
        }
        Ok((j, vals))
    }

    /// Dense evaluation vector `Φ^(order)(t)` of length `M`.
    pub fn eval_vector(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let (start, vals) = self.eval_local(t, order)?;
        let mut out = vec![0.0; self.count];
        out[start..start + 4].copy_from_slice(&vals);
        Ok(out)
    }

    /// `φ_i^(order)(t)` from the reference function directly.
    pub fn eval_single(&self, i: usize, t: f64, order: usize) -> Result<f64> {
        check_order(order)?;
        if !self.contains(t) {
            return Err(PilmError::OutOfDomain { value: t, lo: 0.0, hi: self.length });
        }
        let x = (t - self.center(i)) / self.spacing;
        Ok(ReferenceSpline::eval_unchecked(x, order) * self.spacing.powi(-(order as i32)))
    }
}

/// Tensor-product basis over one or more axes, carrying one or more field
/// components.
///
/// Parameters are laid out component-major; within a component the first
/// axis varies slowest, i.e. index `k·M_x + l` for axes `(t, x)`. Each axis
/// covers `[origin, origin + length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    axes: Vec<BSplineBasis1D>,
    origins: Vec<f64>,
    components: usize,
}

impl TensorBasis {
    pub fn new(axes: Vec<BSplineBasis1D>, components: usize) -> Result<Self> {
        let origins = vec![0.0; axes.len()];
        Self::with_origins(axes, origins, components)
    }

    pub fn with_origins(axes: Vec<BSplineBasis1D>, origins: Vec<f64>, components: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(PilmError::InvalidBasis("at least one axis is required".into()));
        }
        if origins.len() != axes.len() {
            return Err(PilmError::DimensionMismatch(format!(
                "{} origins for {} axes",
                origins.len(),
                axes.len()
            )));
        }
        if components == 0 {
            return Err(PilmError::InvalidBasis("at least one component is required".into()));
        }
        Ok(Self { axes, origins, components })
    }

    pub fn single(axis: BSplineBasis1D) -> Self {
        Self { axes: vec![axis], origins: vec![0.0], components: 1 }
    }

    pub fn axes(&self) -> &[BSplineBasis1D] {
        &self.axes
    }

    pub fn origins(&self) -> &[f64] {
        &self.origins
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn per_component(&self) -> usize {
        self.axes.iter().map(|a| a.count()).product()
    }

    pub fn parameter_count(&self) -> usize {
        self.per_component() * self.components
    }

    /// Nonzero entries `(column, value)` of the evaluation row at `coords`.
    pub fn row(&self, coords: &[f64], orders: &[usize], component: usize) -> Result<Vec<(usize, f64)>> {
        if coords.len() != self.dims() || orders.len() != self.dims() {
            return Err(PilmError::DimensionMismatch(format!(
                "expected {} coordinates and orders, got {} and {}",
                self.dims(),
                coords.len(),
                orders.len()
            )));
        }
        if component >= self.components {
            return Err(PilmError::DimensionMismatch(format!(
                "component {component} out of range ({} components)",
                self.components
            )));
        }
        let mut entries = vec![(0usize, 1.0f64)];
        for ((axis, (&c, &o)), &origin) in self.axes.iter().zip(coords.iter().zip(orders)).zip(&self.origins) {
            let (start, vals) = axis.eval_local(c - origin, o).map_err(|e| match e {
                PilmError::OutOfDomain { value, .. } => PilmError::OutOfDomain {
                    value: value + origin,
                    lo: origin,
                    hi: origin + axis.length(),
                },
                other => other,
            })?;
            let m = axis.count();
            let mut next = Vec::with_capacity(entries.len() * 4);
            for &(idx, v) in &entries {
                for (p, &w) in vals.iter().enumerate() {
                    next.push((idx * m + start + p, v * w));
                }
            }
            entries = next;
        }
        let offset = component * self.per_component();
        for e in &mut entries {
            e.0 += offset;
        }
        Ok(entries)
    }

    /// Value of the expansion (or a derivative of it) at `coords`.
    pub fn evaluate(&self, coefficients: &[f64], coords: &[f64], orders: &[usize], component: usize) -> Result<f64> {
        if coefficients.len() != self.parameter_count() {
            return Err(PilmError::DimensionMismatch(format!(
                "{} coefficients for {} parameters",
                coefficients.len(),
                self.parameter_count()
            )));
        }
        Ok(self
            .row(coords, orders, component)?
            .into_iter()
            .map(|(i, w)| w * coefficients[i])
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn reference_values() {
        assert!(close(ReferenceSpline::eval(0.0, 0).unwrap(), 2.0 / 3.0));
        assert!(close(ReferenceSpline::eval(1.0, 0).unwrap(), 1.0 / 6.0));
        assert_eq!(ReferenceSpline::eval(2.0, 0).unwrap(), 0.0);
        assert!(close(ReferenceSpline::eval(0.0, 2).unwrap(), -2.0));
        assert!(close(ReferenceSpline::eval(-1.5, 0).unwrap(), 1.0 / 48.0));
        assert_eq!(ReferenceSpline::eval(-7.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn third_derivative_rejected() {
        assert_eq!(
            ReferenceSpline::eval(0.3, 3),
            Err(PilmError::UnsupportedOrder { order: 3 })
        );
    }

    #[test]
    fn pieces_join_with_two_continuous_derivatives() {
        for order in 0..=2 {
            for k in -2..=2 {
                let x = k as f64;
                let left = if k > -2 {
                    ReferenceSpline::piece(k - 1).derivative(order).eval(x)
                } else {
                    0.0
                };
                let right = if k < 2 {
                    ReferenceSpline::piece(k).derivative(order).eval(x)
                } else {
                    0.0
                };
                assert!((left - right).abs() < 1e-14, "order {order} at {x}: {left} vs {right}");
            }
        }
    }

    #[test]
    fn basis_spacing_and_centers() {
        let b = BSplineBasis1D::new(10.0, 13).unwrap();
        assert_eq!(b.spacing(), 1.0);
        assert_eq!(b.center(0), -1.0);
        assert_eq!(b.center(12), 11.0);
        let b = BSplineBasis1D::new(10.0, 103).unwrap();
        assert!((b.spacing() - 0.1).abs() < 1e-15);
        let b = BSplineBasis1D::new(1.0, 4).unwrap();
        assert_eq!((b.spacing(), b.intervals()), (1.0, 1));
    }

    #[test]
    fn invalid_bases_rejected() {
        assert!(BSplineBasis1D::new(10.0, 3).is_err());
        assert!(BSplineBasis1D::new(0.0, 13).is_err());
        assert!(BSplineBasis1D::new(-1.0, 13).is_err());
        assert!(BSplineBasis1D::with_spacing(400.0, 30.0).is_err());
        assert_eq!(BSplineBasis1D::with_spacing(400.0, 20.0).unwrap().count(), 23);
    }

    #[test]
    fn eval_vector_support() {
        let b = BSplineBasis1D::new(10.0, 13).unwrap();
        let v = b.eval_vector(0.5, 0).unwrap();
        for (i, x) in v.iter().enumerate() {
            assert_eq!(*x != 0.0, i <= 3, "index {i}");
        }
        assert!(b.eval_vector(10.5, 0).is_err());
        assert!(b.eval_vector(-1e-9, 0).is_err());
    }

    #[test]
    fn eval_vector_matches_single_evaluation() {
        let b = BSplineBasis1D::new(7.0, 11).unwrap();
        for &t in &[0.0, 0.3, 1.75, 3.5, 6.99, 7.0] {
            for order in 0..=2 {
                let v = b.eval_vector(t, order).unwrap();
                for (i, &x) in v.iter().enumerate() {
                    let y = b.eval_single(i, t, order).unwrap();
                    assert!((x - y).abs() < 1e-12, "t={t} order={order} i={i}");
                }
            }
        }
    }

    #[test]
    fn ic_row_support_at_origin() {
        let b = BSplineBasis1D::new(10.0, 13).unwrap();
        let v = b.eval_vector(0.0, 0).unwrap();
        assert!(v[..3].iter().all(|&x| x > 0.0));
        assert!(v[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tensor_row_layout() {
        let bt = BSplineBasis1D::new(2.0, 5).unwrap();
        let bx = BSplineBasis1D::new(1.0, 6).unwrap();
        let tb = TensorBasis::new(vec![bt.clone(), bx.clone()], 2).unwrap();
        assert_eq!(tb.parameter_count(), 60);
        let row = tb.row(&[0.7, 0.4], &[1, 0], 1).unwrap();
        assert_eq!(row.len(), 16);
        let vt = bt.eval_vector(0.7, 1).unwrap();
        let vx = bx.eval_vector(0.4, 0).unwrap();
        for (idx, w) in row {
            let local = idx - 30;
            let (k, l) = (local / 6, local % 6);
            assert!((w - vt[k] * vx[l]).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_origin_shift() {
        let ax = BSplineBasis1D::new(4.0, 7).unwrap();
        let tb = TensorBasis::with_origins(vec![ax.clone(), ax], vec![-2.0, -2.0], 1).unwrap();
        assert!(tb.row(&[0.0, -2.0], &[0, 0], 0).is_ok());
        assert!(matches!(
            tb.row(&[2.5, 0.0], &[0, 0], 0),
            Err(PilmError::OutOfDomain { .. })
        ));
    }
}
