//! Independent reference computations for the integration tests.
//!
//! The reference spline is written out from its textbook piecewise form in
//! powers of `|x|`, and integrals use 4-point Gauss-Legendre quadrature on
//! each knot interval, exact for polynomials up to degree 7.

#![allow(dead_code)]

use pilm::forms::ResidualOperator;

/// 4-point Gauss-Legendre nodes and weights on [-1, 1].
const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Cubic B-spline `φ̄(x)` and its first two derivatives, by cases on `|x|`.
pub fn phi(x: f64, order: usize) -> f64 {
    let s = x.abs();
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    if s >= 2.0 {
        return 0.0;
    }
    if s < 1.0 {
        // (3s³ − 6s² + 4)/6
        match order {
            0 => (3.0 * s * s * s - 6.0 * s * s + 4.0) / 6.0,
            1 => sign * (9.0 * s * s - 12.0 * s) / 6.0,
            2 => (18.0 * s - 12.0) / 6.0,
            _ => panic!("order"),
        }
    } else {
        // (2 − s)³/6
        let w = 2.0 - s;
        match order {
            0 => w * w * w / 6.0,
            1 => -sign * w * w / 2.0,
            2 => w,
            _ => panic!("order"),
        }
    }
}

/// `φ_i^(order)(t)` for knot spacing `delta`.
pub fn basis(i: usize, t: f64, delta: f64, order: usize) -> f64 {
    let x = (t - (i as f64 - 1.0) * delta) / delta;
    phi(x, order) / delta.powi(order as i32)
}

/// Quadrature nodes and weights over `[0, length]` split into `intervals`.
pub fn nodes(length: f64, intervals: usize) -> Vec<(f64, f64)> {
    let h = length / intervals as f64;
    let mut out = Vec::with_capacity(4 * intervals);
    for j in 0..intervals {
        let mid = (j as f64 + 0.5) * h;
        for &(x, w) in &GL4 {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// `∫₀ᵀ φ_i^(a) φ_j^(b) dt` for all `i, j`.
pub fn integral_matrix(length: f64, count: usize, a: usize, b: usize) -> Vec<Vec<f64>> {
    let delta = length / (count - 3) as f64;
    let q = nodes(length, count - 3);
    let mut r = vec![vec![0.0; count]; count];
    for &(t, w) in &q {
        let va: Vec<f64> = (0..count).map(|i| basis(i, t, delta, a)).collect();
        let vb: Vec<f64> = (0..count).map(|i| basis(i, t, delta, b)).collect();
        for i in 0..count {
            if va[i] == 0.0 {
                continue;
            }
            for j in 0..count {
                r[i][j] += w * va[i] * vb[j];
            }
        }
    }
    r
}

/// Derivative of the expansion of one component at a point of a tensor
/// basis with the given axis lengths and counts.
pub fn field_derivative(
    coeffs: &[f64],
    lengths: &[f64],
    counts: &[usize],
    component: usize,
    point: &[f64],
    orders: &[usize],
) -> f64 {
    let per: usize = counts.iter().product();
    let base = component * per;
    let per_axis: Vec<Vec<f64>> = (0..counts.len())
        .map(|d| {
            let delta = lengths[d] / (counts[d] - 3) as f64;
            (0..counts[d]).map(|i| basis(i, point[d], delta, orders[d])).collect()
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; counts.len()];
    for flat in 0..per {
        let mut rem = flat;
        for d in (0..counts.len()).rev() {
            idx[d] = rem % counts[d];
            rem /= counts[d];
        }
        let w: f64 = idx.iter().enumerate().map(|(d, &i)| per_axis[d][i]).product();
        if w != 0.0 {
            total += w * coeffs[base + flat];
        }
    }
    total
}

/// `Σ_eq ∫ (residual_eq)²` over the tensor domain by quadrature, reading
/// the residual terms from the operator description.
pub fn residual_energy(op: &ResidualOperator, coeffs: &[f64], lengths: &[f64], counts: &[usize]) -> f64 {
    let q: Vec<Vec<(f64, f64)>> = lengths
        .iter()
        .zip(counts)
        .map(|(&l, &m)| nodes(l, m - 3))
        .collect();
    let mut total = 0.0;
    let mut walk = vec![0usize; q.len()];
    loop {
        let point: Vec<f64> = walk.iter().enumerate().map(|(d, &k)| q[d][k].0).collect();
        let weight: f64 = walk.iter().enumerate().map(|(d, &k)| q[d][k].1).product();
        for eq in &op.equations {
            let r: f64 = eq
                .iter()
                .map(|t| t.weight * field_derivative(coeffs, lengths, counts, t.component, &point, &t.orders))
                .sum();
            total += weight * r * r;
        }
        // odometer over quadrature nodes
        let mut d = q.len();
        loop {
            if d == 0 {
                return total;
            }
            d -= 1;
            walk[d] += 1;
            if walk[d] < q[d].len() {
                break;
            }
            walk[d] = 0;
        }
    }
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

/// Simple deterministic pseudo-random sequence for test vectors.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_f64()).collect()
    }
}
