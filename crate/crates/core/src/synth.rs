//! Reference solutions and synthetic datasets.
//!
//! Everything here is computed without the spline machinery so it can serve
//! as ground truth: closed-form oscillator solutions, an explicit
//! finite-difference diffusion solver, polynomial elasticity fields, and a
//! synthetic GNSS velocity field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PilmError, Result};

/// Seeded generator used for every synthetic dataset.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent Gaussian noise of standard deviation `sigma`.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let mut r = rng(seed);
    let dist = Normal::new(0.0, sigma).expect("finite positive sigma");
    (0..n).map(|_| dist.sample(&mut r)).collect()
}

/// `m ü + c u̇ + k u = 0` with `u(0) = u0`, `u̇(0) = v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedOscillator {
    pub m: f64,
    pub c: f64,
    pub k: f64,
}

impl DampedOscillator {
    pub fn new(m: f64, c: f64, k: f64) -> Self {
        Self { m, c, k }
    }

    /// Closed-form displacement at `t`.
    pub fn displacement(&self, u0: f64, v0: f64, t: f64) -> f64 {
        let (m, c, k) = (self.m, self.c, self.k);
        if m == 0.0 {
            // first-order limit; the velocity condition cannot be imposed
            return u0 * (-k / c * t).exp();
        }
        let gamma = c / (2.0 * m);
        let omega0_sq = k / m;
        let disc = gamma * gamma - omega0_sq;
        let scale = omega0_sq.abs().max(gamma * gamma).max(1e-300);
        if disc.abs() <= 1e-12 * scale {
            (u0 + (v0 + gamma * u0) * t) * (-gamma * t).exp()
        } else if disc < 0.0 {
            let w = (-disc).sqrt();
            (-gamma * t).exp() * (u0 * (w * t).cos() + (v0 + gamma * u0) / w * (w * t).sin())
        } else {
            let s = disc.sqrt();
            let (r1, r2) = (-gamma + s, -gamma - s);
            let b = (v0 - r1 * u0) / (r2 - r1);
            let a = u0 - b;
            a * (r1 * t).exp() + b * (r2 * t).exp()
        }
    }
}

/// Explicit finite-difference solution of `u_t = k u_xx` on `[0, length]`
/// with zero Dirichlet ends.
#[derive(Debug, Clone)]
pub struct DiffusionSolution {
    pub length: f64,
    pub dx: f64,
    /// Snapshot times.
    pub times: Vec<f64>,
    /// `snapshots[i][j]` is `u(times[i], j·dx)`.
    pub snapshots: Vec<Vec<f64>>,
}

impl DiffusionSolution {
    /// March from `initial` and record the field at each requested time
    /// (nondecreasing, starting at or after zero).
    pub fn simulate(
        initial: impl Fn(f64) -> f64,
        k: f64,
        length: f64,
        cells: usize,
        times: &[f64],
    ) -> Result<Self> {
        if !(k > 0.0) || cells < 2 || !(length > 0.0) {
            return Err(PilmError::InvalidParameter("diffusion setup needs k > 0, cells >= 2, length > 0".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(PilmError::InvalidParameter("snapshot times must be nondecreasing and >= 0".into()));
        }
        let dx = length / cells as f64;
        let dt_max = 0.4 * dx * dx / k;
        let mut u: Vec<f64> = (0..=cells).map(|j| initial(j as f64 * dx)).collect();
        u[0] = 0.0;
        u[cells] = 0.0;
        let mut next = u.clone();
        let mut now = 0.0;
        let mut snapshots = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - now;
            if span > 0.0 {
                let steps = (span / dt_max).ceil() as usize;
                let dt = span / steps as f64;
                let lam = k * dt / (dx * dx);
                for _ in 0..steps {
                    for j in 1..cells {
                        next[j] = u[j] + lam * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
                    }
                    std::mem::swap(&mut u, &mut next);
                }
                now = target;
            }
            snapshots.push(u.clone());
        }
        Ok(Self { length, dx, times: times.to_vec(), snapshots })
    }

    /// Linear interpolation of snapshot `i` at `x`.
    pub fn sample(&self, i: usize, x: f64) -> f64 {
        let s = &self.snapshots[i];
        let u = (x / self.dx).clamp(0.0, (s.len() - 1) as f64);
        let j = (u.floor() as usize).min(s.len() - 2);
        let f = u - j as f64;
        s[j] * (1.0 - f) + s[j + 1] * f
    }
}

/// Sum of Gaussian bumps `Σ amp · exp(−(x − center)² / (2 width²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProfile {
    pub bumps: Vec<(f64, f64, f64)>,
}

impl GaussianProfile {
    pub fn eval(&self, x: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(amp, center, width)| amp * (-(x - center).powi(2) / (2.0 * width * width)).exp())
            .sum()
    }
}

/// Polynomial displacement fields that satisfy homogeneous plane-stress
/// equilibrium exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticField {
    /// `u = x² − y²`, `v = −2xy`; equilibrium for ν = 0.5.
    Quadratic,
    /// `u = x⁴ − 6x²y² + y⁴`, `v = −4xy(x² − y²)`; equilibrium for ν = 0.
    Quartic,
}

impl ElasticField {
    pub fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            ElasticField::Quadratic => (x * x - y * y, -2.0 * x * y),
            ElasticField::Quartic => (
                x.powi(4) - 6.0 * x * x * y * y + y.powi(4),
                -4.0 * x * y * (x * x - y * y),
            ),
        }
    }

    pub fn poisson_ratio(&self) -> f64 {
        match self {
            ElasticField::Quadratic => 0.5,
            ElasticField::Quartic => 0.0,
        }
    }
}

/// `count` points equally spaced along the perimeter of `[lo, hi]²`,
/// starting at the corner `(lo, lo)` and walking counter-clockwise.
pub fn square_boundary_points(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let side = hi - lo;
    let step = 4.0 * side / count as f64;
    (0..count)
        .map(|i| {
            let s = i as f64 * step;
            let (edge, off) = ((s / side).floor() as usize, s % side);
            match edge.min(3) {
                0 => (lo + off, lo),
                1 => (hi, lo + off),
                2 => (hi - off, hi),
                _ => (lo, hi - off),
            }
        })
        .collect()
}

/// A smooth synthetic horizontal velocity field (mm/yr over km) built from a
/// block translation, a rotation, two localized shear zones, and a dilatation
/// bump.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVelocityModel {
    pub translation: (f64, f64),
    /// Rigid rotation rate (mm/yr per km).
    pub rotation: f64,
    /// Shear zones as (center x, center y, strike angle rad, slip mm/yr, half-width km).
    pub shear_zones: Vec<(f64, f64, f64, f64, f64)>,
    /// Dilatation sources as (x, y, amplitude mm/yr, radius km).
    pub sources: Vec<(f64, f64, f64, f64)>,
}

impl Default for SyntheticVelocityModel {
    fn default() -> Self {
        Self {
            translation: (-5.0, 3.0),
            rotation: 0.004,
            shear_zones: vec![
                (0.0, 100.0, 0.6, 8.0, 25.0),
                (100.0, -100.0, -0.4, 6.0, 20.0),
            ],
            sources: vec![(-80.0, -40.0, 4.0, 60.0)],
        }
    }
}

impl SyntheticVelocityModel {
    pub fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        let (mut u, mut v) = self.translation;
        u += -self.rotation * y;
        v += self.rotation * x;
        for &(cx, cy, angle, slip, width) in &self.shear_zones {
            // strike direction (along which slip happens) and its normal
            let (sx, sy) = (angle.cos(), angle.sin());
            let (nx, ny) = (-sy, sx);
            let dn = (x - cx) * nx + (y - cy) * ny;
            let ds = (x - cx) * sx + (y - cy) * sy;
            // slip profile across the zone, tapering along strike
            let taper = (-(ds / (6.0 * width)).powi(2)).exp();
            let s = slip / std::f64::consts::PI * (dn / width).atan() * taper;
            u += s * sx;
            v += s * sy;
        }
        for &(sx, sy, amp, radius) in &self.sources {
            let (dx, dy) = (x - sx, y - sy);
            let g = amp * (-(dx * dx + dy * dy) / (2.0 * radius * radius)).exp() / radius;
            u += g * dx;
            v += g * dy;
        }
        (u, v)
    }
}

/// Synthetic station positions (km) uniformly scattered in `[-half, half]²`.
pub fn scatter_stations(count: usize, half: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| (r.random_range(-half..=half), r.random_range(-half..=half)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ode_residual(osc: &DampedOscillator, u0: f64, v0: f64, t: f64) -> f64 {
        let h = 1e-4;
        let f = |s: f64| osc.displacement(u0, v0, s);
        let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
        let d2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
        osc.m * d2 + osc.c * d1 + osc.k * f(t)
    }

    #[test]
    fn oscillator_solutions_satisfy_equation_and_ics() {
        for c in [0.0, 1.0, 2.0, 3.0, 0.5] {
            let osc = DampedOscillator::new(1.0, c, 1.0);
            for (u0, v0) in [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)] {
                assert!((osc.displacement(u0, v0, 0.0) - u0).abs() < 1e-14);
                let h = 1e-6;
                let slope = (osc.displacement(u0, v0, h) - osc.displacement(u0, v0, -h)) / (2.0 * h);
                assert!((slope - v0).abs() < 1e-6);
                for t in [0.7, 2.3, 5.0] {
                    assert!(ode_residual(&osc, u0, v0, t).abs() < 1e-5, "c={c}");
                }
            }
        }
        let crit = DampedOscillator::new(1.0, 2.0, 1.0);
        let t: f64 = 1.3;
        assert!((crit.displacement(1.0, 0.0, t) - (1.0 + t) * (-t).exp()).abs() < 1e-15);
    }

    #[test]
    fn diffusion_matches_fourier_mode() {
        // sin(πx/L) decays as exp(−k π² t / L²)
        let (k, l) = (0.1, 2.0);
        let pi = std::f64::consts::PI;
        let sol = DiffusionSolution::simulate(|x| (pi * x / l).sin(), k, l, 200, &[0.0, 1.0, 2.0]).unwrap();
        for (i, &t) in sol.times.iter().enumerate() {
            let decay = (-k * pi * pi * t / (l * l)).exp();
            for x in [0.3, 1.0, 1.7] {
                assert!((sol.sample(i, x) - decay * (pi * x / l).sin()).abs() < 2e-4);
            }
        }
    }

    #[test]
    fn elastic_fields_are_in_equilibrium() {
        let h = 1e-3;
        for field in [ElasticField::Quadratic, ElasticField::Quartic] {
            let nu = field.poisson_ratio();
            let (a, b) = (2.0 / (1.0 - nu), (1.0 + nu) / (1.0 - nu));
            let u = |x: f64, y: f64| field.velocity(x, y).0;
            let v = |x: f64, y: f64| field.velocity(x, y).1;
            let dxx = |f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64| (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
            let dyy = |f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64| (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
            let dxy = |f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64| {
                (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h)
            };
            for (x, y) in [(0.3, -0.2), (0.9, 0.7), (-0.5, 0.1)] {
                let r1 = a * dxx(&u, x, y) + b * dxy(&v, x, y) + dyy(&u, x, y);
                let r2 = a * dyy(&v, x, y) + b * dxy(&u, x, y) + dxx(&v, x, y);
                assert!(r1.abs() < 1e-4 && r2.abs() < 1e-4, "{field:?}: {r1} {r2}");
            }
        }
    }

    #[test]
    fn boundary_points_cover_perimeter() {
        let pts = square_boundary_points(-1.0, 1.0, 80);
        assert_eq!(pts.len(), 80);
        for &(x, y) in &pts {
            let on = (x.abs() - 1.0).abs() < 1e-12 || (y.abs() - 1.0).abs() < 1e-12;
            assert!(on, "({x}, {y})");
        }
        assert_eq!(pts[0], (-1.0, -1.0));
    }

    #[test]
    fn noise_is_reproducible() {
        assert_eq!(gaussian_noise(5, 0.1, 7), gaussian_noise(5, 0.1, 7));
        assert_ne!(gaussian_noise(5, 0.1, 7), gaussian_noise(5, 0.1, 8));
        assert!(gaussian_noise(3, 0.0, 1).iter().all(|&v| v == 0.0));
    }
}
