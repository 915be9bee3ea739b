
use pilm::forms::elasticity_penalty;
use pilm::report::{sig, Report};
use pilm::solver::{point_system, solve, PointDatum};
use pilm::synth::{square_boundary_points, ElasticField};
use pilm::{BSplineBasis1D, IntegralMatrixSet, TensorBasis};

use super::{linspace, Experiment, Outputs};
use crate::config::{Knob, RunConfig};
use crate::error::{CliError, CliResult};

pub struct ElasticityVerify;

fn field(name: &str) -> CliResult<ElasticField> {
    match name {
        "quadratic" => Ok(ElasticField::Quadratic),
        "quartic" => Ok(ElasticField::Quartic),
        other => Err(CliError::Config(format!("cases: unknown field `{other}` (quadratic or quartic)"))),
    }
}

impl Experiment for ElasticityVerify {
    fn name(&self) -> &'static str {
        "elasticity-verify"
    }

    fn reference(&self) -> &'static str {
        "Figs. S3-S4"
    }

    fn summary(&self) -> &'static str {
        "Plane-stress fields recovered inside a square from boundary values only"
    }

    fn knobs(&self) -> &'static [Knob] {
        const K: &[Knob] = &[
            Knob::new("cases", "quadratic:23,quartic:43", "field:basis-size-per-axis pairs"),
            Knob::new("lower", "-0.5", "lower corner coordinate of the square"),
            Knob::new("upper", "0.5", "upper corner coordinate of the square"),
            Knob::new("boundary-points", "80", "data points on the boundary"),
            Knob::new("samples", "101", "evaluation points per axis"),
        ];
        K
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let (lo, hi) = (cfg.f64("lower")?, cfg.f64("upper")?);
        if !(hi > lo) {
            return Err(CliError::Config("upper must exceed lower".into()));
        }
        let boundary = square_boundary_points(lo, hi, cfg.usize("boundary-points")?);
        let axis_points = linspace(lo, hi, cfg.usize("samples")?);
        let raw = cfg.raw("cases")?;
        for case in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, count) = case
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("cases: expected field:count, got `{case}`")))?;
            let f = field(name.trim())?;
            let count: usize =
                count.trim().parse().map_err(|_| CliError::Config(format!("cases: bad basis size in `{case}`")))?;

            let axis = BSplineBasis1D::new(hi - lo, count)?;
            let r = IntegralMatrixSet::new(&axis);
            let tb = TensorBasis::with_origins(vec![axis.clone(), axis], vec![lo, lo], 2)?;
            let mut points = Vec::with_capacity(2 * boundary.len());
            for &(x, y) in &boundary {
                let (u, v) = f.velocity(x, y);
                points.push(PointDatum::new(&[x, y], 0, u));
                points.push(PointDatum::new(&[x, y], 1, v));
            }
            let g = elasticity_penalty(&r, &r, f.poisson_ratio())?;
            let fit = solve(&point_system(&tb, &points)?, &[(1.0, &g)])?;
            let coeffs = fit.coefficients_vec();

            let mut rows = Vec::with_capacity(axis_points.len().pow(2));
            let mut worst = 0.0f64;
            for &x in &axis_points {
                for &y in &axis_points {
                    let (u, v) = f.velocity(x, y);
                    let du = tb.evaluate(&coeffs, &[x, y], &[0, 0], 0)? - u;
                    let dv = tb.evaluate(&coeffs, &[x, y], &[0, 0], 1)? - v;
                    worst = worst.max(du.abs()).max(dv.abs());
                    rows.push((x, y, u, v, du, dv));
                }
            }
            out.write(&format!("residual_{name}.csv"), |w| {
                writeln!(w, "x,y,u_true,v_true,u_residual,v_residual")?;
                for (x, y, u, v, du, dv) in &rows {
                    writeln!(w, "{x},{y},{u},{v},{du},{dv}")?;
                }
                Ok(())
            })?;
            report.set(format!("{name}.nu"), f.poisson_ratio());
            report.set(format!("{name}.count"), format!("{count}x{count}"));
            report.set(format!("{name}.max_residual"), sig(worst, 3));
        }
        Ok(())
    }
}
