use std::sync::Arc;

use pilm::forms::ode_penalty;
use pilm::inverse::{argmin, profile_curve, write_curve_csv, ParameterGrid, ProfileSystem};
use pilm::report::{sig, Report};
use pilm::solver::{ic_system, point_system, solve, PointDatum};
use pilm::synth::{gaussian_noise, DampedOscillator};
use pilm::{BSplineBasis1D, IntegralMatrixSet, TensorBasis};

use super::{decimals_for, linspace, loglog_slope, Experiment, Outputs};
use crate::config::{Knob, RunConfig};
use crate::error::{CliError, CliResult};

pub struct Forward;
pub struct Scaling;
pub struct Inverse;

struct ForwardCase {
    values: Vec<f64>,
    exact: Vec<f64>,
    loss: f64,
    min_eigenvalue: Option<f64>,
}

/// Fit `m u'' + c u' + k u = 0` from `(u0, v0)` and sample it.
fn forward_case(
    length: f64,
    count: usize,
    osc: DampedOscillator,
    (u0, v0): (f64, f64),
    times: &[f64],
    with_eigenvalue: bool,
) -> CliResult<ForwardCase> {
    let basis = BSplineBasis1D::new(length, count)?;
    let r = IntegralMatrixSet::new(&basis);
    let g = ode_penalty(&r, osc.m, osc.c, osc.k)?;
    let fit = solve(&ic_system(&basis, u0, v0), &[(1.0, &g)])?;
    let coeffs = fit.coefficients_vec();
    let tb = TensorBasis::single(basis);
    let values = times.iter().map(|&t| tb.evaluate(&coeffs, &[t], &[0], 0)).collect::<pilm::Result<Vec<_>>>()?;
    let exact = times.iter().map(|&t| osc.displacement(u0, v0, t)).collect();
    let min_eigenvalue = if with_eigenvalue { Some(g.eigenvalues()?[0]) } else { None };
    Ok(ForwardCase { values, exact, loss: fit.total_loss, min_eigenvalue })
}

fn max_error(case: &ForwardCase) -> f64 {
    case.values.iter().zip(&case.exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn rms_error(case: &ForwardCase) -> f64 {
    let n = case.values.len() as f64;
    (case.values.iter().zip(&case.exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt()
}

impl Experiment for Forward {
    fn name(&self) -> &'static str {
        "oscillator-forward"
    }

    fn reference(&self) -> &'static str {
        "Fig. 2"
    }

    fn summary(&self) -> &'static str {
        "Damped oscillator from initial conditions for several damping values, initial conditions and basis sizes"
    }

    fn knobs(&self) -> &'static [Knob] {
        const K: &[Knob] = &[
            Knob::new("length", "10", "time span T"),
            Knob::new("counts", "13,103", "basis sizes M"),
            Knob::new("mass", "1", "coefficient m"),
            Knob::new("damping", "0,1,2,3", "damping values c"),
            Knob::new("stiffness", "1", "coefficient k"),
            Knob::new("initial", "1:0,0.5:0.5,0:1", "initial conditions u0:v0"),
            Knob::new("samples", "1000", "evaluation points per curve"),
        ];
        K
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let length = cfg.f64("length")?;
        let (m, k) = (cfg.f64("mass")?, cfg.f64("stiffness")?);
        let times = linspace(0.0, length, cfg.usize("samples")?);
        let initial = cfg.pair_list("initial")?;
        for count in cfg.usize_list("counts")? {
            let mut worst = 0.0f64;
            for c in cfg.f64_list("damping")? {
                for (i, &ic) in initial.iter().enumerate() {
                    let case = forward_case(length, count, DampedOscillator::new(m, c, k), ic, &times, false)?;
                    let err = max_error(&case);
                    worst = worst.max(err);
                    report.set(format!("M{count}.c{c}.ic{}.max_error", i + 1), sig(err, 3));
                    out.write(&format!("forward_M{count}_c{c}_ic{}.csv", i + 1), |w| {
                        writeln!(w, "t,u_pilm,u_exact")?;
                        for ((t, u), e) in times.iter().zip(&case.values).zip(&case.exact) {
                            writeln!(w, "{t},{u},{e}")?;
                        }
                        Ok(())
                    })?;
                }
            }
            report.set(format!("M{count}.max_error"), sig(worst, 3));
        }
        Ok(())
    }
}

impl Experiment for Scaling {
    fn name(&self) -> &'static str {
        "oscillator-scaling"
    }

    fn reference(&self) -> &'static str {
        "Fig. 3"
    }

    fn summary(&self) -> &'static str {
        "Error, loss and smallest penalty eigenvalue against the basis size"
    }

    fn knobs(&self) -> &'static [Knob] {
        const K: &[Knob] = &[
            Knob::new("length", "100", "time span T"),
            Knob::new("counts", "8,16,32,64,128,256,512,1024,2048", "basis sizes M"),
            Knob::new("mass", "1", "coefficient m"),
            Knob::new("damping", "0", "coefficient c"),
            Knob::new("stiffness", "1", "coefficient k"),
            Knob::new("initial", "1:0", "initial condition u0:v0"),
            Knob::new("samples", "1000", "evaluation points for the RMS error"),
            Knob::new("tail-from", "256", "smallest M in the asymptotic slope fit"),
        ];
        K
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let length = cfg.f64("length")?;
        let osc = DampedOscillator::new(cfg.f64("mass")?, cfg.f64("damping")?, cfg.f64("stiffness")?);
        let ic = *cfg
            .pair_list("initial")?
            .first()
            .ok_or_else(|| CliError::Config("initial: one u0:v0 pair required".into()))?;
        let times = linspace(0.0, length, cfg.usize("samples")?);
        let counts = cfg.usize_list("counts")?;
        if counts.len() < 2 {
            return Err(CliError::Config("counts: at least two sizes are needed for a slope".into()));
        }
        let mut rows = Vec::new();
        for &count in &counts {
            let case = forward_case(length, count, osc, ic, &times, true)?;
            rows.push((count as f64, rms_error(&case), case.loss, case.min_eigenvalue.unwrap_or(f64::NAN)));
        }
        out.write("scaling.csv", |w| {
            writeln!(w, "count,rms_error,loss,min_eigenvalue")?;
            for (m, e, l, g) in &rows {
                writeln!(w, "{m},{e},{l},{g}")?;
            }
            Ok(())
        })?;
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let col = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let (rms, loss, eig) = (col(|r| r.1), col(|r| r.2), col(|r| r.3));
        report.set("slope.rms_error", sig(loglog_slope(&x, &rms), 3));
        report.set("slope.loss", sig(loglog_slope(&x, &loss), 3));
        report.set("slope.min_eigenvalue", sig(loglog_slope(&x, &eig), 3));
        let tail_from = cfg.f64("tail-from")?;
        let tail: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= tail_from).collect();
        if tail.len() >= 2 {
            let pick = |v: &[f64]| tail.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let tx = pick(&x);
            report.set("tail_slope.rms_error", sig(loglog_slope(&tx, &pick(&rms)), 3));
            report.set("tail_slope.loss", sig(loglog_slope(&tx, &pick(&loss)), 3));
            report.set("tail_slope.min_eigenvalue", sig(loglog_slope(&tx, &pick(&eig)), 3));
        }
        Ok(())
    }
}

impl Experiment for Inverse {
    fn name(&self) -> &'static str {
        "oscillator-inverse"
    }

    fn reference(&self) -> &'static str {
        "Fig. 4"
    }

    fn summary(&self) -> &'static str {
        "Damping coefficient from sparse displacement data by profiling the loss"
    }

    fn knobs(&self) -> &'static [Knob] {
        const K: &[Knob] = &[
            Knob::new("length", "10", "time span T"),
            Knob::new("count", "103", "basis size M"),
            Knob::new("mass", "1", "coefficient m"),
            Knob::new("damping", "0.5", "true damping used to make the data"),
            Knob::new("stiffness", "1", "coefficient k"),
            Knob::new("initial", "0.5:0.5", "true initial condition u0:v0 (not given to the fit)"),
            Knob::new("observations", "0.5:9.5:1", "observation times start:stop:step"),
            Knob::new("noise", "0", "Gaussian noise standard deviation"),
            Knob::new("seed", "1", "noise seed"),
            Knob::new("grid", "0:1.5:0.01", "damping grid start:stop:step"),
            Knob::new("samples", "1000", "evaluation points of the fitted curve"),
        ];
        K
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let length = cfg.f64("length")?;
        let (m, k) = (cfg.f64("mass")?, cfg.f64("stiffness")?);
        let truth = DampedOscillator::new(m, cfg.f64("damping")?, k);
        let (u0, v0) = *cfg
            .pair_list("initial")?
            .first()
            .ok_or_else(|| CliError::Config("initial: one u0:v0 pair required".into()))?;
        let times = cfg.range("observations")?;
        let noise = gaussian_noise(times.len(), cfg.f64("noise")?, cfg.u64("seed")?);
        let data: Vec<(f64, f64)> =
            times.iter().zip(&noise).map(|(&t, e)| (t, truth.displacement(u0, v0, t) + e)).collect();

        let basis = BSplineBasis1D::new(length, cfg.usize("count")?)?;
        let r = IntegralMatrixSet::new(&basis);
        let tb = TensorBasis::single(basis);
        let points: Vec<PointDatum> = data.iter().map(|&(t, u)| PointDatum::new(&[t], 0, u)).collect();
        let obs = Arc::new(point_system(&tb, &points)?);
        let family = |c: f64| Ok(ProfileSystem { observations: obs.clone(), penalties: vec![(1.0, ode_penalty(&r, m, c, k)?)] });
        let grid_values = cfg.range("grid")?;
        let step = if grid_values.len() > 1 { grid_values[1] - grid_values[0] } else { 1.0 };
        let grid = ParameterGrid::new(grid_values)?;
        let curve = profile_curve(&family, &grid);
        let best = argmin(&curve)?;

        out.write("observations.csv", |w| {
            writeln!(w, "t,u_obs,u_true")?;
            for &(t, u) in &data {
                writeln!(w, "{t},{u},{}", truth.displacement(u0, v0, t))?;
            }
            Ok(())
        })?;
        out.write("profile.csv", |w| write_curve_csv(&curve, w))?;
        let coeffs = best.fit.coefficients_vec();
        let fine = linspace(0.0, length, cfg.usize("samples")?);
        let fitted = fine.iter().map(|&t| tb.evaluate(&coeffs, &[t], &[0], 0)).collect::<pilm::Result<Vec<_>>>()?;
        out.write("fit.csv", |w| {
            writeln!(w, "t,u_fit,u_true")?;
            for (t, u) in fine.iter().zip(&fitted) {
                writeln!(w, "{t},{u},{}", truth.displacement(u0, v0, *t))?;
            }
            Ok(())
        })?;

        report.set("c_star", format!("{:.*}", decimals_for(step), best.theta));
        report.set("loss_star", sig(best.fit.total_loss, 4));
        report.set("on_boundary", best.on_boundary);
        report.set("failed_points", curve.iter().filter(|p| p.outcome.is_err()).count());
        Ok(())
    }
}
