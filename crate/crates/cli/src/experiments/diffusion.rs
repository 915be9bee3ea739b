use std::sync::Arc;

use pilm::forms::{pde_penalty_2d, PdeCoefficients2D};
use pilm::inverse::{argmin, profile_curve, write_curve_csv, ParameterGrid, ProfileSystem};
use pilm::report::{sig, Report};
use pilm::solver::{point_system, PointDatum};
use pilm::synth::{gaussian_noise, DiffusionSolution, GaussianProfile};
use pilm::{BSplineBasis1D, IntegralMatrixSet, TensorBasis};

use super::{decimals_for, linspace, Experiment, Outputs};
use crate::config::{Knob, RunConfig};
use crate::error::{CliError, CliResult};

pub struct DiffusionInverse;

/// Initial profile and default sensor spacing for a named dataset.
fn dataset(name: &str) -> CliResult<(GaussianProfile, f64)> {
    match name {
        "unimodal" => Ok((GaussianProfile { bumps: vec![(1.0, 1.0, 0.2)] }, 0.2)),
        "bimodal" => Ok((GaussianProfile { bumps: vec![(1.0, 0.6, 0.15), (1.0, 1.4, 0.15)] }, 0.1)),
        other => Err(CliError::Config(format!("profile: expected unimodal or bimodal, got `{other}`"))),
    }
}

impl Experiment for DiffusionInverse {
    fn name(&self) -> &'static str {
        "diffusion-inverse"
    }

    fn reference(&self) -> &'static str {
        "Figs. 5-6"
    }

    fn summary(&self) -> &'static str {
        "Diffusivity from space-time samples with unknown initial and boundary conditions"
    }

    fn knobs(&self) -> &'static [Knob] {
        const K: &[Knob] = &[
            Knob::new("length", "2", "spatial extent"),
            Knob::new("duration", "2", "time span"),
            Knob::new("count", "23", "basis size per axis"),
            Knob::new("diffusivity", "0.1", "true k used to make the data"),
            Knob::new("profile", "unimodal", "initial profile: unimodal or bimodal"),
            Knob::new("sensor-step", "auto", "sensor spacing in t and x (auto: 0.2 unimodal, 0.1 bimodal)"),
            Knob::new("fd-cells", "400", "cells of the finite-difference reference solution"),
            Knob::new("noise", "0", "Gaussian noise standard deviation"),
            Knob::new("seed", "1", "noise seed"),
            Knob::new("grid", "0.01:0.3:0.005", "diffusivity grid start:stop:step"),
            Knob::new("samples", "101", "field output points per axis"),
        ];
        K
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let (length, duration) = (cfg.f64("length")?, cfg.f64("duration")?);
        let (profile, auto_step) = dataset(&cfg.text("profile")?)?;
        let step = match cfg.raw("sensor-step")? {
            "auto" => auto_step,
            _ => cfg.f64("sensor-step")?,
        };
        if !(step > 0.0) {
            return Err(CliError::Config("sensor-step must be positive".into()));
        }
        let nt = (duration / step + 1e-9).floor() as usize;
        let nx = (length / step + 1e-9).floor() as usize;
        let times: Vec<f64> = (1..=nt).map(|i| i as f64 * step).collect();
        let truth = DiffusionSolution::simulate(|x| profile.eval(x), cfg.f64("diffusivity")?, length, cfg.usize("fd-cells")?, &times)?;

        let noise = gaussian_noise(nt * nx, cfg.f64("noise")?, cfg.u64("seed")?);
        let mut samples = Vec::with_capacity(nt * nx);
        for (i, &t) in times.iter().enumerate() {
            for j in 0..nx {
                let x = step * (j as f64 + 0.5);
                samples.push((t, x, truth.sample(i, x) + noise[samples.len()]));
            }
        }

        let count = cfg.usize("count")?;
        let (taxis, xaxis) = (BSplineBasis1D::new(duration, count)?, BSplineBasis1D::new(length, count)?);
        let (rt, rx) = (IntegralMatrixSet::new(&taxis), IntegralMatrixSet::new(&xaxis));
        let tb = TensorBasis::new(vec![taxis, xaxis], 1)?;
        let points: Vec<PointDatum> = samples.iter().map(|&(t, x, u)| PointDatum::new(&[t, x], 0, u)).collect();
        let obs = Arc::new(point_system(&tb, &points)?);
        let family = |k: f64| {
            Ok(ProfileSystem {
                observations: obs.clone(),
                penalties: vec![(1.0, pde_penalty_2d(&rt, &rx, &PdeCoefficients2D::diffusion(k))?)],
            })
        };
        let grid_values = cfg.range("grid")?;
        let grid_step = if grid_values.len() > 1 { grid_values[1] - grid_values[0] } else { 1.0 };
        let curve = profile_curve(&family, &ParameterGrid::new(grid_values)?);
        let best = argmin(&curve)?;
        let coeffs = best.fit.coefficients_vec();

        out.write("observations.csv", |w| {
            writeln!(w, "t,x,u_obs")?;
            for (t, x, u) in &samples {
                writeln!(w, "{t},{x},{u}")?;
            }
            Ok(())
        })?;
        out.write("profile.csv", |w| write_curve_csv(&curve, w))?;
        let n = cfg.usize("samples")?;
        let (ts, xs) = (linspace(0.0, duration, n), linspace(0.0, length, n));
        let mut field = Vec::with_capacity(n * n);
        for &t in &ts {
            for &x in &xs {
                field.push((t, x, tb.evaluate(&coeffs, &[t, x], &[0, 0], 0)?));
            }
        }
        out.write("field.csv", |w| {
            writeln!(w, "t,x,u_fit")?;
            for (t, x, u) in &field {
                writeln!(w, "{t},{x},{u}")?;
            }
            Ok(())
        })?;
        // reconstructed initial condition against the profile that made the data
        let mut worst_initial = 0.0f64;
        let mut initial = Vec::with_capacity(n);
        for &x in &xs {
            let fit = tb.evaluate(&coeffs, &[0.0, x], &[0, 0], 0)?;
            worst_initial = worst_initial.max((fit - profile.eval(x)).abs());
            initial.push((x, fit, profile.eval(x)));
        }
        out.write("initial.csv", |w| {
            writeln!(w, "x,u_fit,u_true")?;
            for (x, f, u) in &initial {
                writeln!(w, "{x},{f},{u}")?;
            }
            Ok(())
        })?;

        report.set("k_star", format!("{:.*}", decimals_for(grid_step), best.theta));
        report.set("loss_star", sig(best.fit.total_loss, 4));
        report.set("on_boundary", best.on_boundary);
        report.set("observations", samples.len());
        report.set("initial_max_error", sig(worst_initial, 3));
        report.set("failed_points", curve.iter().filter(|p| p.outcome.is_err()).count());
        Ok(())
    }
}
