use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::{info, warn};
use pilm::bayes::{abic, hybrid_surface, optimize_alpha, write_summary, SummaryRow};
use pilm::report::{sig, Report};
use pilm::solver::NormalSystem;
use pilm::strain::{
    add_report_lines, build_problem, load_stations, strain_rates, synthetic_stations, write_stations, GridSpec,
    Region, RegularizerRegistry, ReportLine, StationSet, SYNTHETIC_NOISE_MM_YR, SYNTHETIC_SEED,
    SYNTHETIC_STATION_COUNT,
};
use pilm::synth::SyntheticVelocityModel;

use super::{Experiment, Outputs};
use crate::config::{Knob, RunConfig};
use crate::error::{CliError, CliResult};

pub struct Strain;
pub struct HybridScan;

/// Knobs shared by both station-based experiments.
macro_rules! station_knobs {
    ($($extra:expr),* $(,)?) => {{
        const K: &[Knob] = &[
            Knob::new("stations", "synthetic", "station table path, or `synthetic`"),
            Knob::new("seed", "2021", "seed of the synthetic stations"),
            Knob::new("noise", "1.2", "noise of the synthetic velocities (mm/yr)"),
            Knob::new("station-count", "458", "number of synthetic stations"),
            Knob::new("lon0", "138", "projection center longitude (deg)"),
            Knob::new("lat0", "36", "projection center latitude (deg)"),
            Knob::new("half-width", "200", "half side of the square region (km)"),
            Knob::new("spacing", "20", "knot spacing (km)"),
            $($extra),*
        ];
        K
    }};
}

fn stations(cfg: &RunConfig) -> CliResult<StationSet> {
    let region = Region::new(cfg.f64("lon0")?, cfg.f64("lat0")?, cfg.f64("half-width")?)?;
    let source = cfg.text("stations")?;
    let set = if source == "synthetic" {
        let (count, noise, seed) = (cfg.usize("station-count")?, cfg.f64("noise")?, cfg.u64("seed")?);
        if (count, noise, seed) != (SYNTHETIC_STATION_COUNT, SYNTHETIC_NOISE_MM_YR, SYNTHETIC_SEED) {
            info!("synthetic stations: {count} stations, noise {noise} mm/yr, seed {seed}");
        }
        synthetic_stations(region, &SyntheticVelocityModel::default(), count, noise, seed)?
    } else {
        let path = Path::new(&source);
        let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        load_stations(BufReader::new(file), region)?
    };
    if set.rows_read > set.len() {
        warn!("{} of {} stations lie outside the region and were dropped", set.rows_read - set.len(), set.rows_read);
    }
    Ok(set)
}

/// File-name form of a regularizer label, e.g. `phys_nu0.5`.
fn file_stem(label: &str) -> String {
    label.replace("(nu=", "_nu").replace(')', "")
}

impl Experiment for Strain {
    fn name(&self) -> &'static str {
        "strain"
    }

    fn reference(&self) -> &'static str {
        "Figs. 7-9, Table 2"
    }

    fn summary(&self) -> &'static str {
        "Strain-rate fields from GNSS velocities with the weight chosen by marginal likelihood"
    }

    fn knobs(&self) -> &'static [Knob] {
        station_knobs!(
            Knob::new("reg", "math,phys", "regularizers to compare (math, phys)"),
            Knob::new("nu", "-1,0.5,0", "Poisson ratios for phys"),
            Knob::new("alpha-grid", "-12:9:0.25", "log10 alpha^2 grid start:stop:step"),
            Knob::new("grid-spacing", "5", "strain-rate output spacing (km)"),
        )
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let set = stations(cfg)?;
        let registry = RegularizerRegistry::default();
        let mut regularizers = Vec::new();
        for name in cfg.raw("reg")?.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "hybrid" => return Err(CliError::Config("reg: hybrid has two weights; use hybrid-scan".into())),
                "phys" => {
                    for nu in cfg.f64_list("nu")? {
                        regularizers.push(registry.create(name, nu)?);
                    }
                }
                _ => regularizers.push(registry.create(name, 0.0)?),
            }
        }
        if regularizers.is_empty() {
            return Err(CliError::Config("reg: no regularizer selected".into()));
        }
        let log_grid = cfg.range("alpha-grid")?;
        let grid = GridSpec { half_width_km: set.region.half_width_km, spacing_km: cfg.f64("grid-spacing")? };
        grid.axis()?;
        let spacing = cfg.f64("spacing")?;
        out.write("stations.csv", |w| write_stations(&set, w))?;

        let mut lines = Vec::new();
        let mut rows = Vec::new();
        for reg in &regularizers {
            let p = build_problem(&set, spacing, reg.as_ref())?;
            let ns = NormalSystem::new(&p.observations);
            let opt = optimize_alpha(&ns, &p.penalties[0], &log_grid)?;
            let best = &opt.best;
            info!("{}: alpha2* {:.3e}, LL {:.2}", p.label, best.alpha2, best.log_likelihood);
            if opt.on_boundary {
                warn!("{}: likelihood maximum on the alpha grid edge", p.label);
            }
            let stem = file_stem(&p.label);
            out.write(&format!("ll_{stem}.csv"), |w| {
                writeln!(w, "log10_alpha2,ll")?;
                for (la, ll) in &opt.curve {
                    match ll {
                        Some(v) => writeln!(w, "{la},{v}")?,
                        None => writeln!(w, "{la},")?,
                    }
                }
                Ok(())
            })?;
            let rates = strain_rates(&best.fit.coefficients_vec(), &p.basis, &grid)?;
            out.write(&format!("strain_{stem}.csv"), |w| rates.write_csv(w))?;
            report.set(format!("{}.on_boundary", p.label), opt.on_boundary);
            report.set(format!("{}.normal_residual", p.label), sig(opt.worst_normal_residual, 2));
            let row = SummaryRow::from_result(p.label.clone(), best, p.hyperparameters);
            lines.push(ReportLine {
                label: row.label.clone(),
                alpha2: vec![row.alpha2],
                log_likelihood: row.log_likelihood,
                sigma: row.sigma,
                rmse: row.rmse,
                abic: row.abic(),
            });
            rows.push(row);
        }
        out.write("summary.txt", |w| write_summary(&rows, w))?;

        report.set("stations", set.len());
        let top = rows.iter().max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood)).expect("nonempty");
        report.set("best", &top.label);
        report.set("alpha2_star", sig(top.alpha2, 4));
        report.set("ll_star", format!("{:.2}", top.log_likelihood));
        report.set("sigma_star_mm_yr", format!("{:.3}", top.sigma));
        report.set("rmse_mm_yr", format!("{:.3}", top.rmse));
        add_report_lines(report, &lines);
        Ok(())
    }
}

impl Experiment for HybridScan {
    fn name(&self) -> &'static str {
        "hybrid-scan"
    }

    fn reference(&self) -> &'static str {
        "Fig. 8b"
    }

    fn summary(&self) -> &'static str {
        "Marginal likelihood over smoothness and elasticity weights together"
    }

    fn knobs(&self) -> &'static [Knob] {
        station_knobs!(
            Knob::new("nu", "0.5", "Poisson ratio of the elastic penalty"),
            Knob::new("math-grid", "-1:7:0.5", "log10 smoothness weights start:stop:step"),
            Knob::new("phys-grid", "-20,-10,-5,0,1,2,3,4,5,6,7,8", "log10 elastic weights; a zero column is always added"),
            Knob::new("alpha-grid", "-12:9:0.25", "log10 alpha^2 grid for the smoothness-only optimum"),
        )
    }

    fn run(&self, cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> CliResult<()> {
        let set = stations(cfg)?;
        let reg = RegularizerRegistry::default().create("hybrid", cfg.f64("nu")?)?;
        let p = build_problem(&set, cfg.f64("spacing")?, reg.as_ref())?;
        let ns = NormalSystem::new(&p.observations);
        let (g_math, g_phys) = (&p.penalties[0], &p.penalties[1]);

        let math = optimize_alpha(&ns, g_math, &cfg.range("alpha-grid")?)?;
        let am: Vec<f64> = cfg.range("math-grid")?.iter().map(|v| 10f64.powf(*v)).collect();
        let ap: Vec<f64> =
            std::iter::once(0.0).chain(cfg.f64_list("phys-grid")?.iter().map(|v| 10f64.powf(*v))).collect();
        let surface = hybrid_surface(&ns, g_math, g_phys, &am, &ap)?;
        out.write("surface.csv", |w| surface.write_csv(w))?;

        let (i, j, max) = surface
            .max()
            .ok_or_else(|| CliError::Numerical("every cell of the hybrid surface failed".into()))?;
        let ll_math = math.best.log_likelihood;
        let hybrid_abic = abic(max, p.hyperparameters);
        if max > ll_math + 1e-6 {
            warn!("hybrid maximum {max:.2} exceeds the smoothness-only optimum {ll_math:.2}");
        }
        report.set("label", &p.label);
        report.set("stations", set.len());
        report.set("cells", am.len() * ap.len());
        report.set("failed_cells", surface.failed_cells());
        report.set("max.ll", format!("{max:.2}"));
        report.set("max.alpha2_math", sig(am[i], 4));
        report.set("max.alpha2_phys", sig(ap[j], 4));
        report.set("math.alpha2", sig(math.best.alpha2, 4));
        report.set("math.ll", format!("{ll_math:.2}"));
        report.set("math.abic", format!("{:.2}", abic(ll_math, 1)));
        report.set("hybrid.abic", format!("{hybrid_abic:.2}"));
        report.set("exceeds_math", max > ll_math + 1e-6);
        report.set("normal_residual", sig(surface.worst_normal_residual.max(math.worst_normal_residual), 2));
        Ok(())
    }
}
