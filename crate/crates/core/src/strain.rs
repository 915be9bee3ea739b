//! GNSS velocity interpolation and strain rates.
//!
//! Station velocities (mm/yr) are projected to local kilometre coordinates
//! and fitted with a two-component tensor spline under a selectable
//! regularizer. Velocity gradients of the fit give strain rates.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::basis::{BSplineBasis1D, TensorBasis};
use crate::error::{PilmError, Result};
use crate::forms::{elasticity_penalty, smoothness_penalty, PenaltyMatrix};
use crate::integrals::IntegralMatrixSet;
use crate::report::{sig, Report};
use crate::solver::{point_system, ObservationSystem, PointDatum};
use crate::synth::{gaussian_noise, scatter_stations, SyntheticVelocityModel};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Strain rates from mm/yr over km (1e-6/yr) to nanostrain/yr.
pub const NANOSTRAIN_PER_MM_YR_KM: f64 = 1e3;

/// Local equirectangular projection about a center point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lon0: f64,
    pub lat0: f64,
    pub radius_km: f64,
}

impl Projection {
    pub fn new(lon0: f64, lat0: f64) -> Self {
        Self { lon0, lat0, radius_km: EARTH_RADIUS_KM }
    }

    pub fn forward(&self, lon: f64, lat: f64) -> (f64, f64) {
        let k = self.radius_km * std::f64::consts::PI / 180.0;
        (k * self.lat0.to_radians().cos() * (lon - self.lon0), k * (lat - self.lat0))
    }

    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let k = self.radius_km * std::f64::consts::PI / 180.0;
        (self.lon0 + x / (k * self.lat0.to_radians().cos()), self.lat0 + y / k)
    }
}

/// Square model region centred on a geographic point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub projection: Projection,
    pub half_width_km: f64,
}

impl Region {
    pub fn new(lon0: f64, lat0: f64, half_width_km: f64) -> Result<Self> {
        if !(half_width_km > 0.0) {
            return Err(PilmError::InvalidParameter(format!("half width must be positive, got {half_width_km}")));
        }
        Ok(Self { projection: Projection::new(lon0, lat0), half_width_km })
    }

    /// 400 km square around 138°E, 36°N.
    pub fn central_japan() -> Self {
        Self { projection: Projection::new(138.0, 36.0), half_width_km: 200.0 }
    }

    pub fn side_km(&self) -> f64 {
        2.0 * self.half_width_km
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width_km && y.abs() <= self.half_width_km
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub lon: f64,
    pub lat: f64,
    /// East velocity, mm/yr.
    pub ve: f64,
    /// North velocity, mm/yr.
    pub vn: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationSet {
    pub region: Region,
    pub stations: Vec<Station>,
    /// Rows read before filtering to the region.
    pub rows_read: usize,
}

impl StationSet {
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Keep the stations inside the region.
    pub fn from_geographic(region: Region, rows: &[(f64, f64, f64, f64)]) -> Result<Self> {
        let stations: Vec<Station> = rows
            .iter()
            .filter_map(|&(lon, lat, ve, vn)| {
                let (x, y) = region.projection.forward(lon, lat);
                region.contains(x, y).then_some(Station { lon, lat, ve, vn, x, y })
            })
            .collect();
        if stations.is_empty() {
            return Err(PilmError::Data("no stations inside the model region".into()));
        }
        Ok(Self { region, stations, rows_read: rows.len() })
    }
}

const COLUMNS: [&str; 4] = ["lon_deg", "lat_deg", "ve_mm_yr", "vn_mm_yr"];

/// Read a station table (comma, tab, semicolon, or whitespace separated)
/// with a header naming `lon_deg, lat_deg, ve_mm_yr, vn_mm_yr`; other
/// columns are ignored and `#` lines skipped.
pub fn load_stations<R: Read>(mut source: R, region: Region) -> Result<StationSet> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| PilmError::Data(format!("cannot read station table: {e}")))?;
    let header_line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| PilmError::Data("station table is empty".into()))?;
    let delimiter = b",\t;".iter().copied().find(|&d| header_line.as_bytes().contains(&d));

    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    let header: Vec<String>;
    match delimiter {
        Some(d) => {
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(d)
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .flexible(true)
                .from_reader(text.as_bytes());
            header = reader
                .headers()
                .map_err(|e| PilmError::Data(format!("bad header: {e}")))?
                .iter()
                .map(str::to_string)
                .collect();
            for rec in reader.records() {
                let rec = rec.map_err(|e| {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    PilmError::Data(format!("line {line}: {e}"))
                })?;
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                records.push((line, rec.iter().map(str::to_string).collect()));
            }
        }
        None => {
            let mut lines = text.lines().enumerate().filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            });
            let (_, h) = lines.next().expect("header found above");
            header = h.split_whitespace().map(str::to_string).collect();
            for (i, l) in lines {
                records.push(((i + 1) as u64, l.split_whitespace().map(str::to_string).collect()));
            }
        }
    }

    let index: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(c))
                .ok_or_else(|| PilmError::Data(format!("missing column `{c}`")))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        let mut vals = [0.0; 4];
        for (slot, (&col, name)) in vals.iter_mut().zip(index.iter().zip(COLUMNS)) {
            let raw = fields
                .get(col)
                .ok_or_else(|| PilmError::Data(format!("line {line}: missing `{name}`")))?;
            *slot = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PilmError::Data(format!("line {line}: bad `{name}` value `{raw}`")))?;
        }
        rows.push((vals[0], vals[1], vals[2], vals[3]));
    }
    StationSet::from_geographic(region, &rows)
}

/// Write stations in the format [`load_stations`] reads.
pub fn write_stations<W: Write>(set: &StationSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for s in &set.stations {
        writeln!(out, "{},{},{},{}", s.lon, s.lat, s.ve, s.vn)?;
    }
    Ok(())
}

/// Synthetic station set: `count` stations scattered over the region with
/// velocities from `model` plus Gaussian noise.
pub fn synthetic_stations(
    region: Region,
    model: &SyntheticVelocityModel,
    count: usize,
    noise_mm_yr: f64,
    seed: u64,
) -> Result<StationSet> {
    let pos = scatter_stations(count, region.half_width_km, seed);
    let noise = gaussian_noise(2 * count, noise_mm_yr, seed.wrapping_add(1));
    let rows: Vec<(f64, f64, f64, f64)> = pos
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let (lon, lat) = region.projection.inverse(x, y);
            let (u, v) = model.velocity(x, y);
            (lon, lat, u + noise[2 * i], v + noise[2 * i + 1])
        })
        .collect();
    StationSet::from_geographic(region, &rows)
}

/// Station count, noise level, and seed of the default synthetic dataset.
pub const SYNTHETIC_STATION_COUNT: usize = 458;
pub const SYNTHETIC_NOISE_MM_YR: f64 = 1.2;
pub const SYNTHETIC_SEED: u64 = 2021;

/// Default synthetic stand-in for the central Japan station table.
pub fn synthetic_central_japan(seed: u64) -> Result<StationSet> {
    synthetic_stations(
        Region::central_japan(),
        &SyntheticVelocityModel::default(),
        SYNTHETIC_STATION_COUNT,
        SYNTHETIC_NOISE_MM_YR,
        seed,
    )
}

/// `log10 α²` grid for velocities in mm/yr over km: −12 to 9 in steps of
/// 0.25. Elastic penalties in these units peak near 1e7–1e8; above about
/// 1e10 the normal-equation residual of a double-precision solve can no
/// longer reach 1e-8 of `‖Hᵀd‖`.
pub fn strain_log_alpha_grid() -> Vec<f64> {
    (0..=84).map(|i| -12.0 + 0.25 * i as f64).collect()
}

/// Default hybrid grids (`log10 α²`): smoothness weight from −1 to 7 in
/// steps of 0.5; elastic weight at −20, −10, −5 and 0 to 8 in unit steps.
/// Callers add a zero elastic weight for the pure-smoothness column.
pub fn hybrid_log_alpha_grids() -> (Vec<f64>, Vec<f64>) {
    let math = (0..=16).map(|i| -1.0 + 0.5 * i as f64).collect();
    let phys = [-20.0, -10.0, -5.0].into_iter().chain((0..=8).map(f64::from)).collect();
    (math, phys)
}

/// Penalty family for the velocity fit.
pub trait Regularizer: Send + Sync {
    /// Label used in reports, e.g. `math` or `phys(nu=0.5)`.
    fn label(&self) -> String;
    /// Penalties (one per hyperparameter) on the two-component basis.
    fn penalties(&self, rx: &IntegralMatrixSet, ry: &IntegralMatrixSet) -> Result<Vec<PenaltyMatrix>>;
    fn hyperparameters(&self) -> usize {
        1
    }
}

/// Integrated squared second derivatives of both components.
#[derive(Debug, Clone, Copy)]
pub struct Smoothness;

impl Regularizer for Smoothness {
    fn label(&self) -> String {
        "math".into()
    }

    fn penalties(&self, rx: &IntegralMatrixSet, ry: &IntegralMatrixSet) -> Result<Vec<PenaltyMatrix>> {
        Ok(vec![smoothness_penalty(rx, ry)?])
    }
}

/// Thin elastic sheet equilibrium residual.
#[derive(Debug, Clone, Copy)]
pub struct Elasticity {
    pub nu: f64,
}

impl Regularizer for Elasticity {
    fn label(&self) -> String {
        format!("phys(nu={})", self.nu)
    }

    fn penalties(&self, rx: &IntegralMatrixSet, ry: &IntegralMatrixSet) -> Result<Vec<PenaltyMatrix>> {
        Ok(vec![elasticity_penalty(rx, ry, self.nu)?])
    }
}

/// Smoothness and elasticity with independent weights.
#[derive(Debug, Clone, Copy)]
pub struct Hybrid {
    pub nu: f64,
}

impl Regularizer for Hybrid {
    fn label(&self) -> String {
        format!("hybrid(nu={})", self.nu)
    }

    fn penalties(&self, rx: &IntegralMatrixSet, ry: &IntegralMatrixSet) -> Result<Vec<PenaltyMatrix>> {
        Ok(vec![smoothness_penalty(rx, ry)?, elasticity_penalty(rx, ry, self.nu)?])
    }

    fn hyperparameters(&self) -> usize {
        2
    }
}

type RegularizerCtor = fn(f64) -> Box<dyn Regularizer>;

/// Regularizers by name; `nu` is passed to those that use it.
pub struct RegularizerRegistry {
    entries: BTreeMap<&'static str, RegularizerCtor>,
}

impl Default for RegularizerRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register("math", |_| Box::new(Smoothness));
        r.register("phys", |nu| Box::new(Elasticity { nu }));
        r.register("hybrid", |nu| Box::new(Hybrid { nu }));
        r
    }
}

impl RegularizerRegistry {
    pub fn register(&mut self, name: &'static str, ctor: RegularizerCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str, nu: f64) -> Result<Box<dyn Regularizer>> {
        let ctor = self.entries.get(name).ok_or_else(|| {
            PilmError::InvalidParameter(format!(
                "unknown regularization `{name}` (expected one of: {})",
                self.names().join(", ")
            ))
        })?;
        Ok(ctor(nu))
    }
}

/// The assembled velocity regression.
pub struct StrainProblem {
    pub basis: TensorBasis,
    pub integrals: IntegralMatrixSet,
    pub observations: ObservationSystem,
    pub penalties: Vec<PenaltyMatrix>,
    pub label: String,
    pub hyperparameters: usize,
}

/// Two-component spline over the region with knots every `spacing_km`.
/// East velocities are component 0, north component 1; data rows list all
/// east values first.
pub fn build_problem(stations: &StationSet, spacing_km: f64, regularizer: &dyn Regularizer) -> Result<StrainProblem> {
    let side = stations.region.side_km();
    let axis = BSplineBasis1D::with_spacing(side, spacing_km)?;
    let h = stations.region.half_width_km;
    let basis = TensorBasis::with_origins(vec![axis.clone(), axis.clone()], vec![-h, -h], 2)?;
    let integrals = IntegralMatrixSet::new(&axis);
    let mut data = Vec::with_capacity(2 * stations.len());
    for component in 0..2 {
        for s in &stations.stations {
            let v = if component == 0 { s.ve } else { s.vn };
            data.push(PointDatum::new(&[s.x, s.y], component, v));
        }
    }
    let observations = point_system(&basis, &data)?;
    let penalties = regularizer.penalties(&integrals, &integrals)?;
    Ok(StrainProblem {
        basis,
        integrals,
        observations,
        penalties,
        label: regularizer.label(),
        hyperparameters: regularizer.hyperparameters(),
    })
}

/// Regular output grid over the region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width_km: f64,
    pub spacing_km: f64,
}

impl GridSpec {
    /// 5 km spacing over the whole region.
    pub fn default_for(region: &Region) -> Self {
        Self { half_width_km: region.half_width_km, spacing_km: 5.0 }
    }

    pub fn axis(&self) -> Result<Vec<f64>> {
        let n = 2.0 * self.half_width_km / self.spacing_km;
        let count = n.round();
        if !(self.spacing_km > 0.0) || count < 1.0 || (n - count).abs() > 1e-9 * n {
            return Err(PilmError::InvalidParameter(format!(
                "grid spacing {} does not divide {}",
                self.spacing_km,
                2.0 * self.half_width_km
            )));
        }
        let count = count as usize;
        Ok((0..=count)
            .map(|i| -self.half_width_km + 2.0 * self.half_width_km * i as f64 / count as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainRatePoint {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    /// Strain and rotation rates in nanostrain/yr.
    pub exx: f64,
    pub exy: f64,
    pub eyy: f64,
    pub max_shear: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrainRateGrid {
    /// Row-major: `x` varies fastest.
    pub points: Vec<StrainRatePoint>,
    pub nx: usize,
    pub ny: usize,
}

pub const GRID_HEADER: &str =
    "x_km,y_km,u_mm_yr,v_mm_yr,exx_nstr_yr,exy_nstr_yr,eyy_nstr_yr,max_shear_nstr_yr,rotation_nstr_yr";

impl StrainRateGrid {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{GRID_HEADER}")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.x, p.y, p.u, p.v, p.exx, p.exy, p.eyy, p.max_shear, p.rotation
            )?;
        }
        Ok(())
    }
}

/// Velocity and strain rates of a fitted two-component expansion at one
/// point (km coordinates).
pub fn strain_rate_at(coefficients: &[f64], basis: &TensorBasis, x: f64, y: f64) -> Result<StrainRatePoint> {
    let at = |orders: [usize; 2], c: usize| basis.evaluate(coefficients, &[x, y], &orders, c);
    let (u, v) = (at([0, 0], 0)?, at([0, 0], 1)?);
    let (ux, uy) = (at([1, 0], 0)?, at([0, 1], 0)?);
    let (vx, vy) = (at([1, 0], 1)?, at([0, 1], 1)?);
    let s = NANOSTRAIN_PER_MM_YR_KM;
    let (exx, eyy, exy) = (ux * s, vy * s, 0.5 * (uy + vx) * s);
    Ok(StrainRatePoint {
        x,
        y,
        u,
        v,
        exx,
        exy,
        eyy,
        max_shear: (((exx - eyy) / 2.0).powi(2) + exy * exy).sqrt(),
        rotation: 0.5 * (vx - uy) * s,
    })
}

/// Evaluate on the grid; every grid point must lie in the basis domain.
pub fn strain_rates(coefficients: &[f64], basis: &TensorBasis, grid: &GridSpec) -> Result<StrainRateGrid> {
    if basis.components() != 2 || basis.dims() != 2 {
        return Err(PilmError::DimensionMismatch("strain rates need a two-component 2-D basis".into()));
    }
    let axis = grid.axis()?;
    let coords: Vec<(f64, f64)> = axis.iter().flat_map(|&y| axis.iter().map(move |&x| (x, y))).collect();
    let points = coords
        .par_iter()
        .map(|&(x, y)| strain_rate_at(coefficients, basis, x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(StrainRateGrid { points, nx: axis.len(), ny: axis.len() })
}

/// One summary line of the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub label: String,
    pub alpha2: Vec<f64>,
    pub log_likelihood: f64,
    pub sigma: f64,
    pub rmse: f64,
    pub abic: f64,
}

/// Append report lines as `<label>.<metric> = value` keys.
pub fn add_report_lines(report: &mut Report, lines: &[ReportLine]) {
    for l in lines {
        let alpha = l.alpha2.iter().map(|a| sig(*a, 4)).collect::<Vec<_>>().join(" ");
        report.set(format!("{}.alpha2", l.label), alpha);
        report.set(format!("{}.ll", l.label), format!("{:.2}", l.log_likelihood));
        report.set(format!("{}.sigma_mm_yr", l.label), format!("{:.3}", l.sigma));
        report.set(format!("{}.rmse_mm_yr", l.label), format!("{:.3}", l.rmse));
        report.set(format!("{}.abic", l.label), format!("{:.2}", l.abic));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve;

    #[test]
    fn projection_round_trip_and_center() {
        let p = Projection::new(138.0, 36.0);
        assert_eq!(p.forward(138.0, 36.0), (0.0, 0.0));
        for &(lon, lat) in &[(136.3, 34.4), (139.9, 37.7), (138.0001, 35.9)] {
            let (x, y) = p.forward(lon, lat);
            let (lo, la) = p.inverse(x, y);
            assert!((lo - lon).abs() < 1e-9 && (la - lat).abs() < 1e-9);
        }
        // one degree of latitude ≈ 111.19 km
        assert!((p.forward(138.0, 37.0).1 - 111.19).abs() < 0.01);
    }

    #[test]
    fn load_filters_and_detects_delimiters() {
        let region = Region::central_japan();
        let csv = "station,lon_deg,lat_deg,ve_mm_yr,vn_mm_yr\nA,138.0,36.0,1.5,-2.0\nB,150.0,36.0,0,0\n";
        let set = load_stations(csv.as_bytes(), region).unwrap();
        assert_eq!((set.len(), set.rows_read), (1, 2));
        assert_eq!((set.stations[0].x, set.stations[0].y), (0.0, 0.0));
        assert_eq!(set.stations[0].ve, 1.5);

        let ws = "# comment\nlon_deg lat_deg ve_mm_yr vn_mm_yr\n138.5  36.2 1 2\n137.9 35.8 3 4\n";
        assert_eq!(load_stations(ws.as_bytes(), region).unwrap().len(), 2);
        let tsv = "LON_DEG\tlat_deg\tve_mm_yr\tvn_mm_yr\n138.5\t36.2\t1\t2\n";
        assert_eq!(load_stations(tsv.as_bytes(), region).unwrap().len(), 1);
    }

    #[test]
    fn load_errors() {
        let region = Region::central_japan();
        let bad = "lon_deg,lat_deg,ve_mm_yr,vn_mm_yr\n138,36,1,1\n138,36,x,1\n";
        let e = load_stations(bad.as_bytes(), region).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let ws_bad = "lon_deg lat_deg ve_mm_yr vn_mm_yr\n138 36 1 1\n\n138 36 1\n";
        let e = load_stations(ws_bad.as_bytes(), region).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        let missing = "lon_deg,lat_deg,ve\n138,36,1\n";
        assert!(load_stations(missing.as_bytes(), region).unwrap_err().to_string().contains("ve_mm_yr"));
        let outside = "lon_deg,lat_deg,ve_mm_yr,vn_mm_yr\n150,36,1,1\n";
        assert!(load_stations(outside.as_bytes(), region).is_err());
        assert!(load_stations("".as_bytes(), region).is_err());
    }

    #[test]
    fn registry() {
        let reg = RegularizerRegistry::default();
        assert_eq!(reg.names(), vec!["hybrid", "math", "phys"]);
        assert_eq!(reg.create("phys", 0.5).unwrap().label(), "phys(nu=0.5)");
        assert_eq!(reg.create("hybrid", 0.0).unwrap().hyperparameters(), 2);
        assert!(reg.create("bogus", 0.0).is_err());
    }

    fn small_set(field: impl Fn(f64, f64) -> (f64, f64)) -> StationSet {
        let region = Region::new(138.0, 36.0, 50.0).unwrap();
        let rows: Vec<_> = scatter_stations(60, 50.0, 11)
            .into_iter()
            .map(|(x, y)| {
                let (lon, lat) = region.projection.inverse(x, y);
                let (u, v) = field(x, y);
                (lon, lat, u, v)
            })
            .collect();
        StationSet::from_geographic(region, &rows).unwrap()
    }

    #[test]
    fn problem_layout() {
        let set = small_set(|_, _| (1.0, 2.0));
        let p = build_problem(&set, 20.0, &Smoothness).unwrap();
        assert_eq!(p.basis.per_component(), 64);
        assert_eq!(p.observations.len(), 2 * set.len());
        assert_eq!(p.penalties[0].dim(), 128);
        assert!(build_problem(&set, 30.0, &Smoothness).is_err());
    }

    #[test]
    fn translation_and_pure_shear() {
        let set = small_set(|_, _| (3.0, -1.0));
        let p = build_problem(&set, 20.0, &Smoothness).unwrap();
        let fit = solve(&p.observations, &[(1.0, &p.penalties[0])]).unwrap();
        let grid = strain_rates(&fit.coefficients_vec(), &p.basis, &GridSpec { half_width_km: 50.0, spacing_km: 25.0 })
            .unwrap();
        assert_eq!((grid.nx, grid.points.len()), (5, 25));
        for q in &grid.points {
            assert!((q.u - 3.0).abs() < 1e-8 && (q.v + 1.0).abs() < 1e-8);
            assert!(q.exx.abs() < 1e-6 && q.exy.abs() < 1e-6 && q.eyy.abs() < 1e-6 && q.max_shear < 1e-6);
        }

        // u = y, v = x (mm/yr with km); affine fields are free under smoothness
        let set = small_set(|x, y| (y, x));
        let p = build_problem(&set, 20.0, &Smoothness).unwrap();
        let fit = solve(&p.observations, &[(1.0, &p.penalties[0])]).unwrap();
        let q = strain_rate_at(&fit.coefficients_vec(), &p.basis, 10.0, -20.0).unwrap();
        let s = NANOSTRAIN_PER_MM_YR_KM;
        assert!((q.exy - s).abs() < 1e-6 && (q.max_shear - s).abs() < 1e-6);
        assert!(q.exx.abs() < 1e-6 && q.eyy.abs() < 1e-6 && q.rotation.abs() < 1e-6);
    }

    #[test]
    fn out_of_domain_grid_rejected() {
        let set = small_set(|_, _| (0.0, 0.0));
        let p = build_problem(&set, 20.0, &Smoothness).unwrap();
        let coeffs = vec![0.0; p.basis.parameter_count()];
        assert!(strain_rates(&coeffs, &p.basis, &GridSpec { half_width_km: 60.0, spacing_km: 20.0 }).is_err());
    }

    #[test]
    fn csv_header() {
        let grid = StrainRateGrid { points: vec![], nx: 0, ny: 0 };
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), GRID_HEADER);
    }

    #[test]
    fn report_keys() {
        let mut r = Report::new();
        add_report_lines(
            &mut r,
            &[ReportLine { label: "math".into(), alpha2: vec![0.5], log_likelihood: -1842.754, sigma: 1.42, rmse: 1.26, abic: 3687.5 }],
        );
        assert_eq!(r.get("math.ll"), Some("-1842.75"));
        assert_eq!(r.get_f64("math.rmse_mm_yr"), Some(1.26));
    }
}
