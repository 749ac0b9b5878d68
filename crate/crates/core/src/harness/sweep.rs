//! Grid sweeps of gait fixed points across pipelines.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{linspace, Config};
use crate::error::{Error, Result};
use crate::fixed_point::{
    closed_form_fixed_point, numeric_fixed_point, AnalyticMap, FixedPointResult, NewtonSettings, Provenance,
    SimulatorMap,
};
use crate::format::sig;
use crate::model::{ApexState, ControlInputs, SlipParams};
use crate::sim::SimSettings;

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub params: SlipParams,
    /// `(min, max, count)`.
    pub p_bar_range: (f64, f64, usize),
    pub k_theta_range: (f64, f64, usize),
    pub pipelines: Vec<Provenance>,
    pub output_dir: PathBuf,
    /// Seed each Newton search with the fixed point found at the
    /// neighbouring grid point of smaller `|p_bar|`.
    pub seed_chaining: bool,
    pub workers: usize,
    /// Controller gains and torque limit; the gait knobs are overwritten per point.
    pub controller: ControlInputs,
    pub settings: SimSettings,
}

impl SweepConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let cfg = Self {
            params: c.params(),
            p_bar_range: (c.p_bar_min, c.p_bar_max, c.p_bar_count),
            k_theta_range: (c.k_theta_min, c.k_theta_max, c.k_theta_count),
            pipelines: c.pipeline_list()?,
            output_dir: c.output_dir.clone(),
            seed_chaining: c.seed_chaining,
            workers: c.workers,
            controller: c.inputs(c.p_bar, c.k_theta),
            settings: c.settings(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Table-sized grid with the default parameters, controller and pipelines.
    pub fn table_grid(output_dir: impl Into<PathBuf>) -> Self {
        let mut c = Config::default();
        c.output_dir = output_dir.into();
        Self::from_config(&c).expect("default config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.settings.validate()?;
        let (p0, p1, pn) = self.p_bar_range;
        let (k0, k1, kn) = self.k_theta_range;
        if pn < 1 || kn < 1 {
            return Err(Error::InvalidParameter("grid counts must be at least 1".into()));
        }
        if !(p0 <= p1 && k0 <= k1) {
            return Err(Error::InvalidParameter("grid ranges must satisfy min <= max".into()));
        }
        if !(0.0 <= k0 && k1 <= 1.0) {
            return Err(Error::InvalidParameter("k_theta range must lie in [0, 1]".into()));
        }
        if self.pipelines.is_empty() {
            return Err(Error::InvalidParameter("no pipelines selected".into()));
        }
        Ok(())
    }

    pub fn p_bars(&self) -> Vec<f64> {
        linspace(self.p_bar_range.0, self.p_bar_range.1, self.p_bar_range.2)
    }

    pub fn k_thetas(&self) -> Vec<f64> {
        linspace(self.k_theta_range.0, self.k_theta_range.1, self.k_theta_range.2)
    }

    fn inputs(&self, p_bar: f64, k_theta: f64) -> ControlInputs {
        ControlInputs {
            p_bar,
            k_theta,
            ..self.controller
        }
    }
}

/// Why a grid point failed, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub tag: String,
    pub message: String,
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        Self {
            tag: e.tag(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub p_bar: f64,
    pub k_theta: f64,
    pub pipeline: Provenance,
    pub result: std::result::Result<FixedPointResult, Failure>,
}

impl PointRecord {
    pub fn ok(&self) -> Option<&FixedPointResult> {
        self.result.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStat {
    pub n: usize,
    pub rms: f64,
    /// `sqrt(mean(((pred - ref) / ref)^2)) * 100`.
    pub percent_rms: f64,
    /// `rms / mean(|ref|) * 100`.
    pub rms_over_mean_ref: f64,
}

impl ErrorStat {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len();
        if n == 0 {
            return Self {
                n,
                rms: f64::NAN,
                percent_rms: f64::NAN,
                rms_over_mean_ref: f64::NAN,
            };
        }
        let nf = n as f64;
        let rms = (pairs.iter().map(|(p, r)| (p - r).powi(2)).sum::<f64>() / nf).sqrt();
        let rel = (pairs.iter().map(|(p, r)| ((p - r) / r).powi(2)).sum::<f64>() / nf).sqrt();
        let mean_ref = pairs.iter().map(|(_, r)| r.abs()).sum::<f64>() / nf;
        Self {
            n,
            rms,
            percent_rms: rel * 100.0,
            rms_over_mean_ref: rms / mean_ref * 100.0,
        }
    }
}

/// Error of one pipeline against another over points where both converged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairErrors {
    pub predicted: Provenance,
    pub reference: Provenance,
    pub x_dot: ErrorStat,
    pub y: ErrorStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineCounts {
    pub pipeline: Provenance,
    pub converged: usize,
    pub failed: usize,
    pub unstable: usize,
    pub max_spectral_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Grid order: `p_bar` outer, `k_theta` inner, pipelines in fixed order.
    pub points: Vec<PointRecord>,
    pub counts: Vec<PipelineCounts>,
    pub errors: Vec<PairErrors>,
}

impl SweepReport {
    pub fn pipeline_points(&self, p: Provenance) -> impl Iterator<Item = &PointRecord> {
        self.points.iter().filter(move |r| r.pipeline == p)
    }

    pub fn pair(&self, predicted: Provenance, reference: Provenance) -> Option<&PairErrors> {
        self.errors
            .iter()
            .find(|e| e.predicted == predicted && e.reference == reference)
    }

    pub fn all_failed(&self) -> bool {
        self.counts.iter().all(|c| c.converged == 0)
    }
}

type Cell = Vec<(Provenance, Result<FixedPointResult>)>;

fn solve_point(cfg: &SweepConfig, p_bar: f64, k_theta: f64, chained: &[Option<ApexState>; 2]) -> Cell {
    let inputs = cfg.inputs(p_bar, k_theta);
    let params = cfg.params;
    let closed = closed_form_fixed_point(p_bar, k_theta, &params);
    let closed_apex = closed.as_ref().ok().map(|r| r.apex);
    let mut out = Vec::new();
    let mut analytic_apex = None;
    for &p in &cfg.pipelines {
        let res = match p {
            Provenance::ClosedForm => closed.clone(),
            Provenance::AnalyticNumeric => {
                let map = AnalyticMap { inputs, params };
                let seeds = [closed_apex, chained[0]];
                let r = newton_from_seeds(&map, &seeds, &NewtonSettings::analytic());
                analytic_apex = r.as_ref().ok().map(|r| r.apex);
                r
            }
            Provenance::SimulatorNumeric => {
                let map = SimulatorMap {
                    inputs,
                    params,
                    settings: cfg.settings,
                };
                let seeds = [chained[1], closed_apex, analytic_apex];
                newton_from_seeds(&map, &seeds, &NewtonSettings::simulator())
            }
        };
        out.push((p, res));
    }
    out
}

const FALLBACK_SEED: ApexState = ApexState { x_dot: 1.0, y: 0.22 };

/// Newton from the first seed that converges, trying distinct seeds in order.
fn newton_from_seeds<M: crate::fixed_point::ReturnMap>(
    map: &M,
    seeds: &[Option<ApexState>],
    settings: &NewtonSettings,
) -> Result<FixedPointResult> {
    let mut tried: Vec<ApexState> = Vec::new();
    let mut first_err = None;
    for seed in seeds.iter().flatten().copied().chain(std::iter::once(FALLBACK_SEED)) {
        if tried.contains(&seed) {
            continue;
        }
        tried.push(seed);
        match numeric_fixed_point(map, &seed, settings) {
            Ok(r) => return Ok(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("at least one seed tried"))
}

/// Solves one `k_theta` column, walking outwards in `|p_bar|`.
fn solve_column(cfg: &SweepConfig, p_bars: &[f64], k_theta: f64) -> Vec<Cell> {
    let mut order: Vec<usize> = (0..p_bars.len()).collect();
    order.sort_by(|&a, &b| p_bars[a].abs().total_cmp(&p_bars[b].abs()).then(a.cmp(&b)));
    let mut cells: Vec<Option<Cell>> = vec![None; p_bars.len()];
    let mut chained: [Option<ApexState>; 2] = [None, None];
    for i in order {
        let cell = solve_point(cfg, p_bars[i], k_theta, &chained);
        if cfg.seed_chaining {
            for (p, r) in &cell {
                let slot = match p {
                    Provenance::AnalyticNumeric => 0,
                    Provenance::SimulatorNumeric => 1,
                    Provenance::ClosedForm => continue,
                };
                if let Ok(r) = r {
                    chained[slot] = Some(r.apex);
                }
            }
        }
        cells[i] = Some(cell);
    }
    cells.into_iter().map(|c| c.expect("every point solved")).collect()
}

/// Runs every requested pipeline at every grid point. Per-point failures are
/// recorded, never fatal.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let p_bars = cfg.p_bars();
    let k_thetas = cfg.k_thetas();
    let work = || -> Vec<Vec<Cell>> { k_thetas.par_iter().map(|&kt| solve_column(cfg, &p_bars, kt)).collect() };
    let columns = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };

    let mut points = Vec::with_capacity(p_bars.len() * k_thetas.len() * cfg.pipelines.len());
    for (i, &pb) in p_bars.iter().enumerate() {
        for (j, &kt) in k_thetas.iter().enumerate() {
            for (p, r) in &columns[j][i] {
                points.push(PointRecord {
                    p_bar: pb,
                    k_theta: kt,
                    pipeline: *p,
                    result: r.as_ref().map(|r| *r).map_err(Failure::from),
                });
            }
        }
    }

    let counts = cfg
        .pipelines
        .iter()
        .map(|&p| {
            let rows: Vec<_> = points.iter().filter(|r| r.pipeline == p).collect();
            let ok: Vec<_> = rows.iter().filter_map(|r| r.ok()).collect();
            PipelineCounts {
                pipeline: p,
                converged: ok.len(),
                failed: rows.len() - ok.len(),
                unstable: ok.iter().filter(|r| !r.stable).count(),
                max_spectral_radius: ok.iter().map(|r| r.spectral_radius).fold(f64::NAN, f64::max),
            }
        })
        .collect();

    let mut errors = Vec::new();
    let pairs = [
        (Provenance::ClosedForm, Provenance::SimulatorNumeric),
        (Provenance::AnalyticNumeric, Provenance::SimulatorNumeric),
        (Provenance::ClosedForm, Provenance::AnalyticNumeric),
    ];
    for (pred, refp) in pairs {
        if !(cfg.pipelines.contains(&pred) && cfg.pipelines.contains(&refp)) {
            continue;
        }
        let find = |pb: f64, kt: f64, p: Provenance| {
            points
                .iter()
                .find(|r| r.p_bar == pb && r.k_theta == kt && r.pipeline == p)
                .and_then(|r| r.ok())
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in points.iter().filter(|r| r.pipeline == pred) {
            if let (Some(a), Some(b)) = (r.ok(), find(r.p_bar, r.k_theta, refp)) {
                xs.push((a.apex.x_dot, b.apex.x_dot));
                ys.push((a.apex.y, b.apex.y));
            }
        }
        errors.push(PairErrors {
            predicted: pred,
            reference: refp,
            x_dot: ErrorStat::from_pairs(&xs),
            y: ErrorStat::from_pairs(&ys),
        });
    }

    Ok(SweepReport {
        config: cfg.clone(),
        points,
        counts,
        errors,
    })
}

pub const SWEEP_HEADER: &str = "p_bar,k_theta,pipeline,x_dot_star,y_star,spectral_radius,stable,residual,status";
pub const ERRORS_HEADER: &str = "predicted,reference,quantity,n,rms,percent_rms,rms_over_mean_ref";

pub fn write_sweep_csv<W: Write>(report: &SweepReport, mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in &report.points {
        let head = format!("{},{},{}", sig(r.p_bar), sig(r.k_theta), r.pipeline.as_str());
        match &r.result {
            Ok(f) => writeln!(
                w,
                "{head},{},{},{},{},{},ok",
                sig(f.apex.x_dot),
                sig(f.apex.y),
                sig(f.spectral_radius),
                f.stable,
                sig(f.residual)
            )?,
            Err(e) => writeln!(w, "{head},nan,nan,nan,false,nan,failed:{}", e.tag)?,
        }
    }
    Ok(())
}

pub fn write_errors_csv<W: Write>(report: &SweepReport, mut w: W) -> io::Result<()> {
    writeln!(w, "{ERRORS_HEADER}")?;
    for e in &report.errors {
        for (q, s) in [("x_dot", &e.x_dot), ("y", &e.y)] {
            writeln!(
                w,
                "{},{},{q},{},{},{},{}",
                e.predicted.as_str(),
                e.reference.as_str(),
                s.n,
                sig(s.rms),
                sig(s.percent_rms),
                sig(s.rms_over_mean_ref)
            )?;
        }
    }
    Ok(())
}

/// Writes `sweep.csv`, `errors.csv` and `report.json` into `dir`.
pub fn write_sweep_outputs(report: &SweepReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_sweep_csv(report, io::BufWriter::new(fs::File::create(dir.join("sweep.csv"))?))?;
    write_errors_csv(report, io::BufWriter::new(fs::File::create(dir.join("errors.csv"))?))?;
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(dir.join("report.json"), json + "\n")
}
