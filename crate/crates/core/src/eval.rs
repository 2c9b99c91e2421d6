//! Monte-Carlo evaluation of the estimators and the occlusion sweep.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::angle::wrap_deg;
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_single_flow, method1, method2, rmse, Method1Options, Method2Options,
    DEFAULT_MAGNITUDE_FLOOR,
};
use crate::geometry::{
    ArrayLayout, FlowSource, WhiskerId, DEFAULT_DIAMETER_MM, DEFAULT_SPACING_MM,
};
use crate::signal::{process_window, Calibration, ProcessedReading, DEFAULT_WINDOW};
use crate::simulate::{simulate_trial, NoiseModel, ResponseModel, DEFAULT_RATE_HZ};

/// One flow configuration. Flow 2 comes from `phi1_deg + alpha_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub phi1_deg: f64,
    pub alpha_deg: f64,
    pub v1_mps: f64,
    pub v2_mps: f64,
}

impl GridPoint {
    pub fn phi2_deg(&self) -> f64 {
        crate::angle::normalize_deg(self.phi1_deg + self.alpha_deg)
    }

    pub fn flows(&self) -> Result<[FlowSource; 2]> {
        Ok([
            FlowSource::new(self.phi1_deg, self.v1_mps)?,
            FlowSource::new(self.phi2_deg(), self.v2_mps)?,
        ])
    }

    /// v1/v2 rounded to one decimal, the grouping key of the summary table.
    pub fn ratio_key(&self) -> f64 {
        ratio_key(self.v1_mps / self.v2_mps)
    }
}

pub fn ratio_key(ratio: f64) -> f64 {
    (ratio * 10.0).round() / 10.0
}

/// The 24-point evaluation grid: phi1 in {0, 15}, alpha in {45, 90, 135},
/// v1 in {5.2, 6.5}, v2 in {7.3, 8.3}.
pub fn reference_grid() -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(24);
    for phi1_deg in [0.0, 15.0] {
        for alpha_deg in [45.0, 90.0, 135.0] {
            for v1_mps in [5.2, 6.5] {
                for v2_mps in [7.3, 8.3] {
                    out.push(GridPoint {
                        phi1_deg,
                        alpha_deg,
                        v1_mps,
                        v2_mps,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub layout: ArrayLayout,
    pub response: ResponseModel,
    /// `noise.seed` is the base seed; each trial derives its own.
    pub noise: NoiseModel,
    pub trials: usize,
    pub n_samples: usize,
    pub rate_hz: f64,
    pub window: usize,
    pub method1: Method1Options,
    pub method2: Method2Options,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            layout: ArrayLayout::grid2x2(DEFAULT_SPACING_MM, DEFAULT_DIAMETER_MM)
                .expect("default layout is valid"),
            response: ResponseModel::default(),
            noise: NoiseModel::default(),
            trials: 20,
            n_samples: 50,
            rate_hz: DEFAULT_RATE_HZ,
            window: DEFAULT_WINDOW,
            method1: Method1Options::default(),
            method2: Method2Options::default(),
        }
    }
}

/// Estimates from one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub point: GridPoint,
    pub trial: usize,
    pub m1_phi2_deg: f64,
    pub m2_phi1_deg: f64,
    pub m2_phi2_deg: f64,
}

impl TrialRecord {
    pub fn m1_phi2_err_deg(&self) -> f64 {
        wrap_deg(self.m1_phi2_deg - self.point.phi2_deg())
    }

    pub fn m2_phi1_err_deg(&self) -> f64 {
        wrap_deg(self.m2_phi1_deg - self.point.phi1_deg)
    }

    pub fn m2_phi2_err_deg(&self) -> f64 {
        wrap_deg(self.m2_phi2_deg - self.point.phi2_deg())
    }
}

/// RMSE per (alpha, speed-ratio) group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub alpha_deg: f64,
    pub ratio: f64,
    pub m1_phi2_rmse_deg: f64,
    pub m2_phi1_rmse_deg: f64,
    pub m2_phi2_rmse_deg: f64,
    pub n_trials: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `point`. Independent of evaluation order.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(point as u64)) ^ trial as u64)
}

/// Simulate and process one trial, returning per-whisker readings.
#[allow(clippy::too_many_arguments)]
pub fn simulate_readings(
    layout: &ArrayLayout,
    flows: &[FlowSource],
    response: &ResponseModel,
    noise: &NoiseModel,
    n_samples: usize,
    rate_hz: f64,
    window: usize,
) -> Result<Vec<ProcessedReading>> {
    let samples = simulate_trial(layout, flows, response, noise, n_samples, rate_hz)?;
    let ids: Vec<WhiskerId> = layout.ids().collect();
    process_window(&samples, &ids, &Calibration::identity(), window)
}

pub fn run_trial(
    cfg: &EvalConfig,
    point: &GridPoint,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let flows = point.flows()?;
    let noise = cfg.noise.with_seed(seed);
    let readings = simulate_readings(
        &cfg.layout,
        &flows,
        &cfg.response,
        &noise,
        cfg.n_samples,
        cfg.rate_hz,
        cfg.window,
    )?;
    let m1 = method1(
        &readings,
        &cfg.layout,
        point.phi1_deg,
        &cfg.response,
        &cfg.method1,
    )?;
    let m2 = method2(&readings, &cfg.layout, &cfg.response, &cfg.method2)?;
    Ok(TrialRecord {
        point: *point,
        trial,
        m1_phi2_deg: m1.phi2_hat,
        m2_phi1_deg: m2.phi1_hat.unwrap_or(m2.phi2_hat),
        m2_phi2_deg: m2.phi2_hat,
    })
}

/// Run `cfg.trials` trials at every point, in parallel. Output order is
/// point-major then trial, independent of scheduling.
pub fn evaluate_grid(points: &[GridPoint], cfg: &EvalConfig) -> Result<Vec<TrialRecord>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let base = cfg.noise.seed;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    jobs.par_iter()
        .map(|&(p, t)| run_trial(cfg, &points[p], t, trial_seed(base, p, t)))
        .collect()
}

/// Group trial records by (alpha, ratio key) and compute RMSEs.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    // Keys scaled to integers so they order and compare exactly.
    let mut groups: BTreeMap<(i64, i64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = (
            (r.point.alpha_deg * 1000.0).round() as i64,
            (r.point.ratio_key() * 10.0).round() as i64,
        );
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let zeros = vec![0.0; g.len()];
            let errs =
                |f: fn(&TrialRecord) -> f64| -> Vec<f64> { g.iter().map(|r| f(r)).collect() };
            Ok(SummaryRow {
                alpha_deg: g[0].point.alpha_deg,
                ratio: g[0].point.ratio_key(),
                m1_phi2_rmse_deg: rmse(&zeros, &errs(TrialRecord::m1_phi2_err_deg))?,
                m2_phi1_rmse_deg: rmse(&zeros, &errs(TrialRecord::m2_phi1_err_deg))?,
                m2_phi2_rmse_deg: rmse(&zeros, &errs(TrialRecord::m2_phi2_err_deg))?,
                n_trials: g.len(),
            })
        })
        .collect()
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "fit needs paired data, got {} x and {} y",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::InsufficientData(
            "fit needs at least two points".into(),
        ));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * n * (1.0 + mx * mx) {
        return Err(Error::InsufficientData("fit needs spread in x".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Settings for the two-whisker shadowing sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub spacing_mm: f64,
    pub diameter_mm: f64,
    pub headings_deg: Vec<f64>,
    pub speed_mps: f64,
    pub response: ResponseModel,
    pub noise: NoiseModel,
    pub trials: usize,
    pub n_samples: usize,
    pub rate_hz: f64,
    pub window: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            spacing_mm: DEFAULT_SPACING_MM,
            diameter_mm: DEFAULT_DIAMETER_MM,
            headings_deg: (-6..=6).map(|k| f64::from(k) * 5.0).collect(),
            speed_mps: 5.5,
            response: ResponseModel::default(),
            noise: NoiseModel::none(),
            trials: 1,
            n_samples: 50,
            rate_hz: DEFAULT_RATE_HZ,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Shadowing of the downstream whisker at one heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub heading_deg: f64,
    pub occlusion_percent: f64,
    /// Downstream over upstream magnitude, averaged over trials.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slope: f64,
    pub intercept: f64,
}

/// Sweep a single flow over the headings on the pair layout and regress
/// the downstream/upstream magnitude ratio on occlusion percent.
pub fn sweep_occlusion(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let layout = ArrayLayout::pair(cfg.spacing_mm, cfg.diameter_mm)?;
    let upstream = WhiskerId(1);
    let downstream = WhiskerId(2);
    let rows = cfg
        .headings_deg
        .iter()
        .enumerate()
        .map(|(h, &heading)| {
            let flow = FlowSource::new(heading, cfg.speed_mps)?;
            let occ = layout.occlusion_for_whisker(flow.heading_deg(), downstream)?;
            let mut total = 0.0;
            for t in 0..cfg.trials {
                let noise = cfg.noise.with_seed(trial_seed(cfg.noise.seed, h, t));
                let readings = simulate_readings(
                    &layout,
                    &[flow],
                    &cfg.response,
                    &noise,
                    cfg.n_samples,
                    cfg.rate_hz,
                    cfg.window,
                )?;
                let norm = |id| {
                    readings
                        .iter()
                        .find(|r| r.whisker_id == id)
                        .map(|r| r.b_norm)
                        .expect("every layout whisker is processed")
                };
                let up = norm(upstream);
                if !(up > 0.0) {
                    return Err(Error::NoSignal);
                }
                total += norm(downstream) / up;
            }
            Ok(SweepRow {
                heading_deg: heading,
                occlusion_percent: occ,
                ratio: total / cfg.trials as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.occlusion_percent).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    Ok(SweepResult {
        rows,
        slope,
        intercept,
    })
}

/// Heading of a single flow estimated from one simulated trial.
pub fn single_flow_trial(
    layout: &ArrayLayout,
    flow: FlowSource,
    response: &ResponseModel,
    noise: &NoiseModel,
    n_samples: usize,
    rate_hz: f64,
) -> Result<f64> {
    let readings = simulate_readings(
        layout,
        &[flow],
        response,
        noise,
        n_samples,
        rate_hz,
        DEFAULT_WINDOW,
    )?;
    estimate_single_flow(&readings, DEFAULT_MAGNITUDE_FLOOR)
}
