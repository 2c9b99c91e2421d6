//! Heading estimators.
//!
//! Method 1 knows the heading of flow 1 and recovers flow 2; Method 2
//! recovers both. Both work by predicting the array's response to one
//! flow, subtracting it from the measured vectors, and reading the other
//! flow's heading off the summed residual.

use crate::angle::{angular_distance, circular_mean, normalize_deg, wrap_deg, Vec2};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, WhiskerId};
use crate::signal::ProcessedReading;
use crate::simulate::ResponseModel;

/// Readings whose relative magnitude falls below this are ignored by the
/// single-flow estimator.
pub const DEFAULT_MAGNITUDE_FLOOR: f64 = 0.05;
/// Residual-to-signal ratio under which an estimate is flagged.
pub const LOW_CONFIDENCE_RATIO: f64 = 0.05;

const OCC_TOL: f64 = 1e-9;
const SINGLE_FLOW_SPREAD_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiskerVector {
    pub whisker_id: WhiskerId,
    pub vector: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub phi1_hat: Option<f64>,
    pub phi2_hat: f64,
    /// Residual vectors from the final subtraction step.
    pub per_whisker_residuals: Vec<WhiskerVector>,
    pub iterations: usize,
    /// Summed residual was under 5% of the summed signal.
    pub low_confidence: bool,
    /// All whiskers pointed the same way; both headings equal the common one.
    pub single_flow: bool,
}

/// RMSE of one estimator over one `(alpha, ratio)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSummary {
    pub alpha_deg: f64,
    pub speed_ratio: f64,
    pub rmse_phi1: Option<f64>,
    pub rmse_phi2: f64,
    pub n_trials: usize,
}

/// How Method 1 sizes the predicted flow-1 response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow1Scale {
    /// Magnitude of the least-shadowed whisker (smallest one on ties).
    LeastOccluded,
    /// Flow-1 scale of the best joint least-squares fit of both flows to
    /// the whole array, searching over flow 2's heading.
    Fitted,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method1Options {
    pub scale: Flow1Scale,
}

impl Default for Method1Options {
    fn default() -> Self {
        Self {
            scale: Flow1Scale::Fitted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method2Options {
    /// Passes of the swap-and-redo refinement.
    pub refine_iters: usize,
}

impl Default for Method2Options {
    fn default() -> Self {
        Self { refine_iters: 1 }
    }
}

/// Root-mean-square of wrapped angular errors, degrees.
pub fn rmse(truths: &[f64], predictions: &[f64]) -> Result<f64> {
    if truths.len() != predictions.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse needs equal lengths, got {} and {}",
            truths.len(),
            predictions.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument(
            "rmse needs at least one value".into(),
        ));
    }
    let sum_sq: f64 = truths
        .iter()
        .zip(predictions)
        .map(|(t, p)| wrap_deg(p - t).powi(2))
        .sum();
    Ok((sum_sq / truths.len() as f64).sqrt())
}

/// Heading of a single flow: magnitude-weighted circular mean of the
/// whisker directions, skipping whiskers below `floor` of the array maximum.
pub fn estimate_single_flow(readings: &[ProcessedReading], floor: f64) -> Result<f64> {
    let max = readings.iter().map(|r| r.b_norm).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoSignal);
    }
    circular_mean(readings.iter().filter_map(|r| {
        let theta = r.theta_deg?;
        (r.b_norm / max >= floor).then_some((theta, r.b_norm))
    }))
    .ok_or_else(|| Error::InsufficientData("whisker directions cancel out".into()))
}

/// Expected response of every whisker to flow 1 alone, in id order.
pub fn predict_flow1_response(
    layout: &ArrayLayout,
    phi1_deg: f64,
    response: &ResponseModel,
    scale: f64,
) -> Result<Vec<WhiskerVector>> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let dir = Vec2::from_heading(phi1_deg);
    Ok(layout
        .occlusion_profile(phi1_deg)
        .into_iter()
        .map(|(id, occ)| WhiskerVector {
            whisker_id: id,
            vector: dir * (scale * response.expected_ratio(occ)),
        })
        .collect())
}

/// Measured vectors ordered to match the layout.
fn measured_vectors(readings: &[ProcessedReading], layout: &ArrayLayout) -> Result<Vec<Vec2>> {
    let mut out = vec![None; layout.len()];
    for r in readings {
        let idx = layout
            .ids()
            .position(|id| id == r.whisker_id)
            .ok_or(Error::UnknownWhisker(r.whisker_id))?;
        let slot = &mut out[idx];
        let v = r.vector();
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "whisker {} has a non-finite reading",
                r.whisker_id
            )));
        }
        *slot = Some(v);
    }
    let missing: Vec<WhiskerId> = layout
        .ids()
        .zip(&out)
        .filter(|(_, v)| v.is_none())
        .map(|(id, _)| id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }
    Ok(out.into_iter().flatten().collect())
}

/// Magnitude of the least-shadowed whisker for flow from `heading`. Ties
/// take the smallest magnitude: among equally exposed whiskers, that one
/// is the least likely to carry the other flow too.
fn least_occluded_scale(measured: &[Vec2], occ: &[f64]) -> f64 {
    let least = occ.iter().copied().fold(f64::INFINITY, f64::min);
    measured
        .iter()
        .zip(occ)
        .filter(|(_, o)| **o <= least + OCC_TOL)
        .map(|(v, _)| v.norm())
        .fold(f64::INFINITY, f64::min)
}

struct ResidualStep {
    heading: Option<f64>,
    residuals: Vec<WhiskerVector>,
    low_confidence: bool,
}

/// Subtract the predicted response of a flow from `known_heading`, then
/// read the other heading off the sum of the residuals. With
/// `drop_exposed`, whiskers the known flow does not shadow are left out of
/// the sum.
fn residual_step(
    layout: &ArrayLayout,
    measured: &[Vec2],
    occ: &[f64],
    known_heading: f64,
    response: &ResponseModel,
    scale: f64,
    drop_exposed: bool,
) -> Result<ResidualStep> {
    let predicted = predict_flow1_response(layout, known_heading, response, scale)?;
    let mut residuals = Vec::with_capacity(measured.len());
    let mut sum = Vec2::ZERO;
    let mut signal = Vec2::ZERO;
    let mut kept = 0;
    for ((b, p), o) in measured.iter().zip(&predicted).zip(occ) {
        let delta = *b - p.vector;
        residuals.push(WhiskerVector {
            whisker_id: p.whisker_id,
            vector: delta,
        });
        if drop_exposed && *o <= OCC_TOL {
            continue;
        }
        sum += delta;
        signal += *b;
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::DegenerateGeometry(format!(
            "no whisker is shadowed from flow at {known_heading:.3} deg"
        )));
    }
    Ok(ResidualStep {
        heading: sum.heading(),
        residuals,
        low_confidence: sum.norm() < LOW_CONFIDENCE_RATIO * signal.norm(),
    })
}

/// Heading step of the coarse search for flow 2 in the joint fit.
const FIT_SCAN_STEP_DEG: f64 = 0.5;
/// Width at which the golden-section polish stops.
const FIT_TOL_DEG: f64 = 1e-9;

fn unit_response(layout: &ArrayLayout, heading: f64, response: &ResponseModel) -> Vec<Vec2> {
    predict_flow1_response(layout, heading, response, 1.0)
        .expect("unit scale is valid")
        .into_iter()
        .map(|w| w.vector)
        .collect()
}

/// Flow-1 scale of the least-squares fit `measured ≈ s1·A(phi1) + s2·B(phi2)`
/// minimized over `phi2`.
///
/// `phi2` is scanned on a grid anchored at `phi1`, so the search turns with
/// the data, then the best cell is polished by golden-section search.
fn fitted_flow1_scale(
    layout: &ArrayLayout,
    measured: &[Vec2],
    phi1: f64,
    response: &ResponseModel,
) -> Option<f64> {
    let a = unit_response(layout, phi1, response);
    let fit = |phi2: f64| -> Option<(f64, f64)> {
        let b = unit_response(layout, phi2, response);
        let (mut aa, mut ab, mut bb, mut am, mut bm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((m, a), b) in measured.iter().zip(&a).zip(&b) {
            aa += a.dot(*a);
            ab += a.dot(*b);
            bb += b.dot(*b);
            am += a.dot(*m);
            bm += b.dot(*m);
        }
        let det = aa * bb - ab * ab;
        if det <= 1e-9 * aa * bb {
            return None;
        }
        let s1 = (am * bb - bm * ab) / det;
        let s2 = (bm * aa - am * ab) / det;
        // A negative speed would let phi2 + 180 fit as well as phi2.
        if s2 < 0.0 {
            return None;
        }
        let sse = measured
            .iter()
            .zip(&a)
            .zip(&b)
            .map(|((m, a), b)| {
                let r = *m - *a * s1 - *b * s2;
                r.dot(r)
            })
            .sum();
        Some((sse, s1))
    };
    let cost = |phi2: f64| fit(phi2).map_or(f64::INFINITY, |(sse, _)| sse);

    let steps = (360.0 / FIT_SCAN_STEP_DEG) as usize;
    let (_, best) = (0..steps)
        .map(|k| phi1 + k as f64 * FIT_SCAN_STEP_DEG)
        .map(|phi2| (cost(phi2), phi2))
        .filter(|(c, _)| c.is_finite())
        .min_by(|x, y| x.0.total_cmp(&y.0))?;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best - FIT_SCAN_STEP_DEG, best + FIT_SCAN_STEP_DEG);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while hi - lo > FIT_TOL_DEG {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = cost(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = cost(d);
        }
    }
    let polished = 0.5 * (lo + hi);
    let phi2 = if cost(polished) <= cost(best) {
        polished
    } else {
        best
    };
    fit(phi2).map(|(_, s1)| s1).filter(|s1| *s1 > 0.0)
}

fn occlusions(layout: &ArrayLayout, heading: f64) -> Vec<f64> {
    layout
        .occlusion_profile(heading)
        .into_iter()
        .map(|(_, o)| o)
        .collect()
}

/// Method 1: flow 1's heading is known, estimate flow 2's.
///
/// 1. predict flow 1's response across the array;
/// 2. subtract it from the measured vectors;
/// 3. drop whiskers flow 1 does not shadow;
/// 4. sum the residual components;
/// 5. flow 2's heading is the direction of that sum.
pub fn method1(
    readings: &[ProcessedReading],
    layout: &ArrayLayout,
    phi1_deg: f64,
    response: &ResponseModel,
    opts: &Method1Options,
) -> Result<EstimateReport> {
    let phi1 = normalize_deg(phi1_deg);
    let measured = measured_vectors(readings, layout)?;
    let occ = occlusions(layout, phi1);

    let scale = match opts.scale {
        Flow1Scale::Fixed(s) => s,
        Flow1Scale::LeastOccluded => least_occluded_scale(&measured, &occ),
        Flow1Scale::Fitted => fitted_flow1_scale(layout, &measured, phi1, response)
            .unwrap_or_else(|| least_occluded_scale(&measured, &occ)),
    };
    if !(scale > 0.0) {
        return Err(Error::NoSignal);
    }
    let step = residual_step(layout, &measured, &occ, phi1, response, scale, true)?;
    let iterations = 1;

    Ok(EstimateReport {
        phi1_hat: None,
        phi2_hat: step.heading.unwrap_or(phi1),
        low_confidence: step.low_confidence || step.heading.is_none(),
        per_whisker_residuals: step.residuals,
        iterations,
        single_flow: false,
    })
}

/// Method 2: estimate both headings with no prior.
///
/// 1. bootstrap flow 1 from the whisker direction furthest from the
///    circular mean of all directions;
/// 2. to 5. as Method 1 from that guess, without dropping exposed whiskers;
/// 6. swap roles: re-estimate flow 1 from the flow 2 estimate, then flow 2
///    from the new flow 1, `refine_iters` times.
pub fn method2(
    readings: &[ProcessedReading],
    layout: &ArrayLayout,
    response: &ResponseModel,
    opts: &Method2Options,
) -> Result<EstimateReport> {
    let measured = measured_vectors(readings, layout)?;
    let usable: Vec<(WhiskerId, f64, f64)> = layout
        .ids()
        .zip(&measured)
        .filter_map(|(id, v)| v.heading().map(|theta| (id, theta, v.norm())))
        .collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "method 2 needs at least 2 whiskers with signal, got {}",
            usable.len()
        )));
    }

    let mean = circular_mean(usable.iter().map(|(_, theta, _)| (*theta, 1.0)));
    let distance = |theta: f64| mean.map_or(0.0, |m| angular_distance(theta, m));
    let spread = usable.iter().map(|u| distance(u.1)).fold(0.0, f64::max);
    if let (Some(m), true) = (mean, spread <= SINGLE_FLOW_SPREAD_DEG) {
        return Ok(EstimateReport {
            phi1_hat: Some(m),
            phi2_hat: m,
            per_whisker_residuals: Vec::new(),
            iterations: 0,
            low_confidence: false,
            single_flow: true,
        });
    }

    // furthest from the mean; ties go to the larger magnitude, then the lower id
    let (_, mut phi1, _) = *usable
        .iter()
        .max_by(|a, b| {
            let (da, db) = (distance(a.1), distance(b.1));
            if (da - db).abs() > 1e-9 {
                da.total_cmp(&db)
            } else if (a.2 - b.2).abs() > 1e-12 * a.2.max(b.2) {
                a.2.total_cmp(&b.2)
            } else {
                b.0.cmp(&a.0)
            }
        })
        .expect("usable has at least two entries");

    let estimate_other = |known: f64| -> Result<ResidualStep> {
        let occ = occlusions(layout, known);
        let scale = least_occluded_scale(&measured, &occ);
        if !(scale > 0.0) {
            return Err(Error::NoSignal);
        }
        residual_step(layout, &measured, &occ, known, response, scale, false)
    };

    let mut step = estimate_other(phi1)?;
    let mut phi2 = step.heading.unwrap_or(phi1);
    let mut iterations = 1;
    for _ in 0..opts.refine_iters {
        let back = estimate_other(phi2)?;
        phi1 = back.heading.unwrap_or(phi2);
        step = estimate_other(phi1)?;
        phi2 = step.heading.unwrap_or(phi1);
        iterations += 1;
    }

    Ok(EstimateReport {
        phi1_hat: Some(phi1),
        phi2_hat: phi2,
        low_confidence: step.low_confidence || step.heading.is_none(),
        per_whisker_residuals: step.residuals,
        iterations,
        single_flow: false,
    })
}
