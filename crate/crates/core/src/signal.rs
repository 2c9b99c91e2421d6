//! Per-whisker processing chain: calibration, averaging filter, direction
//! and magnitude extraction, and array-relative normalization.

use std::collections::BTreeMap;

use crate::angle::{circular_mean, Vec2};
use crate::error::{Error, Result};
use crate::geometry::WhiskerId;

/// Averaging window used by the reference processing chain.
pub const DEFAULT_WINDOW: usize = 5;
/// Flow speed at which calibration responses are recorded, m/s.
pub const CALIBRATION_SPEED_MPS: f64 = 5.5;

/// One timestamped 3-axis magnetic reading. `bz` is carried through but
/// never used in planar processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub t_s: f64,
    pub whisker_id: WhiskerId,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl SensorSample {
    pub fn planar(&self) -> Vec2 {
        Vec2::new(self.bx, self.by)
    }
}

/// Per-half-axis calibration gains for one whisker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGains {
    pub x_pos: f64,
    pub x_neg: f64,
    pub y_pos: f64,
    pub y_neg: f64,
}

impl AxisGains {
    pub const IDENTITY: AxisGains = AxisGains {
        x_pos: 1.0,
        x_neg: 1.0,
        y_pos: 1.0,
        y_neg: 1.0,
    };

    pub fn new(x_pos: f64, x_neg: f64, y_pos: f64, y_neg: f64) -> Result<Self> {
        let g = Self {
            x_pos,
            x_neg,
            y_pos,
            y_neg,
        };
        if [x_pos, x_neg, y_pos, y_neg]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
        {
            Ok(g)
        } else {
            Err(Error::Config(format!(
                "calibration gains must be positive: {g:?}"
            )))
        }
    }
}

/// Stored responses to reference flows along each half axis.
///
/// A table-backed calibration rejects whiskers it has no entry for; the
/// identity calibration applies unit gains to every whisker.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    gains: BTreeMap<WhiskerId, AxisGains>,
    fallback: Option<AxisGains>,
    pub reference_speed_mps: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self::identity()
    }
}

impl Calibration {
    pub fn identity() -> Self {
        Self {
            gains: BTreeMap::new(),
            fallback: Some(AxisGains::IDENTITY),
            reference_speed_mps: CALIBRATION_SPEED_MPS,
        }
    }

    pub fn from_table(gains: BTreeMap<WhiskerId, AxisGains>) -> Self {
        Self {
            gains,
            fallback: None,
            reference_speed_mps: CALIBRATION_SPEED_MPS,
        }
    }

    pub fn gains_for(&self, id: WhiskerId) -> Result<AxisGains> {
        self.gains
            .get(&id)
            .copied()
            .or(self.fallback)
            .ok_or(Error::MissingCalibration(id))
    }

    pub fn entries(&self) -> impl Iterator<Item = (WhiskerId, AxisGains)> + '_ {
        self.gains.iter().map(|(k, v)| (*k, *v))
    }
}

/// Scale each planar axis by the inverse gain of the half axis it falls on.
/// Zero takes the positive branch.
pub fn apply_calibration(sample: &SensorSample, cal: &Calibration) -> Result<SensorSample> {
    let g = cal.gains_for(sample.whisker_id)?;
    let bx = if sample.bx >= 0.0 {
        sample.bx / g.x_pos
    } else {
        sample.bx / g.x_neg
    };
    let by = if sample.by >= 0.0 {
        sample.by / g.y_pos
    } else {
        sample.by / g.y_neg
    };
    Ok(SensorSample { bx, by, ..*sample })
}

/// Causal moving average of `bx` and `by` over one whisker's stream.
///
/// The first `window - 1` outputs average every sample seen so far. Output
/// length and timestamps match the input.
pub fn moving_average(stream: &[SensorSample], window: usize) -> Result<Vec<SensorSample>> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "averaging window must be at least 1".into(),
        ));
    }
    Ok((0..stream.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let span = &stream[lo..=i];
            let n = span.len() as f64;
            let bx = span.iter().map(|s| s.bx).sum::<f64>() / n;
            let by = span.iter().map(|s| s.by).sum::<f64>() / n;
            SensorSample {
                bx,
                by,
                ..stream[i]
            }
        })
        .collect())
}

/// Signal direction in degrees, `[0, 360)`, via the quadrant-aware arctangent.
pub fn direction_theta(bx: f64, by: f64) -> Result<f64> {
    Vec2::new(bx, by).heading().ok_or(Error::UndefinedDirection)
}

pub fn magnitude_b(bx: f64, by: f64) -> f64 {
    bx.hypot(by)
}

/// Direction and magnitude summary for one whisker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessedReading {
    pub whisker_id: WhiskerId,
    /// `None` when the averaged signal is exactly zero.
    pub theta_deg: Option<f64>,
    pub b_norm: f64,
    /// `b_norm` divided by the array maximum; `None` if the whole array is silent.
    pub b_rel: Option<f64>,
}

impl ProcessedReading {
    /// The reading as a planar vector, `b_norm` along `theta`.
    pub fn vector(&self) -> Vec2 {
        match self.theta_deg {
            Some(theta) => Vec2::from_heading(theta) * self.b_norm,
            None => Vec2::ZERO,
        }
    }

    pub fn from_vector(whisker_id: WhiskerId, v: Vec2) -> Self {
        Self {
            whisker_id,
            theta_deg: v.heading(),
            b_norm: v.norm(),
            b_rel: None,
        }
    }
}

/// Fill in `b_rel` from the array maximum of `b_norm`.
pub fn normalize_to_array_max(readings: &mut [ProcessedReading]) {
    let max = readings.iter().map(|r| r.b_norm).fold(0.0, f64::max);
    for r in readings.iter_mut() {
        r.b_rel = (max > 0.0).then(|| r.b_norm / max);
    }
}

/// Full chain for a window of samples.
///
/// Per whisker: calibrate, filter, take the time-mean of the filtered
/// vectors, then extract direction and magnitude. Magnitudes are
/// normalized against the array maximum after averaging.
pub fn process_window(
    samples: &[SensorSample],
    expected: &[WhiskerId],
    cal: &Calibration,
    window: usize,
) -> Result<Vec<ProcessedReading>> {
    let mut streams: BTreeMap<WhiskerId, Vec<SensorSample>> =
        expected.iter().map(|id| (*id, Vec::new())).collect();
    for s in samples {
        streams
            .entry(s.whisker_id)
            .or_default()
            .push(apply_calibration(s, cal)?);
    }
    let missing: Vec<WhiskerId> = streams
        .iter()
        .filter(|(_, v)| v.is_empty())
        .map(|(k, _)| *k)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }

    let mut readings = streams
        .into_iter()
        .map(|(id, mut stream)| {
            stream.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
            let filtered = moving_average(&stream, window)?;
            let n = filtered.len() as f64;
            let mean = filtered.iter().map(SensorSample::planar).sum::<Vec2>() * (1.0 / n);
            Ok(ProcessedReading::from_vector(id, mean))
        })
        .collect::<Result<Vec<_>>>()?;
    normalize_to_array_max(&mut readings);
    Ok(readings)
}

/// Magnitude-weighted circular mean of per-whisker directions.
pub fn net_direction(readings: &[ProcessedReading]) -> Option<f64> {
    circular_mean(
        readings
            .iter()
            .filter_map(|r| r.theta_deg.map(|t| (t, r.b_norm))),
    )
}
