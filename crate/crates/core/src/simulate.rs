//! Forward model for whisker arrays under one or two flows.
//!
//! Each source is attenuated independently by the geometric shadow it casts
//! for its own heading, and the per-source responses are summed as vectors.
//! Noise is zero-mean Gaussian on direction and on fractional magnitude.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angle::Vec2;
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, FlowSource, WhiskerId};
use crate::signal::SensorSample;

/// Sampling rate of the reference acquisition chain, Hz.
pub const DEFAULT_RATE_HZ: f64 = 100.0;
/// Heading error of a single unshadowed sensor, degrees.
pub const SENSOR_HEADING_RMSE_DEG: f64 = 5.22;
/// Largest number of simultaneous sources the model is characterized for.
pub const MAX_SOURCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseModel {
    /// Exponent of the speed-to-magnitude law.
    pub speed_exponent: f64,
    /// Speed that maps to unit magnitude, m/s.
    pub reference_speed_mps: f64,
    /// Downstream-to-upstream magnitude loss at full occlusion.
    pub attenuation_slope: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        Self {
            speed_exponent: 2.0,
            reference_speed_mps: 5.5,
            attenuation_slope: 0.8,
        }
    }
}

impl ResponseModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.attenuation_slope) {
            return Err(Error::Config(format!(
                "attenuation_slope must lie in [0, 1], got {}",
                self.attenuation_slope
            )));
        }
        if !(self.reference_speed_mps > 0.0) || !self.reference_speed_mps.is_finite() {
            return Err(Error::Config("reference_speed must be positive".into()));
        }
        if !self.speed_exponent.is_finite() {
            return Err(Error::Config("speed_exponent must be finite".into()));
        }
        Ok(())
    }

    /// Downstream/upstream magnitude ratio for a given occlusion percent.
    pub fn expected_ratio(&self, occ_percent: f64) -> f64 {
        debug_assert!((-1e-9..=100.0 + 1e-9).contains(&occ_percent));
        1.0 - self.attenuation_slope * (occ_percent.clamp(0.0, 100.0) / 100.0)
    }

    /// Response of one whisker to one source, pointing along the source heading.
    pub fn whisker_response(&self, flow: &FlowSource, occ_percent: f64) -> Vec2 {
        if flow.speed_mps() == 0.0 {
            return Vec2::ZERO;
        }
        let magnitude = (flow.speed_mps() / self.reference_speed_mps).powf(self.speed_exponent)
            * self.expected_ratio(occ_percent);
        Vec2::from_heading(flow.heading_deg()) * magnitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Direction jitter std-dev, degrees.
    pub sigma_dir_deg: f64,
    /// Fractional magnitude jitter std-dev.
    pub sigma_mag_frac: f64,
    /// Multiplier on both std-devs for whiskers shadowed from any live source.
    pub occlusion_noise_gain: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_dir_deg: SENSOR_HEADING_RMSE_DEG,
            sigma_mag_frac: 0.05,
            occlusion_noise_gain: 1.5,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            sigma_dir_deg: 0.0,
            sigma_mag_frac: 0.0,
            occlusion_noise_gain: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_dir_deg == 0.0 && self.sigma_mag_frac == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.sigma_dir_deg) || !ok(self.sigma_mag_frac) {
            return Err(Error::Config("noise std-devs must be non-negative".into()));
        }
        if !(self.occlusion_noise_gain >= 1.0) || !self.occlusion_noise_gain.is_finite() {
            return Err(Error::Config(
                "occlusion_noise_gain must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Noise-free response of every whisker, in id order, along with whether
/// the whisker is shadowed from any source that is actually blowing.
pub fn clean_responses(
    layout: &ArrayLayout,
    flows: &[FlowSource],
    response: &ResponseModel,
) -> Vec<(WhiskerId, Vec2, bool)> {
    layout
        .ids()
        .map(|id| {
            let mut sum = Vec2::ZERO;
            let mut shadowed = false;
            for flow in flows {
                let occ = layout
                    .occlusion_for_whisker(flow.heading_deg(), id)
                    .expect("id taken from the layout");
                sum += response.whisker_response(flow, occ);
                shadowed |= flow.speed_mps() > 0.0 && occ > 0.0;
            }
            (id, sum, shadowed)
        })
        .collect()
}

/// Synthesize `n_samples` readings per whisker, emitted in time-major order.
///
/// Each whisker carries a per-trial direction and magnitude offset plus
/// independent per-sample jitter, all with the configured std-devs. The
/// per-trial part survives averaging, which is what makes the averaged
/// heading error of a lone sensor equal `sigma_dir_deg`. Random draws are
/// made in a fixed order independent of the std-devs and of the number of
/// sources, so a shorter run with the same seed is a prefix of a longer one.
pub fn simulate_trial(
    layout: &ArrayLayout,
    flows: &[FlowSource],
    response: &ResponseModel,
    noise: &NoiseModel,
    n_samples: usize,
    rate_hz: f64,
) -> Result<Vec<SensorSample>> {
    if flows.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one flow source is required".into(),
        ));
    }
    if flows.len() > MAX_SOURCES {
        return Err(Error::Unsupported(format!(
            "{} flow sources given; the model covers at most {MAX_SOURCES}",
            flows.len()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::InvalidArgument("rate_hz must be positive".into()));
    }
    response.validate()?;
    noise.validate()?;

    let clean = clean_responses(layout, flows, response);
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    struct Channel {
        id: WhiskerId,
        clean: Vec2,
        sigma_dir: f64,
        sigma_mag: f64,
        bias_dir: f64,
        bias_mag: f64,
    }
    let channels: Vec<Channel> = clean
        .into_iter()
        .map(|(id, v, shadowed)| {
            let gain = if shadowed {
                noise.occlusion_noise_gain
            } else {
                1.0
            };
            Channel {
                id,
                clean: v,
                sigma_dir: noise.sigma_dir_deg * gain,
                sigma_mag: noise.sigma_mag_frac * gain,
                bias_dir: normal(),
                bias_mag: normal(),
            }
        })
        .collect();

    let mut out = Vec::with_capacity(n_samples * channels.len());
    for k in 0..n_samples {
        let t_s = k as f64 / rate_hz;
        for ch in &channels {
            let jd = normal();
            let jm = normal();
            let rot = ch.sigma_dir * (ch.bias_dir + jd);
            let scale = 1.0 + ch.sigma_mag * (ch.bias_mag + jm);
            let v = ch.clean.rotated(rot) * scale;
            out.push(SensorSample {
                t_s,
                whisker_id: ch.id,
                bx: v.x,
                by: v.y,
                bz: 0.0,
            });
        }
    }
    Ok(out)
}
