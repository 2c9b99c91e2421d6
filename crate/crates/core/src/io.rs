//! Text file formats: sample logs, processed readings, calibration tables,
//! evaluation grids and summaries, and the key-value scenario format.
//!
//! All CSV files carry a fixed header, use `.` as decimal point and `\n`
//! line endings. Angles are in degrees. Floats are written in Rust's
//! shortest round-trip form, so every file re-reads to identical values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Terminator, WriterBuilder};

use crate::angle::Vec2;
use crate::error::{Error, Result};
use crate::estimate::EstimateReport;
use crate::eval::{GridPoint, SummaryRow, SweepRow, TrialRecord};
use crate::geometry::{
    ArrayLayout, FlowSource, LayoutPreset, Whisker, WhiskerId, DEFAULT_DIAMETER_MM,
    DEFAULT_SPACING_MM,
};
use crate::signal::{AxisGains, Calibration, ProcessedReading, SensorSample};
use crate::simulate::{NoiseModel, ResponseModel, DEFAULT_RATE_HZ, MAX_SOURCES};

pub const SAMPLE_HEADER: [&str; 5] = ["t_s", "whisker_id", "bx", "by", "bz"];
pub const PROCESSED_HEADER: [&str; 4] = ["whisker_id", "theta_deg", "b_norm", "b_rel"];
pub const CALIBRATION_HEADER: [&str; 5] = [
    "whisker_id",
    "gain_x_pos",
    "gain_x_neg",
    "gain_y_pos",
    "gain_y_neg",
];
pub const SUMMARY_HEADER: [&str; 6] = [
    "alpha_deg",
    "ratio",
    "m1_phi2_rmse_deg",
    "m2_phi1_rmse_deg",
    "m2_phi2_rmse_deg",
    "n_trials",
];
pub const GRID_HEADER: [&str; 4] = ["phi1_deg", "alpha_deg", "v1_mps", "v2_mps"];
pub const DETAIL_HEADER: [&str; 11] = [
    "phi1_deg",
    "alpha_deg",
    "v1_mps",
    "v2_mps",
    "trial",
    "m1_phi2_deg",
    "m2_phi1_deg",
    "m2_phi2_deg",
    "m1_phi2_err_deg",
    "m2_phi1_err_deg",
    "m2_phi2_err_deg",
];
pub const SWEEP_HEADER: [&str; 3] = ["heading_deg", "occlusion_percent", "ratio"];
pub const REPORT_HEADER: [&str; 6] = [
    "method",
    "phi1_deg",
    "phi2_deg",
    "iterations",
    "low_confidence",
    "single_flow",
];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Read a headed CSV, checking the header and handing each record with its
/// line number to `row`.
fn read_table<R: Read, T>(
    r: R,
    header: &[&str],
    mut row: impl FnMut(&StringRecord, u64) -> Result<T>,
) -> Result<Vec<T>> {
    let mut rdr = ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let got = rdr.headers().map_err(csv_err)?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(row(&rec, line)?);
    }
    Ok(out)
}

fn field<T: FromStr>(rec: &StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} '{raw}'"),
    })
}

fn finite(rec: &StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let v: f64 = field(rec, idx, name, line)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            message: format!("{name} must be finite"),
        })
    }
}

fn optional(rec: &StringRecord, idx: usize, name: &str, line: u64) -> Result<Option<f64>> {
    match rec.get(idx) {
        None | Some("") => Ok(None),
        Some(_) => finite(rec, idx, name, line).map(Some),
    }
}

fn whisker(rec: &StringRecord, idx: usize, line: u64) -> Result<WhiskerId> {
    field(rec, idx, "whisker_id", line).map(WhiskerId)
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sample_log<W: Write>(w: W, samples: &[SensorSample]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(SAMPLE_HEADER).map_err(csv_err)?;
    for s in samples {
        wtr.write_record([
            s.t_s.to_string(),
            s.whisker_id.to_string(),
            s.bx.to_string(),
            s.by.to_string(),
            s.bz.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parse a sample log. Timestamps must not decrease within a whisker.
pub fn read_sample_log<R: Read>(r: R) -> Result<Vec<SensorSample>> {
    let mut last_t: BTreeMap<WhiskerId, f64> = BTreeMap::new();
    read_table(r, &SAMPLE_HEADER, |rec, line| {
        let s = SensorSample {
            t_s: finite(rec, 0, "t_s", line)?,
            whisker_id: whisker(rec, 1, line)?,
            bx: finite(rec, 2, "bx", line)?,
            by: finite(rec, 3, "by", line)?,
            bz: finite(rec, 4, "bz", line)?,
        };
        let prev = last_t.insert(s.whisker_id, s.t_s);
        if prev.is_some_and(|p| s.t_s < p) {
            return Err(Error::Parse {
                line,
                message: format!("t_s goes backwards for whisker {}", s.whisker_id),
            });
        }
        Ok(s)
    })
}

pub fn write_processed<W: Write>(w: W, readings: &[ProcessedReading]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(PROCESSED_HEADER).map_err(csv_err)?;
    for r in readings {
        wtr.write_record([
            r.whisker_id.to_string(),
            opt_str(r.theta_deg),
            r.b_norm.to_string(),
            opt_str(r.b_rel),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_processed<R: Read>(r: R) -> Result<Vec<ProcessedReading>> {
    read_table(r, &PROCESSED_HEADER, |rec, line| {
        let b_norm = finite(rec, 2, "b_norm", line)?;
        if b_norm < 0.0 {
            return Err(Error::Parse {
                line,
                message: "b_norm must be non-negative".into(),
            });
        }
        Ok(ProcessedReading {
            whisker_id: whisker(rec, 0, line)?,
            theta_deg: optional(rec, 1, "theta_deg", line)?,
            b_norm,
            b_rel: optional(rec, 3, "b_rel", line)?,
        })
    })
}

pub fn write_calibration<W: Write>(w: W, cal: &Calibration) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CALIBRATION_HEADER).map_err(csv_err)?;
    for (id, g) in cal.entries() {
        wtr.write_record([
            id.to_string(),
            g.x_pos.to_string(),
            g.x_neg.to_string(),
            g.y_pos.to_string(),
            g.y_neg.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_calibration<R: Read>(r: R) -> Result<Calibration> {
    let rows = read_table(r, &CALIBRATION_HEADER, |rec, line| {
        let id = whisker(rec, 0, line)?;
        let g = AxisGains::new(
            finite(rec, 1, "gain_x_pos", line)?,
            finite(rec, 2, "gain_x_neg", line)?,
            finite(rec, 3, "gain_y_pos", line)?,
            finite(rec, 4, "gain_y_neg", line)?,
        )
        .map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        Ok((id, g))
    })?;
    Ok(Calibration::from_table(rows.into_iter().collect()))
}

pub fn write_grid<W: Write>(w: W, points: &[GridPoint]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(GRID_HEADER).map_err(csv_err)?;
    for p in points {
        wtr.write_record([
            p.phi1_deg.to_string(),
            p.alpha_deg.to_string(),
            p.v1_mps.to_string(),
            p.v2_mps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(r: R) -> Result<Vec<GridPoint>> {
    read_table(r, &GRID_HEADER, |rec, line| {
        let p = GridPoint {
            phi1_deg: finite(rec, 0, "phi1_deg", line)?,
            alpha_deg: finite(rec, 1, "alpha_deg", line)?,
            v1_mps: finite(rec, 2, "v1_mps", line)?,
            v2_mps: finite(rec, 3, "v2_mps", line)?,
        };
        if !(p.v1_mps > 0.0 && p.v2_mps > 0.0) {
            return Err(Error::Parse {
                line,
                message: "grid speeds must be positive".into(),
            });
        }
        Ok(p)
    })
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.alpha_deg.to_string(),
            r.ratio.to_string(),
            r.m1_phi2_rmse_deg.to_string(),
            r.m2_phi1_rmse_deg.to_string(),
            r.m2_phi2_rmse_deg.to_string(),
            r.n_trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    read_table(r, &SUMMARY_HEADER, |rec, line| {
        Ok(SummaryRow {
            alpha_deg: finite(rec, 0, "alpha_deg", line)?,
            ratio: finite(rec, 1, "ratio", line)?,
            m1_phi2_rmse_deg: finite(rec, 2, "m1_phi2_rmse_deg", line)?,
            m2_phi1_rmse_deg: finite(rec, 3, "m2_phi1_rmse_deg", line)?,
            m2_phi2_rmse_deg: finite(rec, 4, "m2_phi2_rmse_deg", line)?,
            n_trials: field(rec, 5, "n_trials", line)?,
        })
    })
}

pub fn write_detail<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(DETAIL_HEADER).map_err(csv_err)?;
    for t in records {
        let p = t.point;
        wtr.write_record([
            p.phi1_deg.to_string(),
            p.alpha_deg.to_string(),
            p.v1_mps.to_string(),
            p.v2_mps.to_string(),
            t.trial.to_string(),
            t.m1_phi2_deg.to_string(),
            t.m2_phi1_deg.to_string(),
            t.m2_phi2_deg.to_string(),
            t.m1_phi2_err_deg().to_string(),
            t.m2_phi1_err_deg().to_string(),
            t.m2_phi2_err_deg().to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_detail<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    read_table(r, &DETAIL_HEADER, |rec, line| {
        Ok(TrialRecord {
            point: GridPoint {
                phi1_deg: finite(rec, 0, "phi1_deg", line)?,
                alpha_deg: finite(rec, 1, "alpha_deg", line)?,
                v1_mps: finite(rec, 2, "v1_mps", line)?,
                v2_mps: finite(rec, 3, "v2_mps", line)?,
            },
            trial: field(rec, 4, "trial", line)?,
            m1_phi2_deg: finite(rec, 5, "m1_phi2_deg", line)?,
            m2_phi1_deg: finite(rec, 6, "m2_phi1_deg", line)?,
            m2_phi2_deg: finite(rec, 7, "m2_phi2_deg", line)?,
        })
    })
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.heading_deg.to_string(),
            r.occlusion_percent.to_string(),
            r.ratio.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    read_table(r, &SWEEP_HEADER, |rec, line| {
        Ok(SweepRow {
            heading_deg: finite(rec, 0, "heading_deg", line)?,
            occlusion_percent: finite(rec, 1, "occlusion_percent", line)?,
            ratio: finite(rec, 2, "ratio", line)?,
        })
    })
}

pub fn write_report<W: Write>(w: W, method: &str, report: &EstimateReport) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(REPORT_HEADER).map_err(csv_err)?;
    wtr.write_record([
        method.to_string(),
        opt_str(report.phi1_hat),
        report.phi2_hat.to_string(),
        report.iterations.to_string(),
        report.low_confidence.to_string(),
        report.single_flow.to_string(),
    ])
    .map_err(csv_err)?;
    wtr.flush()?;
    Ok(())
}

/// Where the whisker positions of a scenario come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutSpec {
    Preset {
        preset: LayoutPreset,
        spacing_mm: f64,
        diameter_mm: f64,
    },
    Custom {
        positions: BTreeMap<u16, Vec2>,
        spacing_mm: f64,
        diameter_mm: f64,
    },
}

impl LayoutSpec {
    pub fn build(&self) -> Result<ArrayLayout> {
        match self {
            LayoutSpec::Preset {
                preset,
                spacing_mm,
                diameter_mm,
            } => preset.build(*spacing_mm, *diameter_mm),
            LayoutSpec::Custom {
                positions,
                spacing_mm,
                diameter_mm,
            } => {
                let whiskers = positions
                    .iter()
                    .map(|(id, p)| Whisker {
                        id: WhiskerId(*id),
                        position: *p,
                    })
                    .collect();
                ArrayLayout::new(whiskers, *diameter_mm, *spacing_mm)
            }
        }
    }
}

/// A simulation scenario.
///
/// Text form is one `key = value` per line; `#` starts a comment. Keys:
///
/// ```text
/// layout = grid2x2            # grid2x2 | pair | single | custom
/// layout.spacing_mm = 35
/// layout.diameter_mm = 15
/// layout.whisker.1 = 35, 0    # custom layouts only, one line per whisker
/// flow1.heading_deg = 0
/// flow1.speed_mps = 6.5
/// flow2.heading_deg = 90      # optional second source
/// flow2.speed_mps = 8.3
/// response.speed_exponent = 2
/// response.reference_speed_mps = 5.5
/// response.attenuation_slope = 0.8
/// noise = default             # default | none, then per-field overrides
/// noise.sigma_dir_deg = 5.22
/// noise.sigma_mag_frac = 0.05
/// noise.occlusion_noise_gain = 1.5
/// n_samples = 50
/// trials = 2
/// rate_hz = 100
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub layout: LayoutSpec,
    pub flows: Vec<FlowSource>,
    pub response: ResponseModel,
    /// Carries the scenario seed.
    pub noise: NoiseModel,
    pub n_samples: usize,
    pub trials: usize,
    pub rate_hz: f64,
}

/// Fewest samples per whisker a scenario may request.
pub const MIN_SAMPLES: usize = 5;
pub const DEFAULT_SAMPLES: usize = 50;
pub const DEFAULT_TRIALS: usize = 2;

fn cfg_err(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {key}: {msg}"))
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| cfg_err(line, key, format!("cannot parse '{raw}'")))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut preset = LayoutPreset::Grid2x2;
        let mut custom = false;
        let mut spacing = DEFAULT_SPACING_MM;
        let mut diameter = DEFAULT_DIAMETER_MM;
        let mut positions = BTreeMap::new();
        let mut flow_fields: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
        let mut response = ResponseModel::default();
        let mut noise = NoiseModel::default();
        let mut n_samples = DEFAULT_SAMPLES;
        let mut trials = DEFAULT_TRIALS;
        let mut rate_hz = DEFAULT_RATE_HZ;
        let mut seen = std::collections::HashSet::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value'")))?;
            if !seen.insert(key.to_string()) {
                return Err(cfg_err(line, key, "duplicate key"));
            }
            let num = |v: &str| parse_value::<f64>(line, key, v);

            match key {
                "layout" => match value {
                    "custom" => custom = true,
                    other => preset = other.parse().map_err(|e: Error| cfg_err(line, key, e))?,
                },
                "layout.spacing_mm" => spacing = num(value)?,
                "layout.diameter_mm" => diameter = num(value)?,
                "response.speed_exponent" => response.speed_exponent = num(value)?,
                "response.reference_speed_mps" => response.reference_speed_mps = num(value)?,
                "response.attenuation_slope" => response.attenuation_slope = num(value)?,
                "noise" => {
                    let seed = noise.seed;
                    noise = match value {
                        "default" => NoiseModel::default(),
                        "none" => NoiseModel::none(),
                        other => {
                            return Err(cfg_err(
                                line,
                                key,
                                format!("expected default or none, got '{other}'"),
                            ))
                        }
                    }
                    .with_seed(seed);
                }
                "noise.sigma_dir_deg" => noise.sigma_dir_deg = num(value)?,
                "noise.sigma_mag_frac" => noise.sigma_mag_frac = num(value)?,
                "noise.occlusion_noise_gain" => noise.occlusion_noise_gain = num(value)?,
                "n_samples" => n_samples = parse_value(line, key, value)?,
                "trials" => trials = parse_value(line, key, value)?,
                "rate_hz" => rate_hz = num(value)?,
                "seed" => noise.seed = parse_value(line, key, value)?,
                _ => {
                    if let Some(id) = key.strip_prefix("layout.whisker.") {
                        let id: u16 = parse_value(line, key, id)?;
                        let (x, y) = value
                            .split_once(',')
                            .ok_or_else(|| cfg_err(line, key, "expected 'x, y'"))?;
                        positions.insert(id, Vec2::new(num(x.trim())?, num(y.trim())?));
                    } else if let Some((idx, field)) = key
                        .strip_prefix("flow")
                        .and_then(|rest| rest.split_once('.'))
                    {
                        let n: usize = parse_value(line, key, idx)?;
                        if n == 0 {
                            return Err(cfg_err(line, key, "flows are numbered from 1"));
                        }
                        if n > MAX_SOURCES {
                            return Err(Error::Unsupported(format!(
                                "line {line}: {key}: at most {MAX_SOURCES} flow sources are supported"
                            )));
                        }
                        let entry = flow_fields.entry(n).or_default();
                        match field {
                            "heading_deg" => entry.0 = Some(num(value)?),
                            "speed_mps" => entry.1 = Some(num(value)?),
                            _ => return Err(cfg_err(line, key, "unknown flow field")),
                        }
                    } else {
                        return Err(cfg_err(line, key, "unknown key"));
                    }
                }
            }
        }

        if custom && positions.is_empty() {
            return Err(Error::Config(
                "layout = custom needs layout.whisker.<id> entries".into(),
            ));
        }
        if !custom && !positions.is_empty() {
            return Err(Error::Config(
                "layout.whisker.<id> is only valid with layout = custom".into(),
            ));
        }
        let layout = if custom {
            LayoutSpec::Custom {
                positions,
                spacing_mm: spacing,
                diameter_mm: diameter,
            }
        } else {
            LayoutSpec::Preset {
                preset,
                spacing_mm: spacing,
                diameter_mm: diameter,
            }
        };

        let mut flows = Vec::new();
        for (i, n) in flow_fields.keys().enumerate() {
            if *n != i + 1 {
                return Err(Error::Config(format!(
                    "flow{} given without flow{}",
                    n,
                    i + 1
                )));
            }
        }
        for (n, (heading, speed)) in flow_fields {
            let heading =
                heading.ok_or_else(|| Error::Config(format!("flow{n}.heading_deg missing")))?;
            let speed = speed.ok_or_else(|| Error::Config(format!("flow{n}.speed_mps missing")))?;
            flows.push(
                FlowSource::new(heading, speed)
                    .map_err(|e| Error::Config(format!("flow{n}: {e}")))?,
            );
        }
        if flows.is_empty() {
            return Err(Error::Config(
                "at least flow1.heading_deg and flow1.speed_mps are required".into(),
            ));
        }

        let scenario = Self {
            layout,
            flows,
            response,
            noise,
            n_samples,
            trials,
            rate_hz,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.build()?;
        self.response.validate()?;
        self.noise.validate()?;
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "n_samples: need at least {MIN_SAMPLES}, got {}",
                self.n_samples
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(Error::Config("rate_hz: must be positive".into()));
        }
        Ok(())
    }
}
