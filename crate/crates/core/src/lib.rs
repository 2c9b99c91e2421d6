//! Estimate the headings of one or two airflows from an array of
//! magnetically sensed whiskers, using the wake shadow one whisker casts on
//! another.
//!
//! Modules, bottom up:
//! - [`geometry`]: layouts, flow sources and the occlusion model.
//! - [`signal`]: calibration, filtering and per-whisker heading/magnitude.
//! - [`simulate`]: synthetic sensor streams from the response model.
//! - [`estimate`]: Method 1 (flow 1 known), Method 2 (no prior) and RMSE.
//! - [`eval`]: Monte-Carlo evaluation and the shadowing sweep.
//! - [`io`]: CSV and scenario file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod signal;
pub mod simulate;

pub use angle::{angular_distance, circular_mean, normalize_deg, wrap_deg, Vec2};
pub use error::{Error, Result};
pub use estimate::{
    estimate_single_flow, method1, method2, predict_flow1_response, rmse, EstimateReport,
    Flow1Scale, Method1Options, Method2Options, RmseSummary, WhiskerVector,
};
pub use eval::{
    evaluate_grid, reference_grid, summarize, sweep_occlusion, EvalConfig, GridPoint, SummaryRow,
    SweepConfig, SweepResult, SweepRow, TrialRecord,
};
pub use geometry::{ArrayLayout, FlowPair, FlowSource, LayoutPreset, Whisker, WhiskerId};
pub use io::{LayoutSpec, Scenario};
pub use signal::{process_window, AxisGains, Calibration, ProcessedReading, SensorSample};
pub use simulate::{simulate_trial, NoiseModel, ResponseModel};
