//! Shared fixtures for the criterion benchmarks.

use flowshadow::eval::simulate_readings;
use flowshadow::{
    ArrayLayout, FlowSource, NoiseModel, ProcessedReading, ResponseModel, SensorSample,
};

pub const SEED: u64 = 42;

pub fn grid() -> ArrayLayout {
    ArrayLayout::grid2x2(35.0, 15.0).expect("valid layout")
}

/// Flow 1 from 15 deg at 6.5 m/s, flow 2 from 105 deg at 7.3 m/s.
pub fn flows() -> [FlowSource; 2] {
    [
        FlowSource::new(15.0, 6.5).expect("valid flow"),
        FlowSource::new(105.0, 7.3).expect("valid flow"),
    ]
}

pub fn samples(n_samples: usize) -> Vec<SensorSample> {
    flowshadow::simulate_trial(
        &grid(),
        &flows(),
        &ResponseModel::default(),
        &NoiseModel::default().with_seed(SEED),
        n_samples,
        100.0,
    )
    .expect("simulation succeeds")
}

pub fn readings() -> Vec<ProcessedReading> {
    simulate_readings(
        &grid(),
        &flows(),
        &ResponseModel::default(),
        &NoiseModel::default().with_seed(SEED),
        50,
        100.0,
        5,
    )
    .expect("processing succeeds")
}
