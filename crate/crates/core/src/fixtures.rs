//! Bundled example scenario.

use crate::formats::parse_scenario;
use crate::matops::Mat;
use crate::plant::Scenario;

/// Five agents (two leaders), oscillating two-state exosystem.
pub const EXAMPLE_SCENARIO_JSON: &str = include_str!("../fixtures/example_scenario.json");

pub fn example_scenario() -> Scenario {
    parse_scenario(EXAMPLE_SCENARIO_JSON).expect("bundled scenario is valid")
}

fn m(r: usize, c: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(r, c, v)
}

/// Four-decimal reference `(Pi_i, Gamma_i)` for the example agents.
pub fn reference_regulators() -> Vec<(Mat, Mat)> {
    vec![
        (
            m(3, 2, &[9.4737, -0.7312, -0.8750, 3.8708, 0.0693, -3.3919]),
            m(3, 2, &[5.5430, -0.1230, 4.3996, -3.3488, -10.1109, 1.6856]),
        ),
        (
            m(2, 2, &[0.3327, 3.4521, -1.0572, 1.1880]),
            m(1, 2, &[0.7972, -3.3640]),
        ),
        (
            m(2, 2, &[0.0399, 0.2869, 0.4135, -1.0947]),
            m(1, 2, &[-0.2422, 0.3013]),
        ),
        (
            m(3, 2, &[-0.7908, 0.3916, 0.6203, 1.4994, -2.8368, -1.0040]),
            m(1, 2, &[2.3536, 0.2073]),
        ),
        (
            m(3, 2, &[0.2158, 0.0351, -0.4961, 0.1923, 0.1232, -0.1110]),
            m(3, 2, &[0.0329, 0.0156, -0.0861, 0.1020, -0.0710, -0.0326]),
        ),
    ]
}

/// Four-decimal reference Luenberger gain for the example exosystem.
pub fn reference_observer_l() -> Mat {
    m(2, 1, &[-0.5719, -0.4692])
}

/// Four-decimal reference coupling gain as listed with the example. With the
/// `S - lambda H R` convention only its negation gives Schur matrices.
pub fn reference_observer_h() -> Mat {
    m(2, 1, &[0.1987, -0.9801])
}
