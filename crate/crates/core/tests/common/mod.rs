//! Shipped models and data for the integration suites.

#![allow(dead_code)]

use std::path::PathBuf;

use itrp::model::{load_model, parse_data, Model, ParameterSpace, PositiveControlTransform};
use itrp::{IntegratorConfig, Problem};

/// Seed the shipped datasets were simulated with.
pub const DATA_SEED: u64 = 195;
pub const TRUE_NATURAL: [f64; 3] = [0.1, 0.1, 1.0];
pub const NOISE_SD: f64 = 0.1;

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn times() -> Vec<f64> {
    (0..=10).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shipped {
    Abc,
    AbcRel,
    /// ABC with k1 replaced by the product k1a·k1b.
    AbcControl,
}

impl Shipped {
    pub const ALL: [Shipped; 3] = [Shipped::Abc, Shipped::AbcRel, Shipped::AbcControl];

    pub fn label(self) -> &'static str {
        match self {
            Shipped::Abc => "ABC",
            Shipped::AbcRel => "ABC_rel",
            Shipped::AbcControl => "ABC positive control",
        }
    }

    pub fn model(self) -> (Model, ParameterSpace) {
        let file = match self {
            Shipped::Abc | Shipped::AbcControl => "abc.toml",
            Shipped::AbcRel => "abc_rel.toml",
        };
        let (m, s) = load_model(models_dir().join(file)).expect("shipped model loads");
        match self {
            Shipped::AbcControl => m.with_positive_control(&s, &PositiveControlTransform::new("k1")).expect("transform"),
            _ => (m, s),
        }
    }

    pub fn data_file(self) -> PathBuf {
        match self {
            Shipped::AbcRel => models_dir().join("abc_rel.csv"),
            _ => models_dir().join("abc.csv"),
        }
    }

    pub fn problem(self) -> Problem {
        self.problem_with(IntegratorConfig::default())
    }

    pub fn problem_with(self, integrator: IntegratorConfig) -> Problem {
        let (m, s) = self.model();
        let text = std::fs::read_to_string(self.data_file()).expect("shipped data");
        let data = parse_data(&text, &m).expect("shipped data parses");
        Problem::new(m, s, data, integrator).expect("valid problem")
    }
}

pub fn tight() -> IntegratorConfig {
    IntegratorConfig { atol: 1e-12, rtol: 1e-12, ..IntegratorConfig::default() }
}

/// Largest absolute difference relative to the larger magnitude, with
/// `floor` keeping exact zeros comparable.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
