use humpty_core::params::ExperimentConfig;
use humpty_core::phase::{NaiveEstimate, TermDiffs};
use serde::Serialize;
use std::collections::BTreeMap;

/// Identifier of the binary that produced a summary.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub constants: String,
    pub build: &'static str,
    pub config: ExperimentConfig,
    pub delta_phi_rad: Option<f64>,
    pub naive: Option<NaiveEstimate>,
    /// Per-term `(+) − (−)` differences at `T₅`.
    pub terms: Option<TermDiffs>,
    pub wall_time_s: f64,
    /// Flat name → value table that expectation files refer to.
    pub quantities: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn new(scenario: &str, config: &ExperimentConfig) -> Self {
        RunSummary {
            scenario: scenario.to_string(),
            constants: config.constants.name.clone(),
            build: BUILD_ID,
            config: config.clone(),
            delta_phi_rad: None,
            naive: None,
            terms: None,
            wall_time_s: 0.0,
            quantities: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn put(&mut self, name: impl Into<String>, value: f64) {
        self.quantities.insert(name.into(), value);
    }

    pub fn put_terms(&mut self, prefix: &str, t: &TermDiffs) {
        for (name, v) in [
            ("i1_diff", t.i1),
            ("i2_diff", t.i2),
            ("const_self_diff", t.const_self),
            ("newton_diff", t.newton_cross),
            ("classical_diff", t.classical),
            ("boundary_diff", t.boundary_zp + t.boundary_width),
        ] {
            self.put(format!("{prefix}{name}"), v);
        }
    }
}
