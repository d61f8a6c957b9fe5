//! Machine-readable results. Serialization is deterministic: the same
//! scenario, seed and tool version always give the same bytes.

use jamlab_core::correlations::{ChshEstimate, CountTable, Estimate, UnaryVerdict};
use jamlab_core::loops::SearchReport;
use jamlab_core::minkowski::{CausalRelation, Event};
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Consistent,
    ForbiddenConfiguration,
    SignalingDetected,
    ClosedLoopFound,
}

impl Outcome {
    /// 0 consistent, 2 forbidden configuration or closed loop, 3 signaling.
    /// Usage and parse errors exit with 1 before a report exists.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Consistent => 0,
            Outcome::ForbiddenConfiguration | Outcome::ClosedLoopFound => 2,
            Outcome::SignalingDetected => 3,
        }
    }
}

pub const USAGE_EXIT_CODE: i32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relations {
    pub a_to_b: CausalRelation,
    pub j_to_a: CausalRelation,
    pub j_to_b: CausalRelation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_precedes_measurements: Option<bool>,
}

/// Binary condition from the closed form, cross-checked by the grid oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryVerdict {
    pub holds: bool,
    /// Infimum of `f_j` over the cone overlap; the condition holds iff it is
    /// at least `-tolerance`.
    pub margin: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Event>,
    pub oracle_holds: bool,
    pub oracle_margin: f64,
    pub oracle_step: f64,
    pub oracle_agrees: bool,
    pub relations: Relations,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_condition: Option<GeometryVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unary: Option<UnaryVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lorentz_invariant: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_loops: Option<usize>,
}

/// Tallies of one run with the derived estimates and their exact
/// expectations under the configured models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub counts: CountTable,
    pub correlation: Estimate,
    pub alice_plus: Estimate,
    pub bob_plus: Estimate,
    pub jammed_fraction: Estimate,
    pub expected_correlation: f64,
    pub expected_bob_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshStatistics {
    pub n_per_pair: u64,
    pub estimate: ChshEstimate,
    pub expected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jam_off: Option<RunStatistics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jam_on: Option<RunStatistics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chsh: Option<ChshStatistics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub a: Event,
    pub b: Event,
    pub j: Event,
    /// Event labels from earliest to latest; simultaneous events share a group.
    pub time_order: Vec<Vec<String>>,
    pub binary_condition: GeometryVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSection {
    pub velocity: Vec<f64>,
    pub gamma: f64,
    pub rest: FrameView,
    pub boosted: FrameView,
}

/// Settings that shaped the run, including defaults the user did not set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configurations_per_cell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_runs_per_cell: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    pub settings: Settings,
}

impl Provenance {
    pub fn new(seed: u64, scenario: Option<&ScenarioSpec>, settings: Settings) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            scenario_hash: scenario.map(ScenarioSpec::hash),
            scenario: scenario.cloned(),
            settings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub verdicts: Verdicts,
    pub statistics: Statistics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boost: Option<BoostSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_search: Option<SearchReport>,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// One human-readable line for the terminal.
    pub fn summary(&self) -> String {
        let mut parts = vec![format!("{}: {:?}", self.command, self.outcome)];
        if let Some(g) = &self.verdicts.binary_condition {
            parts.push(format!(
                "binary condition {} (margin {})",
                if g.holds { "holds" } else { "fails" },
                g.margin
            ));
        }
        if let Some(u) = &self.verdicts.unary {
            parts.push(format!(
                "z alice {:.2}, bob {:.2}",
                u.alice.z_statistic, u.bob.z_statistic
            ));
        }
        if let Some(c) = &self.statistics.chsh {
            parts.push(format!(
                "S = {:.4} ± {:.4}",
                c.estimate.value, c.estimate.std_error
            ));
        }
        if let Some(s) = &self.loop_search {
            parts.push(format!(
                "{} configurations, {} closed loops",
                s.configurations_checked,
                s.closed_loops.len()
            ));
        }
        parts.join("; ")
    }
}
