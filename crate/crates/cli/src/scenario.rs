//! Scenario documents: one experiment's events, models, settings and seed.

use jamlab_core::correlations::{
    CorrelationModel, JamPolicy, JammingSetup, DEFAULT_SIGNAL_THRESHOLD,
};
use jamlab_core::minkowski::{Event, MAX_SPATIAL_DIMENSION};
use jamlab_core::quantum::ChshAngles;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("empty scenario document")]
    Empty,
    #[error("{path}: {message} (line {line}, column {column})")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown canned scenario `{0}`; known: {known}", known = CANNED.join(", "))]
    UnknownCanned(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvents {
    pub a: Event,
    pub b: Event,
    pub j: Event,
    /// Where the entangled pairs are emitted; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglePair {
    pub alpha: f64,
    pub beta: f64,
}

fn default_model() -> CorrelationModel {
    CorrelationModel::Quantum
}

fn default_jam_model() -> CorrelationModel {
    CorrelationModel::Decorrelate(1.0)
}

fn default_policy() -> JamPolicy {
    JamPolicy::Never
}

fn default_angles() -> AnglePair {
    AnglePair {
        alpha: 0.0,
        beta: 0.0,
    }
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_threshold() -> f64 {
    DEFAULT_SIGNAL_THRESHOLD
}

/// A complete experiment description. Every optional field is written back
/// out with its resolved value, so a serialized spec documents all defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    pub events: ScenarioEvents,
    #[serde(default = "default_model")]
    pub model: CorrelationModel,
    #[serde(default = "default_jam_model")]
    pub jam_model: CorrelationModel,
    #[serde(default = "default_policy")]
    pub policy: JamPolicy,
    #[serde(default = "default_angles")]
    pub angles: AnglePair,
    #[serde(default = "ChshAngles::canonical")]
    pub chsh_angles: ChshAngles,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl ScenarioSpec {
    pub fn setup(&self) -> JammingSetup {
        JammingSetup::new(self.model, self.jam_model, self.policy)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.dimension == 0 || self.dimension > MAX_SPATIAL_DIMENSION {
            return Err(invalid(
                "dimension",
                format!("must be between 1 and {MAX_SPATIAL_DIMENSION}"),
            ));
        }
        let ev = &self.events;
        let named = [
            ("a", Some(&ev.a)),
            ("b", Some(&ev.b)),
            ("j", Some(&ev.j)),
            ("source", ev.source.as_ref()),
        ];
        for (label, event) in named {
            if let Some(e) = event {
                if e.dimension() != self.dimension {
                    return Err(invalid(
                        format!("events.{label}"),
                        format!(
                            "has {} spatial coordinates, scenario dimension is {}",
                            e.dimension(),
                            self.dimension
                        ),
                    ));
                }
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let angles = [
            ("angles.alpha", self.angles.alpha),
            ("angles.beta", self.angles.beta),
            ("chsh_angles.alice[0]", self.chsh_angles.alice[0]),
            ("chsh_angles.alice[1]", self.chsh_angles.alice[1]),
            ("chsh_angles.bob[0]", self.chsh_angles.bob[0]),
            ("chsh_angles.bob[1]", self.chsh_angles.bob[1]),
        ];
        for (field, value) in angles {
            if !value.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(invalid("threshold", "must be a non-negative number"));
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    if text.trim().is_empty() {
        return Err(ScenarioError::Empty);
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| ScenarioError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn to_json(spec: &ScenarioSpec) -> String {
    serde_json::to_string_pretty(spec).expect("scenario serializes")
}

/// Names accepted by [`canned`]. Each Minkowski-diagram panel shares its
/// geometry with the matching layout panel.
pub const CANNED: [&str; 3] = ["fig1a", "fig1d-selective", "fig1e"];

/// Built-in scenarios for the three geometries of the jamming figure.
pub fn canned(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let base = |name: &str, a: Event, b: Event, j: Event, source: Event| ScenarioSpec {
        name: name.into(),
        dimension: 1,
        events: ScenarioEvents {
            a,
            b,
            j,
            source: Some(source),
        },
        model: CorrelationModel::Quantum,
        jam_model: CorrelationModel::Decorrelate(1.0),
        policy: JamPolicy::Always,
        angles: default_angles(),
        chsh_angles: ChshAngles::canonical(),
        trials: DEFAULT_TRIALS,
        seed: 0,
        threshold: DEFAULT_SIGNAL_THRESHOLD,
    };
    let spec = match name {
        // Alice and Bob close together, the jammer far away.
        "fig1a" | "fig1b" => base(
            "fig1a",
            Event::line(0.0, -1.0),
            Event::line(0.0, 1.0),
            Event::line(0.0, 10.0),
            Event::line(-1.0, 0.0),
        ),
        // Alice next to the jammer, Bob far; the jammer reacts to Alice.
        "fig1c" | "fig1d" | "fig1d-selective" => ScenarioSpec {
            policy: JamPolicy::SelectiveOnAlicePlus,
            ..base(
                "fig1d-selective",
                Event::line(0.0, -1.0),
                Event::line(0.0, 10.0),
                Event::line(0.5, -1.0),
                Event::line(-6.0, 4.5),
            )
        },
        // Jammer beside the source, Alice and Bob at opposite ends.
        "fig1e" | "fig1f" => base(
            "fig1e",
            Event::line(0.0, -1.0),
            Event::line(0.0, 1.0),
            Event::line(-1.0, 0.0),
            Event::line(-2.0, 0.0),
        ),
        other => return Err(ScenarioError::UnknownCanned(other.into())),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dimension": 1,
        "events": {"a": {"t": 0, "x": [-1]}, "b": {"t": 0, "x": [1]}, "j": {"t": -1, "x": [0]}}
    }"#;

    #[test]
    fn defaults_are_applied_and_written_back() {
        let spec = parse_scenario(MINIMAL).unwrap();
        assert_eq!(spec.trials, DEFAULT_TRIALS);
        assert_eq!(spec.threshold, 5.0);
        assert_eq!(spec.policy, JamPolicy::Never);
        assert_eq!(spec.chsh_angles, ChshAngles::canonical());
        let text = to_json(&spec);
        assert!(text.contains("\"trials\": 10000"));
        assert_eq!(parse_scenario(&text).unwrap(), spec);
    }

    #[test]
    fn empty_document_is_rejected() {
        assert_eq!(parse_scenario(""), Err(ScenarioError::Empty));
        assert_eq!(parse_scenario("  \n"), Err(ScenarioError::Empty));
    }

    #[test]
    fn errors_name_the_field() {
        let unknown = MINIMAL.replace("\"dimension\": 1", "\"dimension\": 1, \"colour\": 3");
        match parse_scenario(&unknown) {
            Err(ScenarioError::Parse { message, line, .. }) => {
                assert!(message.contains("colour"));
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        let bad_eta = MINIMAL.replace(
            "\"dimension\": 1",
            "\"dimension\": 1, \"jam_model\": {\"kind\": \"decorrelate\", \"eta\": 2}",
        );
        match parse_scenario(&bad_eta) {
            Err(ScenarioError::Parse { path, .. }) => assert_eq!(path, "jam_model"),
            other => panic!("{other:?}"),
        }
        let bad_event = MINIMAL.replace("\"x\": [1]", "\"x\": [1, 2]");
        assert_eq!(
            parse_scenario(&bad_event),
            Err(invalid(
                "events.b",
                "has 2 spatial coordinates, scenario dimension is 1"
            ))
        );
        let zero = MINIMAL.replace("\"dimension\": 1", "\"dimension\": 1, \"trials\": 0");
        assert!(matches!(
            parse_scenario(&zero),
            Err(ScenarioError::Invalid { field, .. }) if field == "trials"
        ));
        let trailing = format!("{MINIMAL} 1");
        assert!(matches!(
            parse_scenario(&trailing),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn canned_scenarios() {
        let e = canned("fig1e").unwrap();
        assert_eq!(e.events.a, Event::line(0.0, -1.0));
        assert_eq!(e.events.b, Event::line(0.0, 1.0));
        assert_eq!(e.events.j, Event::line(-1.0, 0.0));
        assert_eq!(canned("fig1f").unwrap(), e);
        assert_eq!(canned("fig1d").unwrap().name, "fig1d-selective");
        assert!(matches!(
            canned("fig2"),
            Err(ScenarioError::UnknownCanned(_))
        ));
        for name in CANNED {
            let spec = canned(name).unwrap();
            assert_eq!(parse_scenario(&to_json(&spec)).unwrap(), spec);
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = canned("fig1a").unwrap();
        assert_eq!(a.hash(), canned("fig1a").unwrap().hash());
        let b = ScenarioSpec {
            seed: 1,
            ..a.clone()
        };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
