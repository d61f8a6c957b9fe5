//! Command dispatch: each command turns a scenario into a [`Report`].

use jamlab_core::correlations::{
    chsh_estimate, derive_seed, model_correlation, sample_trials, tally, unary_check,
    CorrelationError, Estimate, JamPolicy, JammingSetup,
};
use jamlab_core::loops::{search_loops, LoopsError, SearchOptions, MAX_TESTED_DEPTH};
use jamlab_core::minkowski::{
    binary_condition, binary_condition_oracle, causal_relation, Boost, ConeContainmentVerdict,
    Event, GeometryError, SearchBox, SLACK_TOLERANCE,
};
use thiserror::Error;

use crate::report::{
    BoostSection, ChshStatistics, FrameView, GeometryVerdict, Outcome, Provenance, Relations,
    Report, RunStatistics, Settings, Statistics, Verdicts,
};
use crate::scenario::ScenarioSpec;

/// Grid spacing of the oracle cross-check.
pub const ORACLE_STEP: f64 = 0.25;

/// Margins closer than this to zero are too close to call, so a verdict
/// mismatch there does not count as an oracle disagreement.
pub const ORACLE_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Geometry,
    Simulate,
    Signal,
    Chsh,
    Boost { velocity: Vec<f64> },
    LoopSearch(LoopSearchParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Simulate => "simulate",
            Command::Signal => "signal",
            Command::Chsh => "chsh",
            Command::Boost { .. } => "boost",
            Command::LoopSearch(_) => "loop-search",
        }
    }

    pub fn needs_scenario(&self) -> bool {
        !matches!(self, Command::LoopSearch(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSearchParams {
    pub seed: u64,
    pub max_depth: usize,
    pub dimensions: Vec<usize>,
    pub configurations_per_cell: usize,
    pub adversarial_runs_per_cell: usize,
}

impl Default for LoopSearchParams {
    fn default() -> Self {
        let options = SearchOptions::default();
        LoopSearchParams {
            seed: options.seed,
            max_depth: MAX_TESTED_DEPTH,
            dimensions: options.dimensions,
            configurations_per_cell: options.configurations_per_cell,
            adversarial_runs_per_cell: options.adversarial_runs_per_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("command `{0}` needs a scenario (--scenario or --canned)")]
    MissingScenario(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Loops(#[from] LoopsError),
}

pub fn run(command: &Command, spec: Option<&ScenarioSpec>) -> Result<Report, RunError> {
    if let Command::LoopSearch(params) = command {
        return Ok(loop_search(params)?);
    }
    let spec = spec.ok_or(RunError::MissingScenario(command.name()))?;
    match command {
        Command::Geometry => geometry(spec),
        Command::Simulate => simulate(spec, false),
        Command::Signal => simulate(spec, true),
        Command::Chsh => chsh(spec),
        Command::Boost { velocity } => boost(spec, velocity),
        Command::LoopSearch(_) => unreachable!("handled above"),
    }
}

fn finish(
    command: &Command,
    outcome: Outcome,
    verdicts: Verdicts,
    statistics: Statistics,
    spec: &ScenarioSpec,
    settings: Settings,
) -> Report {
    Report {
        command: command.name().into(),
        outcome,
        exit_code: outcome.exit_code(),
        verdicts,
        statistics,
        boost: None,
        loop_search: None,
        provenance: Provenance::new(spec.seed, Some(spec), settings),
    }
}

/// The oracle's refined margin matches the closed form to 1e-9 in one
/// spatial dimension and 1e-6 in two; in three it is only an upper bound.
/// Verdicts may differ only when the margin is too close to zero to call.
fn oracle_agrees(
    dimension: usize,
    fast: &ConeContainmentVerdict,
    slow: &ConeContainmentVerdict,
) -> bool {
    let diff = if fast.margin == slow.margin {
        0.0
    } else {
        slow.margin - fast.margin
    };
    let margins = match dimension {
        1 => diff.abs() <= 1e-9,
        2 => diff.abs() <= ORACLE_AGREEMENT,
        _ => diff >= -SLACK_TOLERANCE,
    };
    margins && (fast.holds == slow.holds || fast.margin.abs() <= ORACLE_AGREEMENT)
}

pub fn geometry_verdict(
    a: &Event,
    b: &Event,
    j: &Event,
    source: Option<&Event>,
) -> Result<GeometryVerdict, GeometryError> {
    let fast = binary_condition(a, b, j)?;
    let bx = SearchBox::covering(&[a, b, j], 1.0)?;
    let slow = binary_condition_oracle(a, b, j, &bx, ORACLE_STEP)?;
    let oracle_agrees = oracle_agrees(a.dimension(), &fast, &slow);
    let source_precedes_measurements = match source {
        Some(s) => Some(
            causal_relation(s, a)?.is_causal_future() && causal_relation(s, b)?.is_causal_future(),
        ),
        None => None,
    };
    Ok(GeometryVerdict {
        holds: fast.holds,
        margin: fast.margin,
        tolerance: SLACK_TOLERANCE,
        witness: fast.witness,
        oracle_holds: slow.holds,
        oracle_margin: slow.margin,
        oracle_step: ORACLE_STEP,
        oracle_agrees,
        relations: Relations {
            a_to_b: causal_relation(a, b)?,
            j_to_a: causal_relation(j, a)?,
            j_to_b: causal_relation(j, b)?,
            source_precedes_measurements,
        },
    })
}

fn spec_geometry(spec: &ScenarioSpec) -> Result<GeometryVerdict, GeometryError> {
    let ev = &spec.events;
    geometry_verdict(&ev.a, &ev.b, &ev.j, ev.source.as_ref())
}

fn geometry(spec: &ScenarioSpec) -> Result<Report, RunError> {
    let verdict = spec_geometry(spec)?;
    let outcome = if verdict.holds {
        Outcome::Consistent
    } else {
        Outcome::ForbiddenConfiguration
    };
    Ok(finish(
        &Command::Geometry,
        outcome,
        Verdicts {
            binary_condition: Some(verdict),
            ..Verdicts::default()
        },
        Statistics::default(),
        spec,
        Settings::default(),
    ))
}

/// Exact E and Bob's `+` probability for a setup: Alice's outcome is uniform
/// and decides which model's conditional applies.
fn expectations(
    setup: &JammingSetup,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64), CorrelationError> {
    let plain = model_correlation(setup.model, alpha, beta)?;
    let jammed = model_correlation(setup.jam_model, alpha, beta)?;
    // E under Alice = +, and under Alice = −.
    let (e_plus, e_minus) = match setup.policy {
        JamPolicy::Never => (plain, plain),
        JamPolicy::Always => (jammed, jammed),
        JamPolicy::SelectiveOnAlicePlus => (jammed, plain),
    };
    // P(Bob +) = ½·(1 + E₊)/2 + ½·(1 − E₋)/2.
    let bob_plus = 0.25 * (1.0 + e_plus) + 0.25 * (1.0 - e_minus);
    Ok((0.5 * (e_plus + e_minus), bob_plus))
}

fn run_statistics(
    setup: &JammingSetup,
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<RunStatistics, CorrelationError> {
    let (alpha, beta) = (spec.angles.alpha, spec.angles.beta);
    let trials = sample_trials(setup, alpha, beta, spec.trials, seed)?;
    let counts = tally(&trials);
    let n = counts.total();
    let jammed = trials.iter().filter(|t| t.jammed).count() as f64 / n as f64;
    let (expected_correlation, expected_bob_plus) = expectations(setup, alpha, beta)?;
    let nonempty = "at least one trial";
    Ok(RunStatistics {
        counts,
        correlation: counts.correlation().expect(nonempty),
        alice_plus: counts.alice_plus_frequency().expect(nonempty),
        bob_plus: counts.bob_plus_frequency().expect(nonempty),
        jammed_fraction: Estimate {
            value: jammed,
            std_error: (jammed * (1.0 - jammed) / n as f64).sqrt(),
            n,
        },
        expected_correlation,
        expected_bob_plus,
    })
}

/// Jam-off run (primary model, no jammer) against the configured jam-on run.
/// `signal` also reports the geometry, since a detected signal means the
/// configuration must be forbidden.
fn simulate(spec: &ScenarioSpec, with_geometry: bool) -> Result<Report, RunError> {
    let off_setup = JammingSetup::unjammed(spec.model);
    let off = run_statistics(&off_setup, spec, derive_seed(spec.seed, 0))?;
    let on = run_statistics(&spec.setup(), spec, derive_seed(spec.seed, 1))?;
    let unary = unary_check(&off.counts, &on.counts, spec.threshold)?;
    let geometry = if with_geometry {
        Some(spec_geometry(spec)?)
    } else {
        None
    };
    let outcome = if unary.signaling() {
        Outcome::SignalingDetected
    } else if geometry.as_ref().is_some_and(|g| !g.holds) {
        Outcome::ForbiddenConfiguration
    } else {
        Outcome::Consistent
    };
    let command = if with_geometry {
        Command::Signal
    } else {
        Command::Simulate
    };
    Ok(finish(
        &command,
        outcome,
        Verdicts {
            binary_condition: geometry,
            unary: Some(unary),
            ..Verdicts::default()
        },
        Statistics {
            jam_off: Some(off),
            jam_on: Some(on),
            chsh: None,
        },
        spec,
        Settings {
            trials: Some(spec.trials),
            threshold: Some(spec.threshold),
            ..Settings::default()
        },
    ))
}

fn chsh(spec: &ScenarioSpec) -> Result<Report, RunError> {
    let setup = spec.setup();
    let estimate = chsh_estimate(&setup, &spec.chsh_angles, spec.trials, spec.seed)?;
    let mut expected = [0.0; 4];
    for (k, (alpha, beta)) in spec.chsh_angles.pairs().into_iter().enumerate() {
        expected[k] = expectations(&setup, alpha, beta)?.0;
    }
    Ok(finish(
        &Command::Chsh,
        Outcome::Consistent,
        Verdicts::default(),
        Statistics {
            chsh: Some(ChshStatistics {
                n_per_pair: spec.trials,
                estimate,
                expected: expected[0] + expected[1] + expected[2] - expected[3],
            }),
            ..Statistics::default()
        },
        spec,
        Settings {
            trials: Some(spec.trials),
            ..Settings::default()
        },
    ))
}

/// Labels grouped by coordinate time, earliest first.
pub fn time_order(events: &[(&str, &Event)]) -> Vec<Vec<String>> {
    let mut sorted: Vec<(&str, f64)> = events.iter().map(|(l, e)| (*l, e.t())).collect();
    sorted.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(q.0)));
    let mut groups: Vec<(f64, Vec<String>)> = Vec::new();
    for (label, t) in sorted {
        match groups.last_mut() {
            Some((t0, group)) if (t - *t0).abs() <= SLACK_TOLERANCE => group.push(label.into()),
            _ => groups.push((t, vec![label.into()])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn frame_view(
    a: Event,
    b: Event,
    j: Event,
    source: Option<&Event>,
) -> Result<FrameView, GeometryError> {
    let binary_condition = geometry_verdict(&a, &b, &j, source)?;
    Ok(FrameView {
        time_order: time_order(&[("a", &a), ("b", &b), ("j", &j)]),
        a,
        b,
        j,
        binary_condition,
    })
}

fn same_relations(p: &Relations, q: &Relations) -> bool {
    let pairs = [
        (p.a_to_b, q.a_to_b),
        (p.j_to_a, q.j_to_a),
        (p.j_to_b, q.j_to_b),
    ];
    pairs.iter().all(|(x, y)| x == y)
        && p.source_precedes_measurements == q.source_precedes_measurements
}

fn boost(spec: &ScenarioSpec, velocity: &[f64]) -> Result<Report, RunError> {
    let b = Boost::new(velocity.to_vec())?;
    let ev = &spec.events;
    let rest = frame_view(ev.a.clone(), ev.b.clone(), ev.j.clone(), ev.source.as_ref())?;
    let source = ev.source.as_ref().map(|s| b.apply(s)).transpose()?;
    let moved = frame_view(
        b.apply(&ev.a)?,
        b.apply(&ev.b)?,
        b.apply(&ev.j)?,
        source.as_ref(),
    )?;
    let invariant = rest.binary_condition.holds == moved.binary_condition.holds
        && same_relations(
            &rest.binary_condition.relations,
            &moved.binary_condition.relations,
        );
    // A frame change cannot make a forbidden configuration allowed; report
    // forbidden if either frame says so.
    let forbidden = !rest.binary_condition.holds || !moved.binary_condition.holds;
    let outcome = if forbidden {
        Outcome::ForbiddenConfiguration
    } else {
        Outcome::Consistent
    };
    let mut report = finish(
        &Command::Boost {
            velocity: velocity.to_vec(),
        },
        outcome,
        Verdicts {
            binary_condition: Some(rest.binary_condition.clone()),
            lorentz_invariant: Some(invariant),
            ..Verdicts::default()
        },
        Statistics::default(),
        spec,
        Settings {
            velocity: Some(velocity.to_vec()),
            ..Settings::default()
        },
    );
    report.boost = Some(BoostSection {
        velocity: velocity.to_vec(),
        gamma: b.gamma(),
        rest,
        boosted: moved,
    });
    Ok(report)
}

fn loop_search(params: &LoopSearchParams) -> Result<Report, LoopsError> {
    let options = SearchOptions {
        seed: params.seed,
        depths: (0..=params.max_depth).collect(),
        dimensions: params.dimensions.clone(),
        configurations_per_cell: params.configurations_per_cell,
        adversarial_runs_per_cell: params.adversarial_runs_per_cell,
        ..SearchOptions::default()
    };
    let result = search_loops(&options)?;
    let closed = result.closed_loops.len();
    let outcome = if closed > 0 {
        Outcome::ClosedLoopFound
    } else {
        Outcome::Consistent
    };
    Ok(Report {
        command: "loop-search".into(),
        outcome,
        exit_code: outcome.exit_code(),
        verdicts: Verdicts {
            closed_loops: Some(closed),
            ..Verdicts::default()
        },
        statistics: Statistics::default(),
        boost: None,
        loop_search: Some(result),
        provenance: Provenance::new(
            params.seed,
            None,
            Settings {
                depths: Some(options.depths),
                dimensions: Some(options.dimensions),
                configurations_per_cell: Some(options.configurations_per_cell),
                adversarial_runs_per_cell: Some(options.adversarial_runs_per_cell),
                ..Settings::default()
            },
        ),
    })
}
