use std::path::Path;
use std::process::{Command, Output};

use jamlab::report::{Outcome, Report};
use jamlab::scenario::parse_scenario;

fn jamlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(out: &Output) -> Report {
    serde_json::from_slice(&out.stdout).expect("stdout is a report")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn canned_geometry_verdicts() {
    for (name, expected) in [("fig1a", 2), ("fig1d-selective", 2), ("fig1e", 0)] {
        let out = jamlab(&["geometry", "--canned", name]);
        assert_eq!(code(&out), expected, "{name}");
        let r = report(&out);
        let g = r.verdicts.binary_condition.unwrap();
        assert_eq!(g.holds, expected == 0);
        assert!(g.oracle_agrees);
        assert_eq!(r.exit_code, expected);
    }
}

#[test]
fn selective_jamming_is_flagged_and_others_are_not() {
    let out = jamlab(&["signal", "--canned", "fig1d-selective"]);
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r.outcome, Outcome::SignalingDetected);
    let on = r.statistics.jam_on.unwrap();
    assert!((on.bob_plus.value - 0.75).abs() < 0.02);
    assert_eq!(on.expected_bob_plus, 0.75);
    let unary = r.verdicts.unary.unwrap();
    assert!(unary.bob.signaling && !unary.alice.signaling);

    assert_eq!(code(&jamlab(&["signal", "--canned", "fig1e"])), 0);
    // Always-on jamming hides nothing in the marginals, but the geometry
    // still rules the configuration out.
    assert_eq!(code(&jamlab(&["signal", "--canned", "fig1a"])), 2);
    assert_eq!(code(&jamlab(&["simulate", "--canned", "fig1a"])), 0);
}

#[test]
fn reports_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("one.json");
    let second = dir.path().join("two.json");
    for path in [&first, &second] {
        let out = jamlab(&[
            "simulate",
            "--canned",
            "fig1d-selective",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 3);
    }
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    let parsed: Report = serde_json::from_slice(&a).unwrap();
    assert_eq!(parsed.to_json().as_bytes(), &a[..]);
    let p = &parsed.provenance;
    assert_eq!(p.tool, "jamlab");
    assert_eq!(p.seed, 0);
    assert_eq!(
        p.scenario_hash.as_deref(),
        Some(p.scenario.as_ref().unwrap().hash().as_str())
    );
}

#[test]
fn printed_scenario_reproduces_the_canned_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamlab(&["scenario", "--canned", "fig1e", "--seed", "9"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let spec = parse_scenario(&text).unwrap();
    assert_eq!(spec.seed, 9);
    let path = write(dir.path(), "fig1e.json", &text);
    let from_file = jamlab(&["chsh", "--scenario", &path, "--trials", "2000"]);
    let canned = jamlab(&[
        "chsh", "--canned", "fig1e", "--seed", "9", "--trials", "2000",
    ]);
    assert_eq!(from_file.stdout, canned.stdout);
    let r = report(&canned);
    assert_eq!(r.provenance.seed, 9);
    assert_eq!(r.statistics.chsh.unwrap().n_per_pair, 2000);
}

#[test]
fn seeds_change_samples_but_not_verdicts() {
    let a = report(&jamlab(&["simulate", "--canned", "fig1e", "--seed", "1"]));
    let b = report(&jamlab(&["simulate", "--canned", "fig1e", "--seed", "2"]));
    assert_ne!(a.statistics.jam_on, b.statistics.jam_on);
    assert_eq!(a.outcome, b.outcome);
    assert_ne!(a.provenance.scenario_hash, b.provenance.scenario_hash);
}

#[test]
fn boost_reorders_simultaneous_events() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "line.json",
        r#"{
            "dimension": 1,
            "events": {"a": {"t": 0, "x": [-2]}, "b": {"t": 0, "x": [2]}, "j": {"t": 0, "x": [0]}}
        }"#,
    );
    let out = jamlab(&["boost", "--scenario", &path, "--velocity", "0.5"]);
    let r = report(&out);
    let boost = r.boost.unwrap();
    assert_eq!(boost.rest.time_order, vec![vec!["a", "b", "j"]]);
    assert_eq!(
        boost.boosted.time_order,
        vec![vec!["b"], vec!["j"], vec!["a"]]
    );
    assert!((boost.gamma - 1.0 / 0.75f64.sqrt()).abs() < 1e-12);
    assert_eq!(r.verdicts.lorentz_invariant, Some(true));
    // The measurement cones first meet at (2, 0), inside the jammer's cone.
    assert_eq!(code(&out), 0);

    for v in ["--velocity=0.5", "--velocity=-0.9"] {
        let back = jamlab(&["boost", "--canned", "fig1e", v]);
        assert_eq!(code(&back), 0);
        let r = report(&back);
        assert_eq!(r.verdicts.lorentz_invariant, Some(true));
        let boost = r.boost.unwrap();
        assert!(boost.rest.binary_condition.holds && boost.boosted.binary_condition.holds);
    }
}

#[test]
fn loop_search_reports_no_loops() {
    let out = jamlab(&[
        "loop-search",
        "--depth",
        "1",
        "--configs",
        "6",
        "--adversarial",
        "1",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r.verdicts.closed_loops, Some(0));
    let search = r.loop_search.unwrap();
    assert_eq!(search.configurations_checked, 2 * 2 * 6);
    assert_eq!(r.provenance.settings.depths, Some(vec![0, 1]));

    let deep = jamlab(&["loop-search", "--depth", "4"]);
    assert_eq!(code(&deep), 1);
    assert!(String::from_utf8_lossy(&deep.stderr).contains("depth"));
}

#[test]
fn usage_and_input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&jamlab(&["geometry", "--bogus"])), 1);
    assert_eq!(code(&jamlab(&["geometry"])), 1);
    assert_eq!(code(&jamlab(&["geometry", "--canned", "nope"])), 1);
    assert_eq!(
        code(&jamlab(&[
            "geometry",
            "--canned",
            "fig1e",
            "--dimension",
            "2"
        ])),
        1
    );
    assert_eq!(
        code(&jamlab(&[
            "boost",
            "--canned",
            "fig1e",
            "--velocity",
            "1.5"
        ])),
        1
    );
    assert_eq!(
        code(&jamlab(&[
            "boost",
            "--canned",
            "fig1e",
            "--velocity",
            "0.1,0.1"
        ])),
        1
    );
    assert_eq!(code(&jamlab(&["--help"])), 0);
    assert_eq!(code(&jamlab(&["--version"])), 0);

    let empty = write(dir.path(), "empty.json", "");
    let out = jamlab(&["geometry", "--scenario", &empty]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"dimension": 1, "events": {"a": {"t": 0, "x": [0]}, "b": {"t": 0, "x": [1]}, "j": {"t": 0, "x": [0, 1]}}}"#,
    );
    let out = jamlab(&["geometry", "--scenario", &bad]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("events.j"));
    assert!(out.stdout.is_empty());
}
