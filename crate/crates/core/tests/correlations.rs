use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use jamlab_core::correlations::{
    chsh_estimate, empirical_chsh, model_correlation, sample_counts, sample_trials, tally,
    unary_check, CorrelationModel, JamPolicy, JammingSetup, DEFAULT_SIGNAL_THRESHOLD,
};
use jamlab_core::quantum::{ChshAngles, Outcome};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact joint distribution implied by the trial procedure, by enumerating
/// Alice's outcome, the jam decision and Bob's outcome. Independent of the
/// sampler: the correlation enters only through the closed forms below.
fn exact_joint(setup: &JammingSetup, alpha: f64, beta: f64) -> [[f64; 2]; 2] {
    let e = |m: CorrelationModel| closed_form(m, alpha, beta);
    let mut p = [[0.0; 2]; 2];
    for (ki, k) in [1.0, -1.0].into_iter().enumerate() {
        let jammed = match setup.policy {
            JamPolicy::Never => false,
            JamPolicy::Always => true,
            JamPolicy::SelectiveOnAlicePlus => ki == 0,
        };
        let corr = if jammed {
            e(setup.jam_model)
        } else {
            e(setup.model)
        };
        for (li, l) in [1.0, -1.0].into_iter().enumerate() {
            p[ki][li] = 0.5 * (1.0 + k * l * corr) / 2.0;
        }
    }
    p
}

fn closed_form(model: CorrelationModel, alpha: f64, beta: f64) -> f64 {
    let d = alpha - beta;
    let theta = d.cos().acos();
    match model {
        CorrelationModel::Quantum => -d.cos(),
        CorrelationModel::Decorrelate(eta) => -(1.0 - eta) * d.cos(),
        CorrelationModel::Classicalize(eta) => {
            -(1.0 - eta) * d.cos() + eta * (-1.0 + 2.0 * theta / PI)
        }
    }
}

fn models() -> Vec<CorrelationModel> {
    vec![
        CorrelationModel::Quantum,
        CorrelationModel::decorrelate(0.3).unwrap(),
        CorrelationModel::decorrelate(1.0).unwrap(),
        CorrelationModel::classicalize(0.6).unwrap(),
        CorrelationModel::classicalize(1.0).unwrap(),
    ]
}

proptest! {
    #[test]
    fn model_matches_closed_form(alpha in -10.0..10.0f64, beta in -10.0..10.0f64, eta in 0.0..=1.0f64) {
        for m in [
            CorrelationModel::Quantum,
            CorrelationModel::decorrelate(eta).unwrap(),
            CorrelationModel::classicalize(eta).unwrap(),
        ] {
            let e = model_correlation(m, alpha, beta).unwrap();
            prop_assert!((-1.0..=1.0).contains(&e));
            prop_assert!((e - closed_form(m, alpha, beta)).abs() < 1e-7);
        }
    }
}

#[test]
fn empirical_correlation_tracks_model() {
    let n = 100_000u64;
    let tol = 4.0 / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (k, m) in models().into_iter().enumerate() {
        for _ in 0..3 {
            let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let table = sample_counts(&JammingSetup::unjammed(m), a, b, n, k as u64).unwrap();
            let e = table.correlation().unwrap();
            let exact = closed_form(m, a, b);
            assert!(
                (e.value - exact).abs() < tol,
                "{m:?} {a} {b}: {} vs {exact}",
                e.value
            );
        }
    }
}

#[test]
fn unselective_policies_keep_marginals_uniform() {
    let n = 100_000u64;
    let band = 5.0 * 0.5 / (n as f64).sqrt();
    let mut seed = 0;
    for jam in models() {
        for policy in [JamPolicy::Never, JamPolicy::Always] {
            seed += 1;
            let setup = JammingSetup::new(CorrelationModel::Quantum, jam, policy);
            let table = sample_counts(&setup, 0.3, -1.1, n, seed).unwrap();
            for f in [table.alice_plus_frequency(), table.bob_plus_frequency()] {
                assert!((f.unwrap().value - 0.5).abs() < band);
            }
        }
    }
}

#[test]
fn decorrelated_jam_averages_to_zero() {
    let setup = JammingSetup::new(
        CorrelationModel::Quantum,
        CorrelationModel::decorrelate(1.0).unwrap(),
        JamPolicy::Always,
    );
    let trials = sample_trials(&setup, 0.0, 0.0, 100_000, 5).unwrap();
    assert!(trials.iter().all(|t| t.jammed));
    let e = tally(&trials).correlation().unwrap();
    assert!(e.value.abs() < 0.02, "{}", e.value);
}

#[test]
fn selective_jamming_shifts_bobs_marginal() {
    let setup = JammingSetup::new(
        CorrelationModel::Quantum,
        CorrelationModel::decorrelate(1.0).unwrap(),
        JamPolicy::SelectiveOnAlicePlus,
    );
    let exact = exact_joint(&setup, 0.0, 0.0);
    let bob_plus = exact[0][0] + exact[1][0];
    assert!((bob_plus - 0.75).abs() < 1e-15);

    let n = 10_000;
    let on = sample_counts(&setup, 0.0, 0.0, n, 100).unwrap();
    let off = sample_counts(
        &JammingSetup::unjammed(CorrelationModel::Quantum),
        0.0,
        0.0,
        n,
        101,
    )
    .unwrap();
    let f = on.bob_plus_frequency().unwrap().value;
    assert!((f - 0.75).abs() < 0.02, "{f}");
    let v = unary_check(&off, &on, DEFAULT_SIGNAL_THRESHOLD).unwrap();
    assert!(v.bob.signaling);
    assert!(v.bob.z_statistic > 30.0, "{}", v.bob.z_statistic);
    // Alice's own statistics are untouched by a jammer that reacts to them.
    assert!(!v.alice.signaling);
}

#[test]
fn selective_jamming_with_the_same_model_is_invisible() {
    for m in models() {
        let setup = JammingSetup::new(m, m, JamPolicy::SelectiveOnAlicePlus);
        let on = sample_counts(&setup, 0.0, 0.7, 10_000, 200).unwrap();
        let off = sample_counts(&JammingSetup::unjammed(m), 0.0, 0.7, 10_000, 201).unwrap();
        let v = unary_check(&off, &on, DEFAULT_SIGNAL_THRESHOLD).unwrap();
        assert!(!v.signaling(), "{m:?}: {v:?}");
    }
}

#[test]
fn selective_jamming_is_flagged_whenever_the_shift_is_resolvable() {
    // Bob's + frequency moves by (E_jam - E_model) / 4; at 10^4 trials a
    // shift of 0.05 sits roughly 10 standard errors out.
    let n = 10_000;
    let mut seed = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut checked = 0;
    while checked < 20 {
        let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let model = models()[rng.random_range(0..5)];
        let jam = models()[rng.random_range(0..5)];
        let setup = JammingSetup::new(model, jam, JamPolicy::SelectiveOnAlicePlus);
        let exact = exact_joint(&setup, a, b);
        let shift = exact[0][0] + exact[1][0] - 0.5;
        if shift.abs() < 0.05 {
            continue;
        }
        checked += 1;
        seed += 2;
        let on = sample_counts(&setup, a, b, n, seed).unwrap();
        let off = sample_counts(&JammingSetup::unjammed(model), a, b, n, seed + 1).unwrap();
        let v = unary_check(&off, &on, DEFAULT_SIGNAL_THRESHOLD).unwrap();
        assert!(v.bob.signaling, "{setup:?} {a} {b}: {v:?}");
        assert_eq!(v.bob.z_statistic.signum(), shift.signum());
    }
}

#[test]
fn sampled_cells_match_exact_joint() {
    let n = 100_000u64;
    let setup = JammingSetup::new(
        CorrelationModel::classicalize(0.5).unwrap(),
        CorrelationModel::decorrelate(0.2).unwrap(),
        JamPolicy::SelectiveOnAlicePlus,
    );
    let (a, b) = (0.4, 2.2);
    let exact = exact_joint(&setup, a, b);
    let t = sample_counts(&setup, a, b, n, 77).unwrap();
    let cells = [[t.n_pp, t.n_pm], [t.n_mp, t.n_mm]];
    for k in 0..2 {
        for l in 0..2 {
            let p = exact[k][l];
            let f = cells[k][l] as f64 / n as f64;
            assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }
}

#[test]
fn chsh_examples() {
    let angles = ChshAngles::canonical();
    assert_eq!(angles.alice, [0.0, FRAC_PI_2]);
    assert_eq!(angles.bob, [FRAC_PI_4, -FRAC_PI_4]);
    let n = 100_000;
    let quantum = JammingSetup::unjammed(CorrelationModel::Quantum);
    let s = empirical_chsh(&quantum, &angles, n, 1).unwrap();
    assert!((s.abs() - 2.0 * 2f64.sqrt()).abs() < 0.05, "{s}");

    let classical = JammingSetup::new(
        CorrelationModel::Quantum,
        CorrelationModel::classicalize(1.0).unwrap(),
        JamPolicy::Always,
    );
    let s = chsh_estimate(&classical, &angles, n, 2).unwrap();
    assert!((s.value.abs() - 2.0).abs() < 0.05, "{}", s.value);
    assert!(s.std_error < 0.01);

    let random = JammingSetup::new(
        CorrelationModel::Quantum,
        CorrelationModel::decorrelate(1.0).unwrap(),
        JamPolicy::Always,
    );
    let s = empirical_chsh(&random, &angles, n, 3).unwrap();
    assert!(s.abs() < 0.05, "{s}");
}

#[test]
fn records_carry_their_settings() {
    let setup = JammingSetup::unjammed(CorrelationModel::Quantum);
    let trials = sample_trials(&setup, 0.25, -0.5, 50, 9).unwrap();
    assert_eq!(trials.len(), 50);
    for t in &trials {
        assert_eq!((t.alice_angle, t.bob_angle), (0.25, -0.5));
        assert!(!t.jammed);
        assert!(matches!(t.alice_outcome, Outcome::Plus | Outcome::Minus));
    }
}
