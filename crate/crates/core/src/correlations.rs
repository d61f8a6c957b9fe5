//! Monte-Carlo EPR trials with an optional jammer.
//!
//! Every model here has uniform single-party marginals, so a trial factors as
//! "Alice draws ± uniformly, then Bob draws from P(l | k) = (1 + k·l·E)/2".
//! That ordering is what lets a selective jammer look at Alice's result
//! before deciding whether to act.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{classical_linear_correlation, relative_angle, ChshAngles, Outcome};

/// Default |z| above which a marginal shift counts as a signal.
pub const DEFAULT_SIGNAL_THRESHOLD: f64 = 5.0;

/// Trials drawn from one random stream before switching to the next.
pub const TRIALS_PER_STREAM: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrelationError {
    #[error("jam strength {0} is outside [0, 1]")]
    EtaOutOfRange(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("analyzer angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("the {0} count table is empty")]
    EmptyTable(&'static str),
    #[error("signal threshold {0} must be a non-negative number")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawModel {
    // A struct variant so that deny_unknown_fields applies to it too.
    Quantum {},
    Decorrelate { eta: f64 },
    Classicalize { eta: f64 },
}

/// Correlation function E(α, β) of the pair source, possibly jammed.
///
/// `Decorrelate` shrinks the singlet correlation toward zero; `Classicalize`
/// blends it toward the linear hidden-variable form while keeping E(α, α) = −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub enum CorrelationModel {
    Quantum,
    Decorrelate(f64),
    Classicalize(f64),
}

impl TryFrom<RawModel> for CorrelationModel {
    type Error = CorrelationError;

    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        let model = match raw {
            RawModel::Quantum {} => CorrelationModel::Quantum,
            RawModel::Decorrelate { eta } => CorrelationModel::Decorrelate(eta),
            RawModel::Classicalize { eta } => CorrelationModel::Classicalize(eta),
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<CorrelationModel> for RawModel {
    fn from(model: CorrelationModel) -> Self {
        match model {
            CorrelationModel::Quantum => RawModel::Quantum {},
            CorrelationModel::Decorrelate(eta) => RawModel::Decorrelate { eta },
            CorrelationModel::Classicalize(eta) => RawModel::Classicalize { eta },
        }
    }
}

impl CorrelationModel {
    pub fn decorrelate(eta: f64) -> Result<Self, CorrelationError> {
        let m = CorrelationModel::Decorrelate(eta);
        m.validate().map(|()| m)
    }

    pub fn classicalize(eta: f64) -> Result<Self, CorrelationError> {
        let m = CorrelationModel::Classicalize(eta);
        m.validate().map(|()| m)
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        match *self {
            CorrelationModel::Quantum => Ok(()),
            CorrelationModel::Decorrelate(eta) | CorrelationModel::Classicalize(eta) => {
                if (0.0..=1.0).contains(&eta) {
                    Ok(())
                } else {
                    Err(CorrelationError::EtaOutOfRange(eta))
                }
            }
        }
    }

    pub fn correlation(&self, alpha: f64, beta: f64) -> Result<f64, CorrelationError> {
        model_correlation(*self, alpha, beta)
    }
}

pub fn model_correlation(
    model: CorrelationModel,
    alpha: f64,
    beta: f64,
) -> Result<f64, CorrelationError> {
    model.validate()?;
    check_angle(alpha)?;
    check_angle(beta)?;
    let theta = relative_angle(alpha, beta);
    let quantum = -theta.cos();
    Ok(match model {
        CorrelationModel::Quantum => quantum,
        CorrelationModel::Decorrelate(eta) => (1.0 - eta) * quantum,
        CorrelationModel::Classicalize(eta) => {
            (1.0 - eta) * quantum + eta * classical_linear_correlation(alpha, beta)
        }
    })
}

fn check_angle(angle: f64) -> Result<(), CorrelationError> {
    if angle.is_finite() {
        Ok(())
    } else {
        Err(CorrelationError::NonFiniteAngle(angle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamPolicy {
    Never,
    Always,
    /// Jam only the pairs for which Alice has already obtained `+`.
    SelectiveOnAlicePlus,
}

/// Source model, jammed model, and when the jammed one is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammingSetup {
    pub model: CorrelationModel,
    pub jam_model: CorrelationModel,
    pub policy: JamPolicy,
}

impl JammingSetup {
    pub fn new(model: CorrelationModel, jam_model: CorrelationModel, policy: JamPolicy) -> Self {
        JammingSetup {
            model,
            jam_model,
            policy,
        }
    }

    /// No jammer at all.
    pub fn unjammed(model: CorrelationModel) -> Self {
        Self::new(model, model, JamPolicy::Never)
    }

    fn jams(&self, alice: Outcome) -> bool {
        match self.policy {
            JamPolicy::Never => false,
            JamPolicy::Always => true,
            JamPolicy::SelectiveOnAlicePlus => alice == Outcome::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alice_outcome: Outcome,
    pub bob_outcome: Outcome,
    pub alice_angle: f64,
    pub bob_angle: f64,
    pub jammed: bool,
}

/// Draws `n` independent trials. Trial `i` uses stream `i / TRIALS_PER_STREAM`
/// of a ChaCha8 generator keyed by `seed`, so any contiguous block of trials
/// can be regenerated on its own.
pub fn sample_trials(
    setup: &JammingSetup,
    alpha: f64,
    beta: f64,
    n: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>, CorrelationError> {
    let mut out = Vec::with_capacity(usize::try_from(n).unwrap_or(0));
    for_each_trial(setup, alpha, beta, n, seed, |t| out.push(t))?;
    Ok(out)
}

/// Like [`sample_trials`] followed by [`tally`], without storing the records.
pub fn sample_counts(
    setup: &JammingSetup,
    alpha: f64,
    beta: f64,
    n: u64,
    seed: u64,
) -> Result<CountTable, CorrelationError> {
    let mut table = CountTable::default();
    for_each_trial(setup, alpha, beta, n, seed, |t| table.record(&t))?;
    Ok(table)
}

fn for_each_trial(
    setup: &JammingSetup,
    alpha: f64,
    beta: f64,
    n: u64,
    seed: u64,
    mut sink: impl FnMut(TrialRecord),
) -> Result<(), CorrelationError> {
    if n == 0 {
        return Err(CorrelationError::NoTrials);
    }
    // Probability that Bob's outcome equals Alice's, per active model.
    let agree = |model: CorrelationModel| -> Result<f64, CorrelationError> {
        Ok((1.0 + model_correlation(model, alpha, beta)?) / 2.0)
    };
    let agree_plain = agree(setup.model)?;
    let agree_jammed = agree(setup.jam_model)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        if i % TRIALS_PER_STREAM == 0 {
            rng.set_stream(i / TRIALS_PER_STREAM);
            rng.set_word_pos(0);
        }
        let alice = if rng.random::<bool>() {
            Outcome::Plus
        } else {
            Outcome::Minus
        };
        let jammed = setup.jams(alice);
        let p_agree = if jammed { agree_jammed } else { agree_plain };
        let u: f64 = rng.random();
        let bob = if u < p_agree { alice } else { alice.flipped() };
        sink(TrialRecord {
            alice_outcome: alice,
            bob_outcome: bob,
            alice_angle: alpha,
            bob_angle: beta,
            jammed,
        });
    }
    Ok(())
}

/// A frequency or mean with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

/// Joint tallies n(k, l), Alice's outcome first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl CountTable {
    pub fn record(&mut self, trial: &TrialRecord) {
        use Outcome::{Minus, Plus};
        match (trial.alice_outcome, trial.bob_outcome) {
            (Plus, Plus) => self.n_pp += 1,
            (Plus, Minus) => self.n_pm += 1,
            (Minus, Plus) => self.n_mp += 1,
            (Minus, Minus) => self.n_mm += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    pub fn alice_plus(&self) -> u64 {
        self.n_pp + self.n_pm
    }

    pub fn alice_minus(&self) -> u64 {
        self.n_mp + self.n_mm
    }

    pub fn bob_plus(&self) -> u64 {
        self.n_pp + self.n_mp
    }

    pub fn bob_minus(&self) -> u64 {
        self.n_pm + self.n_mm
    }

    pub fn alice_plus_frequency(&self) -> Option<Estimate> {
        proportion(self.alice_plus(), self.total())
    }

    pub fn bob_plus_frequency(&self) -> Option<Estimate> {
        proportion(self.bob_plus(), self.total())
    }

    /// Mean of the outcome product k·l.
    pub fn correlation(&self) -> Option<Estimate> {
        let n = self.total();
        if n == 0 {
            return None;
        }
        let same = (self.n_pp + self.n_mm) as f64;
        let diff = (self.n_pm + self.n_mp) as f64;
        let value = (same - diff) / n as f64;
        Some(Estimate {
            value,
            std_error: ((1.0 - value * value).max(0.0) / n as f64).sqrt(),
            n,
        })
    }
}

fn proportion(hits: u64, n: u64) -> Option<Estimate> {
    if n == 0 {
        return None;
    }
    let p = hits as f64 / n as f64;
    Some(Estimate {
        value: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    })
}

pub fn tally<'a>(trials: impl IntoIterator<Item = &'a TrialRecord>) -> CountTable {
    let mut table = CountTable::default();
    for t in trials {
        table.record(t);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalVerdict {
    pub z_statistic: f64,
    pub signaling: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnaryVerdict {
    pub alice: SignalVerdict,
    pub bob: SignalVerdict,
}

impl UnaryVerdict {
    pub fn signaling(&self) -> bool {
        self.alice.signaling || self.bob.signaling
    }
}

/// Pooled two-proportion z statistic for `hits_on / n_on` against
/// `hits_off / n_off`.
pub fn two_proportion_z(hits_off: u64, n_off: u64, hits_on: u64, n_on: u64) -> f64 {
    let (x1, n1, x2, n2) = (hits_off as f64, n_off as f64, hits_on as f64, n_on as f64);
    let pooled = (x1 + x2) / (n1 + n2);
    let var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2);
    let diff = x2 / n2 - x1 / n1;
    if var > 0.0 {
        diff / var.sqrt()
    } else {
        // Every trial in both tables agrees, so the proportions are equal.
        0.0
    }
}

/// Compares each party's `+` frequency with and without jamming.
pub fn unary_check(
    off: &CountTable,
    on: &CountTable,
    threshold: f64,
) -> Result<UnaryVerdict, CorrelationError> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(CorrelationError::BadThreshold(threshold));
    }
    if off.total() == 0 {
        return Err(CorrelationError::EmptyTable("jam-off"));
    }
    if on.total() == 0 {
        return Err(CorrelationError::EmptyTable("jam-on"));
    }
    let verdict = |z: f64| SignalVerdict {
        z_statistic: z,
        signaling: z.abs() > threshold,
        threshold,
    };
    Ok(UnaryVerdict {
        alice: verdict(two_proportion_z(
            off.alice_plus(),
            off.total(),
            on.alice_plus(),
            on.total(),
        )),
        bob: verdict(two_proportion_z(
            off.bob_plus(),
            off.total(),
            on.bob_plus(),
            on.total(),
        )),
    })
}

/// Empirical CHSH combination with the four underlying correlation estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub value: f64,
    pub std_error: f64,
    pub correlations: [Estimate; 4],
}

/// SplitMix64 step; gives each angle pair its own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chsh_estimate(
    setup: &JammingSetup,
    angles: &ChshAngles,
    n_per_pair: u64,
    seed: u64,
) -> Result<ChshEstimate, CorrelationError> {
    let mut correlations = [Estimate {
        value: 0.0,
        std_error: 0.0,
        n: 0,
    }; 4];
    for (k, (alpha, beta)) in angles.pairs().into_iter().enumerate() {
        let table = sample_counts(setup, alpha, beta, n_per_pair, derive_seed(seed, k as u64))?;
        correlations[k] = table.correlation().ok_or(CorrelationError::NoTrials)?;
    }
    let [e11, e12, e21, e22] = correlations.map(|e| e.value);
    Ok(ChshEstimate {
        value: e11 + e12 + e21 - e22,
        std_error: correlations
            .iter()
            .map(|e| e.std_error * e.std_error)
            .sum::<f64>()
            .sqrt(),
        correlations,
    })
}

/// `E(α1,β1) + E(α1,β2) + E(α2,β1) − E(α2,β2)` from `n_per_pair` trials each.
pub fn empirical_chsh(
    setup: &JammingSetup,
    angles: &ChshAngles,
    n_per_pair: u64,
    seed: u64,
) -> Result<f64, CorrelationError> {
    chsh_estimate(setup, angles, n_per_pair, seed).map(|e| e.value)
}
