//! Pure-state spin engine for up to three qubits.
//!
//! Spin measurements are confined to one great circle of the Bloch sphere:
//! an analyzer at angle `α` measures `cos α σ_z + sin α σ_x`, whose `+`
//! eigenstate is `cos(α/2)|0⟩ + sin(α/2)|1⟩`. Party 1 is the most
//! significant qubit of a basis index.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 3;

/// Allowed deviation of a state's squared norm (or a distribution's total)
/// from one.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("amplitude count {0} is not 2^n for n in 1..=3")]
    BadLength(usize),
    #[error("state norm squared is {0}, expected 1")]
    NotNormalized(f64),
    #[error("party {party} does not exist in a {qubits}-qubit state")]
    BadParty { party: usize, qubits: usize },
    #[error("party {0} is measured more than once")]
    DuplicateParty(usize),
    #[error("expected a {expected}-qubit state, got {actual}")]
    WrongPartyCount { expected: usize, actual: usize },
    #[error("third-party choice {index} addresses party {party}, not party 3")]
    NotThirdParty { index: usize, party: usize },
    #[error("no third-party measurement choices given")]
    NoChoices,
}

/// Result of a single spin measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        let qubits = match amplitudes.len() {
            2 => 1,
            4 => 2,
            8 => 3,
            n => return Err(QuantumError::BadLength(n)),
        };
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm2));
        }
        Ok(StateVector { qubits, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm before validating.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuantumError::NotNormalized(norm * norm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(amplitudes)
    }

    /// `(|01⟩ - |10⟩) / √2`.
    pub fn singlet() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [0.0, h, -h, 0.0].map(|re| Complex64::new(re, 0.0));
        Self::new(amps.to_vec()).expect("normalized singlet")
    }

    /// `(|000⟩ + |111⟩) / √2`.
    pub fn ghz() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(h, 0.0);
        amps[7] = Complex64::new(h, 0.0);
        Self::new(amps).expect("normalized GHZ")
    }

    /// Product of `+` eigenstates of analyzers at the given angles.
    pub fn product(angles: &[f64]) -> Result<Self, QuantumError> {
        if angles.is_empty() || angles.len() > MAX_QUBITS {
            return Err(QuantumError::BadLength(1 << angles.len()));
        }
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for &angle in angles {
            let (s, c) = (0.5 * angle).sin_cos();
            amps = amps.iter().flat_map(|a| [a * c, a * s]).collect();
        }
        Self::normalized(amps)
    }

    /// Amplitudes drawn from a standard complex normal, then normalized.
    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Result<Self, QuantumError> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(QuantumError::BadLength(1 << qubits));
        }
        let amps = (0..1usize << qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(amps)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn bit(&self, party: usize) -> usize {
        self.qubits - party
    }

    /// Rewrites qubit `party` in the eigenbasis of an analyzer at `angle`:
    /// index bit 0 becomes the `+` outcome, bit 1 the `-` outcome.
    fn rotate_into(&mut self, party: usize, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        let mask = 1usize << self.bit(party);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                // ⟨+|ψ⟩ and ⟨-|ψ⟩ with |+⟩ = (c, s), |-⟩ = (-s, c).
                self.amplitudes[i] = a0 * c + a1 * s;
                self.amplitudes[i | mask] = a1 * c - a0 * s;
            }
        }
    }
}

/// Spin measurement along angle `angle` (radians) by party `party` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMeasurement {
    pub party: usize,
    pub angle: f64,
}

impl LocalMeasurement {
    pub fn new(party: usize, angle: f64) -> Self {
        LocalMeasurement { party, angle }
    }
}

/// Joint outcome probabilities for a set of measured parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub parties: Vec<usize>,
    /// Outcome tuples (ordered like `parties`) with their probabilities.
    pub entries: Vec<(Vec<Outcome>, f64)>,
}

impl OutcomeDistribution {
    pub fn probability(&self, outcomes: &[Outcome]) -> f64 {
        self.entries
            .iter()
            .find(|(o, _)| o.as_slice() == outcomes)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Probability that the party at position `slot` of `parties` sees `outcome`.
    pub fn marginal(&self, slot: usize, outcome: Outcome) -> f64 {
        self.entries
            .iter()
            .filter(|(o, _)| o[slot] == outcome)
            .map(|(_, p)| p)
            .sum()
    }

    /// `⟨s_1 s_2 ... ⟩` with `s = ±1` per measured party.
    pub fn correlation(&self) -> f64 {
        self.entries
            .iter()
            .map(|(o, p)| p * o.iter().map(|x| f64::from(x.sign())).product::<f64>())
            .sum()
    }
}

/// Born-rule probabilities of the joint outcomes of `measurements`.
pub fn joint_probabilities(
    state: &StateVector,
    measurements: &[LocalMeasurement],
) -> Result<OutcomeDistribution, QuantumError> {
    let mut seen = Vec::with_capacity(measurements.len());
    for m in measurements {
        if m.party == 0 || m.party > state.qubits {
            return Err(QuantumError::BadParty {
                party: m.party,
                qubits: state.qubits,
            });
        }
        if seen.contains(&m.party) {
            return Err(QuantumError::DuplicateParty(m.party));
        }
        seen.push(m.party);
    }
    let mut rotated = state.clone();
    for m in measurements {
        rotated.rotate_into(m.party, m.angle);
    }
    let mut entries: Vec<(Vec<Outcome>, f64)> = (0..1usize << measurements.len())
        .map(|code| {
            let outcomes = (0..measurements.len())
                .map(|k| {
                    if code >> (measurements.len() - 1 - k) & 1 == 0 {
                        Outcome::Plus
                    } else {
                        Outcome::Minus
                    }
                })
                .collect();
            (outcomes, 0.0)
        })
        .collect();
    for (index, amp) in rotated.amplitudes.iter().enumerate() {
        let code = measurements.iter().fold(0usize, |acc, m| {
            (acc << 1) | (index >> rotated.bit(m.party) & 1)
        });
        entries[code].1 += amp.norm_sqr();
    }
    Ok(OutcomeDistribution {
        parties: seen,
        entries,
    })
}

/// Largest change in the joint distribution of `m1`, `m2` (marginalized over
/// party 3) across the third party's measurement choices.
pub fn no_signaling_check(
    state: &StateVector,
    m1: LocalMeasurement,
    m2: LocalMeasurement,
    third_choices: &[LocalMeasurement],
) -> Result<f64, QuantumError> {
    if state.qubits != 3 {
        return Err(QuantumError::WrongPartyCount {
            expected: 3,
            actual: state.qubits,
        });
    }
    for (index, m) in third_choices.iter().enumerate() {
        if m.party != 3 {
            return Err(QuantumError::NotThirdParty {
                index,
                party: m.party,
            });
        }
    }
    for m in [m1, m2] {
        if m.party == 3 {
            return Err(QuantumError::DuplicateParty(3));
        }
    }
    let Some((first, rest)) = third_choices.split_first() else {
        return Err(QuantumError::NoChoices);
    };
    let pair_marginal = |third: LocalMeasurement| -> Result<[f64; 4], QuantumError> {
        let dist = joint_probabilities(state, &[m1, m2, third])?;
        let mut out = [0.0; 4];
        for (o, p) in &dist.entries {
            out[usize::from(o[0] == Outcome::Minus) * 2 + usize::from(o[1] == Outcome::Minus)] += p;
        }
        Ok(out)
    };
    let reference = pair_marginal(*first)?;
    let mut worst = 0.0f64;
    for &choice in rest {
        let other = pair_marginal(choice)?;
        for (p, q) in reference.iter().zip(&other) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}

/// Singlet prediction `E(α, β) = -cos(α - β)`.
pub fn singlet_correlation(alpha: f64, beta: f64) -> f64 {
    -(alpha - beta).cos()
}

/// `|α - β|` folded into `[0, π]`.
pub fn relative_angle(alpha: f64, beta: f64) -> f64 {
    let theta = (alpha - beta).rem_euclid(TAU);
    if theta > PI {
        TAU - theta
    } else {
        theta
    }
}

/// Local hidden-variable correlation `-1 + 2θ/π`, linear in the folded
/// relative angle.
pub fn classical_linear_correlation(alpha: f64, beta: f64) -> f64 {
    -1.0 + 2.0 * relative_angle(alpha, beta) / PI
}

/// Analyzer settings for a CHSH experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshAngles {
    pub alice: [f64; 2],
    pub bob: [f64; 2],
}

impl ChshAngles {
    /// α ∈ {0, π/2}, β ∈ {π/4, -π/4}: extremal for the singlet.
    pub fn canonical() -> Self {
        ChshAngles {
            alice: [0.0, FRAC_PI_2],
            bob: [FRAC_PI_4, -FRAC_PI_4],
        }
    }

    /// The four (α, β) pairs in CHSH order; the last enters with a minus sign.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        let [a1, a2] = self.alice;
        let [b1, b2] = self.bob;
        [(a1, b1), (a1, b2), (a2, b1), (a2, b2)]
    }

    pub fn chsh(&self, correlation: impl Fn(f64, f64) -> f64) -> f64 {
        chsh_value(
            correlation,
            self.alice[0],
            self.alice[1],
            self.bob[0],
            self.bob[1],
        )
    }
}

/// `E(α1,β1) + E(α1,β2) + E(α2,β1) - E(α2,β2)`.
pub fn chsh_value(
    correlation: impl Fn(f64, f64) -> f64,
    alpha1: f64,
    alpha2: f64,
    beta1: f64,
    beta2: f64,
) -> f64 {
    correlation(alpha1, beta1) + correlation(alpha1, beta2) + correlation(alpha2, beta1)
        - correlation(alpha2, beta2)
}
