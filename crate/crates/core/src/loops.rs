//! Chains and trees of relay jammers, and the search for a closed causal loop.
//!
//! A relay `k` is a full jamming experiment `(a_k, b_k, j_k)` whose jammer
//! reads the result of one earlier measurement (its attachment). To close a
//! loop, some relay would have to deliver the base results to the base jam,
//! i.e. the base jam would have to lie in `J+(a_k) ∩ J+(b_k)`. The relay's own
//! binary condition then puts the base jam in `J+(j_k)`, which is ruled out
//! because `j_k` is never in the causal past of the base jam.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlations::derive_seed;
use crate::minkowski::{
    binary_condition, causal_relation, future_slack, ridge_slack_probe, Boost, CausalRelation,
    Event, GeometryError, MAX_SPATIAL_DIMENSION, SLACK_TOLERANCE,
};

/// Deepest relay nesting the generator and search cover.
pub const MAX_TESTED_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid relay configuration: {0}")]
    Invalid(ConfigViolation),
    #[error("depth {0} is beyond the tested range 0..={MAX_TESTED_DEPTH}")]
    UntestedDepth(usize),
    #[error("sampling budget exhausted after {} draws", .0.drawn)]
    BudgetExhausted(SamplingStats),
}

/// Measurement events `a`, `b` and the jam event `j` of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerTriple {
    pub a: Event,
    pub b: Event,
    pub j: Event,
}

impl JammerTriple {
    pub fn new(a: Event, b: Event, j: Event) -> Result<Self, GeometryError> {
        crate::minkowski::check_dimensions(&[&a, &b, &j])?;
        Ok(JammerTriple { a, b, j })
    }

    pub fn dimension(&self) -> usize {
        self.a.dimension()
    }

    pub fn boosted(&self, boost: &Boost) -> Result<Self, GeometryError> {
        Ok(JammerTriple {
            a: boost.apply(&self.a)?,
            b: boost.apply(&self.b)?,
            j: boost.apply(&self.j)?,
        })
    }

    fn events(&self) -> [&Event; 3] {
        [&self.a, &self.b, &self.j]
    }
}

/// The measurement event whose result a relay jammer reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    BaseA,
    BaseB,
    /// Measurement `a_k` of relay `k` (0-based, must precede the reader).
    RelayA(usize),
    RelayB(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relay {
    pub triple: JammerTriple,
    pub reads: Attachment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayConfiguration {
    pub base: JammerTriple,
    pub relays: Vec<Relay>,
}

impl RelayConfiguration {
    pub fn new(base: JammerTriple) -> Self {
        RelayConfiguration {
            base,
            relays: Vec::new(),
        }
    }

    pub fn dimension(&self) -> Result<usize, GeometryError> {
        let events: Vec<&Event> = self
            .base
            .events()
            .into_iter()
            .chain(self.relays.iter().flat_map(|r| r.triple.events()))
            .collect();
        crate::minkowski::check_dimensions(&events)
    }

    /// The event read through `reads` by a relay at position `reader`.
    pub fn attachment_event(&self, reads: Attachment, reader: usize) -> Option<&Event> {
        match reads {
            Attachment::BaseA => Some(&self.base.a),
            Attachment::BaseB => Some(&self.base.b),
            Attachment::RelayA(k) if k < reader => self.relays.get(k).map(|r| &r.triple.a),
            Attachment::RelayB(k) if k < reader => self.relays.get(k).map(|r| &r.triple.b),
            _ => None,
        }
    }

    pub fn boosted(&self, boost: &Boost) -> Result<Self, GeometryError> {
        Ok(RelayConfiguration {
            base: self.base.boosted(boost)?,
            relays: self
                .relays
                .iter()
                .map(|r| {
                    Ok(Relay {
                        triple: r.triple.boosted(boost)?,
                        reads: r.reads,
                    })
                })
                .collect::<Result<_, GeometryError>>()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleId {
    Base,
    Relay(usize),
}

impl fmt::Display for TripleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TripleId::Base => write!(f, "base triple"),
            TripleId::Relay(k) => write!(f, "relay {k}"),
        }
    }
}

/// First constraint a configuration breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigViolation {
    BinaryCondition {
        triple: TripleId,
        margin: f64,
    },
    UnknownAttachment {
        relay: usize,
        reads: Attachment,
    },
    NotTimelikeAfterAttachment {
        relay: usize,
        reads: Attachment,
        relation: CausalRelation,
    },
    /// `relation` is where `j_k` sits relative to the base jam.
    JamInPastOfBaseJam {
        relay: usize,
        relation: CausalRelation,
    },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::BinaryCondition { triple, margin } => {
                write!(f, "{triple} fails the binary condition (margin {margin})")
            }
            ConfigViolation::UnknownAttachment { relay, reads } => {
                write!(
                    f,
                    "relay {relay} reads {reads:?}, which is not an earlier event"
                )
            }
            ConfigViolation::NotTimelikeAfterAttachment {
                relay,
                reads,
                relation,
            } => write!(
                f,
                "jam of relay {relay} is {relation:?} relative to {reads:?}, not timelike future"
            ),
            ConfigViolation::JamInPastOfBaseJam { relay, relation } => write!(
                f,
                "jam of relay {relay} is {relation:?} relative to the base jam"
            ),
        }
    }
}

fn allowed_against_base_jam(relation: CausalRelation) -> bool {
    matches!(
        relation,
        CausalRelation::Spacelike
            | CausalRelation::LightlikeFuture
            | CausalRelation::TimelikeFuture
    )
}

fn triple_violation(
    triple: &JammerTriple,
    id: TripleId,
) -> Result<Option<ConfigViolation>, GeometryError> {
    let v = binary_condition(&triple.a, &triple.b, &triple.j)?;
    Ok((!v.holds).then_some(ConfigViolation::BinaryCondition {
        triple: id,
        margin: v.margin,
    }))
}

fn attachment_violation(
    cfg: &RelayConfiguration,
    k: usize,
) -> Result<Option<ConfigViolation>, GeometryError> {
    let relay = &cfg.relays[k];
    let Some(parent) = cfg.attachment_event(relay.reads, k) else {
        return Ok(Some(ConfigViolation::UnknownAttachment {
            relay: k,
            reads: relay.reads,
        }));
    };
    let relation = causal_relation(parent, &relay.triple.j)?;
    if relation != CausalRelation::TimelikeFuture {
        return Ok(Some(ConfigViolation::NotTimelikeAfterAttachment {
            relay: k,
            reads: relay.reads,
            relation,
        }));
    }
    Ok(None)
}

fn base_jam_violation(
    cfg: &RelayConfiguration,
    k: usize,
) -> Result<Option<ConfigViolation>, GeometryError> {
    let relation = causal_relation(&cfg.base.j, &cfg.relays[k].triple.j)?;
    Ok((!allowed_against_base_jam(relation))
        .then_some(ConfigViolation::JamInPastOfBaseJam { relay: k, relation }))
}

/// The first broken constraint, or `None` for a valid configuration.
///
/// For a relay reading a base measurement, the base-jam constraint is
/// implied by the others whenever the base measurements are spacelike to each
/// other: the binary condition then keeps the base jam out of their timelike
/// future, so a jam timelike after `a` cannot precede the base jam. It is
/// checked anyway.
pub fn configuration_violation(
    cfg: &RelayConfiguration,
) -> Result<Option<ConfigViolation>, GeometryError> {
    cfg.dimension()?;
    for k in 0..cfg.relays.len() {
        if let Some(v) = attachment_violation(cfg, k)? {
            return Ok(Some(v));
        }
        if let Some(v) = base_jam_violation(cfg, k)? {
            return Ok(Some(v));
        }
    }
    if let Some(v) = triple_violation(&cfg.base, TripleId::Base)? {
        return Ok(Some(v));
    }
    for (k, relay) in cfg.relays.iter().enumerate() {
        if let Some(v) = triple_violation(&relay.triple, TripleId::Relay(k))? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

pub fn validate_configuration(cfg: &RelayConfiguration) -> Result<bool, GeometryError> {
    Ok(configuration_violation(cfg)?.is_none())
}

/// How close relay `relay` comes to delivering its results to the base jam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayReach {
    pub relay: usize,
    /// `f_{a_k}(j)`: non-negative iff the base jam is in `J+(a_k)`.
    pub a_slack: f64,
    pub b_slack: f64,
    /// `f_{j_k}(j)`: non-negative iff the base jam is in `J+(j_k)`.
    pub jam_slack: f64,
}

impl RelayReach {
    fn of(cfg: &RelayConfiguration, relay: usize) -> Self {
        let t = &cfg.relays[relay].triple;
        let j = &cfg.base.j;
        RelayReach {
            relay,
            a_slack: future_slack(&t.a, j),
            b_slack: future_slack(&t.b, j),
            jam_slack: future_slack(&t.j, j),
        }
    }

    /// `min(a_slack, b_slack)`; non-negative iff the loop closes through here.
    pub fn gap(&self) -> f64 {
        self.a_slack.min(self.b_slack)
    }

    pub fn closes(&self) -> bool {
        self.a_slack >= 0.0 && self.b_slack >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopReason {
    NoRelays,
    /// No relay has both measurements in the causal past of the base jam.
    Open {
        reaches: Vec<RelayReach>,
    },
    /// Relay `closing.relay` gathers both results into the past of the base
    /// jam. Impossible for a valid configuration.
    Closed {
        closing: RelayReach,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopVerdict {
    pub loop_closed: bool,
    pub reason: LoopReason,
}

impl fmt::Display for LoopVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            LoopReason::NoRelays => {
                write!(
                    f,
                    "open: no relays, so the base results meet only in the future of j"
                )
            }
            LoopReason::Open { reaches } => {
                write!(
                    f,
                    "open: for every relay k at least one of a_k, b_k lies outside J-(j). \
                     Were j in J+(a_k) ∩ J+(b_k), the binary condition of relay k would put j \
                     in J+(j_k), so j_k would precede j, contradicting that j_k is spacelike \
                     to j or in its future cone"
                )?;
                for r in reaches {
                    let outside = if r.a_slack < 0.0 { "a" } else { "b" };
                    write!(
                        f,
                        "; relay {}: {outside}_{} outside (slack {})",
                        r.relay,
                        r.relay,
                        r.a_slack.min(r.b_slack)
                    )?;
                }
                Ok(())
            }
            LoopReason::Closed { closing } => write!(
                f,
                "CLOSED: relay {} has both measurements in the causal past of j \
                 (slacks {}, {}; jam slack {})",
                closing.relay, closing.a_slack, closing.b_slack, closing.jam_slack
            ),
        }
    }
}

/// `max_k min(f_{a_k}(j), f_{b_k}(j))`, or `-∞` without relays. The loop
/// closes iff this is non-negative.
pub fn loop_gap(cfg: &RelayConfiguration) -> f64 {
    (0..cfg.relays.len())
        .map(|k| RelayReach::of(cfg, k).gap())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn verdict_unchecked(cfg: &RelayConfiguration) -> LoopVerdict {
    if cfg.relays.is_empty() {
        return LoopVerdict {
            loop_closed: false,
            reason: LoopReason::NoRelays,
        };
    }
    let reaches: Vec<RelayReach> = (0..cfg.relays.len())
        .map(|k| RelayReach::of(cfg, k))
        .collect();
    match reaches.iter().find(|r| r.closes()) {
        Some(&closing) => LoopVerdict {
            loop_closed: true,
            reason: LoopReason::Closed { closing },
        },
        None => LoopVerdict {
            loop_closed: false,
            reason: LoopReason::Open { reaches },
        },
    }
}

/// Decides whether some relay delivers both base-adjacent results into the
/// causal past of the base jam. Membership here is exact (closed cones, no
/// tolerance), while validity uses the tolerant checks, so rounding can only
/// make a configuration invalid, never fake a closed loop.
pub fn loop_check(cfg: &RelayConfiguration) -> Result<LoopVerdict, LoopsError> {
    if let Some(v) = configuration_violation(cfg)? {
        return Err(LoopsError::Invalid(v));
    }
    Ok(verdict_unchecked(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Relays at level `l` read both measurements of every level `l-1`
    /// relay: `2^(depth+1) - 2` relays.
    Tree,
    /// One relay per level, each reading one measurement of the previous.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub topology: Topology,
    /// Half-width of the coordinate region events are drawn from.
    pub extent: f64,
    /// Draws allowed per triple before giving up.
    pub attempts_per_triple: u64,
    /// Ridge samples used to discard hopeless triples before the full check.
    pub probe_samples: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            topology: Topology::Tree,
            extent: 5.0,
            attempts_per_triple: 10_000,
            probe_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStats {
    pub drawn: u64,
    pub accepted: u64,
    pub probe_rejections: u64,
    pub binary_rejections: u64,
    pub relation_rejections: u64,
}

impl SamplingStats {
    pub fn absorb(&mut self, other: &SamplingStats) {
        self.drawn += other.drawn;
        self.accepted += other.accepted;
        self.probe_rejections += other.probe_rejections;
        self.binary_rejections += other.binary_rejections;
        self.relation_rejections += other.relation_rejections;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedConfiguration {
    pub configuration: RelayConfiguration,
    pub stats: SamplingStats,
}

/// Attachments of every relay, in order, for the given shape.
pub fn relay_layout(depth: usize, topology: Topology, rng: &mut impl Rng) -> Vec<Attachment> {
    let mut out = Vec::new();
    if depth == 0 {
        return out;
    }
    match topology {
        Topology::Tree => {
            out.extend([Attachment::BaseA, Attachment::BaseB]);
            let mut level = 0..2;
            for _ in 1..depth {
                let start = out.len();
                for k in level.clone() {
                    out.extend([Attachment::RelayA(k), Attachment::RelayB(k)]);
                }
                level = start..out.len();
            }
        }
        Topology::Chain => {
            out.push(if rng.random() {
                Attachment::BaseA
            } else {
                Attachment::BaseB
            });
            for k in 1..depth {
                out.push(if rng.random() {
                    Attachment::RelayA(k - 1)
                } else {
                    Attachment::RelayB(k - 1)
                });
            }
        }
    }
    out
}

struct Sampler<'o> {
    rng: ChaCha8Rng,
    dimension: usize,
    options: &'o GeneratorOptions,
    stats: SamplingStats,
}

impl Sampler<'_> {
    fn direction(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.dimension)
                .map(|_| self.rng.sample(StandardNormal))
                .collect();
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 1e-6 {
                return v.into_iter().map(|c| c / n).collect();
            }
        }
    }

    fn around(&mut self, centre: &Event, dt: (f64, f64), spread: f64) -> Event {
        let t = centre.t() + self.rng.random_range(dt.0..dt.1);
        let x = centre
            .x()
            .iter()
            .map(|c| c + self.rng.random_range(-spread..spread))
            .collect();
        Event::new(t, x).expect("finite sample")
    }

    /// Strictly inside the future cone of `apex`.
    fn timelike_after(&mut self, apex: &Event) -> Event {
        let e = self.options.extent;
        let tau = self.rng.random_range(0.05 * e..e);
        let speed = self.rng.random_range(0.0..0.95);
        let dir = self.direction();
        let x = apex
            .x()
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + tau * speed * d)
            .collect();
        Event::new(apex.t() + tau, x).expect("finite sample")
    }

    /// Whether (a, b, j) passes the binary condition, using the cheap probe
    /// to discard obvious failures first.
    fn binary_ok(&mut self, a: &Event, b: &Event, j: &Event) -> Result<bool, GeometryError> {
        if a.dimension() > 1 {
            let probe = ridge_slack_probe(a, b, j, self.options.probe_samples)?;
            if probe < -SLACK_TOLERANCE {
                self.stats.probe_rejections += 1;
                return Ok(false);
            }
        }
        let ok = binary_condition(a, b, j)?.holds;
        if !ok {
            self.stats.binary_rejections += 1;
        }
        Ok(ok)
    }

    fn base(&mut self) -> Result<JammerTriple, LoopsError> {
        let e = self.options.extent;
        let origin = Event::new(0.0, vec![0.0; self.dimension])?;
        for _ in 0..self.options.attempts_per_triple {
            self.stats.drawn += 1;
            let a = self.around(&origin, (-e, e), e);
            let b = self.around(&origin, (-e, e), e);
            if causal_relation(&a, &b)? != CausalRelation::Spacelike {
                self.stats.relation_rejections += 1;
                continue;
            }
            let j = self.around(&origin, (-2.0 * e, e), 1.5 * e);
            if self.binary_ok(&a, &b, &j)? {
                self.stats.accepted += 1;
                return Ok(JammerTriple { a, b, j });
            }
        }
        Err(LoopsError::BudgetExhausted(self.stats))
    }

    fn relay(&mut self, parent: &Event, base_jam: &Event) -> Result<JammerTriple, LoopsError> {
        let e = self.options.extent;
        for _ in 0..self.options.attempts_per_triple {
            self.stats.drawn += 1;
            let j = self.timelike_after(parent);
            if causal_relation(parent, &j)? != CausalRelation::TimelikeFuture
                || !allowed_against_base_jam(causal_relation(base_jam, &j)?)
            {
                self.stats.relation_rejections += 1;
                continue;
            }
            // Half of the draws aim the measurements at the base jam's past,
            // where a loop would have to close.
            let (a, b) = if self.rng.random() {
                (
                    self.around(base_jam, (-2.0 * e, 0.5 * e), e),
                    self.around(base_jam, (-2.0 * e, 0.5 * e), e),
                )
            } else {
                (
                    self.around(&j, (-0.5 * e, 1.5 * e), e),
                    self.around(&j, (-0.5 * e, 1.5 * e), e),
                )
            };
            if self.binary_ok(&a, &b, &j)? {
                self.stats.accepted += 1;
                return Ok(JammerTriple { a, b, j });
            }
        }
        Err(LoopsError::BudgetExhausted(self.stats))
    }
}

pub fn random_configuration(
    depth: usize,
    dimension: usize,
    seed: u64,
) -> Result<GeneratedConfiguration, LoopsError> {
    random_configuration_with(depth, dimension, seed, &GeneratorOptions::default())
}

/// Draws a valid configuration of the given depth, one triple at a time.
/// Every relay only constrains itself against its parent and the base jam,
/// so sequential rejection sampling yields exactly the valid configurations.
pub fn random_configuration_with(
    depth: usize,
    dimension: usize,
    seed: u64,
    options: &GeneratorOptions,
) -> Result<GeneratedConfiguration, LoopsError> {
    if depth > MAX_TESTED_DEPTH {
        return Err(LoopsError::UntestedDepth(depth));
    }
    if dimension == 0 || dimension > MAX_SPATIAL_DIMENSION {
        return Err(GeometryError::UnsupportedDimension(dimension).into());
    }
    let mut sampler = Sampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
        dimension,
        options,
        stats: SamplingStats::default(),
    };
    let layout = relay_layout(depth, options.topology, &mut sampler.rng);
    let mut cfg = RelayConfiguration::new(sampler.base()?);
    for (k, reads) in layout.into_iter().enumerate() {
        let parent = cfg
            .attachment_event(reads, k)
            .expect("layout only references earlier relays")
            .clone();
        let triple = sampler.relay(&parent, &cfg.base.j)?;
        cfg.relays.push(Relay { triple, reads });
    }
    debug_assert_eq!(configuration_violation(&cfg), Ok(None));
    Ok(GeneratedConfiguration {
        configuration: cfg,
        stats: sampler.stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryOptions {
    pub steps: usize,
    pub initial_step: f64,
    /// Steps shrink on failure and restart from `initial_step` below this.
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for AdversaryOptions {
    fn default() -> Self {
        AdversaryOptions {
            steps: 1000,
            initial_step: 0.5,
            min_step: 1e-4,
            max_step: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryOutcome {
    pub start_gap: f64,
    pub best_gap: f64,
    pub proposals: usize,
    pub accepted: usize,
    pub best: RelayConfiguration,
    /// Set if some accepted configuration closed a loop.
    pub closed: Option<LoopVerdict>,
}

#[derive(Clone, Copy)]
enum Moved {
    BaseJam,
    RelayA(usize),
    RelayB(usize),
    RelayJam(usize),
    /// The whole relay triple, translated or dilated about its jam; its own
    /// binary condition is unchanged up to rounding.
    Relay(usize),
}

/// Re-checks only the constraints that mention the moved event; the rest
/// held before the move and still do.
fn violation_after_move(
    cfg: &RelayConfiguration,
    moved: Moved,
) -> Result<Option<ConfigViolation>, GeometryError> {
    let readers = |att: Attachment| -> Vec<usize> {
        (0..cfg.relays.len())
            .filter(|&k| cfg.relays[k].reads == att)
            .collect()
    };
    match moved {
        Moved::BaseJam => {
            for k in 0..cfg.relays.len() {
                if let Some(v) = base_jam_violation(cfg, k)? {
                    return Ok(Some(v));
                }
            }
            triple_violation(&cfg.base, TripleId::Base)
        }
        Moved::RelayA(k) | Moved::RelayB(k) => {
            let att = match moved {
                Moved::RelayA(_) => Attachment::RelayA(k),
                _ => Attachment::RelayB(k),
            };
            for child in readers(att) {
                if let Some(v) = attachment_violation(cfg, child)? {
                    return Ok(Some(v));
                }
            }
            triple_violation(&cfg.relays[k].triple, TripleId::Relay(k))
        }
        Moved::Relay(k) => {
            let children = readers(Attachment::RelayA(k))
                .into_iter()
                .chain(readers(Attachment::RelayB(k)));
            for child in children {
                if let Some(v) = attachment_violation(cfg, child)? {
                    return Ok(Some(v));
                }
            }
            violation_after_move(cfg, Moved::RelayJam(k))
        }
        Moved::RelayJam(k) => {
            if let Some(v) = attachment_violation(cfg, k)? {
                return Ok(Some(v));
            }
            if let Some(v) = base_jam_violation(cfg, k)? {
                return Ok(Some(v));
            }
            triple_violation(&cfg.relays[k].triple, TripleId::Relay(k))
        }
    }
}

fn nudge(e: &Event, step: f64, rng: &mut ChaCha8Rng) -> Event {
    let mut jitter = || step * rng.sample::<f64, _>(StandardNormal);
    let t = e.t() + jitter();
    let x = e.x().iter().map(|c| c + jitter()).collect();
    Event::new(t, x).expect("finite nudge")
}

fn translate(e: &Event, by: &Event) -> Event {
    let x = e.x().iter().zip(by.x()).map(|(p, q)| p + q).collect();
    Event::new(e.t() + by.t(), x).expect("finite shift")
}

fn dilate(e: &Event, centre: &Event, factor: f64) -> Event {
    let x = e
        .x()
        .iter()
        .zip(centre.x())
        .map(|(p, c)| c + factor * (p - c))
        .collect();
    Event::new(centre.t() + factor * (e.t() - centre.t()), x).expect("finite dilation")
}

/// Hill-climbs `loop_gap` from a valid configuration, moving one event at a
/// time and keeping only moves that stay valid and do not lower the gap.
pub fn adversarial_search(
    start: RelayConfiguration,
    options: &AdversaryOptions,
    seed: u64,
) -> Result<AdversaryOutcome, LoopsError> {
    if let Some(v) = configuration_violation(&start)? {
        return Err(LoopsError::Invalid(v));
    }
    let start_gap = loop_gap(&start);
    let mut outcome = AdversaryOutcome {
        start_gap,
        best_gap: start_gap,
        proposals: 0,
        accepted: 0,
        best: start,
        closed: None,
    };
    if outcome.best.relays.is_empty() {
        return Ok(outcome);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = options.initial_step;
    for _ in 0..options.steps {
        if step < options.min_step {
            step = options.initial_step;
        }
        let cfg = &outcome.best;
        let target = if rng.random_bool(0.7) {
            (0..cfg.relays.len())
                .max_by(|&p, &q| {
                    RelayReach::of(cfg, p)
                        .gap()
                        .total_cmp(&RelayReach::of(cfg, q).gap())
                })
                .expect("non-empty")
        } else {
            rng.random_range(0..cfg.relays.len())
        };
        // Favour the measurement that currently keeps the relay out of the
        // base jam's past.
        let reach = RelayReach::of(cfg, target);
        let (binding, other) = if reach.a_slack <= reach.b_slack {
            (Moved::RelayA(target), Moved::RelayB(target))
        } else {
            (Moved::RelayB(target), Moved::RelayA(target))
        };
        let moved = match rng.random_range(0..12) {
            0..=2 => binding,
            3 => other,
            4 | 5 => Moved::RelayJam(target),
            6..=9 => Moved::Relay(target),
            _ => Moved::BaseJam,
        };
        let mut next = cfg.clone();
        match moved {
            Moved::BaseJam => next.base.j = nudge(&next.base.j, step, &mut rng),
            Moved::RelayA(k) => {
                next.relays[k].triple.a = nudge(&next.relays[k].triple.a, step, &mut rng)
            }
            Moved::RelayB(k) => {
                next.relays[k].triple.b = nudge(&next.relays[k].triple.b, step, &mut rng)
            }
            Moved::RelayJam(k) => {
                next.relays[k].triple.j = nudge(&next.relays[k].triple.j, step, &mut rng)
            }
            Moved::Relay(k) => {
                let t = &cfg.relays[k].triple;
                next.relays[k].triple = if rng.random() {
                    let shift = nudge(&Event::new(0.0, vec![0.0; t.dimension()])?, step, &mut rng);
                    JammerTriple {
                        a: translate(&t.a, &shift),
                        b: translate(&t.b, &shift),
                        j: translate(&t.j, &shift),
                    }
                } else {
                    let factor = (step * rng.sample::<f64, _>(StandardNormal)).exp();
                    JammerTriple {
                        a: dilate(&t.a, &t.j, factor),
                        b: dilate(&t.b, &t.j, factor),
                        j: t.j.clone(),
                    }
                };
            }
        }
        outcome.proposals += 1;
        let gap = loop_gap(&next);
        if gap < outcome.best_gap || violation_after_move(&next, moved)?.is_some() {
            step *= 0.9;
            continue;
        }
        step = (step * 1.5).min(options.max_step);
        outcome.accepted += 1;
        outcome.best_gap = gap;
        outcome.best = next;
        if gap >= 0.0 {
            // Confirm with the full checks before reporting.
            let verdict = loop_check(&outcome.best)?;
            if verdict.loop_closed {
                outcome.closed = Some(verdict);
                break;
            }
        }
    }
    Ok(outcome)
}

/// Everything needed to replay a closed loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub seed: u64,
    pub depth: usize,
    pub dimension: usize,
    pub adversarial: bool,
    pub configuration: RelayConfiguration,
    pub verdict: LoopVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub seed: u64,
    pub depths: Vec<usize>,
    pub dimensions: Vec<usize>,
    pub configurations_per_cell: usize,
    pub adversarial_runs_per_cell: usize,
    pub generator: GeneratorOptions,
    pub adversary: AdversaryOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            depths: (0..=MAX_TESTED_DEPTH).collect(),
            dimensions: vec![1, 2],
            configurations_per_cell: 1250,
            adversarial_runs_per_cell: 10,
            generator: GeneratorOptions::default(),
            adversary: AdversaryOptions::default(),
        }
    }
}

/// Results for one (depth, dimension) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCell {
    pub depth: usize,
    pub dimension: usize,
    pub configurations: usize,
    pub budget_failures: usize,
    pub adversarial_runs: usize,
    pub adversarial_moves: usize,
    /// Largest loop gap seen; a loop needs this to reach zero. `None` when
    /// no configuration had relays.
    pub best_gap: Option<f64>,
    pub sampling: SamplingStats,
}

impl SearchCell {
    fn raise_gap(&mut self, gap: f64) {
        if gap > f64::NEG_INFINITY {
            self.best_gap = Some(self.best_gap.map_or(gap, |g| g.max(gap)));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub configurations_checked: usize,
    pub adversarial_moves: usize,
    pub closed_loops: Vec<Counterexample>,
    pub cells: Vec<SearchCell>,
    /// Depths beyond this were not searched and are not claimed.
    pub max_tested_depth: usize,
}

/// Random configurations for every requested (depth, dimension), tree and
/// chain shapes alternating, followed by adversarial climbs from the first
/// few of each.
pub fn search_loops(options: &SearchOptions) -> Result<SearchReport, LoopsError> {
    if let Some(&d) = options.depths.iter().find(|&&d| d > MAX_TESTED_DEPTH) {
        return Err(LoopsError::UntestedDepth(d));
    }
    let mut report = SearchReport {
        configurations_checked: 0,
        adversarial_moves: 0,
        closed_loops: Vec::new(),
        cells: Vec::new(),
        max_tested_depth: MAX_TESTED_DEPTH,
    };
    let mut cell_index = 0u64;
    for &dimension in &options.dimensions {
        for &depth in &options.depths {
            let mut cell = SearchCell {
                depth,
                dimension,
                configurations: 0,
                budget_failures: 0,
                adversarial_runs: 0,
                adversarial_moves: 0,
                best_gap: None,
                sampling: SamplingStats::default(),
            };
            let mut starts = Vec::new();
            for i in 0..options.configurations_per_cell {
                let seed = derive_seed(options.seed, (cell_index << 32) | i as u64);
                let generator = GeneratorOptions {
                    topology: if i % 2 == 0 {
                        Topology::Tree
                    } else {
                        Topology::Chain
                    },
                    ..options.generator
                };
                let generated = match random_configuration_with(depth, dimension, seed, &generator)
                {
                    Ok(g) => g,
                    Err(LoopsError::BudgetExhausted(stats)) => {
                        cell.sampling.absorb(&stats);
                        cell.budget_failures += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                cell.sampling.absorb(&generated.stats);
                let cfg = generated.configuration;
                let verdict = loop_check(&cfg)?;
                cell.configurations += 1;
                cell.raise_gap(loop_gap(&cfg));
                if verdict.loop_closed {
                    report.closed_loops.push(Counterexample {
                        seed,
                        depth,
                        dimension,
                        adversarial: false,
                        configuration: cfg.clone(),
                        verdict,
                    });
                }
                if starts.len() < options.adversarial_runs_per_cell {
                    starts.push((seed, cfg));
                }
            }
            for (seed, cfg) in starts {
                let outcome = adversarial_search(cfg, &options.adversary, derive_seed(seed, 1))?;
                cell.adversarial_runs += 1;
                cell.adversarial_moves += outcome.accepted;
                cell.raise_gap(outcome.best_gap);
                if let Some(verdict) = outcome.closed {
                    report.closed_loops.push(Counterexample {
                        seed,
                        depth,
                        dimension,
                        adversarial: true,
                        configuration: outcome.best,
                        verdict,
                    });
                }
            }
            report.configurations_checked += cell.configurations;
            report.adversarial_moves += cell.adversarial_moves;
            report.cells.push(cell);
            cell_index += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1e() -> JammerTriple {
        JammerTriple::new(
            Event::line(0.0, -1.0),
            Event::line(0.0, 1.0),
            Event::line(-1.0, 0.0),
        )
        .unwrap()
    }

    fn with_relay(triple: JammerTriple) -> RelayConfiguration {
        RelayConfiguration {
            base: fig1e(),
            relays: vec![Relay {
                triple,
                reads: Attachment::BaseA,
            }],
        }
    }

    #[test]
    fn bare_base_is_valid_and_open() {
        let cfg = RelayConfiguration::new(fig1e());
        assert!(validate_configuration(&cfg).unwrap());
        let v = loop_check(&cfg).unwrap();
        assert!(!v.loop_closed);
        assert_eq!(v.reason, LoopReason::NoRelays);
        assert_eq!(loop_gap(&cfg), f64::NEG_INFINITY);
    }

    #[test]
    fn single_relay_above_a() {
        // j1 timelike after a = (0,-1); a1 at (1,-1); b1 chosen so the
        // relay's overlap apex (join) sits in J+(j1).
        let j1 = Event::line(0.5, -1.0);
        let a1 = Event::line(1.0, -1.0);
        let b1 = Event::line(1.0, 0.0);
        let cfg = with_relay(JammerTriple::new(a1, b1, j1).unwrap());
        assert_eq!(configuration_violation(&cfg).unwrap(), None);
        let v = loop_check(&cfg).unwrap();
        assert!(!v.loop_closed);
        assert!(v
            .to_string()
            .contains("binary condition of relay k would put j"));

        // Measurements moved left of the jam: the overlap apex escapes J+(j1).
        let shifted = with_relay(
            JammerTriple::new(
                Event::line(1.0, -3.0),
                Event::line(1.0, -2.0),
                Event::line(0.5, -1.0),
            )
            .unwrap(),
        );
        assert_eq!(
            configuration_violation(&shifted).unwrap(),
            Some(ConfigViolation::BinaryCondition {
                triple: TripleId::Relay(0),
                margin: -0.5
            })
        );

        // Same relay with the jam displaced far away in space.
        let far = with_relay(
            JammerTriple::new(
                Event::line(1.0, -1.0),
                Event::line(1.0, 0.0),
                Event::line(0.5, 8.0),
            )
            .unwrap(),
        );
        assert!(!validate_configuration(&far).unwrap());
        assert!(matches!(loop_check(&far), Err(LoopsError::Invalid(_))));
    }

    #[test]
    fn relay_jam_must_not_precede_base_jam() {
        // Base with timelike-ordered measurements: a1's reader can sit
        // before the base jam, which the validator rejects.
        let base = JammerTriple::new(
            Event::line(0.0, 0.0),
            Event::line(3.0, 0.0),
            Event::line(2.0, 0.0),
        )
        .unwrap();
        let relay = JammerTriple::new(
            Event::line(1.5, 0.0),
            Event::line(1.5, 0.0),
            Event::line(1.0, 0.0),
        )
        .unwrap();
        let cfg = RelayConfiguration {
            base,
            relays: vec![Relay {
                triple: relay,
                reads: Attachment::BaseA,
            }],
        };
        assert_eq!(
            configuration_violation(&cfg).unwrap(),
            Some(ConfigViolation::JamInPastOfBaseJam {
                relay: 0,
                relation: CausalRelation::TimelikePast
            })
        );
    }

    #[test]
    fn attachments_must_point_backwards_and_be_timelike() {
        let mut cfg = with_relay(
            JammerTriple::new(
                Event::line(1.0, -1.0),
                Event::line(1.0, 0.0),
                Event::line(0.5, -1.0),
            )
            .unwrap(),
        );
        cfg.relays[0].reads = Attachment::RelayA(0);
        assert_eq!(
            configuration_violation(&cfg).unwrap(),
            Some(ConfigViolation::UnknownAttachment {
                relay: 0,
                reads: Attachment::RelayA(0)
            })
        );
        cfg.relays[0].reads = Attachment::BaseB;
        assert!(matches!(
            configuration_violation(&cfg).unwrap(),
            Some(ConfigViolation::NotTimelikeAfterAttachment { .. })
        ));
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let mut cfg = with_relay(
            JammerTriple::new(
                Event::line(1.0, -1.0),
                Event::line(1.0, 0.0),
                Event::line(0.5, -1.0),
            )
            .unwrap(),
        );
        cfg.relays[0].triple.a = Event::plane(1.0, -1.0, 0.0);
        assert!(matches!(
            validate_configuration(&cfg),
            Err(GeometryError::DimensionMismatch { .. })
        ));
        assert!(JammerTriple::new(
            Event::line(0.0, 0.0),
            Event::plane(0.0, 0.0, 0.0),
            Event::line(0.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn layouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(relay_layout(0, Topology::Tree, &mut rng).is_empty());
        assert_eq!(relay_layout(1, Topology::Tree, &mut rng).len(), 2);
        let tree = relay_layout(3, Topology::Tree, &mut rng);
        assert_eq!(tree.len(), 14);
        assert_eq!(tree[2], Attachment::RelayA(0));
        assert_eq!(tree[13], Attachment::RelayB(5));
        let chain = relay_layout(3, Topology::Chain, &mut rng);
        assert_eq!(chain.len(), 3);
        assert!(matches!(
            chain[2],
            Attachment::RelayA(1) | Attachment::RelayB(1)
        ));
    }

    #[test]
    fn generator_contract() {
        let g = random_configuration(0, 1, 3).unwrap();
        assert!(g.configuration.relays.is_empty());
        let g1 = random_configuration(1, 1, 4).unwrap();
        let g2 = random_configuration(1, 1, 4).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.configuration.relays.len(), 2);
        assert!(validate_configuration(&g1.configuration).unwrap());
        assert!(g1.stats.drawn >= g1.stats.accepted);
        assert_eq!(g1.stats.accepted, 3);
        assert_eq!(
            random_configuration(4, 1, 0),
            Err(LoopsError::UntestedDepth(4))
        );
        assert!(matches!(
            random_configuration(1, 4, 0),
            Err(LoopsError::Geometry(GeometryError::UnsupportedDimension(4)))
        ));
    }

    #[test]
    fn tight_budget_reports_exhaustion() {
        let options = GeneratorOptions {
            attempts_per_triple: 1,
            ..GeneratorOptions::default()
        };
        let mut failures = 0;
        for seed in 0..20 {
            match random_configuration_with(3, 2, seed, &options) {
                Ok(g) => assert!(validate_configuration(&g.configuration).unwrap()),
                Err(LoopsError::BudgetExhausted(stats)) => {
                    failures += 1;
                    assert!(stats.drawn > 0);
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn adversary_keeps_configurations_valid() {
        let g = random_configuration(2, 1, 9).unwrap();
        let out = adversarial_search(g.configuration, &AdversaryOptions::default(), 1).unwrap();
        assert!(out.best_gap >= out.start_gap);
        assert!(out.best_gap < 0.0);
        assert!(out.closed.is_none());
        assert!(validate_configuration(&out.best).unwrap());
        assert_eq!(loop_gap(&out.best), out.best_gap);
    }
}
