//! Simulation and verification toolkit for EPR-Bohm experiments subjected to
//! a hypothetical non-local jammer.
//!
//! * [`minkowski`]: events, causal relations, boosts and the cone-overlap
//!   containment check (the binary condition).
//! * [`quantum`]: small pure-state engine, singlet correlations, CHSH and the
//!   third-party no-signaling check.
//! * [`correlations`]: Monte-Carlo trials with jamming, count tables and the
//!   marginal (unary) signaling test.
//! * [`loops`]: relay configurations of several jammers and the search for
//!   causal loops.

pub mod correlations;
pub mod loops;
pub mod minkowski;
pub mod quantum;
