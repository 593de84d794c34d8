//! Simulator and analysis toolkit for constrained sports group draws.
//!
//! The library covers the full pipeline for studying how a sequential,
//! constraint-respecting group draw (the "skip" procedure used by major
//! tournament organisers) deviates from a uniform draw:
//!
//! * [`model`] — teams, confederations, instances, and assignment state;
//! * [`constraints`] — validity checks for full and partial assignments;
//! * [`feasibility`] — an exact "can this partial draw still be completed?"
//!   decision procedure, plus a deliberately naive backtracking reference;
//! * [`draw`] — the skip engine, unconstrained and rejection samplers, and
//!   ex-post group labelling;
//! * [`exact`] — exhaustive enumeration of pair probabilities on small
//!   instances, and Monte Carlo pair-probability estimation;
//! * [`metrics`] — non-uniformity measures and prohibited-pair counting;
//! * [`experiments`] — multi-procedure sweeps, deadlock and acceptance-rate
//!   estimation, and the backtracking-intractability demonstration.

pub mod constraints;
pub mod draw;
pub mod exact;
pub mod experiments;
pub mod feasibility;
pub mod metrics;
pub mod model;
pub mod rational;
