//! Register-log analysis for soft-failure detection in instrumented device
//! drivers.
//!
//! The pipeline: parse driver logs ([`logmodel`]), abstract snapshots into
//! states and build execution graphs ([`stategraph`]), compare baseline and
//! ESD-exposed runs ([`diffstats`]), and score logs with per-state weights
//! ([`weights`]). [`synthcorpus`] generates seeded labeled corpora.

pub mod logmodel;
pub mod par;
pub mod stategraph;
pub mod diffstats;
pub mod rng;
pub mod weights;
pub mod synthcorpus;
