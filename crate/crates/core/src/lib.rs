//! Hierarchical compressive-sensing data aggregation for wireless sensor
//! networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`deployment`]: random node placement, quadtree clustering, head election.
//! * [`field`]: sensed field samples and the DCT sparsification pipeline.
//! * [`cs`]: seeded Gaussian measurement operators and CoSaMP recovery.
//! * [`protocols`]: HDACS and the NCS/HCS baselines over a cluster tree.
//! * [`analytics`]: closed-form measurement/energy expressions, their
//!   summation oracles, and per-node energy accounting.
//! * [`experiment`] and [`report`]: config-driven runs, sweeps, and the
//!   delimited-text outputs.

pub mod analytics;
pub mod cs;
pub mod deployment;
pub mod experiment;
pub mod field;
pub mod protocols;
pub mod report;
pub mod seed;
