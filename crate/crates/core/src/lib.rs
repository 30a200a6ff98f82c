//! Analysis toolkit for collaborative group-work sessions.
//!
//! Models per-team session data as transferable-utility cooperative games
//! (Shapley values, core membership, stability) and fits two-level
//! random-intercept regression models with variance partitioning, AIC/BIC and
//! likelihood-ratio comparisons. A `groupwork` binary drives the full
//! analysis pipeline over CSV session files.

pub mod builder;
pub mod cli;
pub mod coalition;
pub mod conf;
pub mod core_lp;
pub mod dataset;
pub mod game;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use builder::{GameConstructionConfig, GameMode, StabilityReport};
pub use coalition::Coalition;
pub use core_lp::CoreStatus;
pub use dataset::{SessionDataset, StudentRecord};
pub use game::{GameProperty, PayoffVector, PropertyWitness, TUGame};
pub use model::{MixedModelFit, MixedModelSpec, ModelComparison, ModelFrame};
pub use pipeline::{PipelineConfig, PipelineReport};
pub use synth::GenConfig;
