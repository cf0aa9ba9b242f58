//! Learning to sequence parameterized multi-robot behaviors.
//!
//! A small library of swarm behaviors (formations, cyclic pursuit, leader
//! following, coverage) is driven by a high-level Q-learning policy that picks
//! which behavior to run next, while each behavior's continuous parameters are
//! tuned online by projected gradient descent on a mission-specific cost.
//!
//! Start with [`experiment`] for end-to-end training and evaluation, or
//! [`runner::run_dwell`] to drive a single behavior.

pub mod behavior;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod learning;
pub mod runner;

pub use behavior::{
    control, default_library, energy, BehaviorId, BehaviorLibrary, BehaviorParams, BehaviorSpec,
    ParamSpace,
};
pub use env::{BoxEnv, ConvoyEnv, Mission, MissionKind, Observation, TransportWaypoint};
pub use error::{Error, Result};
pub use geometry::{centroid, euler_step, Arena, EnsembleState, InteractionGraph, Vec2};
pub use learning::{LearningConfig, ParamMemory, QTable};
pub use runner::{EpisodeLog, Interrupt, RunConfig, SwitchEvent};
