//! Adversarial self-play driving lab.
//!
//! A deterministic 2D driving world, a from-scratch dueling double DQN with
//! prioritized replay, and the training/evaluation harness that co-trains a
//! collision-avoiding protagonist against a collision-seeking adversary.

pub mod agent;
pub mod error;
pub mod harness;
pub mod perception;
pub mod qnet;
pub mod replay;
pub mod rewards;
pub mod sim;

pub use error::{Error, Result};
