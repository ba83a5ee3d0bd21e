//! Membership-inference auditing for generative multi-track pianoroll models.
//!
//! The crate trains a small Composer-style GAN on binary pianorolls, attacks
//! its checkpoints with a white-box discriminator-ranking attack and a
//! black-box Monte Carlo distance attack, and reports confusion-matrix
//! metrics per checkpoint. Oracle models with a known amount of leakage let
//! the attacks themselves be validated.

pub mod attack;
pub mod error;
pub mod gan;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod pianoroll;

pub use error::{Error, Result};
