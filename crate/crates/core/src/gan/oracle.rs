//! Controllable stand-ins for a trained GAN, with known leakage.
//!
//! [`OracleGenerator`] replays training rolls with probability `p` (optionally
//! corrupted by independent bit flips) and otherwise draws fresh population
//! samples. [`OracleDiscriminator`] adds a fixed margin to member scores.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pianoroll::{synth_sample, Dataset, Pianoroll, StyleParams};

#[derive(Clone, Debug)]
pub struct OracleGenerator {
    memorization_rate: f64,
    flip_noise: f64,
    training_rolls: Dataset,
    population_style: StyleParams,
}

impl OracleGenerator {
    pub fn new(memorization_rate: f64, flip_noise: f64, training_rolls: Dataset, population_style: StyleParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&memorization_rate) || !(0.0..=1.0).contains(&flip_noise) {
            return Err(Error::Config("oracle p and sigma must lie in [0, 1]".into()));
        }
        population_style.validate()?;
        if training_rolls.shape().pitches < 12 {
            return Err(Error::PitchRangeTooSmall);
        }
        Ok(OracleGenerator {
            memorization_rate,
            flip_noise,
            training_rolls,
            population_style,
        })
    }

    pub fn memorization_rate(&self) -> f64 {
        self.memorization_rate
    }

    pub fn flip_noise(&self) -> f64 {
        self.flip_noise
    }

    pub fn training_rolls(&self) -> &Dataset {
        &self.training_rolls
    }

    /// One output, fully determined by `seed`.
    pub fn generate(&self, seed: u64) -> Pianoroll {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if rng.random_bool(self.memorization_rate) {
            let rolls = self.training_rolls.rolls();
            let mut roll = rolls[rng.random_range(0..rolls.len())].clone();
            if self.flip_noise > 0.0 {
                for k in 0..roll.shape().cells() {
                    if rng.random_bool(self.flip_noise) {
                        roll.set_flat(k, !roll.get_flat(k));
                    }
                }
            }
            roll
        } else {
            // Inputs were validated in `new`.
            synth_sample(&mut rng, *self.training_rolls.shape(), &self.population_style)
                .expect("validated oracle population sampler")
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleDiscriminator {
    margin: f64,
    score_noise: f64,
    member_ids: HashSet<u64>,
}

impl OracleDiscriminator {
    pub fn new(margin: f64, score_noise: f64, member_ids: impl IntoIterator<Item = u64>) -> Result<Self> {
        if !(margin.is_finite() && margin >= 0.0 && score_noise.is_finite() && score_noise >= 0.0) {
            return Err(Error::Config("oracle margin and tau must be finite and >= 0".into()));
        }
        Ok(OracleDiscriminator {
            margin,
            score_noise,
            member_ids: member_ids.into_iter().collect(),
        })
    }

    /// `margin · 1[id ∈ members] + N(0, τ²)`, with the noise drawn from a
    /// stream keyed by `(seed, id)`.
    pub fn score(&self, id: u64, seed: u64) -> f64 {
        let base = if self.member_ids.contains(&id) { self.margin } else { 0.0 };
        if self.score_noise == 0.0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        let noise: f64 = rng.sample(StandardNormal);
        base + self.score_noise * noise
    }
}
