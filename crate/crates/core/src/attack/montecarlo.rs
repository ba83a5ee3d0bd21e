//! Black-box Monte Carlo membership inference over a stash of generated
//! samples.
//!
//! A candidate `x` scores the fraction of `n` stash samples within `ε` of it.
//! Each trial draws `M` training and `M` held-out records, sets `ε` from the
//! pooled candidate-to-sample distances, ranks the `2M` candidates and keeps
//! the top `M`. Single MI reports the share of training records in that set;
//! Set MI asks whether training records form its strict majority.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{feature_distance, DistanceMetric, Features};
use crate::error::{Error, Result};
use crate::pianoroll::{Dataset, Pianoroll};

/// Rule for picking the distance threshold from a pool of distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EpsilonHeuristic {
    Median,
    /// Value at ascending rank `ceil(q·K)` (at least 1).
    Percentile(f64),
}

impl EpsilonHeuristic {
    pub const P1: EpsilonHeuristic = EpsilonHeuristic::Percentile(0.01);
    pub const P0_1: EpsilonHeuristic = EpsilonHeuristic::Percentile(0.001);
    pub const P0_01: EpsilonHeuristic = EpsilonHeuristic::Percentile(0.0001);

    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonHeuristic::Percentile(q) if !(q > 0.0 && q < 1.0) => {
                Err(Error::Config(format!("percentile {q} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    /// 1-based ascending rank selected from a pool of `k` values.
    pub fn rank(&self, k: usize) -> usize {
        let raw = match *self {
            EpsilonHeuristic::Median => k.div_ceil(2),
            EpsilonHeuristic::Percentile(q) => {
                let x = q * k as f64;
                // Absorb representation error so that e.g. 0.01 · 1000 is rank 10.
                let near = x.round();
                if (x - near).abs() <= 1e-9 * near.max(1.0) {
                    near as usize
                } else {
                    x.ceil() as usize
                }
            }
        };
        raw.clamp(1, k)
    }
}

impl fmt::Display for EpsilonHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonHeuristic::Median => f.write_str("median"),
            EpsilonHeuristic::Percentile(q) => write!(f, "p:{q}"),
        }
    }
}

impl FromStr for EpsilonHeuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let h = match s {
            "median" => EpsilonHeuristic::Median,
            _ => {
                let q = s
                    .strip_prefix("p:")
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown heuristic {s:?} (expected median or p:Q)")))?;
                EpsilonHeuristic::Percentile(q)
            }
        };
        h.validate()?;
        Ok(h)
    }
}

impl TryFrom<String> for EpsilonHeuristic {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EpsilonHeuristic> for String {
    fn from(h: EpsilonHeuristic) -> String {
        h.to_string()
    }
}

pub fn epsilon_from_heuristic(distances: &[f64], heuristic: EpsilonHeuristic) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("no distances for the epsilon heuristic"));
    }
    heuristic.validate()?;
    let rank = heuristic.rank(distances.len());
    let mut pool = distances.to_vec();
    let (_, nth, _) = pool.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*nth)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stash {
    pub rolls: Vec<Pianoroll>,
    pub provenance: String,
    pub seed: u64,
}

impl Stash {
    pub fn new(rolls: Vec<Pianoroll>, provenance: impl Into<String>, seed: u64) -> Result<Self> {
        let first = rolls.first().ok_or(Error::EmptyInput("stash"))?;
        if rolls.iter().any(|r| r.shape() != first.shape()) {
            return Err(Error::ShapeMismatch);
        }
        Ok(Stash {
            rolls,
            provenance: provenance.into(),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.rolls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rolls.is_empty()
    }
}

/// Per-sample seeds: a ChaCha stream keyed by `seed`.
pub fn sample_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

/// Fills a stash by calling `sample_fn` with `size` derived seeds (in parallel).
pub fn build_stash<F>(sample_fn: F, size: usize, seed: u64, provenance: impl Into<String>) -> Result<Stash>
where
    F: Fn(u64) -> Result<Pianoroll> + Sync,
{
    if size == 0 {
        return Err(Error::EmptyInput("stash size must be >= 1"));
    }
    let rolls = sample_seeds(seed, size)
        .into_par_iter()
        .map(&sample_fn)
        .collect::<Result<Vec<_>>>()?;
    Stash::new(rolls, provenance, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub stash_size: usize,
    /// Stash samples compared against each candidate.
    pub n_per_query: usize,
    pub heuristic: EpsilonHeuristic,
    pub metric: DistanceMetric,
    /// Records drawn from each of the training and held-out sets per trial.
    pub subset_size: usize,
    pub trials: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stash_size == 0 || self.n_per_query == 0 || self.subset_size == 0 || self.trials == 0 {
            return Err(Error::Config("stash_size, n_per_query, subset_size and trials must be >= 1".into()));
        }
        if self.n_per_query > self.stash_size {
            return Err(Error::Config(format!(
                "n_per_query {} exceeds stash_size {}",
                self.n_per_query, self.stash_size
            )));
        }
        self.heuristic.validate()
    }
}

fn draw_indices(stash_len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > stash_len {
        return Err(Error::InsufficientRecords {
            needed: n,
            available: stash_len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, stash_len, n).into_vec())
}

/// Fraction of `n_per_query` stash samples (drawn without replacement,
/// keyed by `seed`) within `epsilon` of `candidate`.
pub fn mc_score(candidate: &Pianoroll, stash: &Stash, config: &McConfig, epsilon: f64, seed: u64) -> Result<f64> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::Config("epsilon must be >= 0".into()));
    }
    let drawn = draw_indices(stash.len(), config.n_per_query, seed)?;
    let cand = config.metric.features(candidate);
    let mut hits = 0usize;
    for i in &drawn {
        let g = &stash.rolls[*i];
        if g.shape() != candidate.shape() {
            return Err(Error::ShapeMismatch);
        }
        if feature_distance(&config.metric.features(g), &cand) <= epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / drawn.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McTrial {
    pub epsilon: f64,
    pub single_mi_accuracy: f64,
    /// Training records among the top `M`.
    pub train_in_top: usize,
    pub set_mi_correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub single_mi_accuracy: f64,
    pub set_mi_correct_fraction: f64,
    pub trials: Vec<McTrial>,
}

struct ScoredRecord {
    id: u64,
    is_train: bool,
    hits: usize,
    mean_distance: f64,
}

/// Runs `config.trials` trials and reports both Single MI and Set MI.
pub fn run_mc(train: &Dataset, test: &Dataset, stash: &Stash, config: &McConfig) -> Result<McResult> {
    config.validate()?;
    let m = config.subset_size;
    for d in [train, test] {
        if d.len() < m {
            return Err(Error::InsufficientRecords {
                needed: m,
                available: d.len(),
            });
        }
    }
    if train.shape() != test.shape() || stash.rolls[0].shape() != train.shape() {
        return Err(Error::ShapeMismatch);
    }
    let train_ids: HashSet<u64> = train.ids().iter().copied().collect();
    if let Some(&dup) = test.ids().iter().find(|id| train_ids.contains(id)) {
        return Err(Error::DuplicateCandidateId(dup));
    }
    if config.n_per_query > stash.len() {
        return Err(Error::InsufficientRecords {
            needed: config.n_per_query,
            available: stash.len(),
        });
    }

    let stash_features: Vec<Features> = stash.rolls.par_iter().map(|r| config.metric.features(r)).collect();
    let n = config.n_per_query;

    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial as u64);
        let train_pick = index::sample(&mut rng, train.len(), m).into_vec();
        let test_pick = index::sample(&mut rng, test.len(), m).into_vec();
        let candidates: Vec<(u64, &Pianoroll, bool, u64)> = train_pick
            .iter()
            .map(|&i| (train.ids()[i], &train.rolls()[i], true))
            .chain(test_pick.iter().map(|&i| (test.ids()[i], &test.rolls()[i], false)))
            .map(|(id, roll, is_train)| (id, roll, is_train, rng.random::<u64>()))
            .collect();

        // Distances to each candidate's own draw from the stash.
        let distances = candidates
            .par_iter()
            .map(|&(_, roll, _, seed)| {
                let cand = config.metric.features(roll);
                let drawn = draw_indices(stash.len(), n, seed)?;
                Ok(drawn.iter().map(|&i| feature_distance(&stash_features[i], &cand)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;

        let pool: Vec<f64> = distances.iter().flatten().copied().collect();
        let epsilon = epsilon_from_heuristic(&pool, config.heuristic)?;

        let mut scored: Vec<ScoredRecord> = candidates
            .iter()
            .zip(&distances)
            .map(|(&(id, _, is_train, _), ds)| ScoredRecord {
                id,
                is_train,
                hits: ds.iter().filter(|&&d| d <= epsilon).count(),
                mean_distance: ds.iter().sum::<f64>() / n as f64,
            })
            .collect();
        // Hit counts share the denominator n, so they order like the scores.
        scored.sort_by(|a, b| {
            b.hits
                .cmp(&a.hits)
                .then(a.mean_distance.total_cmp(&b.mean_distance))
                .then(a.id.cmp(&b.id))
        });
        let train_in_top = scored[..m].iter().filter(|r| r.is_train).count();
        trials.push(McTrial {
            epsilon,
            single_mi_accuracy: train_in_top as f64 / m as f64,
            train_in_top,
            // Ties (equal contributions) count as incorrect.
            set_mi_correct: 2 * train_in_top > m,
        });
    }

    let r = trials.len() as f64;
    Ok(McResult {
        single_mi_accuracy: trials.iter().map(|t| t.single_mi_accuracy).sum::<f64>() / r,
        set_mi_correct_fraction: trials.iter().filter(|t| t.set_mi_correct).count() as f64 / r,
        trials,
    })
}

pub fn single_mi(train: &Dataset, test: &Dataset, stash: &Stash, config: &McConfig) -> Result<f64> {
    Ok(run_mc(train, test, stash, config)?.single_mi_accuracy)
}

pub fn set_mi(train: &Dataset, test: &Dataset, stash: &Stash, config: &McConfig) -> Result<f64> {
    Ok(run_mc(train, test, stash, config)?.set_mi_correct_fraction)
}
