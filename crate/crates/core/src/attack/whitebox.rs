//! Discriminator-score attack: score every candidate, label the top `N`
//! as members.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{confusion_from_predictions, ConfusionCounts};
use crate::pianoroll::{Dataset, Pianoroll};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub id: u64,
    pub score: f64,
    /// Ground truth; only read when computing the confusion counts.
    pub is_member: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WbAttackResult {
    /// Candidates in rank order (best first).
    pub ranked: Vec<ScoredCandidate>,
    pub predicted_members: Vec<u64>,
    pub confusion: ConfusionCounts,
}

/// Score descending, then id ascending.
pub fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

pub fn rank_and_label(scored: &[ScoredCandidate], n_members: usize) -> Result<WbAttackResult> {
    if n_members == 0 || n_members > scored.len() {
        return Err(Error::Config(format!(
            "cannot label {n_members} of {} candidates as members",
            scored.len()
        )));
    }
    let mut seen = HashSet::with_capacity(scored.len());
    for c in scored {
        if !seen.insert(c.id) {
            return Err(Error::DuplicateCandidateId(c.id));
        }
        if !c.score.is_finite() {
            return Err(Error::NonFiniteScore(c.id));
        }
    }
    let mut ranked = scored.to_vec();
    ranked.sort_by(rank_order);
    let predicted_members: Vec<u64> = ranked[..n_members].iter().map(|c| c.id).collect();

    let all: Vec<u64> = ranked.iter().map(|c| c.id).collect();
    let truth: Vec<u64> = ranked.iter().filter(|c| c.is_member).map(|c| c.id).collect();
    let confusion = confusion_from_predictions(&predicted_members, &truth, &all)?;
    Ok(WbAttackResult {
        ranked,
        predicted_members,
        confusion,
    })
}

/// Scores members and non-members with `scorer` (in parallel) and labels
/// the top `|members|` as predicted members.
pub fn run_whitebox<F>(scorer: F, members: &Dataset, nonmembers: &Dataset) -> Result<WbAttackResult>
where
    F: Fn(u64, &Pianoroll) -> Result<f64> + Sync,
{
    if members.shape() != nonmembers.shape() {
        return Err(Error::ShapeMismatch);
    }
    let candidates: Vec<(u64, &Pianoroll, bool)> = members
        .iter()
        .map(|(id, r)| (id, r, true))
        .chain(nonmembers.iter().map(|(id, r)| (id, r, false)))
        .collect();
    let scored = candidates
        .par_iter()
        .map(|&(id, roll, is_member)| {
            let score = scorer(id, roll).map_err(|e| Error::ScorerFailed {
                id,
                source: Box::new(e),
            })?;
            Ok(ScoredCandidate { id, score, is_member })
        })
        .collect::<Result<Vec<_>>>()?;
    rank_and_label(&scored, members.len())
}
