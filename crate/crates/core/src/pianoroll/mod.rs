//! Binary multi-track pianorolls, datasets of them, and dataset splitting.
//!
//! A roll is a `tracks × bars × steps × pitches` grid of on/off cells. Cells
//! are addressed in row-major `(track, bar, step, pitch)` order everywhere:
//! in [`Pianoroll::to_flat`], in the bit-packed file format and in the
//! in-memory word layout.

mod io;
mod synth;

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{decode_dataset, encode_dataset, read_dataset, sidecar_path, write_dataset};
pub use synth::{synth_generate, synth_sample, StyleParams};

/// Upper bound on cells per roll.
pub const MAX_CELLS: usize = 1 << 24;

/// MIDI pitch of pitch index 0 unless configured otherwise (C1).
pub const DEFAULT_BASE_MIDI_PITCH: i32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PianorollShape {
    pub tracks: usize,
    pub bars: usize,
    pub steps_per_bar: usize,
    pub pitches: usize,
    #[serde(default = "default_base_pitch")]
    pub base_midi_pitch: i32,
}

fn default_base_pitch() -> i32 {
    DEFAULT_BASE_MIDI_PITCH
}

impl PianorollShape {
    pub fn new(tracks: usize, bars: usize, steps_per_bar: usize, pitches: usize) -> Result<Self> {
        Self::with_base_pitch(tracks, bars, steps_per_bar, pitches, DEFAULT_BASE_MIDI_PITCH)
    }

    pub fn with_base_pitch(
        tracks: usize,
        bars: usize,
        steps_per_bar: usize,
        pitches: usize,
        base_midi_pitch: i32,
    ) -> Result<Self> {
        let shape = PianorollShape {
            tracks,
            bars,
            steps_per_bar,
            pitches,
            base_midi_pitch,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.tracks, self.bars, self.steps_per_bar, self.pitches];
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!("all dimensions must be >= 1, got {dims:?}")));
        }
        let cells = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c <= MAX_CELLS);
        if cells.is_none() {
            return Err(Error::InvalidShape(format!("{dims:?} exceeds {MAX_CELLS} cells")));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.tracks * self.cells_per_track()
    }

    pub fn cells_per_track(&self) -> usize {
        self.bars * self.steps_per_bar * self.pitches
    }

    /// Number of `(track, bar, step)` time slots.
    pub fn slots(&self) -> usize {
        self.tracks * self.bars * self.steps_per_bar
    }

    #[inline]
    pub fn index(&self, track: usize, bar: usize, step: usize, pitch: usize) -> usize {
        ((track * self.bars + bar) * self.steps_per_bar + step) * self.pitches + pitch
    }

    pub fn checked_index(&self, track: usize, bar: usize, step: usize, pitch: usize) -> Result<usize> {
        if track >= self.tracks || bar >= self.bars || step >= self.steps_per_bar || pitch >= self.pitches {
            return Err(Error::IndexOutOfRange(format!(
                "({track}, {bar}, {step}, {pitch}) outside {}x{}x{}x{}",
                self.tracks, self.bars, self.steps_per_bar, self.pitches
            )));
        }
        Ok(self.index(track, bar, step, pitch))
    }

    /// Pitch class (0 = C) of a pitch index.
    pub fn pitch_class(&self, pitch: usize) -> usize {
        (self.base_midi_pitch + pitch as i32).rem_euclid(12) as usize
    }
}

/// A binary pianoroll, stored as packed 64-bit words (cell `k` is bit
/// `k % 64` of word `k / 64`). Padding bits past the last cell are always zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pianoroll {
    shape: PianorollShape,
    words: Vec<u64>,
}

impl Pianoroll {
    pub fn zeros(shape: PianorollShape) -> Self {
        Pianoroll {
            shape,
            words: vec![0; shape.cells().div_ceil(64)],
        }
    }

    pub fn ones(shape: PianorollShape) -> Self {
        let mut roll = Self::zeros(shape);
        for k in 0..shape.cells() {
            roll.set_flat(k, true);
        }
        roll
    }

    pub fn shape(&self) -> &PianorollShape {
        &self.shape
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get_flat(&self, k: usize) -> bool {
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_flat(&mut self, k: usize, on: bool) {
        debug_assert!(k < self.shape.cells());
        let mask = 1u64 << (k % 64);
        if on {
            self.words[k / 64] |= mask;
        } else {
            self.words[k / 64] &= !mask;
        }
    }

    pub fn get(&self, track: usize, bar: usize, step: usize, pitch: usize) -> Result<bool> {
        Ok(self.get_flat(self.shape.checked_index(track, bar, step, pitch)?))
    }

    pub fn set(&mut self, track: usize, bar: usize, step: usize, pitch: usize, on: bool) -> Result<()> {
        let k = self.shape.checked_index(track, bar, step, pitch)?;
        self.set_flat(k, on);
        Ok(())
    }

    pub fn active_cells(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of cells that differ between two rolls of the same shape.
    pub fn hamming(&self, other: &Pianoroll) -> Result<usize> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch);
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Raw vectorization: one `0.0`/`1.0` entry per cell in row-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        (0..self.shape.cells())
            .map(|k| if self.get_flat(k) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Inverse of [`Pianoroll::to_flat`]. Every value must be exactly 0 or 1.
    pub fn from_flat(shape: PianorollShape, values: &[f64]) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.cells() {
            return Err(Error::DimensionMismatch {
                expected: shape.cells(),
                actual: values.len(),
            });
        }
        let mut roll = Self::zeros(shape);
        for (k, &v) in values.iter().enumerate() {
            if v == 1.0 {
                roll.set_flat(k, true);
            } else if v != 0.0 {
                return Err(Error::NonBinary(v));
            }
        }
        Ok(roll)
    }

    /// Counts of active cells per pitch class at one `(track, bar, step)`.
    pub fn pitch_class_profile(&self, track: usize, bar: usize, step: usize) -> Result<[f64; 12]> {
        let start = self.shape.checked_index(track, bar, step, 0)?;
        Ok(self.profile_at(start))
    }

    /// Profile of the slot whose first cell is at flat index `start`.
    pub(crate) fn profile_at(&self, start: usize) -> [f64; 12] {
        let mut profile = [0.0; 12];
        for p in 0..self.shape.pitches {
            if self.get_flat(start + p) {
                profile[self.shape.pitch_class(p)] += 1.0;
            }
        }
        profile
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    shape: PianorollShape,
    rolls: Vec<Pianoroll>,
    ids: Vec<u64>,
    style: Option<StyleParams>,
}

impl Dataset {
    /// Builds a dataset with ids `0..rolls.len()`.
    pub fn from_rolls(shape: PianorollShape, rolls: Vec<Pianoroll>) -> Result<Self> {
        let ids = (0..rolls.len() as u64).collect();
        Self::with_ids(shape, rolls, ids)
    }

    /// Builds a dataset with explicit identifiers, e.g. a subset that keeps
    /// the ids of the dataset it was drawn from.
    pub fn with_ids(shape: PianorollShape, rolls: Vec<Pianoroll>, ids: Vec<u64>) -> Result<Self> {
        shape.validate()?;
        if rolls.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if ids.len() != rolls.len() {
            return Err(Error::DimensionMismatch {
                expected: rolls.len(),
                actual: ids.len(),
            });
        }
        if rolls.iter().any(|r| *r.shape() != shape) {
            return Err(Error::ShapeMismatch);
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(&dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Metadata(format!("duplicate roll id {dup}")));
        }
        Ok(Dataset {
            shape,
            rolls,
            ids,
            style: None,
        })
    }

    pub fn with_style(mut self, style: Option<StyleParams>) -> Self {
        self.style = style;
        self
    }

    pub fn shape(&self) -> &PianorollShape {
        &self.shape
    }

    pub fn rolls(&self) -> &[Pianoroll] {
        &self.rolls
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn style(&self) -> Option<&StyleParams> {
        self.style.as_ref()
    }

    pub fn len(&self) -> usize {
        self.rolls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rolls.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Pianoroll)> {
        self.ids.iter().copied().zip(&self.rolls)
    }

    /// Subset by positions (not ids), preserving ids and style.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let rolls = positions.iter().map(|&i| self.rolls[i].clone()).collect();
        let ids = positions.iter().map(|&i| self.ids[i]).collect();
        Ok(Self::with_ids(self.shape, rolls, ids)?.with_style(self.style.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// Train size for a dataset of `n` rolls; the remainder goes to test.
    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).floor() as usize
    }
}

/// Uniformly random train/test partition. Both halves keep source order and ids.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 || !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::DegenerateSplit);
    }
    let train_n = spec.train_size(n);
    if train_n == 0 || train_n >= n {
        return Err(Error::DegenerateSplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; n];
    for i in index::sample(&mut rng, n, train_n) {
        in_train[i] = true;
    }
    let (train_pos, test_pos): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
    Ok((dataset.subset(&train_pos)?, dataset.subset(&test_pos)?))
}
