//! Synthetic tonal pianorolls: a two-chord progression on track 0, a periodic
//! bass rhythm on track 1, and transposed copies of track 0 on any further
//! tracks. A few random in-scale ornament notes per bar keep rolls distinct.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Pianoroll, PianorollShape};
use crate::error::{Error, Result};

const MAJOR_TRIAD: [usize; 3] = [0, 4, 7];
const MINOR_TRIAD: [usize; 3] = [0, 3, 7];
const MAJOR_SCALE: [usize; 7] = [0, 2, 4, 5, 7, 9, 11];

/// Second chord of the progression: (semitones above the root, is_minor).
const SECOND_CHORDS: [(usize, bool); 4] = [(5, false), (7, false), (9, true), (2, true)];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleParams {
    /// Candidate bass-rhythm periods, in steps.
    pub rhythm_periods: Vec<usize>,
    /// Extra in-scale notes placed on track 0 per bar.
    pub ornaments_per_bar: usize,
    /// Transposition applied per track beyond track 1.
    pub transpose_semitones: i32,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams {
            rhythm_periods: vec![2, 3, 4],
            ornaments_per_bar: 2,
            transpose_semitones: 12,
        }
    }
}

impl StyleParams {
    pub fn validate(&self) -> Result<()> {
        if self.rhythm_periods.is_empty() || self.rhythm_periods.contains(&0) {
            return Err(Error::Config("rhythm_periods must be non-empty and >= 1".into()));
        }
        Ok(())
    }
}

/// `count` rolls from a single ChaCha stream seeded by `seed`.
pub fn synth_generate(seed: u64, count: usize, shape: PianorollShape, style: &StyleParams) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    check_inputs(&shape, style)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rolls = (0..count).map(|_| sample_unchecked(&mut rng, shape, style)).collect();
    Ok(Dataset::from_rolls(shape, rolls)?.with_style(Some(style.clone())))
}

/// One synthetic roll drawn from `rng`.
pub fn synth_sample<R: Rng + ?Sized>(rng: &mut R, shape: PianorollShape, style: &StyleParams) -> Result<Pianoroll> {
    check_inputs(&shape, style)?;
    Ok(sample_unchecked(rng, shape, style))
}

fn check_inputs(shape: &PianorollShape, style: &StyleParams) -> Result<()> {
    shape.validate()?;
    if shape.pitches < 12 {
        return Err(Error::PitchRangeTooSmall);
    }
    style.validate()
}

/// Pitch index of pitch class `pc` in octave `octave` above the lowest one,
/// falling back to the lowest octave when that would leave the range.
fn place(shape: &PianorollShape, pc: usize, octave: usize) -> usize {
    let lowest = (pc as i32 - shape.base_midi_pitch).rem_euclid(12) as usize;
    let idx = lowest + 12 * octave;
    if idx < shape.pitches {
        idx
    } else {
        lowest
    }
}

/// Moves `target` by octaves into `[0, pitches)`; needs `pitches >= 12`.
fn fit_pitch(mut target: i64, pitches: usize) -> usize {
    let p = pitches as i64;
    while target >= p {
        target -= 12;
    }
    while target < 0 {
        target += 12;
    }
    target as usize
}

fn sample_unchecked<R: Rng + ?Sized>(rng: &mut R, shape: PianorollShape, style: &StyleParams) -> Pianoroll {
    let mut roll = Pianoroll::zeros(shape);
    let octaves = shape.pitches.div_ceil(12);
    let steps = shape.steps_per_bar;
    let half = steps.div_ceil(2);

    let root = rng.random_range(0..12usize);
    let (offset, minor) = SECOND_CHORDS[rng.random_range(0..SECOND_CHORDS.len())];
    let second_root = (root + offset) % 12;
    let voicing = rng.random_range(0..octaves);
    let period = style.rhythm_periods[rng.random_range(0..style.rhythm_periods.len())];
    let phase = rng.random_range(0..period);

    let chord = |r: usize, minor: bool| -> Vec<usize> {
        let triad = if minor { MINOR_TRIAD } else { MAJOR_TRIAD };
        triad.iter().map(|&iv| place(&shape, (r + iv) % 12, voicing)).collect()
    };
    let first = chord(root, false);
    let second = chord(second_root, minor);

    for bar in 0..shape.bars {
        for step in 0..steps {
            let tones = if step < half { &first } else { &second };
            for &p in tones {
                roll.set_flat(shape.index(0, bar, step, p), true);
            }
        }
        for _ in 0..style.ornaments_per_bar {
            let step = rng.random_range(0..steps);
            let pc = (root + MAJOR_SCALE[rng.random_range(0..MAJOR_SCALE.len())]) % 12;
            let p = place(&shape, pc, rng.random_range(0..octaves));
            roll.set_flat(shape.index(0, bar, step, p), true);
        }
    }

    if shape.tracks >= 2 {
        for bar in 0..shape.bars {
            for step in 0..steps {
                if (step + period - phase).is_multiple_of(period) {
                    let bass = if step < half { root } else { second_root };
                    roll.set_flat(shape.index(1, bar, step, place(&shape, bass, 0)), true);
                }
            }
        }
    }

    for track in 2..shape.tracks {
        let shift = style.transpose_semitones as i64 * (track as i64 - 1);
        for bar in 0..shape.bars {
            for step in 0..steps {
                for p in 0..shape.pitches {
                    if roll.get_flat(shape.index(0, bar, step, p)) {
                        let q = fit_pitch(p as i64 + shift, shape.pitches);
                        roll.set_flat(shape.index(track, bar, step, q), true);
                    }
                }
            }
        }
    }
    roll
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> PianorollShape {
        PianorollShape::new(3, 2, 16, 24).unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let style = StyleParams::default();
        let a = synth_generate(7, 10, shape(), &style).unwrap();
        let b = synth_generate(7, 10, shape(), &style).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn different_seeds_differ() {
        let style = StyleParams::default();
        let a = synth_generate(7, 100, shape(), &style).unwrap();
        let b = synth_generate(8, 100, shape(), &style).unwrap();
        assert!(a.rolls().iter().zip(b.rolls()).any(|(x, y)| x != y));
    }

    #[test]
    fn rejects_small_pitch_range() {
        let s = PianorollShape::new(2, 1, 16, 11).unwrap();
        let err = synth_generate(1, 1, s, &StyleParams::default()).unwrap_err();
        assert_eq!(err.to_string(), "pitch range too small for pitch classes");
    }

    #[test]
    fn rejects_zero_count() {
        assert!(matches!(
            synth_generate(1, 0, shape(), &StyleParams::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn track_zero_holds_triads_in_key() {
        let d = synth_generate(3, 20, shape(), &StyleParams { ornaments_per_bar: 0, ..Default::default() }).unwrap();
        for roll in d.rolls() {
            let pcp = roll.pitch_class_profile(0, 0, 0).unwrap();
            assert_eq!(pcp.iter().sum::<f64>(), 3.0);
            // Track 2 is a pitch-class preserving copy of track 0.
            assert_eq!(roll.pitch_class_profile(2, 1, 5).unwrap(), roll.pitch_class_profile(0, 1, 5).unwrap());
        }
    }

    #[test]
    fn bass_is_periodic() {
        let d = synth_generate(5, 20, shape(), &StyleParams::default()).unwrap();
        for roll in d.rolls() {
            let active: Vec<usize> = (0..16)
                .filter(|&s| roll.pitch_class_profile(1, 0, s).unwrap().iter().sum::<f64>() > 0.0)
                .collect();
            assert!(active.len() >= 4);
            let gap = active[1] - active[0];
            assert!(active.windows(2).all(|w| w[1] - w[0] == gap));
        }
    }

    #[test]
    fn fit_pitch_wraps_by_octaves() {
        assert_eq!(fit_pitch(30, 24), 18);
        assert_eq!(fit_pitch(-5, 24), 7);
        assert_eq!(fit_pitch(11, 12), 11);
    }
}
