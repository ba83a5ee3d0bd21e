//! Distances between rolls.
//!
//! `euclidean` is the L2 norm of the difference of the raw 0/1 vectors, i.e.
//! the square root of the Hamming distance. `tonal` averages, over every
//! `(track, bar, step)` slot, the distance between 6-D tonal centroids of the
//! two pitch-class profiles (empty slots map to the origin).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pianoroll::Pianoroll;

/// Radii of the fifths, minor-thirds and major-thirds circles.
const RADII: [f64; 3] = [1.0, 1.0, 0.5];
/// Angular step per pitch class on each circle.
const ANGLES: [f64; 3] = [7.0 * PI / 6.0, 3.0 * PI / 2.0, 2.0 * PI / 3.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceMetric {
    #[serde(rename = "euclidean")]
    EuclideanRaw,
    #[serde(rename = "tonal")]
    TonalCentroid,
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::EuclideanRaw => "euclidean",
            DistanceMetric::TonalCentroid => "tonal",
        })
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DistanceMetric::EuclideanRaw),
            "tonal" => Ok(DistanceMetric::TonalCentroid),
            other => Err(Error::Config(format!("unknown metric {other:?} (expected euclidean or tonal)"))),
        }
    }
}

/// Tonal centroid of a pitch-class profile; the zero profile maps to zero.
pub fn tonal_centroid(profile: &[f64; 12]) -> [f64; 6] {
    let total: f64 = profile.iter().sum();
    let mut out = [0.0; 6];
    if total <= 0.0 {
        return out;
    }
    for (pc, &count) in profile.iter().enumerate() {
        if count == 0.0 {
            continue;
        }
        let w = count / total;
        for circle in 0..3 {
            let theta = pc as f64 * ANGLES[circle];
            out[2 * circle] += w * RADII[circle] * theta.sin();
            out[2 * circle + 1] += w * RADII[circle] * theta.cos();
        }
    }
    out
}

/// A roll pre-processed for repeated distance queries.
#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    Bits(Vec<u64>),
    Centroids(Vec<[f64; 6]>),
}

impl DistanceMetric {
    pub fn features(&self, roll: &Pianoroll) -> Features {
        match self {
            DistanceMetric::EuclideanRaw => Features::Bits(roll.words().to_vec()),
            DistanceMetric::TonalCentroid => {
                let shape = roll.shape();
                Features::Centroids(
                    (0..shape.slots())
                        .map(|slot| tonal_centroid(&roll.profile_at(slot * shape.pitches)))
                        .collect(),
                )
            }
        }
    }

    pub fn distance(&self, a: &Pianoroll, b: &Pianoroll) -> Result<f64> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch);
        }
        Ok(feature_distance(&self.features(a), &self.features(b)))
    }
}

/// Distance between two feature sets of the same metric and shape.
pub fn feature_distance(a: &Features, b: &Features) -> f64 {
    match (a, b) {
        (Features::Bits(x), Features::Bits(y)) => {
            let h: u32 = x.iter().zip(y).map(|(p, q)| (p ^ q).count_ones()).sum();
            (h as f64).sqrt()
        }
        (Features::Centroids(x), Features::Centroids(y)) => {
            let sum: f64 = x
                .iter()
                .zip(y)
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .sum();
            sum / x.len() as f64
        }
        _ => panic!("feature kinds differ"),
    }
}
