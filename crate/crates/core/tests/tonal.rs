use std::f64::consts::PI;

use musemia::attack::{tonal_centroid, DistanceMetric};
use musemia::pianoroll::{Pianoroll, PianorollShape};

/// Independent centroid: each circle is written out explicitly.
fn centroid_oracle(pcs: &[usize]) -> [f64; 6] {
    let w = 1.0 / pcs.len() as f64;
    let mut c = [0.0; 6];
    for &pc in pcs {
        let l = pc as f64;
        c[0] += w * (l * 7.0 * PI / 6.0).sin();
        c[1] += w * (l * 7.0 * PI / 6.0).cos();
        c[2] += w * (l * 3.0 * PI / 2.0).sin();
        c[3] += w * (l * 3.0 * PI / 2.0).cos();
        c[4] += w * 0.5 * (l * 2.0 * PI / 3.0).sin();
        c[5] += w * 0.5 * (l * 2.0 * PI / 3.0).cos();
    }
    c
}

fn l2(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// A single-slot roll holding the given MIDI pitches (base pitch C1 = 24).
fn chord(midi: &[i32]) -> Pianoroll {
    let shape = PianorollShape::new(1, 1, 1, 60).unwrap();
    let mut roll = Pianoroll::zeros(shape);
    for &m in midi {
        roll.set(0, 0, 0, (m - 24) as usize, true).unwrap();
    }
    roll
}

const C_MAJOR: [usize; 3] = [0, 4, 7];
const A_MINOR: [usize; 3] = [9, 0, 4];
const FS_MAJOR: [usize; 3] = [6, 10, 1];

#[test]
fn centroid_matches_oracle() {
    for pcs in [&C_MAJOR[..], &A_MINOR, &FS_MAJOR, &[2], &[0, 1, 2, 3, 11]] {
        let mut profile = [0.0; 12];
        pcs.iter().for_each(|&p| profile[p] += 1.0);
        let got = tonal_centroid(&profile);
        let want = centroid_oracle(pcs);
        assert!(l2(&got, &want) < 1e-12, "{pcs:?}: {got:?} vs {want:?}");
    }
}

#[test]
fn relative_minor_is_closer_than_tritone_major() {
    let c = centroid_oracle(&C_MAJOR);
    let near = l2(&c, &centroid_oracle(&A_MINOR));
    let far = l2(&c, &centroid_oracle(&FS_MAJOR));
    assert!(near < far, "oracle: {near} vs {far}");

    let c_roll = chord(&[60, 64, 67]);
    let am_roll = chord(&[57, 60, 64]);
    let fs_roll = chord(&[54, 58, 61]);
    let tonal = DistanceMetric::TonalCentroid;
    let d_near = tonal.distance(&c_roll, &am_roll).unwrap();
    let d_far = tonal.distance(&c_roll, &fs_roll).unwrap();
    assert!((d_near - near).abs() < 1e-12);
    assert!((d_far - far).abs() < 1e-12);
    assert!(d_near < d_far);
}

#[test]
fn octave_doublings_do_not_move_the_centroid_direction() {
    let tonal = DistanceMetric::TonalCentroid;
    let a = chord(&[60, 64, 67]);
    let b = chord(&[48, 64, 79]);
    assert!(tonal.distance(&a, &b).unwrap() < 1e-12);
}

#[test]
fn euclidean_is_sqrt_hamming() {
    let a = chord(&[60, 64, 67]);
    let b = chord(&[60, 63, 67, 70]);
    let d = DistanceMetric::EuclideanRaw.distance(&a, &b).unwrap();
    assert_eq!(d, (a.hamming(&b).unwrap() as f64).sqrt());
    assert_eq!(d, 3f64.sqrt());
}
