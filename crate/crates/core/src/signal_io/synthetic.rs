//! Synthetic heartbeat generator.
//!
//! Produces beat-like segments in the same layout as the public heartbeat
//! CSVs: values in [0, 1], a beat of variable length followed by zero
//! padding. Each class gets its own morphology (P wave, QRS width, T wave
//! polarity) plus seeded amplitude, timing and noise jitter. Useful for smoke
//! runs and tests when the real datasets are not on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, HeartbeatRecord, SERIES_LEN};
use crate::error::Result;

/// Gaussian bump: (centre as fraction of beat, width in samples, amplitude).
type Wave = (f64, f64, f64);

fn morphology(class: usize, rng: &mut ChaCha8Rng) -> (Vec<Wave>, f64) {
    let j = |rng: &mut ChaCha8Rng, s: f64| rng.random_range(-s..=s);
    // beat length as a fraction of the segment
    let (waves, len): (Vec<Wave>, f64) = match class % 5 {
        // narrow QRS, upright P and T
        0 => (
            vec![
                (0.15 + j(rng, 0.02), 4.0, 0.15),
                (0.30 + j(rng, 0.02), 2.0, 1.0),
                (0.34 + j(rng, 0.02), 2.5, -0.25),
                (0.60 + j(rng, 0.03), 9.0, 0.30),
            ],
            0.75 + j(rng, 0.1),
        ),
        // premature: early, short beat with a flattened P
        1 => (
            vec![
                (0.10 + j(rng, 0.02), 3.0, 0.05),
                (0.22 + j(rng, 0.02), 2.0, 1.0),
                (0.26 + j(rng, 0.02), 2.5, -0.2),
                (0.45 + j(rng, 0.03), 7.0, 0.25),
            ],
            0.50 + j(rng, 0.08),
        ),
        // wide ventricular complex, inverted T, no P
        2 => (
            vec![
                (0.25 + j(rng, 0.03), 7.0, 1.0),
                (0.33 + j(rng, 0.03), 6.0, -0.5),
                (0.60 + j(rng, 0.03), 11.0, -0.35),
            ],
            0.80 + j(rng, 0.1),
        ),
        // fusion: intermediate width
        3 => (
            vec![
                (0.14 + j(rng, 0.02), 4.0, 0.08),
                (0.28 + j(rng, 0.02), 4.5, 1.0),
                (0.34 + j(rng, 0.02), 4.0, -0.35),
                (0.58 + j(rng, 0.03), 9.0, 0.1),
            ],
            0.70 + j(rng, 0.1),
        ),
        // paced: pacing spike then a broad complex
        _ => (
            vec![
                (0.18 + j(rng, 0.02), 0.8, 0.9),
                (0.27 + j(rng, 0.02), 6.0, 0.7),
                (0.36 + j(rng, 0.02), 6.0, -0.4),
                (0.65 + j(rng, 0.03), 10.0, 0.2),
            ],
            0.85 + j(rng, 0.1),
        ),
    };
    (waves, len.clamp(0.3, 1.0))
}

fn beat(class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (waves, len_frac) = morphology(class, rng);
    let beat_len = ((SERIES_LEN as f64) * len_frac) as usize;
    let gain = rng.random_range(0.8..1.2);
    let mut raw: Vec<f64> = (0..beat_len)
        .map(|t| {
            let tf = t as f64;
            let mut v = 0.0;
            for &(centre, width, amp) in &waves {
                let c = centre * SERIES_LEN as f64;
                v += gain * amp * (-0.5 * ((tf - c) / width).powi(2)).exp();
            }
            v + rng.random_range(-0.02..0.02)
        })
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    for v in &mut raw {
        *v = (*v - lo) / (hi - lo);
    }
    raw.resize(SERIES_LEN, 0.0);
    raw
}

/// Generates `per_class[k]` beats of every class `k`, in a seeded order.
pub fn synthetic_dataset(per_class: &[usize], seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = per_class
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    let records = labels
        .into_iter()
        .map(|k| HeartbeatRecord::new(beat(k, &mut rng), k))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new("synthetic", per_class.len().max(2), records)
}
