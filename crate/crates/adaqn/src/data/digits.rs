//! Procedural digit glyphs for the pixel-sequence classification task:
//! a 5x7 bitmap font rendered into a size x size frame with seeded position
//! jitter, ink variation, and background noise, then flattened row-major
//! into a scalar sequence in [0, 1].

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::data::{SequenceData, SequenceDataset};
use crate::error::{OptimError, Result};

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

#[rustfmt::skip]
const FONT: [[&str; GLYPH_H]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."], // 0
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."], // 1
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"], // 2
    [".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."], // 3
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."], // 4
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."], // 5
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."], // 6
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."], // 7
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."], // 8
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."], // 9
];

/// Generate `count` digit images of `size` x `size` pixels with balanced
/// class counts (classes cycle 0..9, so counts differ by at most one and
/// divide exactly when `count` is a multiple of ten).
pub fn synth_digits(count: usize, size: usize, seed: u64) -> Result<SequenceDataset> {
    if count == 0 {
        return Err(OptimError::Config("synth_digits: count must be > 0".into()));
    }
    if size < GLYPH_H + 1 {
        return Err(OptimError::Config(format!(
            "synth_digits: size {size} too small for the {GLYPH_W}x{GLYPH_H} font"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (size / 8).max(1);
    let gw = GLYPH_W * scale;
    let gh = GLYPH_H * scale;

    let mut sequences = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let digit = i % 10;
        let ox = rng.gen_range(0..=size - gw);
        let oy = rng.gen_range(0..=size - gh);
        let ink: f64 = rng.gen_range(0.65..1.0);
        let mut img = vec![0.0f64; size * size];
        for (r, row) in FONT[digit].iter().enumerate() {
            for (c, ch) in row.bytes().enumerate() {
                if ch != b'#' {
                    continue;
                }
                for dr in 0..scale {
                    for dc in 0..scale {
                        let y = oy + r * scale + dr;
                        let x = ox + c * scale + dc;
                        img[y * size + x] = ink * rng.gen_range(0.85..1.0);
                    }
                }
            }
        }
        for p in img.iter_mut() {
            *p = (*p + rng.gen_range(0.0..0.1)).clamp(0.0, 1.0);
        }
        sequences.push(img);
        labels.push(digit);
    }
    Ok(SequenceDataset {
        data: SequenceData::Pixels {
            sequences,
            labels,
            classes: 10,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_classes() {
        let ds = synth_digits(100, 8, 1).unwrap();
        match &ds.data {
            SequenceData::Pixels { labels, .. } => {
                let mut counts = [0usize; 10];
                for &l in labels {
                    counts[l] += 1;
                }
                assert!(counts.iter().all(|&c| c == 10), "{counts:?}");
            }
            _ => panic!(),
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = synth_digits(30, 8, 42).unwrap();
        let b = synth_digits(30, 8, 42).unwrap();
        match (&a.data, &b.data) {
            (
                SequenceData::Pixels { sequences: sa, .. },
                SequenceData::Pixels { sequences: sb, .. },
            ) => assert_eq!(sa, sb),
            _ => panic!(),
        }
    }

    #[test]
    fn pixels_in_unit_interval_and_expected_length() {
        let ds = synth_digits(20, 8, 3).unwrap();
        assert_eq!(ds.seq_len(), 64);
        match &ds.data {
            SequenceData::Pixels { sequences, .. } => {
                for s in sequences {
                    assert!(s.iter().all(|&p| (0.0..=1.0).contains(&p)));
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn larger_frames_scale_glyphs() {
        let ds = synth_digits(10, 28, 9).unwrap();
        assert_eq!(ds.seq_len(), 28 * 28);
    }

    #[test]
    fn rejects_tiny_frames() {
        assert!(synth_digits(10, 4, 0).is_err());
        assert!(synth_digits(0, 8, 0).is_err());
    }
}
