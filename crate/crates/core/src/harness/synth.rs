//! A small seeded two-class 8×8 glyph dataset standing in for handwritten
//! digits: noisy, randomly shifted renderings of a "1" (label +1) and a "3"
//! (label −1), pixel values in [0,1] rounded to four decimals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Label, LabeledDataset};
use crate::error::Result;

/// Seed of the bundled `data/synthetic_digits.csv`.
pub const BUNDLED_SEED: u64 = 2015;
pub const PER_CLASS: usize = 100;
pub const SIDE: usize = 8;

const ONE: [&str; SIDE] = [
    "...##...", //
    "..###...",
    "...##...",
    "...##...",
    "...##...",
    "...##...",
    "...##...",
    "..####..",
];

const THREE: [&str; SIDE] = [
    "..####..", //
    ".##..##.",
    ".....##.",
    "...###..",
    ".....##.",
    ".....##.",
    ".##..##.",
    "..####..",
];

fn render(glyph: &[&str; SIDE], dx: i32, dy: i32, ink: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut px = vec![0.0; SIDE * SIDE];
    for (r, line) in glyph.iter().enumerate() {
        for (c, ch) in line.bytes().enumerate() {
            if ch != b'#' {
                continue;
            }
            let (rr, cc) = (r as i32 + dy, c as i32 + dx);
            if (0..SIDE as i32).contains(&rr) && (0..SIDE as i32).contains(&cc) {
                px[rr as usize * SIDE + cc as usize] = ink;
            }
        }
    }
    px.iter()
        .map(|v| {
            let v: f64 = (v + noise.sample(rng)).clamp(0.0, 1.0);
            (v * 1e4).round() / 1e4
        })
        .collect()
}

/// `per_class` samples of each glyph, positives first.
pub fn synthetic_digits(seed: u64, per_class: usize) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.15).expect("valid sd");
    let mut points = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for (glyph, label) in [(&ONE, Label::Pos), (&THREE, Label::Neg)] {
        for _ in 0..per_class {
            let dx = rng.gen_range(-1..=1);
            let dy = rng.gen_range(-1..=1);
            let ink = rng.gen_range(0.6..=1.0);
            points.push(render(glyph, dx, dy, ink, &noise, &mut rng));
            labels.push(label);
        }
    }
    LabeledDataset::new(points, labels, None)
}

/// Path of the bundled dataset inside the source tree.
pub fn bundled_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("synthetic_digits.csv")
}
