use rand::Rng as _;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_at, stream};

/// Side of the square pixel cells templates are drawn in.
const CELL: usize = 2;
/// Chance that a sample flips any given cell of its class template.
const FLIP: f64 = 0.1;
/// Templates depend only on the dataset shape, so train and test sets
/// drawn with different seeds share them.
const TEMPLATE_SEED: u64 = 0x7e3a_91c5;

fn templates(classes: usize, cells: usize) -> Vec<Vec<bool>> {
    let mut rng = rng_at(TEMPLATE_SEED, &[stream::DATA, classes as u64, cells as u64]);
    let mut out: Vec<Vec<bool>> = Vec::with_capacity(classes);
    while out.len() < classes {
        let t: Vec<bool> = (0..cells).map(|_| rng.random_bool(0.5)).collect();
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// A seeded single-channel dataset of `classes × per_class` binary images.
///
/// Each class owns a random on/off pattern over 2×2-pixel cells (the last
/// row or column of cells is clipped on odd sizes). A sample copies its
/// class pattern with every cell flipped independently with probability
/// 0.1; pixels are 0.0 or 1.0. Every class has the same expected pixel
/// statistics, so local batch statistics barely depend on the label mix.
/// Samples are interleaved by class: index `j·classes + k` has label `k`.
pub fn synth_dataset(
    seed: u64,
    classes: usize,
    per_class: usize,
    height: usize,
    width: usize,
) -> Result<Dataset> {
    if classes < 2 || per_class == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs >= 2 classes and >= 1 sample per class, got {classes}/{per_class}"
        )));
    }
    let (gh, gw) = (height.div_ceil(CELL), width.div_ceil(CELL));
    let cells = gh * gw;
    if cells < usize::BITS as usize && (1usize << cells) < classes {
        return Err(Error::InvalidArgument(format!(
            "{height}x{width} images are too small for {classes} distinct class templates"
        )));
    }
    let templates = templates(classes, cells);

    let mut rng = rng_at(seed, &[stream::DATA]);
    let n = classes * per_class;
    let mut pixels = Vec::with_capacity(n * height * width);
    let mut labels = Vec::with_capacity(n);
    let mut sample = vec![false; cells];
    for _ in 0..per_class {
        for (k, t) in templates.iter().enumerate() {
            for (s, &b) in sample.iter_mut().zip(t) {
                *s = b ^ rng.random_bool(FLIP);
            }
            for r in 0..height {
                for c in 0..width {
                    let on = sample[(r / CELL) * gw + c / CELL];
                    pixels.push(if on { 1.0 } else { 0.0 });
                }
            }
            labels.push(k);
        }
    }
    Dataset::new(height, width, 1, classes, pixels, labels)
}
