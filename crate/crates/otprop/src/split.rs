//! Stratified labeled/unlabeled splits with seeded determinism.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A partition of dataset indices into a labeled and an unlabeled part.
/// Both index lists are sorted ascending; `(fraction, seed)` fully determine
/// the mask for a given dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMask {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub labeled_fraction: f64,
    pub seed: u64,
}

/// Draw one stratified split: per class, `round(fraction * class_size)`
/// labeled indices with a minimum of one, sampled without replacement from a
/// seeded generator.
pub fn make_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<SplitMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "labeled fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = dataset.len();
    let num_classes = dataset.num_classes();
    if fraction * (n as f64) < num_classes as f64 {
        return Err(Error::InfeasibleFraction {
            fraction,
            n,
            num_classes,
        });
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        per_class[y].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled_mask = vec![false; n];
    for indices in &mut per_class {
        let take = ((fraction * indices.len() as f64).round() as usize)
            .max(1)
            .min(indices.len());
        indices.shuffle(&mut rng);
        for &i in indices.iter().take(take) {
            labeled_mask[i] = true;
        }
    }

    let labeled: Vec<usize> = (0..n).filter(|&i| labeled_mask[i]).collect();
    let unlabeled: Vec<usize> = (0..n).filter(|&i| !labeled_mask[i]).collect();
    Ok(SplitMask {
        labeled,
        unlabeled,
        labeled_fraction: fraction,
        seed,
    })
}

/// One mask per seed; see [`make_split`].
pub fn make_splits(dataset: &Dataset, fraction: f64, seeds: &[u64]) -> Result<Vec<SplitMask>> {
    seeds
        .iter()
        .map(|&seed| make_split(dataset, fraction, seed))
        .collect()
}
