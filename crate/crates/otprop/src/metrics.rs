//! Agreement measures between a ground-truth labeling and a prediction:
//! accuracy, normalized mutual information, adjusted Rand index, and the
//! cross-dataset score aggregate used by the benchmark tables.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn check_pair(truth: &[usize], predicted: &[usize]) -> Result<usize> {
    if truth.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} truth labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty label sequences".into()));
    }
    Ok(truth.len())
}

/// Fraction of positions where the prediction matches the truth.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    let n = check_pair(truth, predicted)?;
    let correct = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| t == p)
        .count();
    Ok(correct as f64 / n as f64)
}

/// Cluster sizes and the joint contingency counts of two labelings.
fn contingency(
    truth: &[usize],
    predicted: &[usize],
) -> (
    BTreeMap<usize, usize>,
    BTreeMap<usize, usize>,
    BTreeMap<(usize, usize), usize>,
) {
    let mut rows = BTreeMap::new();
    let mut cols = BTreeMap::new();
    let mut joint = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        *rows.entry(t).or_insert(0) += 1;
        *cols.entry(p).or_insert(0) += 1;
        *joint.entry((t, p)).or_insert(0) += 1;
    }
    (rows, cols, joint)
}

fn entropy_nats(counts: &BTreeMap<usize, usize>, n: usize) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two
/// entropies: `2 I(Y, Yhat) / (H(Y) + H(Yhat))`.
///
/// Degenerate partitions follow the usual conventions: 1 when both sides are
/// a single cluster, 0 when exactly one side is.
pub fn nmi(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    let n = check_pair(truth, predicted)?;
    let (rows, cols, joint) = contingency(truth, predicted);
    let h_truth = entropy_nats(&rows, n);
    let h_pred = entropy_nats(&cols, n);
    match (h_truth > 0.0, h_pred > 0.0) {
        (false, false) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        (true, true) => {}
    }
    let nf = n as f64;
    let mut mutual = 0.0;
    for (&(t, p), &c) in &joint {
        let p_joint = c as f64 / nf;
        let p_t = rows[&t] as f64 / nf;
        let p_p = cols[&p] as f64 / nf;
        mutual += p_joint * (p_joint / (p_t * p_p)).ln();
    }
    Ok((2.0 * mutual / (h_truth + h_pred)).clamp(0.0, 1.0))
}

fn choose2(c: usize) -> f64 {
    (c * c.saturating_sub(1) / 2) as f64
}

/// Rand index adjusted for chance via the pair-counting expectation:
/// `(index - expected) / (max - expected)`. A zero denominator (both
/// partitions trivial in the same way) returns 1.
pub fn ari(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    let n = check_pair(truth, predicted)?;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "adjusted Rand index needs at least two points".into(),
        ));
    }
    let (rows, cols, joint) = contingency(truth, predicted);
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(n);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Cross-dataset score: each algorithm earns `perf / best_perf` per dataset,
/// summed over datasets, so every dataset grants 1 point to its best
/// algorithm and proportionally less to the rest.
///
/// Every algorithm must carry one strictly positive value per dataset.
pub fn score_measure(perf: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    if perf.is_empty() {
        return Err(Error::InvalidArgument("no algorithms to score".into()));
    }
    let width = perf.values().next().map(Vec::len).unwrap_or(0);
    if width == 0 {
        return Err(Error::InvalidArgument("no datasets to score".into()));
    }
    for (name, values) in perf {
        if values.len() != width {
            return Err(Error::InvalidArgument(format!(
                "algorithm {name} has {} values, expected {width}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "algorithm {name} has a nonpositive performance value"
            )));
        }
    }
    let best: Vec<f64> = (0..width)
        .map(|j| {
            perf.values()
                .map(|v| v[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(perf
        .iter()
        .map(|(name, values)| {
            let score = values.iter().zip(&best).map(|(v, b)| v / b).sum();
            (name.clone(), score)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0], &[1, 1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn nmi_trivial_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        // Renaming the predicted clusters changes nothing.
        assert_eq!(nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // A single predicted cluster carries no information.
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        // Independent partitions of this form have zero mutual information.
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        // Both sides trivial.
        assert_eq!(nmi(&[0, 0], &[0, 0]).unwrap(), 1.0);
    }

    /// Contingency-table evaluation written independently: explicit
    /// probability tables and direct sums, no shared helpers.
    fn nmi_oracle(truth: &[usize], predicted: &[usize]) -> f64 {
        let n = truth.len() as f64;
        let k_t = truth.iter().max().unwrap() + 1;
        let k_p = predicted.iter().max().unwrap() + 1;
        let mut joint = vec![vec![0.0; k_p]; k_t];
        for (&t, &p) in truth.iter().zip(predicted) {
            joint[t][p] += 1.0 / n;
        }
        let pt: Vec<f64> = (0..k_t).map(|t| joint[t].iter().sum()).collect();
        let pp: Vec<f64> = (0..k_p).map(|p| (0..k_t).map(|t| joint[t][p]).sum()).collect();
        let h = |dist: &[f64]| -> f64 {
            dist.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| -x * x.ln())
                .sum()
        };
        let (ht, hp) = (h(&pt), h(&pp));
        if ht == 0.0 && hp == 0.0 {
            return 1.0;
        }
        if ht == 0.0 || hp == 0.0 {
            return 0.0;
        }
        let mut mi = 0.0;
        for t in 0..k_t {
            for p in 0..k_p {
                if joint[t][p] > 0.0 {
                    mi += joint[t][p] * (joint[t][p] / (pt[t] * pp[p])).ln();
                }
            }
        }
        2.0 * mi / (ht + hp)
    }

    /// Pair-counting evaluation over all point pairs, written independently.
    fn ari_oracle(truth: &[usize], predicted: &[usize]) -> f64 {
        let n = truth.len();
        let (mut same_both, mut same_t, mut same_p, mut diff_both) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                match (truth[i] == truth[j], predicted[i] == predicted[j]) {
                    (true, true) => same_both += 1.0,
                    (true, false) => same_t += 1.0,
                    (false, true) => same_p += 1.0,
                    (false, false) => diff_both += 1.0,
                }
            }
        }
        let total = same_both + same_t + same_p + diff_both;
        let rand = (same_both + diff_both) / total;
        let expected = ((same_both + same_t) * (same_both + same_p)
            + (same_p + diff_both) * (same_t + diff_both))
            / (total * total);
        let max_rand: f64 = 1.0;
        if (max_rand - expected).abs() < 1e-300 {
            return 1.0;
        }
        (rand - expected) / (max_rand - expected)
    }

    #[test]
    fn ari_trivial_cases() {
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert!(ari(&[0], &[0]).is_err());
        // Cross pattern evaluated independently by pair counting.
        let truth = [0, 0, 1, 1];
        let predicted = [0, 1, 0, 1];
        let got = ari(&truth, &predicted).unwrap();
        assert!((got - ari_oracle(&truth, &predicted)).abs() <= 1e-12);
        assert!((got + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn nmi_matches_contingency_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let k = rng.random_range(1..5usize);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let got = nmi(&truth, &predicted).unwrap();
            let want = nmi_oracle(&truth, &predicted).clamp(0.0, 1.0);
            assert!(
                (got - want).abs() <= 1e-10,
                "nmi {got} vs oracle {want} on {truth:?} / {predicted:?}"
            );
        }
    }

    #[test]
    fn ari_matches_pair_counting_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let k = rng.random_range(1..5usize);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let got = ari(&truth, &predicted).unwrap();
            let want = ari_oracle(&truth, &predicted);
            assert!(
                (got - want).abs() <= 1e-10,
                "ari {got} vs oracle {want} on {truth:?} / {predicted:?}"
            );
        }
    }

    #[test]
    fn metrics_are_symmetric_and_renaming_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            assert!(
                (nmi(&truth, &predicted).unwrap() - nmi(&predicted, &truth).unwrap()).abs()
                    <= 1e-12
            );
            assert!(
                (ari(&truth, &predicted).unwrap() - ari(&predicted, &truth).unwrap()).abs()
                    <= 1e-12
            );
            // Consistent renaming of the predicted side.
            let renamed: Vec<usize> = predicted.iter().map(|&p| (p + 1) % 3).collect();
            assert!(
                (nmi(&truth, &predicted).unwrap() - nmi(&truth, &renamed).unwrap()).abs() <= 1e-12
            );
            assert!(
                (ari(&truth, &predicted).unwrap() - ari(&truth, &renamed).unwrap()).abs() <= 1e-12
            );
        }
    }

    #[test]
    fn random_labelings_have_near_zero_ari() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut total = 0.0;
        for _ in 0..100 {
            let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
            let predicted: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
            total += ari(&truth, &predicted).unwrap().abs();
        }
        assert!(total / 100.0 <= 0.05);
    }

    #[test]
    fn score_measure_examples() {
        let mut perf = BTreeMap::new();
        perf.insert("solo".to_string(), vec![0.4, 0.9, 0.7]);
        let scores = score_measure(&perf).unwrap();
        assert_eq!(scores["solo"], 3.0);

        let mut perf = BTreeMap::new();
        perf.insert("a".to_string(), vec![0.8, 0.6]);
        perf.insert("b".to_string(), vec![0.8, 0.6]);
        let scores = score_measure(&perf).unwrap();
        assert_eq!(scores["a"], scores["b"]);

        let mut perf = BTreeMap::new();
        perf.insert("a".to_string(), vec![0.9, 0.8]);
        perf.insert("b".to_string(), vec![0.45, 0.8]);
        let scores = score_measure(&perf).unwrap();
        assert!((scores["a"] - 2.0).abs() <= 1e-12);
        assert!((scores["b"] - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn score_measure_rejects_ragged_or_nonpositive_input() {
        let mut perf = BTreeMap::new();
        perf.insert("a".to_string(), vec![0.9, 0.8]);
        perf.insert("b".to_string(), vec![0.45]);
        assert!(score_measure(&perf).is_err());

        let mut perf = BTreeMap::new();
        perf.insert("a".to_string(), vec![0.9, 0.0]);
        assert!(score_measure(&perf).is_err());
    }
}
