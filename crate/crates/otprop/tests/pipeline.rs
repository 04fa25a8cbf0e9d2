//! Cross-module properties that need the full pipeline: dataset ingestion,
//! the propagation loop, and the induction identity it guarantees.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otprop::baseline::{gaussian_affinity, lp_propagate};
use otprop::data::{gather_rows, load_csv, LoadOptions};
use otprop::propagation::{
    assign_labels, certainty_scores, class_probability_matrix, column_normalize, propagate,
    OtpConfig,
};
use otprop::split::make_split;
use otprop::transport::{pairwise_sq_dist, sinkhorn, Marginals};

fn data_path(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

#[test]
fn iris_has_the_expected_shape() {
    let ds = load_csv(&data_path("iris.csv"), "class", &LoadOptions::default()).unwrap();
    assert_eq!(ds.len(), 150);
    assert_eq!(ds.dim(), 4);
    assert_eq!(ds.num_classes(), 3);
    assert_eq!(ds.class_counts(), vec![50, 50, 50]);
}

#[test]
fn lp_reaches_its_tolerance_on_every_bundled_dataset() {
    // Bandwidths in each dataset's mixing regime; far below them the unit
    // self-loop dominates the transition matrix and convergence crawls.
    for (name, sigma) in [("iris.csv", 1.0), ("wine.csv", 3.0), ("wdbc.csv", 6.0)] {
        let ds = load_csv(&data_path(name), "class", &LoadOptions::default()).unwrap();
        let mask = make_split(&ds, 0.25, 0).unwrap();
        let order: Vec<usize> = mask
            .labeled
            .iter()
            .chain(mask.unlabeled.iter())
            .copied()
            .collect();
        let points = gather_rows(ds.features.view(), &order);
        let y_l: Vec<usize> = mask.labeled.iter().map(|&i| ds.labels[i]).collect();
        let affinity = gaussian_affinity(points.view(), sigma).unwrap();
        let out = lp_propagate(&affinity, &y_l, ds.num_classes(), 1e-6, 2000).unwrap();
        assert!(out.converged, "{name}: final delta {}", out.final_delta);
        assert!(out.final_delta <= 1e-6);
    }
}

/// The vote identity behind out-of-sample induction: for a training point
/// committed in the final iteration without threshold relaxation, voting with
/// its final-iteration affinity column as the weights reproduces its label.
#[test]
fn final_iteration_affinity_vote_reproduces_propagation_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut verified = 0;
    for _ in 0..10 {
        let l = rng.random_range(4..8);
        let u = rng.random_range(4..10);
        let labeled = Array2::from_shape_fn((l, 2), |_| rng.random_range(-4.0..4.0));
        let unlabeled = Array2::from_shape_fn((u, 2), |_| rng.random_range(-4.0..4.0));
        let mut labels: Vec<usize> = (0..l).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let config = OtpConfig::default();
        let outcome = propagate(labeled.view(), &labels, unlabeled.view(), 2, &config).unwrap();

        let final_t = outcome.trace.iterations.last().unwrap().t;
        if outcome.trace.iterations.last().unwrap().relaxed {
            continue;
        }

        // Rebuild the final-iteration state: the pool in commit order, the
        // remaining unlabeled points in index order.
        let mut pool: Vec<f64> = labeled.iter().copied().collect();
        let mut pool_labels = labels.clone();
        let mut remaining: Vec<usize> = (0..u).collect();
        for p in &outcome.trace.points {
            if p.iteration < final_t {
                pool.extend(unlabeled.row(p.index).iter().copied());
                pool_labels.push(p.class);
                remaining.retain(|&j| j != p.index);
            }
        }
        let pool_view = ArrayView2::from_shape((pool_labels.len(), 2), &pool).unwrap();
        let mut current = Array2::zeros((remaining.len(), 2));
        for (row, &orig) in remaining.iter().enumerate() {
            current.row_mut(row).assign(&unlabeled.index_axis(Axis(0), orig));
        }

        // Re-solve the final iteration exactly as the loop did.
        let cost = pairwise_sq_dist(pool_view, current.view()).unwrap();
        let marginals = Marginals::uniform(pool_labels.len(), remaining.len()).unwrap();
        let plan = sinkhorn(
            &cost,
            &marginals,
            config.epsilon,
            config.sinkhorn_tol,
            config.sinkhorn_max_iter,
        )
        .unwrap();
        let affinity = column_normalize(&plan);
        let probabilities =
            class_probability_matrix(&affinity, &pool_labels, 2).unwrap();
        let scores = certainty_scores(&probabilities);
        let committed = assign_labels(&probabilities, &scores, config.alpha, false);

        for assignment in committed {
            let original = remaining[assignment.index];
            // The weighted majority vote with the affinity column as weights:
            // per class, sum the column entries of that class's pool rows.
            let mut per_class = [0.0f64; 2];
            for (i, &y) in pool_labels.iter().enumerate() {
                per_class[y] += affinity.values()[(i, assignment.index)];
            }
            let vote = if per_class[1] > per_class[0] { 1 } else { 0 };
            assert_eq!(vote, outcome.labels[original]);
            assert_eq!(vote, assignment.class);
            verified += 1;
        }
    }
    assert!(verified > 0, "no final-iteration commits exercised");
}
