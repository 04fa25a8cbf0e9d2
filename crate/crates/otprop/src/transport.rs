//! Dense cost matrices and entropy-regularized optimal transport.
//!
//! The solver follows the classical alternating-scaling scheme: the cost is
//! normalized by its largest entry so the regularization strength `epsilon`
//! is scale-free, the Gibbs kernel `K = exp(-M/epsilon)` is scaled by
//! positive vectors `u`, `v` until the plan `diag(u) K diag(v)` matches the
//! prescribed marginals, and the iteration transparently falls back to
//! log-domain updates when the scaling vectors leave the representable range.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::{real, Real};

/// Largest instance accepted by [`exact_ot_uniform_small`].
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Matrix of pairwise squared Euclidean distances between a source and a
/// target point set, together with the normalizer used for relative
/// regularization.
#[derive(Debug, Clone)]
pub struct CostMatrix<R> {
    values: Array2<R>,
    max_entry: R,
}

impl<R: Real> CostMatrix<R> {
    /// Wrap a precomputed nonnegative cost matrix.
    pub fn new(values: Array2<R>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty cost matrix".into()));
        }
        if values.iter().any(|c| !c.is_finite() || *c < R::zero()) {
            return Err(Error::InvalidArgument(
                "cost entries must be finite and nonnegative".into(),
            ));
        }
        let max_entry = values.iter().copied().fold(R::zero(), R::max);
        Ok(Self { values, max_entry })
    }

    pub fn values(&self) -> &Array2<R> {
        &self.values
    }

    /// Largest entry; zero only when every entry is zero.
    pub fn max_entry(&self) -> R {
        self.max_entry
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values.nrows(), self.values.ncols())
    }

    /// Cost divided by its largest entry, so entries lie in `[0, 1]`.
    /// An all-zero matrix normalizes to itself.
    fn normalized(&self) -> Array2<R> {
        if self.max_entry > R::zero() {
            self.values.mapv(|c| c / self.max_entry)
        } else {
            self.values.clone()
        }
    }
}

/// Entry `(i, j)` is the squared Euclidean distance between `source` row `i`
/// and `target` row `j`. Per-entry summation runs in feature order, so the
/// result is deterministic.
pub fn pairwise_sq_dist<R: Real>(
    source: ArrayView2<R>,
    target: ArrayView2<R>,
) -> Result<CostMatrix<R>> {
    if source.nrows() == 0 || target.nrows() == 0 {
        return Err(Error::InvalidArgument("point sets must be nonempty".into()));
    }
    if source.ncols() != target.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "source has {} features, target has {}",
            source.ncols(),
            target.ncols()
        )));
    }
    let (l, u, d) = (source.nrows(), target.nrows(), source.ncols());
    let mut values = Array2::zeros((l, u));
    for i in 0..l {
        for j in 0..u {
            let mut acc = R::zero();
            for f in 0..d {
                let diff = source[(i, f)] - target[(j, f)];
                acc += diff * diff;
            }
            values[(i, j)] = acc;
        }
    }
    CostMatrix::new(values)
}

/// Row and column marginals of a transport problem: strictly positive
/// probability vectors.
#[derive(Debug, Clone)]
pub struct Marginals<R> {
    a: Array1<R>,
    b: Array1<R>,
}

impl<R: Real> Marginals<R> {
    pub fn new(a: Array1<R>, b: Array1<R>) -> Result<Self> {
        for (name, side) in [("a", &a), ("b", &b)] {
            if side.is_empty() {
                return Err(Error::InvalidArgument(format!("marginal {name} is empty")));
            }
            if side.iter().any(|w| !w.is_finite() || *w <= R::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "marginal {name} must be strictly positive"
                )));
            }
            let total = side.sum();
            if (total - R::one()).abs() > real(1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "marginal {name} sums to {total}, expected 1"
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// Uniform weights `1/l` and `1/u` over the two sides.
    pub fn uniform(l: usize, u: usize) -> Result<Self> {
        if l == 0 || u == 0 {
            return Err(Error::InvalidArgument("empty marginal".into()));
        }
        Ok(Self {
            a: Array1::from_elem(l, R::one() / real(l as f64)),
            b: Array1::from_elem(u, R::one() / real(u as f64)),
        })
    }

    pub fn a(&self) -> &Array1<R> {
        &self.a
    }

    pub fn b(&self) -> &Array1<R> {
        &self.b
    }
}

/// A solved entropy-regularized transport plan with its convergence
/// diagnostics.
#[derive(Debug, Clone)]
pub struct TransportPlan<R> {
    values: Array2<R>,
    epsilon: R,
    iterations: usize,
    marginal_violation: R,
    converged: bool,
    stabilized: bool,
}

impl<R: Real> TransportPlan<R> {
    pub fn values(&self) -> &Array2<R> {
        &self.values
    }

    /// Regularization strength, relative to the largest cost entry.
    pub fn epsilon(&self) -> R {
        self.epsilon
    }

    /// Number of scaling sweeps performed (one sweep updates both vectors).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Max-norm violation of the marginal constraints by the returned plan.
    pub fn marginal_violation(&self) -> R {
        self.marginal_violation
    }

    /// Whether the violation reached the requested tolerance before the
    /// iteration cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Whether log-domain updates were needed at any point.
    pub fn stabilized(&self) -> bool {
        self.stabilized
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values.nrows(), self.values.ncols())
    }
}

/// How often the marginal violation is evaluated, in sweeps.
const CHECK_EVERY: usize = 10;

fn violation_of<R: Real>(plan: &Array2<R>, marginals: &Marginals<R>) -> R {
    let row = plan.sum_axis(Axis(1));
    let col = plan.sum_axis(Axis(0));
    let worst_row = row
        .iter()
        .zip(marginals.a.iter())
        .map(|(s, a)| (*s - *a).abs())
        .fold(R::zero(), R::max);
    let worst_col = col
        .iter()
        .zip(marginals.b.iter())
        .map(|(s, b)| (*s - *b).abs())
        .fold(R::zero(), R::max);
    worst_row.max(worst_col)
}

fn materialize_linear<R: Real>(kernel: &Array2<R>, u: &Array1<R>, v: &Array1<R>) -> Array2<R> {
    let mut plan = kernel.clone();
    for (i, mut row) in plan.rows_mut().into_iter().enumerate() {
        for (j, t) in row.iter_mut().enumerate() {
            *t = u[i] * *t * v[j];
        }
    }
    plan
}

fn materialize_log<R: Real>(
    log_kernel: &Array2<R>,
    log_u: &Array1<R>,
    log_v: &Array1<R>,
) -> Array2<R> {
    let mut plan = log_kernel.clone();
    for (i, mut row) in plan.rows_mut().into_iter().enumerate() {
        for (j, t) in row.iter_mut().enumerate() {
            *t = (log_u[i] + *t + log_v[j]).exp();
        }
    }
    plan
}

/// Solve the entropy-regularized transport problem by alternating scaling.
///
/// `epsilon` is relative: the cost is divided by its largest entry before the
/// kernel `exp(-M/epsilon)` is formed. Iteration stops once the max-norm
/// marginal violation reaches `tol` (checked every few sweeps) or after
/// `max_iter` sweeps; a plan that ran out of iterations is still returned,
/// flagged unconverged with its achieved violation.
///
/// Scaling vectors that overflow or underflow the representable range switch
/// the iteration into log-domain updates; tiny `epsilon` values whose kernel
/// would underflow outright start there.
pub fn sinkhorn<R: Real>(
    cost: &CostMatrix<R>,
    marginals: &Marginals<R>,
    epsilon: R,
    tol: R,
    max_iter: usize,
) -> Result<TransportPlan<R>> {
    if !(epsilon > R::zero()) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if !(tol > R::zero()) || !tol.is_finite() {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let (l, u) = cost.shape();
    if marginals.a.len() != l || marginals.b.len() != u {
        return Err(Error::ShapeMismatch(format!(
            "cost is {l}x{u} but marginals have lengths {} and {}",
            marginals.a.len(),
            marginals.b.len()
        )));
    }

    let log_kernel = cost.normalized().mapv(|c| -c / epsilon);

    // Guards for the scaling vectors (D-style bounds, clamped into range for
    // narrower scalar types).
    let hi: R = {
        let bound = real::<R>(1e100);
        if bound.is_finite() {
            bound
        } else {
            R::max_value().sqrt()
        }
    };
    let lo = hi.recip();
    // The naive kernel underflows once -1/epsilon drops below the log of the
    // smallest positive value; start in log domain with margin to spare.
    let needs_log_start = epsilon.recip() > -(R::min_positive_value().ln()) / real(2.0);

    let mut scale_u = Array1::from_elem(l, R::one());
    let mut scale_v = Array1::from_elem(u, R::one());
    let mut iterations = 0usize;
    let mut stabilized = needs_log_start;

    if !needs_log_start {
        let kernel = log_kernel.mapv(R::exp);
        let unstable = |x: &R| !x.is_finite() || *x > hi || (*x > R::zero() && *x < lo);
        while iterations < max_iter {
            let kv = kernel.dot(&scale_v);
            let next_u = Array1::from_shape_fn(l, |i| marginals.a[i] / kv[i]);
            if next_u.iter().any(unstable) {
                stabilized = true;
                break;
            }
            scale_u = next_u;
            let ktu = kernel.t().dot(&scale_u);
            let next_v = Array1::from_shape_fn(u, |j| marginals.b[j] / ktu[j]);
            if next_v.iter().any(unstable) {
                stabilized = true;
                break;
            }
            scale_v = next_v;
            iterations += 1;
            if iterations % CHECK_EVERY == 0 {
                let plan = materialize_linear(&kernel, &scale_u, &scale_v);
                if violation_of(&plan, marginals) <= tol {
                    break;
                }
            }
        }
        if !stabilized {
            let plan = materialize_linear(&kernel, &scale_u, &scale_v);
            let marginal_violation = violation_of(&plan, marginals);
            return Ok(TransportPlan {
                values: plan,
                epsilon,
                iterations,
                marginal_violation,
                converged: marginal_violation <= tol,
                stabilized,
            });
        }
    }

    // Log-domain continuation: absorb the current (finite) scalings and keep
    // sweeping with log-sum-exp reductions.
    let log_a = marginals.a.mapv(R::ln);
    let log_b = marginals.b.mapv(R::ln);
    let mut log_u = scale_u.mapv(R::ln);
    let mut log_v = scale_v.mapv(R::ln);
    let mut scratch = vec![R::zero(); l.max(u)];
    while iterations < max_iter {
        for i in 0..l {
            let mut peak = R::neg_infinity();
            for j in 0..u {
                let t = log_kernel[(i, j)] + log_v[j];
                scratch[j] = t;
                peak = peak.max(t);
            }
            let mut total = R::zero();
            for s in scratch.iter().take(u) {
                total += (*s - peak).exp();
            }
            log_u[i] = log_a[i] - (peak + total.ln());
        }
        for j in 0..u {
            let mut peak = R::neg_infinity();
            for i in 0..l {
                let t = log_kernel[(i, j)] + log_u[i];
                scratch[i] = t;
                peak = peak.max(t);
            }
            let mut total = R::zero();
            for s in scratch.iter().take(l) {
                total += (*s - peak).exp();
            }
            log_v[j] = log_b[j] - (peak + total.ln());
        }
        iterations += 1;
        if iterations % CHECK_EVERY == 0 {
            let plan = materialize_log(&log_kernel, &log_u, &log_v);
            if violation_of(&plan, marginals) <= tol {
                break;
            }
        }
    }
    let plan = materialize_log(&log_kernel, &log_u, &log_v);
    let marginal_violation = violation_of(&plan, marginals);
    Ok(TransportPlan {
        values: plan,
        epsilon,
        iterations,
        marginal_violation,
        converged: marginal_violation <= tol,
        stabilized,
    })
}

/// Exhaustively solve the uniform square transport problem, whose optima are
/// permutations: returns the minimal average cost `(1/n) * sum_i M[i, p(i)]`
/// and one minimizing permutation.
///
/// Guarded at `n <= 8`; beyond that the factorial enumeration is rejected.
pub fn exact_ot_uniform_small<R: Real>(cost: &CostMatrix<R>) -> Result<(R, Vec<usize>)> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(Error::ShapeMismatch(format!(
            "exhaustive search needs a square cost matrix, got {n}x{m}"
        )));
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let average = |p: &[usize]| -> R {
        let mut acc = R::zero();
        for (i, &j) in p.iter().enumerate() {
            acc += cost.values[(i, j)];
        }
        acc / real(n as f64)
    };

    // Heap's algorithm over index permutations.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_cost = average(&perm);
    let mut best_perm = perm.clone();
    let mut stack = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            let c = average(&perm);
            if c < best_cost {
                best_cost = c;
                best_perm = perm.clone();
            }
            stack[i] += 1;
            i = 0;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok((best_cost, best_perm))
}

/// Frobenius inner product of a plan with the (unnormalized) cost matrix:
/// the linear transport cost of the plan.
pub fn entropic_linear_cost<R: Real>(plan: &TransportPlan<R>, cost: &CostMatrix<R>) -> Result<R> {
    if plan.shape() != cost.shape() {
        return Err(Error::ShapeMismatch(format!(
            "plan is {:?} but cost is {:?}",
            plan.shape(),
            cost.shape()
        )));
    }
    let mut acc = R::zero();
    for (t, m) in plan.values.iter().zip(cost.values.iter()) {
        acc += *t * *m;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points<R: Real>(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<R> {
        Array2::from_shape_fn((n, d), |_| real(rng.random_range(-5.0..5.0)))
    }

    #[test]
    fn sq_dist_identical_points_is_zero() {
        let a = array![[0.0, 0.0]];
        let cost = pairwise_sq_dist(a.view(), a.view()).unwrap();
        assert_eq!(cost.values()[(0, 0)], 0.0);
        assert_eq!(cost.max_entry(), 0.0);
    }

    #[test]
    fn sq_dist_three_four_five() {
        let s = array![[0.0, 0.0]];
        let t = array![[3.0, 4.0]];
        let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
        assert_eq!(cost.values()[(0, 0)], 25.0);
    }

    #[test]
    fn sq_dist_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Array2<f64> = points(&mut rng, 5, 3);
        let t: Array2<f64> = points(&mut rng, 7, 3);
        let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
        for i in 0..5 {
            for j in 0..7 {
                // Independent per-entry evaluation.
                let mut expected = 0.0;
                for f in 0..3 {
                    expected += (s[(i, f)] - t[(j, f)]).powi(2);
                }
                assert!((cost.values()[(i, j)] - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sq_dist_rejects_dimension_mismatch() {
        let s = array![[0.0, 0.0]];
        let t = array![[1.0, 2.0, 3.0]];
        assert!(matches!(
            pairwise_sq_dist(s.view(), t.view()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn marginals_reject_nonpositive_and_unnormalized() {
        assert!(Marginals::new(array![0.5f64, 0.5], array![1.0]).is_ok());
        assert!(Marginals::new(array![0.5f64, 0.0, 0.5], array![1.0]).is_err());
        assert!(Marginals::new(array![0.6f64, 0.6], array![1.0]).is_err());
    }

    #[test]
    fn sinkhorn_single_mass_unit() {
        let cost = CostMatrix::new(array![[0.0f64]]).unwrap();
        let marg = Marginals::uniform(1, 1).unwrap();
        for eps in [1e-3, 0.1, 100.0] {
            let plan = sinkhorn(&cost, &marg, eps, 1e-9, 1000).unwrap();
            assert!((plan.values()[(0, 0)] - 1.0).abs() <= 1e-12);
            assert!(plan.converged());
        }
    }

    #[test]
    fn sinkhorn_large_epsilon_gives_outer_product() {
        let cost = CostMatrix::new(array![[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let marg = Marginals::uniform(2, 2).unwrap();
        // At relative epsilon = e the symmetric solution has diagonal
        // 0.5 / (1 + exp(-1/e)), so the entrywise distance to the outer
        // product is about 1/(4e): 1.25e-3 at e = 100, 1.25e-4 at e = 1000.
        let plan = sinkhorn(&cost, &marg, 100.0, 1e-9, 10_000).unwrap();
        for t in plan.values() {
            assert!((*t - 0.25).abs() <= 2e-3);
        }
        let plan = sinkhorn(&cost, &marg, 1000.0, 1e-9, 10_000).unwrap();
        for t in plan.values() {
            assert!((*t - 0.25).abs() <= 1e-3);
        }
    }

    #[test]
    fn sinkhorn_small_epsilon_recovers_permutation() {
        let cost = CostMatrix::new(array![[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let marg = Marginals::uniform(2, 2).unwrap();
        let plan = sinkhorn(&cost, &marg, 1e-3, 1e-9, 50_000).unwrap();
        assert!(plan.stabilized(), "tiny epsilon should use the log domain");
        assert!((plan.values()[(0, 0)] - 0.5).abs() <= 1e-3);
        assert!((plan.values()[(1, 1)] - 0.5).abs() <= 1e-3);
        assert!(plan.values()[(0, 1)].abs() <= 1e-3);
        let linear = entropic_linear_cost(&plan, &cost).unwrap();
        let (exact, _) = exact_ot_uniform_small(&cost).unwrap();
        assert!((linear - exact).abs() <= 1e-2);
    }

    #[test]
    fn solver_works_in_single_precision() {
        let cost = CostMatrix::new(array![[0.0f32, 1.0], [1.0, 0.0]]).unwrap();
        let marg = Marginals::<f32>::uniform(2, 2).unwrap();
        let plan = sinkhorn(&cost, &marg, 0.1f32, 1e-5, 10_000).unwrap();
        assert!(plan.converged());
        assert!(plan.values().iter().all(|t| *t > 0.0));
        let total: f32 = plan.values().sum();
        assert!((total - 1.0).abs() <= 1e-5);

        // Tiny epsilon exercises the log-domain path at f32 range limits.
        let sharp = sinkhorn(&cost, &marg, 1e-3f32, 1e-5, 50_000).unwrap();
        assert!(sharp.stabilized());
        assert!((sharp.values()[(0, 0)] - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn sinkhorn_reports_nonconvergence_instead_of_failing() {
        let cost = CostMatrix::new(array![[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let marg = Marginals::new(array![0.9f64, 0.1], array![0.2, 0.8]).unwrap();
        let plan = sinkhorn(&cost, &marg, 0.05, 1e-14, 3).unwrap();
        assert!(!plan.converged());
        assert!(plan.marginal_violation() > 1e-14);
        assert_eq!(plan.iterations(), 3);
    }

    #[test]
    fn exact_ot_trivial_cases() {
        let cost = CostMatrix::new(array![[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let (c, p) = exact_ot_uniform_small(&cost).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(p, vec![0, 1]);

        let single = CostMatrix::new(array![[5.0f64]]).unwrap();
        let (c, p) = exact_ot_uniform_small(&single).unwrap();
        assert_eq!(c, 5.0);
        assert_eq!(p, vec![0]);
    }

    #[test]
    fn exact_ot_rejects_large_instances() {
        let cost = CostMatrix::new(Array2::<f64>::zeros((9, 9))).unwrap();
        assert!(matches!(
            exact_ot_uniform_small(&cost),
            Err(Error::TooLarge { n: 9, limit: 8 })
        ));
    }

    /// Lexicographic-order permutation enumeration, independent of the
    /// Heap's-algorithm order used by the implementation.
    fn exact_by_lexicographic(cost: &CostMatrix<f64>) -> f64 {
        fn recurse(cost: &CostMatrix<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = used.len();
            if row == n {
                *best = best.min(acc / n as f64);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    recurse(cost, row + 1, used, acc + cost.values()[(row, j)], best);
                    used[j] = false;
                }
            }
        }
        let n = cost.shape().0;
        let mut best = f64::INFINITY;
        recurse(cost, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn exact_ot_matches_independent_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let values = Array2::from_shape_fn((4, 4), |_| rng.random_range(0..10) as f64);
            let cost = CostMatrix::new(values).unwrap();
            let (c, perm) = exact_ot_uniform_small(&cost).unwrap();
            assert_eq!(c, exact_by_lexicographic(&cost));
            // The returned permutation realizes the returned cost.
            let realized: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| cost.values()[(i, j)])
                .sum::<f64>()
                / 4.0;
            assert_eq!(realized, c);
        }
    }

    #[test]
    fn linear_cost_trivial_values() {
        let plan_cost = CostMatrix::new(array![[0.0f64]]).unwrap();
        let marg = Marginals::uniform(1, 1).unwrap();
        let plan = sinkhorn(&plan_cost, &marg, 0.1, 1e-9, 100).unwrap();
        assert_eq!(entropic_linear_cost(&plan, &plan_cost).unwrap(), 0.0);

        let cost = CostMatrix::new(array![[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let marg2 = Marginals::uniform(2, 2).unwrap();
        let diagonal = sinkhorn(&cost, &marg2, 1e-3, 1e-9, 50_000).unwrap();
        assert!(entropic_linear_cost(&diagonal, &cost).unwrap() <= 1e-2);

        let mismatched = CostMatrix::new(array![[0.0f64]]).unwrap();
        assert!(entropic_linear_cost(&diagonal, &mismatched).is_err());
    }

    #[test]
    fn sinkhorn_cost_never_beats_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let values = Array2::from_shape_fn((3, 3), |_| rng.random_range(0.1..4.0));
            let cost = CostMatrix::new(values).unwrap();
            let marg = Marginals::uniform(3, 3).unwrap();
            let plan = sinkhorn(&cost, &marg, 0.1, 1e-9, 10_000).unwrap();
            let linear = entropic_linear_cost(&plan, &cost).unwrap();
            let (exact, _) = exact_ot_uniform_small(&cost).unwrap();
            // Slack covers the residual marginal infeasibility of the plan.
            let slack = plan.marginal_violation() * real::<f64>(3.0) * cost.max_entry();
            assert!(
                linear >= exact - slack,
                "linear {linear} below exact {exact}"
            );
        }
    }

    fn flat_points(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn marginal_feasibility_and_positivity(
            l in 1usize..6,
            u in 1usize..7,
            seed in 0u64..1000,
            eps in 0.05f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Array2<f64> = points(&mut rng, l, 2);
            let t: Array2<f64> = points(&mut rng, u, 2);
            let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
            let marg = Marginals::uniform(l, u).unwrap();
            let tol = 1e-9;
            let plan = sinkhorn(&cost, &marg, eps, tol, 20_000).unwrap();
            prop_assert!(plan.converged());
            prop_assert!(plan.marginal_violation() <= tol);
            prop_assert!(plan.values().iter().all(|t| *t > 0.0));
            let total: f64 = plan.values().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn large_epsilon_limit_is_outer_product(
            l in 1usize..5,
            u in 1usize..5,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Array2<f64> = points(&mut rng, l, 3);
            let t: Array2<f64> = points(&mut rng, u, 3);
            let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
            let marg = Marginals::uniform(l, u).unwrap();
            let plan = sinkhorn(&cost, &marg, 100.0, 1e-12, 20_000).unwrap();
            for i in 0..l {
                for j in 0..u {
                    let outer = marg.a()[i] * marg.b()[j];
                    prop_assert!((plan.values()[(i, j)] - outer).abs() <= 1e-3);
                }
            }
        }

        #[test]
        fn transpose_symmetry(
            l in 1usize..5,
            u in 1usize..5,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Array2<f64> = points(&mut rng, l, 2);
            let t: Array2<f64> = points(&mut rng, u, 2);
            let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
            let cost_t = pairwise_sq_dist(t.view(), s.view()).unwrap();
            let marg = Marginals::uniform(l, u).unwrap();
            let marg_t = Marginals::uniform(u, l).unwrap();
            let plan = sinkhorn(&cost, &marg, 0.2, 1e-10, 20_000).unwrap();
            let plan_t = sinkhorn(&cost_t, &marg_t, 0.2, 1e-10, 20_000).unwrap();
            for i in 0..l {
                for j in 0..u {
                    prop_assert!((plan.values()[(i, j)] - plan_t.values()[(j, i)]).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn translation_invariance_of_sq_dist(
            s in flat_points(4, 3),
            t in flat_points(5, 3),
            shift in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let cost = pairwise_sq_dist(s.view(), t.view()).unwrap();
            let mut s2 = s.clone();
            let mut t2 = t.clone();
            for mut row in s2.rows_mut() {
                for (f, x) in row.iter_mut().enumerate() {
                    *x += shift[f];
                }
            }
            for mut row in t2.rows_mut() {
                for (f, x) in row.iter_mut().enumerate() {
                    *x += shift[f];
                }
            }
            let shifted = pairwise_sq_dist(s2.view(), t2.view()).unwrap();
            for (a, b) in cost.values().iter().zip(shifted.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
