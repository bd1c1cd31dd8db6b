//! Shared numerical primitives: the anisotropic RBF kernel and its Gram
//! matrices, seeded k-means, principal directions, and regularized symmetric
//! solves. Everything here is a pure function of its inputs (plus an explicit
//! seed), so calls are safe to run concurrently.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A dataset stored column-wise: `p` feature rows by `N` sample columns.
/// Construction rejects empty and non-finite data.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data matrix contains NaN or Inf"));
        }
        Ok(DataMatrix { values })
    }

    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::invalid("no columns given"));
        }
        let p = cols[0].len();
        if cols.iter().any(|c| c.len() != p) {
            return Err(Error::invalid("columns differ in length"));
        }
        let mut m = DMatrix::zeros(p, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        Self::new(m)
    }

    /// Horizontal concatenation of matrices sharing a feature dimension.
    pub fn concat(parts: &[&DataMatrix]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("nothing to concatenate"));
        }
        let p = parts[0].dim();
        if parts.iter().any(|m| m.dim() != p) {
            return Err(Error::invalid("feature dimensions differ"));
        }
        let total: usize = parts.iter().map(|m| m.len()).sum();
        let mut out = DMatrix::zeros(p, total);
        let mut at = 0;
        for m in parts {
            out.view_mut((0, at), (p, m.len())).copy_from(m.matrix());
            at += m.len();
        }
        Self::new(out)
    }

    /// Feature dimension `p`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one column
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Column `j` as a contiguous slice (column-major storage).
    pub fn column(&self, j: usize) -> &[f64] {
        let p = self.dim();
        &self.values.as_slice()[j * p..(j + 1) * p]
    }

    /// Columns selected by index, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("no columns selected"));
        }
        let p = self.dim();
        let mut m = DMatrix::zeros(p, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            if j >= self.len() {
                return Err(Error::invalid(format!("column index {j} out of range")));
            }
            m.column_mut(k).copy_from_slice(self.column(j));
        }
        Self::new(m)
    }
}

/// Kernel hyper-parameters: variance `sigma2` and per-dimension inverse
/// squared length-scales `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub sigma2: f64,
    pub weights: DVector<f64>,
}

impl KernelParams {
    pub fn new(sigma2: f64, weights: DVector<f64>) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::invalid(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "kernel weights must be finite and non-negative",
            ));
        }
        Ok(KernelParams { sigma2, weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// kr(x, x') = sigma2 * exp(-0.5 * sum_k w_k |x_k - x'_k|^2). Always in (0, sigma2].
pub fn kernel(x: &[f64], x2: &[f64], kp: &KernelParams) -> Result<f64> {
    if x.len() != kp.dim() || x2.len() != kp.dim() {
        return Err(Error::invalid(format!(
            "kernel input lengths {}/{} do not match weight count {}",
            x.len(),
            x2.len(),
            kp.dim()
        )));
    }
    Ok(kernel_unchecked(x, x2, kp))
}

#[inline]
fn kernel_unchecked(x: &[f64], x2: &[f64], kp: &KernelParams) -> f64 {
    let mut expo = 0.0;
    let w = kp.weights.as_slice();
    for k in 0..x.len() {
        let d = x[k] - x2[k];
        expo += w[k] * d * d;
    }
    // clamp away exp underflow so the value stays strictly positive
    (kp.sigma2 * (-0.5 * expo).exp()).max(f64::MIN_POSITIVE)
}

/// Gram matrix with (i, j) entry kr(column i of `a`, column j of `b`).
/// With `a == b` the result is symmetric with diagonal `sigma2`.
pub fn kernel_matrix(a: &DataMatrix, b: &DataMatrix, kp: &KernelParams) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.dim() != kp.dim() {
        return Err(Error::invalid(format!(
            "kernel weights have length {}, data has dimension {}",
            kp.dim(),
            a.dim()
        )));
    }
    let na = a.len();
    let nb = b.len();
    let mut out = vec![0.0; na * nb];
    out.par_chunks_mut(na).enumerate().for_each(|(j, col)| {
        let bj = b.column(j);
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = kernel_unchecked(a.column(i), bj, kp);
        }
    });
    Ok(DMatrix::from_vec(na, nb, out))
}

pub(crate) struct KmeansResult {
    pub centroids: DMatrix<f64>,
    pub assignments: Vec<usize>,
    #[allow(dead_code)] // read by the objective-monotonicity tests
    pub objective_history: Vec<f64>,
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_REL_TOL: f64 = 1e-6;

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        let d = x[k] - y[k];
        s += d * d;
    }
    s
}

/// Lloyd's algorithm with k-means++ initialization. Assignment ties break to
/// the lowest centroid index; empty clusters are re-seeded from the point
/// farthest from its assigned centroid.
pub(crate) fn kmeans_full(x: &DataMatrix, m: usize, seed: u64) -> Result<KmeansResult> {
    let n = x.len();
    let p = x.dim();
    if m == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if m > n {
        return Err(Error::invalid(format!(
            "requested {m} clusters from {n} samples"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(x, m, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut history = Vec::new();

    for it in 0..KMEANS_MAX_ITERS {
        // assignment step
        let mut objective = 0.0;
        for (i, slot) in assignments.iter_mut().enumerate() {
            let xi = x.column(i);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..m {
                let d = squared_distance(xi, centroid_col(&centroids, c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            *slot = best;
            objective += best_d;
        }
        history.push(objective);
        if it > 0 {
            let prev = history[it - 1];
            if prev == 0.0 || (prev - objective).abs() / prev < KMEANS_REL_TOL {
                break;
            }
        }

        // update step
        let mut sums = DMatrix::<f64>::zeros(p, m);
        let mut counts = vec![0usize; m];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            let xi = x.column(i);
            for r in 0..p {
                sums[(r, c)] += xi[r];
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for r in 0..p {
                    centroids[(r, c)] = sums[(r, c)] * inv;
                }
            }
        }
        // re-seed empty clusters from the farthest points, each point used once
        let empties: Vec<usize> = (0..m).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut dists: Vec<(usize, f64)> = (0..n)
                .map(|i| {
                    (
                        i,
                        squared_distance(x.column(i), centroid_col(&centroids, assignments[i])),
                    )
                })
                .collect();
            dists.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (slot, c) in empties.into_iter().enumerate() {
                let (i, _) = dists[slot.min(n - 1)];
                for r in 0..p {
                    centroids[(r, c)] = x.column(i)[r];
                }
            }
        }
    }

    Ok(KmeansResult {
        centroids,
        assignments,
        objective_history: history,
    })
}

fn centroid_col(centroids: &DMatrix<f64>, c: usize) -> &[f64] {
    let p = centroids.nrows();
    &centroids.as_slice()[c * p..(c + 1) * p]
}

fn kmeanspp_init(x: &DataMatrix, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.len();
    let p = x.dim();
    let mut centroids = DMatrix::zeros(p, m);
    let mut chosen = vec![false; n];

    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.column_mut(0).copy_from_slice(x.column(first));

    let mut min_d: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.column(i), x.column(first)))
        .collect();

    for c in 1..m {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = None;
            for (i, d) in min_d.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    idx = Some(i);
                    break;
                }
            }
            // all remaining mass on duplicates of chosen points
            idx.unwrap_or_else(|| (0..n).rev().find(|&i| min_d[i] > 0.0).unwrap_or(n - 1))
        } else {
            // every point coincides with a centroid; take the first unchosen
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.column_mut(c).copy_from_slice(x.column(pick));
        for (i, slot) in min_d.iter_mut().enumerate() {
            let d = squared_distance(x.column(i), x.column(pick));
            if d < *slot {
                *slot = d;
            }
        }
    }
    centroids
}

/// K-means centroids of the columns of `x` (the auxiliary inducing points
/// upstream). Deterministic for a fixed seed.
pub fn kmeans_centroids(x: &DataMatrix, m: usize, seed: u64) -> Result<DataMatrix> {
    let res = kmeans_full(x, m, seed)?;
    DataMatrix::new(res.centroids)
}

/// K-means partition of the columns of `x` into `m` non-empty groups,
/// returned as per-cluster column indices.
pub fn kmeans_partition(x: &DataMatrix, m: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let res = kmeans_full(x, m, seed)?;
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &c) in res.assignments.iter().enumerate() {
        groups[c].push(i);
    }
    // duplicates or ties can leave a cluster empty; steal the farthest point
    // from the largest cluster so every group trains on at least one sample
    while let Some(empty) = groups.iter().position(|g| g.is_empty()) {
        let donor = (0..m)
            .filter(|&c| groups[c].len() > 1)
            .max_by_key(|&c| groups[c].len())
            .ok_or_else(|| Error::invalid("cannot partition: more clusters than samples"))?;
        let (pos, _) = groups[donor]
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                (
                    pos,
                    squared_distance(x.column(i), centroid_col(&res.centroids, donor)),
                )
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .unwrap();
        let moved = groups[donor].remove(pos);
        groups[empty].push(moved);
    }
    Ok(groups)
}

/// Rows are the unit-norm eigenvectors of the sample covariance of `x`'s
/// columns (unbiased, mean-centred), ordered by descending eigenvalue. The
/// sign of each row is fixed so its largest-magnitude entry is positive.
pub fn principal_directions(x: &DataMatrix, k: usize) -> Result<DMatrix<f64>> {
    let p = x.dim();
    let n = x.len();
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "requested {k} principal directions in dimension {p}"
        )));
    }
    let cov = if n >= 2 {
        let mean = x.matrix().column_mean();
        let mut centered = x.matrix().clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        (&centered * centered.transpose()) / (n as f64 - 1.0)
    } else {
        DMatrix::zeros(p, p)
    };

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut rows = DMatrix::zeros(k, p);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let norm = v.norm();
        let mut row: Vec<f64> = v
            .iter()
            .map(|&e| if norm > 0.0 { e / norm } else { e })
            .collect();
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| {
                a.1.abs()
                    .partial_cmp(&b.1.abs())
                    .unwrap()
                    .then(b.0.cmp(&a.0))
            })
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            for e in row.iter_mut() {
                *e = -*e;
            }
        }
        for (c, e) in row.into_iter().enumerate() {
            rows[(r, c)] = e;
        }
    }
    Ok(rows)
}

const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];
const SOLVE_RESIDUAL_TOL: f64 = 1e-6;

/// Cholesky factorization of A + λI, escalating λ through the jitter ladder
/// until a factorization succeeds.
pub(crate) fn cholesky_jittered(
    a: &DMatrix<f64>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let dim = a.nrows();
    let scale = {
        let t = a.trace().abs() / dim as f64;
        if t > 0.0 {
            t
        } else {
            1.0
        }
    };
    for mult in JITTER_LADDER {
        let lambda = mult * scale;
        let mut shifted = a.clone();
        for i in 0..dim {
            shifted[(i, i)] += lambda;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok(ch);
        }
    }
    Err(Error::NumericalFailure(
        "Cholesky failed at every jitter level".into(),
    ))
}

/// Solve (A + λI) X = B for a symmetric A, escalating λ through
/// {0, 1e-10, 1e-8, 1e-6}·tr(A)/dim until a Cholesky factorization succeeds
/// with relative residual at most 1e-6.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    if a.ncols() != dim {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != dim {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            dim
        )));
    }
    let scale = {
        let t = a.trace().abs() / dim as f64;
        if t > 0.0 {
            t
        } else {
            1.0
        }
    };
    let b_norm = b.norm();
    let mut last_residual = f64::INFINITY;
    for mult in JITTER_LADDER {
        let lambda = mult * scale;
        let mut shifted = a.clone();
        for i in 0..dim {
            shifted[(i, i)] += lambda;
        }
        let Some(chol) = shifted.clone().cholesky() else {
            continue;
        };
        let x = chol.solve(b);
        let residual = (&shifted * &x - b).norm();
        let rel = if b_norm > 0.0 {
            residual / b_norm
        } else {
            residual
        };
        if rel <= SOLVE_RESIDUAL_TOL {
            return Ok(x);
        }
        last_residual = rel;
    }
    Err(Error::NumericalFailure(format!(
        "symmetric solve failed at every jitter level (final relative residual {last_residual:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dm(rows: usize, cols: usize, vals: &[f64]) -> DataMatrix {
        DataMatrix::new(DMatrix::from_row_slice(rows, cols, vals)).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kernel_at_identical_inputs_is_sigma2() {
        let kp = KernelParams::new(3.5, DVector::from_vec(vec![0.7, 1.3])).unwrap();
        let x = [0.2, -4.0];
        assert_eq!(kernel(&x, &x, &kp).unwrap(), 3.5);
    }

    #[test]
    fn kernel_with_zero_weights_is_sigma2_everywhere() {
        let kp = KernelParams::new(2.0, DVector::from_vec(vec![0.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            kernel(&[1.0, 2.0, 3.0], &[-9.0, 4.0, 100.0], &kp).unwrap(),
            2.0
        );
    }

    #[test]
    fn kernel_closed_form_spot_value() {
        // sigma2=2, w=1, |x - x2|^2 = 2  ->  2 e^{-1}
        let kp = KernelParams::new(2.0, DVector::from_vec(vec![1.0])).unwrap();
        let got = kernel(&[0.0], &[2f64.sqrt()], &kp).unwrap();
        assert!(close(got, 2.0 * (-1.0f64).exp(), 1e-12), "got {got}");
    }

    #[test]
    fn kernel_rejects_dimension_mismatch() {
        let kp = KernelParams::new(1.0, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!(matches!(
            kernel(&[1.0], &[1.0, 2.0], &kp),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn kernel_matrix_single_column() {
        let kp = KernelParams::new(4.0, DVector::from_vec(vec![1.0])).unwrap();
        let a = dm(1, 1, &[0.5]);
        let k = kernel_matrix(&a, &a, &kp).unwrap();
        assert_eq!(k.nrows(), 1);
        assert_eq!(k[(0, 0)], 4.0);
    }

    #[test]
    fn kernel_matrix_zero_weights_gives_ones() {
        let kp = KernelParams::new(1.0, DVector::from_vec(vec![0.0, 0.0])).unwrap();
        let a = dm(2, 2, &[0.0, 5.0, 1.0, -3.0]);
        let k = kernel_matrix(&a, &a, &kp).unwrap();
        assert_eq!(k, DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn kernel_matrix_is_exactly_symmetric() {
        let kp = KernelParams::new(1.7, DVector::from_vec(vec![0.4, 2.0, 0.1])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..3 * 8)
            .map(|_| rng.random::<f64>() * 4.0 - 2.0)
            .collect();
        let a = DataMatrix::new(DMatrix::from_vec(3, 8, vals)).unwrap();
        let k = kernel_matrix(&a, &a, &kp).unwrap();
        assert_eq!(k, k.transpose());
        for i in 0..8 {
            assert_eq!(k[(i, i)], 1.7);
        }
    }

    #[test]
    fn kmeans_m_equals_n_returns_permutation() {
        let a = dm(2, 4, &[0.0, 1.0, 5.0, -2.0, 0.0, 1.0, 5.0, -2.0]);
        let c = kmeans_centroids(&a, 4, 3).unwrap();
        let mut seen = [false; 4];
        for j in 0..4 {
            let col = c.column(j);
            let hit = (0..4).find(|&i| !seen[i] && a.column(i) == col);
            let hit = hit.expect("centroid must be one of the input columns");
            seen[hit] = true;
        }
    }

    #[test]
    fn kmeans_single_cluster_is_column_mean() {
        let a = dm(2, 3, &[0.0, 3.0, 6.0, 1.0, 1.0, 4.0]);
        let c = kmeans_centroids(&a, 1, 11).unwrap();
        assert!(close(c.column(0)[0], 3.0, 1e-12));
        assert!(close(c.column(0)[1], 2.0, 1e-12));
    }

    #[test]
    fn kmeans_separates_two_groups() {
        // two well-separated groups; verify by brute-force nearest-centroid check
        let mut cols = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            cols.push(DVector::from_vec(vec![
                rng.random::<f64>() * 0.2,
                rng.random::<f64>() * 0.2,
            ]));
        }
        for _ in 0..20 {
            cols.push(DVector::from_vec(vec![
                10.0 + rng.random::<f64>() * 0.2,
                10.0 + rng.random::<f64>() * 0.2,
            ]));
        }
        let x = DataMatrix::from_columns(&cols).unwrap();
        let c = kmeans_centroids(&x, 2, 123).unwrap();
        let d_between = squared_distance(c.column(0), c.column(1));
        for i in 0..x.len() {
            let d0 = squared_distance(x.column(i), c.column(0));
            let d1 = squared_distance(x.column(i), c.column(1));
            assert!(
                d0.min(d1) < d_between,
                "within-cluster exceeds between-group"
            );
        }
    }

    #[test]
    fn kmeans_rejects_more_clusters_than_samples() {
        let a = dm(1, 2, &[0.0, 1.0]);
        assert!(matches!(
            kmeans_centroids(&a, 3, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn kmeans_objective_never_increases() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..3 * 60).map(|_| rng.random::<f64>() * 10.0).collect();
            let x = DataMatrix::new(DMatrix::from_vec(3, 60, vals)).unwrap();
            let res = kmeans_full(&x, 5, seed).unwrap();
            for w in res.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9 * w[0].abs(),
                    "objective increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn kmeans_partition_covers_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<f64> = (0..2 * 37).map(|_| rng.random::<f64>()).collect();
        let x = DataMatrix::new(DMatrix::from_vec(2, 37, vals)).unwrap();
        let groups = kmeans_partition(&x, 4, 9).unwrap();
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert!(groups.iter().all(|g| !g.is_empty()));
    }

    #[test]
    fn principal_direction_of_line_through_origin() {
        let ts = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let cols: Vec<DVector<f64>> = ts
            .iter()
            .map(|&t| DVector::from_vec(vec![t / 2f64.sqrt(), t / 2f64.sqrt()]))
            .collect();
        let x = DataMatrix::from_columns(&cols).unwrap();
        let p = principal_directions(&x, 1).unwrap();
        assert!(close(p[(0, 0)], std::f64::consts::FRAC_1_SQRT_2, 1e-10));
        assert!(close(p[(0, 1)], std::f64::consts::FRAC_1_SQRT_2, 1e-10));
    }

    #[test]
    fn principal_directions_full_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vals: Vec<f64> = (0..4 * 30).map(|_| rng.random::<f64>() * 3.0).collect();
        let x = DataMatrix::new(DMatrix::from_vec(4, 30, vals)).unwrap();
        let p = principal_directions(&x, 4).unwrap();
        let gram = &p * p.transpose();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    close(gram[(i, j)], want, 1e-8),
                    "gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
    }

    #[test]
    fn principal_directions_row_norms_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let vals: Vec<f64> = (0..6 * 50)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let x = DataMatrix::new(DMatrix::from_vec(6, 50, vals)).unwrap();
        let p = principal_directions(&x, 3).unwrap();
        for i in 0..3 {
            assert!(close(p.row(i).norm(), 1.0, 1e-10));
            for j in (i + 1)..3 {
                assert!(p.row(i).dot(&p.row(j)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn principal_directions_identical_columns_degenerate() {
        let a = dm(3, 5, &[1.0; 15]);
        let p = principal_directions(&a, 2).unwrap();
        for i in 0..2 {
            assert!(close(p.row(i).norm(), 1.0, 1e-10));
        }
    }

    #[test]
    fn principal_directions_rejects_k_above_p() {
        let a = dm(2, 3, &[0.0, 1.0, 2.0, 0.0, 1.0, 2.0]);
        assert!(matches!(
            principal_directions(&a, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn solve_spd_identity_returns_rhs() {
        let a = DMatrix::identity(3, 3);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_spd_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 4.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert!(close(x[(0, 0)], 1.0, 1e-12));
        assert!(close(x[(1, 0)], 1.0, 1e-12));
    }

    #[test]
    fn solve_spd_singular_with_jitter_matches_pseudo_inverse() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 2.0]);
        let x = solve_spd(&a, &b).unwrap();
        // pseudo-inverse solution of the rank-1 system is (1, 1)
        assert!(close(x[(0, 0)], 1.0, 1e-6));
        assert!(close(x[(1, 0)], 1.0, 1e-6));
        let rel = (&a * &x - &b).norm() / b.norm();
        assert!(rel <= 1e-6, "residual {rel}");
    }

    #[test]
    fn kernel_gram_plus_trace_jitter_is_positive_definite() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let vals: Vec<f64> = (0..3 * n).map(|_| rng.random::<f64>() * 5.0).collect();
            let x = DataMatrix::new(DMatrix::from_vec(3, n, vals)).unwrap();
            let kp = KernelParams::new(
                0.5 + rng.random::<f64>(),
                DVector::from_vec(vec![rng.random(), rng.random(), rng.random()]),
            )
            .unwrap();
            let mut k = kernel_matrix(&x, &x, &kp).unwrap();
            let jitter = 1e-10 * k.trace();
            for i in 0..n {
                k[(i, i)] += jitter;
            }
            assert!(k.cholesky().is_some(), "seed {seed}: jittered Gram not PD");
        }
    }

    proptest! {
        #[test]
        fn kernel_bounded_by_sigma2(
            xs in proptest::collection::vec(-50.0f64..50.0, 4),
            ys in proptest::collection::vec(-50.0f64..50.0, 4),
            ws in proptest::collection::vec(0.0f64..3.0, 4),
            s2 in 0.01f64..10.0,
        ) {
            let kp = KernelParams::new(s2, DVector::from_vec(ws)).unwrap();
            let v = kernel(&xs, &ys, &kp).unwrap();
            prop_assert!(v > 0.0 && v <= s2);
        }
    }
}
