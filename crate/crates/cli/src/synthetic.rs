//! Synthetic two-class transfer tasks: Gaussian blobs in the source domain
//! and a rotated copy of the same distribution as the target domain.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmlearn::numkit::DataMatrix;

pub struct TransferTask {
    pub source_groups: Vec<DataMatrix>,
    pub target_labelled: Vec<DataMatrix>,
    pub target_unlabelled: DataMatrix,
    /// Unlabelled pool ground truth, for diagnostics only.
    pub unlabelled_truth: Vec<usize>,
    pub test_groups: Vec<DataMatrix>,
}

pub struct BlobSpec {
    pub dim: usize,
    pub source_per_class: usize,
    pub labelled_per_class: usize,
    pub unlabelled_per_class: usize,
    pub test_per_class: usize,
    pub sd: f64,
    /// Euclidean distance between the two class centers.
    pub separation: f64,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn blob_column(rng: &mut ChaCha8Rng, center: &[f64], sd: f64) -> Vec<f64> {
    center.iter().map(|&c| c + sd * gauss(rng)).collect()
}

/// A gentle rotation built from seeded Givens rotations over consecutive
/// coordinate planes.
fn rotation(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = DMatrix::<f64>::identity(p, p);
    for k in 0..p.saturating_sub(1) {
        let theta = 0.2 + 0.4 * rng.random::<f64>();
        let mut g = DMatrix::<f64>::identity(p, p);
        g[(k, k)] = theta.cos();
        g[(k + 1, k + 1)] = theta.cos();
        g[(k, k + 1)] = -theta.sin();
        g[(k + 1, k)] = theta.sin();
        r = g * r;
    }
    r
}

/// Build the full task: source blobs, rotated-domain target samples split
/// into few labelled plus an unlabelled pool, and a rotated-domain test set.
pub fn rotated_blob_task(spec: &BlobSpec, seed: u64) -> TransferTask {
    let p = spec.dim;
    let offset = spec.separation / (2.0 * (p as f64).sqrt());
    let centers: [Vec<f64>; 2] = [vec![-offset; p], vec![offset; p]];
    let rot = rotation(p, seed ^ 0x5eed);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make_group = |rng: &mut ChaCha8Rng, count: usize, c: usize, rotate: bool| {
        let mut m = DMatrix::zeros(p, count);
        for j in 0..count {
            let col = blob_column(rng, &centers[c], spec.sd);
            m.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        if rotate {
            m = &rot * m;
        }
        DataMatrix::new(m).expect("finite synthetic data")
    };

    let source_groups: Vec<DataMatrix> = (0..2)
        .map(|c| make_group(&mut rng, spec.source_per_class, c, false))
        .collect();
    let target_labelled: Vec<DataMatrix> = (0..2)
        .map(|c| make_group(&mut rng, spec.labelled_per_class, c, true))
        .collect();

    let mut unlabelled_cols = Vec::new();
    let mut unlabelled_truth = Vec::new();
    for c in 0..2 {
        let g = make_group(&mut rng, spec.unlabelled_per_class, c, true);
        for j in 0..g.len() {
            unlabelled_cols.push(nalgebra::DVector::from_column_slice(g.column(j)));
            unlabelled_truth.push(c);
        }
    }
    let target_unlabelled = DataMatrix::from_columns(&unlabelled_cols).expect("non-empty pool");

    let test_groups: Vec<DataMatrix> = (0..2)
        .map(|c| make_group(&mut rng, spec.test_per_class, c, true))
        .collect();

    TransferTask {
        source_groups,
        target_labelled,
        target_unlabelled,
        unlabelled_truth,
        test_groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_shapes_are_consistent() {
        let spec = BlobSpec {
            dim: 10,
            source_per_class: 20,
            labelled_per_class: 5,
            unlabelled_per_class: 15,
            test_per_class: 8,
            sd: 0.1,
            separation: 5.0,
        };
        let task = rotated_blob_task(&spec, 7);
        assert_eq!(task.source_groups.len(), 2);
        assert_eq!(task.source_groups[0].len(), 20);
        assert_eq!(task.target_labelled[1].len(), 5);
        assert_eq!(task.target_unlabelled.len(), 30);
        assert_eq!(task.unlabelled_truth.len(), 30);
        assert_eq!(task.test_groups[0].dim(), 10);
    }

    #[test]
    fn rotation_is_orthogonal_and_separation_is_preserved() {
        let r = rotation(6, 3);
        let gram = &r * r.transpose();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() <= 1e-12);
            }
        }
        let spec = BlobSpec {
            dim: 6,
            source_per_class: 50,
            labelled_per_class: 5,
            unlabelled_per_class: 5,
            test_per_class: 5,
            sd: 0.05,
            separation: 5.0,
        };
        let task = rotated_blob_task(&spec, 11);
        let mean = |g: &DataMatrix| g.matrix().column_mean();
        let src_gap = (mean(&task.source_groups[0]) - mean(&task.source_groups[1])).norm();
        assert!((src_gap - 5.0).abs() < 0.2, "source separation {src_gap}");
        let tg_gap = (mean(&task.test_groups[0]) - mean(&task.test_groups[1])).norm();
        assert!((tg_gap - 5.0).abs() < 0.3, "target separation {tg_gap}");
    }

    #[test]
    fn task_is_deterministic() {
        let spec = BlobSpec {
            dim: 4,
            source_per_class: 10,
            labelled_per_class: 3,
            unlabelled_per_class: 5,
            test_per_class: 4,
            sd: 0.1,
            separation: 4.0,
        };
        let a = rotated_blob_task(&spec, 9);
        let b = rotated_blob_task(&spec, 9);
        assert_eq!(a.source_groups, b.source_groups);
        assert_eq!(a.target_unlabelled, b.target_unlabelled);
    }
}
