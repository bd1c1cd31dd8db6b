use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmlearn::io::{load_delimited, load_idx, split, LabelledDataset};
use mmlearn::numkit::DataMatrix;
use mmlearn::privacy::DpParams;
use mmlearn::transfer::{fit_transfer, multitask_predict_batch, TransferConfig, TransferModel};
use mmlearn::{Error, Result};

use crate::metrics::Metrics;
use crate::synthetic::{rotated_blob_task, BlobSpec, TransferTask};

use super::ensure_parent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Synthetic,
    MnistSelf,
    Mnist2Usps,
}

#[derive(Debug, Clone)]
pub struct BenchmarkArgs {
    pub suite: Suite,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub d: f64,
}

/// Run a desk-scale protocol at the requested privacy level and at ε = ∞,
/// and emit a report comparing private and non-private accuracy.
pub fn run(args: &BenchmarkArgs) -> Result<()> {
    let dp = DpParams::new(args.epsilon, args.delta, args.d)?;
    match args.suite {
        Suite::Synthetic => synthetic_suite(args, dp),
        Suite::MnistSelf => mnist_self_suite(args, dp),
        Suite::Mnist2Usps => mnist2usps_suite(args, dp),
    }
}

fn report(args: &BenchmarkArgs, name: &str, metrics: &Metrics) -> Result<()> {
    let path = args.output_dir.join(format!("benchmark-{name}.txt"));
    ensure_parent(&path)?;
    metrics.write(&path)?;
    print!("{}", metrics.render());
    println!("report={}", path.display());
    Ok(())
}

fn accuracy_of(model: &TransferModel, groups: &[DataMatrix]) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (c, g) in groups.iter().enumerate() {
        let winners = multitask_predict_batch(model, g.matrix())?;
        correct += winners.iter().filter(|&&w| w == c).count();
        total += g.len();
    }
    Ok(correct as f64 / total as f64)
}

/// Synthetic task mirroring the desk-scale end-to-end protocol: two-class
/// blobs in dimension 10, 200 source samples per class, 10 labelled plus
/// 200 unlabelled target samples in total from a rotated copy of the
/// distribution.
pub fn synthetic_task(seed: u64) -> TransferTask {
    synthetic_task_with_labelled(5, seed)
}

/// Same task with a chosen number of labelled target samples per class.
pub fn synthetic_task_with_labelled(labelled_per_class: usize, seed: u64) -> TransferTask {
    rotated_blob_task(
        &BlobSpec {
            dim: 10,
            source_per_class: 200,
            labelled_per_class,
            unlabelled_per_class: 100,
            test_per_class: 100,
            sd: 0.1,
            separation: 5.0,
        },
        seed,
    )
}

/// Train and evaluate the synthetic task at one privacy level.
pub fn run_synthetic_once(task: &TransferTask, dp: DpParams, seed: u64) -> Result<f64> {
    let cfg = TransferConfig::defaults_for(10, 10, dp);
    let model = fit_transfer(
        &task.source_groups,
        &task.target_labelled,
        Some(&task.target_unlabelled),
        &cfg,
        seed,
    )?;
    accuracy_of(&model, &task.test_groups)
}

fn synthetic_suite(args: &BenchmarkArgs, dp: DpParams) -> Result<()> {
    let task = synthetic_task(args.seed);
    let mut metrics = Metrics::new();
    metrics.push("suite", "synthetic");
    metrics.push("seed", args.seed);
    metrics.push("n_test", 200);

    let mut accuracies = Vec::new();
    for (tag, level) in [("private", dp), ("nonprivate", DpParams::non_private())] {
        let started = Instant::now();
        let acc = run_synthetic_once(&task, level, args.seed)?;
        metrics.push(format!("{tag}_epsilon"), level.epsilon());
        metrics.push(format!("{tag}_accuracy"), acc);
        metrics.push(
            format!("{tag}_elapsed_s"),
            format!("{:.2}", started.elapsed().as_secs_f64()),
        );
        accuracies.push(acc);
    }
    metrics.push("accuracy_gap", (accuracies[0] - accuracies[1]).abs());
    report(args, "synthetic", &metrics)
}

fn data_dir(args: &BenchmarkArgs) -> Result<&Path> {
    args.data_dir
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--data-dir is required for this suite".into()))
}

/// Shuffle-split a dataset into a pool of `pool_size` samples and the rest.
fn pool_split(
    ds: &LabelledDataset,
    pool_size: usize,
    seed: u64,
) -> Result<(LabelledDataset, LabelledDataset)> {
    if pool_size >= ds.n_samples() {
        return Err(Error::InvalidArgument(format!(
            "pool of {pool_size} from {} samples leaves no evaluation data",
            ds.n_samples()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.n_samples()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut pool: Vec<usize> = idx[..pool_size].to_vec();
    let mut rest: Vec<usize> = idx[pool_size..].to_vec();
    pool.sort_unstable();
    rest.sort_unstable();
    Ok((ds.select(&pool)?, ds.select(&rest)?))
}

struct MnistTask {
    source_groups: Vec<DataMatrix>,
    target_labelled: Vec<DataMatrix>,
    target_unlabelled: DataMatrix,
    eval: LabelledDataset,
}

/// Desk-scale self-transfer protocol: 500 source samples per class from the
/// training set; a 9000-sample target pool from the test set with 10
/// labelled per class; evaluation on the held-out 1000.
fn mnist_self_task(dir: &Path, seed: u64) -> Result<MnistTask> {
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    let (source, _) = split(&train, &vec![500; train.class_count()], seed)?;
    let (pool, eval) = pool_split(&test, 9000, seed)?;
    let (labelled, unlabelled) = split(&pool, &vec![10; pool.class_count()], seed)?;
    Ok(MnistTask {
        source_groups: source.class_groups()?,
        target_labelled: labelled.class_groups()?,
        target_unlabelled: unlabelled.to_data_matrix()?,
        eval,
    })
}

/// Train and evaluate the MNIST self-transfer task at one privacy level.
pub fn run_mnist_self_once(dir: &Path, dp: DpParams, seed: u64) -> Result<(f64, usize)> {
    let task = mnist_self_task(dir, seed)?;
    let p = task.target_unlabelled.dim();
    let cfg = TransferConfig::defaults_for(p, p, dp);
    let model = fit_transfer(
        &task.source_groups,
        &task.target_labelled,
        Some(&task.target_unlabelled),
        &cfg,
        seed,
    )?;
    let winners = multitask_predict_batch(&model, task.eval.features())?;
    let correct = winners
        .iter()
        .zip(task.eval.labels())
        .filter(|(&w, &t)| w == t)
        .count();
    Ok((
        correct as f64 / task.eval.n_samples() as f64,
        task.eval.n_samples(),
    ))
}

fn mnist_self_suite(args: &BenchmarkArgs, dp: DpParams) -> Result<()> {
    let dir = data_dir(args)?;
    let mut metrics = Metrics::new();
    metrics.push("suite", "mnist-self");
    metrics.push("seed", args.seed);
    let mut accuracies = Vec::new();
    for (tag, level) in [("private", dp), ("nonprivate", DpParams::non_private())] {
        let started = Instant::now();
        let (acc, n_test) = run_mnist_self_once(dir, level, args.seed)?;
        metrics.push(format!("{tag}_epsilon"), level.epsilon());
        metrics.push(format!("{tag}_accuracy"), acc);
        metrics.push(format!("{tag}_n_test"), n_test);
        metrics.push(
            format!("{tag}_elapsed_s"),
            format!("{:.1}", started.elapsed().as_secs_f64()),
        );
        accuracies.push(acc);
    }
    metrics.push("accuracy_gap", (accuracies[0] - accuracies[1]).abs());
    report(args, "mnist-self", &metrics)
}

/// Heterogeneous transfer: MNIST source (784 pixels, 500 per class) to USPS
/// target (256 pixels, delimited tables `usps-train.csv` / `usps-test.csv`
/// with a trailing label column), 10 labelled target samples per class.
fn mnist2usps_suite(args: &BenchmarkArgs, dp: DpParams) -> Result<()> {
    let dir = data_dir(args)?;
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let usps_train = load_delimited(&dir.join("usps-train.csv"), true)?;
    let usps_test = load_delimited(&dir.join("usps-test.csv"), true)?;

    let (source, _) = split(&train, &vec![500; train.class_count()], args.seed)?;
    let source_groups = source.class_groups()?;
    let (labelled, unlabelled) =
        split(&usps_train, &vec![10; usps_train.class_count()], args.seed)?;
    let target_labelled = labelled.class_groups()?;
    let target_unlabelled = unlabelled.to_data_matrix()?;

    let mut metrics = Metrics::new();
    metrics.push("suite", "mnist2usps");
    metrics.push("seed", args.seed);
    metrics.push("n_test", usps_test.n_samples());
    let mut accuracies = Vec::new();
    for (tag, level) in [("private", dp), ("nonprivate", DpParams::non_private())] {
        let started = Instant::now();
        let cfg = TransferConfig::defaults_for(source.dim(), usps_train.dim(), level);
        let model = fit_transfer(
            &source_groups,
            &target_labelled,
            Some(&target_unlabelled),
            &cfg,
            args.seed,
        )?;
        let winners = multitask_predict_batch(&model, usps_test.features())?;
        let correct = winners
            .iter()
            .zip(usps_test.labels())
            .filter(|(&w, &t)| w == t)
            .count();
        let acc = correct as f64 / usps_test.n_samples() as f64;
        metrics.push(format!("{tag}_epsilon"), level.epsilon());
        metrics.push(format!("{tag}_accuracy"), acc);
        metrics.push(
            format!("{tag}_elapsed_s"),
            format!("{:.1}", started.elapsed().as_secs_f64()),
        );
        accuracies.push(acc);
    }
    metrics.push("accuracy_gap", (accuracies[0] - accuracies[1]).abs());
    report(args, "mnist2usps", &metrics)
}
