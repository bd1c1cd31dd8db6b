//! Source-to-target transfer with multi-task prediction.
//!
//! The pipeline, in order: perturb the labelled source data with the optimal
//! DP mechanism and train the source classifier on the noisy copies; compute
//! latent subspace transformation matrices for both domains (the source one
//! from the perturbed data, so the entire source pathway stays private);
//! align target samples into source data-space when the dimensions differ;
//! train an initial target classifier on the few labelled target samples;
//! iterate pseudo-labelling of the unlabelled pool with a growing subspace
//! dimension; learn a source2target membership-mapping from source-side
//! reconstructions to target-aligned vectors; and predict by the argmin over
//! classes of the best of three reconstruction routes (target model,
//! source2target of the source model, source model).
//!
//! No noise is ever applied to target data: only source groups pass through
//! the privacy module, and the raw source matrices are not consumed after
//! perturbation.

use nalgebra::{DMatrix, DVector};

use crate::classifier::{fit_classifier, ClassifierModel};
use crate::error::{Error, Result};
use crate::membership::MembershipMappingModel;
use crate::numkit::{principal_directions, DataMatrix};
use crate::privacy::{perturb_groups, DpParams};

/// Pipeline parameters. `defaults_for` reproduces the reference protocol:
/// source subspace dimension min(20, p_sr) with r_max 0.5 and 5 layers, a
/// single-layer target classifier iterated 4 times over the non-decreasing
/// schedule {5, 10, 15, 20} with r_max 0.5, and alignment dimension
/// n_st = min(ceil(p_sr / 2), p_tg).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub source_n: usize,
    pub source_r_max: f64,
    pub source_layers: usize,
    pub n_schedule: Vec<usize>,
    pub it_max: usize,
    pub target_r_max: f64,
    pub target_layers: usize,
    pub n_st: usize,
    pub dp: DpParams,
}

impl TransferConfig {
    pub fn defaults_for(p_sr: usize, p_tg: usize, dp: DpParams) -> Self {
        TransferConfig {
            source_n: 20.min(p_sr),
            source_r_max: 0.5,
            source_layers: 5,
            n_schedule: vec![5, 10, 15, 20],
            it_max: 4,
            target_r_max: 0.5,
            target_layers: 1,
            n_st: p_sr.div_ceil(2).min(p_tg),
            dp,
        }
    }

    pub fn validate(&self, p_sr: usize, p_tg: usize) -> Result<()> {
        if self.source_n == 0 || self.source_n > p_sr {
            return Err(Error::invalid(format!(
                "source subspace dimension {} outside [1, {p_sr}]",
                self.source_n
            )));
        }
        if self.n_st == 0 || self.n_st > p_sr.min(p_tg) {
            return Err(Error::invalid(format!(
                "alignment dimension {} outside [1, {}]",
                self.n_st,
                p_sr.min(p_tg)
            )));
        }
        if self.n_schedule.len() < self.it_max {
            return Err(Error::invalid(format!(
                "subspace schedule has {} entries for {} iterations",
                self.n_schedule.len(),
                self.it_max
            )));
        }
        if self.n_schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("subspace schedule must be non-decreasing"));
        }
        if self.n_schedule.contains(&0) {
            return Err(Error::invalid("subspace schedule entries must be positive"));
        }
        if self.source_layers == 0 || self.target_layers == 0 {
            return Err(Error::invalid("layer counts must be positive"));
        }
        for (name, r) in [("source", self.source_r_max), ("target", self.target_r_max)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!(
                    "{name} r_max must lie in (0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Membership-mapping from source-space class reconstructions to
/// target-aligned vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Source2TargetModel {
    pub mapping: MembershipMappingModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferModel {
    pub source_classifier: ClassifierModel,
    pub target_classifier: ClassifierModel,
    pub s2t: Source2TargetModel,
    pub v_sr: DMatrix<f64>,
    pub v_tg: DMatrix<f64>,
}

impl TransferModel {
    pub fn source_dim(&self) -> usize {
        self.v_sr.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.v_tg.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.target_classifier.class_count()
    }
}

/// Map a target vector into source data-space: unchanged when the dimensions
/// agree, otherwise V_sr^T V_tg y.
pub fn align(y_tg: &[f64], v_sr: &DMatrix<f64>, v_tg: &DMatrix<f64>) -> Result<DVector<f64>> {
    if v_sr.nrows() != v_tg.nrows() {
        return Err(Error::invalid(format!(
            "transformation matrices have {} and {} rows",
            v_sr.nrows(),
            v_tg.nrows()
        )));
    }
    if y_tg.len() != v_tg.ncols() {
        return Err(Error::invalid(format!(
            "target vector has length {}, expected {}",
            y_tg.len(),
            v_tg.ncols()
        )));
    }
    let y = DVector::from_column_slice(y_tg);
    if v_sr.ncols() == v_tg.ncols() {
        return Ok(y);
    }
    Ok(v_sr.transpose() * (v_tg * y))
}

fn align_batch(ys: &DMatrix<f64>, v_sr: &DMatrix<f64>, v_tg: &DMatrix<f64>) -> DMatrix<f64> {
    if v_sr.ncols() == v_tg.ncols() {
        ys.clone()
    } else {
        v_sr.transpose() * (v_tg * ys)
    }
}

// Deterministic sub-seed derivation for the pipeline stages.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn subseed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

const SALT_NOISE: u64 = 0x01;
const SALT_SOURCE: u64 = 0x02;
const SALT_TARGET_BASE: u64 = 0x10;
const SALT_S2T: u64 = 0x03;

/// The pipeline's source-perturbation stage: exactly the noise draw that
/// [`fit_transfer`] applies for the same config and seed.
pub fn perturb_source_groups(
    source_groups: &[DataMatrix],
    cfg: &TransferConfig,
    seed: u64,
) -> Vec<DataMatrix> {
    perturb_groups(source_groups, &cfg.dp, subseed(seed, SALT_NOISE))
}

/// Full pipeline from raw source groups: perturb, then hand off to
/// [`fit_transfer_perturbed`]. The raw matrices are not used past this point.
pub fn fit_transfer(
    source_groups: &[DataMatrix],
    target_labelled: &[DataMatrix],
    target_unlabelled: Option<&DataMatrix>,
    cfg: &TransferConfig,
    seed: u64,
) -> Result<TransferModel> {
    let perturbed = perturb_source_groups(source_groups, cfg, seed);
    fit_transfer_perturbed(perturbed, target_labelled, target_unlabelled, cfg, seed)
}

/// Pipeline steps downstream of source perturbation. Everything here is a
/// deterministic function of the perturbed source data, the target data and
/// the seed, so differential privacy of the source pathway is preserved by
/// post-processing.
pub fn fit_transfer_perturbed(
    perturbed_source: Vec<DataMatrix>,
    target_labelled: &[DataMatrix],
    target_unlabelled: Option<&DataMatrix>,
    cfg: &TransferConfig,
    seed: u64,
) -> Result<TransferModel> {
    if perturbed_source.len() < 2 {
        return Err(Error::invalid("need at least 2 source classes"));
    }
    if target_labelled.len() != perturbed_source.len() {
        return Err(Error::invalid(format!(
            "{} target classes for {} source classes",
            target_labelled.len(),
            perturbed_source.len()
        )));
    }
    let p_sr = perturbed_source[0].dim();
    let p_tg = target_labelled[0].dim();
    if perturbed_source.iter().any(|g| g.dim() != p_sr) {
        return Err(Error::invalid("source groups disagree on dimension"));
    }
    if target_labelled.iter().any(|g| g.dim() != p_tg)
        || target_unlabelled.is_some_and(|u| u.dim() != p_tg)
    {
        return Err(Error::invalid("target data disagrees on dimension"));
    }
    cfg.validate(p_sr, p_tg)?;

    // (1) differentially private source classifier
    let source_classifier = fit_classifier(
        &perturbed_source,
        cfg.source_n,
        cfg.source_r_max,
        cfg.source_layers,
        subseed(seed, SALT_SOURCE),
    )?;

    // (2) latent subspace transformation matrices; the source one comes from
    // the perturbed data
    let source_refs: Vec<&DataMatrix> = perturbed_source.iter().collect();
    let pooled_source = DataMatrix::concat(&source_refs)?;
    let v_sr = principal_directions(&pooled_source, cfg.n_st)?;

    let mut target_refs: Vec<&DataMatrix> = target_labelled.iter().collect();
    if let Some(u) = target_unlabelled {
        target_refs.push(u);
    }
    let pooled_target = DataMatrix::concat(&target_refs)?;
    let v_tg = principal_directions(&pooled_target, cfg.n_st)?;

    // (3) align target data into source space
    let aligned_labelled: Vec<DataMatrix> = target_labelled
        .iter()
        .map(|g| DataMatrix::new(align_batch(g.matrix(), &v_sr, &v_tg)))
        .collect::<Result<Vec<_>>>()?;
    let aligned_unlabelled: Option<DataMatrix> = target_unlabelled
        .map(|u| DataMatrix::new(align_batch(u.matrix(), &v_sr, &v_tg)))
        .transpose()?;

    // (4) initial target classifier on the labelled samples alone
    let min_class = target_labelled.iter().map(|g| g.len()).min().unwrap();
    let n_init = 20.min(min_class.saturating_sub(1)).clamp(1, p_sr);
    let mut target_classifier = fit_classifier(
        &aligned_labelled,
        n_init,
        1.0,
        cfg.target_layers,
        subseed(seed, SALT_TARGET_BASE),
    )?;

    let classes = aligned_labelled.len();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    if let Some(u) = &aligned_unlabelled {
        let winners = target_classifier.classify_batch(u.matrix())?;
        pools = partition_by_winner(&winners, classes);
    }

    // (5) iterate: refit on labelled plus pseudo-labelled, then re-label
    for k in 0..cfg.it_max {
        let n_k = cfg.n_schedule[k].clamp(1, p_sr);
        let groups_k = merge_pools(&aligned_labelled, &aligned_unlabelled, &pools)?;
        target_classifier = fit_classifier(
            &groups_k,
            n_k,
            cfg.target_r_max,
            cfg.target_layers,
            subseed(seed, SALT_TARGET_BASE + 1 + k as u64),
        )?;
        if let Some(u) = &aligned_unlabelled {
            let winners = target_classifier.classify_batch(u.matrix())?;
            pools = partition_by_winner(&winners, classes);
        }
    }

    // (6) source2target training pairs: each class's target samples are
    // filtered through the same class's private source autoencoder
    let final_groups = merge_pools(&aligned_labelled, &aligned_unlabelled, &pools)?;
    let mut inputs: Vec<DMatrix<f64>> = Vec::with_capacity(classes);
    let mut outputs: Vec<&DMatrix<f64>> = Vec::with_capacity(classes);
    let mut pair_count = 0usize;
    for (c, group) in final_groups.iter().enumerate() {
        let (recon, _) = source_classifier.class_models()[c].filter_batch(group.matrix())?;
        pair_count += group.len();
        inputs.push(recon);
        outputs.push(group.matrix());
    }
    let x_s2t = DataMatrix::new(hstack(&inputs.iter().collect::<Vec<_>>()))?;
    let y_s2t = DataMatrix::new(hstack(&outputs))?;

    // (7) source2target membership-mapping
    let m_max = pair_count.div_ceil(2).clamp(1, 1000);
    let mapping = MembershipMappingModel::fit(&x_s2t, &y_s2t, m_max, subseed(seed, SALT_S2T))?;

    Ok(TransferModel {
        source_classifier,
        target_classifier,
        s2t: Source2TargetModel { mapping },
        v_sr,
        v_tg,
    })
}

fn partition_by_winner(winners: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut pools = vec![Vec::new(); classes];
    for (i, &c) in winners.iter().enumerate() {
        pools[c].push(i);
    }
    pools
}

/// Per-class union of the labelled samples and the pseudo-labelled pool. A
/// class whose pool is empty trains on its labelled samples alone.
fn merge_pools(
    labelled: &[DataMatrix],
    unlabelled: &Option<DataMatrix>,
    pools: &[Vec<usize>],
) -> Result<Vec<DataMatrix>> {
    labelled
        .iter()
        .enumerate()
        .map(|(c, g)| {
            if pools[c].is_empty() {
                return Ok(g.clone());
            }
            let u = unlabelled
                .as_ref()
                .expect("non-empty pool implies unlabelled data");
            let extra = u.select_columns(&pools[c])?;
            DataMatrix::concat(&[g, &extra])
        })
        .collect()
}

fn hstack(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for m in parts {
        out.view_mut((0, at), (rows, m.ncols())).copy_from(*m);
        at += m.ncols();
    }
    out
}

/// Multi-task prediction for one raw target vector. For every class the
/// three squared errors are: target-model reconstruction, source2target of
/// the source-model reconstruction, and the source-model reconstruction
/// itself. The label is the argmin over classes of the row-wise minimum;
/// the full C x 3 score matrix is returned alongside.
pub fn multitask_predict(model: &TransferModel, y_tg: &[f64]) -> Result<(i64, DMatrix<f64>)> {
    let aligned = align(y_tg, &model.v_sr, &model.v_tg)?;
    let classes = model.class_count();
    let mut scores = DMatrix::zeros(classes, 3);
    for c in 0..classes {
        let target_out = model.target_classifier.class_models()[c].filter(aligned.as_slice())?;
        let source_out = model.source_classifier.class_models()[c].filter(aligned.as_slice())?;
        let s2t_recon = model
            .s2t
            .mapping
            .predict(source_out.reconstruction.as_slice())?;
        scores[(c, 0)] = target_out.error;
        scores[(c, 1)] = (&aligned - s2t_recon).norm_squared();
        scores[(c, 2)] = source_out.error;
    }
    let mut best = 0usize;
    let row_min = |c: usize| scores[(c, 0)].min(scores[(c, 1)]).min(scores[(c, 2)]);
    for c in 1..classes {
        if row_min(c) < row_min(best) {
            best = c;
        }
    }
    Ok((model.target_classifier.labels()[best], scores))
}

/// Winning class indices for a batch of raw target columns.
pub fn multitask_predict_batch(model: &TransferModel, ys_tg: &DMatrix<f64>) -> Result<Vec<usize>> {
    let aligned = align_batch(ys_tg, &model.v_sr, &model.v_tg);
    let cols = aligned.ncols();
    let classes = model.class_count();
    let mut best_score = vec![f64::INFINITY; cols];
    let mut winner = vec![0usize; cols];
    for c in 0..classes {
        let (_, target_errs) = model.target_classifier.class_models()[c].filter_batch(&aligned)?;
        let (source_recon, source_errs) =
            model.source_classifier.class_models()[c].filter_batch(&aligned)?;
        let s2t_recon = model.s2t.mapping.predict_batch(&source_recon)?;
        for j in 0..cols {
            let e_s2t = (s2t_recon.column(j) - aligned.column(j)).norm_squared();
            let score = target_errs[j].min(e_s2t).min(source_errs[j]);
            if score < best_score[j] {
                best_score[j] = score;
                winner[j] = c;
            }
        }
    }
    Ok(winner)
}
