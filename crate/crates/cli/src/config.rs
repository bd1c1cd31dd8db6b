//! Experiment configuration: a TOML document with data, privacy, source,
//! target, transfer and run sections. Numeric defaults mirror the reference
//! protocol; every referenced path must exist at validation time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use mmlearn::io::{load_delimited, load_idx, LabelledDataset};
use mmlearn::privacy::DpParams;
use mmlearn::transfer::TransferConfig;
use mmlearn::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub transfer: TransferSection,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: Option<PathBuf>,
    pub source_images: Option<PathBuf>,
    pub source_labels: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub target_images: Option<PathBuf>,
    pub target_labels: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacyConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub d: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig {
            epsilon: 0.1,
            delta: 1e-5,
            d: 1.0,
        }
    }
}

impl PrivacyConfig {
    pub fn params(&self) -> Result<DpParams> {
        DpParams::new(self.epsilon, self.delta, self.d)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    /// Subspace dimension; defaults to min(20, source dimension).
    pub n: Option<usize>,
    pub r_max: f64,
    pub layers: usize,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            n: None,
            r_max: 0.5,
            layers: 5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub labelled_per_class: usize,
    pub n_schedule: Vec<usize>,
    pub it_max: usize,
    pub r_max: f64,
    pub layers: usize,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            labelled_per_class: 10,
            n_schedule: vec![5, 10, 15, 20],
            it_max: 4,
            r_max: 0.5,
            layers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    /// Alignment subspace dimension; defaults to
    /// min(ceil(source dim / 2), target dim).
    pub n_st: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// One dataset reference: a delimited table with a trailing label column, or
/// an IDX image/label pair.
#[derive(Debug, Clone)]
pub enum DataSource {
    Delimited(PathBuf),
    Idx { images: PathBuf, labels: PathBuf },
}

impl DataSource {
    fn resolve(
        role: &str,
        delimited: &Option<PathBuf>,
        images: &Option<PathBuf>,
        labels: &Option<PathBuf>,
    ) -> Result<Option<DataSource>> {
        match (delimited, images, labels) {
            (Some(path), None, None) => Ok(Some(DataSource::Delimited(path.clone()))),
            (None, Some(i), Some(l)) => Ok(Some(DataSource::Idx {
                images: i.clone(),
                labels: l.clone(),
            })),
            (None, None, None) => Ok(None),
            _ => Err(Error::InvalidArgument(format!(
                "data.{role}: give either `{role}` (delimited) or both `{role}_images` and `{role}_labels` (IDX)"
            ))),
        }
    }

    pub fn paths(&self) -> Vec<&Path> {
        match self {
            DataSource::Delimited(p) => vec![p],
            DataSource::Idx { images, labels } => vec![images, labels],
        }
    }

    pub fn load(&self) -> Result<LabelledDataset> {
        match self {
            DataSource::Delimited(path) => load_delimited(path, true),
            DataSource::Idx { images, labels } => load_idx(images, labels),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn source_data(&self) -> Result<Option<DataSource>> {
        DataSource::resolve(
            "source",
            &self.data.source,
            &self.data.source_images,
            &self.data.source_labels,
        )
    }

    pub fn target_data(&self) -> Result<Option<DataSource>> {
        DataSource::resolve(
            "target",
            &self.data.target,
            &self.data.target_images,
            &self.data.target_labels,
        )
    }

    pub fn test_data(&self) -> Result<Option<DataSource>> {
        DataSource::resolve(
            "test",
            &self.data.test,
            &self.data.test_images,
            &self.data.test_labels,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.privacy.params()?;
        for source in [self.source_data()?, self.target_data()?, self.test_data()?]
            .into_iter()
            .flatten()
        {
            for path in source.paths() {
                if !path.exists() {
                    return Err(Error::InvalidArgument(format!(
                        "referenced path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if self.target.labelled_per_class == 0 {
            return Err(Error::InvalidArgument(
                "target.labelled_per_class must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Assemble the pipeline configuration for the given data dimensions.
    pub fn transfer_config(&self, p_sr: usize, p_tg: usize) -> Result<TransferConfig> {
        let dp = self.privacy.params()?;
        let mut tc = TransferConfig::defaults_for(p_sr, p_tg, dp);
        if let Some(n) = self.source.n {
            tc.source_n = n;
        }
        tc.source_r_max = self.source.r_max;
        tc.source_layers = self.source.layers;
        tc.n_schedule = self.target.n_schedule.clone();
        tc.it_max = self.target.it_max;
        tc.target_r_max = self.target.r_max;
        tc.target_layers = self.target.layers;
        if let Some(n) = self.transfer.n_st {
            tc.n_st = n;
        }
        tc.validate(p_sr, p_tg)?;
        Ok(tc)
    }
}
