//! Flat key=value metrics reports: deterministic ordering, one pair per
//! line, trivially diffable.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use mmlearn::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pairs: Vec<(String, String)>,
}

impl Metrics {
    pub fn new() -> Self {
        Metrics::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.pairs.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Accuracy, per-class accuracy and confusion counts over a labelled test
/// set. Label order follows the model's label space.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub labels: Vec<i64>,
    pub n_test: usize,
    pub correct: usize,
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.n_test as f64
    }

    pub fn class_accuracy(&self, c: usize) -> Option<f64> {
        let total: usize = self.confusion[c].iter().sum();
        (total > 0).then(|| self.confusion[c][c] as f64 / total as f64)
    }

    pub fn add_to(&self, metrics: &mut Metrics) {
        metrics.push("accuracy", self.accuracy());
        metrics.push("n_test", self.n_test);
        for (c, &label) in self.labels.iter().enumerate() {
            if let Some(acc) = self.class_accuracy(c) {
                metrics.push(format!("class_{label}_accuracy"), acc);
            }
        }
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                metrics.push(
                    format!("confusion_{}_{}", self.labels[t], self.labels[p]),
                    count,
                );
            }
        }
    }
}

/// Score predictions against ground truth over a fixed label space.
/// Rows of the confusion matrix index the true label, columns the predicted.
pub fn evaluate_labels(
    truth: &[i64],
    predicted: &[i64],
    label_space: &[i64],
) -> Result<Evaluation> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let classes = label_space.len();
    let index_of = |l: i64| -> Result<usize> {
        label_space.iter().position(|&x| x == l).ok_or_else(|| {
            Error::InvalidArgument(format!("label {l} outside the model's label space"))
        })
    };
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0;
    for (&t, &p) in truth.iter().zip(predicted) {
        let ti = index_of(t)?;
        let pi = index_of(p)?;
        confusion[ti][pi] += 1;
        if t == p {
            correct += 1;
        }
    }
    Ok(Evaluation {
        labels: label_space.to_vec(),
        n_test: truth.len(),
        correct,
        confusion,
    })
}
