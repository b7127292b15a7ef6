//! Experiment orchestration and the area-weighted accuracy metric.

mod dataset;
mod experiment;
mod split;

use std::io::Write;

use thiserror::Error;

pub use dataset::{Dataset, LabeledMesh, Manifest, ManifestEntry};
pub use experiment::{
    prepare_meshes, replicate_seed, run_experiment, train_split, CacheStats, EvaluationRecord, MeshSummary,
    PreparedMesh, Report, SetSummary, TrainingSummary,
};
pub use split::{make_splits, parse_split_file, Protocol, Split, SplitPlan};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{pred} predicted labels for {truth} ground-truth labels")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("{areas} face areas for {labels} labels")]
    AreaMismatch { areas: usize, labels: usize },
    #[error("face {face} has non-positive area {area}")]
    NonPositiveArea { face: usize, area: f64 },
    #[error("{protocol} needs at least {needed} meshes, the dataset has {found}")]
    TooFewMeshes {
        protocol: String,
        needed: usize,
        found: usize,
    },
    #[error("split references unknown mesh id {0}")]
    UnknownMesh(String),
    #[error("{path}:{line}: {message}")]
    SplitFile { path: String, line: usize, message: String },
    #[error("{path}:{line}: {message}")]
    LabelFile { path: String, line: usize, message: String },
    #[error("mesh {mesh}: face {face} has label {label}, but the manifest lists {n_classes} classes")]
    Label {
        mesh: String,
        face: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Fraction of surface area whose predicted label matches the ground truth.
pub fn accuracy(pred: &[usize], truth: &[usize], areas: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if areas.len() != pred.len() {
        return Err(EvalError::AreaMismatch {
            areas: areas.len(),
            labels: pred.len(),
        });
    }
    if let Some((face, &area)) = areas.iter().enumerate().find(|&(_, &a)| !(a > 0.0)) {
        return Err(EvalError::NonPositiveArea { face, area });
    }
    let total: f64 = areas.iter().sum();
    let correct: f64 = pred
        .iter()
        .zip(truth)
        .zip(areas)
        .filter(|((p, t), _)| p == t)
        .map(|(_, a)| a)
        .sum();
    Ok(correct / total)
}

/// Parses a label file: one nonnegative integer per line, line `i` for
/// face `i`. Blank lines are skipped.
pub fn parse_labels(text: &str, path: &str) -> Result<Vec<usize>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| EvalError::LabelFile {
                path: path.to_string(),
                line: i + 1,
                message: format!("expected a nonnegative integer label, found {:?}", l.trim()),
            })
        })
        .collect()
}

pub fn write_labels<W: Write>(mut out: W, labels: &[usize]) -> std::io::Result<()> {
    for l in labels {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1], &[0, 1], &[1.0, 3.0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 1], &[2.0; 4]).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_errors() {
        assert!(matches!(accuracy(&[0], &[0, 1], &[1.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(accuracy(&[0], &[0], &[0.0]), Err(EvalError::NonPositiveArea { face: 0, .. })));
        assert!(matches!(accuracy(&[0, 0], &[0, 0], &[1.0]), Err(EvalError::AreaMismatch { .. })));
    }

    #[test]
    fn labels_round_trip() {
        let mut buf = Vec::new();
        write_labels(&mut buf, &[3, 0, 12]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "3\n0\n12\n");
        assert_eq!(parse_labels(&text, "x.seg").unwrap(), [3, 0, 12]);
        let err = parse_labels("1\n-2\n", "x.seg").unwrap_err();
        assert!(err.to_string().starts_with("x.seg:2:"), "{err}");
    }
}
