use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::numerics::Rng;

/// How a dataset is divided into training and test meshes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    LeaveOneOut,
    KFold { k: usize },
    /// Split file with `train:` and `test:` sections of mesh ids.
    Fixed { file: PathBuf },
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::KFold { k: 5 }
    }
}

/// A protocol with any split file already loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitPlan {
    LeaveOneOut,
    KFold(usize),
    Fixed { train: Vec<String>, test: Vec<String> },
}

impl SplitPlan {
    pub fn load(protocol: &Protocol) -> Result<Self, EvalError> {
        Ok(match protocol {
            Protocol::LeaveOneOut => SplitPlan::LeaveOneOut,
            Protocol::KFold { k } => SplitPlan::KFold(*k),
            Protocol::Fixed { file } => {
                let text = std::fs::read_to_string(file).map_err(|e| EvalError::Io {
                    path: file.display().to_string(),
                    source: e,
                })?;
                parse_split_file(&text, file)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub id: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Parses a split file:
///
/// ```text
/// train:
/// mesh01
/// mesh02
/// test:
/// mesh03
/// ```
///
/// Blank lines and `#` comments are ignored.
pub fn parse_split_file(text: &str, path: &Path) -> Result<SplitPlan, EvalError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut section: Option<&mut Vec<String>> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "train:" => section = Some(&mut train),
            "test:" => section = Some(&mut test),
            id => match section.as_deref_mut() {
                Some(ids) => ids.push(id.to_string()),
                None => {
                    return Err(EvalError::SplitFile {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: "mesh id before any `train:` or `test:` header".into(),
                    })
                }
            },
        }
    }
    Ok(SplitPlan::Fixed { train, test })
}

/// Training/test id lists for every split. k-fold assigns a seeded
/// shuffle of the ids to folds whose sizes differ by at most one.
pub fn make_splits(ids: &[String], plan: &SplitPlan, seed: u64) -> Result<Vec<Split>, EvalError> {
    let n = ids.len();
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(EvalError::Dataset(format!("mesh id {dup} appears twice")));
    }
    match plan {
        SplitPlan::LeaveOneOut => {
            if n < 2 {
                return Err(EvalError::TooFewMeshes {
                    protocol: "leave-one-out".into(),
                    needed: 2,
                    found: n,
                });
            }
            Ok((0..n)
                .map(|i| Split {
                    id: i,
                    train: ids.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s.clone()).collect(),
                    test: vec![ids[i].clone()],
                })
                .collect())
        }
        &SplitPlan::KFold(k) => {
            if k < 2 || n < k {
                return Err(EvalError::TooFewMeshes {
                    protocol: format!("{k}-fold"),
                    needed: k.max(2),
                    found: n,
                });
            }
            let mut order: Vec<usize> = (0..n).collect();
            Rng::new(seed, "folds").shuffle(&mut order);
            let mut start = 0;
            let folds: Vec<Vec<usize>> = (0..k)
                .map(|f| {
                    let size = n / k + usize::from(f < n % k);
                    let fold = order[start..start + size].to_vec();
                    start += size;
                    fold
                })
                .collect();
            Ok(folds
                .iter()
                .enumerate()
                .map(|(f, fold)| {
                    let mut test = fold.clone();
                    test.sort_unstable();
                    Split {
                        id: f,
                        train: (0..n).filter(|i| !test.contains(i)).map(|i| ids[i].clone()).collect(),
                        test: test.into_iter().map(|i| ids[i].clone()).collect(),
                    }
                })
                .collect())
        }
        SplitPlan::Fixed { train, test } => {
            let known: HashSet<&str> = ids.iter().map(String::as_str).collect();
            for id in train.iter().chain(test) {
                if !known.contains(id.as_str()) {
                    return Err(EvalError::UnknownMesh(id.clone()));
                }
            }
            if let Some(id) = train.iter().find(|id| test.contains(id)) {
                return Err(EvalError::Dataset(format!("mesh {id} is in both the training and the test set")));
            }
            if train.is_empty() || test.is_empty() {
                return Err(EvalError::Dataset("fixed split needs at least one training and one test mesh".into()));
            }
            Ok(vec![Split {
                id: 0,
                train: train.clone(),
                test: test.clone(),
            }])
        }
    }
}
