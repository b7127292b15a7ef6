use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_labels, EvalError};
use crate::error::{Error, Result, ResultExt};
use crate::mesh::{load_mesh, Mesh, MeshError, MeshFormat};

/// Set-level description of a labelled dataset. Mesh and label paths are
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub classes: Vec<String>,
    pub meshes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub mesh: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone)]
pub struct LabeledMesh {
    pub id: String,
    pub mesh: Mesh,
    pub labels: Vec<usize>,
    /// Raw bytes of the mesh file, hashed for the feature cache.
    pub source: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub meshes: Vec<LabeledMesh>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = read(manifest_path)?;
        let manifest: Manifest = serde_json::from_slice(&text)
            .map_err(|e| EvalError::Dataset(format!("manifest {}: {e}", manifest_path.display())))?;
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        let meshes = manifest
            .meshes
            .iter()
            .map(|entry| {
                let mesh_path = base.join(&entry.mesh);
                let source = read(&mesh_path)?;
                let format = MeshFormat::from_path(&mesh_path).ok_or_else(|| MeshError::Parse {
                    line: 0,
                    msg: format!("cannot infer mesh format from {}", mesh_path.display()),
                })?;
                let mesh = load_mesh(source.as_slice(), format).context(|| format!("mesh {}", mesh_path.display()))?;
                let labels_path = base.join(&entry.labels);
                let text = String::from_utf8_lossy(&read(&labels_path)?).into_owned();
                let labels = parse_labels(&text, &labels_path.display().to_string())?;
                Ok(LabeledMesh {
                    id: entry.id.clone(),
                    mesh,
                    labels,
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dataset = Dataset {
            classes: manifest.classes,
            meshes,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.classes.len() < 2 {
            return Err(EvalError::Dataset("the manifest must list at least two classes".into()));
        }
        for m in &self.meshes {
            if m.labels.len() != m.mesh.face_count() {
                return Err(EvalError::Dataset(format!(
                    "mesh {} has {} faces but {} labels",
                    m.id,
                    m.mesh.face_count(),
                    m.labels.len()
                )));
            }
            if let Some((face, &label)) = m.labels.iter().enumerate().find(|&(_, &l)| l >= self.classes.len()) {
                return Err(EvalError::Label {
                    mesh: m.id.clone(),
                    face,
                    label,
                    n_classes: self.classes.len(),
                });
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.meshes.iter().map(|m| m.id.clone()).collect()
    }
}
