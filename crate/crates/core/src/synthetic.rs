//! Seeded toy datasets: jittered tubes with a few smooth bumps, labelled
//! bump (1) vs. tube (0).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{write_labels, Dataset, LabeledMesh, Manifest, ManifestEntry};
use crate::mesh::{shapes, write_off, Mesh, Vec3};
use crate::numerics::Rng;

pub const TOY_CLASSES: [&str; 2] = ["tube", "bump"];
pub const TOY_NOISE: f64 = 0.06;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeParams {
    pub half_length: f64,
    pub radius: f64,
    /// `(center z, relative height, width)` of each Gaussian bump.
    pub bumps: Vec<(f64, f64, f64)>,
    pub rings: usize,
    pub segments: usize,
    /// Relative amplitude of the seeded radial vertex jitter.
    pub noise: f64,
}

impl TubeParams {
    /// Two or three well-separated bumps of random height and width.
    pub fn random(rng: &mut Rng, noise: f64) -> Self {
        let count = 2 + rng.below(2);
        let slot = 2.8 / count as f64;
        let bumps = (0..count)
            .map(|i| {
                let center = -1.4 + slot * (i as f64 + rng.uniform_range(0.35, 0.65));
                (center, rng.uniform_range(0.25, 0.5), rng.uniform_range(0.12, 0.2))
            })
            .collect();
        TubeParams {
            half_length: 2.0,
            radius: rng.uniform_range(0.35, 0.45),
            bumps,
            rings: 24,
            segments: 12,
            noise,
        }
    }

    fn radius_at(&self, z: f64) -> f64 {
        let bump: f64 = self
            .bumps
            .iter()
            .map(|&(c, a, w)| a * (-((z - c) / w).powi(2)).exp())
            .sum();
        self.radius * (1.0 + bump)
    }

    fn in_bump(&self, z: f64) -> bool {
        self.bumps.iter().any(|&(c, _, w)| (z - c).abs() < 1.5 * w)
    }
}

/// Closed tube of revolution with rounded ends. Faces whose centroid lies
/// within 1.5 widths of a bump center are labelled `1`. Labels are
/// assigned before jitter is applied.
pub fn bumpy_tube(p: &TubeParams, rng: &mut Rng) -> (Mesh, Vec<usize>) {
    let l = p.half_length;
    let mut profile = vec![(0.0, -l - 0.5 * p.radius)];
    for i in 0..p.rings {
        let z = -l + 2.0 * l * i as f64 / (p.rings - 1) as f64;
        profile.push((p.radius_at(z), z));
    }
    profile.push((0.0, l + 0.5 * p.radius));
    let mesh = shapes::revolution(&profile, p.segments);
    let labels = mesh
        .face_centroids()
        .iter()
        .map(|c| usize::from(c.z.abs() < l && p.in_bump(c.z)))
        .collect();
    if p.noise == 0.0 {
        return (mesh, labels);
    }
    let moved = mesh
        .vertices()
        .iter()
        .map(|v| {
            let s = 1.0 + p.noise * rng.uniform_range(-1.0, 1.0);
            Vec3::new(v.x * s, v.y * s, v.z)
        })
        .collect();
    let mesh = mesh.with_positions(moved).expect("jitter keeps faces valid");
    (mesh, labels)
}

/// `n` jittered bumpy tubes, ids `toy00`, `toy01`, ….
pub fn toy_dataset(n: usize, seed: u64) -> Dataset {
    toy_dataset_with_noise(n, seed, TOY_NOISE)
}

pub fn toy_dataset_with_noise(n: usize, seed: u64, noise: f64) -> Dataset {
    let meshes = (0..n)
        .map(|i| {
            let mut rng = Rng::new(seed, &format!("toy/{i}"));
            let params = TubeParams::random(&mut rng, noise);
            let (mesh, labels) = bumpy_tube(&params, &mut rng);
            let mut source = Vec::new();
            write_off(&mesh, &mut source).expect("write to memory");
            LabeledMesh {
                id: format!("toy{i:02}"),
                mesh,
                labels,
                source,
            }
        })
        .collect();
    Dataset {
        classes: TOY_CLASSES.iter().map(|s| s.to_string()).collect(),
        meshes,
    }
}

/// Writes OFF meshes, label files and `manifest.json` into `dir`; returns
/// the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for m in &dataset.meshes {
        let mesh = PathBuf::from(format!("{}.off", m.id));
        let labels = PathBuf::from(format!("{}.seg", m.id));
        std::fs::write(dir.join(&mesh), &m.source).map_err(|e| Error::io(dir.join(&mesh), e))?;
        let mut text = Vec::new();
        write_labels(&mut text, &m.labels).expect("write to memory");
        std::fs::write(dir.join(&labels), text).map_err(|e| Error::io(dir.join(&labels), e))?;
        entries.push(ManifestEntry {
            id: m.id.clone(),
            mesh,
            labels,
        });
    }
    let manifest = Manifest {
        classes: dataset.classes.clone(),
        meshes: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
