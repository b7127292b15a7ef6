use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::{accuracy, make_splits, Dataset, EvalError, LabeledMesh, Split, SplitPlan};
use crate::binio::FormatError;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result, ResultExt};
use crate::features::{average_geodesic_distance, content_hash, FeatureCache, FeatureMatrix, FeatureParams, FeatureRegistry};
use crate::graphcut::refine;
use crate::mesh::DualGraph;
use crate::neural::train::argmax;
use crate::neural::{Classifier, FitReport, LabeledFeatures};
use crate::numerics::Rng;

/// A dataset mesh with its dual graph, raw features and the scalar field
/// used by the refinement's smoothness term.
#[derive(Debug, Clone)]
pub struct PreparedMesh {
    pub id: String,
    pub labels: Vec<usize>,
    pub areas: Vec<f64>,
    pub graph: DualGraph,
    pub features: FeatureMatrix,
    pub agd: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub reused: usize,
    pub computed: usize,
}

fn cached_features(m: &LabeledMesh, params: &FeatureParams, cache_dir: Option<&Path>, stats: &[AtomicUsize; 2]) -> Result<FeatureMatrix> {
    let registry = FeatureRegistry::core();
    let hash = content_hash(&m.source, params, &registry.channels(params));
    let path = cache_dir.map(|d| d.join(format!("{}.msegfeat", m.id)));
    if let Some(path) = path.as_deref().filter(|p| p.exists()) {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        match FeatureCache::read(std::io::BufReader::new(file)) {
            Ok(cache) if cache.source_hash == hash => {
                stats[0].fetch_add(1, Ordering::Relaxed);
                return Ok(cache.features);
            }
            Ok(_) => log::info!("{}: stale feature cache, recomputing", path.display()),
            Err(e @ (FormatError::BadMagic { .. } | FormatError::VersionMismatch { .. })) => {
                return Err(Error::from(e).context(format!(
                    "feature cache {} (delete it or the cache directory to regenerate)",
                    path.display()
                )))
            }
            Err(e) => log::warn!("{}: unreadable feature cache ({e}), recomputing", path.display()),
        }
    }
    let features = registry.extract(&m.mesh, params)?;
    stats[1].fetch_add(1, Ordering::Relaxed);
    if let Some(path) = path {
        let tmp = path.with_extension("msegfeat.tmp");
        let cache = FeatureCache {
            source_hash: hash,
            features,
        };
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        cache.write(std::io::BufWriter::new(file))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        return Ok(cache.features);
    }
    Ok(features)
}

/// Extracts (or loads cached) raw features for every mesh, in parallel.
/// Only raw features are cached: normalization depends on the split.
pub fn prepare_meshes(
    dataset: &Dataset,
    params: &FeatureParams,
    cache_dir: Option<&Path>,
) -> Result<(Vec<PreparedMesh>, CacheStats)> {
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let stats = [AtomicUsize::new(0), AtomicUsize::new(0)];
    let prepared = dataset
        .meshes
        .par_iter()
        .map(|m| {
            let features = cached_features(m, params, cache_dir, &stats).context(|| format!("mesh {}", m.id))?;
            let graph = DualGraph::build(&m.mesh).context(|| format!("mesh {}", m.id))?;
            let agd = match features.channels().iter().position(|c| c == "agd") {
                Some(i) => features.column(i),
                None => average_geodesic_distance(&m.mesh, &graph),
            };
            Ok(PreparedMesh {
                id: m.id.clone(),
                labels: m.labels.clone(),
                areas: m.mesh.face_areas().to_vec(),
                graph,
                features,
                agd,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = CacheStats {
        reused: stats[0].load(Ordering::Relaxed),
        computed: stats[1].load(Ordering::Relaxed),
    };
    Ok((prepared, stats))
}

/// Seed of one (split, replicate) job, derived from the experiment seed.
pub fn replicate_seed(seed: u64, split: usize, replicate: usize) -> u64 {
    Rng::new(seed, &format!("split{split}/replicate{replicate}")).next_u64()
}

/// Trains a classifier on the listed meshes only.
pub fn train_split(
    meshes: &[PreparedMesh],
    train_ids: &[String],
    n_classes: usize,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Classifier, FitReport)> {
    let data = train_ids
        .iter()
        .map(|id| {
            let m = meshes
                .iter()
                .find(|m| &m.id == id)
                .ok_or_else(|| EvalError::UnknownMesh(id.clone()))?;
            Ok(LabeledFeatures {
                features: &m.features,
                graph: &m.graph,
                labels: &m.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classifier::fit(cfg.model, &data, n_classes, &cfg.train, &cfg.pretrain, seed)?)
}

/// One test mesh scored by one trained replicate.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationRecord {
    pub mesh: String,
    pub split: usize,
    pub replicate: usize,
    pub seed: u64,
    /// Accuracy of the network's argmax labels.
    pub accuracy_pre: f64,
    /// Accuracy after graph-cut refinement.
    pub accuracy: f64,
    pub labels_pre: Vec<usize>,
    pub labels: Vec<usize>,
    pub areas: Vec<f64>,
    pub refine_moves: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingSummary {
    pub split: usize,
    pub replicate: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshSummary {
    pub mesh: String,
    pub accuracy_pre_mean: f64,
    pub accuracy_mean: f64,
    pub accuracy_replicates: Vec<f64>,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SetSummary {
    pub accuracy_pre_mean: f64,
    pub accuracy_mean: f64,
    /// Mean refined accuracy over all test meshes, per replicate.
    pub replicate_means: Vec<f64>,
    pub replicate_std: f64,
    pub records: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub classes: Vec<String>,
    pub channels: Vec<String>,
    pub splits: Vec<Split>,
    pub training: Vec<TrainingSummary>,
    pub records: Vec<EvaluationRecord>,
    pub meshes: Vec<MeshSummary>,
    pub summary: SetSummary,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

fn run_job(
    meshes: &[PreparedMesh],
    split: &Split,
    replicate: usize,
    n_classes: usize,
    cfg: &ExperimentConfig,
) -> Result<(TrainingSummary, Vec<EvaluationRecord>)> {
    let seed = replicate_seed(cfg.seed, split.id, replicate);
    let ctx = || format!("split {} replicate {replicate}", split.id);
    let (mut clf, fit) = train_split(meshes, &split.train, n_classes, cfg, seed).context(ctx)?;
    let summary = TrainingSummary {
        split: split.id,
        replicate,
        seed,
        initial_loss: fit.train.initial_loss,
        final_loss: fit.train.epoch_loss.last().copied().unwrap_or(fit.train.initial_loss),
    };
    let mut records = Vec::new();
    for id in &split.test {
        assert!(!split.train.contains(id), "test mesh {id} is in its own training fold");
        let m = meshes.iter().find(|m| &m.id == id).ok_or_else(|| EvalError::UnknownMesh(id.clone()))?;
        let ctx = || format!("split {} replicate {replicate} mesh {id}", split.id);
        let probs = clf.predict(&m.features, &m.graph).context(ctx)?;
        let labels_pre: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let refined = refine(&m.graph, &probs, &m.agd, cfg.refine);
        records.push(EvaluationRecord {
            mesh: id.clone(),
            split: split.id,
            replicate,
            seed,
            accuracy_pre: accuracy(&labels_pre, &m.labels, &m.areas)?,
            accuracy: accuracy(&refined.labels, &m.labels, &m.areas)?,
            labels_pre,
            labels: refined.labels,
            areas: m.areas.clone(),
            refine_moves: refined.energy_trace.len() - 1,
        });
    }
    Ok((summary, records))
}

/// Runs every split × replicate job: train on the split's training meshes,
/// predict and refine each test mesh, and score both labelings. Jobs run
/// in parallel; records are sorted by mesh id and replicate.
pub fn run_experiment(
    dataset: &Dataset,
    plan: &SplitPlan,
    cfg: &ExperimentConfig,
    cache_dir: Option<&Path>,
) -> Result<(Report, CacheStats)> {
    cfg.validate()?;
    dataset.validate()?;
    let (meshes, stats) = prepare_meshes(dataset, &cfg.features, cache_dir)?;
    let splits = make_splits(&dataset.ids(), plan, cfg.seed)?;
    let n_classes = dataset.classes.len();
    let jobs: Vec<(&Split, usize)> = splits
        .iter()
        .flat_map(|s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(s, r)| run_job(&meshes, s, r, n_classes, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut training = Vec::new();
    let mut records = Vec::new();
    for (t, rs) in results {
        training.push(t);
        records.extend(rs);
    }
    records.sort_by(|a, b| (&a.mesh, a.replicate).cmp(&(&b.mesh, b.replicate)));

    let mut by_mesh: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in &records {
        by_mesh.entry(&r.mesh).or_default().push(r);
    }
    let mesh_summaries = by_mesh
        .iter()
        .map(|(id, rs)| {
            let acc: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            let pre: Vec<f64> = rs.iter().map(|r| r.accuracy_pre).collect();
            MeshSummary {
                mesh: id.to_string(),
                accuracy_pre_mean: mean(&pre),
                accuracy_mean: mean(&acc),
                accuracy_std: std_dev(&acc),
                accuracy_replicates: acc,
            }
        })
        .collect();
    let replicate_means: Vec<f64> = (0..cfg.replicates)
        .map(|r| {
            let acc: Vec<f64> = records.iter().filter(|x| x.replicate == r).map(|x| x.accuracy).collect();
            mean(&acc)
        })
        .collect();
    let all: Vec<f64> = records.iter().map(|r| r.accuracy).collect();
    let pre: Vec<f64> = records.iter().map(|r| r.accuracy_pre).collect();
    let summary = SetSummary {
        accuracy_pre_mean: mean(&pre),
        accuracy_mean: mean(&all),
        replicate_std: std_dev(&replicate_means),
        replicate_means,
        records: records.len(),
    };
    let channels = meshes.first().map(|m| m.features.channels().to_vec()).unwrap_or_default();
    let report = Report {
        config: cfg.clone(),
        seed: cfg.seed,
        classes: dataset.classes.clone(),
        channels,
        splits,
        training,
        records,
        meshes: mesh_summaries,
        summary,
    };
    Ok((report, stats))
}
