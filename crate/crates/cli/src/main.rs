use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshseg_core::config::ExperimentConfig;
use meshseg_core::eval::{self, accuracy, parse_labels, prepare_meshes, train_split, write_labels, Dataset, SplitPlan};
use meshseg_core::export::write_colored_ply;
use meshseg_core::features::{content_hash, FeatureCache, FeatureParams, FeatureRegistry};
use meshseg_core::graphcut::{read_probabilities, refine, write_probabilities, RefineParams};
use meshseg_core::mesh::{load_mesh, write_off, DualGraph, Mesh, MeshError, MeshFormat};
use meshseg_core::neural::gradcheck::{layer_suite, network_suite, LAYER_TOLERANCE, NETWORK_TOLERANCE};
use meshseg_core::neural::train::argmax;
use meshseg_core::neural::{Classifier, ModelKind, TrainConfig};
use meshseg_core::smoothing::{taubin_smooth, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU};
use meshseg_core::{Error, Result};

const THREADS_ENV: &str = "MESHSEG_THREADS";

#[derive(Parser)]
#[command(name = "meshseg", version, about = "Feature-based 3D mesh segmentation")]
struct Cli {
    /// Worker threads (overrides MESHSEG_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract raw per-face features into a cache file.
    Features {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamsFile,
    },
    /// Taubin-smooth a mesh and write the result as OFF.
    Smooth {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_MU, allow_hyphen_values = true)]
        mu: f64,
    },
    /// Train a classifier on every mesh of a dataset manifest.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Cnn)]
        model: ModelArg,
        #[arg(long, default_value_t = 3)]
        branches: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for reusable raw feature caches.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        params: ParamsFile,
    },
    /// Predict per-face class probabilities for one mesh.
    Segment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        /// Probability file output.
        #[arg(long)]
        out: PathBuf,
        /// Also write argmax labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        params: ParamsFile,
    },
    /// Graph-cut refinement of predicted probabilities.
    Refine {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Area-weighted accuracy of a labelling against ground truth.
    Eval {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a full cross-validated experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a PLY with one color per label.
    ExportColored {
        out: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Finite-difference gradient checks of every layer and a toy network.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        shapes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Cnn,
    PcaNn,
    AeNn,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
}

impl TrainArgs {
    fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        cfg.epochs = self.epochs.unwrap_or(cfg.epochs);
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg.lr_start = self.lr_start.unwrap_or(cfg.lr_start);
        cfg.lr_end = self.lr_end.unwrap_or(cfg.lr_end);
        cfg
    }
}

#[derive(Args)]
struct ParamsFile {
    /// Feature extraction parameters (JSON); defaults if omitted.
    #[arg(long)]
    feature_params: Option<PathBuf>,
}

impl ParamsFile {
    fn load(&self) -> Result<FeatureParams> {
        match &self.feature_params {
            None => Ok(FeatureParams::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

fn read_mesh(path: &Path) -> Result<(Mesh, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::Parse {
        line: 0,
        msg: format!("cannot infer mesh format from {}", path.display()),
    })?;
    let mesh = load_mesh(bytes.as_slice(), format).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok((mesh, bytes))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_labels(&text, &path.display().to_string())?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = create(path)?;
    write_labels(&mut out, labels).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// One JSON object on stdout summarizing the command's result.
fn summary(command: &str, fields: serde_json::Value) {
    let mut obj = serde_json::json!({ "command": command, "status": "ok" });
    if let (Some(o), serde_json::Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    println!("{obj}");
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Features { mesh, out, params } => {
            let params = params.load()?;
            let (m, bytes) = read_mesh(&mesh)?;
            let registry = FeatureRegistry::core();
            let hash = content_hash(&bytes, &params, &registry.channels(&params));
            let features = registry.extract(&m, &params)?;
            let cache = FeatureCache {
                source_hash: hash,
                features,
            };
            let mut w = create(&out)?;
            cache.write(&mut w)?;
            w.flush().map_err(|e| Error::io(&out, e))?;
            summary(
                "features",
                serde_json::json!({
                    "mesh": mesh, "faces": m.face_count(), "channels": cache.features.channels(),
                    "hash": hex(&hash), "out": out,
                }),
            );
        }
        Command::Smooth {
            mesh,
            out,
            iterations,
            lambda,
            mu,
        } => {
            let (m, _) = read_mesh(&mesh)?;
            let seq = taubin_smooth(&m, iterations, lambda, mu)?;
            let last = seq.levels.last().expect("at least one iteration");
            let mut w = create(&out)?;
            write_off(last, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&out, e))?;
            summary(
                "smooth",
                serde_json::json!({
                    "mesh": mesh, "iterations": iterations, "volume_before": m.signed_volume(),
                    "volume_after": last.signed_volume(), "out": out,
                }),
            );
        }
        Command::Train {
            dataset,
            out,
            model,
            branches,
            train,
            seed,
            cache,
            params,
        } => {
            let ds = Dataset::load(&dataset)?;
            let mut cfg = ExperimentConfig::from_json(r#"{"dataset": "", "output": ""}"#)?;
            cfg.dataset = dataset.clone();
            cfg.features = params.load()?;
            cfg.model = match model {
                ModelArg::Cnn => ModelKind::Cnn { branches },
                ModelArg::PcaNn => ModelKind::PcaNn,
                ModelArg::AeNn => ModelKind::AeNn,
            };
            cfg.train = train.apply(cfg.train);
            cfg.seed = seed;
            cfg.validate()?;
            let (meshes, stats) = prepare_meshes(&ds, &cfg.features, cache.as_deref())?;
            let (clf, fit) = train_split(&meshes, &ds.ids(), ds.classes.len(), &cfg, seed)?;
            let mut w = create(&out)?;
            clf.write(&mut w)?;
            w.flush().map_err(|e| Error::io(&out, e))?;
            summary(
                "train",
                serde_json::json!({
                    "seed": seed, "meshes": meshes.len(), "model": clf.architecture.descriptor(),
                    "initial_loss": fit.train.initial_loss, "final_loss": fit.train.epoch_loss.last(),
                    "cache_reused": stats.reused, "out": out,
                }),
            );
        }
        Command::Segment {
            model,
            mesh,
            out,
            labels,
            params,
        } => {
            let params = params.load()?;
            let mut clf = Classifier::read(open(&model)?).map_err(|e| Error::from(e).context(model.display().to_string()))?;
            let (m, _) = read_mesh(&mesh)?;
            let features = FeatureRegistry::core().extract(&m, &params)?;
            let graph = DualGraph::build(&m)?;
            let probs = clf.predict(&features, &graph)?;
            let mut w = create(&out)?;
            write_probabilities(&mut w, &probs)?;
            w.flush().map_err(|e| Error::io(&out, e))?;
            if let Some(path) = &labels {
                let l: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
                save_labels(path, &l)?;
            }
            summary(
                "segment",
                serde_json::json!({
                    "mesh": mesh, "faces": m.face_count(), "classes": clf.n_classes(),
                    "seed": clf.seed, "out": out, "labels": labels,
                }),
            );
        }
        Command::Refine {
            probs,
            mesh,
            lambda,
            omega,
            out,
        } => {
            let p = read_probabilities(open(&probs)?).map_err(|e| Error::from(e).context(probs.display().to_string()))?;
            let (m, _) = read_mesh(&mesh)?;
            if p.len() != m.face_count() {
                return Err(Error::Config(format!(
                    "{} has {} rows but the mesh has {} faces",
                    probs.display(),
                    p.len(),
                    m.face_count()
                )));
            }
            let graph = DualGraph::build(&m)?;
            let agd = meshseg_core::features::average_geodesic_distance(&m, &graph);
            let params = RefineParams { lambda, omega };
            let r = refine(&graph, &p, &agd, params);
            save_labels(&out, &r.labels)?;
            summary(
                "refine",
                serde_json::json!({
                    "mesh": mesh, "lambda": lambda, "omega": omega,
                    "energy_initial": r.energy_trace.first(), "energy_final": r.energy_trace.last(),
                    "moves": r.energy_trace.len() - 1, "out": out,
                }),
            );
        }
        Command::Eval { mesh, labels, truth } => {
            let (m, _) = read_mesh(&mesh)?;
            let acc = accuracy(&read_labels(&labels)?, &read_labels(&truth)?, m.face_areas())?;
            summary("eval", serde_json::json!({ "mesh": mesh, "accuracy": acc }));
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ds = Dataset::load(&cfg.dataset)?;
            let plan = SplitPlan::load(&cfg.protocol)?;
            let cache = cfg.output.join("cache");
            let (report, stats) = eval::run_experiment(&ds, &plan, &cfg, Some(&cache))?;
            let report_path = cfg.output.join("report.json");
            let mut w = create(&report_path)?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::io(&report_path, e.into()))?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&report_path, e))?;
            for r in &report.records {
                let path = cfg.output.join("labels").join(format!("{}.r{}.seg", r.mesh, r.replicate));
                save_labels(&path, &r.labels)?;
            }
            summary(
                "run",
                serde_json::json!({
                    "seed": cfg.seed, "records": report.records.len(),
                    "accuracy_pre": report.summary.accuracy_pre_mean, "accuracy": report.summary.accuracy_mean,
                    "cache_reused": stats.reused, "cache_computed": stats.computed, "report": report_path,
                }),
            );
        }
        Command::ExportColored { out, labels, mesh } => {
            let (m, _) = read_mesh(&mesh)?;
            let l = read_labels(&labels)?;
            let mut w = create(&out)?;
            write_colored_ply(&m, &l, &mut w)?;
            w.flush().map_err(|e| Error::io(&out, e))?;
            summary("export-colored", serde_json::json!({ "faces": m.face_count(), "out": out }));
        }
        Command::Gradcheck { seed, shapes } => {
            let layers = layer_suite(seed, shapes)?;
            let net = network_suite(seed, shapes)?;
            let layer_max = layers.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
            for (kind, r) in &layers {
                eprintln!("{kind:?}: max relative error {:.3e} ({} checked)", r.max_rel_error, r.checked);
            }
            let pass = layer_max <= LAYER_TOLERANCE && net.max_rel_error <= NETWORK_TOLERANCE;
            println!(
                "gradcheck seed={seed} layers={layer_max:.3e} network={:.3e} {}",
                net.max_rel_error,
                if pass { "PASS" } else { "FAIL" }
            );
            summary(
                "gradcheck",
                serde_json::json!({
                    "seed": seed, "shapes": shapes, "layer_max_rel_error": layer_max,
                    "network_max_rel_error": net.max_rel_error, "pass": pass,
                }),
            );
            return Ok(pass);
        }
    }
    Ok(true)
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "io" => 3,
        "mesh" => 4,
        "format" => 5,
        "feature" | "solve" | "smooth" => 6,
        "network" => 7,
        "eval" => 8,
        "export" => 9,
        _ => 1,
    }
}

fn configure_threads(flag: Option<usize>) -> std::result::Result<(), String> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.parse().map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error[config]: {msg}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
