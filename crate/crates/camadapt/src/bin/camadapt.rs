//! Command-line driver for the full pipeline: demo recording, baseline
//! DAgger training, multi-view recording, meta-training, few-shot
//! adaptation, evaluation, and the episode-budget curve.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use camadapt::ckpt;
use camadapt::data::{self, Dataset};
use camadapt::harness::{self, CurveInputs, EvalConfig};
use camadapt::imitation::{self, DaggerConfig};
use camadapt::meta::{self, MetaHyper, MetaTask, ViewMeta};
use camadapt::nets::{EncoderParams, ParamSet};
use camadapt::render::CameraConfig;

#[derive(Parser)]
#[command(name = "camadapt", version, about = "dual-camera visuomotor policy with meta camera adaptation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record expert demonstrations under the baseline camera.
    GenDemos {
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the baseline policy with DAgger on recorded demos.
    TrainBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 6)]
        rounds: usize,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 250)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record baseline trajectories and replay them under each camera.
    RecordViews {
        #[arg(long)]
        baseline: PathBuf,
        /// TOML file: [baseline] camera plus [[cameras]] entries.
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long, default_value_t = 20)]
        objects: usize,
        #[arg(long, default_value_t = 8)]
        episodes_per_config: usize,
        #[arg(long, default_value_t = 0.01)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// MAML over the recorded camera tasks, holding one out.
    MetaTrain {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        views: PathBuf,
        #[arg(long)]
        holdout: usize,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        /// Inner-loop step size; 1e-4 is the largest stable value for
        /// plain gradient descent on the alignment objective.
        #[arg(long, default_value_t = 1e-4)]
        inner_lr: f64,
        #[arg(long)]
        first_order: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Few-shot adaptation of the external encoder on support episodes.
    Adapt {
        #[arg(long)]
        meta: PathBuf,
        /// A camera directory produced by record-views (with targets.vmwt).
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 1e-4)]
        inner_lr: f64,
        /// Gradient steps on the support alignment loss.
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Action-prediction success rate of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also roll the policy out closed-loop on N fresh configs.
        #[arg(long)]
        closed_loop: Option<usize>,
    },
    /// The full episode-budget curve (meta vs scratch), CSV + plot.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, serde::Deserialize)]
struct CameraFile {
    #[serde(default)]
    baseline: Option<CameraConfig>,
    cameras: Vec<CameraConfig>,
}

/// Config file for the `curve` subcommand.
#[derive(Debug, serde::Deserialize)]
struct CurveConfig {
    master_seed: u64,
    baseline_ckpt: PathBuf,
    views_dir: PathBuf,
    /// Index into the views' camera list.
    holdout: usize,
    /// Optional precomputed meta checkpoint; meta-trains here if absent.
    #[serde(default)]
    meta_ckpt: Option<PathBuf>,
    #[serde(default)]
    eval: EvalConfig,
    #[serde(default)]
    meta_iterations: Option<usize>,
    #[serde(default)]
    inner_lr: Option<f64>,
    #[serde(default)]
    inner_steps: Option<usize>,
    #[serde(default)]
    adapt_steps: Option<usize>,
    #[serde(default)]
    first_order: Option<bool>,
    #[serde(default)]
    support_batch: Option<usize>,
    #[serde(default)]
    query_batch: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<(), String> {
    match cmd {
        Cmd::GenDemos { episodes, seed, out } => {
            if episodes == 0 {
                return Err("schema violation: --episodes must be positive".into());
            }
            let cam = CameraConfig::default();
            let ds = imitation::record_expert_demos(episodes, &cam, seed);
            data::save_dataset(&ds, &out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} episodes ({} frames) to {}",
                ds.episodes.len(),
                ds.total_frames(),
                out.display()
            );
            Ok(())
        }
        Cmd::TrainBaseline { data: dir, rounds, epochs, batch, out } => {
            let demos = load_dataset(&dir)?;
            let cam = demos
                .episodes
                .first()
                .map(|e| e.camera_config)
                .ok_or("schema violation: demo dataset is empty")?;
            let cfg = DaggerConfig {
                rounds,
                epochs_per_round: epochs,
                batch_size: batch,
                ..DaggerConfig::default()
            };
            let seed = demos.master_seed;
            let (params, dataset) =
                imitation::train_dagger_from(demos, &cam, &cfg, seed).map_err(|e| e.to_string())?;
            ckpt::save_params(&params, &out).map_err(|e| e.to_string())?;
            println!(
                "trained baseline on {} aggregated episodes; checkpoint {}",
                dataset.episodes.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::RecordViews { baseline, cameras, objects, episodes_per_config, jitter, seed, out } => {
            let params = load_ckpt(&baseline)?;
            let text = std::fs::read_to_string(&cameras)
                .map_err(|e| format!("missing artifact: {}: {e}", cameras.display()))?;
            let file: CameraFile = toml::from_str(&text)
                .map_err(|e| format!("schema violation in {}: {e}", cameras.display()))?;
            if file.cameras.is_empty() {
                return Err("schema violation: camera file lists no cameras".into());
            }
            let base_cam = file.baseline.unwrap_or_default();
            let vs = meta::record_view_data(
                &base_cam,
                &file.cameras,
                objects,
                episodes_per_config,
                jitter,
                seed,
            );
            let targets = meta::build_baseline_targets(&params.ext, &vs.baseline);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            data::save_dataset(&vs.baseline, &out.join("baseline")).map_err(|e| e.to_string())?;
            for (i, (_, ds)) in vs.views.iter().enumerate() {
                let dir = out.join(format!("cam{i}"));
                data::save_dataset(ds, &dir).map_err(|e| e.to_string())?;
                meta::save_targets(&targets, &dir.join("targets.vmwt"))
                    .map_err(|e| e.to_string())?;
            }
            let metadata = ViewMeta {
                master_seed: seed,
                n_objects: objects,
                episodes_per_config,
                jitter,
                baseline: base_cam,
                cameras: file.cameras,
            };
            std::fs::write(
                out.join("views.toml"),
                toml::to_string_pretty(&metadata).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            println!(
                "recorded {} baseline episodes under {} cameras in {}",
                vs.baseline.episodes.len(),
                metadata.cameras.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::MetaTrain { baseline, views, holdout, iterations, inner_lr, first_order, out } => {
            let params = load_ckpt(&baseline)?;
            let (metadata, tasks) = load_views(&views)?;
            if holdout >= tasks.len() {
                return Err(format!(
                    "schema violation: --holdout {holdout} out of range for {} cameras",
                    tasks.len()
                ));
            }
            let hyper = MetaHyper {
                meta_iterations: iterations,
                inner_lr,
                first_order,
                ..MetaHyper::default()
            };
            let (meta_ext, trace) =
                meta::meta_train(&params.ext, &tasks, holdout, &hyper, metadata.master_seed);
            let mut meta_params = params;
            meta_params.ext = meta_ext;
            ckpt::save_params(&meta_params, &out).map_err(|e| e.to_string())?;
            println!(
                "meta-trained {} iterations (holdout cam{holdout}); outer loss {:.6} -> {:.6}; checkpoint {}",
                trace.len(),
                trace.first().copied().unwrap_or(f64::NAN),
                trace.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
            Ok(())
        }
        Cmd::Adapt { meta: meta_path, support, episodes, inner_lr, steps, out } => {
            if episodes == 0 {
                return Err("schema violation: --episodes must be at least 1".into());
            }
            let params = load_ckpt(&meta_path)?;
            let task = load_support_task(&support)?;
            if episodes > task.split.support.len() {
                return Err(format!(
                    "schema violation: --episodes {episodes} exceeds the {} support episodes",
                    task.split.support.len()
                ));
            }
            let hyper = MetaHyper { inner_lr, inner_steps: steps, ..MetaHyper::default() };
            let adapted = meta::meta_test_adapt(&params.ext, &task, episodes, &hyper);
            let mut out_params = params;
            out_params.ext = adapted;
            ckpt::save_params(&out_params, &out).map_err(|e| e.to_string())?;
            println!(
                "adapted on {} support episodes; checkpoint {}",
                episodes,
                out.display()
            );
            Ok(())
        }
        Cmd::Eval { ckpt: ckpt_path, data: dir, closed_loop } => {
            let params = load_ckpt(&ckpt_path)?;
            let ds = load_dataset(&dir)?;
            let idx: Vec<usize> = (0..ds.episodes.len()).collect();
            let eval = harness::eval_frames(&ds, &idx);
            let rate = harness::success_rate(&params, &eval, EvalConfig::default().tolerance)
                .map_err(|e| e.to_string())?;
            println!("{rate}");
            if let Some(n) = closed_loop {
                if n == 0 {
                    return Err("schema violation: --closed-loop must be at least 1".into());
                }
                let cl = harness::closed_loop_success(&params, n, ds.master_seed);
                println!("closed_loop {cl}");
            }
            Ok(())
        }
        Cmd::Curve { config, out_dir } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| format!("missing artifact: {}: {e}", config.display()))?;
            let cfg: CurveConfig = toml::from_str(&text)
                .map_err(|e| format!("schema violation in {}: {e}", config.display()))?;
            cfg.eval.validate().map_err(|e| e.to_string())?;
            let baseline = load_ckpt(&cfg.baseline_ckpt)?;
            let (metadata, tasks) = load_views(&cfg.views_dir)?;
            if cfg.holdout >= tasks.len() {
                return Err(format!(
                    "schema violation: holdout {} out of range for {} cameras",
                    cfg.holdout,
                    tasks.len()
                ));
            }
            let mut hyper = MetaHyper::default();
            if let Some(v) = cfg.meta_iterations {
                hyper.meta_iterations = v;
            }
            hyper.inner_lr = cfg.inner_lr.unwrap_or(1e-4);
            if let Some(v) = cfg.inner_steps {
                hyper.inner_steps = v;
            }
            if let Some(v) = cfg.first_order {
                hyper.first_order = v;
            }
            hyper.support_batch = cfg.support_batch.or(hyper.support_batch);
            hyper.query_batch = cfg.query_batch.or(hyper.query_batch);
            let meta_ext: EncoderParams<f32> = match &cfg.meta_ckpt {
                Some(p) => load_ckpt(p)?.ext,
                None => {
                    meta::meta_train(&baseline.ext, &tasks, cfg.holdout, &hyper, metadata.master_seed).0
                }
            };
            // the baseline's own-camera reference level, on the same frames
            // the paper-sense metric sees: the baseline-camera renders of
            // the held-out task's query trajectories
            let baseline_task = {
                let base_ds = load_dataset(&cfg.views_dir.join("baseline"))?;
                let targets = meta::build_baseline_targets(&baseline.ext, &base_ds);
                meta::build_meta_task(
                    &base_ds,
                    &targets,
                    metadata.baseline,
                    meta::support_configs_for(metadata.n_objects),
                    metadata.master_seed,
                )
                .map_err(|e| format!("schema violation: {e}"))?
            };
            let baseline_level = {
                let idx = &baseline_task.split.query;
                let eval: Vec<_> = idx
                    .iter()
                    .flat_map(|&e| {
                        baseline_task.episodes[e].pairs.iter().map(|p| {
                            (
                                &p.ext_image,
                                &p.eih_image,
                                p.proprio.map(|v| v as f64),
                                p.expert_action.map(|v| v as f64),
                            )
                        })
                    })
                    .collect();
                harness::success_rate(&baseline, &eval, cfg.eval.tolerance)
                    .map_err(|e| e.to_string())?
            };
            let mut adapt_hyper = hyper.clone();
            if let Some(v) = cfg.adapt_steps {
                adapt_hyper.inner_steps = v;
            }
            let inputs = CurveInputs {
                baseline: &baseline,
                meta_ext: &meta_ext,
                holdout_task: &tasks[cfg.holdout],
                baseline_level,
                dagger: DaggerConfig::default(),
                hyper: adapt_hyper,
                master_seed: cfg.master_seed,
            };
            let result = harness::run_curve(&cfg.eval, &inputs).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            harness::write_csv(&result, &out_dir.join("curve.csv")).map_err(|e| e.to_string())?;
            if let Err(e) = harness::plot_curve(&result, &out_dir.join("curve.png")) {
                eprintln!("warning: plot failed ({e}); CSV written");
            }
            println!("baseline_level {baseline_level:.6}");
            for (b, m, v) in &result.means {
                println!("{m}@{b} {v:.6}");
            }
            Ok(())
        }
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset, String> {
    data::load_dataset(dir).map_err(|e| format!("missing artifact: {}: {e}", dir.display()))
}

fn load_ckpt(path: &Path) -> Result<ParamSet<f32>, String> {
    ckpt::load_params(path).map_err(|e| format!("missing artifact: {}: {e}", path.display()))
}

fn load_views(dir: &Path) -> Result<(ViewMeta, Vec<MetaTask>), String> {
    let meta_path = dir.join("views.toml");
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|e| format!("missing artifact: {}: {e}", meta_path.display()))?;
    let metadata: ViewMeta = toml::from_str(&text)
        .map_err(|e| format!("schema violation in {}: {e}", meta_path.display()))?;
    let n_support = meta::support_configs_for(metadata.n_objects);
    let mut tasks = Vec::with_capacity(metadata.cameras.len());
    for (i, cam) in metadata.cameras.iter().enumerate() {
        let cam_dir = dir.join(format!("cam{i}"));
        let ds = load_dataset(&cam_dir)?;
        let targets = meta::load_targets(&cam_dir.join("targets.vmwt"))
            .map_err(|e| format!("missing artifact: {}: {e}", cam_dir.display()))?;
        let task = meta::build_meta_task(&ds, &targets, *cam, n_support, metadata.master_seed)
            .map_err(|e| format!("schema violation: {e}"))?;
        tasks.push(task);
    }
    Ok((metadata, tasks))
}

fn load_support_task(dir: &Path) -> Result<MetaTask, String> {
    let ds = load_dataset(dir)?;
    let targets = meta::load_targets(&dir.join("targets.vmwt"))
        .map_err(|e| format!("missing artifact: {}: {e}", dir.display()))?;
    let cam = ds
        .episodes
        .first()
        .map(|e| e.camera_config)
        .ok_or("schema violation: support dataset is empty")?;
    let n_configs = {
        let mut keys: Vec<[u64; 2]> = ds
            .episodes
            .iter()
            .map(|e| [e.object_config.obj_xy[0].to_bits(), e.object_config.goal_xy[0].to_bits()])
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    };
    meta::build_meta_task(&ds, &targets, cam, meta::support_configs_for(n_configs), ds.master_seed)
        .map_err(|e| format!("schema violation: {e}"))
}
