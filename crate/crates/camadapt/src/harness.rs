//! Evaluation metrics, the episode-budget curve driver, and plotting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::imitation::{self, DaggerConfig, NetPolicy};
use crate::meta::{self, MetaHyper, MetaTask};
use crate::nets::{predict, ActionDistribution, ParamSet};
use crate::render::Image;
use crate::rng::SeedStream;
use crate::sim;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Per-axis displacement tolerance in meters.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_budgets")]
    pub episode_budgets: Vec<usize>,
}

fn default_tolerance() -> f64 {
    0.01
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_budgets() -> Vec<usize> {
    vec![10, 20, 40, 80, 100, 120]
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            seeds: default_seeds(),
            episode_budgets: default_budgets(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty evaluation dataset")]
    EmptyEval,
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("non-finite metric: {0}")]
    NonFinite(String),
    #[error("training failed: {0}")]
    Train(#[from] imitation::TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.tolerance > 0.0) {
            return Err(HarnessError::InvalidConfig("tolerance must be > 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidConfig("need at least one seed".into()));
        }
        if self.episode_budgets.windows(2).any(|w| w[0] >= w[1]) || self.episode_budgets.is_empty()
        {
            return Err(HarnessError::InvalidConfig(
                "episode budgets must be nonempty and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Paper-sense correctness of one predicted action.
pub fn action_correct(pred: &ActionDistribution, expert: [f64; 4], tolerance: f64) -> bool {
    let dpos_ok = (0..3).all(|i| (pred.mean_dpos[i] - expert[i]).abs() <= tolerance);
    dpos_ok && ((pred.grip_logit > 0.0) == (expert[3] == 1.0))
}

/// Fraction of frames whose predicted action matches the expert label.
pub fn success_rate(
    params: &ParamSet<f32>,
    eval: &[(&Image, &Image, [f64; 4], [f64; 4])],
    tolerance: f64,
) -> Result<f64, HarnessError> {
    if eval.is_empty() {
        return Err(HarnessError::EmptyEval);
    }
    let mut correct = 0usize;
    for (ext, eih, proprio, action) in eval {
        let pred = predict(params, ext, eih, *proprio);
        if action_correct(&pred, *action, tolerance) {
            correct += 1;
        }
    }
    Ok(correct as f64 / eval.len() as f64)
}

/// Borrowed evaluation tuples for a set of episodes of a dataset.
pub fn eval_frames<'a>(
    ds: &'a Dataset,
    episodes: &[usize],
) -> Vec<(&'a Image, &'a Image, [f64; 4], [f64; 4])> {
    let mut out = Vec::new();
    for &e in episodes {
        for f in &ds.episodes[e].frames {
            out.push((
                &f.ext_image,
                &f.eih_image,
                f.proprio.map(|v| v as f64),
                f.expert_action.map(|v| v as f64),
            ));
        }
    }
    out
}

/// Auxiliary closed-loop metric: fraction of fresh rollouts reaching task
/// success within 60 steps under the learned policy.
pub fn closed_loop_success(params: &ParamSet<f32>, n: usize, master_seed: u64) -> f64 {
    assert!(n >= 1);
    let cam = crate::render::CameraConfig::default();
    let mut ok = 0usize;
    for k in 0..n {
        let mut rng = SeedStream::new(master_seed, "closed-loop-config", k as u64);
        let obj = sim::sample_object_config(&mut rng);
        let pose = crate::render::camera_pose(&cam.clamped());
        let mut s = sim::reset(&obj);
        let mut driver = NetPolicy { params };
        for _ in 0..sim::MAX_STEPS {
            let ext = crate::render::render_pose(&s, &pose);
            let eih = crate::render::render_eih(&s);
            let a = crate::data::ActionSource::act(&mut driver, &s, &ext, &eih);
            s = sim::step(&s, &a);
            if sim::is_success(&s) {
                ok += 1;
                break;
            }
        }
    }
    ok as f64 / n as f64
}

// --- the Figure-2 curve ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveCell {
    pub budget: usize,
    pub method: String,
    pub seed: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveResult {
    pub cells: Vec<CurveCell>,
    /// Per (budget, method) seed means, in budget order.
    pub means: Vec<(usize, String, f64)>,
}

impl CurveResult {
    pub fn mean(&self, budget: usize, method: &str) -> Option<f64> {
        self.means
            .iter()
            .find(|(b, m, _)| *b == budget && m == method)
            .map(|(_, _, v)| *v)
    }

    pub fn from_cells(cells: Vec<CurveCell>) -> Self {
        let mut means = Vec::new();
        for c in &cells {
            if !means.iter().any(|(b, m, _): &(usize, String, f64)| *b == c.budget && *m == c.method) {
                let vals: Vec<f64> = cells
                    .iter()
                    .filter(|x| x.budget == c.budget && x.method == c.method)
                    .map(|x| x.success_rate)
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                means.push((c.budget, c.method.clone(), mean));
            }
        }
        Self { cells, means }
    }
}

/// Inputs the curve driver needs beyond the evaluation settings.
pub struct CurveInputs<'a> {
    /// Fully trained baseline parameters (policy + both encoders).
    pub baseline: &'a ParamSet<f32>,
    /// Meta-initialized external encoder for the held-out camera family.
    pub meta_ext: &'a crate::nets::EncoderParams<f32>,
    /// The held-out camera's paired task (support pool + query eval set).
    pub holdout_task: &'a MetaTask,
    /// Baseline success on its own camera, the reference level.
    pub baseline_level: f64,
    pub dagger: DaggerConfig,
    pub hyper: MetaHyper,
    pub master_seed: u64,
}

/// For each (budget, seed): scratch = full DAgger retraining on `budget`
/// fresh expert demos under the held-out camera; meta = adaptation of the
/// meta-initialization on the first `budget` support episodes with the
/// policy frozen. Both are scored on the held-out task's query frames.
pub fn run_curve(cfg: &EvalConfig, inputs: &CurveInputs<'_>) -> Result<CurveResult, HarnessError> {
    cfg.validate()?;
    let task = inputs.holdout_task;
    let eval: Vec<(&Image, &Image, [f64; 4], [f64; 4])> = task
        .split
        .query
        .iter()
        .flat_map(|&e| {
            let ep = &task.episodes[e];
            ep.pairs.iter().map(|p| {
                (
                    &p.ext_image,
                    &p.eih_image,
                    p.proprio.map(|v| v as f64),
                    query_label(p),
                )
            })
        })
        .collect();
    if eval.is_empty() {
        return Err(HarnessError::EmptyEval);
    }
    let mut cells = Vec::new();
    for &budget in &cfg.episode_budgets {
        for (si, &seed) in cfg.seeds.iter().enumerate() {
            // meta: adapt theta_ext only, policy and eih encoder frozen.
            // Adaptation on the first K support episodes is deterministic;
            // seed variation enters through the scratch retraining arm.
            let k = budget.min(task.split.support.len());
            let adapted = meta::meta_test_adapt(inputs.meta_ext, task, k, &inputs.hyper);
            let mut params = inputs.baseline.clone();
            params.ext = adapted;
            let rate = success_rate(&params, &eval, cfg.tolerance)?;
            push_cell(&mut cells, budget, "meta", seed, rate)?;

            // scratch: full DAgger retraining under the held-out camera
            let scratch_seed =
                SeedStream::new(inputs.master_seed, "curve-scratch", (budget as u64) << 8 | si as u64)
                    .fork_seed();
            let (scratch, _) =
                imitation::train_dagger(budget, &task.camera, &inputs.dagger, scratch_seed)?;
            let rate = success_rate(&scratch, &eval, cfg.tolerance)?;
            push_cell(&mut cells, budget, "scratch", seed, rate)?;
        }
    }
    Ok(CurveResult::from_cells(cells))
}

fn query_label(p: &meta::AlignPair) -> [f64; 4] {
    p.expert_action.map(|v| v as f64)
}

fn push_cell(
    cells: &mut Vec<CurveCell>,
    budget: usize,
    method: &str,
    seed: u64,
    rate: f64,
) -> Result<(), HarnessError> {
    if !rate.is_finite() {
        return Err(HarnessError::NonFinite(format!("{method}@{budget} seed {seed}")));
    }
    cells.push(CurveCell { budget, method: method.into(), seed, success_rate: rate });
    Ok(())
}

// --- CSV and plot ------------------------------------------------------------

/// Columns: budget, method, seed, success_rate. Seed means follow their
/// cells with seed column "mean". For the meta method, budget counts
/// support episodes consumed; for scratch, fresh expert demonstrations.
pub fn write_csv(result: &CurveResult, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["budget", "method", "seed", "success_rate"])?;
    for (b, m, mean) in &result.means {
        for c in result.cells.iter().filter(|c| c.budget == *b && &c.method == m) {
            w.write_record([
                c.budget.to_string(),
                c.method.clone(),
                c.seed.to_string(),
                format!("{:.6}", c.success_rate),
            ])?;
        }
        w.write_record([b.to_string(), m.clone(), "mean".into(), format!("{mean:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CurveResult, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[2] == "mean" {
            continue;
        }
        cells.push(CurveCell {
            budget: rec[0].parse().map_err(|e| HarnessError::InvalidConfig(format!("{e}")))?,
            method: rec[1].into(),
            seed: rec[2].parse().map_err(|e| HarnessError::InvalidConfig(format!("{e}")))?,
            success_rate: rec[3].parse().map_err(|e| HarnessError::InvalidConfig(format!("{e}")))?,
        });
    }
    Ok(CurveResult::from_cells(cells))
}

const PLOT_W: u32 = 640;
const PLOT_H: u32 = 480;
const MARGIN_L: i64 = 70;
const MARGIN_B: i64 = 50;
const MARGIN_T: i64 = 20;
const MARGIN_R: i64 = 20;

/// Seed-mean success rate vs episode budget, one polyline per method,
/// written as a PNG. The CSV is written first and is mandatory; the plot
/// shares its data.
pub fn plot_curve(result: &CurveResult, path: &Path) -> Result<(), HarnessError> {
    if result.means.is_empty() {
        return Err(HarnessError::EmptyEval);
    }
    let mut img = image::RgbImage::from_pixel(PLOT_W, PLOT_H, image::Rgb([255, 255, 255]));
    let budgets: Vec<usize> = {
        let mut b: Vec<usize> = result.means.iter().map(|(b, _, _)| *b).collect();
        b.sort_unstable();
        b.dedup();
        b
    };
    let bmax = *budgets.last().unwrap() as f64;
    let x_of = |b: f64| MARGIN_L + ((PLOT_W as i64 - MARGIN_L - MARGIN_R) as f64 * b / bmax) as i64;
    let y_of =
        |r: f64| (PLOT_H as i64 - MARGIN_B) - ((PLOT_H as i64 - MARGIN_T - MARGIN_B) as f64 * r) as i64;
    let axis = image::Rgb([0, 0, 0]);
    draw_line(&mut img, x_of(0.0), y_of(0.0), x_of(bmax), y_of(0.0), axis);
    draw_line(&mut img, x_of(0.0), y_of(0.0), x_of(0.0), y_of(1.0), axis);
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(frac);
        draw_line(&mut img, x_of(0.0) - 4, y, x_of(0.0), y, axis);
        draw_text(&mut img, x_of(0.0) - 46, y - 4, &format!("{frac:.2}"), axis);
    }
    for &b in &budgets {
        let x = x_of(b as f64);
        draw_line(&mut img, x, y_of(0.0), x, y_of(0.0) + 4, axis);
        draw_text(&mut img, x - 8, y_of(0.0) + 8, &b.to_string(), axis);
    }
    draw_text(&mut img, x_of(bmax / 2.0) - 60, PLOT_H as i64 - 14, "TRAINING EPISODES", axis);
    draw_text_vertical(&mut img, 8, y_of(0.5) - 45, "SUCCESS RATE", axis);
    let colors = [("meta", image::Rgb([200, 40, 40])), ("scratch", image::Rgb([40, 60, 200]))];
    for (mi, (method, color)) in colors.iter().enumerate() {
        let pts: Vec<(i64, i64)> = budgets
            .iter()
            .filter_map(|&b| result.mean(b, method).map(|r| (x_of(b as f64), y_of(r))))
            .collect();
        for w in pts.windows(2) {
            draw_line(&mut img, w[0].0, w[0].1, w[1].0, w[1].1, *color);
        }
        for (x, y) in &pts {
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    put(&mut img, x + dx, y + dy, *color);
                }
            }
        }
        let ly = MARGIN_T + 12 * mi as i64;
        draw_line(&mut img, PLOT_W as i64 - 140, ly + 3, PLOT_W as i64 - 120, ly + 3, *color);
        draw_text(&mut img, PLOT_W as i64 - 114, ly, &method.to_uppercase(), *color);
    }
    img.save(path).map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn put(img: &mut image::RgbImage, x: i64, y: i64, c: image::Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_line(img: &mut image::RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, c: image::Rgb<u8>) {
    // Bresenham
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// 5x7 bitmap glyphs: uppercase letters, digits, and a few symbols.
fn glyph(ch: char) -> [u8; 7] {
    match ch {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0E],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        _ => [0; 7],
    }
}

fn draw_text(img: &mut image::RgbImage, x: i64, y: i64, text: &str, c: image::Rgb<u8>) {
    for (i, ch) in text.chars().enumerate() {
        let g = glyph(ch.to_ascii_uppercase());
        for (row, bits) in g.iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    put(img, x + i as i64 * 6 + col, y + row as i64, c);
                }
            }
        }
    }
}

fn draw_text_vertical(img: &mut image::RgbImage, x: i64, y: i64, text: &str, c: image::Rgb<u8>) {
    for (i, ch) in text.chars().enumerate() {
        let g = glyph(ch.to_ascii_uppercase());
        for (row, bits) in g.iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    put(img, x + col, y + i as i64 * 8 + row as i64, c);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(dpos: [f64; 3], logit: f64) -> ActionDistribution {
        ActionDistribution { mean_dpos: dpos, grip_logit: logit }
    }

    #[test]
    fn action_correct_examples() {
        let e = [0.01, 0.0, -0.02, 0.0];
        assert!(action_correct(&dist([0.01, 0.0, -0.02], -1.0), e, 0.01));
        // one axis off by 0.02 with tolerance 0.01
        assert!(!action_correct(&dist([0.03, 0.0, -0.02], -1.0), e, 0.01));
        // displacement exact, gripper flipped
        assert!(!action_correct(&dist([0.01, 0.0, -0.02], 1.0), e, 0.01));
        let eg = [0.0, 0.0, 0.0, 1.0];
        assert!(action_correct(&dist([0.0, 0.0, 0.0], 2.0), eg, 0.01));
    }

    #[test]
    fn success_rate_bounds_and_monotonicity() {
        let params = ParamSet::<f32>::init(7);
        let cam = crate::render::CameraConfig::default();
        let ds = crate::imitation::record_expert_demos(2, &cam, 12);
        let eval = eval_frames(&ds, &[0, 1]);
        let r1 = success_rate(&params, &eval, 0.01).unwrap();
        let r2 = success_rate(&params, &eval, 0.05).unwrap();
        let r3 = success_rate(&params, &eval, 1.0).unwrap();
        assert!((0.0..=1.0).contains(&r1));
        assert!(r1 <= r2 && r2 <= r3, "{r1} {r2} {r3}");
        assert!(matches!(
            success_rate(&params, &[], 0.01),
            Err(HarnessError::EmptyEval)
        ));
    }

    #[test]
    fn eval_config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        let bad = EvalConfig { tolerance: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EvalConfig { episode_budgets: vec![10, 10], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_roundtrip_and_means() {
        let cells = vec![
            CurveCell { budget: 10, method: "meta".into(), seed: 1, success_rate: 0.5 },
            CurveCell { budget: 10, method: "meta".into(), seed: 2, success_rate: 0.7 },
            CurveCell { budget: 20, method: "scratch".into(), seed: 1, success_rate: 0.25 },
        ];
        let result = CurveResult::from_cells(cells);
        assert_eq!(result.mean(10, "meta"), Some(0.6));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_csv(&result, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, result);
        // byte determinism
        let path2 = dir.path().join("curve2.csv");
        write_csv(&result, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn plot_writes_nonempty_png_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.png");
        let empty = CurveResult::default();
        assert!(plot_curve(&empty, &path).is_err());
        assert!(!path.exists());
        let result = CurveResult::from_cells(vec![
            CurveCell { budget: 10, method: "meta".into(), seed: 1, success_rate: 0.4 },
            CurveCell { budget: 40, method: "meta".into(), seed: 1, success_rate: 0.8 },
            CurveCell { budget: 10, method: "scratch".into(), seed: 1, success_rate: 0.2 },
            CurveCell { budget: 40, method: "scratch".into(), seed: 1, success_rate: 0.5 },
        ]);
        plot_curve(&result, &path).unwrap();
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }

    #[test]
    fn closed_loop_expert_floor_and_range() {
        // trained-policy closed loop is covered by the acceptance tests;
        // here: the metric is within bounds for an untrained net
        let params = ParamSet::<f32>::init(3);
        let r = closed_loop_success(&params, 3, 5);
        assert!((0.0..=1.0).contains(&r));
    }
}
