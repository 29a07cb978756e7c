//! MAML over camera configurations: inner-loop gradient descent on a
//! latent-alignment loss for the external encoder, outer-loop update
//! differentiated through the inner steps.
//!
//! The outer gradient is computed with the reverse recursion
//! v_k = grad_query(theta_k); v_i = (I - alpha H_support(theta_i)) v_{i+1},
//! where every Hessian-vector product is exact (forward-over-reverse).

use crate::data::{Dataset, SupportQuerySplit};
use crate::nets::dual::alignment_grad_hvp;
use crate::nets::encoder::{self, EncoderParams};
use crate::nets::model::MICRO_BATCH;
use crate::nets::real::Real;
use crate::nets::Adam;
use crate::render::{CameraConfig, Image};
use crate::rng::SeedStream;

#[derive(Debug, Clone)]
pub struct MetaHyper {
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps: usize,
    pub meta_iterations: usize,
    pub first_order: bool,
    /// Support/query pairs sampled per meta iteration (None = all).
    pub support_batch: Option<usize>,
    pub query_batch: Option<usize>,
}

impl Default for MetaHyper {
    fn default() -> Self {
        Self {
            inner_lr: 1e-2,
            outer_lr: 1e-3,
            inner_steps: 5,
            meta_iterations: 500,
            first_order: false,
            support_batch: Some(32),
            query_batch: Some(32),
        }
    }
}

/// A differentiable adaptation objective over an indexed pair set.
pub trait MetaObjective<R: Real> {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[R], batch: &[usize]) -> f64;
    fn grad(&self, theta: &[R], batch: &[usize]) -> (f64, Vec<R>);
    /// Exact Hessian-vector product at `theta` in direction `v`.
    fn hvp(&self, theta: &[R], v: &[R], batch: &[usize]) -> Vec<R>;
}

// --- alignment objective for the external encoder ---------------------------

/// One (new external image, frozen baseline latent target) pair, with the
/// unchanged eye-in-hand image and proprioception carried alongside for
/// downstream policy evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignPair {
    pub ext_image: Image,
    pub target: [f32; 32],
    pub eih_image: Image,
    pub proprio: [f32; 4],
    /// Expert label of the underlying frame; carried for policy evaluation.
    pub expert_action: [f32; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEpisode {
    pub pairs: Vec<AlignPair>,
}

/// One camera configuration's paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaTask {
    pub camera: CameraConfig,
    pub episodes: Vec<TaskEpisode>,
    /// Episode-index split at object-config granularity.
    pub split: SupportQuerySplit,
}

impl MetaTask {
    pub fn all_pairs(&self) -> Vec<&AlignPair> {
        self.episodes.iter().flat_map(|e| e.pairs.iter()).collect()
    }

    /// Flat pair indices of the split sides (episode order preserved).
    pub fn pair_indices(&self, episodes: &[usize]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.episodes.len());
        let mut o = 0;
        for e in &self.episodes {
            offsets.push(o);
            o += e.pairs.len();
        }
        let mut out = Vec::new();
        for &e in episodes {
            out.extend(offsets[e]..offsets[e] + self.episodes[e].pairs.len());
        }
        out
    }
}

/// Mean squared L2 alignment loss over encoder parameters.
pub struct EncoderAlignment<'a> {
    pairs: Vec<&'a AlignPair>,
}

impl<'a> EncoderAlignment<'a> {
    pub fn new(pairs: Vec<&'a AlignPair>) -> Self {
        Self { pairs }
    }

    pub fn from_task(task: &'a MetaTask) -> Self {
        Self::new(task.all_pairs())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn chunk_inputs<R: Real>(&self, chunk: &[usize]) -> (Vec<R>, Vec<R>) {
        let imgs: Vec<&Image> = chunk.iter().map(|&i| &self.pairs[i].ext_image).collect();
        let x = encoder::images_to_batch(&imgs);
        let mut targets = Vec::with_capacity(chunk.len() * 32);
        for &i in chunk {
            targets.extend(self.pairs[i].target.iter().map(|&t| R::from_f64(t as f64)));
        }
        (x, targets)
    }
}

impl<R: Real> MetaObjective<R> for EncoderAlignment<'_> {
    fn dim(&self) -> usize {
        EncoderParams::<R>::flat_len()
    }

    fn loss(&self, theta: &[R], batch: &[usize]) -> f64 {
        let p = EncoderParams::from_flat(theta);
        let n = batch.len();
        assert!(n > 0, "alignment loss over an empty batch");
        let mut loss = 0.0;
        for chunk in batch.chunks(MICRO_BATCH) {
            let (x, targets) = self.chunk_inputs::<R>(chunk);
            let (feat, _) = encoder::forward(&p, x, chunk.len());
            for (f, t) in feat.iter().zip(&targets) {
                loss += (*f - *t).to_f64().powi(2);
            }
        }
        loss / n as f64
    }

    fn grad(&self, theta: &[R], batch: &[usize]) -> (f64, Vec<R>) {
        let p = EncoderParams::from_flat(theta);
        let n = batch.len();
        assert!(n > 0);
        let mut loss = 0.0;
        let mut grad = vec![R::zero(); EncoderParams::<R>::flat_len()];
        for chunk in batch.chunks(MICRO_BATCH) {
            let (x, targets) = self.chunk_inputs::<R>(chunk);
            let b = chunk.len();
            let (feat, tape) = encoder::forward(&p, x, b);
            let scale = R::from_f64(2.0 / n as f64);
            let mut dfeat = vec![R::zero(); b * 32];
            for i in 0..b * 32 {
                let diff = feat[i] - targets[i];
                loss += diff.to_f64().powi(2) / n as f64;
                dfeat[i] = scale * diff;
            }
            let g = encoder::backward(&p, &tape, &dfeat);
            let mut o = 0;
            for t in &g.t {
                for v in t {
                    grad[o] = grad[o] + *v;
                    o += 1;
                }
            }
        }
        (loss, grad)
    }

    fn hvp(&self, theta: &[R], v: &[R], batch: &[usize]) -> Vec<R> {
        let p = EncoderParams::from_flat(theta);
        let dir = EncoderParams::from_flat(v);
        let n = batch.len();
        assert!(n > 0);
        let mut hv = vec![R::zero(); EncoderParams::<R>::flat_len()];
        let inv = R::from_f64(1.0 / n as f64);
        for chunk in batch.chunks(MICRO_BATCH) {
            let (x, targets) = self.chunk_inputs::<R>(chunk);
            // the fused pass computes mean-over-chunk; rescale to mean-over-batch
            let (_, _, h) = alignment_grad_hvp(&p, &dir, x, &targets, chunk.len());
            let scale = R::from_f64(chunk.len() as f64) * inv;
            let mut o = 0;
            for t in &h.t {
                for val in t {
                    hv[o] = hv[o] + *val * scale;
                    o += 1;
                }
            }
        }
        hv
    }
}

// --- generic MAML machinery --------------------------------------------------

/// Plain gradient-descent inner loop; returns every iterate
/// theta_0 .. theta_k (theta_0 is the input).
pub fn inner_adapt<R: Real, O: MetaObjective<R>>(
    obj: &O,
    theta: &[R],
    support: &[usize],
    inner_lr: f64,
    steps: usize,
) -> Vec<Vec<R>> {
    let alpha = R::from_f64(inner_lr);
    let mut iterates = vec![theta.to_vec()];
    for _ in 0..steps {
        let cur = iterates.last().unwrap();
        let (_, g) = obj.grad(cur, support);
        let next: Vec<R> = cur.iter().zip(&g).map(|(t, gi)| *t - alpha * *gi).collect();
        iterates.push(next);
    }
    iterates
}

/// Outer loss and gradient for one task: query loss at the adapted
/// parameters, differentiated through the inner steps unless `first_order`.
pub fn meta_grad<R: Real, O: MetaObjective<R>>(
    obj: &O,
    theta: &[R],
    support: &[usize],
    query: &[usize],
    hyper: &MetaHyper,
) -> (f64, Vec<R>) {
    let iterates = inner_adapt(obj, theta, support, hyper.inner_lr, hyper.inner_steps);
    let adapted = iterates.last().unwrap();
    let (outer_loss, mut v) = obj.grad(adapted, query);
    if !hyper.first_order {
        let alpha = R::from_f64(hyper.inner_lr);
        for i in (0..hyper.inner_steps).rev() {
            let hv = obj.hvp(&iterates[i], &v, support);
            for (vi, h) in v.iter_mut().zip(&hv) {
                *vi = *vi - alpha * *h;
            }
        }
    }
    (outer_loss, v)
}

/// Per-task support/query pair batches for one meta iteration.
pub struct TaskBatch<'a, R: Real> {
    pub obj: &'a dyn MetaObjective<R>,
    pub support: Vec<usize>,
    pub query: Vec<usize>,
}

/// One outer update: sum of per-task outer gradients (fixed task order),
/// applied by the outer optimizer. Returns the summed outer loss.
pub fn meta_step<R: Real>(
    theta: &mut [R],
    tasks: &[TaskBatch<'_, R>],
    hyper: &MetaHyper,
    opt: &mut Adam<R>,
) -> f64 {
    assert!(!tasks.is_empty());
    let mut total = vec![R::zero(); theta.len()];
    let mut loss = 0.0;
    for t in tasks {
        let (l, g) = meta_grad_dyn(t.obj, theta, &t.support, &t.query, hyper);
        loss += l;
        for (a, b) in total.iter_mut().zip(&g) {
            *a = *a + *b;
        }
    }
    assert!(loss.is_finite(), "non-finite outer loss");
    opt.step(theta, &total, &[]);
    loss
}

fn meta_grad_dyn<R: Real>(
    obj: &dyn MetaObjective<R>,
    theta: &[R],
    support: &[usize],
    query: &[usize],
    hyper: &MetaHyper,
) -> (f64, Vec<R>) {
    struct Wrap<'a, R: Real>(&'a dyn MetaObjective<R>);
    impl<R: Real> MetaObjective<R> for Wrap<'_, R> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn loss(&self, theta: &[R], batch: &[usize]) -> f64 {
            self.0.loss(theta, batch)
        }
        fn grad(&self, theta: &[R], batch: &[usize]) -> (f64, Vec<R>) {
            self.0.grad(theta, batch)
        }
        fn hvp(&self, theta: &[R], v: &[R], batch: &[usize]) -> Vec<R> {
            self.0.hvp(theta, v, batch)
        }
    }
    meta_grad(&Wrap(obj), theta, support, query, hyper)
}

// --- task construction -------------------------------------------------------

/// Baseline trajectories plus their renders under every camera config.
pub struct ViewSet {
    /// Trajectories rendered under the baseline camera.
    pub baseline: Dataset,
    /// The same trajectories replayed under each task camera.
    pub views: Vec<(CameraConfig, Dataset)>,
    /// Taken-action sequences, one per baseline episode.
    pub actions: Vec<Vec<crate::sim::Action>>,
}

/// Record jittered-expert baseline trajectories on `n_objects` fresh object
/// configs (`episodes_per_config` rollouts each), then replay each stored
/// action sequence under every camera in `cameras`. World states are
/// identical across cameras by kinematic determinism.
pub fn record_view_data(
    baseline_cam: &CameraConfig,
    cameras: &[CameraConfig],
    n_objects: usize,
    episodes_per_config: usize,
    jitter: f64,
    master_seed: u64,
) -> ViewSet {
    use crate::data::{record_episode, JitteredExpert, ReplaySource, TapSource};

    let mut baseline_eps = Vec::new();
    let mut actions = Vec::new();
    for c in 0..n_objects {
        let mut cfg_rng = SeedStream::new(master_seed, "views-config", c as u64);
        let obj = crate::sim::sample_object_config(&mut cfg_rng);
        for j in 0..episodes_per_config {
            let idx = (c as u64) << 16 | j as u64;
            let mut expert = JitteredExpert {
                rng: SeedStream::new(master_seed, "views-jitter", idx),
                amplitude: jitter,
            };
            let mut tap = TapSource::new(&mut expert);
            let ep = record_episode(&mut tap, &obj, baseline_cam, idx, "views-baseline");
            actions.push(tap.log);
            baseline_eps.push(ep);
        }
    }
    let baseline = Dataset {
        episodes: baseline_eps,
        master_seed,
        producer: "record-views".into(),
    };
    let mut views = Vec::with_capacity(cameras.len());
    for (ci, cam) in cameras.iter().enumerate() {
        let mut eps = Vec::with_capacity(baseline.episodes.len());
        for (ei, base) in baseline.episodes.iter().enumerate() {
            let mut replay = ReplaySource::new(actions[ei].clone());
            let ep = record_episode(
                &mut replay,
                &base.object_config,
                cam,
                base.seed,
                &format!("view-cam{ci}"),
            );
            debug_assert_eq!(ep.frames.len(), base.frames.len());
            eps.push(ep);
        }
        views.push((
            *cam,
            Dataset { episodes: eps, master_seed, producer: format!("record-views-cam{ci}") },
        ));
    }
    ViewSet { baseline, views, actions }
}

/// Frozen-baseline feature targets for every frame of every episode.
pub fn build_baseline_targets(
    baseline_ext: &EncoderParams<f32>,
    baseline: &Dataset,
) -> Vec<Vec<[f32; 32]>> {
    let mut out = Vec::with_capacity(baseline.episodes.len());
    for ep in &baseline.episodes {
        let mut targets = Vec::with_capacity(ep.frames.len());
        for chunk in ep.frames.chunks(MICRO_BATCH) {
            let imgs: Vec<&Image> = chunk.iter().map(|f| &f.ext_image).collect();
            let x = encoder::images_to_batch::<f32>(&imgs);
            let (feat, _) = encoder::forward(baseline_ext, x, chunk.len());
            for i in 0..chunk.len() {
                let mut t = [0f32; 32];
                t.copy_from_slice(&feat[i * 32..(i + 1) * 32]);
                targets.push(t);
            }
        }
        out.push(targets);
    }
    out
}

/// Pair a camera's replayed dataset with precomputed baseline targets and
/// split at object-config granularity. Episode order must match the
/// baseline dataset's (same replayed trajectories).
pub fn build_meta_task(
    view: &Dataset,
    targets: &[Vec<[f32; 32]>],
    camera: CameraConfig,
    n_support_configs: usize,
    split_seed: u64,
) -> Result<MetaTask, String> {
    if view.episodes.len() != targets.len() {
        return Err(format!(
            "view has {} episodes, targets cover {}",
            view.episodes.len(),
            targets.len()
        ));
    }
    let mut episodes = Vec::with_capacity(view.episodes.len());
    for (ep, tg) in view.episodes.iter().zip(targets) {
        if ep.frames.len() != tg.len() {
            return Err(format!(
                "episode has {} frames but {} targets",
                ep.frames.len(),
                tg.len()
            ));
        }
        let pairs = ep
            .frames
            .iter()
            .zip(tg)
            .map(|(f, t)| AlignPair {
                ext_image: f.ext_image.clone(),
                target: *t,
                eih_image: f.eih_image.clone(),
                proprio: f.proprio,
                expert_action: f.expert_action,
            })
            .collect();
        episodes.push(TaskEpisode { pairs });
    }
    let split = crate::data::split_support_query(&view.episodes, n_support_configs, split_seed)?;
    Ok(MetaTask { camera, episodes, split })
}

/// Meta-train the external encoder over all tasks except `holdout`,
/// starting from the baseline weights. Returns the meta-initialization
/// and the outer-loss trace.
pub fn meta_train(
    baseline_ext: &EncoderParams<f32>,
    tasks: &[MetaTask],
    holdout: usize,
    hyper: &MetaHyper,
    seed: u64,
) -> (EncoderParams<f32>, Vec<f64>) {
    assert!(holdout < tasks.len());
    let mut theta = baseline_ext.to_flat();
    let mut opt = Adam::new(hyper.outer_lr, theta.len());
    let train_ids: Vec<usize> = (0..tasks.len()).filter(|&i| i != holdout).collect();
    let objectives: Vec<EncoderAlignment<'_>> = tasks.iter().map(EncoderAlignment::from_task).collect();
    let support_pools: Vec<Vec<usize>> = tasks
        .iter()
        .map(|t| t.pair_indices(&t.split.support))
        .collect();
    let query_pools: Vec<Vec<usize>> =
        tasks.iter().map(|t| t.pair_indices(&t.split.query)).collect();
    let mut trace = Vec::with_capacity(hyper.meta_iterations);
    for it in 0..hyper.meta_iterations {
        let mut batches: Vec<TaskBatch<'_, f32>> = Vec::with_capacity(train_ids.len());
        for (slot, &ti) in train_ids.iter().enumerate() {
            let idx = (it * train_ids.len() + slot) as u64;
            let support = sample_batch(&support_pools[ti], hyper.support_batch, seed, "meta-support", idx);
            let query = sample_batch(&query_pools[ti], hyper.query_batch, seed, "meta-query", idx);
            batches.push(TaskBatch { obj: &objectives[ti], support, query });
        }
        let loss = meta_step(&mut theta, &batches, hyper, &mut opt);
        trace.push(loss);
    }
    (EncoderParams::from_flat(&theta), trace)
}

fn sample_batch(pool: &[usize], size: Option<usize>, seed: u64, name: &str, idx: u64) -> Vec<usize> {
    match size {
        None => pool.to_vec(),
        Some(k) if k >= pool.len() => pool.to_vec(),
        Some(k) => {
            let mut s = SeedStream::new(seed, name, idx);
            let perm = s.permutation(pool.len());
            perm[..k].iter().map(|&i| pool[i]).collect()
        }
    }
}

// --- on-disk views layout ----------------------------------------------------
//
// record-views writes:
//   DIR/views.toml            generation metadata (seed, cameras, counts)
//   DIR/baseline/             baseline-camera dataset
//   DIR/cam{i}/               per-camera dataset + targets.vmwt

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ViewMeta {
    pub master_seed: u64,
    pub n_objects: usize,
    pub episodes_per_config: usize,
    pub jitter: f64,
    pub baseline: CameraConfig,
    pub cameras: Vec<CameraConfig>,
}

/// Support-side config count for an n-config task (the 15-of-20 split).
pub fn support_configs_for(n_configs: usize) -> usize {
    (n_configs * 3) / 4
}

pub fn save_targets(
    targets: &[Vec<[f32; 32]>],
    path: &std::path::Path,
) -> Result<(), crate::data::DataError> {
    let tensors: Vec<(String, Vec<usize>, Vec<f32>)> = targets
        .iter()
        .enumerate()
        .map(|(i, ep)| {
            (
                format!("ep{i:04}"),
                vec![ep.len(), 32],
                ep.iter().flatten().copied().collect(),
            )
        })
        .collect();
    crate::data::save_tensors(path, &tensors)
}

pub fn load_targets(
    path: &std::path::Path,
) -> Result<Vec<Vec<[f32; 32]>>, crate::data::DataError> {
    let tensors = crate::data::load_tensors(path)?;
    let mut out = Vec::with_capacity(tensors.len());
    for (name, dims, data) in tensors {
        if dims.len() != 2 || dims[1] != 32 || data.len() != dims[0] * 32 {
            return Err(crate::data::DataError::DimensionMismatch {
                path: path.to_path_buf(),
                detail: format!("target tensor {name} has shape {dims:?}"),
            });
        }
        out.push(
            data.chunks_exact(32)
                .map(|c| {
                    let mut t = [0f32; 32];
                    t.copy_from_slice(c);
                    t
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Few-shot adaptation on the held-out task: gradient descent on the
/// alignment loss of the first `k_episodes` support episodes.
pub fn meta_test_adapt(
    meta_ext: &EncoderParams<f32>,
    task: &MetaTask,
    k_episodes: usize,
    hyper: &MetaHyper,
) -> EncoderParams<f32> {
    assert!(k_episodes > 0, "adaptation needs at least one support episode");
    let k = k_episodes.min(task.split.support.len());
    let episodes: Vec<usize> = task.split.support[..k].to_vec();
    let support = task.pair_indices(&episodes);
    let obj = EncoderAlignment::from_task(task);
    let iterates = inner_adapt(&obj, &meta_ext.to_flat(), &support, hyper.inner_lr, hyper.inner_steps);
    EncoderParams::from_flat(iterates.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// L(theta) = 0.5 (theta - t)^2 in each coordinate.
    pub struct ScalarQuadratic {
        pub target: f64,
    }

    impl<R: Real> MetaObjective<R> for ScalarQuadratic {
        fn dim(&self) -> usize {
            1
        }
        fn loss(&self, theta: &[R], _batch: &[usize]) -> f64 {
            0.5 * (theta[0].to_f64() - self.target).powi(2)
        }
        fn grad(&self, theta: &[R], batch: &[usize]) -> (f64, Vec<R>) {
            (
                MetaObjective::<R>::loss(self, theta, batch),
                vec![theta[0] - R::from_f64(self.target)],
            )
        }
        fn hvp(&self, _theta: &[R], v: &[R], _batch: &[usize]) -> Vec<R> {
            v.to_vec()
        }
    }

    fn quad_hyper(steps: usize, first_order: bool) -> MetaHyper {
        MetaHyper {
            inner_lr: 0.1,
            outer_lr: 1e-3,
            inner_steps: steps,
            meta_iterations: 1,
            first_order,
            support_batch: None,
            query_batch: None,
        }
    }

    #[test]
    fn inner_adapt_single_step_closed_form() {
        let obj = ScalarQuadratic { target: 5.0 };
        let it = inner_adapt(&obj, &[0.0f64], &[], 0.1, 1);
        assert!((it[1][0] - 0.5).abs() < 1e-15);
        // alpha = 0 is the identity
        let it = inner_adapt(&obj, &[0.0f64], &[], 0.0, 3);
        assert_eq!(it.last().unwrap()[0], 0.0);
    }

    #[test]
    fn scalar_oracle_second_and_first_order() {
        let obj = ScalarQuadratic { target: 5.0 };
        let (_, g2) = meta_grad(&obj, &[0.0f64], &[], &[], &quad_hyper(1, false));
        assert!((g2[0] - (-4.05)).abs() <= 1e-8, "second order: {}", g2[0]);
        let (_, g1) = meta_grad(&obj, &[0.0f64], &[], &[], &quad_hyper(1, true));
        assert!((g1[0] - (-4.5)).abs() <= 1e-8, "first order: {}", g1[0]);
    }

    #[test]
    fn scalar_oracle_two_inner_steps() {
        let obj = ScalarQuadratic { target: 5.0 };
        // theta2 = 0.95... closed form: q' = theta2 - 5 = -4.05;
        // second order multiplies by (1-alpha)^2
        let (_, g2) = meta_grad(&obj, &[0.0f64], &[], &[], &quad_hyper(2, false));
        assert!((g2[0] - (-4.05 * 0.81)).abs() <= 1e-8, "{}", g2[0]);
        let (_, g1) = meta_grad(&obj, &[0.0f64], &[], &[], &quad_hyper(2, true));
        assert!((g1[0] - (-4.05)).abs() <= 1e-8);
        // the two variants differ exactly by (1-alpha) per inner step
        assert!((g2[0] / g1[0] - 0.81).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_task_leaves_theta_unchanged() {
        // support and query losses already zero at theta = target
        let obj = ScalarQuadratic { target: 5.0 };
        let mut theta = [5.0f64];
        let mut opt = Adam::new(1e-3, 1);
        let batch = TaskBatch { obj: &obj, support: vec![], query: vec![] };
        let loss = meta_step(&mut theta, &[batch], &quad_hyper(1, false), &mut opt);
        assert_eq!(loss, 0.0);
        assert_eq!(theta[0].to_bits(), 5.0f64.to_bits());
    }

    fn tiny_views(cams: &[CameraConfig]) -> ViewSet {
        record_view_data(&CameraConfig::default(), cams, 2, 1, 0.01, 77)
    }

    #[test]
    fn replayed_baseline_camera_matches_baseline_bitwise() {
        let base = CameraConfig::default();
        let other = CameraConfig::new(200.0, 55.0, 1.1);
        let vs = tiny_views(&[base, other]);
        assert_eq!(vs.views.len(), 2);
        // same camera -> identical frames; different camera -> same eih,
        // same proprio/labels, different ext
        for (ei, ep) in vs.baseline.episodes.iter().enumerate() {
            let same = &vs.views[0].1.episodes[ei];
            let diff = &vs.views[1].1.episodes[ei];
            assert_eq!(ep.frames.len(), same.frames.len());
            assert_eq!(ep.frames.len(), diff.frames.len());
            let mut ext_changed = false;
            for (f, (s, d)) in ep.frames.iter().zip(same.frames.iter().zip(&diff.frames)) {
                assert_eq!(f.ext_image, s.ext_image);
                assert_eq!(f.eih_image, s.eih_image);
                assert_eq!(f.eih_image, d.eih_image);
                assert_eq!(f.proprio, d.proprio);
                assert_eq!(f.expert_action, d.expert_action);
                ext_changed |= f.ext_image != d.ext_image;
            }
            assert!(ext_changed, "moving the camera must change the external view");
        }
    }

    #[test]
    fn zero_shift_fixed_point_is_exact() {
        let base = CameraConfig::default();
        let vs = tiny_views(&[base]);
        let enc = EncoderParams::<f32>::init(3, "ext");
        let targets = build_baseline_targets(&enc, &vs.baseline);
        let task = build_meta_task(&vs.views[0].1, &targets, base, 1, 9).unwrap();
        let obj = EncoderAlignment::from_task(&task);
        let theta = enc.to_flat();
        // exercise chunk boundaries different from the target computation
        let all: Vec<usize> = (0..obj.len()).collect();
        assert_eq!(MetaObjective::<f32>::loss(&obj, &theta, &all), 0.0);
        let odd: Vec<usize> = (1..obj.len()).collect();
        assert_eq!(MetaObjective::<f32>::loss(&obj, &theta, &odd), 0.0);
        let (_, g) = MetaObjective::<f32>::grad(&obj, &theta, &all);
        assert!(g.iter().all(|v| *v == 0.0));
        // adaptation is a bitwise no-op
        let hyper = MetaHyper { inner_steps: 2, ..MetaHyper::default() };
        let adapted = meta_test_adapt(&enc, &task, 1, &hyper);
        assert_eq!(
            adapted.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn meta_train_reduces_outer_loss_on_a_shifted_camera() {
        let base = CameraConfig::default();
        let shifted = CameraConfig::new(150.0, 50.0, 1.0);
        let vs = record_view_data(&base, &[shifted, CameraConfig::new(260.0, 30.0, 0.8)], 3, 1, 0.01, 41);
        let enc = EncoderParams::<f32>::init(5, "ext");
        let targets = build_baseline_targets(&enc, &vs.baseline);
        let tasks: Vec<MetaTask> = vs
            .views
            .iter()
            .map(|(c, d)| build_meta_task(d, &targets, *c, 2, 9).unwrap())
            .collect();
        let hyper = MetaHyper {
            inner_steps: 1,
            meta_iterations: 4,
            support_batch: Some(8),
            query_batch: Some(8),
            ..MetaHyper::default()
        };
        let (_, trace) = meta_train(&enc, &tasks, 1, &hyper, 13);
        assert_eq!(trace.len(), 4);
        assert!(trace.iter().all(|l| l.is_finite() && *l >= 0.0));
        // deterministic
        let (m2, trace2) = meta_train(&enc, &tasks, 1, &hyper, 13);
        assert_eq!(trace, trace2);
        assert!(m2.to_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_identical_tasks_double_the_gradient() {
        let obj = ScalarQuadratic { target: 5.0 };
        let hyper = quad_hyper(1, false);
        let (_, g1) = meta_grad(&obj, &[0.0f64], &[], &[], &hyper);
        // run one meta step with two copies and compare against Adam on 2x
        let mut theta_a = [0.0f64];
        let mut opt_a = Adam::new(1e-3, 1);
        let b1 = TaskBatch { obj: &obj, support: vec![], query: vec![] };
        let b2 = TaskBatch { obj: &obj, support: vec![], query: vec![] };
        meta_step(&mut theta_a, &[b1, b2], &hyper, &mut opt_a);
        let mut theta_b = [0.0f64];
        let mut opt_b = Adam::new(1e-3, 1);
        let doubled = [g1[0] * 2.0];
        opt_b.step(&mut theta_b, &doubled, &[]);
        assert_eq!(theta_a[0].to_bits(), theta_b[0].to_bits());
    }
}
