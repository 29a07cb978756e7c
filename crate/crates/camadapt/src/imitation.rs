//! Behavior cloning and the DAgger round loop.

use crate::data::{self, ActionSource, Dataset};
use crate::nets::{self, Adam, Group, ParamSet, Sample};
use crate::render::{CameraConfig, Image};
use crate::rng::SeedStream;
use crate::sim::{self, Action, WorldState};

#[derive(Debug, Clone)]
pub struct DaggerConfig {
    pub rounds: usize,
    pub epochs_per_round: usize,
    pub batch_size: usize,
    /// Agent rollouts collected per round; `None` means ceil(N/4) where N
    /// is the initial demo count.
    pub rollouts_per_round: Option<usize>,
    pub learning_rate: f64,
    /// Geometric decay applied to the learning rate each round (the
    /// initial BC phase is round 0). Constant-rate Adam plateaus on the
    /// displacement regression; annealing is needed to reach the
    /// tolerance-level fit.
    pub lr_decay_per_round: f64,
    /// Explicit per-round learning rates (round 0 = initial BC). When set,
    /// overrides `learning_rate`/`lr_decay_per_round` for the rounds it
    /// covers. Lets the high rate be held while the aggregated dataset is
    /// still small and the decay happen late, where most steps are.
    pub lr_schedule: Option<Vec<f64>>,
}

impl DaggerConfig {
    fn lr_for_round(&self, round: usize) -> f64 {
        if let Some(s) = &self.lr_schedule {
            if let Some(lr) = s.get(round) {
                return *lr;
            }
        }
        self.learning_rate * self.lr_decay_per_round.powi(round as i32)
    }
}

impl Default for DaggerConfig {
    fn default() -> Self {
        Self {
            rounds: 6,
            epochs_per_round: 15,
            batch_size: 250,
            rollouts_per_round: None,
            learning_rate: 1e-3,
            lr_decay_per_round: 0.6,
            lr_schedule: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, step {step} (loss {loss})")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
}

/// The learned policy as a rollout driver.
pub struct NetPolicy<'a> {
    pub params: &'a ParamSet<f32>,
}

impl ActionSource for NetPolicy<'_> {
    fn act(&mut self, s: &WorldState, ext: &Image, eih: &Image) -> Action {
        let pr = data::proprio_of(s);
        let d = nets::predict(
            self.params,
            ext,
            eih,
            [pr[0] as f64, pr[1] as f64, pr[2] as f64, pr[3] as f64],
        );
        Action { dpos: d.mean_dpos, grip: d.grip_logit > 0.0 }
    }
}

fn samples_of<'a>(ds: &'a Dataset, order: &[(usize, usize)]) -> Vec<Sample<'a>> {
    order
        .iter()
        .map(|&(e, f)| {
            let fr = &ds.episodes[e].frames[f];
            Sample {
                ext: &fr.ext_image,
                eih: &fr.eih_image,
                proprio: fr.proprio.map(|v| v as f64),
                action: fr.expert_action.map(|v| v as f64),
            }
        })
        .collect()
}

/// Minimize mean BC loss with Adam over shuffled minibatches. Frozen
/// parameter groups are left untouched. Returns the final-epoch mean loss.
pub fn train_bc(
    ds: &Dataset,
    params: &mut ParamSet<f32>,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<f64, TrainError> {
    if ds.total_frames() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let mut opt = Adam::new(lr, ParamSet::<f32>::flat_len());
    let frozen: Vec<_> = [Group::Ext, Group::Eih, Group::Pi]
        .into_iter()
        .filter(|g| params.frozen(*g))
        .map(ParamSet::<f32>::group_range)
        .collect();
    let mut theta = params.to_flat();
    let mut last = 0.0;
    for epoch in 0..epochs {
        let order = data::shuffle_frames(ds, SeedStream::new(seed, "bc-epoch", epoch as u64).fork_seed());
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for (step, batch) in order.chunks(batch_size).enumerate() {
            let samples = samples_of(ds, batch);
            let cur = rebuild(params, &theta);
            let (loss, grad) = nets::bc_batch_loss_grad(&cur, &samples);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, step, loss });
            }
            opt.step(&mut theta, &grad, &frozen);
            epoch_loss += loss;
            steps += 1;
        }
        last = epoch_loss / steps as f64;
    }
    let ext_frozen = params.ext_frozen;
    let eih_frozen = params.eih_frozen;
    let pi_frozen = params.pi_frozen;
    *params = rebuild(params, &theta);
    params.ext_frozen = ext_frozen;
    params.eih_frozen = eih_frozen;
    params.pi_frozen = pi_frozen;
    Ok(last)
}

fn rebuild(old: &ParamSet<f32>, theta: &[f32]) -> ParamSet<f32> {
    let mut p = ParamSet::from_flat(theta);
    p.ext_frozen = old.ext_frozen;
    p.eih_frozen = old.eih_frozen;
    p.pi_frozen = old.pi_frozen;
    p
}

/// One DAgger round: roll out the current policy on fresh object configs
/// (expert-relabeled), aggregate, retrain.
pub fn dagger_round(
    params: &mut ParamSet<f32>,
    dataset: &mut Dataset,
    cam: &CameraConfig,
    cfg: &DaggerConfig,
    rollouts: usize,
    round: usize,
    master_seed: u64,
) -> Result<f64, TrainError> {
    for k in 0..rollouts {
        let idx = (round as u64) << 32 | k as u64;
        let mut cfg_rng = SeedStream::new(master_seed, "dagger-config", idx);
        let obj = sim::sample_object_config(&mut cfg_rng);
        let mut driver = NetPolicy { params };
        let ep = data::record_episode(
            &mut driver,
            &obj,
            cam,
            idx,
            &format!("agent-round-{round}"),
        );
        dataset.episodes.push(ep);
    }
    train_bc(
        dataset,
        params,
        cfg.epochs_per_round,
        cfg.batch_size,
        cfg.lr_for_round(round),
        SeedStream::new(master_seed, "dagger-train", round as u64).fork_seed(),
    )
}

/// Record `n_demos` expert demonstrations, then run initial BC plus
/// `cfg.rounds` DAgger rounds. Returns the trained parameters and the
/// aggregated dataset.
pub fn train_dagger(
    n_demos: usize,
    cam: &CameraConfig,
    cfg: &DaggerConfig,
    master_seed: u64,
) -> Result<(ParamSet<f32>, Dataset), TrainError> {
    let demos = record_expert_demos(n_demos, cam, master_seed);
    train_dagger_from(demos, cam, cfg, master_seed)
}

/// DAgger starting from an already-recorded demonstration set.
pub fn train_dagger_from(
    demos: Dataset,
    cam: &CameraConfig,
    cfg: &DaggerConfig,
    master_seed: u64,
) -> Result<(ParamSet<f32>, Dataset), TrainError> {
    let n_demos = demos.episodes.len();
    let mut dataset = demos;
    let mut params = ParamSet::<f32>::init(SeedStream::new(master_seed, "init", 0).fork_seed());
    train_bc(
        &dataset,
        &mut params,
        cfg.epochs_per_round,
        cfg.batch_size,
        cfg.lr_for_round(0),
        SeedStream::new(master_seed, "bc-initial", 0).fork_seed(),
    )?;
    let rollouts = cfg.rollouts_per_round.unwrap_or(n_demos.div_ceil(4));
    for round in 1..=cfg.rounds {
        dagger_round(&mut params, &mut dataset, cam, cfg, rollouts, round, master_seed)?;
    }
    Ok((params, dataset))
}

/// Expert demonstrations on freshly sampled object configs.
pub fn record_expert_demos(n: usize, cam: &CameraConfig, master_seed: u64) -> Dataset {
    let mut episodes = Vec::with_capacity(n);
    for k in 0..n {
        let mut cfg_rng = SeedStream::new(master_seed, "demo-config", k as u64);
        let obj = sim::sample_object_config(&mut cfg_rng);
        episodes.push(data::record_episode(
            &mut data::ExpertSource,
            &obj,
            cam,
            k as u64,
            "expert",
        ));
    }
    Dataset { episodes, master_seed, producer: "gen-demos".into() }
}
