//! Full perception -> policy forward pass and the behavior-cloning loss
//! with analytic gradients.

use super::encoder;
use super::params::ParamSet;
use super::policy::{self, ActionDistribution};
use super::real::Real;
use crate::render::Image;

/// Micro-batch size for chunked batched passes. Fixed so gradient
/// accumulation order (and therefore bit-level results) is independent
/// of caller batch sizes and threading.
pub const MICRO_BATCH: usize = 16;

/// One observation-action pair in tensor form.
pub struct Sample<'a> {
    pub ext: &'a Image,
    pub eih: &'a Image,
    pub proprio: [f64; 4],
    pub action: [f64; 4],
}

/// Latent for one observation: ext feature (32) | eih feature (32) | proprio (4).
pub fn perception_forward<R: Real>(
    params: &ParamSet<R>,
    ext: &Image,
    eih: &Image,
    proprio: [f64; 4],
) -> Vec<R> {
    let fe = encoder::encode_one(&params.ext, ext);
    let fh = encoder::encode_one(&params.eih, eih);
    let mut z = Vec::with_capacity(policy::LATENT_DIM);
    z.extend(fe);
    z.extend(fh);
    z.extend(proprio.iter().map(|&v| R::from_f64(v)));
    z
}

/// Full forward pass to an action distribution.
pub fn predict<R: Real>(
    params: &ParamSet<R>,
    ext: &Image,
    eih: &Image,
    proprio: [f64; 4],
) -> ActionDistribution {
    let z = perception_forward(params, ext, eih, proprio);
    let tape = policy::forward(&params.pi, z, 1);
    policy::head(&tape.raw)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// MSE over the displacement components plus BCE on the gripper logit.
pub fn bc_loss(dist: &ActionDistribution, action: [f64; 4]) -> f64 {
    let mse: f64 = (0..3)
        .map(|i| (dist.mean_dpos[i] - action[i]).powi(2))
        .sum::<f64>()
        / 3.0;
    let bce = softplus(dist.grip_logit) - action[3] * dist.grip_logit;
    mse + bce
}

fn assemble_latent<R: Real>(
    params: &ParamSet<R>,
    samples: &[Sample<'_>],
) -> (Vec<R>, encoder::EncoderTape<R>, encoder::EncoderTape<R>) {
    let b = samples.len();
    let ext_imgs: Vec<&Image> = samples.iter().map(|s| s.ext).collect();
    let eih_imgs: Vec<&Image> = samples.iter().map(|s| s.eih).collect();
    let (fe, te) = encoder::forward(&params.ext, encoder::images_to_batch(&ext_imgs), b);
    let (fh, th) = encoder::forward(&params.eih, encoder::images_to_batch(&eih_imgs), b);
    let mut z = vec![R::zero(); b * policy::LATENT_DIM];
    for i in 0..b {
        let zi = &mut z[i * policy::LATENT_DIM..(i + 1) * policy::LATENT_DIM];
        zi[..32].copy_from_slice(&fe[i * 32..(i + 1) * 32]);
        zi[32..64].copy_from_slice(&fh[i * 32..(i + 1) * 32]);
        for (j, v) in samples[i].proprio.iter().enumerate() {
            zi[64 + j] = R::from_f64(*v);
        }
    }
    (z, te, th)
}

/// Mean BC loss over a micro-batch plus gradient contributions, scaled by
/// `scale` (use 1/n_total when accumulating over chunks).
fn micro_loss_grad<R: Real>(
    params: &ParamSet<R>,
    samples: &[Sample<'_>],
    scale: f64,
    grad: &mut [R],
) -> f64 {
    let b = samples.len();
    let (z, te, th) = assemble_latent(params, samples);
    let tape = policy::forward(&params.pi, z, b);
    let mut loss = 0.0;
    let mut draw = vec![R::zero(); b * 4];
    for i in 0..b {
        let raw = &tape.raw[i * 4..(i + 1) * 4];
        let a = samples[i].action;
        let mut m = [0.0f64; 3];
        for j in 0..3 {
            let t = raw[j].to_f64().tanh();
            m[j] = 0.05 * t;
            loss += scale * (m[j] - a[j]).powi(2) / 3.0;
            draw[i * 4 + j] =
                R::from_f64(scale * (2.0 / 3.0) * (m[j] - a[j]) * 0.05 * (1.0 - t * t));
        }
        let l = raw[3].to_f64();
        loss += scale * (softplus(l) - a[3] * l);
        let sig = 1.0 / (1.0 + (-l).exp());
        draw[i * 4 + 3] = R::from_f64(scale * (sig - a[3]));
    }
    let (gpi, dz) = policy::backward(&params.pi, &tape, &draw);
    let mut dfe = vec![R::zero(); b * 32];
    let mut dfh = vec![R::zero(); b * 32];
    for i in 0..b {
        let zi = &dz[i * policy::LATENT_DIM..(i + 1) * policy::LATENT_DIM];
        dfe[i * 32..(i + 1) * 32].copy_from_slice(&zi[..32]);
        dfh[i * 32..(i + 1) * 32].copy_from_slice(&zi[32..64]);
    }
    let ge = encoder::backward(&params.ext, &te, &dfe);
    let gh = encoder::backward(&params.eih, &th, &dfh);
    // accumulate into the flat gradient (ext | eih | pi)
    let mut o = 0;
    for t in ge.t.iter().chain(gh.t.iter()).chain(gpi.t.iter()) {
        for v in t {
            grad[o] = grad[o] + *v;
            o += 1;
        }
    }
    loss
}

/// Mean BC loss and flat gradient over an arbitrary batch.
pub fn bc_batch_loss_grad<R: Real>(
    params: &ParamSet<R>,
    samples: &[Sample<'_>],
) -> (f64, Vec<R>) {
    let n = samples.len();
    assert!(n > 0);
    let mut grad = vec![R::zero(); ParamSet::<R>::flat_len()];
    let mut loss = 0.0;
    for chunk in samples.chunks(MICRO_BATCH) {
        loss += micro_loss_grad(params, chunk, 1.0 / n as f64, &mut grad);
    }
    (loss, grad)
}

/// Mean BC loss only.
pub fn bc_batch_loss<R: Real>(params: &ParamSet<R>, samples: &[Sample<'_>]) -> f64 {
    let n = samples.len();
    assert!(n > 0);
    let mut loss = 0.0;
    for chunk in samples.chunks(MICRO_BATCH) {
        let b = chunk.len();
        let (z, _, _) = assemble_latent(params, chunk);
        let tape = policy::forward(&params.pi, z, b);
        for i in 0..b {
            let d = policy::head(&tape.raw[i * 4..(i + 1) * 4]);
            loss += bc_loss(&d, chunk[i].action) / n as f64;
        }
    }
    loss
}
