//! Policy head: 68-d latent -> action distribution
//! (bounded displacement mean + gripper logit).

use super::ops;
use super::real::Real;
use crate::rng::SeedStream;

pub const LATENT_DIM: usize = 68;
pub const HIDDEN: usize = 64;

pub const TENSORS: &[(&str, usize, usize)] = &[
    ("fc1.w", HIDDEN * LATENT_DIM, LATENT_DIM),
    ("fc1.b", HIDDEN, 0),
    ("fc2.w", HIDDEN * HIDDEN, HIDDEN),
    ("fc2.b", HIDDEN, 0),
    ("fc3.w", 4 * HIDDEN, HIDDEN),
    ("fc3.b", 4, 0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<R> {
    pub t: Vec<Vec<R>>,
}

impl<R: Real> PolicyParams<R> {
    pub fn zeros() -> Self {
        Self { t: TENSORS.iter().map(|&(_, len, _)| vec![R::zero(); len]).collect() }
    }

    pub fn init(seed: u64) -> Self {
        let mut t = Vec::with_capacity(TENSORS.len());
        for &(name, len, fan_in) in TENSORS {
            if fan_in == 0 {
                t.push(vec![R::zero(); len]);
            } else {
                let std = (2.0 / fan_in as f64).sqrt();
                let mut s = SeedStream::new(seed, &format!("pi.{name}"), 0);
                t.push((0..len).map(|_| R::from_f64(s.gen_normal() * std)).collect());
            }
        }
        Self { t }
    }

    pub fn flat_len() -> usize {
        TENSORS.iter().map(|&(_, len, _)| len).sum()
    }

    pub fn to_flat(&self) -> Vec<R> {
        let mut v = Vec::with_capacity(Self::flat_len());
        for t in &self.t {
            v.extend_from_slice(t);
        }
        v
    }

    pub fn from_flat(flat: &[R]) -> Self {
        assert_eq!(flat.len(), Self::flat_len());
        let mut t = Vec::with_capacity(TENSORS.len());
        let mut o = 0;
        for &(_, len, _) in TENSORS {
            t.push(flat[o..o + len].to_vec());
            o += len;
        }
        Self { t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mean_dpos: [f64; 3],
    pub grip_logit: f64,
}

pub struct PolicyTape<R> {
    pub z: Vec<R>,  // [B,68]
    pub h1: Vec<R>, // [B,64] post-relu
    pub h2: Vec<R>, // [B,64] post-relu
    pub raw: Vec<R>, // [B,4]
    pub batch: usize,
}

pub fn forward<R: Real>(p: &PolicyParams<R>, z: Vec<R>, batch: usize) -> PolicyTape<R> {
    let mut h1 = ops::affine_fwd(&p.t[0], &p.t[1], &z, batch, LATENT_DIM, HIDDEN);
    ops::relu_inplace(&mut h1);
    let mut h2 = ops::affine_fwd(&p.t[2], &p.t[3], &h1, batch, HIDDEN, HIDDEN);
    ops::relu_inplace(&mut h2);
    let raw = ops::affine_fwd(&p.t[4], &p.t[5], &h2, batch, HIDDEN, 4);
    PolicyTape { z, h1, h2, raw, batch }
}

/// Map one raw 4-vector to the action distribution.
pub fn head<R: Real>(raw: &[R]) -> ActionDistribution {
    ActionDistribution {
        mean_dpos: [
            0.05 * raw[0].to_f64().tanh(),
            0.05 * raw[1].to_f64().tanh(),
            0.05 * raw[2].to_f64().tanh(),
        ],
        grip_logit: raw[3].to_f64(),
    }
}

/// Backward from `draw` ([B,4]); returns (param grads, dz).
pub fn backward<R: Real>(
    p: &PolicyParams<R>,
    tape: &PolicyTape<R>,
    draw: &[R],
) -> (PolicyParams<R>, Vec<R>) {
    let b = tape.batch;
    let mut g = PolicyParams::zeros();
    let mut dh2 = vec![R::zero(); b * HIDDEN];
    {
        let (gw, rest) = g.t.split_at_mut(5);
        ops::affine_bwd(&p.t[4], &tape.h2, draw, b, HIDDEN, 4, &mut gw[4], &mut rest[0], Some(&mut dh2));
    }
    ops::relu_bwd(&tape.h2, &mut dh2);
    let mut dh1 = vec![R::zero(); b * HIDDEN];
    {
        let (gw, rest) = g.t.split_at_mut(3);
        ops::affine_bwd(&p.t[2], &tape.h1, &dh2, b, HIDDEN, HIDDEN, &mut gw[2], &mut rest[0], Some(&mut dh1));
    }
    ops::relu_bwd(&tape.h1, &mut dh1);
    let mut dz = vec![R::zero(); b * LATENT_DIM];
    {
        let (gw, rest) = g.t.split_at_mut(1);
        ops::affine_bwd(&p.t[0], &tape.z, &dh1, b, LATENT_DIM, HIDDEN, &mut gw[0], &mut rest[0], Some(&mut dz));
    }
    (g, dz)
}
