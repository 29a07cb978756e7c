//! Compact residual convolutional encoder: 64x64x3 image -> 32-vector.
//!
//! conv 3x3 s2 (3->16) + relu, residual block at 16, conv 3x3 s2 (16->32)
//! + relu, residual block at 32, global average pool.

use super::ops::{self, Conv};
use super::real::Real;
use crate::render::Image;
use crate::rng::SeedStream;

pub const IMG: usize = 64;
pub const FEAT_DIM: usize = 32;

pub const C1: Conv = Conv { cin: 3, cout: 16, h: 64, w: 64, stride: 2 };
pub const R1A: Conv = Conv { cin: 16, cout: 16, h: 32, w: 32, stride: 1 };
pub const R1B: Conv = Conv { cin: 16, cout: 16, h: 32, w: 32, stride: 1 };
pub const C2: Conv = Conv { cin: 16, cout: 32, h: 32, w: 32, stride: 2 };
pub const R2A: Conv = Conv { cin: 32, cout: 32, h: 16, w: 16, stride: 1 };
pub const R2B: Conv = Conv { cin: 32, cout: 32, h: 16, w: 16, stride: 1 };

/// (field name, conv shape or None for bias, length) in flat order.
pub const TENSORS: &[(&str, usize, usize)] = &[
    // (name, len, fan_in); fan_in 0 marks a bias tensor
    ("c1.w", 16 * 27, 27),
    ("c1.b", 16, 0),
    ("rb1.w1", 16 * 144, 144),
    ("rb1.b1", 16, 0),
    ("rb1.w2", 16 * 144, 144),
    ("rb1.b2", 16, 0),
    ("c2.w", 32 * 144, 144),
    ("c2.b", 32, 0),
    ("rb2.w1", 32 * 288, 288),
    ("rb2.b1", 32, 0),
    ("rb2.w2", 32 * 288, 288),
    ("rb2.b2", 32, 0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<R> {
    pub t: Vec<Vec<R>>, // tensors in TENSORS order
}

impl<R: Real> EncoderParams<R> {
    pub fn zeros() -> Self {
        Self { t: TENSORS.iter().map(|&(_, len, _)| vec![R::zero(); len]).collect() }
    }

    /// He fan-in initialization, zero biases, per-tensor named streams.
    pub fn init(seed: u64, prefix: &str) -> Self {
        let mut t = Vec::with_capacity(TENSORS.len());
        for &(name, len, fan_in) in TENSORS {
            if fan_in == 0 {
                t.push(vec![R::zero(); len]);
            } else {
                let std = (2.0 / fan_in as f64).sqrt();
                let mut s = SeedStream::new(seed, &format!("{prefix}.{name}"), 0);
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

/// Activations retained for the backward pass (post-activation values).
pub struct EncoderTape<R> {
    pub x: Vec<R>,   // [3, B*4096] input
    pub a1: Vec<R>,  // [16, B*1024] relu(conv1)
    pub h1: Vec<R>,  // [16, B*1024] relu(rb1 conv1)
    pub y1: Vec<R>,  // [16, B*1024] relu(a1 + rb1 conv2)
    pub a2: Vec<R>,  // [32, B*256] relu(conv2)
    pub h2: Vec<R>,  // [32, B*256]
    pub y2: Vec<R>,  // [32, B*256]
    pub batch: usize,
}

/// Convert images to the `[3, B*4096]` layout with pixels scaled to [0,1].
pub fn images_to_batch<R: Real>(imgs: &[&Image]) -> Vec<R> {
    let b = imgs.len();
    let p = IMG * IMG;
    let inv = R::from_f64(1.0 / 255.0);
    let mut x = vec![R::zero(); 3 * b * p];
    for (bi, img) in imgs.iter().enumerate() {
        assert_eq!((img.width as usize, img.height as usize), (IMG, IMG), "encoder expects 64x64 images");
        for i in 0..p {
            for c in 0..3 {
                x[c * b * p + bi * p + i] =
                    R::from_f64(img.pixels[i * 3 + c] as f64) * inv;
            }
        }
    }
    x
}

pub fn forward<R: Real>(p: &EncoderParams<R>, x: Vec<R>, batch: usize) -> (Vec<R>, EncoderTape<R>) {
    let t = &p.t;
    let mut a1 = ops::conv_fwd(&C1, &t[0], &t[1], &x, batch);
    ops::relu_inplace(&mut a1);
    let mut h1 = ops::conv_fwd(&R1A, &t[2], &t[3], &a1, batch);
    ops::relu_inplace(&mut h1);
    let mut y1 = ops::conv_fwd(&R1B, &t[4], &t[5], &h1, batch);
    ops::add_inplace(&mut y1, &a1);
    ops::relu_inplace(&mut y1);
    let mut a2 = ops::conv_fwd(&C2, &t[6], &t[7], &y1, batch);
    ops::relu_inplace(&mut a2);
    let mut h2 = ops::conv_fwd(&R2A, &t[8], &t[9], &a2, batch);
    ops::relu_inplace(&mut h2);
    let mut y2 = ops::conv_fwd(&R2B, &t[10], &t[11], &h2, batch);
    ops::add_inplace(&mut y2, &a2);
    ops::relu_inplace(&mut y2);
    let feat = ops::gap_fwd(&y2, 32, batch, 256);
    (feat, EncoderTape { x, a1, h1, y1, a2, h2, y2, batch })
}

/// Backward from `dfeat` ([B,32]); returns parameter gradients.
pub fn backward<R: Real>(
    p: &EncoderParams<R>,
    tape: &EncoderTape<R>,
    dfeat: &[R],
) -> EncoderParams<R> {
    let t = &p.t;
    let b = tape.batch;
    let mut g = EncoderParams::zeros();
    let mut dy2 = ops::gap_bwd(dfeat, 32, b, 256);
    ops::relu_bwd(&tape.y2, &mut dy2);
    // rb2: y2 = relu(a2 + conv(h2))
    let mut dh2 = vec![R::zero(); tape.h2.len()];
    {
        let (gw, rest) = g.t.split_at_mut(11);
        ops::conv_bwd(&R2B, &t[10], &tape.h2, &dy2, b, &mut gw[10], &mut rest[0], Some(&mut dh2));
    }
    ops::relu_bwd(&tape.h2, &mut dh2);
    let mut da2 = dy2; // skip connection passes dy2 through
    {
        let mut dtmp = vec![R::zero(); tape.a2.len()];
        let (gw, rest) = g.t.split_at_mut(9);
        ops::conv_bwd(&R2A, &t[8], &tape.a2, &dh2, b, &mut gw[8], &mut rest[0], Some(&mut dtmp));
        ops::add_inplace(&mut da2, &dtmp);
    }
    ops::relu_bwd(&tape.a2, &mut da2);
    let mut dy1 = vec![R::zero(); tape.y1.len()];
    {
        let (gw, rest) = g.t.split_at_mut(7);
        ops::conv_bwd(&C2, &t[6], &tape.y1, &da2, b, &mut gw[6], &mut rest[0], Some(&mut dy1));
    }
    ops::relu_bwd(&tape.y1, &mut dy1);
    // rb1
    let mut dh1 = vec![R::zero(); tape.h1.len()];
    {
        let (gw, rest) = g.t.split_at_mut(5);
        ops::conv_bwd(&R1B, &t[4], &tape.h1, &dy1, b, &mut gw[4], &mut rest[0], Some(&mut dh1));
    }
    ops::relu_bwd(&tape.h1, &mut dh1);
    let mut da1 = dy1;
    {
        let mut dtmp = vec![R::zero(); tape.a1.len()];
        let (gw, rest) = g.t.split_at_mut(3);
        ops::conv_bwd(&R1A, &t[2], &tape.a1, &dh1, b, &mut gw[2], &mut rest[0], Some(&mut dtmp));
        ops::add_inplace(&mut da1, &dtmp);
    }
    ops::relu_bwd(&tape.a1, &mut da1);
    {
        let (gw, rest) = g.t.split_at_mut(1);
        ops::conv_bwd(&C1, &t[0], &tape.x, &da1, b, &mut gw[0], &mut rest[0], None);
    }
    g
}

/// Convenience single-image feature.
pub fn encode_one<R: Real>(p: &EncoderParams<R>, img: &Image) -> Vec<R> {
    let x = images_to_batch(&[img]);
    forward(p, x, 1).0
}
