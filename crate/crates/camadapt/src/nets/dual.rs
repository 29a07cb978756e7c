//! Forward-over-reverse differentiation for the encoder: exact
//! Hessian-vector products of the latent-alignment loss, used by the
//! second-order meta update.
//!
//! Every buffer carries a primal part and a tangent part; linear ops are
//! expanded into real gemms on the parts, rectifier masks come from the
//! primal. The tangent of the parameter gradient is H.v.

use super::encoder::{EncoderParams, C1, C2, R1A, R1B, R2A, R2B};
use super::ops::{self, Conv};
use super::real::Real;

struct DualBuf<R> {
    re: Vec<R>,
    du: Vec<R>,
}

impl<R: Real> DualBuf<R> {
    fn zeros(n: usize) -> Self {
        Self { re: vec![R::zero(); n], du: vec![R::zero(); n] }
    }
}

fn gemm_nn<R: Real>(m: usize, k: usize, n: usize, a: &[R], b: &[R], beta: R, c: &mut [R]) {
    R::gemm(m, k, n, R::one(), a, k as isize, 1, b, n as isize, 1, beta, c, n as isize, 1);
}

/// y = W col + bias, with tangents (col precomputed for both parts).
fn dual_conv_from_col<R: Real>(
    cv: &Conv,
    w_re: &[R],
    w_du: &[R],
    b_re: &[R],
    b_du: &[R],
    col: &DualBuf<R>,
    cols: usize,
) -> DualBuf<R> {
    let k = cv.k();
    let mut y = DualBuf::zeros(cv.cout * cols);
    gemm_nn(cv.cout, k, cols, w_re, &col.re, R::zero(), &mut y.re);
    gemm_nn(cv.cout, k, cols, w_du, &col.re, R::zero(), &mut y.du);
    gemm_nn(cv.cout, k, cols, w_re, &col.du, R::one(), &mut y.du);
    for c in 0..cv.cout {
        let (br, bd) = (b_re[c], b_du[c]);
        for v in &mut y.re[c * cols..(c + 1) * cols] {
            *v = *v + br;
        }
        for v in &mut y.du[c * cols..(c + 1) * cols] {
            *v = *v + bd;
        }
    }
    y
}

fn dual_im2col<R: Real>(cv: &Conv, x: &DualBuf<R>, batch: usize) -> (DualBuf<R>, usize) {
    let (oh, ow) = cv.out_hw();
    let cols = batch * oh * ow;
    let mut col = DualBuf::zeros(cv.k() * cols);
    ops::im2col(cv, &x.re, batch, &mut col.re);
    ops::im2col(cv, &x.du, batch, &mut col.du);
    (col, cols)
}

/// relu on the primal; tangent masked by the primal sign.
fn dual_relu<R: Real>(y: &mut DualBuf<R>) {
    for (r, d) in y.re.iter_mut().zip(y.du.iter_mut()) {
        if *r <= R::zero() {
            *r = R::zero();
            *d = R::zero();
        }
    }
}

fn dual_relu_bwd<R: Real>(y_re: &[R], dy: &mut DualBuf<R>) {
    for (i, r) in y_re.iter().enumerate() {
        if *r <= R::zero() {
            dy.re[i] = R::zero();
            dy.du[i] = R::zero();
        }
    }
}

fn dual_add<R: Real>(y: &mut DualBuf<R>, x: &DualBuf<R>) {
    ops::add_inplace(&mut y.re, &x.re);
    ops::add_inplace(&mut y.du, &x.du);
}

/// dW = dY col^T, db = row sums, dcol = W^T dY -- all with tangents.
#[allow(clippy::too_many_arguments)]
fn dual_conv_bwd<R: Real>(
    cv: &Conv,
    w_re: &[R],
    w_du: &[R],
    x: &DualBuf<R>,
    dy: &DualBuf<R>,
    batch: usize,
    dw: &mut DualBuf<R>,
    db: &mut DualBuf<R>,
    want_dx: bool,
) -> Option<DualBuf<R>> {
    let (col, cols) = dual_im2col(cv, x, batch);
    let k = cv.k();
    // dW parts: re = dYre colre^T ; du = dYdu colre^T + dYre coldu^T
    let gemm_nt = |a: &[R], b: &[R], beta: R, c: &mut [R]| {
        R::gemm(cv.cout, cols, k, R::one(), a, cols as isize, 1, b, 1, cols as isize, beta, c, k as isize, 1);
    };
    gemm_nt(&dy.re, &col.re, R::one(), &mut dw.re);
    gemm_nt(&dy.du, &col.re, R::one(), &mut dw.du);
    gemm_nt(&dy.re, &col.du, R::one(), &mut dw.du);
    for c in 0..cv.cout {
        db.re[c] = db.re[c] + dy.re[c * cols..(c + 1) * cols].iter().copied().sum::<R>();
        db.du[c] = db.du[c] + dy.du[c * cols..(c + 1) * cols].iter().copied().sum::<R>();
    }
    if !want_dx {
        return None;
    }
    let mut dcol = DualBuf::zeros(k * cols);
    let gemm_tn = |a: &[R], b: &[R], beta: R, c: &mut [R]| {
        R::gemm(k, cv.cout, cols, R::one(), a, 1, k as isize, b, cols as isize, 1, beta, c, cols as isize, 1);
    };
    gemm_tn(w_re, &dy.re, R::zero(), &mut dcol.re);
    gemm_tn(w_du, &dy.re, R::zero(), &mut dcol.du);
    gemm_tn(w_re, &dy.du, R::one(), &mut dcol.du);
    let p_in = cv.h * cv.w;
    let mut dx = DualBuf::zeros(cv.cin * batch * p_in);
    ops::col2im(cv, &dcol.re, batch, &mut dx.re);
    ops::col2im(cv, &dcol.du, batch, &mut dx.du);
    Some(dx)
}

struct DualTape<R> {
    x: DualBuf<R>,
    a1: DualBuf<R>,
    h1: DualBuf<R>,
    y1: DualBuf<R>,
    a2: DualBuf<R>,
    h2: DualBuf<R>,
    y2: DualBuf<R>,
    feat: DualBuf<R>,
    batch: usize,
}

fn dual_forward<R: Real>(
    p: &EncoderParams<R>,
    v: &EncoderParams<R>,
    x_re: Vec<R>,
    batch: usize,
) -> DualTape<R> {
    let x = DualBuf { du: vec![R::zero(); x_re.len()], re: x_re };
    let conv = |cv: &Conv, wi: usize, bi: usize, inp: &DualBuf<R>| -> DualBuf<R> {
        let (col, cols) = dual_im2col(cv, inp, batch);
        dual_conv_from_col(cv, &p.t[wi], &v.t[wi], &p.t[bi], &v.t[bi], &col, cols)
    };
    let mut a1 = conv(&C1, 0, 1, &x);
    dual_relu(&mut a1);
    let mut h1 = conv(&R1A, 2, 3, &a1);
    dual_relu(&mut h1);
    let mut y1 = conv(&R1B, 4, 5, &h1);
    dual_add(&mut y1, &a1);
    dual_relu(&mut y1);
    let mut a2 = conv(&C2, 6, 7, &y1);
    dual_relu(&mut a2);
    let mut h2 = conv(&R2A, 8, 9, &a2);
    dual_relu(&mut h2);
    let mut y2 = conv(&R2B, 10, 11, &h2);
    dual_add(&mut y2, &a2);
    dual_relu(&mut y2);
    let feat = DualBuf {
        re: ops::gap_fwd(&y2.re, 32, batch, 256),
        du: ops::gap_fwd(&y2.du, 32, batch, 256),
    };
    DualTape { x, a1, h1, y1, a2, h2, y2, feat, batch }
}

/// Exact Hessian-vector product of the mean squared alignment loss
/// L(theta) = mean_b ||enc_theta(img_b) - target_b||^2 at `p` in
/// direction `v`. `x_re` is the image batch, `targets` is `[B,32]`.
/// Returns (loss, gradient, H.v), all from one fused pass.
pub fn alignment_grad_hvp<R: Real>(
    p: &EncoderParams<R>,
    v: &EncoderParams<R>,
    x_re: Vec<R>,
    targets: &[R],
    batch: usize,
) -> (f64, EncoderParams<R>, EncoderParams<R>) {
    let tape = dual_forward(p, v, x_re, batch);
    let scale = R::from_f64(2.0 / batch as f64);
    let mut dfeat = DualBuf::zeros(batch * 32);
    let mut loss = 0.0;
    for i in 0..batch * 32 {
        let diff = tape.feat.re[i] - targets[i];
        loss += (diff * diff).to_f64() / batch as f64;
        dfeat.re[i] = scale * diff;
        dfeat.du[i] = scale * tape.feat.du[i];
    }
    let mut g = EncoderParams::zeros();
    let mut hv = EncoderParams::zeros();
    let b = tape.batch;
    let mut dy2 = DualBuf {
        re: ops::gap_bwd(&dfeat.re, 32, b, 256),
        du: ops::gap_bwd(&dfeat.du, 32, b, 256),
    };
    dual_relu_bwd(&tape.y2.re, &mut dy2);
    let bwd = |cv: &Conv,
               wi: usize,
               bi: usize,
               x: &DualBuf<R>,
               dy: &DualBuf<R>,
               g: &mut EncoderParams<R>,
               hv: &mut EncoderParams<R>,
               want_dx: bool|
     -> Option<DualBuf<R>> {
        let mut dw = DualBuf { re: std::mem::take(&mut g.t[wi]), du: std::mem::take(&mut hv.t[wi]) };
        let mut db = DualBuf { re: std::mem::take(&mut g.t[bi]), du: std::mem::take(&mut hv.t[bi]) };
        let dx = dual_conv_bwd(cv, &p.t[wi], &v.t[wi], x, dy, b, &mut dw, &mut db, want_dx);
        g.t[wi] = dw.re;
        hv.t[wi] = dw.du;
        g.t[bi] = db.re;
        hv.t[bi] = db.du;
        dx
    };
    let mut dh2 = bwd(&R2B, 10, 11, &tape.h2, &dy2, &mut g, &mut hv, true).unwrap();
    dual_relu_bwd(&tape.h2.re, &mut dh2);
    let mut da2 = dy2; // skip path
    let dtmp = bwd(&R2A, 8, 9, &tape.a2, &dh2, &mut g, &mut hv, true).unwrap();
    dual_add(&mut da2, &dtmp);
    dual_relu_bwd(&tape.a2.re, &mut da2);
    let mut dy1 = bwd(&C2, 6, 7, &tape.y1, &da2, &mut g, &mut hv, true).unwrap();
    dual_relu_bwd(&tape.y1.re, &mut dy1);
    let mut dh1 = bwd(&R1B, 4, 5, &tape.h1, &dy1, &mut g, &mut hv, true).unwrap();
    dual_relu_bwd(&tape.h1.re, &mut dh1);
    let mut da1 = dy1;
    let dtmp = bwd(&R1A, 2, 3, &tape.a1, &dh1, &mut g, &mut hv, true).unwrap();
    dual_add(&mut da1, &dtmp);
    dual_relu_bwd(&tape.a1.re, &mut da1);
    bwd(&C1, 0, 1, &tape.x, &da1, &mut g, &mut hv, false);
    (loss, g, hv)
}
