//! Batched tensor primitives used by the encoders and policy head.
//!
//! Activation layout: `[C, B*P]` (channel-major across the whole batch,
//! item `b`'s pixels at columns `b*P .. (b+1)*P`). This keeps every conv a
//! single large gemm over an im2col buffer.

use super::real::Real;

/// 3x3 convolution shape, padding 1.
#[derive(Debug, Clone, Copy)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    pub stride: usize,
}

impl Conv {
    pub fn out_hw(&self) -> (usize, usize) {
        (self.h / self.stride, self.w / self.stride)
    }
    pub fn k(&self) -> usize {
        self.cin * 9
    }
    pub fn weight_len(&self) -> usize {
        self.cout * self.k()
    }
}

/// Expand `x` ([cin, batch*h*w]) into the column buffer ([k, batch*oh*ow]).
pub fn im2col<R: Real>(cv: &Conv, x: &[R], batch: usize, col: &mut [R]) {
    let (oh, ow) = cv.out_hw();
    let p_in = cv.h * cv.w;
    let p_out = oh * ow;
    let cols = batch * p_out;
    debug_assert_eq!(x.len(), cv.cin * batch * p_in);
    debug_assert_eq!(col.len(), cv.k() * cols);
    for c in 0..cv.cin {
        let x_row = &x[c * batch * p_in..(c + 1) * batch * p_in];
        for ky in 0..3 {
            for kx in 0..3 {
                let k_row = &mut col[(c * 9 + ky * 3 + kx) * cols..][..cols];
                for b in 0..batch {
                    let xb = &x_row[b * p_in..(b + 1) * p_in];
                    let kb = &mut k_row[b * p_out..(b + 1) * p_out];
                    for oy in 0..oh {
                        let iy = (oy * cv.stride + ky) as isize - 1;
                        let dst = &mut kb[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= cv.h as isize {
                            dst.iter_mut().for_each(|v| *v = R::zero());
                            continue;
                        }
                        let src = &xb[iy as usize * cv.w..(iy as usize + 1) * cv.w];
                        if cv.stride == 1 {
                            // contiguous run; kx-1 shifts the window
                            for ox in 0..ow {
                                let ix = (ox + kx) as isize - 1;
                                dst[ox] = if ix < 0 || ix >= cv.w as isize {
                                    R::zero()
                                } else {
                                    src[ix as usize]
                                };
                            }
                        } else {
                            for ox in 0..ow {
                                let ix = (ox * cv.stride + kx) as isize - 1;
                                dst[ox] = if ix < 0 || ix >= cv.w as isize {
                                    R::zero()
                                } else {
                                    src[ix as usize]
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add a column buffer back to input layout.
pub fn col2im<R: Real>(cv: &Conv, col: &[R], batch: usize, dx: &mut [R]) {
    let (oh, ow) = cv.out_hw();
    let p_in = cv.h * cv.w;
    let p_out = oh * ow;
    let cols = batch * p_out;
    for c in 0..cv.cin {
        let dx_row = &mut dx[c * batch * p_in..(c + 1) * batch * p_in];
        for ky in 0..3 {
            for kx in 0..3 {
                let k_row = &col[(c * 9 + ky * 3 + kx) * cols..][..cols];
                for b in 0..batch {
                    let xb = &mut dx_row[b * p_in..(b + 1) * p_in];
                    let kb = &k_row[b * p_out..(b + 1) * p_out];
                    for oy in 0..oh {
                        let iy = (oy * cv.stride + ky) as isize - 1;
                        if iy < 0 || iy >= cv.h as isize {
                            continue;
                        }
                        let dst = &mut xb[iy as usize * cv.w..(iy as usize + 1) * cv.w];
                        let srow = &kb[oy * ow..(oy + 1) * ow];
                        for ox in 0..ow {
                            let ix = (ox * cv.stride + kx) as isize - 1;
                            if ix >= 0 && ix < cv.w as isize {
                                dst[ix as usize] = dst[ix as usize] + srow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// y = W col + bias. Returns `[cout, batch*oh*ow]` pre-activation.
pub fn conv_fwd<R: Real>(cv: &Conv, wgt: &[R], bias: &[R], x: &[R], batch: usize) -> Vec<R> {
    let (oh, ow) = cv.out_hw();
    let cols = batch * oh * ow;
    let k = cv.k();
    let mut col = vec![R::zero(); k * cols];
    im2col(cv, x, batch, &mut col);
    let mut y = vec![R::zero(); cv.cout * cols];
    R::gemm(
        cv.cout, k, cols,
        R::one(),
        wgt, k as isize, 1,
        &col, cols as isize, 1,
        R::zero(),
        &mut y, cols as isize, 1,
    );
    for c in 0..cv.cout {
        let b = bias[c];
        for v in &mut y[c * cols..(c + 1) * cols] {
            *v = *v + b;
        }
    }
    y
}

/// Gradients of a conv layer. `x` is the forward input, `dy` the gradient
/// at the pre-activation output. `dx` is skipped when `None`.
pub fn conv_bwd<R: Real>(
    cv: &Conv,
    wgt: &[R],
    x: &[R],
    dy: &[R],
    batch: usize,
    dw: &mut [R],
    db: &mut [R],
    dx: Option<&mut [R]>,
) {
    let (oh, ow) = cv.out_hw();
    let cols = batch * oh * ow;
    let k = cv.k();
    let mut col = vec![R::zero(); k * cols];
    im2col(cv, x, batch, &mut col);
    // dW += dY . col^T
    R::gemm(
        cv.cout, cols, k,
        R::one(),
        dy, cols as isize, 1,
        &col, 1, cols as isize,
        R::one(),
        dw, k as isize, 1,
    );
    for c in 0..cv.cout {
        db[c] = db[c] + dy[c * cols..(c + 1) * cols].iter().copied().sum::<R>();
    }
    if let Some(dx) = dx {
        let mut dcol = vec![R::zero(); k * cols];
        R::gemm(
            k, cv.cout, cols,
            R::one(),
            wgt, 1, k as isize,
            dy, cols as isize, 1,
            R::zero(),
            &mut dcol, cols as isize, 1,
        );
        col2im(cv, &dcol, batch, dx);
    }
}

pub fn relu_inplace<R: Real>(y: &mut [R]) {
    for v in y {
        if *v < R::zero() {
            *v = R::zero();
        }
    }
}

/// Zero `dy` where the post-activation `y` is zero.
pub fn relu_bwd<R: Real>(y: &[R], dy: &mut [R]) {
    for (v, d) in y.iter().zip(dy.iter_mut()) {
        if *v <= R::zero() {
            *d = R::zero();
        }
    }
}

pub fn add_inplace<R: Real>(y: &mut [R], x: &[R]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a = *a + *b;
    }
}

/// Global average pool `[c, batch*p]` -> `[batch, c]`.
pub fn gap_fwd<R: Real>(y: &[R], c: usize, batch: usize, p: usize) -> Vec<R> {
    let inv = R::from_f64(1.0 / p as f64);
    let mut feat = vec![R::zero(); batch * c];
    for ch in 0..c {
        let row = &y[ch * batch * p..(ch + 1) * batch * p];
        for b in 0..batch {
            feat[b * c + ch] =
                row[b * p..(b + 1) * p].iter().copied().sum::<R>() * inv;
        }
    }
    feat
}

pub fn gap_bwd<R: Real>(dfeat: &[R], c: usize, batch: usize, p: usize) -> Vec<R> {
    let inv = R::from_f64(1.0 / p as f64);
    let mut dy = vec![R::zero(); c * batch * p];
    for ch in 0..c {
        let row = &mut dy[ch * batch * p..(ch + 1) * batch * p];
        for b in 0..batch {
            let g = dfeat[b * c + ch] * inv;
            for v in &mut row[b * p..(b + 1) * p] {
                *v = g;
            }
        }
    }
    dy
}

/// y[batch, out] = x[batch, in] W^T + bias.
pub fn affine_fwd<R: Real>(
    wgt: &[R],
    bias: &[R],
    x: &[R],
    batch: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<R> {
    let mut y = vec![R::zero(); batch * n_out];
    R::gemm(
        batch, n_in, n_out,
        R::one(),
        x, n_in as isize, 1,
        wgt, 1, n_in as isize,
        R::zero(),
        &mut y, n_out as isize, 1,
    );
    for b in 0..batch {
        add_inplace(&mut y[b * n_out..(b + 1) * n_out], bias);
    }
    y
}

pub fn affine_bwd<R: Real>(
    wgt: &[R],
    x: &[R],
    dy: &[R],
    batch: usize,
    n_in: usize,
    n_out: usize,
    dw: &mut [R],
    db: &mut [R],
    dx: Option<&mut [R]>,
) {
    // dW += dY^T X
    R::gemm(
        n_out, batch, n_in,
        R::one(),
        dy, 1, n_out as isize,
        x, n_in as isize, 1,
        R::one(),
        dw, n_in as isize, 1,
    );
    for b in 0..batch {
        for o in 0..n_out {
            db[o] = db[o] + dy[b * n_out + o];
        }
    }
    if let Some(dx) = dx {
        R::gemm(
            batch, n_out, n_in,
            R::one(),
            dy, n_out as isize, 1,
            wgt, n_in as isize, 1,
            R::one(),
            dx, n_in as isize, 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel() {
        // 1x1-equivalent: center tap = 1 reproduces the input (stride 1)
        let cv = Conv { cin: 1, cout: 1, h: 4, w: 4, stride: 1 };
        let mut w = vec![0.0f64; 9];
        w[4] = 1.0;
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let y = conv_fwd(&cv, &w, &[0.0], &x, 1);
        assert_eq!(y, x);
    }

    #[test]
    fn conv_stride2_shapes_and_values() {
        let cv = Conv { cin: 1, cout: 1, h: 4, w: 4, stride: 2 };
        let mut w = vec![0.0f64; 9];
        w[4] = 2.0;
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let y = conv_fwd(&cv, &w, &[1.0], &x, 1);
        // centers at (0,0),(0,2),(2,0),(2,2)
        assert_eq!(y, vec![1.0, 5.0, 17.0, 21.0]);
    }

    #[test]
    fn conv_bwd_matches_finite_difference() {
        let cv = Conv { cin: 2, cout: 3, h: 4, w: 4, stride: 1 };
        let mut s = crate::rng::SeedStream::new(9, "fd", 0);
        let wgt: Vec<f64> = (0..cv.weight_len()).map(|_| s.gen_normal() * 0.3).collect();
        let bias: Vec<f64> = (0..3).map(|_| s.gen_normal() * 0.1).collect();
        let batch = 2;
        let x: Vec<f64> = (0..cv.cin * batch * 16).map(|_| s.gen_normal()).collect();
        let loss = |wgt: &[f64], bias: &[f64], x: &[f64]| -> f64 {
            conv_fwd(&cv, wgt, bias, x, batch).iter().map(|v| v * v).sum::<f64>() * 0.5
        };
        let y = conv_fwd(&cv, &wgt, &bias, &x, batch);
        let mut dw = vec![0.0; wgt.len()];
        let mut db = vec![0.0; 3];
        let mut dx = vec![0.0; x.len()];
        conv_bwd(&cv, &wgt, &x, &y, batch, &mut dw, &mut db, Some(&mut dx));
        let h = 1e-6;
        for &i in &[0usize, 5, 17, wgt.len() - 1] {
            let mut wp = wgt.clone();
            wp[i] += h;
            let mut wm = wgt.clone();
            wm[i] -= h;
            let fd = (loss(&wp, &bias, &x) - loss(&wm, &bias, &x)) / (2.0 * h);
            assert!((fd - dw[i]).abs() < 1e-5 * (1.0 + fd.abs()), "dw[{i}] {fd} vs {}", dw[i]);
        }
        for &i in &[0usize, 7, x.len() - 1] {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&wgt, &bias, &xp) - loss(&wgt, &bias, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-5 * (1.0 + fd.abs()), "dx[{i}] {fd} vs {}", dx[i]);
        }
    }

    #[test]
    fn affine_bwd_matches_finite_difference() {
        let (bsz, nin, nout) = (3usize, 5usize, 4usize);
        let mut s = crate::rng::SeedStream::new(10, "fd", 0);
        let wgt: Vec<f64> = (0..nin * nout).map(|_| s.gen_normal() * 0.5).collect();
        let bias: Vec<f64> = (0..nout).map(|_| s.gen_normal()).collect();
        let x: Vec<f64> = (0..bsz * nin).map(|_| s.gen_normal()).collect();
        let loss = |w: &[f64], b: &[f64], x: &[f64]| -> f64 {
            affine_fwd(w, b, x, bsz, nin, nout).iter().map(|v| v * v).sum::<f64>() * 0.5
        };
        let y = affine_fwd(&wgt, &bias, &x, bsz, nin, nout);
        let mut dw = vec![0.0; wgt.len()];
        let mut db = vec![0.0; nout];
        let mut dx = vec![0.0; x.len()];
        affine_bwd(&wgt, &x, &y, bsz, nin, nout, &mut dw, &mut db, Some(&mut dx));
        let h = 1e-6;
        for i in 0..wgt.len() {
            let mut wp = wgt.clone();
            wp[i] += h;
            let mut wm = wgt.clone();
            wm[i] -= h;
            let fd = (loss(&wp, &bias, &x) - loss(&wm, &bias, &x)) / (2.0 * h);
            assert!((fd - dw[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&wgt, &bias, &xp) - loss(&wgt, &bias, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
        for i in 0..nout {
            let mut bp = bias.clone();
            bp[i] += h;
            let mut bm = bias.clone();
            bm[i] -= h;
            let fd = (loss(&wgt, &bp, &x) - loss(&wgt, &bm, &x)) / (2.0 * h);
            assert!((fd - db[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn gap_roundtrip() {
        let y: Vec<f64> = (0..2 * 2 * 4).map(|i| i as f64).collect(); // c=2,b=2,p=4
        let f = gap_fwd(&y, 2, 2, 4);
        assert_eq!(f, vec![1.5, 9.5, 5.5, 13.5]); // [b,c]
        let dy = gap_bwd(&f, 2, 2, 4);
        assert_eq!(dy[0], 1.5 / 4.0);
        assert_eq!(dy.len(), y.len());
    }
}
