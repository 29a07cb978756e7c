//! Adaptive moment estimation over a flat parameter vector, with
//! index ranges that can be masked out (frozen groups).

use super::real::Real;

pub struct Adam<R> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<R>,
    v: Vec<R>,
    t: u64,
}

impl<R: Real> Adam<R> {
    pub fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
            t: 0,
        }
    }

    /// One update; `frozen` ranges are left untouched (moments included).
    pub fn step(&mut self, theta: &mut [R], grad: &[R], frozen: &[std::ops::Range<usize>]) {
        assert_eq!(theta.len(), grad.len());
        assert_eq!(theta.len(), self.m.len());
        self.t += 1;
        let b1 = R::from_f64(self.beta1);
        let b2 = R::from_f64(self.beta2);
        let one = R::one();
        let c1 = R::from_f64(1.0 - (self.beta1).powi(self.t as i32));
        let c2 = R::from_f64(1.0 - (self.beta2).powi(self.t as i32));
        let lr = R::from_f64(self.lr);
        let eps = R::from_f64(self.eps);
        let mut i = 0;
        while i < theta.len() {
            if let Some(r) = frozen.iter().find(|r| r.contains(&i)) {
                i = r.end;
                continue;
            }
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            theta[i] = theta[i] - lr * mh / (vh.sqrt() + eps);
            i += 1;
        }
    }
}
