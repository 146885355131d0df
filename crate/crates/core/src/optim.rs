//! Adam with bias correction.

use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from its gradient. Parameter list
    /// shape must stay fixed across calls.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.shape(), g.shape(), "gradient shape");
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gv;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gv * gv;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor::from_rows(&[[1.0, -2.0]]);
        let g = Tensor::zeros(1, 2);
        let mut opt = Adam::new(0.1);
        for _ in 0..3 {
            opt.step(&mut [&mut p], &[&g]);
        }
        assert_eq!(p, Tensor::from_rows(&[[1.0, -2.0]]));
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut p = Tensor::from_rows(&[[0.0, 0.0, 0.0]]);
        let g = Tensor::from_rows(&[[0.3, -5.0, 1e-3]]);
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut p], &[&g]);
        // m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
        for (pv, gv) in p.data().iter().zip(g.data()) {
            let expected = -0.01 * gv / (gv.abs() + 1e-8);
            assert!((pv - expected).abs() < 1e-15);
            assert!((pv.abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_problems_follow_identical_paths() {
        let run = || {
            let mut x = Tensor::scalar(3.0);
            let mut opt = Adam::new(0.05);
            let mut path = Vec::new();
            for _ in 0..50 {
                let g = x.map(|v| 2.0 * (v - 1.0));
                opt.step(&mut [&mut x], &[&g]);
                path.push(x.get(0, 0));
            }
            path
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn minimises_quadratic() {
        let mut x = Tensor::from_rows(&[[4.0, -3.0]]);
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g = x.map(|v| 2.0 * v);
            opt.step(&mut [&mut x], &[&g]);
        }
        assert!(x.norm() < 1e-2);
    }
}
