use super::{ParamStore, Tensor};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> AdamW {
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) {
        self.step_values(params.values_mut(), grads)
    }

    pub fn step_values(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            assert_eq!(p.shape(), g.shape(), "gradient shape");
            for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *x = *x - self.lr * mhat / (vhat.sqrt() + self.eps) - self.lr * self.weight_decay * *x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(theta: f64, g: f64, lr: f64, wd: f64) -> f64 {
        let mut p = [Tensor::scalar(theta)];
        AdamW::new(lr, wd).step_values(&mut p, &[Tensor::scalar(g)]);
        p[0].item()
    }

    #[test]
    fn first_step_formula() {
        let got = one(1.0, 1.0, 0.1, 0.01);
        assert!((got - (1.0 - 0.1 / (1.0 + 1e-8) - 0.001)).abs() < 1e-15);
        assert!((got - 0.899).abs() < 1e-5);
    }

    #[test]
    fn zero_gradient() {
        assert_eq!(one(0.37, 0.0, 0.1, 0.0), 0.37);
        let theta = 2.5;
        assert_eq!(one(theta, 0.0, 0.1, 0.01), theta - 0.1 * 0.01 * theta);
    }
}
