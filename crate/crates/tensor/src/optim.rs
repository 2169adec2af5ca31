use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::params::{LrGroup, ParamStore};

/// Adam with a separate learning rate per [`LrGroup`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: BTreeMap<LrGroup, f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr_encoder_decoder: f64, lr_backbone: f64) -> Self {
        let mut lr = BTreeMap::new();
        lr.insert(LrGroup::EncoderDecoder, lr_encoder_decoder);
        lr.insert(LrGroup::Backbone, lr_backbone);
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

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients in `store`.
    ///
    /// Gradients are validated before anything is written, so a non-finite
    /// gradient leaves every parameter untouched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for (_, p) in store.iter() {
            if !p.grad.is_finite() {
                return Err(TensorError::NonFiniteGradient(p.name.clone()));
            }
        }
        if self.m.len() != store.len() {
            self.m = store.iter().map(|(_, p)| vec![0.0; p.value.numel()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in store.iter_mut().enumerate() {
            let lr = self.lr.get(&p.group).copied().unwrap_or(0.0);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for j in 0..value.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                value[j] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn store_with(groups: &[(LrGroup, f64)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (i, (g, v)) in groups.iter().enumerate() {
            s.add(format!("p{i}"), *g, Tensor::scalar(*v)).unwrap();
        }
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store_with(&[(LrGroup::EncoderDecoder, 0.7)]);
        let mut opt = Adam::new(1e-3, 2e-5);
        for _ in 0..5 {
            opt.step(&mut s).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().1.value.data(), &[0.7]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store_with(&[(LrGroup::EncoderDecoder, 0.0)]);
        s.iter_mut().next().unwrap().grad.data_mut()[0] = 1.0;
        let mut opt = Adam::new(1e-3, 2e-5);
        opt.step(&mut s).unwrap();
        let v = s.iter().next().unwrap().1.value.data()[0];
        // m̂ = 1, v̂ = 1 after bias correction
        assert!((v + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn groups_use_their_own_rates() {
        let mut s = store_with(&[(LrGroup::EncoderDecoder, 0.0), (LrGroup::Backbone, 0.0)]);
        let mut opt = Adam::new(1e-3, 2e-5);
        for _ in 0..3 {
            s.iter_mut().for_each(|p| p.grad.data_mut()[0] = 0.5);
            opt.step(&mut s).unwrap();
        }
        let vals: Vec<f64> = s.iter().map(|(_, p)| p.value.data()[0]).collect();
        let ratio = vals[0] / vals[1];
        assert!((ratio - 1e-3 / 2e-5).abs() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut s = store_with(&[(LrGroup::EncoderDecoder, 0.0), (LrGroup::Backbone, 1.0)]);
        s.iter_mut().nth(1).unwrap().grad.data_mut()[0] = f64::NAN;
        let mut opt = Adam::new(1e-3, 2e-5);
        match opt.step(&mut s) {
            Err(TensorError::NonFiniteGradient(name)) => assert_eq!(name, "p1"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.iter().nth(1).unwrap().1.value.data(), &[1.0]);
    }
}
