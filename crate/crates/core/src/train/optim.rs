use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{GradStore, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamWConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self { learning_rate, weight_decay, beta1: default_beta1(), beta2: default_beta2(), epsilon: default_eps() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Adam with decoupled weight decay. Moment buffers live on the parameters.
#[derive(Clone, Debug)]
pub struct AdamW {
    cfg: AdamWConfig,
    steps: u64,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update. Any non-finite gradient aborts before anything is written.
    pub fn step(&mut self, store: &mut ParamStore, grads: &GradStore) -> Result<()> {
        if let Some((p, k)) = grads.first_non_finite() {
            let name = store.iter().nth(p).map(|(_, q)| q.name().to_string()).unwrap_or_default();
            return Err(Error::NonFinite(format!("gradient of {name} at offset {k}")));
        }
        self.steps += 1;
        let AdamWConfig { learning_rate: lr, weight_decay, beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.steps as i32);
        let c2 = 1.0 - beta2.powi(self.steps as i32);
        let shrink = 1.0 - lr * weight_decay;
        for (p, (_, g)) in store.params_mut().iter_mut().zip(grads.iter()) {
            let (value, m, v) = p.split_mut();
            for (((x, m), v), &g) in value.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                *x *= shrink;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *x -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    fn quadratic_step(opt: &mut AdamW, store: &mut ParamStore) -> f64 {
        // (x - 3)^2 + 2
        let mut tape = Tape::new();
        let x = tape.param(store, store.id("x").unwrap());
        let c = tape.constant(Tensor::scalar(3.0));
        let d = tape.sub(x, c).unwrap();
        let sq = tape.mul(d, d).unwrap();
        let loss = tape.sum(sq);
        let mut grads = GradStore::zeros_like(store);
        tape.backward_into(loss, &mut grads).unwrap();
        let value = tape.value(loss).item() + 2.0;
        opt.step(store, &grads).unwrap();
        value
    }

    #[test]
    fn zero_gradient_is_a_no_op_without_decay() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row_vector(vec![1.5, -2.0])).unwrap();
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0)).unwrap();
        let zero = GradStore::zeros_like(&store);
        opt.step(&mut store, &zero).unwrap();
        assert_eq!(store.value(id).data(), &[1.5, -2.0]);
    }

    #[test]
    fn decay_shrinks_by_lr_times_decay() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row_vector(vec![1.5, -2.0])).unwrap();
        let mut opt = AdamW::new(AdamWConfig::new(0.01, 0.5)).unwrap();
        let zero = GradStore::zeros_like(&store);
        opt.step(&mut store, &zero).unwrap();
        let f = 1.0 - 0.01 * 0.5;
        assert_eq!(store.value(id).data(), &[1.5 * f, -2.0 * f]);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::scalar(-1.0)).unwrap();
        let mut opt = AdamW::new(AdamWConfig::new(1e-2, 0.0)).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            last = quadratic_step(&mut opt, &mut store);
        }
        assert!(last - 2.0 < 1e-6, "{last}");
    }

    #[test]
    fn small_lr_decreases_monotonically() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::scalar(-1.0)).unwrap();
        let mut opt = AdamW::new(AdamWConfig::new(1e-3, 0.0)).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..500 {
            let l = quadratic_step(&mut opt, &mut store);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::scalar(1.0)).unwrap();
        let mut grads = GradStore::zeros_like(&store);
        grads.add(id, &[f64::NAN]);
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0)).unwrap();
        let err = opt.step(&mut store, &grads).unwrap_err();
        assert!(err.to_string().contains('w'));
        assert_eq!(store.value(id).item(), 1.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AdamW::new(AdamWConfig::new(0.0, 0.0)).is_err());
        assert!(AdamW::new(AdamWConfig::new(1e-3, -1.0)).is_err());
    }
}
