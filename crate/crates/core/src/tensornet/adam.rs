use ndarray::{Array2, Zip};

use super::ParamStore;

/// Adam moment buffers for every parameter of a store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<_> = store
            .iter()
            .map(|(_, _, t)| Array2::zeros(t.value.dim()))
            .collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update using the gradients accumulated in `store`. Parameters
    /// without a gradient are treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        assert_eq!(self.m.len(), store.len(), "optimizer/store mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let t = store.value_mut(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            match &t.grad {
                Some(g) => Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                }),
                None => Zip::from(&mut *m).and(&mut *v).for_each(|m, v| {
                    *m *= b1;
                    *v *= b2;
                }),
            }
            Zip::from(&mut t.value).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        }
    }
}
