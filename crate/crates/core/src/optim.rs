//! AdamW with decoupled weight decay, plus global-norm gradient clipping.

use ndarray::Array2;

use crate::tape::ParamStore;

#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Array2<f64>> = store.iter().map(|(_, t)| Array2::zeros(t.dim())).collect();
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One decoupled-weight-decay update. Both the adaptive step and the
    /// decay are scaled by `lr`, so lr = 0 leaves parameters untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Array2<f64>], lr: f64, weight_decay: f64) {
        assert_eq!(grads.len(), store.len(), "gradient count");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let store_ids: Vec<_> = (0..store.len()).map(|i| store.param_id(i)).collect();
        for i in 0..grads.len() {
            let g = &grads[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut *m).and(g).for_each(|mv, &gv| {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
            });
            ndarray::Zip::from(&mut *v).and(g).for_each(|vv, &gv| {
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
            });
            let p = store.get_mut(store_ids[i]);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|pv, &mv, &vv| {
                let mhat = mv / bc1;
                let vhat = vv / bc2;
                *pv -= lr * (mhat / (vhat.sqrt() + self.eps) + weight_decay * *pv);
            });
        }
    }
}

/// Euclidean norm over every entry of every gradient list.
pub fn global_grad_norm(grad_lists: &[&[Array2<f64>]]) -> f64 {
    grad_lists
        .iter()
        .flat_map(|l| l.iter())
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Scale all gradients so the global norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grad_lists: &mut [&mut [Array2<f64>]], max_norm: f64) -> f64 {
    let norm = {
        let views: Vec<&[Array2<f64>]> = grad_lists.iter().map(|l| &**l).collect();
        global_grad_norm(&views)
    };
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for list in grad_lists.iter_mut() {
            for g in list.iter_mut() {
                g.mapv_inplace(|v| v * scale);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::ParamStore;

    fn store_with(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap());
        s
    }

    #[test]
    fn zero_lr_is_a_noop() {
        let mut store = store_with(&[1.0, -2.0, 3.0]);
        let before = store.get(store.param_id(0)).clone();
        let mut opt = AdamW::new(&store);
        let grads = vec![Array2::from_elem((1, 3), 5.0)];
        opt.step(&mut store, &grads, 0.0, 0.5);
        assert_eq!(*store.get(store.param_id(0)), before);
    }

    #[test]
    fn descends_a_quadratic() {
        // minimize f(w) = w² from w = 4.
        let mut store = store_with(&[4.0]);
        let mut opt = AdamW::new(&store);
        for _ in 0..800 {
            let w = store.get(store.param_id(0))[(0, 0)];
            let grads = vec![Array2::from_elem((1, 1), 2.0 * w)];
            opt.step(&mut store, &grads, 0.05, 0.0);
        }
        assert!(store.get(store.param_id(0))[(0, 0)].abs() < 1e-2);
    }

    #[test]
    fn clip_respects_threshold() {
        let mut a = vec![Array2::from_elem((1, 2), 3.0)];
        let mut b = vec![Array2::from_elem((1, 2), 4.0)];
        // norm = sqrt(2·9 + 2·16) = sqrt(50)
        let norm = {
            let mut lists: Vec<&mut [Array2<f64>]> = vec![&mut a, &mut b];
            clip_global_norm(&mut lists, 1.0)
        };
        assert!((norm - 50f64.sqrt()).abs() < 1e-12);
        let after = global_grad_norm(&[&a, &b]);
        assert!((after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut a = vec![Array2::from_elem((1, 2), 0.1)];
        let before = a[0].clone();
        let mut lists: Vec<&mut [Array2<f64>]> = vec![&mut a];
        clip_global_norm(&mut lists, 10.0);
        assert_eq!(a[0], before);
    }
}
