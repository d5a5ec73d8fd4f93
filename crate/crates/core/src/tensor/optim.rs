//! Named parameter store and the RMSProp update rule.

use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::array::Array;

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array<f32>,
    /// Embedding parameters are exempt from the l2 penalty.
    pub embedding: bool,
}

/// Ordered collection of named parameters; iteration order is insertion
/// order, which keeps optimizer sweeps deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: IndexMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array<f32>, embedding: bool) {
        self.entries.insert(name.into(), Param { value, embedding });
    }

    pub fn get(&self, name: &str) -> Option<&Array<f32>> {
        self.entries.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array<f32>> {
        self.entries.get_mut(name).map(|p| &mut p.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

/// RMSProp state: squared-gradient moving averages per parameter.
#[derive(Debug, Clone)]
pub struct RmspropState {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    acc: IndexMap<String, Array<f32>>,
}

impl RmspropState {
    pub fn new(lr: f64, decay: f64, eps: f64) -> Self {
        RmspropState {
            lr,
            decay,
            eps,
            acc: IndexMap::new(),
        }
    }

    /// lr = 1e-3, decay = 0.9, eps = 1e-8.
    pub fn with_lr(lr: f64) -> Self {
        Self::new(lr, 0.9, 1e-8)
    }
}

/// One RMSProp step over the named gradients. The l2 penalty adds `2*l2*p`
/// to the gradient of every non-embedding parameter before both the
/// accumulator update and the step; parameters without a gradient entry are
/// left untouched.
pub fn rmsprop_step(
    state: &mut RmspropState,
    params: &mut ParamStore,
    grads: &IndexMap<String, Array<f32>>,
    l2: f64,
) -> Result<()> {
    for (name, param) in params.entries.iter_mut() {
        let Some(grad) = grads.get(name) else { continue };
        if grad.shape() != param.value.shape() {
            return Err(Error::Shape {
                op: "rmsprop_step",
                details: format!(
                    "{name}: grad {:?} vs param {:?}",
                    grad.shape(),
                    param.value.shape()
                ),
            });
        }
        let acc = state
            .acc
            .entry(name.clone())
            .or_insert_with(|| Array::zeros(param.value.shape()));
        let apply_l2 = l2 > 0.0 && !param.embedding;
        for ((p, g), a) in param
            .value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(acc.data_mut())
        {
            let mut gv = *g as f64;
            if apply_l2 {
                gv += 2.0 * l2 * (*p as f64);
            }
            let av = state.decay * (*a as f64) + (1.0 - state.decay) * gv * gv;
            let pv = (*p as f64) - state.lr * gv / (av.sqrt() + state.eps);
            if !pv.is_finite() || !av.is_finite() {
                return Err(Error::NonFinite { op: "rmsprop_step" });
            }
            *a = av as f32;
            *p = pv as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(v: f32) -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("w", Array::vector(vec![v]), false);
        p
    }

    fn grads_of(v: f32) -> IndexMap<String, Array<f32>> {
        let mut g = IndexMap::new();
        g.insert("w".to_string(), Array::vector(vec![v]));
        g
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = RmspropState::new(0.1, 0.9, 1e-8);
        let mut params = single_param(2.5);
        rmsprop_step(&mut state, &mut params, &grads_of(0.0), 0.0).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[2.5]);
    }

    #[test]
    fn first_step_hand_value() {
        // acc = 0.1 * 1, step = 0.1 * 1 / (sqrt(0.1) + 1e-8).
        let mut state = RmspropState::new(0.1, 0.9, 1e-8);
        let mut params = single_param(1.0);
        rmsprop_step(&mut state, &mut params, &grads_of(1.0), 0.0).unwrap();
        let expect = 1.0 - 0.1 / (0.1f64.sqrt() + 1e-8);
        let got = params.get("w").unwrap().data()[0] as f64;
        assert!((got - expect).abs() < 1e-7, "{got} vs {expect}");
    }

    #[test]
    fn l2_shrinks_toward_zero() {
        let mut state = RmspropState::new(0.05, 0.9, 1e-8);
        let mut params = single_param(3.0);
        rmsprop_step(&mut state, &mut params, &grads_of(0.0), 0.01).unwrap();
        let after = params.get("w").unwrap().data()[0];
        assert!(after < 3.0 && after > 0.0, "{after}");
    }

    #[test]
    fn embeddings_exempt_from_l2() {
        let mut state = RmspropState::new(0.05, 0.9, 1e-8);
        let mut params = ParamStore::new();
        params.insert("emb", Array::vector(vec![3.0]), true);
        let mut grads = IndexMap::new();
        grads.insert("emb".to_string(), Array::vector(vec![0.0f32]));
        rmsprop_step(&mut state, &mut params, &grads, 0.01).unwrap();
        assert_eq!(params.get("emb").unwrap().data(), &[3.0]);
    }

    #[test]
    fn missing_gradient_is_skipped() {
        let mut state = RmspropState::with_lr(0.1);
        let mut params = single_param(1.0);
        rmsprop_step(&mut state, &mut params, &IndexMap::new(), 0.0).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[1.0]);
    }
}
