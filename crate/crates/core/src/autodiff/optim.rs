//! Named parameter sets, SGD with momentum, and EMA weight averaging.

use std::collections::BTreeMap;

use super::graph::{Gradients, Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// An ordered collection of named tensors. Ordering is alphabetical by name,
/// which keeps parameter iteration (and therefore training) deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    map: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.map.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.map.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Merge another set under a namespace prefix.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &Params) {
        for (name, value) in other.iter() {
            self.map.insert(format!("{prefix}.{name}"), value.clone());
        }
    }

    /// Insert every tensor into the graph as a parameter leaf.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        let nodes = self
            .map
            .iter()
            .map(|(name, value)| (name.clone(), g.param(value.clone())))
            .collect();
        BoundParams { nodes }
    }

    /// Insert every tensor into the graph as a constant leaf (frozen model).
    pub fn bind_frozen(&self, g: &mut Graph) -> BoundParams {
        let nodes = self
            .map
            .iter()
            .map(|(name, value)| (name.clone(), g.constant(value.clone())))
            .collect();
        BoundParams { nodes }
    }
}

/// Node handles of parameters bound into one graph.
pub struct BoundParams {
    nodes: BTreeMap<String, NodeId>,
}

impl BoundParams {
    pub fn node(&self, name: &str) -> NodeId {
        *self
            .nodes
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name:?}"))
    }

    /// Collect gradients back into a named set (zeros for unreached params).
    pub fn collect(&self, g: &Graph, grads: &Gradients) -> Params {
        let mut out = Params::new();
        for (name, &id) in &self.nodes {
            out.insert(name.clone(), grads.get_or_zeros(id, g.value(id).shape()));
        }
        out
    }
}

/// Classical (Polyak) momentum SGD: `v <- m*v + g; p <- p - lr*v`.
#[derive(Clone, Debug)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    /// Apply one update. Gradients missing from `grads` are treated as zero.
    /// A non-finite gradient aborts with the offending parameter's name.
    pub fn step(&mut self, params: &mut Params, grads: &Params) -> Result<()> {
        for (name, p) in params.iter_mut() {
            let zero;
            let grad = match grads.get(name) {
                Some(gt) => gt,
                None => {
                    zero = Tensor::zeros(p.shape().to_vec());
                    &zero
                }
            };
            if !grad.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter {name:?}")));
            }
            if grad.shape() != p.shape() {
                return Err(Error::ShapeMismatch {
                    context: format!("sgd step on {name:?}"),
                    expected: p.shape().to_vec(),
                    actual: grad.shape().to_vec(),
                });
            }
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(p.shape().to_vec()));
            for ((vi, pi), gi) in v.data_mut().iter_mut().zip(p.data_mut()).zip(grad.data()) {
                *vi = self.momentum * *vi + gi;
                *pi -= self.lr * *vi;
            }
        }
        Ok(())
    }

    pub fn velocity(&self) -> &BTreeMap<String, Tensor> {
        &self.velocity
    }

    pub fn velocity_as_params(&self) -> Params {
        let mut out = Params::new();
        for (name, v) in &self.velocity {
            out.insert(name.clone(), v.clone());
        }
        out
    }
}

/// Exponential moving average of a parameter set:
/// `teacher <- delta * teacher + (1 - delta) * student`.
#[derive(Clone, Debug)]
pub struct EmaState {
    delta: f64,
    params: Params,
}

impl EmaState {
    /// Start from an initial teacher copy. `delta` must lie in [0, 1].
    pub fn new(delta: f64, initial: Params) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "EMA smoothing coefficient must be in [0, 1], got {delta}"
            )));
        }
        Ok(EmaState {
            delta,
            params: initial,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn into_params(self) -> Params {
        self.params
    }

    /// One EMA update from the current student parameters.
    pub fn update(&mut self, student: &Params) -> Result<()> {
        for (name, teacher) in self.params.iter_mut() {
            let s = student.get(name).ok_or_else(|| Error::ShapeMismatch {
                context: format!("ema update: student missing {name:?}"),
                expected: teacher.shape().to_vec(),
                actual: vec![],
            })?;
            if s.shape() != teacher.shape() {
                return Err(Error::ShapeMismatch {
                    context: format!("ema update on {name:?}"),
                    expected: teacher.shape().to_vec(),
                    actual: s.shape().to_vec(),
                });
            }
            for (t, &sv) in teacher.data_mut().iter_mut().zip(s.data()) {
                *t = self.delta * *t + (1.0 - self.delta) * sv;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one(name: &str, v: f64) -> Params {
        let mut p = Params::new();
        p.insert(name, Tensor::scalar(v));
        p
    }

    #[test]
    fn first_momentum_step() {
        // p=1, v=0, g=1, lr=0.1, m=0.9 -> v=1, p=0.9
        let mut params = one("p", 1.0);
        let grads = one("p", 1.0);
        let mut opt = SgdMomentum::new(0.1, 0.9);
        opt.step(&mut params, &grads).unwrap();
        assert_relative_eq!(params.get("p").unwrap().item(), 0.9);
        assert_relative_eq!(opt.velocity()["p"].item(), 1.0);
    }

    #[test]
    fn pure_velocity_decay() {
        // zero gradient with v=1: v -> 0.9, p decreases by 0.09
        let mut params = one("p", 1.0);
        let mut opt = SgdMomentum::new(0.1, 0.9);
        opt.step(&mut params, &one("p", 1.0)).unwrap();
        let before = params.get("p").unwrap().item();
        opt.step(&mut params, &one("p", 0.0)).unwrap();
        let after = params.get("p").unwrap().item();
        assert_relative_eq!(opt.velocity()["p"].item(), 0.9);
        assert_relative_eq!(before - after, 0.09, epsilon = 1e-12);
    }

    #[test]
    fn ten_steps_shrink_quadratic() {
        // f(p) = p^2, grad = 2p; |p| must fall strictly below the start.
        let mut params = one("p", 1.0);
        let mut opt = SgdMomentum::new(0.05, 0.9);
        for _ in 0..10 {
            let g = 2.0 * params.get("p").unwrap().item();
            opt.step(&mut params, &one("p", g)).unwrap();
        }
        assert!(params.get("p").unwrap().item().abs() < 1.0);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut params = one("w.3", 1.0);
        let mut opt = SgdMomentum::new(0.1, 0.9);
        let err = opt.step(&mut params, &one("w.3", f64::NAN)).unwrap_err();
        assert!(err.to_string().contains("w.3"), "{err}");
    }

    #[test]
    fn ema_single_coordinate() {
        // delta=0.9, teacher=1, student=0 -> teacher=0.9
        let mut ema = EmaState::new(0.9, one("p", 1.0)).unwrap();
        ema.update(&one("p", 0.0)).unwrap();
        assert_relative_eq!(ema.params().get("p").unwrap().item(), 0.9);
    }

    #[test]
    fn ema_fixed_point_and_full_copy() {
        let mut ema = EmaState::new(0.37, one("p", 2.5)).unwrap();
        ema.update(&one("p", 2.5)).unwrap();
        assert_relative_eq!(ema.params().get("p").unwrap().item(), 2.5);

        let mut copy = EmaState::new(0.0, one("p", 123.0)).unwrap();
        copy.update(&one("p", -4.0)).unwrap();
        assert_relative_eq!(copy.params().get("p").unwrap().item(), -4.0);
    }

    #[test]
    fn ema_shape_mismatch_errors() {
        let mut ema = EmaState::new(0.5, one("p", 1.0)).unwrap();
        let mut bad = Params::new();
        bad.insert("p", Tensor::row(vec![1.0, 2.0]));
        assert!(ema.update(&bad).is_err());
    }
}
