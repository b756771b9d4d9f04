//! Dense layers: the shared building block for every model in the pipeline.
//!
//! A 1x1 convolution over per-patch features is a dense layer applied to each
//! row, so rows-as-samples matrices cover all the architectures used here.

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::optim::{BoundParams, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    /// Row-wise softmax.
    Softmax,
}

/// A multi-layer perceptron acting on `[batch, features]` matrices.
#[derive(Clone, Debug)]
pub struct Mlp {
    name: String,
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

impl Mlp {
    /// `sizes` lists layer widths from input to output, e.g. `[3072, 128, 64, 5]`.
    pub fn new(name: impl Into<String>, sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output widths");
        Mlp {
            name: name.into(),
            sizes: sizes.to_vec(),
            hidden,
            output,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn weight_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.name)
    }

    fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.name)
    }

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn init(&self, rng: &mut impl Rng) -> Params {
        let mut params = Params::new();
        for layer in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            params.insert(self.weight_name(layer), Tensor::matrix(fan_in, fan_out, data));
            params.insert(self.bias_name(layer), Tensor::row(vec![0.0; fan_out]));
        }
        params
    }

    fn activate(&self, g: &mut Graph, x: NodeId, layer: usize) -> NodeId {
        let act = if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden
        };
        match act {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Tanh => g.tanh(x),
            Activation::Softmax => g.softmax_rows(x),
        }
    }

    /// Graph forward over bound parameters. Panics on internal shape errors;
    /// use [`Mlp::forward`] for validated evaluation of caller data.
    pub fn forward_graph(&self, g: &mut Graph, bound: &BoundParams, x: NodeId) -> NodeId {
        self.forward_graph_inner(g, bound, x, None).0
    }

    /// Graph forward that also returns the post-activation node of every
    /// layer (used for feature extraction at a named layer).
    pub fn forward_graph_layers(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        x: NodeId,
    ) -> (NodeId, Vec<NodeId>) {
        self.forward_graph_inner(g, bound, x, None)
    }

    /// Graph forward with inverted dropout applied to hidden activations.
    /// `masks[layer]` must be pre-scaled by `1/(1-p)`.
    pub fn forward_graph_dropout(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        x: NodeId,
        masks: &[NodeId],
    ) -> NodeId {
        self.forward_graph_inner(g, bound, x, Some(masks)).0
    }

    fn forward_graph_inner(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        x: NodeId,
        dropout_masks: Option<&[NodeId]>,
    ) -> (NodeId, Vec<NodeId>) {
        let mut h = x;
        let mut layers = Vec::with_capacity(self.n_layers());
        for layer in 0..self.n_layers() {
            let w = bound.node(&self.weight_name(layer));
            let b = bound.node(&self.bias_name(layer));
            let z = g.matmul(h, w);
            let z = g.add(z, b);
            h = self.activate(g, z, layer);
            if let Some(masks) = dropout_masks {
                if layer + 1 < self.n_layers() {
                    h = g.mul(h, masks[layer]);
                }
            }
            layers.push(h);
        }
        (h, layers)
    }

    /// Validated plain evaluation: checks the input width and every stored
    /// parameter shape, naming the offending layer on mismatch.
    pub fn forward(&self, params: &Params, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.input_width() {
            return Err(Error::LayerMismatch {
                model: self.name.clone(),
                layer: 0,
                expected: self.input_width(),
                actual: x.cols(),
            });
        }
        for layer in 0..self.n_layers() {
            let w = params
                .get(&self.weight_name(layer))
                .ok_or_else(|| Error::InvalidArgument(format!(
                    "missing parameter {:?}",
                    self.weight_name(layer)
                )))?;
            if w.rows() != self.sizes[layer] || w.cols() != self.sizes[layer + 1] {
                return Err(Error::LayerMismatch {
                    model: self.name.clone(),
                    layer,
                    expected: self.sizes[layer],
                    actual: w.rows(),
                });
            }
        }
        let mut g = Graph::new();
        let bound = params.bind_frozen(&mut g);
        let input = g.constant(x.clone());
        let out = self.forward_graph(&mut g, &bound, input);
        Ok(g.value(out).clone())
    }
}

/// Sample a Bernoulli keep-mask scaled by `1/(1-p)` for inverted dropout.
pub fn dropout_mask(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> Tensor {
    let keep = 1.0 - p;
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();
    Tensor::matrix(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::rng::seeded_rng;
    use approx::assert_relative_eq;

    #[test]
    fn identity_single_layer_passes_through() {
        let mlp = Mlp::new("id", &[3, 3], Activation::Relu, Activation::Relu);
        let mut params = Params::new();
        params.insert(
            "id.w0",
            Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        );
        params.insert("id.b0", Tensor::row(vec![0.0; 3]));
        let out = mlp.forward(&params, &Tensor::row(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn softmax_head_on_zero_logits_is_uniform() {
        let mlp = Mlp::new("m", &[5, 5], Activation::Relu, Activation::Softmax);
        let mut params = Params::new();
        params.insert("m.w0", Tensor::zeros(vec![5, 5]));
        params.insert("m.b0", Tensor::row(vec![0.0; 5]));
        let out = mlp.forward(&params, &Tensor::row(vec![0.0; 5])).unwrap();
        for &p in out.data() {
            assert_relative_eq!(p, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn random_batch_softmax_rows_sum_to_one() {
        let mut rng = seeded_rng(7);
        let mlp = Mlp::new("m", &[10, 8, 4], Activation::Relu, Activation::Softmax);
        let params = mlp.init(&mut rng);
        let data = (0..32 * 10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = mlp.forward(&params, &Tensor::matrix(32, 10, data)).unwrap();
        for r in 0..32 {
            let s: f64 = (0..4).map(|c| out.at(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_width_names_layer() {
        let mlp = Mlp::new("clf", &[4, 2], Activation::Relu, Activation::Identity);
        let mut rng = seeded_rng(0);
        let params = mlp.init(&mut rng);
        let err = mlp.forward(&params, &Tensor::row(vec![0.0; 3])).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }
}
