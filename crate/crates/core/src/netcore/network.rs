use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z).clamp(OUTPUT_FLOOR, 1.0 - OUTPUT_FLOOR),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }
}

/// Sigmoid layers never emit exactly 0 or 1.
pub const OUTPUT_FLOOR: f64 = 1e-15;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One affine layer followed by an activation.
///
/// With `basis > 1` the layer is a varying-coefficient layer: every weight
/// and bias is a vector of `basis` coefficients that is contracted with a
/// basis vector supplied at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    #[serde(default = "one")]
    pub basis: usize,
}

fn one() -> usize {
    1
}

impl LayerShape {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
            basis: 1,
        }
    }

    pub fn varying(inputs: usize, outputs: usize, activation: Activation, basis: usize) -> Self {
        Self {
            inputs,
            outputs,
            activation,
            basis,
        }
    }

    pub fn param_count(&self) -> usize {
        (self.inputs + 1) * self.outputs * self.basis
    }

    fn weight_len(&self) -> usize {
        self.inputs * self.outputs * self.basis
    }
}

/// Layer sequence, optionally appending the bid to the input of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerShape>,
    #[serde(default)]
    pub bid_input_at: Option<usize>,
}

/// Per-layer inputs and outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Where the incoming gradient of [`Architecture::backward`] is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientAt {
    /// With respect to the final activations.
    Output,
    /// With respect to the final pre-activations.
    Logit,
}

impl Architecture {
    pub fn new(layers: Vec<LayerShape>, bid_input_at: Option<usize>) -> Result<Self, NetError> {
        let arch = Self {
            layers,
            bid_input_at,
        };
        arch.validate()?;
        Ok(arch)
    }

    fn validate(&self) -> Result<(), NetError> {
        if self.layers.is_empty() {
            return Err(NetError::Argument("architecture has no layers".into()));
        }
        if let Some(at) = self.bid_input_at {
            if at >= self.layers.len() {
                return Err(NetError::Argument(format!("bid input at missing layer {at}")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            let expected = pair[0].outputs + usize::from(self.bid_input_at == Some(i + 1));
            if pair[1].inputs != expected {
                return Err(NetError::Argument(format!(
                    "layer {} expects {} inputs but receives {expected}",
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        if self.layers.iter().any(|l| l.basis == 0 || l.outputs == 0) {
            return Err(NetError::Argument("empty layer".into()));
        }
        Ok(())
    }

    /// Length of the input vector, excluding an appended bid.
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs - usize::from(self.bid_input_at == Some(0))
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn basis_len(&self) -> usize {
        self.layers.iter().map(|l| l.basis).max().unwrap_or(1)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerShape::param_count).sum()
    }

    /// Uniform fan-in initialization, `U(−1/√fan_in, 1/√fan_in)`, layer by
    /// layer, weights before biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for _ in 0..layer.param_count() {
                params.push(rng.random_range(-bound..bound));
            }
        }
        params
    }

    /// Forward pass. `basis` is required only by varying layers.
    pub fn forward(&self, params: &[f64], input: &[f64], bid: f64, basis: &[f64]) -> Trace {
        debug_assert_eq!(params.len(), self.param_count());
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut x = if l == 0 {
                input.to_vec()
            } else {
                outputs[l - 1].clone()
            };
            if self.bid_input_at == Some(l) {
                x.push(bid);
            }
            let p = &params[offset..offset + layer.param_count()];
            offset += layer.param_count();
            let out = layer_forward(layer, p, &x, basis);
            inputs.push(x);
            outputs.push(out);
        }
        Trace { inputs, outputs }
    }

    /// Backpropagates `grad` through the layers recorded in `trace`,
    /// accumulating parameter gradients into `grads`. Returns the gradient
    /// with respect to the network input (bid excluded).
    pub fn backward(
        &self,
        params: &[f64],
        trace: &Trace,
        grad: &[f64],
        at: GradientAt,
        basis: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            offsets.push(offset);
            offset += layer.param_count();
        }
        let last = self.layers.len() - 1;
        let mut g: Vec<f64> = match at {
            GradientAt::Logit => grad.to_vec(),
            GradientAt::Output => grad
                .iter()
                .zip(&trace.outputs[last])
                .map(|(g, &o)| g * self.layers[last].activation.derivative_from_output(o))
                .collect(),
        };
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let range = offsets[l]..offsets[l] + layer.param_count();
            let mut g_in =
                layer_backward(layer, &params[range.clone()], &trace.inputs[l], &g, basis, &mut grads[range]);
            if self.bid_input_at == Some(l) {
                g_in.pop();
            }
            if l == 0 {
                return g_in;
            }
            let prev = &self.layers[l - 1];
            g = g_in
                .iter()
                .zip(&trace.outputs[l - 1])
                .map(|(g, &o)| g * prev.activation.derivative_from_output(o))
                .collect();
        }
        unreachable!("architecture has at least one layer")
    }
}

fn layer_forward(layer: &LayerShape, p: &[f64], x: &[f64], basis: &[f64]) -> Vec<f64> {
    let (n_in, k) = (layer.inputs, layer.basis);
    let (weights, biases) = p.split_at(layer.weight_len());
    let mut out = Vec::with_capacity(layer.outputs);
    if k == 1 {
        for o in 0..layer.outputs {
            let row = &weights[o * n_in..(o + 1) * n_in];
            let z = biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out.push(layer.activation.apply(z));
        }
    } else {
        let basis = &basis[..k];
        for o in 0..layer.outputs {
            let mut z: f64 = biases[o * k..(o + 1) * k]
                .iter()
                .zip(basis)
                .map(|(c, b)| c * b)
                .sum();
            for (i, &v) in x.iter().enumerate() {
                let coeffs = &weights[(o * n_in + i) * k..(o * n_in + i + 1) * k];
                let w: f64 = coeffs.iter().zip(basis).map(|(c, b)| c * b).sum();
                z += w * v;
            }
            out.push(layer.activation.apply(z));
        }
    }
    out
}

fn layer_backward(
    layer: &LayerShape,
    p: &[f64],
    x: &[f64],
    g_z: &[f64],
    basis: &[f64],
    grads: &mut [f64],
) -> Vec<f64> {
    let (n_in, k) = (layer.inputs, layer.basis);
    let wl = layer.weight_len();
    let weights = &p[..wl];
    let (gw, gb) = grads.split_at_mut(wl);
    let mut g_in = vec![0.0; n_in];
    if k == 1 {
        for (o, &g) in g_z.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            let row = o * n_in;
            for i in 0..n_in {
                gw[row + i] += g * x[i];
                g_in[i] += g * weights[row + i];
            }
        }
    } else {
        let basis = &basis[..k];
        for (o, &g) in g_z.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (c, b) in gb[o * k..(o + 1) * k].iter_mut().zip(basis) {
                *c += g * b;
            }
            for i in 0..n_in {
                let idx = (o * n_in + i) * k;
                let mut w = 0.0;
                for j in 0..k {
                    gw[idx + j] += g * x[i] * basis[j];
                    w += weights[idx + j] * basis[j];
                }
                g_in[i] += g * w;
            }
        }
    }
    g_in
}

/// A network together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

impl DenseNetwork {
    pub fn new(architecture: Architecture, params: Vec<f64>) -> Result<Self, NetError> {
        architecture.validate()?;
        if params.len() != architecture.param_count() {
            return Err(NetError::Argument(format!(
                "architecture needs {} parameters, got {}",
                architecture.param_count(),
                params.len()
            )));
        }
        Ok(Self {
            architecture,
            params,
        })
    }

    pub fn init<R: Rng + ?Sized>(architecture: Architecture, rng: &mut R) -> Self {
        let params = architecture.init_params(rng);
        Self {
            architecture,
            params,
        }
    }

    /// Plain MLP: ReLU hidden layers of the given widths, sigmoid output.
    pub fn mlp_architecture(inputs: usize, hidden: &[usize]) -> Architecture {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = inputs;
        for &h in hidden {
            layers.push(LayerShape::dense(width, h, Activation::Relu));
            width = h;
        }
        layers.push(LayerShape::dense(width, 1, Activation::Sigmoid));
        Architecture {
            layers,
            bid_input_at: None,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Forward pass for a network without bid input or varying layers.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.forward_with_bid(input, 0.0, &[1.0])
    }

    pub fn forward_with_bid(&self, input: &[f64], bid: f64, basis: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.architecture.input_dim() {
            return Err(NetError::Argument(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.architecture.input_dim()
            )));
        }
        if basis.len() < self.architecture.basis_len() {
            return Err(NetError::Argument(format!(
                "basis has {} entries, network expects {}",
                basis.len(),
                self.architecture.basis_len()
            )));
        }
        Ok(self
            .architecture
            .forward(&self.params, input, bid, basis)
            .output()
            .to_vec())
    }
}
