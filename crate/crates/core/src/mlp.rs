//! Small fully connected networks with a hand-written reverse pass.
//!
//! Hidden layers apply a smooth activation; the output layer is affine and
//! produces a single scalar.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv;
use crate::model::{logistic, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => logistic(z),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Parse(format!(
                "unknown activation `{other}` (expected tanh or sigmoid)"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

/// Dense layer with row-major `outputs × inputs` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::DimensionMismatch {
                expected: inputs * outputs,
                actual: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::DimensionMismatch {
                expected: outputs,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|j| {
            self.row(j)
                .iter()
                .zip(input)
                .fold(self.bias[j], |acc, (w, x)| acc + w * x)
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    name: String,
    activation: Activation,
    layers: Vec<DenseLayer>,
}

impl MlpModel {
    pub fn new(
        name: impl Into<String>,
        activation: Activation,
        layers: Vec<DenseLayer>,
    ) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("MLP needs at least one layer".into()))?;
        if first.inputs == 0 {
            return Err(Error::InvalidArgument(
                "MLP input width must be positive".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        let last = layers.last().map_or(0, |l| l.outputs);
        if last != 1 {
            return Err(Error::InvalidArgument(format!(
                "MLP output width must be 1, got {last}"
            )));
        }
        Ok(Self {
            name: name.into(),
            activation,
            layers,
        })
    }

    /// The registered 3-4-1 tanh network with fixed weights.
    pub fn reference_tanh() -> Self {
        let hidden = DenseLayer::new(
            3,
            4,
            vec![
                0.8, -0.5, 0.3, //
                -0.4, 0.9, 0.2, //
                0.6, 0.1, -0.7, //
                0.3, 0.3, 0.3,
            ],
            vec![0.1, -0.2, 0.05, 0.0],
        )
        .expect("reference hidden layer");
        let output = DenseLayer::new(4, 1, vec![1.2, -0.8, 0.5, 0.9], vec![0.1])
            .expect("reference output layer");
        Self::new("mlp3_tanh", Activation::Tanh, vec![hidden, output]).expect("reference MLP")
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Reorders the units of hidden layer `layer` by `perm` (new unit `j` is
    /// old unit `perm[j]`), adjusting the following layer's columns so the
    /// network computes the same function.
    pub fn permute_hidden(&self, layer: usize, perm: &[usize]) -> Result<Self> {
        if layer + 1 >= self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "layer {layer} is not a hidden layer"
            )));
        }
        let width = self.layers[layer].outputs;
        let mut seen = vec![false; width];
        if perm.len() != width
            || perm
                .iter()
                .any(|&p| p >= width || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{width}"
            )));
        }

        let mut out = self.clone();
        let src = &self.layers[layer];
        let dst = &mut out.layers[layer];
        for (j, &p) in perm.iter().enumerate() {
            dst.weights[j * src.inputs..(j + 1) * src.inputs].copy_from_slice(src.row(p));
            dst.bias[j] = src.bias[p];
        }
        let src = &self.layers[layer + 1];
        let dst = &mut out.layers[layer + 1];
        for r in 0..src.outputs {
            for (j, &p) in perm.iter().enumerate() {
                dst.weights[r * src.inputs + j] = src.weights[r * src.inputs + p];
            }
        }
        Ok(out)
    }

    /// Runs the forward pass, returning the post-activation output of every
    /// hidden layer followed by the scalar output.
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut z = Vec::new();
        let hidden = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x } else { &activations[l - 1] };
            layer.forward(input, &mut z);
            if l < hidden {
                activations.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
        }
        (activations, z[0])
    }

    /// Parses the plain-text key/value format:
    ///
    /// ```text
    /// name = my_net
    /// activation = tanh
    /// layers = 3,4,1
    /// w0 = <row-major 4x3 weights>
    /// b0 = <4 biases>
    /// w1 = <row-major 1x4 weights>
    /// b1 = <1 bias>
    /// ```
    pub fn from_config_str(text: &str) -> Result<Self> {
        let map = kv::parse_map(text)?;
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| Error::Parse(format!("MLP config is missing `{k}`")))
        };
        let name = get("name")?.clone();
        let activation: Activation = get("activation")?.parse()?;
        let sizes: Vec<usize> = kv::parse_list(get("layers")?)?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Parse(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let weights = kv::parse_list(get(&format!("w{l}"))?)?;
                let bias = kv::parse_list(get(&format!("b{l}"))?)?;
                DenseLayer::new(w[0], w[1], weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, activation, layers)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }
}

impl Model for MlpModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.forward_trace(x).1
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let (activations, _) = self.forward_trace(x);
        // delta holds dF/d(pre-activation) of the layer being visited.
        let mut delta = vec![1.0];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut upstream = vec![0.0; layer.inputs];
            for (j, d) in delta.iter().enumerate() {
                for (u, w) in upstream.iter_mut().zip(layer.row(j)) {
                    *u += d * w;
                }
            }
            if l == 0 {
                out.copy_from_slice(&upstream);
            } else {
                let a = &activations[l - 1];
                for (u, &ak) in upstream.iter_mut().zip(a) {
                    *u *= self.activation.derivative_from_output(ak);
                }
                delta = upstream;
            }
        }
    }
}
