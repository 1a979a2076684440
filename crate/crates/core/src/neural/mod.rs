//! Causal Conv1D → stacked LSTM → dense network for one-step-ahead forecasting,
//! trained with backpropagation through time and mini-batch SGD.
//!
//! All parameters live in one flat vector; [`Layout`] records where each tensor
//! starts. Gate matrices act on the concatenation `[h_{t−1}, x_t]` and are
//! stored in gate order forget, input, candidate, output.

mod lstm;
mod network;
mod train;

pub use lstm::{lstm_step, LstmCellParams, LstmCellState};
pub use network::Gradients;
pub use train::{
    finder_learning_rate, lr_finder, lr_sweep, predict_series, train, LrFinderResult, TrainConfig, TrainHistory,
};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub window: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub conv_activation: Activation,
    pub lstm_units: Vec<usize>,
    pub dense_units: Vec<usize>,
    pub dense_activations: Vec<Activation>,
    pub batch_size: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            window: 5,
            conv_filters: 32,
            conv_kernel: 5,
            conv_activation: Activation::Relu,
            lstm_units: vec![64, 64],
            dense_units: vec![32, 32, 1],
            dense_activations: vec![Activation::Relu, Activation::Relu, Activation::Identity],
            batch_size: 32,
        }
    }
}

impl NetworkSpec {
    /// Small network used for gradient checks.
    pub fn tiny() -> Self {
        NetworkSpec {
            window: 5,
            conv_filters: 2,
            conv_kernel: 5,
            conv_activation: Activation::Relu,
            lstm_units: vec![3, 3],
            dense_units: vec![2, 1],
            dense_activations: vec![Activation::Relu, Activation::Identity],
            batch_size: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("network spec: {m}")));
        if self.window == 0 || self.conv_filters == 0 || self.conv_kernel == 0 || self.batch_size == 0 {
            return bad("window, filters, kernel and batch size must be positive");
        }
        if self.lstm_units.is_empty() || self.lstm_units.contains(&0) {
            return bad("at least one LSTM layer with positive width is required");
        }
        if self.dense_units.is_empty() || self.dense_units.contains(&0) {
            return bad("dense layers must have positive width");
        }
        if self.dense_units.last() != Some(&1) {
            return bad("the last dense layer must have exactly one unit");
        }
        if self.dense_activations.len() != self.dense_units.len() {
            return bad("one activation per dense layer is required");
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }
}

/// Offsets of one LSTM layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayout {
    pub input: usize,
    pub hidden: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LstmLayout {
    pub fn weight_len(&self) -> usize {
        4 * self.hidden * (self.hidden + self.input)
    }

    pub fn count(&self) -> usize {
        self.weight_len() + 4 * self.hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayout {
    pub input: usize,
    pub output: usize,
    pub weights: usize,
    pub biases: usize,
    pub activation: Activation,
}

impl DenseLayout {
    pub fn count(&self) -> usize {
        self.input * self.output + self.output
    }
}

/// Where every tensor sits inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub conv_weights: usize,
    pub conv_biases: usize,
    pub lstm: Vec<LstmLayout>,
    pub dense: Vec<DenseLayout>,
    pub total: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut at = 0;
        let conv_weights = at;
        at += spec.conv_filters * spec.conv_kernel;
        let conv_biases = at;
        at += spec.conv_filters;
        let mut input = spec.conv_filters;
        let mut lstm = Vec::new();
        for &hidden in &spec.lstm_units {
            let weights = at;
            at += 4 * hidden * (hidden + input);
            let biases = at;
            at += 4 * hidden;
            lstm.push(LstmLayout {
                input,
                hidden,
                weights,
                biases,
            });
            input = hidden;
        }
        let mut dense = Vec::new();
        for (&output, &activation) in spec.dense_units.iter().zip(&spec.dense_activations) {
            let weights = at;
            at += input * output;
            let biases = at;
            at += output;
            dense.push(DenseLayout {
                input,
                output,
                weights,
                biases,
                activation,
            });
            input = output;
        }
        Layout {
            conv_weights,
            conv_biases,
            lstm,
            dense,
            total: at,
        }
    }

    pub fn conv_count(&self) -> usize {
        self.lstm.first().map_or(self.total, |l| l.weights) - self.conv_weights
    }

    /// Per-layer parameter counts in network order: conv, LSTMs, dense.
    pub fn counts(&self) -> Vec<(String, usize)> {
        let mut out = vec![("conv1d".to_string(), self.conv_count())];
        for (i, l) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{}", i + 1), l.count()));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("dense{}", i + 1), d.count()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    spec: NetworkSpec,
    layout: Layout,
    params: Vec<f64>,
}

fn glorot<R: Rng + ?Sized>(out: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    for w in out.iter_mut() {
        *w = dist.sample(rng);
    }
}

impl NetworkWeights {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(NetworkWeights {
            params: vec![0.0; layout.total],
            spec: spec.clone(),
            layout,
        })
    }

    /// Glorot-uniform weights per matrix (per gate for LSTMs), zero biases and
    /// unit forget-gate biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut w = Self::zeros(spec)?;
        let layout = w.layout.clone();
        let k = spec.conv_kernel;
        let f = spec.conv_filters;
        glorot(&mut w.params[layout.conv_weights..layout.conv_weights + f * k], k, k * f, rng);
        for l in &layout.lstm {
            let gate = l.hidden * (l.hidden + l.input);
            for g in 0..4 {
                let start = l.weights + g * gate;
                glorot(&mut w.params[start..start + gate], l.hidden + l.input, l.hidden, rng);
            }
            w.params[l.biases..l.biases + l.hidden].fill(1.0);
        }
        for d in &layout.dense {
            glorot(&mut w.params[d.weights..d.weights + d.input * d.output], d.input, d.output, rng);
        }
        Ok(w)
    }

    pub fn from_params(spec: &NetworkSpec, params: Vec<f64>) -> Result<Self> {
        let mut w = Self::zeros(spec)?;
        if params.len() != w.layout.total {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                w.layout.total,
                params.len()
            )));
        }
        w.params = params;
        Ok(w)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Copies out one LSTM layer as standalone cell parameters.
    pub fn lstm_cell(&self, layer: usize) -> LstmCellParams {
        let l = &self.layout.lstm[layer];
        LstmCellParams {
            input_dim: l.input,
            hidden_dim: l.hidden,
            weights: self.params[l.weights..l.weights + l.weight_len()].to_vec(),
            biases: self.params[l.biases..l.biases + 4 * l.hidden].to_vec(),
        }
    }

    fn tensors(&self) -> Vec<Tensor> {
        let l = &self.layout;
        let p = &self.params;
        let f = self.spec.conv_filters;
        let k = self.spec.conv_kernel;
        let mut out = vec![
            Tensor::new("conv1d/kernel", vec![f, 1, k], &p[l.conv_weights..l.conv_weights + f * k]),
            Tensor::new("conv1d/bias", vec![f], &p[l.conv_biases..l.conv_biases + f]),
        ];
        for (i, ll) in l.lstm.iter().enumerate() {
            let cols = ll.hidden + ll.input;
            let gate = ll.hidden * cols;
            for (g, name) in ["f", "i", "c", "o"].iter().enumerate() {
                let s = ll.weights + g * gate;
                out.push(Tensor::new(&format!("lstm{}/W_{name}", i + 1), vec![ll.hidden, cols], &p[s..s + gate]));
            }
            for (g, name) in ["f", "i", "c", "o"].iter().enumerate() {
                let s = ll.biases + g * ll.hidden;
                out.push(Tensor::new(&format!("lstm{}/b_{name}", i + 1), vec![ll.hidden], &p[s..s + ll.hidden]));
            }
        }
        for (i, d) in l.dense.iter().enumerate() {
            out.push(Tensor::new(
                &format!("dense{}/kernel", i + 1),
                vec![d.output, d.input],
                &p[d.weights..d.weights + d.input * d.output],
            ));
            out.push(Tensor::new(&format!("dense{}/bias", i + 1), vec![d.output], &p[d.biases..d.biases + d.output]));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&WeightsDocument {
            kind: "network".into(),
            spec: self.spec.clone(),
            tensors: self.tensors(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightsDocument = serde_json::from_str(text)?;
        if doc.kind != "network" {
            return Err(Error::InvalidArgument(format!("expected network weights, found {:?}", doc.kind)));
        }
        let template = NetworkWeights::zeros(&doc.spec)?;
        let expected = template.tensors();
        if expected.len() != doc.tensors.len() {
            return Err(Error::Shape("tensor table does not match the spec".into()));
        }
        let mut params = Vec::with_capacity(template.params.len());
        for (want, got) in expected.iter().zip(&doc.tensors) {
            if want.name != got.name || want.shape != got.shape || got.data.len() != want.data.len() {
                return Err(Error::Shape(format!("tensor {} does not match the spec", got.name)));
            }
            params.extend(&got.data);
        }
        NetworkWeights::from_params(&doc.spec, params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn new(name: &str, shape: Vec<usize>, data: &[f64]) -> Self {
        Tensor {
            name: name.to_string(),
            shape,
            data: data.to_vec(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsDocument {
    kind: String,
    spec: NetworkSpec,
    tensors: Vec<Tensor>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_counts_match_closed_forms() {
        let layout = NetworkSpec::default().layout();
        let counts: Vec<usize> = layout.counts().into_iter().map(|(_, c)| c).collect();
        assert_eq!(counts, vec![192, 24832, 33024, 2080, 1056, 33]);
        assert_eq!(layout.total, counts.iter().sum::<usize>());
        let w = NetworkWeights::zeros(&NetworkSpec::default()).unwrap();
        assert_eq!(w.parameter_count(), 61217);
    }

    #[test]
    fn init_respects_glorot_limits_and_forget_bias() {
        let spec = NetworkSpec::default();
        let w = NetworkWeights::init(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let l = &w.layout().lstm[0];
        let limit = (6.0 / (l.hidden + l.input + l.hidden) as f64).sqrt();
        assert!(w.params()[l.weights..l.biases].iter().all(|v| v.abs() <= limit));
        let b = &w.params()[l.biases..l.biases + 4 * l.hidden];
        assert!(b[..l.hidden].iter().all(|v| *v == 1.0));
        assert!(b[l.hidden..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn spec_validation() {
        let mut s = NetworkSpec::tiny();
        s.dense_units = vec![2, 2];
        assert!(s.validate().is_err());
        let mut s = NetworkSpec::tiny();
        s.dense_activations.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn weights_json_round_trip() {
        let w = NetworkWeights::init(&NetworkSpec::tiny(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let text = w.to_json().unwrap();
        assert!(text.contains("lstm2/W_o"));
        assert_eq!(NetworkWeights::from_json(&text).unwrap(), w);
    }
}
