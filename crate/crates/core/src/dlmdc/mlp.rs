//! Single-output perceptron: rectifier hidden layers, logistic output.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DlmdcError;

/// Dense layer, weights stored `outputs × inputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for ((o, row), &b) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)).zip(&self.biases) {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// Parameter-shaped buffers: gradients and optimizer state.
pub type Gradients = Vec<Layer>;

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sample from N(0, std²) truncated to ±2 std by rejection.
pub fn truncated_normal(rng: &mut impl Rng, std: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Activations of one forward pass, kept for backpropagation. Reusable
/// across samples so the training loop does not allocate.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Dropout scale applied to each hidden unit (0 or 1/keep), per hidden layer.
    masks: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl Trace {
    pub fn new(layer_sizes: &[usize]) -> Self {
        let widest = layer_sizes.iter().copied().max().unwrap_or(1);
        Self {
            acts: layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            masks: layer_sizes[1..layer_sizes.len() - 1].iter().map(|&s| vec![1.0; s]).collect(),
            delta: Vec::with_capacity(widest),
            prev: Vec::with_capacity(widest),
        }
    }

    pub fn output(&self) -> f64 {
        self.acts.last().expect("nonempty")[0]
    }
}

impl MlpClassifier {
    /// All-zero network. `layer_sizes` runs from the input width to 1.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, DlmdcError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(DlmdcError::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(DlmdcError::Config("classifier must have exactly one output".into()));
        }
        let layers = layer_sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    /// Truncated-normal weights with standard deviation `std`, zero biases.
    pub fn init(layer_sizes: &[usize], std: f64, rng: &mut impl Rng) -> Result<Self, DlmdcError> {
        let mut net = Self::zeros(layer_sizes)?;
        for layer in &mut net.layers {
            for w in &mut layer.weights {
                *w = truncated_normal(rng, std);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, DlmdcError> {
        let mut sizes = vec![layers.first().map_or(0, |l| l.inputs)];
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != *sizes.last().unwrap()
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(DlmdcError::Config(format!("layer {i} has inconsistent shape")));
            }
            sizes.push(l.outputs);
        }
        let mut net = Self::zeros(&sizes)?;
        net.layers = layers;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), DlmdcError> {
        if input.len() != self.input_len() {
            return Err(DlmdcError::InputLength {
                expected: self.input_len(),
                found: input.len(),
            });
        }
        Ok(())
    }

    /// Posterior in (0, 1). No dropout.
    pub fn forward(&self, input: &[f64]) -> Result<f64, DlmdcError> {
        self.check_input(input)?;
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> f64 {
        let widest = self.layer_sizes.iter().copied().max().unwrap_or(1);
        let mut a = vec![0.0; widest];
        let mut b = vec![0.0; widest];
        a[..input.len()].copy_from_slice(input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&a[..layer.inputs], &mut b[..layer.outputs]);
            if l < last {
                for v in &mut b[..layer.outputs] {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut b);
        }
        logistic(a[0])
    }

    /// Forward pass recording activations into `trace`. `dropout` is
    /// `(keep, rng)` during training.
    pub fn forward_trace<R: Rng>(&self, input: &[f64], mut dropout: Option<(f64, &mut R)>, trace: &mut Trace) {
        trace.acts[0].copy_from_slice(input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = trace.acts.split_at_mut(l + 1);
            let out = &mut tail[0];
            layer.affine(&head[l], out);
            if l < last {
                let mask = &mut trace.masks[l];
                match dropout.as_mut() {
                    Some((keep, rng)) if *keep < 1.0 => {
                        for m in mask.iter_mut() {
                            *m = if rng.random::<f64>() < *keep { 1.0 / *keep } else { 0.0 };
                        }
                    }
                    _ => mask.fill(1.0),
                }
                for (v, m) in out.iter_mut().zip(mask.iter()) {
                    *v = v.max(0.0) * m;
                }
            } else {
                out[0] = logistic(out[0]);
            }
        }
    }

    /// Adds the gradient of `(y - label)²` for the pass recorded in `trace` into `grads`.
    pub fn accumulate_gradients(&self, trace: &mut Trace, label: f64, grads: &mut Gradients) {
        let y = trace.output();
        let Trace { acts, masks, delta, prev } = trace;
        delta.clear();
        delta.push(2.0 * (y - label) * y * (1.0 - y));
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let g = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                for (gw, &x) in g.weights[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if l == 0 {
                break;
            }
            // Back through layer l's weights, then the rectifier and dropout of layer l - 1.
            prev.clear();
            prev.resize(layer.inputs, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &w) in prev.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                    *p += d * w;
                }
            }
            for ((p, &a), &m) in prev.iter_mut().zip(input).zip(&masks[l - 1]) {
                if a <= 0.0 || m == 0.0 {
                    *p = 0.0;
                } else {
                    *p *= m;
                }
            }
            std::mem::swap(delta, prev);
        }
    }

    /// Gradient of the per-sample squared error with respect to every
    /// weight and bias, without dropout.
    pub fn backward(&self, input: &[f64], label: f64) -> Result<Gradients, DlmdcError> {
        self.check_input(input)?;
        let mut trace = Trace::new(&self.layer_sizes);
        self.forward_trace::<rand_chacha::ChaCha8Rng>(input, None, &mut trace);
        let mut grads = self.zero_gradients();
        self.accumulate_gradients(&mut trace, label, &mut grads);
        Ok(grads)
    }
}

/// Mean squared error of `posteriors` against `labels`.
pub fn mse_loss(posteriors: &[f64], labels: &[f64]) -> Result<f64, DlmdcError> {
    if posteriors.len() != labels.len() {
        return Err(DlmdcError::InputLength {
            expected: posteriors.len(),
            found: labels.len(),
        });
    }
    if posteriors.is_empty() {
        return Ok(0.0);
    }
    Ok(posteriors.iter().zip(labels).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / posteriors.len() as f64)
}
