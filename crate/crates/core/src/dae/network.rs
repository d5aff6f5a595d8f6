use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{DphError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Weights (`out x in`) and biases of a `2L`-layer autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeParams {
    layer_dims: Vec<usize>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    /// Weight-decay coefficient.
    pub delta: f64,
    /// Masking probability applied to inputs during training.
    pub corruption: f64,
}

/// Per-layer gradients, same shapes as the parameters they belong to.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl DaeParams {
    /// Builds `[vocab, hidden.., code_len, ..hidden.rev(), vocab]` with
    /// Glorot-uniform weights and zero biases.
    pub fn new(
        vocab: usize,
        hidden: &[usize],
        code_len: usize,
        delta: f64,
        corruption: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = vec![vocab];
        dims.extend_from_slice(hidden);
        dims.push(code_len);
        dims.extend(hidden.iter().rev());
        dims.push(vocab);
        let mut params = Self::zeros(&dims, delta, corruption)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut params.weights {
            let (fan_out, fan_in) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        Ok(params)
    }

    /// All-zero parameters for the given symmetric layer structure.
    pub fn zeros(dims: &[usize], delta: f64, corruption: f64) -> Result<Self> {
        if dims.len() < 3 || dims.len() % 2 == 0 {
            return Err(DphError::InvalidArgument(format!(
                "layer structure needs an odd number (>= 3) of sizes, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) || dims.iter().ne(dims.iter().rev()) {
            return Err(DphError::InvalidArgument(format!(
                "layer structure must be symmetric and positive, got {dims:?}"
            )));
        }
        if !(0.0..1.0).contains(&corruption) {
            return Err(DphError::InvalidArgument(format!(
                "corruption rate must be in [0, 1), got {corruption}"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(DphError::InvalidArgument(format!("weight decay must be >= 0, got {delta}")));
        }
        let weights = dims.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Ok(Self {
            layer_dims: dims.to_vec(),
            weights,
            biases,
            delta,
            corruption,
        })
    }

    /// Rebuilds parameters from explicit blocks, checking the shapes.
    pub fn from_parts(
        dims: &[usize],
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        delta: f64,
        corruption: f64,
    ) -> Result<Self> {
        let mut params = Self::zeros(dims, delta, corruption)?;
        if weights.len() != params.weights.len() || biases.len() != params.biases.len() {
            return Err(DphError::Dimension("wrong number of layers".into()));
        }
        for (l, (w, b)) in weights.into_iter().zip(biases).enumerate() {
            if w.dim() != params.weights[l].dim() || b.len() != params.biases[l].len() {
                return Err(DphError::Dimension(format!("layer {l} has the wrong shape")));
            }
            params.weights[l] = w;
            params.biases[l] = b;
        }
        Ok(params)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn code_len(&self) -> usize {
        self.layer_dims[self.encoder_layers()]
    }

    /// `L`: number of layers from the input to the code layer.
    pub fn encoder_layers(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn total_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.encoder_layers() {
            Activation::Tanh
        } else {
            Activation::Sigmoid
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// Activations of the first `n_layers` layers for a batch (rows are
    /// samples). Element 0 is the input itself.
    pub(crate) fn forward(&self, input: ArrayView2<'_, f64>, n_layers: usize) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_owned());
        for l in 0..n_layers {
            let act = self.activation(l);
            let mut z = acts[l].dot(&self.weights[l].t());
            z += &self.biases[l];
            z.mapv_inplace(|v| act.apply(v));
            acts.push(z);
        }
        acts
    }

    /// Backpropagates `d_out` (gradient w.r.t. the last activation) through
    /// the layers that produced `acts`. `flip_layer` negates one layer's
    /// weight gradient; it exists only to exercise the gradient checker.
    pub(crate) fn backward(
        &self,
        acts: &[Array2<f64>],
        d_out: Array2<f64>,
        flip_layer: Option<usize>,
    ) -> Gradients {
        let n_layers = acts.len() - 1;
        let mut gw = Vec::with_capacity(n_layers);
        let mut gb = Vec::with_capacity(n_layers);
        let mut d_a = d_out;
        for l in (0..n_layers).rev() {
            let act = self.activation(l);
            let mut dz = d_a;
            dz.zip_mut_with(&acts[l + 1], |g, &a| *g *= act.derivative(a));
            let mut w_grad = dz.t().dot(&acts[l]);
            if flip_layer == Some(l) {
                w_grad.mapv_inplace(|v| -v);
            }
            gw.push(w_grad);
            gb.push(dz.sum_axis(Axis(0)));
            if l > 0 {
                d_a = dz.dot(&self.weights[l]);
            } else {
                d_a = Array2::zeros((0, 0));
            }
        }
        gw.reverse();
        gb.reverse();
        Gradients {
            weights: gw,
            biases: gb,
        }
    }

    /// Mean reconstruction error over the batch plus `delta ||W||^2`, with its
    /// gradient. `clean` is the target, `input` the (possibly corrupted) input.
    pub(crate) fn reconstruction_loss_grad(
        &self,
        clean: ArrayView2<'_, f64>,
        input: ArrayView2<'_, f64>,
        flip_layer: Option<usize>,
    ) -> (f64, Gradients) {
        let batch = input.nrows().max(1) as f64;
        let acts = self.forward(input, self.total_layers());
        let diff = acts.last().unwrap() - &clean;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / batch
            + self.delta * self.weight_norm_sq();
        let mut grads = self.backward(&acts, diff * (2.0 / batch), flip_layer);
        if self.delta > 0.0 {
            for (g, w) in grads.weights.iter_mut().zip(&self.weights) {
                g.scaled_add(2.0 * self.delta, w);
            }
        }
        (loss, grads)
    }

    /// Mean `||target - encode(input)||^2` over the batch and its gradient
    /// for the encoder layers only.
    pub(crate) fn code_loss_grad(
        &self,
        input: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        flip_layer: Option<usize>,
    ) -> (f64, Gradients) {
        let batch = input.nrows().max(1) as f64;
        let acts = self.forward(input, self.encoder_layers());
        let diff = acts.last().unwrap() - &targets;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / batch;
        (loss, self.backward(&acts, diff * (2.0 / batch), flip_layer))
    }

    pub(crate) fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-learning_rate, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-learning_rate, g);
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(DphError::Dimension(format!(
                "content vector has length {len}, encoder expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Code-layer output for a clean content vector; entries lie in `(-1, 1)`.
    pub fn encode(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let batch = x.insert_axis(Axis(0));
        let out = self.forward(batch, self.encoder_layers()).pop().unwrap();
        Ok(out.row(0).to_owned())
    }

    /// Encodes every row of `rows` (`items x V`), giving `items x r`.
    pub fn encode_batch(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(rows.ncols())?;
        Ok(self.forward(rows, self.encoder_layers()).pop().unwrap())
    }

    /// Full pass through all `2L` layers.
    pub fn reconstruct(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let batch = x.insert_axis(Axis(0));
        let out = self.forward(batch, self.total_layers()).pop().unwrap();
        Ok(out.row(0).to_owned())
    }
}
