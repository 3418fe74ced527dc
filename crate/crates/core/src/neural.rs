//! Dense and LSTM layers with exact gradients, the Gaussian NLL head and Adam.
//!
//! Everything is batch-major: a sequence is a `Vec` of `B x width` matrices,
//! one per timestep, so each layer step is a single matrix product.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeuralError;

/// Batch of sequences: `seq[t]` is `B x width`.
pub type Seq = Vec<Array2<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::None => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the output `y`.
    fn backprop(self, grad: &mut Array2<f64>, y: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(y).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::None => {}
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Shape of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Lstm {
        input: usize,
        hidden: usize,
        return_sequences: bool,
    },
}

impl LayerSpec {
    pub fn input(&self) -> usize {
        match *self {
            LayerSpec::Dense { input, .. } | LayerSpec::Lstm { input, .. } => input,
        }
    }

    pub fn output(&self) -> usize {
        match *self {
            LayerSpec::Dense { output, .. } => output,
            LayerSpec::Lstm { hidden, .. } => hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Gate blocks are stacked in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `4H x in`
    pub w_input: Array2<f64>,
    /// `4H x H`
    pub w_hidden: Array2<f64>,
    pub bias: Array1<f64>,
    pub return_sequences: bool,
}

impl LstmLayer {
    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Lstm(LstmLayer),
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

impl Layer {
    pub fn new(spec: LayerSpec, rng: &mut impl Rng) -> Self {
        match spec {
            LayerSpec::Dense {
                input,
                output,
                activation,
            } => {
                let b = 1.0 / (input as f64).sqrt();
                Layer::Dense(DenseLayer {
                    weight: uniform(rng, output, input, b),
                    bias: Array1::from_shape_fn(output, |_| rng.random_range(-b..=b)),
                    activation,
                })
            }
            LayerSpec::Lstm {
                input,
                hidden,
                return_sequences,
            } => {
                let w_input = uniform(rng, 4 * hidden, input, 1.0 / (input as f64).sqrt());
                let w_hidden = uniform(rng, 4 * hidden, hidden, 1.0 / (hidden as f64).sqrt());
                let mut bias = Array1::zeros(4 * hidden);
                bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
                Layer::Lstm(LstmLayer {
                    w_input,
                    w_hidden,
                    bias,
                    return_sequences,
                })
            }
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                input: d.weight.ncols(),
                output: d.weight.nrows(),
                activation: d.activation,
            },
            Layer::Lstm(l) => LayerSpec::Lstm {
                input: l.w_input.ncols(),
                hidden: l.hidden(),
                return_sequences: l.return_sequences,
            },
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![d.weight.as_slice().unwrap(), d.bias.as_slice().unwrap()],
            Layer::Lstm(l) => vec![
                l.w_input.as_slice().unwrap(),
                l.w_hidden.as_slice().unwrap(),
                l.bias.as_slice().unwrap(),
            ],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(d) => vec![
                d.weight.as_slice_mut().unwrap(),
                d.bias.as_slice_mut().unwrap(),
            ],
            Layer::Lstm(l) => vec![
                l.w_input.as_slice_mut().unwrap(),
                l.w_hidden.as_slice_mut().unwrap(),
                l.bias.as_slice_mut().unwrap(),
            ],
        }
    }
}

/// `activation(W x + b)` for a single vector.
pub fn dense_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    if x.len() != layer.weight.ncols() {
        return Err(NeuralError::Shape {
            expected: layer.weight.ncols(),
            got: x.len(),
        });
    }
    let m = ArrayView2::from_shape((1, x.len()), x).unwrap();
    Ok(dense_batch(layer, m).into_raw_vec_and_offset().0)
}

fn dense_batch(layer: &DenseLayer, x: ArrayView2<f64>) -> Array2<f64> {
    let mut y = x.dot(&layer.weight.t());
    y += &layer.bias;
    layer.activation.apply(&mut y);
    y
}

/// Hidden outputs of an LSTM over one sequence of vectors.
pub fn lstm_forward(layer: &LstmLayer, seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NeuralError> {
    if seq.is_empty() {
        return Err(NeuralError::EmptySequence);
    }
    let n_in = layer.w_input.ncols();
    let mut batch = Vec::with_capacity(seq.len());
    for x in seq {
        if x.len() != n_in {
            return Err(NeuralError::Shape {
                expected: n_in,
                got: x.len(),
            });
        }
        batch.push(Array2::from_shape_vec((1, n_in), x.clone()).unwrap());
    }
    let all = LstmLayer {
        return_sequences: true,
        ..layer.clone()
    };
    let (hs, _) = lstm_run(&all, &batch, false);
    Ok(hs.into_iter().map(|h| h.into_raw_vec_and_offset().0).collect())
}

/// Per-step values kept for backpropagation.
#[derive(Debug, Clone)]
struct LstmStep {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// activated gates, `B x 4H`
    gates: Array2<f64>,
    c: Array2<f64>,
}

fn lstm_run(layer: &LstmLayer, xs: &[Array2<f64>], keep: bool) -> (Seq, Vec<LstmStep>) {
    let h_n = layer.hidden();
    let b = xs[0].nrows();
    let mut h = Array2::<f64>::zeros((b, h_n));
    let mut c = Array2::<f64>::zeros((b, h_n));
    let mut hs = Vec::with_capacity(xs.len());
    let mut steps = Vec::new();
    for x in xs {
        let mut z = x.dot(&layer.w_input.t());
        z += &h.dot(&layer.w_hidden.t());
        z += &layer.bias;
        z.slice_mut(s![.., 0..2 * h_n]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * h_n..3 * h_n]).mapv_inplace(f64::tanh);
        z.slice_mut(s![.., 3 * h_n..]).mapv_inplace(sigmoid);
        let i = z.slice(s![.., 0..h_n]);
        let f = z.slice(s![.., h_n..2 * h_n]);
        let g = z.slice(s![.., 2 * h_n..3 * h_n]);
        let o = z.slice(s![.., 3 * h_n..]);
        let c_new = &f * &c + &i * &g;
        let h_new = &o * &c_new.mapv(f64::tanh);
        if keep {
            steps.push(LstmStep {
                x: x.clone(),
                h_prev: h.clone(),
                c_prev: c.clone(),
                gates: z.clone(),
                c: c_new.clone(),
            });
        }
        h = h_new;
        c = c_new;
        hs.push(h.clone());
    }
    let out = if layer.return_sequences {
        hs
    } else {
        vec![hs.pop().unwrap()]
    };
    (out, steps)
}

/// Forward cache for one layer.
#[derive(Debug, Clone)]
enum LayerCache {
    Dense {
        /// stacked `(T B) x in`
        x: Array2<f64>,
        y: Array2<f64>,
        steps: usize,
    },
    Lstm {
        steps: Vec<LstmStep>,
    },
}

/// Recorded forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    caches: Vec<LayerCache>,
}

impl Tape {
    pub fn is_empty(&self) -> bool {
        self.caches.is_empty()
    }
}

fn stack(seq: &[Array2<f64>]) -> Array2<f64> {
    if seq.len() == 1 {
        return seq[0].clone();
    }
    let views: Vec<_> = seq.iter().map(|a| a.view()).collect();
    concatenate(Axis(0), &views).unwrap()
}

fn unstack(m: Array2<f64>, steps: usize) -> Seq {
    if steps == 1 {
        return vec![m];
    }
    let b = m.nrows() / steps;
    (0..steps)
        .map(|t| m.slice(s![t * b..(t + 1) * b, ..]).to_owned())
        .collect()
}

/// Stack of layers. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self, NeuralError> {
        for w in specs.windows(2) {
            if w[0].output() != w[1].input() {
                return Err(NeuralError::Shape {
                    expected: w[0].output(),
                    got: w[1].input(),
                });
            }
        }
        Ok(Self {
            layers: specs.iter().map(|s| Layer::new(*s, rng)).collect(),
        })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec().input()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().spec().output()
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn zeros_like(&self) -> Network {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &Network) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|x| x.is_finite()))
    }

    /// Sets the last layer's weights and biases to zero.
    pub fn zero_output_layer(&mut self) {
        if let Some(last) = self.layers.last_mut() {
            for p in last.params_mut() {
                p.fill(0.0);
            }
        }
    }

    fn check_input(&self, xs: &[Array2<f64>]) -> Result<(), NeuralError> {
        let first = xs.first().ok_or(NeuralError::EmptySequence)?;
        let (b, w) = first.dim();
        let expected = self.input_width();
        for x in xs {
            if x.ncols() != expected {
                return Err(NeuralError::Shape {
                    expected,
                    got: x.ncols(),
                });
            }
            if x.nrows() != b {
                return Err(NeuralError::Shape {
                    expected: b,
                    got: x.nrows(),
                });
            }
        }
        let _ = w;
        Ok(())
    }

    fn run(&self, xs: &[Array2<f64>], mut tape: Option<&mut Tape>) -> Result<Array2<f64>, NeuralError> {
        self.check_input(xs)?;
        if let Some(t) = tape.as_deref_mut() {
            t.caches.clear();
        }
        let mut cur: Seq = xs.to_vec();
        for layer in &self.layers {
            cur = match layer {
                Layer::Dense(d) => {
                    let steps = cur.len();
                    let x = stack(&cur);
                    let y = dense_batch(d, x.view());
                    let out = unstack(y.clone(), steps);
                    if let Some(t) = tape.as_deref_mut() {
                        t.caches.push(LayerCache::Dense { x, y, steps });
                    }
                    out
                }
                Layer::Lstm(l) => {
                    let (out, steps) = lstm_run(l, &cur, tape.is_some());
                    if let Some(t) = tape.as_deref_mut() {
                        t.caches.push(LayerCache::Lstm { steps });
                    }
                    out
                }
            };
        }
        Ok(cur.pop().unwrap())
    }

    /// Output at the last timestep, `B x out`.
    pub fn forward(&self, xs: &[Array2<f64>]) -> Result<Array2<f64>, NeuralError> {
        self.run(xs, None)
    }

    pub fn forward_tape(&self, xs: &[Array2<f64>], tape: &mut Tape) -> Result<Array2<f64>, NeuralError> {
        self.run(xs, Some(tape))
    }

    /// Gradients of a loss whose derivative with respect to the final output
    /// is `d_out` (`B x out`). Consumes the tape.
    pub fn backward(&self, tape: &mut Tape, d_out: &Array2<f64>) -> Result<Network, NeuralError> {
        if tape.caches.len() != self.layers.len() {
            return Err(NeuralError::NoForwardCache);
        }
        let caches = std::mem::take(&mut tape.caches);
        let mut grads = Vec::with_capacity(self.layers.len());
        // gradient flowing into each layer's output sequence; only the last
        // timestep of the final layer receives loss gradient
        let mut d_seq: Seq = vec![d_out.clone()];
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            match (layer, cache) {
                (Layer::Dense(d), LayerCache::Dense { x, y, steps }) => {
                    let mut dy = if d_seq.len() == steps {
                        stack(&d_seq)
                    } else {
                        // only the last step carries gradient
                        let mut full = Array2::zeros(y.dim());
                        let b = y.nrows() / steps;
                        full.slice_mut(s![(steps - 1) * b.., ..]).assign(&d_seq[0]);
                        full
                    };
                    d.activation.backprop(&mut dy, &y);
                    let gw = dy.t().dot(&x);
                    let gb = dy.sum_axis(Axis(0));
                    let dx = dy.dot(&d.weight);
                    d_seq = unstack(dx, steps);
                    grads.push(Layer::Dense(DenseLayer {
                        weight: gw,
                        bias: gb,
                        activation: d.activation,
                    }));
                }
                (Layer::Lstm(l), LayerCache::Lstm { steps }) => {
                    let (g, dx) = lstm_backward(l, &steps, &d_seq);
                    d_seq = dx;
                    grads.push(Layer::Lstm(g));
                }
                _ => return Err(NeuralError::NoForwardCache),
            }
        }
        grads.reverse();
        Ok(Network { layers: grads })
    }
}

fn lstm_backward(layer: &LstmLayer, steps: &[LstmStep], d_seq: &[Array2<f64>]) -> (LstmLayer, Seq) {
    let h_n = layer.hidden();
    let t_n = steps.len();
    let b = steps[0].x.nrows();
    let mut gwx = Array2::<f64>::zeros(layer.w_input.dim());
    let mut gwh = Array2::<f64>::zeros(layer.w_hidden.dim());
    let mut gb = Array1::<f64>::zeros(layer.bias.len());
    let mut dh_next = Array2::<f64>::zeros((b, h_n));
    let mut dc_next = Array2::<f64>::zeros((b, h_n));
    let mut dxs = vec![Array2::<f64>::zeros((0, 0)); t_n];
    for t in (0..t_n).rev() {
        let st = &steps[t];
        let mut dh = dh_next;
        if layer.return_sequences {
            dh += &d_seq[t];
        } else if t == t_n - 1 {
            dh += &d_seq[0];
        }
        let gates = &st.gates;
        let i = gates.slice(s![.., 0..h_n]);
        let f = gates.slice(s![.., h_n..2 * h_n]);
        let g = gates.slice(s![.., 2 * h_n..3 * h_n]);
        let o = gates.slice(s![.., 3 * h_n..]);
        let tc = st.c.mapv(f64::tanh);
        let mut dz = Array2::<f64>::zeros((b, 4 * h_n));
        let mut dc = dc_next;
        Zip::from(&mut dc)
            .and(&dh)
            .and(&o)
            .and(&tc)
            .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
        Zip::from(dz.slice_mut(s![.., 3 * h_n..]))
            .and(&dh)
            .and(&tc)
            .and(&o)
            .for_each(|dz, &dh, &tc, &o| *dz = dh * tc * o * (1.0 - o));
        Zip::from(dz.slice_mut(s![.., 0..h_n]))
            .and(&dc)
            .and(&g)
            .and(&i)
            .for_each(|dz, &dc, &g, &i| *dz = dc * g * i * (1.0 - i));
        Zip::from(dz.slice_mut(s![.., h_n..2 * h_n]))
            .and(&dc)
            .and(&st.c_prev)
            .and(&f)
            .for_each(|dz, &dc, &cp, &f| *dz = dc * cp * f * (1.0 - f));
        Zip::from(dz.slice_mut(s![.., 2 * h_n..3 * h_n]))
            .and(&dc)
            .and(&i)
            .and(&g)
            .for_each(|dz, &dc, &i, &g| *dz = dc * i * (1.0 - g * g));
        dc_next = &dc * &f;
        gwx += &dz.t().dot(&st.x);
        gwh += &dz.t().dot(&st.h_prev);
        gb += &dz.sum_axis(Axis(0));
        dxs[t] = dz.dot(&layer.w_input);
        dh_next = dz.dot(&layer.w_hidden);
    }
    (
        LstmLayer {
            w_input: gwx,
            w_hidden: gwh,
            bias: gb,
            return_sequences: layer.return_sequences,
        },
        dxs,
    )
}

/// `1/2 eps^T C^-1 eps + 1/2 log|C|` with `C = diag(sigma^2)`.
pub fn nll_loss(eps: [f64; 2], sigma: [f64; 2]) -> Result<f64, NeuralError> {
    let mut l = 0.0;
    for c in 0..2 {
        if !(sigma[c] > 0.0) {
            return Err(NeuralError::NonPositiveSigma(sigma[c]));
        }
        l += 0.5 * eps[c] * eps[c] / (sigma[c] * sigma[c]) + sigma[c].ln();
    }
    Ok(l)
}

/// Mean NLL of raw outputs `(mu_x, mu_y, log sigma_x, log sigma_y)` against
/// `targets`, plus its gradient with respect to the outputs.
///
/// `scale` divides the loss and gradient instead of the batch size, so that
/// chunks of one minibatch can be summed.
pub fn gaussian_nll(outputs: &Array2<f64>, targets: &Array2<f64>, scale: f64) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(outputs.dim());
    let mut loss = 0.0;
    for ((o, t), mut g) in outputs
        .outer_iter()
        .zip(targets.outer_iter())
        .zip(grad.outer_iter_mut())
    {
        for c in 0..2 {
            let eps = t[c] - o[c];
            let ls = o[2 + c];
            let w = (-2.0 * ls).exp();
            loss += 0.5 * eps * eps * w + ls;
            g[c] = -eps * w / scale;
            g[2 + c] = (1.0 - eps * eps * w) / scale;
        }
    }
    (loss / scale, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, net: &Network) -> Self {
        let shapes: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            config,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    /// Rate used by the next update.
    pub fn current_rate(&self) -> f64 {
        self.config.learning_rate / (1.0 + self.config.decay * self.step as f64)
    }

    pub fn step(&mut self, net: &mut Network, grads: &Network) -> Result<(), NeuralError> {
        let gs = grads.params();
        let ps = net.params_mut();
        if gs.len() != ps.len() || gs.len() != self.m.len() {
            return Err(NeuralError::Shape {
                expected: self.m.len(),
                got: gs.len(),
            });
        }
        for ((p, g), m) in ps.iter().zip(&gs).zip(&self.m) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(NeuralError::Shape {
                    expected: m.len(),
                    got: g.len(),
                });
            }
        }
        let c = self.config;
        let lr = self.current_rate();
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.len() {
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                p[k] -= lr * mh / (vh.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

const MAGIC: &[u8; 4] = b"FPNN";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    layers: Vec<LayerSpec>,
    meta: serde_json::Value,
}

impl Network {
    /// `FPNN`, version, JSON header length and header, then parameters as
    /// little-endian f64 in layer order.
    pub fn to_bytes(&self, meta: &serde_json::Value) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            layers: self.specs(),
            meta: meta.clone(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.n_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.params() {
            for x in p {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Network, serde_json::Value), NeuralError> {
        let bad = |m: &str| NeuralError::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[0..4] != MAGIC {
            return Err(bad("not a network checkpoint"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| bad(&format!("header: {e}")))?;
        let mut net = Network::new(&header.layers, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))
            .map_err(|e| bad(&e.to_string()))?;
        let mut data = &bytes[12 + hlen..];
        if data.len() != 8 * net.n_params() {
            return Err(bad(&format!(
                "expected {} parameters, found {} bytes",
                net.n_params(),
                data.len()
            )));
        }
        for p in net.params_mut() {
            for x in p.iter_mut() {
                *x = f64::from_le_bytes(data[..8].try_into().unwrap());
                data = &data[8..];
            }
        }
        Ok((net, header.meta))
    }

    pub fn save(&self, path: &Path, meta: &serde_json::Value) -> Result<(), NeuralError> {
        let io = |e: std::io::Error| NeuralError::Checkpoint(format!("{}: {e}", path.display()));
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes(meta)).map_err(io)
    }

    pub fn load(path: &Path) -> Result<(Network, serde_json::Value), NeuralError> {
        let io = |e: std::io::Error| NeuralError::Checkpoint(format!("{}: {e}", path.display()));
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .map_err(io)?
            .read_to_end(&mut buf)
            .map_err(io)?;
        Self::from_bytes(&buf)
    }
}
