//! The recurrent interaction model: pair state vectors, training samples,
//! training, and one-step Gaussian acceleration prediction.
//!
//! The network works in normalized units (lengths divided by the arena
//! radius, time in seconds). [`DliModel::predict`] takes and returns cm.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, NeuralError};
use crate::exec::Exec;
use crate::geometry::{AgentState, ArenaSpec, SystemState, Vec2};
use crate::neural::{gaussian_nll, Activation, AdamConfig, AdamState, LayerSpec, Network, Seq, Tape};
use crate::rng;
use crate::trajectory::Trajectory;

/// Width of one pair state vector.
pub const STATE_WIDTH: usize = 11;
/// States per input window.
pub const HISTORY: usize = 5;
pub const DEFAULT_HIDDEN: usize = 128;

/// `[x_i, y_i, vx_i, vy_i, rw_i, x_j, y_j, vx_j, vy_j, rw_j, d_ij]` in
/// units of the arena radius.
pub fn build_state_vector(
    state: &SystemState,
    radius: f64,
) -> Result<[f64; STATE_WIDTH], ModelError> {
    let f = &state.focal;
    let n = &state.neighbor;
    let v = [
        f.position.x,
        f.position.y,
        f.velocity.x,
        f.velocity.y,
        f.wall_distance,
        n.position.x,
        n.position.y,
        n.velocity.x,
        n.velocity.y,
        n.wall_distance,
        state.distance,
    ]
    .map(|x| x / radius);
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(ModelError::NonFiniteState(k));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Two LSTM blocks over a 5-state window.
    Dli,
    /// Dense-only ablation that sees only the last state.
    Mli,
}

impl Architecture {
    pub fn window(self) -> usize {
        match self {
            Architecture::Dli => HISTORY,
            Architecture::Mli => 1,
        }
    }

    pub fn specs(self, hidden: usize) -> Vec<LayerSpec> {
        use Activation::*;
        let dense = |input, output, activation| LayerSpec::Dense {
            input,
            output,
            activation,
        };
        match self {
            Architecture::Dli => vec![
                LayerSpec::Lstm {
                    input: STATE_WIDTH,
                    hidden,
                    return_sequences: true,
                },
                dense(hidden, 64, Relu),
                dense(64, 64, Tanh),
                LayerSpec::Lstm {
                    input: 64,
                    hidden,
                    return_sequences: false,
                },
                dense(hidden, 64, Relu),
                dense(64, 64, Tanh),
                dense(64, 4, None),
            ],
            Architecture::Mli => vec![
                dense(STATE_WIDTH, hidden, Relu),
                dense(hidden, 64, Relu),
                dense(64, 64, Tanh),
                dense(64, hidden, Relu),
                dense(hidden, 64, Relu),
                dense(64, 64, Tanh),
                dense(64, 4, None),
            ],
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dli" => Ok(Architecture::Dli),
            "mli" => Ok(Architecture::Mli),
            _ => Err(format!("unknown architecture {s:?} (expected dli or mli)")),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Dli => "dli",
            Architecture::Mli => "mli",
        })
    }
}

/// Mean and standard deviation of the next acceleration, cm/s^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAccelPrediction {
    pub mu: Vec2,
    pub sigma: Vec2,
}

/// Flattened samples: `inputs` holds `HISTORY * STATE_WIDTH` values per
/// sample (oldest state first), `targets` two accelerations per sample, all
/// normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// Segments too short to yield any sample.
    pub skipped_segments: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, k: usize) -> &[f64] {
        let w = HISTORY * STATE_WIDTH;
        &self.inputs[k * w..(k + 1) * w]
    }

    pub fn target(&self, k: usize) -> [f64; 2] {
        [self.targets[2 * k], self.targets[2 * k + 1]]
    }

    pub fn extend(&mut self, other: &SampleSet) {
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
        self.skipped_segments += other.skipped_segments;
    }
}

/// One sample per focal agent per tick whose window and target lie in one
/// segment. Pairs only; the first agent is `i`, the second `j`.
pub fn make_samples(traj: &Trajectory) -> SampleSet {
    let arena = &traj.arena;
    let dt = arena.dt;
    let r = arena.radius;
    let mut out = SampleSet::default();
    for seg in &traj.segments {
        let n = seg.len();
        // velocity from frame 1, window of HISTORY states, one frame for the target
        if seg.n_agents() != 2 || n < HISTORY + 2 {
            out.skipped_segments += 1;
            continue;
        }
        let states: Vec<[AgentState; 2]> = (1..n)
            .map(|k| {
                [0, 1].map(|a| seg.agent_state(arena, a, k).expect("frame >= 1"))
            })
            .collect();
        for focal in 0..2 {
            let other = 1 - focal;
            for last in HISTORY..n - 1 {
                let mut ok = true;
                let start = out.inputs.len();
                for k in last + 1 - HISTORY..=last {
                    let s = &states[k - 1];
                    match build_state_vector(&SystemState::new(s[focal], s[other]), r) {
                        Ok(v) => out.inputs.extend_from_slice(&v),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                let a = (states[last][focal].velocity - states[last - 1][focal].velocity) / dt / r;
                if !ok || !a.is_finite() {
                    out.inputs.truncate(start);
                    continue;
                }
                out.targets.push(a.x);
                out.targets.push(a.y);
            }
        }
    }
    out
}

/// Trained or freshly initialized interaction model.
#[derive(Debug, Clone, PartialEq)]
pub struct DliModel {
    pub architecture: Architecture,
    pub hidden: usize,
    pub radius: f64,
    pub net: Network,
}

impl DliModel {
    pub fn new(architecture: Architecture, hidden: usize, arena: &ArenaSpec, seed: u64) -> Self {
        let mut r = rng::stream(seed, "init", 0);
        let net = Network::new(&architecture.specs(hidden), &mut r).expect("consistent topology");
        Self {
            architecture,
            hidden,
            radius: arena.radius,
            net,
        }
    }

    pub fn window(&self) -> usize {
        self.architecture.window()
    }

    /// Raw outputs for `n` flattened windows of `window * STATE_WIDTH` values.
    pub fn forward_rows(&self, rows: &[f64], n: usize) -> Result<Array2<f64>, ModelError> {
        Ok(self.net.forward(&self.batch(rows, n, self.window()))?)
    }

    fn batch(&self, rows: &[f64], n: usize, stride_states: usize) -> Seq {
        let w = self.window();
        let skip = stride_states - w;
        (0..w)
            .map(|t| {
                Array2::from_shape_fn((n, STATE_WIDTH), |(b, c)| {
                    rows[(b * stride_states + skip + t) * STATE_WIDTH + c]
                })
            })
            .collect()
    }

    fn sample_batch(&self, set: &SampleSet, idx: &[usize]) -> (Seq, Array2<f64>) {
        let stride = HISTORY * STATE_WIDTH;
        let w = self.window();
        let skip = HISTORY - w;
        let xs = (0..w)
            .map(|t| {
                Array2::from_shape_fn((idx.len(), STATE_WIDTH), |(b, c)| {
                    set.inputs[idx[b] * stride + (skip + t) * STATE_WIDTH + c]
                })
            })
            .collect();
        let y = Array2::from_shape_fn((idx.len(), 2), |(b, c)| set.targets[2 * idx[b] + c]);
        (xs, y)
    }

    fn decode(&self, out: &Array2<f64>) -> Vec<GaussianAccelPrediction> {
        out.outer_iter()
            .map(|o| GaussianAccelPrediction {
                mu: Vec2::new(o[0], o[1]) * self.radius,
                sigma: Vec2::new(o[2].exp(), o[3].exp()) * self.radius,
            })
            .collect()
    }

    /// Prediction from exactly `window()` states, oldest first, in cm.
    pub fn predict(&self, window: &[SystemState]) -> Result<GaussianAccelPrediction, ModelError> {
        if window.len() != self.window() {
            return Err(ModelError::WindowLength {
                expected: self.window(),
                got: window.len(),
            });
        }
        let mut rows = Vec::with_capacity(window.len() * STATE_WIDTH);
        for s in window {
            rows.extend_from_slice(&build_state_vector(s, self.radius)?);
        }
        Ok(self.predict_rows(&rows, 1)?[0])
    }

    /// Batched prediction on normalized rows of `window() * STATE_WIDTH`.
    pub fn predict_rows(&self, rows: &[f64], n: usize) -> Result<Vec<GaussianAccelPrediction>, ModelError> {
        let expected = n * self.window() * STATE_WIDTH;
        if rows.len() != expected {
            return Err(NeuralError::Shape {
                expected,
                got: rows.len(),
            }
            .into());
        }
        Ok(self.decode(&self.forward_rows(rows, n)?))
    }

    /// Mean NLL over a sample set.
    pub fn evaluate(&self, set: &SampleSet, exec: Exec) -> Result<f64, ModelError> {
        if set.is_empty() {
            return Err(ModelError::EmptySet("evaluation"));
        }
        let chunks = chunk_ranges(set.len(), EVAL_CHUNK);
        let parts = exec.map(&chunks, |&(a, b)| -> Result<f64, NeuralError> {
            let idx: Vec<usize> = (a..b).collect();
            let (xs, y) = self.sample_batch(set, &idx);
            let out = self.net.forward(&xs)?;
            Ok(gaussian_nll(&out, &y, 1.0).0)
        });
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total / set.len() as f64)
    }

    pub fn metadata(&self, extra: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "architecture": self.architecture,
            "hidden": self.hidden,
            "window": self.window(),
            "radius": self.radius,
            "training": extra,
        })
    }

    pub fn to_bytes(&self, extra: serde_json::Value) -> Vec<u8> {
        self.net.to_bytes(&self.metadata(extra))
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<(), ModelError> {
        Ok(self.net.save(path, &self.metadata(extra))?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(DliModel, serde_json::Value), ModelError> {
        let (net, meta) = Network::from_bytes(bytes)?;
        #[derive(Deserialize)]
        struct Meta {
            architecture: Architecture,
            hidden: usize,
            radius: f64,
            #[serde(default)]
            training: serde_json::Value,
        }
        let m: Meta = serde_json::from_value(meta)
            .map_err(|e| NeuralError::Checkpoint(format!("model metadata: {e}")))?;
        if net.specs() != m.architecture.specs(m.hidden) {
            return Err(NeuralError::Checkpoint(format!(
                "layer stack does not match the {} topology with hidden width {}",
                m.architecture, m.hidden
            ))
            .into());
        }
        Ok((
            DliModel {
                architecture: m.architecture,
                hidden: m.hidden,
                radius: m.radius,
                net,
            },
            m.training,
        ))
    }

    pub fn load(path: &Path) -> Result<(DliModel, serde_json::Value), ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

const EVAL_CHUNK: usize = 256;

fn chunk_ranges(n: usize, chunk: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(chunk).map(|a| (a, (a + chunk).min(n))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Samples per gradient work unit inside a minibatch.
    pub chunk: usize,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 45,
            batch_size: 512,
            seed: 0,
            adam: AdamConfig::default(),
            chunk: 64,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: DliModel,
    /// Lowest validation NLL; equals `last` when no epoch ran.
    pub best: DliModel,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

pub fn write_training_log<W: Write>(history: &[EpochRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_nll", "val_nll"])?;
    for r in history {
        w.write_record([r.epoch.to_string(), r.train_nll.to_string(), r.val_nll.to_string()])?;
    }
    w.flush()
}

/// Minibatch Adam on the Gaussian NLL with seeded shuffling; gradients of
/// fixed-size chunks are reduced in order, so results do not depend on the
/// thread count.
pub fn train(
    model: DliModel,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptySet("validation"));
    }
    let mut model = model;
    let mut adam = AdamState::new(cfg.adam, &model.net);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = model.clone();
    let mut best_epoch = None;
    let mut best_val = f64::INFINITY;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut last_finite = f64::NAN;
    for epoch in 1..=cfg.epochs {
        let mut shuffle = rng::stream(cfg.seed, "shuffle", epoch as u64);
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let scale = batch.len() as f64;
            let chunks: Vec<&[usize]> = batch.chunks(cfg.chunk.max(1)).collect();
            let parts = cfg.exec.map(&chunks, |idx| -> Result<(f64, Network), NeuralError> {
                let (xs, y) = model.sample_batch(train_set, idx);
                let mut tape = Tape::default();
                let out = model.net.forward_tape(&xs, &mut tape)?;
                let (loss, d) = gaussian_nll(&out, &y, scale);
                Ok((loss, model.net.backward(&mut tape, &d)?))
            });
            let mut loss = 0.0;
            let mut grads: Option<Network> = None;
            for p in parts {
                let (l, g) = p?;
                loss += l;
                match grads.as_mut() {
                    Some(acc) => acc.add_assign(&g),
                    None => grads = Some(g),
                }
            }
            let grads = grads.expect("non-empty batch");
            if !loss.is_finite() || !grads.all_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    last: last_finite,
                });
            }
            adam.step(&mut model.net, &grads)?;
            epoch_loss += loss * scale;
        }
        let train_nll = epoch_loss / train_set.len() as f64;
        last_finite = train_nll;
        let val_nll = model.evaluate(val_set, cfg.exec)?;
        if !val_nll.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                last: last_finite,
            });
        }
        let rec = EpochRecord {
            epoch,
            train_nll,
            val_nll,
        };
        progress(&rec);
        history.push(rec);
        if val_nll < best_val {
            best_val = val_nll;
            best = model.clone();
            best_epoch = Some(epoch);
        }
    }
    Ok(TrainOutcome {
        last: model,
        best,
        best_epoch,
        history,
    })
}
