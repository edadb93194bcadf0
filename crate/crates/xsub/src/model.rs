//! A small feed-forward classifier (ReLU hidden layers, softmax output),
//! deterministic mini-batch SGD training, and the black-box query facade
//! with its exact query counter.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::core::{RngStream, Sample, Tensor};
use crate::data::{Dataset, Split};
use crate::error::{Result, XsubError};

const CHECKPOINT_MAGIC: &[u8; 8] = b"XSUBMDL\x01";

/// One dense layer: `rows x cols` weights (row-major) plus a bias per row.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl Layer {
    fn matvec(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.b[r];
            for (wv, iv) in row.iter().zip(input) {
                acc += wv * iv;
            }
            out.push(acc);
        }
    }
}

/// A trained feed-forward classifier. Frozen after training; `predict` and
/// the raw probability accessors are safe for concurrent callers.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    input_shape: Vec<usize>,
    dims: Vec<usize>,
    layers: Vec<Layer>,
}

/// Training hyperparameters for plain mini-batch SGD.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 10,
            batch_size: 32,
            hidden_width: 64,
            seed: 0,
        }
    }
}

/// Counts of user-visible black-box queries. One log per worker; merge by
/// addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLog {
    pub predict_count: u64,
    pub explain_count: u64,
}

impl QueryLog {
    pub fn merge(&mut self, other: &QueryLog) {
        self.predict_count += other.predict_count;
        self.explain_count += other.explain_count;
    }
}

/// Output of one counted black-box prediction query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: usize,
}

impl Classifier {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn classes(&self) -> usize {
        *self.dims.last().expect("classifier has layers")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Fresh classifier with uniform `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`
    /// weights from the `"init"` stream and zero biases.
    pub fn init(input_shape: Vec<usize>, dims: Vec<usize>, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(XsubError::invalid("need at least input and output dims"));
        }
        let features: usize = input_shape.iter().product();
        if features != dims[0] {
            return Err(XsubError::invalid(format!(
                "input shape {:?} has {} features but first dim is {}",
                input_shape, features, dims[0]
            )));
        }
        let mut rng = RngStream::new(seed, "init").rng();
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for win in dims.windows(2) {
            let (cols, rows) = (win[0], win[1]);
            let bound = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols)
                .map(|_| rand::Rng::random_range(&mut rng, -bound..=bound))
                .collect();
            layers.push(Layer {
                rows,
                cols,
                w,
                b: vec![0.0; rows],
            });
        }
        Ok(Classifier {
            input_shape,
            dims,
            layers,
        })
    }

    /// All-zero parameters; useful for degenerate-case tests.
    pub fn zeroed(input_shape: Vec<usize>, dims: Vec<usize>) -> Result<Self> {
        let mut c = Classifier::init(input_shape, dims, 0)?;
        for layer in &mut c.layers {
            layer.w.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(c)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(XsubError::invalid(format!(
                "input shape {:?} does not match classifier input {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Class probabilities without query accounting. This is the in-process
    /// evaluation path; attackers go through [`predict`].
    pub fn probs(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, activations) = self.forward(x.values());
        Ok(activations.last().expect("output layer").clone())
    }

    /// Probability of one class; the value function explainers perturb.
    pub fn class_prob(&self, x: &Tensor, class: usize) -> Result<f64> {
        let p = self.probs(x)?;
        p.get(class).copied().ok_or_else(|| {
            XsubError::invalid(format!("class {} out of range ({})", class, p.len()))
        })
    }

    /// Post-ReLU activations of the last hidden layer (the layer the
    /// defense inspects).
    pub fn penultimate(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, mut activations) = self.forward(x.values());
        activations.pop();
        Ok(activations.pop().expect("at least one hidden layer"))
    }

    /// Argmax label with ties broken by ascending index.
    pub fn label_of(probs: &[f64]) -> usize {
        let mut best = 0;
        for (i, p) in probs.iter().enumerate().skip(1) {
            if *p > probs[best] {
                best = i;
            }
        }
        best
    }

    /// Uncounted predicted label; evaluation helper.
    pub fn predict_label(&self, x: &Tensor) -> Result<usize> {
        Ok(Self::label_of(&self.probs(x)?))
    }

    /// Forward pass returning pre-activations and activations per layer.
    /// `activations[0]` is the input; the final activation is the softmax.
    fn forward(&self, input: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let mut z = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.matvec(activations.last().expect("input present"), &mut z);
            pre.push(z.clone());
            let a = if li + 1 == self.layers.len() {
                softmax(&z)
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            activations.push(a);
        }
        (pre, activations)
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(XsubError::invalid("loss needs a non-empty batch"));
        }
        let mut total = 0.0;
        for s in batch {
            let p = self.probs(&s.data)?;
            total -= p[s.label].max(1e-300).ln();
        }
        Ok(total / batch.len() as f64)
    }

    /// Batch-mean parameter gradients of the cross-entropy loss.
    pub fn gradients(&self, batch: &[Sample]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if batch.is_empty() {
            return Err(XsubError::invalid("gradients need a non-empty batch"));
        }
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        let scale = 1.0 / batch.len() as f64;
        for s in batch {
            self.check_input(&s.data)?;
            let (pre, activations) = self.forward(s.data.values());
            // softmax + cross-entropy: delta at output is p - onehot(y)
            let mut delta: Vec<f64> = activations.last().expect("output").clone();
            delta[s.label] -= 1.0;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &activations[li];
                let (dw, db) = &mut grads[li];
                for r in 0..layer.rows {
                    let d = delta[r] * scale;
                    db[r] += d;
                    let row = &mut dw[r * layer.cols..(r + 1) * layer.cols];
                    for (g, iv) in row.iter_mut().zip(input) {
                        *g += d * iv;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.cols];
                    for r in 0..layer.rows {
                        let d = delta[r];
                        let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                        for (p, wv) in prev.iter_mut().zip(row) {
                            *p += d * wv;
                        }
                    }
                    for (p, z) in prev.iter_mut().zip(&pre[li - 1]) {
                        if *z <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok(grads)
    }

    fn sgd_step(&mut self, grads: &[(Vec<f64>, Vec<f64>)], lr: f64) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(grads) {
            for (w, g) in layer.w.iter_mut().zip(dw) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
    }

    /// Flat view of all parameters; checkpoint order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Overwrite one parameter in [`Self::parameters`] order; supports
    /// finite-difference gradient checks.
    pub fn set_parameter(&mut self, index: usize, value: f64) {
        let mut i = index;
        for l in &mut self.layers {
            if i < l.w.len() {
                l.w[i] = value;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = value;
                return;
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// Write a versioned binary checkpoint; parameters round-trip bit-exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.write_u32::<LittleEndian>(self.input_shape.len() as u32)?;
        for d in &self.input_shape {
            buf.write_u32::<LittleEndian>(*d as u32)?;
        }
        buf.write_u32::<LittleEndian>(self.dims.len() as u32)?;
        for d in &self.dims {
            buf.write_u32::<LittleEndian>(*d as u32)?;
        }
        for l in &self.layers {
            for v in l.w.iter().chain(l.b.iter()) {
                buf.write_u64::<LittleEndian>(v.to_bits())?;
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic)
            .map_err(|_| XsubError::format(format!("{}: truncated checkpoint", path.display())))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(XsubError::format(format!(
                "{}: not a model checkpoint",
                path.display()
            )));
        }
        let read_dims = |cur: &mut Cursor<Vec<u8>>| -> Result<Vec<usize>> {
            let n = cur.read_u32::<LittleEndian>().map_err(|_| {
                XsubError::format(format!("{}: truncated checkpoint", path.display()))
            })? as usize;
            (0..n)
                .map(|_| {
                    cur.read_u32::<LittleEndian>().map(|v| v as usize).map_err(|_| {
                        XsubError::format(format!("{}: truncated checkpoint", path.display()))
                    })
                })
                .collect()
        };
        let input_shape = read_dims(&mut cur)?;
        let dims = read_dims(&mut cur)?;
        if dims.len() < 2 {
            return Err(XsubError::format(format!(
                "{}: checkpoint has no layers",
                path.display()
            )));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for win in dims.windows(2) {
            let (cols, rows) = (win[0], win[1]);
            let mut read_vec = |n: usize| -> Result<Vec<f64>> {
                (0..n)
                    .map(|_| {
                        cur.read_u64::<LittleEndian>().map(f64::from_bits).map_err(|_| {
                            XsubError::format(format!(
                                "{}: truncated checkpoint",
                                path.display()
                            ))
                        })
                    })
                    .collect()
            };
            let w = read_vec(rows * cols)?;
            let b = read_vec(rows)?;
            layers.push(Layer { rows, cols, w, b });
        }
        Ok(Classifier {
            input_shape,
            dims,
            layers,
        })
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Fit a classifier with deterministic mini-batch SGD. Identical configs
/// (including the seed) produce bit-identical parameters.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<Classifier> {
    if dataset.is_empty() {
        return Err(XsubError::invalid("training set is empty"));
    }
    if dataset.split != Split::Train {
        return Err(XsubError::invalid("train() expects a train-split dataset"));
    }
    if cfg.epochs == 0 {
        return Err(XsubError::invalid("epochs must be >= 1"));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(XsubError::invalid("learning rate must be > 0"));
    }
    if cfg.batch_size == 0 {
        return Err(XsubError::invalid("batch size must be >= 1"));
    }
    let d = dataset.descriptor.feature_count();
    let dims = vec![d, cfg.hidden_width, dataset.descriptor.classes];
    let mut model = Classifier::init(dataset.descriptor.shape.clone(), dims, cfg.seed)?;
    let mut shuffle_rng = RngStream::new(cfg.seed, "train").rng();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset.samples[i].clone()));
            let grads = model.gradients(&batch)?;
            model.sgd_step(&grads, cfg.learning_rate);
            epoch_loss += model.loss(&batch)?;
            batches += 1.0;
        }
        if !(epoch_loss / batches).is_finite() {
            return Err(XsubError::Training(format!(
                "loss diverged at epoch {_epoch}"
            )));
        }
    }
    Ok(model)
}

/// Counted black-box prediction query: one `predict_count` increment per call.
pub fn predict(f: &Classifier, x: &Tensor, log: &mut QueryLog) -> Result<Prediction> {
    let probs = f.probs(x)?;
    log.predict_count += 1;
    let label = Classifier::label_of(&probs);
    Ok(Prediction { probs, label })
}

/// Samples the clean model classifies correctly, in input order. Evaluation
/// plumbing; does not touch any query log.
pub fn filter_correct(f: &Classifier, samples: &[Sample]) -> Result<Vec<Sample>> {
    let mut keep = Vec::new();
    for s in samples {
        if f.predict_label(&s.data)? == s.label {
            keep.push(s.clone());
        }
    }
    Ok(keep)
}
