//! Shapley-value feature attributions: an exact enumeration oracle for small
//! feature counts, a kernel-weighted least-squares estimator for larger
//! inputs, and per-pixel channel aggregation.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::core::{RngStream, Tensor};
use crate::data::Dataset;
use crate::error::{Result, XsubError};
use crate::model::{Classifier, QueryLog};

/// Maximum feature count for exact coalition enumeration.
pub const EXACT_FEATURE_LIMIT: usize = 20;

const RIDGE: f64 = 1e-8;

/// Anything that can score "probability of `class`" for an input. The
/// explainers only ever see this surface, so toy models in tests and the
/// trained classifier are interchangeable.
pub trait ScoreModel {
    fn class_score(&self, x: &Tensor, class: usize) -> Result<f64>;
}

impl ScoreModel for Classifier {
    fn class_score(&self, x: &Tensor, class: usize) -> Result<f64> {
        self.class_prob(x, class)
    }
}

/// A closure as a [`ScoreModel`]; ignores the class argument.
pub struct FnModel<F: Fn(&Tensor) -> f64>(pub F);

impl<F: Fn(&Tensor) -> f64> ScoreModel for FnModel<F> {
    fn class_score(&self, x: &Tensor, _class: usize) -> Result<f64> {
        Ok((self.0)(x))
    }
}

/// Per-feature attribution values for one sample and one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationVector {
    pub values: Vec<f64>,
    pub class: usize,
    /// Expected model output over the background (the attribution baseline).
    pub base_value: f64,
}

impl ExplanationVector {
    /// `f_class(x) - base_value - sum(values)`; zero when efficiency holds.
    pub fn efficiency_gap(&self, fx: f64) -> f64 {
        fx - self.base_value - self.values.iter().sum::<f64>()
    }
}

/// Structured-text export of an explanation for harness consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub class: usize,
    pub base_value: f64,
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
}

impl ExplanationRecord {
    pub fn new(ev: &ExplanationVector, shape: &[usize]) -> Self {
        ExplanationRecord {
            class: ev.class,
            base_value: ev.base_value,
            values: ev.values.clone(),
            shape: shape.to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("explanation record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| XsubError::format(format!("bad explanation record: {e}")))
    }
}

/// Reference samples defining "feature absent": masked features take the
/// background's values, and the game value averages over the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    samples: Vec<Tensor>,
}

impl Background {
    pub fn new(samples: Vec<Tensor>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| XsubError::invalid("background must be non-empty"))?;
        if !samples.iter().all(|s| s.shape() == first.shape()) {
            return Err(XsubError::invalid("background shapes must match"));
        }
        Ok(Background { samples })
    }

    /// Uniform draw without replacement from a dataset (stream `"background"`).
    pub fn from_dataset(ds: &Dataset, size: usize, seed: u64) -> Result<Self> {
        if ds.is_empty() || size == 0 {
            return Err(XsubError::invalid("background needs samples"));
        }
        let mut rng = RngStream::new(seed, "background").rng();
        let take = size.min(ds.len());
        let picked = rand::seq::index::sample(&mut rng, ds.len(), take);
        Background::new(picked.iter().map(|i| ds.samples[i].data.clone()).collect())
    }

    pub fn samples(&self) -> &[Tensor] {
        &self.samples
    }
}

/// Which estimator the explainer facade runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMode {
    Exact,
    Kernel,
}

#[derive(Debug, Clone)]
pub struct ExplainerConfig {
    pub mode: ExplainMode,
    /// Coalition budget in kernel mode; enumeration kicks in when the budget
    /// covers every non-trivial coalition.
    pub coalitions: usize,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            mode: ExplainMode::Kernel,
            coalitions: 256,
            seed: 0,
        }
    }
}

/// The explanation service: one user-visible query per explained sample.
/// Internal coalition evaluations are bookkept separately in `model_evals`.
pub struct Explainer {
    pub config: ExplainerConfig,
    pub background: Background,
    model_evals: AtomicU64,
}

impl Explainer {
    pub fn new(config: ExplainerConfig, background: Background) -> Self {
        Explainer {
            config,
            background,
            model_evals: AtomicU64::new(0),
        }
    }

    /// Explain one sample for one class; increments `log.explain_count` once.
    pub fn explain(
        &self,
        f: &dyn ScoreModel,
        x: &Tensor,
        class: usize,
        log: &mut QueryLog,
    ) -> Result<ExplanationVector> {
        let counting = CountingModel {
            inner: f,
            evals: &self.model_evals,
        };
        let ev = match self.config.mode {
            ExplainMode::Exact => exact_shapley(&counting, x, class, &self.background)?,
            ExplainMode::Kernel => {
                kernel_shapley(&counting, x, class, &self.background, &self.config)?
            }
        };
        log.explain_count += 1;
        Ok(ev)
    }

    /// Internal model evaluations spent so far (not user-visible queries).
    pub fn model_evals(&self) -> u64 {
        self.model_evals.load(Ordering::Relaxed)
    }
}

struct CountingModel<'a> {
    inner: &'a dyn ScoreModel,
    evals: &'a AtomicU64,
}

impl ScoreModel for CountingModel<'_> {
    fn class_score(&self, x: &Tensor, class: usize) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.inner.class_score(x, class)
    }
}

/// Game value `v(S)`: mean over the background of `f_class` on the composite
/// keeping `x`'s features inside the coalition and background values outside.
fn coalition_value(
    f: &dyn ScoreModel,
    x: &Tensor,
    class: usize,
    background: &Background,
    in_coalition: impl Fn(usize) -> bool,
) -> Result<f64> {
    let mut total = 0.0;
    for bg in background.samples() {
        let composite: Vec<f64> = x
            .values()
            .iter()
            .zip(bg.values())
            .enumerate()
            .map(|(j, (&xv, &bv))| if in_coalition(j) { xv } else { bv })
            .collect();
        let t = Tensor::new(x.shape().to_vec(), composite)?;
        total += f.class_score(&t, class)?;
    }
    Ok(total / background.samples().len() as f64)
}

/// Exact Shapley values by full coalition enumeration. Capped at
/// [`EXACT_FEATURE_LIMIT`] features.
pub fn exact_shapley(
    f: &dyn ScoreModel,
    x: &Tensor,
    class: usize,
    background: &Background,
) -> Result<ExplanationVector> {
    let d = x.len();
    if d > EXACT_FEATURE_LIMIT {
        return Err(XsubError::Capacity(format!(
            "exact mode enumerates 2^d coalitions; d = {d} exceeds the limit of {EXACT_FEATURE_LIMIT}"
        )));
    }
    if background.samples()[0].len() != d {
        return Err(XsubError::invalid("background feature count must match x"));
    }
    let n_masks = 1usize << d;
    let mut v = vec![0.0f64; n_masks];
    for (mask, value) in v.iter_mut().enumerate() {
        *value = coalition_value(f, x, class, background, |j| mask >> j & 1 == 1)?;
    }
    // w(s) = s! (d-1-s)! / d! = 1 / (d * C(d-1, s))
    let weights: Vec<f64> = (0..d)
        .map(|s| 1.0 / (d as f64 * binomial(d - 1, s)))
        .collect();
    let mut values = vec![0.0f64; d];
    for (phi_j, j) in values.iter_mut().zip(0..d) {
        let bit = 1usize << j;
        for mask in 0..n_masks {
            if mask & bit == 0 {
                let s = (mask as u32).count_ones() as usize;
                *phi_j += weights[s] * (v[mask | bit] - v[mask]);
            }
        }
    }
    Ok(ExplanationVector {
        values,
        class,
        base_value: v[0],
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Kernel-weighted least-squares Shapley estimate. The empty and full
/// coalitions enter as constraints, so efficiency holds by construction;
/// when the budget covers all `2^d - 2` non-trivial coalitions the result
/// matches [`exact_shapley`].
pub fn kernel_shapley(
    f: &dyn ScoreModel,
    x: &Tensor,
    class: usize,
    background: &Background,
    cfg: &ExplainerConfig,
) -> Result<ExplanationVector> {
    let d = x.len();
    if background.samples()[0].len() != d {
        return Err(XsubError::invalid("background feature count must match x"));
    }
    if cfg.coalitions < d + 2 {
        return Err(XsubError::invalid(format!(
            "coalition budget {} is below d + 2 = {}",
            cfg.coalitions,
            d + 2
        )));
    }
    let base_value = coalition_value(f, x, class, background, |_| false)?;
    let fx = f.class_score(x, class)?;
    let total = fx - base_value;
    if d == 1 {
        return Ok(ExplanationVector {
            values: vec![total],
            class,
            base_value,
        });
    }

    // (mask, kernel weight) pairs over non-trivial coalitions
    let enumerable = d < usize::BITS as usize && (1usize << d) - 2 <= cfg.coalitions;
    let coalitions: Vec<(Vec<bool>, f64)> = if enumerable {
        (1..(1usize << d) - 1)
            .map(|mask| {
                let s = (mask as u32).count_ones() as usize;
                let w = (d - 1) as f64 / (binomial(d, s) * (s * (d - s)) as f64);
                ((0..d).map(|j| mask >> j & 1 == 1).collect(), w)
            })
            .collect()
    } else {
        // coalition sizes follow the kernel mass p(s) ∝ 1/(s(d-s)), subsets
        // uniform within a size, so sampled coalitions carry equal weight
        let mut rng = RngStream::new(cfg.seed, "coalitions").rng();
        let size_mass: Vec<f64> = (1..d).map(|s| 1.0 / (s * (d - s)) as f64).collect();
        let mass_total: f64 = size_mass.iter().sum();
        (0..cfg.coalitions)
            .map(|_| {
                let mut pick = rng.random_range(0.0..mass_total);
                let mut size = 1;
                for (i, m) in size_mass.iter().enumerate() {
                    if pick < *m {
                        size = i + 1;
                        break;
                    }
                    pick -= m;
                }
                let mut z = vec![false; d];
                for i in rand::seq::index::sample(&mut rng, d, size) {
                    z[i] = true;
                }
                (z, 1.0)
            })
            .collect()
    };

    // Efficiency elimination: substitute phi[d-1] = total - sum(others) and
    // regress the remaining d-1 coefficients.
    let cols = d - 1;
    let mut ata = vec![0.0f64; cols * cols];
    let mut atb = vec![0.0f64; cols];
    let mut q = vec![0.0f64; cols];
    for (z, wt) in &coalitions {
        let v = coalition_value(f, x, class, background, |j| z[j])?;
        let z_last = if z[d - 1] { 1.0 } else { 0.0 };
        let target = v - base_value - z_last * total;
        for (jq, zq) in q.iter_mut().zip(z.iter()) {
            *jq = (if *zq { 1.0 } else { 0.0 }) - z_last;
        }
        for a in 0..cols {
            if q[a] == 0.0 {
                continue;
            }
            let wa = wt * q[a];
            atb[a] += wa * target;
            for b in a..cols {
                ata[a * cols + b] += wa * q[b];
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            ata[a * cols + b] = ata[b * cols + a];
        }
        ata[a * cols + a] += RIDGE;
    }
    let coef = cholesky_solve(&mut ata, &atb, cols)?;
    let mut values = coef;
    let assigned: f64 = values.iter().sum();
    values.push(total - assigned);
    Ok(ExplanationVector {
        values,
        class,
        base_value,
    })
}

/// Solve the SPD system `A x = b` in place via Cholesky decomposition.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let diag_min = (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min);
    let diag_max = (0..n)
        .map(|i| a[i * n + i])
        .fold(f64::NEG_INFINITY, f64::max);
    for c in 0..n {
        for r in c..n {
            let mut sum = a[r * n + c];
            for k in 0..c {
                sum -= a[r * n + k] * a[c * n + k];
            }
            if r == c {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(XsubError::Numerical(format!(
                        "regression system is singular at pivot {c} (value {sum:.3e}; \
                         diag range [{diag_min:.3e}, {diag_max:.3e}], ridge {RIDGE:.0e})"
                    )));
                }
                a[r * n + c] = sum.sqrt();
            } else {
                a[r * n + c] = sum / a[c * n + c];
            }
        }
    }
    let mut y = b.to_vec();
    for r in 0..n {
        for k in 0..r {
            y[r] -= a[r * n + k] * y[k];
        }
        y[r] /= a[r * n + r];
    }
    for r in (0..n).rev() {
        for k in r + 1..n {
            y[r] -= a[k * n + r] * y[k];
        }
        y[r] /= a[r * n + r];
    }
    Ok(y)
}

/// Sum attribution values across channels at each pixel position.
pub fn aggregate_channels(ev: &ExplanationVector, shape: &[usize]) -> Result<Tensor> {
    let count: usize = shape.iter().product();
    if count != ev.values.len() {
        return Err(XsubError::invalid(format!(
            "shape {:?} has {} features but explanation has {}",
            shape,
            count,
            ev.values.len()
        )));
    }
    let channels = if shape.len() == 3 { shape[2] } else { 1 };
    let positions = count / channels;
    let agg: Vec<f64> = (0..positions)
        .map(|p| (0..channels).map(|c| ev.values[p * channels + c]).sum())
        .collect();
    Tensor::new(vec![positions], agg)
}
