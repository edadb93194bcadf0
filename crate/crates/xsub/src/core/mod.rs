//! Shared domain types and the two primitive operations every attack builds
//! on: top-K position ranking and masked add/subtract arithmetic.

mod mask;
mod rng;
mod tensor;

pub use mask::Mask;
pub use rng::RngStream;
pub use tensor::{Position, Sample, Tensor};

use serde::{Deserialize, Serialize};

use crate::error::{Result, XsubError};

/// How substitution masks are placed relative to the two samples' own
/// important positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    /// Rank-matched replacement at the victim's positions: the victim's
    /// rank-r feature is overwritten using the golden sample's rank-r
    /// feature values. Modifies at most K positions.
    Paired,
    /// Masks applied verbatim at each sample's own positions: subtraction
    /// at the victim's, addition at the golden sample's. Modifies at most
    /// 2K positions.
    Literal,
}

impl PlacementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlacementMode::Paired => "paired",
            PlacementMode::Literal => "literal",
        }
    }
}

impl std::str::FromStr for PlacementMode {
    type Err = XsubError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(PlacementMode::Paired),
            "literal" => Ok(PlacementMode::Literal),
            other => Err(XsubError::invalid(format!(
                "unknown placement mode `{other}` (expected paired|literal)"
            ))),
        }
    }
}

/// Whether importance ranking orders by signed attribution value (default)
/// or by magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Signed,
    Absolute,
}

/// All knobs of one attack cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Amplification applied to the subtracted (victim-feature) mask.
    pub alpha: f64,
    /// Amplification applied to the added (golden-feature) mask.
    pub beta: f64,
    /// Number of positions substituted.
    pub k: usize,
    pub placement_mode: PlacementMode,
    pub ranking: RankingMode,
    /// Clip perturbed values into `clamp_range` after substitution.
    pub clamp: bool,
    pub clamp_range: (f64, f64),
    /// Candidate-set size when selecting each class's golden sample.
    pub golden_set_size: usize,
    pub seed: u64,
    /// Fraction of the training set poisoned in the backdoor setting.
    pub poison_fraction: f64,
    /// Backdoor only: relabel poisoned training samples to the substitution
    /// class instead of keeping their ground-truth label.
    pub flip_poison_labels: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            alpha: 1.0,
            beta: 1.0,
            k: 1,
            placement_mode: PlacementMode::Paired,
            ranking: RankingMode::Signed,
            clamp: false,
            clamp_range: (0.0, 1.0),
            golden_set_size: 16,
            seed: 0,
            poison_fraction: 0.1,
            flip_poison_labels: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(XsubError::invalid("alpha must be finite and >= 0"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(XsubError::invalid("beta must be finite and >= 0"));
        }
        if self.k == 0 {
            return Err(XsubError::invalid("k must be >= 1"));
        }
        if self.golden_set_size == 0 {
            return Err(XsubError::invalid("golden_set_size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return Err(XsubError::invalid("poison_fraction must be in [0, 1]"));
        }
        if self.clamp && self.clamp_range.0 > self.clamp_range.1 {
            return Err(XsubError::invalid("clamp_range lo must be <= hi"));
        }
        Ok(())
    }
}

/// Full position ordering of an aggregated attribution map: descending
/// value (signed or absolute per `ranking`), ties broken by ascending index.
pub fn rank_positions(agg: &Tensor, ranking: RankingMode) -> Vec<Position> {
    let mut order: Vec<usize> = (0..agg.len()).collect();
    let key = |i: usize| match ranking {
        RankingMode::Signed => agg.values()[i],
        RankingMode::Absolute => agg.values()[i].abs(),
    };
    order.sort_unstable_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .expect("tensor values are finite")
            .then(a.cmp(&b))
    });
    order.into_iter().map(Position).collect()
}

/// The `k` positions with the largest aggregated attribution values, in
/// descending value order; ties broken by ascending flat index.
pub fn top_k_positions(agg: &Tensor, k: usize) -> Result<Vec<Position>> {
    if k > agg.len() {
        return Err(XsubError::invalid(format!(
            "k = {} exceeds position count {}",
            k,
            agg.len()
        )));
    }
    if !agg.values().iter().all(|v| v.is_finite()) {
        return Err(XsubError::invalid("aggregated values must be finite"));
    }
    let mut ranked = rank_positions(agg, RankingMode::Signed);
    ranked.truncate(k);
    Ok(ranked)
}

/// Elementwise `x - alpha*subtract + beta*add`, optionally clipped into
/// `[lo, hi]`.
pub fn apply_mask_arithmetic(
    x: &Tensor,
    subtract: &Mask,
    add: &Mask,
    alpha: f64,
    beta: f64,
    clamp: Option<(f64, f64)>,
) -> Result<Tensor> {
    if subtract.shape() != x.shape() || add.shape() != x.shape() {
        return Err(XsubError::invalid(format!(
            "mask shapes {:?}/{:?} do not match tensor shape {:?}",
            subtract.shape(),
            add.shape(),
            x.shape()
        )));
    }
    let out: Vec<f64> = x
        .values()
        .iter()
        .zip(subtract.values().values())
        .zip(add.values().values())
        .map(|((&v, &s), &a)| {
            let mut r = v - alpha * s + beta * a;
            if let Some((lo, hi)) = clamp {
                r = r.clamp(lo, hi);
            }
            r
        })
        .collect();
    Tensor::new(x.shape().to_vec(), out)
}
