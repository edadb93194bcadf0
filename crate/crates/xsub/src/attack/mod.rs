//! The substitution attack: golden-sample selection and caching, the
//! explanation-driven substitution operator, the constant-query adversarial
//! pipeline, the backdoor extension, and the success metrics.

mod backdoor;
mod golden;

pub use backdoor::{backdoor_attack, poison_training_set, BackdoorOutcome, PoisonedDataset};
pub use golden::{
    build_golden_cache, select_golden, GoldenCache, GoldenCacheEntry, GoldenProvenance,
};

use serde::{Deserialize, Serialize};

use crate::core::{
    apply_mask_arithmetic, rank_positions, AttackConfig, Mask, PlacementMode, Position,
    RankingMode, RngStream, Sample, Tensor,
};
use crate::data::Dataset;
use crate::error::{Result, XsubError};
use crate::explainer::{aggregate_channels, Explainer};
use crate::model::{predict, Classifier, Prediction, QueryLog};

/// Everything recorded about one attacked sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub sample_index: usize,
    pub original: Sample,
    pub perturbed: Tensor,
    pub clean_prediction: Prediction,
    pub post_prediction: Prediction,
    /// True iff the post-attack label differs from the ground-truth label.
    pub success: bool,
    /// Online queries spent on this sample: always 2 predicts + 1 explain.
    pub queries: QueryLog,
    pub positions_modified: Vec<Position>,
    /// The class whose golden sample supplied the substituted features.
    pub substitution_class: usize,
}

/// Substitute the victim's top-K features using the golden sample's top-K
/// features. Returns the perturbed tensor and the modified positions
/// (sorted, duplicate-free; at most K in paired mode, 2K in literal mode).
pub fn substitute(
    x: &Tensor,
    expl_x_agg: &Tensor,
    golden: &GoldenCacheEntry,
    cfg: &AttackConfig,
) -> Result<(Tensor, Vec<Position>)> {
    cfg.validate()?;
    if golden.sample.shape() != x.shape() {
        return Err(XsubError::invalid(format!(
            "golden sample shape {:?} does not match input shape {:?}",
            golden.sample.shape(),
            x.shape()
        )));
    }
    if expl_x_agg.len() != x.positions() {
        return Err(XsubError::invalid(format!(
            "aggregated explanation has {} positions, input has {}",
            expl_x_agg.len(),
            x.positions()
        )));
    }
    if cfg.k > x.positions() {
        return Err(XsubError::invalid(format!(
            "k = {} exceeds the {} available positions",
            cfg.k,
            x.positions()
        )));
    }
    let victim_ranked = rank_positions(expl_x_agg, cfg.ranking);
    let victim_top = &victim_ranked[..cfg.k];
    let golden_top: Vec<Position> = match cfg.ranking {
        RankingMode::Signed => golden.positions[..cfg.k].to_vec(),
        RankingMode::Absolute => {
            let agg = aggregate_channels(&golden.explanation, golden.sample.shape())?;
            rank_positions(&agg, RankingMode::Absolute)[..cfg.k].to_vec()
        }
    };

    let channels = x.channels();
    let values_at = |t: &Tensor, p: Position| -> Vec<f64> {
        (0..channels).map(|c| t.at(p.index(), c)).collect()
    };
    let sub_entries: Vec<(Position, Vec<f64>)> =
        victim_top.iter().map(|p| (*p, values_at(x, *p))).collect();
    let add_entries: Vec<(Position, Vec<f64>)> = match cfg.placement_mode {
        // rank-matched: golden values land on the victim's own positions
        PlacementMode::Paired => victim_top
            .iter()
            .zip(&golden_top)
            .map(|(p, q)| (*p, values_at(&golden.sample, *q)))
            .collect(),
        // verbatim: the addition mask sits at the golden sample's positions
        PlacementMode::Literal => golden_top
            .iter()
            .map(|q| (*q, values_at(&golden.sample, *q)))
            .collect(),
    };
    let sub = Mask::from_entries(x.shape().to_vec(), &sub_entries)?;
    let add = Mask::from_entries(x.shape().to_vec(), &add_entries)?;
    let clamp = cfg.clamp.then_some(cfg.clamp_range);
    let perturbed = apply_mask_arithmetic(x, &sub, &add, cfg.alpha, cfg.beta, clamp)?;
    let mut modified: Vec<Position> = sub
        .positions()
        .iter()
        .chain(add.positions())
        .copied()
        .collect();
    modified.sort_unstable();
    modified.dedup();
    Ok((perturbed, modified))
}

pub(crate) struct Perturbation {
    pub clean: Prediction,
    pub perturbed: Tensor,
    pub positions: Vec<Position>,
    pub substitution_class: usize,
}

/// Shared core of the inference-time attack and training-set poisoning:
/// query once for the prediction, once for the explanation, pick a random
/// other class from the labeled stream, and substitute.
pub(crate) fn perturb_sample(
    f: &Classifier,
    g: &Explainer,
    sample: &Sample,
    stream_label: &str,
    cache: &GoldenCache,
    cfg: &AttackConfig,
    log: &mut QueryLog,
) -> Result<Perturbation> {
    let clean = predict(f, &sample.data, log)?;
    let explanation = g.explain(f, &sample.data, clean.label, log)?;
    let agg = aggregate_channels(&explanation, sample.data.shape())?;

    let classes = f.classes();
    if classes < 2 {
        return Err(XsubError::invalid("need at least 2 classes to attack"));
    }
    let mut rng = RngStream::new(cfg.seed, stream_label).rng();
    let draw = rand::Rng::random_range(&mut rng, 0..classes - 1);
    let substitution_class = if draw >= sample.label { draw + 1 } else { draw };

    let golden = cache
        .entry(substitution_class)
        .ok_or(XsubError::EmptyClass {
            class: substitution_class,
        })?;
    let (perturbed, positions) = substitute(&sample.data, &agg, golden, cfg)?;
    Ok(Perturbation {
        clean,
        perturbed,
        positions,
        substitution_class,
    })
}

/// Attack one sample. Exactly 2 prediction queries and 1 explanation query
/// are spent online, independent of input size and hyperparameters.
pub fn adversarial_attack(
    f: &Classifier,
    g: &Explainer,
    sample: &Sample,
    sample_index: usize,
    cache: &GoldenCache,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    attack_with_models(f, f, g, sample, sample_index, cache, cfg)
}

/// Like [`adversarial_attack`] but the final (post-substitution) query can
/// go to a different model; the backdoor trigger evaluation queries the
/// backdoored model while explanations come from the clean reference.
fn attack_with_models(
    reference: &Classifier,
    eval: &Classifier,
    g: &Explainer,
    sample: &Sample,
    sample_index: usize,
    cache: &GoldenCache,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    let mut log = QueryLog::default();
    let p = perturb_sample(
        reference,
        g,
        sample,
        &format!("attack:{sample_index}"),
        cache,
        cfg,
        &mut log,
    )?;
    let post = predict(eval, &p.perturbed, &mut log)?;
    Ok(AttackOutcome {
        sample_index,
        original: sample.clone(),
        perturbed: p.perturbed,
        clean_prediction: p.clean,
        success: post.label != sample.label,
        post_prediction: post,
        queries: log,
        positions_modified: p.positions,
        substitution_class: p.substitution_class,
    })
}

/// Attack every test sample the reference model classifies correctly
/// (optionally capped at `limit` victims), preserving test-set indices so
/// per-sample streams stay stable.
pub fn run_adversarial(
    reference: &Classifier,
    eval_override: Option<&Classifier>,
    g: &Explainer,
    test: &Dataset,
    cache: &GoldenCache,
    cfg: &AttackConfig,
    limit: Option<usize>,
) -> Result<Vec<AttackOutcome>> {
    let eval = eval_override.unwrap_or(reference);
    let mut outcomes = Vec::new();
    for (ix, sample) in test.samples.iter().enumerate() {
        if let Some(cap) = limit {
            if outcomes.len() >= cap {
                break;
            }
        }
        if reference.predict_label(&sample.data)? != sample.label {
            continue;
        }
        outcomes.push(attack_with_models(
            reference, eval, g, sample, ix, cache, cfg,
        )?);
    }
    Ok(outcomes)
}

/// Fraction of samples the model labels correctly.
pub fn accuracy(f: &Classifier, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(XsubError::invalid("accuracy needs a non-empty sample list"));
    }
    let mut correct = 0usize;
    for s in samples {
        if f.predict_label(&s.data)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Fraction of attacked samples whose post-attack label differs from the
/// ground truth.
pub fn attack_sr(outcomes: &[AttackOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(XsubError::invalid("attack_sr needs a non-empty outcome list"));
    }
    let hits = outcomes.iter().filter(|o| o.success).count();
    Ok(hits as f64 / outcomes.len() as f64)
}
