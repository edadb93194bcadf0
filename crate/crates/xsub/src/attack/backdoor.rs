use serde::{Deserialize, Serialize};

use crate::attack::{attack_sr, perturb_sample, run_adversarial, AttackOutcome, GoldenCache};
use crate::core::{AttackConfig, Sample};
use crate::data::{Dataset, Split};
use crate::error::{Result, XsubError};
use crate::explainer::Explainer;
use crate::model::{self, Classifier, QueryLog, TrainConfig};

/// Union of the clean training set and its poisoned copies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoisonedDataset {
    pub dataset: Dataset,
    /// One flag per sample in `dataset`; true for members of D_p.
    pub poisoned_flags: Vec<bool>,
    pub poison_fraction: f64,
    /// Distinct clean-sample indices the poisons derive from.
    pub source_indices: Vec<usize>,
}

impl PoisonedDataset {
    pub fn poisoned_count(&self) -> usize {
        self.poisoned_flags.iter().filter(|f| **f).count()
    }

    pub fn poisoned_samples(&self) -> impl Iterator<Item = &Sample> {
        self.dataset
            .samples
            .iter()
            .zip(&self.poisoned_flags)
            .filter(|(_, flag)| **flag)
            .map(|(s, _)| s)
    }
}

/// Result of the training-time attack.
#[derive(Debug, Clone)]
pub struct BackdoorOutcome {
    pub model: Classifier,
    pub poisoned: PoisonedDataset,
    /// Backdoored model's accuracy on the clean test set.
    pub clean_accuracy: f64,
    /// Trigger success: attack SR of poisoned test samples against the
    /// backdoored model (perturbations crafted with the clean reference).
    pub trigger_attack_sr: f64,
    /// Per-sample trigger evaluations backing `trigger_attack_sr`.
    pub trigger_outcomes: Vec<AttackOutcome>,
}

/// Poison `round(p * |D|)` training samples exactly as in the adversarial
/// attack. By default poisons keep their ground-truth label (the
/// substitution itself is the trigger); `flip_poison_labels` relabels them
/// to the substitution class instead.
pub fn poison_training_set(
    clean_model: &Classifier,
    g: &Explainer,
    train: &Dataset,
    cache: &GoldenCache,
    cfg: &AttackConfig,
) -> Result<PoisonedDataset> {
    cfg.validate()?;
    if cfg.poison_fraction <= 0.0 {
        return Err(XsubError::invalid("poison_fraction must be > 0"));
    }
    let n_poison = (cfg.poison_fraction * train.len() as f64).round() as usize;
    if n_poison == 0 {
        return Err(XsubError::invalid(format!(
            "poison_fraction {} of {} samples rounds to zero",
            cfg.poison_fraction,
            train.len()
        )));
    }
    let mut rng = crate::core::RngStream::new(cfg.seed, "poison").rng();
    let mut source_indices: Vec<usize> =
        rand::seq::index::sample(&mut rng, train.len(), n_poison).into_iter().collect();
    source_indices.sort_unstable();

    let mut samples = train.samples.clone();
    let mut flags = vec![false; train.len()];
    let mut scratch_log = QueryLog::default();
    for &ix in &source_indices {
        let victim = &train.samples[ix];
        let p = perturb_sample(
            clean_model,
            g,
            victim,
            &format!("poison:{ix}"),
            cache,
            cfg,
            &mut scratch_log,
        )?;
        let label = if cfg.flip_poison_labels {
            p.substitution_class
        } else {
            victim.label
        };
        samples.push(Sample::new(p.perturbed, label));
        flags.push(true);
    }
    let dataset = Dataset::new(samples, train.descriptor.clone(), Split::Train)?;
    Ok(PoisonedDataset {
        dataset,
        poisoned_flags: flags,
        poison_fraction: cfg.poison_fraction,
        source_indices,
    })
}

/// Full backdoor pipeline: poison, retrain from scratch on the union, then
/// measure clean accuracy and trigger success. The golden cache and all
/// explanations come from the clean reference model.
pub fn backdoor_attack(
    clean_model: &Classifier,
    g: &Explainer,
    train: &Dataset,
    test: &Dataset,
    cache: &GoldenCache,
    train_cfg: &TrainConfig,
    cfg: &AttackConfig,
    eval_limit: Option<usize>,
) -> Result<BackdoorOutcome> {
    let poisoned = poison_training_set(clean_model, g, train, cache, cfg)?;
    let backdoored = model::train(&poisoned.dataset, train_cfg)?;
    let clean_accuracy = crate::attack::accuracy(&backdoored, &test.samples)?;
    // trigger evaluation: craft poisons with the clean model, query the
    // backdoored one, over the clean-model-filtered test set
    let trigger_outcomes = run_adversarial(
        clean_model,
        Some(&backdoored),
        g,
        test,
        cache,
        cfg,
        eval_limit,
    )?;
    let trigger_attack_sr = attack_sr(&trigger_outcomes)?;
    Ok(BackdoorOutcome {
        model: backdoored,
        poisoned,
        clean_accuracy,
        trigger_attack_sr,
        trigger_outcomes,
    })
}
