//! Shared experiment plumbing: dataset resolution, per-seed context
//! (data, clean model, explainer, golden cache, defense reference), and the
//! per-cell runners both the sweep and the one-shot subcommands use.

use std::time::Instant;

use xsub::attack::{
    attack_sr, backdoor_attack, build_golden_cache, run_adversarial, AttackOutcome, GoldenCache,
};
use xsub::core::{AttackConfig, PlacementMode};
use xsub::data::{load_cifar10_binary, load_idx, synth_gaussians, Dataset, Split};
use xsub::defense::{calibrate, detection_rate, score, CleanReference, DetectionResult};
use xsub::explainer::{Background, Explainer, ExplainerConfig};
use xsub::model::{train, Classifier, TrainConfig};

use crate::config::{DatasetKind, RunConfig, Scenario};
use crate::error::CliError;
use crate::sweep::MetricsRecord;

/// One hyperparameter cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub mode: PlacementMode,
}

/// Canonical cell order: mode, then k, then alpha, then beta.
pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &mode in &cfg.attack.modes {
        for &k in &cfg.attack.ks {
            for &alpha in &cfg.attack.alphas {
                for &beta in &cfg.attack.betas {
                    out.push(Cell {
                        alpha,
                        beta,
                        k,
                        mode,
                    });
                }
            }
        }
    }
    out
}

/// Everything one seed shares across its sweep cells. The golden cache is
/// built once against the clean model and reused.
pub struct SeedContext {
    pub seed: u64,
    pub train_set: Dataset,
    pub test_set: Dataset,
    pub model: Classifier,
    pub clean_accuracy: f64,
    pub explainer: Explainer,
    pub cache: GoldenCache,
    pub reference: Option<CleanReference>,
}

pub fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.model.learning_rate,
        epochs: cfg.model.epochs,
        batch_size: cfg.model.batch_size,
        hidden_width: cfg.model.hidden,
        seed,
    }
}

pub fn attack_config(cfg: &RunConfig, cell: &Cell, seed: u64) -> AttackConfig {
    AttackConfig {
        alpha: cell.alpha,
        beta: cell.beta,
        k: cell.k,
        placement_mode: cell.mode,
        ranking: cfg.attack.ranking,
        clamp: cfg.attack.clamp,
        clamp_range: (cfg.attack.clamp_lo, cfg.attack.clamp_hi),
        golden_set_size: cfg.attack.golden_set_size,
        seed,
        poison_fraction: cfg.attack.poison_fraction,
        flip_poison_labels: cfg.attack.flip_poison_labels,
    }
}

fn victim_limit(cfg: &RunConfig) -> Option<usize> {
    (cfg.attack.eval_samples > 0).then_some(cfg.attack.eval_samples)
}

/// Resolve the configured dataset into train and test splits, applying the
/// optional sample cap, reshape, and Z-score normalization.
pub fn load_split(cfg: &RunConfig, seed: u64) -> Result<(Dataset, Dataset), CliError> {
    let ds = &cfg.dataset;
    let (mut train_set, mut test_set) = match ds.kind {
        DatasetKind::Synth => {
            let all = synth_gaussians(
                ds.synth_n_per_class,
                ds.synth_d,
                ds.synth_classes,
                ds.synth_separation,
                seed,
            )?;
            all.split_train_test(ds.train_fraction)?
        }
        DatasetKind::Idx => {
            let mut train_set = load_idx(
                ds.idx_train_images.as_ref().expect("validated"),
                ds.idx_train_labels.as_ref().expect("validated"),
            )?;
            let mut test_set = load_idx(
                ds.idx_test_images.as_ref().expect("validated"),
                ds.idx_test_labels.as_ref().expect("validated"),
            )?;
            let classes = train_set.descriptor.classes.max(test_set.descriptor.classes);
            train_set.descriptor.classes = classes;
            test_set.descriptor.classes = classes;
            test_set.split = Split::Test;
            (train_set, test_set)
        }
        DatasetKind::Cifar10 => {
            let train_set = load_cifar10_binary(ds.cifar_train.as_ref().expect("validated"))?;
            let mut test_set = load_cifar10_binary(ds.cifar_test.as_ref().expect("validated"))?;
            test_set.split = Split::Test;
            (train_set, test_set)
        }
    };
    if ds.limit > 0 {
        train_set.samples.truncate(ds.limit);
        test_set.samples.truncate(ds.limit);
    }
    if let Some(shape) = &ds.shape {
        train_set = train_set.reshape(shape.clone())?;
        test_set = test_set.reshape(shape.clone())?;
    }
    if cfg.normalize_data() {
        train_set = train_set.normalized()?;
        test_set = test_set.normalized()?;
    }
    Ok((train_set, test_set))
}

/// Train the clean model, build the offline golden cache, and calibrate the
/// defense when enabled.
pub fn build_context(cfg: &RunConfig, seed: u64) -> Result<SeedContext, CliError> {
    let (train_set, test_set) = load_split(cfg, seed)?;
    build_context_with_data(cfg, seed, train_set, test_set)
}

/// [`build_context`] over already-loaded splits; lets callers reuse file
/// datasets across seeds.
pub fn build_context_with_data(
    cfg: &RunConfig,
    seed: u64,
    train_set: Dataset,
    test_set: Dataset,
) -> Result<SeedContext, CliError> {
    let model = train(&train_set, &train_config(cfg, seed))?;
    let clean_accuracy = xsub::attack::accuracy(&model, &test_set.samples)?;
    let explainer = Explainer::new(
        ExplainerConfig {
            mode: cfg.explainer.mode,
            coalitions: cfg.explainer.coalitions,
            seed,
        },
        Background::from_dataset(&train_set, cfg.explainer.background, seed)?,
    );
    let cache_cfg = attack_config(
        cfg,
        &Cell {
            alpha: 1.0,
            beta: 1.0,
            k: 1,
            mode: PlacementMode::Paired,
        },
        seed,
    );
    let cache = build_golden_cache(&model, &explainer, &test_set, &cache_cfg)?;
    let reference = if cfg.defense.enabled {
        let cap = cfg.defense.calibration_size.min(train_set.len());
        Some(calibrate(&model, &train_set.samples[..cap])?)
    } else {
        None
    };
    Ok(SeedContext {
        seed,
        train_set,
        test_set,
        model,
        clean_accuracy,
        explainer,
        cache,
        reference,
    })
}

fn audit_query_budget(outcomes: &[AttackOutcome]) -> Result<(), CliError> {
    for o in outcomes {
        if o.queries.predict_count != 2 || o.queries.explain_count != 1 {
            return Err(CliError::Other(format!(
                "sample {}: online budget violated ({} predicts, {} explains)",
                o.sample_index, o.queries.predict_count, o.queries.explain_count
            )));
        }
    }
    Ok(())
}

/// Run one adversarial cell: attack the filtered victims, audit the constant
/// query budget, and score the perturbed samples when the defense is on.
/// Returns the record plus the per-sample outcomes for artifact export.
pub fn run_adversarial_cell(
    ctx: &SeedContext,
    cfg: &RunConfig,
    cell: &Cell,
) -> Result<(MetricsRecord, Vec<AttackOutcome>), CliError> {
    let started = Instant::now();
    let attack_cfg = attack_config(cfg, cell, ctx.seed);
    let outcomes = run_adversarial(
        &ctx.model,
        None,
        &ctx.explainer,
        &ctx.test_set,
        &ctx.cache,
        &attack_cfg,
        victim_limit(cfg),
    )?;
    audit_query_budget(&outcomes)?;
    let sr = attack_sr(&outcomes)?;
    let detection = match &ctx.reference {
        Some(reference) => {
            let results: Result<Vec<DetectionResult>, _> = outcomes
                .iter()
                .map(|o| score(reference, &ctx.model, &o.perturbed, o.sample_index))
                .collect();
            Some(detection_rate(&results?)?)
        }
        None => None,
    };
    let record = MetricsRecord {
        seed: ctx.seed,
        alpha: cell.alpha,
        beta: cell.beta,
        k: cell.k,
        mode: cell.mode.as_str().to_string(),
        scenario: Scenario::Adversarial.as_str().to_string(),
        accuracy: ctx.clean_accuracy,
        attack_sr: sr,
        detection_rate: detection,
        queries_predict: 2,
        queries_explain: 1,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok((record, outcomes))
}

/// Run one backdoor cell: poison, retrain, evaluate trigger success, and
/// score the poisoned training samples when the defense is on.
pub fn run_backdoor_cell(
    ctx: &SeedContext,
    cfg: &RunConfig,
    cell: &Cell,
) -> Result<(MetricsRecord, xsub::attack::BackdoorOutcome), CliError> {
    let started = Instant::now();
    let attack_cfg = attack_config(cfg, cell, ctx.seed);
    let outcome = backdoor_attack(
        &ctx.model,
        &ctx.explainer,
        &ctx.train_set,
        &ctx.test_set,
        &ctx.cache,
        &train_config(cfg, ctx.seed),
        &attack_cfg,
        victim_limit(cfg),
    )?;
    audit_query_budget(&outcome.trigger_outcomes)?;
    let detection = match &ctx.reference {
        Some(reference) => {
            let results: Result<Vec<DetectionResult>, _> = outcome
                .poisoned
                .poisoned_samples()
                .enumerate()
                .map(|(i, s)| score(reference, &ctx.model, &s.data, i))
                .collect();
            Some(detection_rate(&results?)?)
        }
        None => None,
    };
    let record = MetricsRecord {
        seed: ctx.seed,
        alpha: cell.alpha,
        beta: cell.beta,
        k: cell.k,
        mode: cell.mode.as_str().to_string(),
        scenario: Scenario::Backdoor.as_str().to_string(),
        accuracy: outcome.clean_accuracy,
        attack_sr: outcome.trigger_attack_sr,
        detection_rate: detection,
        queries_predict: 2,
        queries_explain: 1,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok((record, outcome))
}

/// Dispatch a cell by the configured scenario.
pub fn run_cell(ctx: &SeedContext, cfg: &RunConfig, cell: &Cell) -> Result<MetricsRecord, CliError> {
    match cfg.sweep.scenario {
        Scenario::Adversarial => run_adversarial_cell(ctx, cfg, cell).map(|(r, _)| r),
        Scenario::Backdoor => run_backdoor_cell(ctx, cfg, cell).map(|(r, _)| r),
    }
}
