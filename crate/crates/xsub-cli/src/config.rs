//! Line-oriented `key = value` run configuration with dotted section keys.
//! Unknown keys are hard errors so typos cannot silently fall back to
//! defaults. The full schema is documented in the repository README.

use std::path::PathBuf;

use xsub::core::{PlacementMode, RankingMode};
use xsub::explainer::ExplainMode;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Synth,
    Idx,
    Cifar10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Adversarial,
    Backdoor,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Adversarial => "adversarial",
            Scenario::Backdoor => "backdoor",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSettings {
    pub kind: DatasetKind,
    /// Optional reshape, e.g. `8x8x1` to give flat synthetic vectors a grid.
    pub shape: Option<Vec<usize>>,
    /// Z-score the data before training/attacking. Defaults to true for
    /// CIFAR-10, false otherwise.
    pub normalize: Option<bool>,
    /// Cap on samples per split (0 = unlimited); keeps file datasets desk-scale.
    pub limit: usize,
    pub train_fraction: f64,
    pub synth_n_per_class: usize,
    pub synth_d: usize,
    pub synth_classes: usize,
    pub synth_separation: f64,
    pub idx_train_images: Option<PathBuf>,
    pub idx_train_labels: Option<PathBuf>,
    pub idx_test_images: Option<PathBuf>,
    pub idx_test_labels: Option<PathBuf>,
    pub cifar_train: Option<PathBuf>,
    pub cifar_test: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ModelSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone)]
pub struct ExplainerSettings {
    pub mode: ExplainMode,
    pub coalitions: usize,
    pub background: usize,
}

#[derive(Debug, Clone)]
pub struct AttackSettings {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub ks: Vec<usize>,
    pub modes: Vec<PlacementMode>,
    pub ranking: RankingMode,
    pub clamp: bool,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub golden_set_size: usize,
    /// Victims attacked per cell (0 = every correctly classified test sample).
    pub eval_samples: usize,
    pub poison_fraction: f64,
    pub flip_poison_labels: bool,
}

#[derive(Debug, Clone)]
pub struct DefenseSettings {
    pub enabled: bool,
    pub calibration_size: usize,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub seeds: Vec<u64>,
    pub scenario: Scenario,
}

/// One fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: DatasetSettings,
    pub model: ModelSettings,
    pub explainer: ExplainerSettings,
    pub attack: AttackSettings,
    pub defense: DefenseSettings,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSettings {
                kind: DatasetKind::Synth,
                shape: None,
                normalize: None,
                limit: 0,
                train_fraction: 0.8,
                synth_n_per_class: 150,
                synth_d: 64,
                synth_classes: 4,
                synth_separation: 4.0,
                idx_train_images: None,
                idx_train_labels: None,
                idx_test_images: None,
                idx_test_labels: None,
                cifar_train: None,
                cifar_test: None,
            },
            model: ModelSettings {
                hidden: 64,
                epochs: 30,
                learning_rate: 0.05,
                batch_size: 32,
            },
            explainer: ExplainerSettings {
                mode: ExplainMode::Kernel,
                coalitions: 256,
                background: 8,
            },
            attack: AttackSettings {
                alphas: vec![1.0],
                betas: vec![1.0],
                ks: vec![1],
                modes: vec![PlacementMode::Paired],
                ranking: RankingMode::Signed,
                clamp: false,
                clamp_lo: 0.0,
                clamp_hi: 1.0,
                golden_set_size: 16,
                eval_samples: 60,
                poison_fraction: 0.1,
                flip_poison_labels: false,
            },
            defense: DefenseSettings {
                enabled: false,
                calibration_size: 200,
            },
            sweep: SweepSettings {
                seeds: vec![1, 2, 3, 4, 5],
                scenario: Scenario::Adversarial,
            },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.apply(key.trim(), value.trim(), lineno + 1)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn normalize_data(&self) -> bool {
        self.dataset
            .normalize
            .unwrap_or(self.dataset.kind == DatasetKind::Cifar10)
    }

    fn apply(&mut self, key: &str, value: &str, lineno: usize) -> Result<(), CliError> {
        let bad = |what: &str| {
            CliError::Config(format!("line {lineno}: bad value `{value}` for {key} ({what})"))
        };
        match key {
            "dataset.kind" => {
                self.dataset.kind = match value {
                    "synth" => DatasetKind::Synth,
                    "idx" => DatasetKind::Idx,
                    "cifar10" => DatasetKind::Cifar10,
                    _ => return Err(bad("expected synth|idx|cifar10")),
                }
            }
            "dataset.shape" => {
                let dims: Result<Vec<usize>, _> =
                    value.split('x').map(|p| p.trim().parse()).collect();
                self.dataset.shape = Some(dims.map_err(|_| bad("expected HxWxC"))?);
            }
            "dataset.normalize" => {
                self.dataset.normalize = Some(parse_bool(value).ok_or_else(|| bad("bool"))?)
            }
            "dataset.limit" => self.dataset.limit = value.parse().map_err(|_| bad("usize"))?,
            "dataset.train_fraction" => {
                self.dataset.train_fraction = value.parse().map_err(|_| bad("f64"))?
            }
            "dataset.synth.n_per_class" => {
                self.dataset.synth_n_per_class = value.parse().map_err(|_| bad("usize"))?
            }
            "dataset.synth.d" => self.dataset.synth_d = value.parse().map_err(|_| bad("usize"))?,
            "dataset.synth.classes" => {
                self.dataset.synth_classes = value.parse().map_err(|_| bad("usize"))?
            }
            "dataset.synth.separation" => {
                self.dataset.synth_separation = value.parse().map_err(|_| bad("f64"))?
            }
            "dataset.idx.train_images" => self.dataset.idx_train_images = Some(value.into()),
            "dataset.idx.train_labels" => self.dataset.idx_train_labels = Some(value.into()),
            "dataset.idx.test_images" => self.dataset.idx_test_images = Some(value.into()),
            "dataset.idx.test_labels" => self.dataset.idx_test_labels = Some(value.into()),
            "dataset.cifar.train" => self.dataset.cifar_train = Some(value.into()),
            "dataset.cifar.test" => self.dataset.cifar_test = Some(value.into()),
            "model.hidden" => self.model.hidden = value.parse().map_err(|_| bad("usize"))?,
            "model.epochs" => self.model.epochs = value.parse().map_err(|_| bad("usize"))?,
            "model.lr" => self.model.learning_rate = value.parse().map_err(|_| bad("f64"))?,
            "model.batch" => self.model.batch_size = value.parse().map_err(|_| bad("usize"))?,
            "explainer.mode" => {
                self.explainer.mode = match value {
                    "exact" => ExplainMode::Exact,
                    "kernel" => ExplainMode::Kernel,
                    _ => return Err(bad("expected exact|kernel")),
                }
            }
            "explainer.coalitions" => {
                self.explainer.coalitions = value.parse().map_err(|_| bad("usize"))?
            }
            "explainer.background" => {
                self.explainer.background = value.parse().map_err(|_| bad("usize"))?
            }
            "attack.alphas" => self.attack.alphas = parse_list(value).ok_or_else(|| bad("f64 list"))?,
            "attack.betas" => self.attack.betas = parse_list(value).ok_or_else(|| bad("f64 list"))?,
            "attack.ks" => self.attack.ks = parse_list(value).ok_or_else(|| bad("usize list"))?,
            "attack.modes" => {
                let modes: Result<Vec<PlacementMode>, _> =
                    value.split(',').map(|p| p.trim().parse()).collect();
                self.attack.modes = modes.map_err(|_| bad("paired|literal list"))?;
            }
            "attack.ranking" => {
                self.attack.ranking = match value {
                    "signed" => RankingMode::Signed,
                    "absolute" => RankingMode::Absolute,
                    _ => return Err(bad("expected signed|absolute")),
                }
            }
            "attack.clamp" => self.attack.clamp = parse_bool(value).ok_or_else(|| bad("bool"))?,
            "attack.clamp_lo" => self.attack.clamp_lo = value.parse().map_err(|_| bad("f64"))?,
            "attack.clamp_hi" => self.attack.clamp_hi = value.parse().map_err(|_| bad("f64"))?,
            "attack.golden_set_size" => {
                self.attack.golden_set_size = value.parse().map_err(|_| bad("usize"))?
            }
            "attack.eval_samples" => {
                self.attack.eval_samples = value.parse().map_err(|_| bad("usize"))?
            }
            "attack.poison_fraction" => {
                self.attack.poison_fraction = value.parse().map_err(|_| bad("f64"))?
            }
            "attack.flip_poison_labels" => {
                self.attack.flip_poison_labels = parse_bool(value).ok_or_else(|| bad("bool"))?
            }
            "defense.enabled" => {
                self.defense.enabled = parse_bool(value).ok_or_else(|| bad("bool"))?
            }
            "defense.calibration_size" => {
                self.defense.calibration_size = value.parse().map_err(|_| bad("usize"))?
            }
            "sweep.seeds" => self.sweep.seeds = parse_list(value).ok_or_else(|| bad("u64 list"))?,
            "sweep.scenario" => {
                self.sweep.scenario = match value {
                    "adversarial" => Scenario::Adversarial,
                    "backdoor" => Scenario::Backdoor,
                    _ => return Err(bad("expected adversarial|backdoor")),
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "line {lineno}: unknown config key `{other}`"
                )))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let a = &self.attack;
        if a.alphas.is_empty() || a.betas.is_empty() || a.ks.is_empty() || a.modes.is_empty() {
            return Err(CliError::Config(
                "attack.alphas/betas/ks/modes must be non-empty".into(),
            ));
        }
        if self.sweep.seeds.is_empty() {
            return Err(CliError::Config("sweep.seeds must be non-empty".into()));
        }
        let mut seen = self.sweep.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.sweep.seeds.len() {
            return Err(CliError::Config("sweep.seeds must be distinct".into()));
        }
        if let Some(shape) = &self.dataset.shape {
            if shape.is_empty() || shape.iter().product::<usize>() == 0 {
                return Err(CliError::Config("dataset.shape must be non-empty".into()));
            }
        }
        match self.dataset.kind {
            DatasetKind::Idx => {
                for (k, v) in [
                    ("dataset.idx.train_images", &self.dataset.idx_train_images),
                    ("dataset.idx.train_labels", &self.dataset.idx_train_labels),
                    ("dataset.idx.test_images", &self.dataset.idx_test_images),
                    ("dataset.idx.test_labels", &self.dataset.idx_test_labels),
                ] {
                    if v.is_none() {
                        return Err(CliError::Config(format!("{k} is required for idx data")));
                    }
                }
            }
            DatasetKind::Cifar10 => {
                if self.dataset.cifar_train.is_none() || self.dataset.cifar_test.is_none() {
                    return Err(CliError::Config(
                        "dataset.cifar.train and dataset.cifar.test are required".into(),
                    ));
                }
            }
            DatasetKind::Synth => {}
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "1" => Some(true),
        "false" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    let items: Result<Vec<T>, _> = v.split(',').map(|p| p.trim().parse()).collect();
    items.ok().filter(|l: &Vec<T>| !l.is_empty())
}
