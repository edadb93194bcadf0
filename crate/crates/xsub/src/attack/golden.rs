use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{rank_positions, AttackConfig, Position, RankingMode, RngStream, Tensor};
use crate::data::Dataset;
use crate::error::{Result, XsubError};
use crate::explainer::{aggregate_channels, Explainer, ExplanationVector};
use crate::model::{filter_correct, Classifier, QueryLog};

const CACHE_VERSION: u32 = 1;

/// How a golden sample was chosen: the candidate set it beat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenProvenance {
    pub candidate_count: usize,
    pub seed: u64,
    /// Max channel-aggregated explanation value per candidate, in draw order.
    pub candidate_max_aggs: Vec<f64>,
    /// The winner's value; at least every entry of `candidate_max_aggs`.
    pub max_agg: f64,
}

/// One class's golden sample with its explanation and ranked positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCacheEntry {
    pub class: usize,
    pub sample: Tensor,
    pub explanation: ExplanationVector,
    /// All positions ranked by descending aggregated value, ties by
    /// ascending index.
    pub positions: Vec<Position>,
    pub provenance: GoldenProvenance,
}

impl GoldenCacheEntry {
    /// The stored winner beats every recorded candidate.
    pub fn dominates_candidates(&self) -> bool {
        self.provenance
            .candidate_max_aggs
            .iter()
            .all(|v| self.provenance.max_agg >= *v)
    }
}

/// Per-class golden samples, computed offline against a clean model and
/// persisted so attack runs spend no extra queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCache {
    pub version: u32,
    pub seed: u64,
    pub golden_set_size: usize,
    /// Entries sorted by class; classes with no eligible sample are absent.
    pub entries: Vec<GoldenCacheEntry>,
    /// One record per class that could not be served.
    pub warnings: Vec<String>,
    /// Queries spent building the cache; excluded from online budgets.
    pub offline_predicts: u64,
    pub offline_explains: u64,
}

impl GoldenCache {
    pub fn entry(&self, class: usize) -> Option<&GoldenCacheEntry> {
        self.entries.iter().find(|e| e.class == class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cache serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let cache: GoldenCache = serde_json::from_str(&text)
            .map_err(|e| XsubError::format(format!("{}: bad golden cache: {e}", path.display())))?;
        if cache.version != CACHE_VERSION {
            return Err(XsubError::format(format!(
                "{}: golden cache version {} (expected {})",
                path.display(),
                cache.version,
                CACHE_VERSION
            )));
        }
        Ok(cache)
    }
}

/// Argmax over candidate max-values; ties go to the lower candidate index.
pub(crate) fn pick_golden_index(max_aggs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in max_aggs.iter().enumerate().skip(1) {
        if *v > max_aggs[best] {
            best = i;
        }
    }
    best
}

/// Select the golden sample for class `target_class` from eligible test
/// samples (right label, correctly classified). Queries spent are recorded
/// in `offline_log`.
pub fn select_golden(
    f: &Classifier,
    g: &Explainer,
    test: &Dataset,
    target_class: usize,
    cfg: &AttackConfig,
    offline_log: &mut QueryLog,
) -> Result<GoldenCacheEntry> {
    let of_class: Vec<_> = test
        .samples
        .iter()
        .filter(|s| s.label == target_class)
        .cloned()
        .collect();
    offline_log.predict_count += of_class.len() as u64;
    let eligible = filter_correct(f, &of_class)?;
    select_golden_from_eligible(f, g, &eligible, target_class, cfg, offline_log)
}

/// Core of [`select_golden`] once eligibility is known; shared by the cache
/// builder so the correctness filter runs once per test set.
fn select_golden_from_eligible(
    f: &Classifier,
    g: &Explainer,
    eligible: &[crate::core::Sample],
    target_class: usize,
    cfg: &AttackConfig,
    offline_log: &mut QueryLog,
) -> Result<GoldenCacheEntry> {
    if eligible.is_empty() {
        return Err(XsubError::EmptyClass {
            class: target_class,
        });
    }
    let take = cfg.golden_set_size.min(eligible.len());
    let mut rng = RngStream::new(cfg.seed, format!("golden:{target_class}")).rng();
    let picked = rand::seq::index::sample(&mut rng, eligible.len(), take);

    let mut explanations = Vec::with_capacity(take);
    let mut aggs = Vec::with_capacity(take);
    let mut max_aggs = Vec::with_capacity(take);
    for i in picked.iter() {
        let sample = &eligible[i];
        let ev = g.explain(f, &sample.data, target_class, offline_log)?;
        let agg = aggregate_channels(&ev, sample.data.shape())?;
        let max = agg.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        explanations.push(ev);
        aggs.push(agg);
        max_aggs.push(max);
    }
    let winner = pick_golden_index(&max_aggs);
    let winner_sample = &eligible[picked.iter().nth(winner).expect("winner in draw")];
    let positions = rank_positions(&aggs[winner], RankingMode::Signed);
    Ok(GoldenCacheEntry {
        class: target_class,
        sample: winner_sample.data.clone(),
        explanation: explanations.swap_remove(winner),
        positions,
        provenance: GoldenProvenance {
            candidate_count: take,
            seed: cfg.seed,
            candidate_max_aggs: max_aggs.clone(),
            max_agg: max_aggs[winner],
        },
    })
}

/// Build the per-class golden cache offline. Classes with no eligible
/// candidate produce a warning record instead of an entry.
pub fn build_golden_cache(
    f: &Classifier,
    g: &Explainer,
    test: &Dataset,
    cfg: &AttackConfig,
) -> Result<GoldenCache> {
    cfg.validate()?;
    let mut offline_log = QueryLog::default();
    // one eligibility pass over the whole test set
    offline_log.predict_count += test.len() as u64;
    let correct = filter_correct(f, &test.samples)?;
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for class in 0..test.descriptor.classes {
        let eligible: Vec<_> = correct.iter().filter(|s| s.label == class).cloned().collect();
        match select_golden_from_eligible(f, g, &eligible, class, cfg, &mut offline_log) {
            Ok(entry) => entries.push(entry),
            Err(XsubError::EmptyClass { class }) => {
                warnings.push(format!("class {class}: no correctly classified sample"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(GoldenCache {
        version: CACHE_VERSION,
        seed: cfg.seed,
        golden_set_size: cfg.golden_set_size,
        entries,
        warnings,
        offline_predicts: offline_log.predict_count,
        offline_explains: offline_log.explain_count,
    })
}
