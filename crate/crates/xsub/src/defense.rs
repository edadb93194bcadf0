//! Simplified activation-statistics defense: per-class medians and median
//! absolute deviations of penultimate-layer Gram entries over a clean
//! calibration set, thresholded at the 99th percentile of clean scores.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{Sample, Tensor};
use crate::error::{Result, XsubError};
use crate::model::Classifier;

/// Floor added to every MAD so constant entries cannot divide by zero.
pub const MAD_EPSILON: f64 = 1e-9;

const REFERENCE_VERSION: u32 = 1;
const MIN_CALIBRATION: usize = 100;

/// Per-class Gram-entry statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub medians: Vec<f64>,
    pub mads: Vec<f64>,
    pub sample_count: usize,
}

/// Clean calibration statistics plus the detection threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReference {
    pub version: u32,
    pub per_class: Vec<ClassStats>,
    /// 99th-percentile (nearest-rank) of clean deviation scores.
    pub threshold: f64,
    pub calibration_size: usize,
}

/// Score of one probed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub sample_index: usize,
    pub score: f64,
    pub flagged: bool,
}

impl CleanReference {
    pub fn stats_for(&self, class: usize) -> Option<&ClassStats> {
        self.per_class.iter().find(|s| s.class == class)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).expect("reference serializes"))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let r: CleanReference = serde_json::from_str(&text)
            .map_err(|e| XsubError::format(format!("{}: bad clean reference: {e}", path.display())))?;
        if r.version != REFERENCE_VERSION {
            return Err(XsubError::format(format!(
                "{}: clean reference version {} (expected {})",
                path.display(),
                r.version,
                REFERENCE_VERSION
            )));
        }
        Ok(r)
    }
}

/// Upper triangle (including diagonal) of the activation outer product.
fn gram_entries(activation: &[f64]) -> Vec<f64> {
    let h = activation.len();
    let mut out = Vec::with_capacity(h * (h + 1) / 2);
    for i in 0..h {
        for j in i..h {
            out.push(activation[i] * activation[j]);
        }
    }
    out
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-entry medians and MADs over a set of Gram vectors.
pub(crate) fn stats_from_grams(grams: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let entries = grams[0].len();
    let mut medians = Vec::with_capacity(entries);
    let mut mads = Vec::with_capacity(entries);
    let mut column = vec![0.0f64; grams.len()];
    for e in 0..entries {
        for (c, g) in column.iter_mut().zip(grams) {
            *c = g[e];
        }
        column.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        let med = median_of(&column);
        medians.push(med);
        for c in column.iter_mut() {
            *c = (*c - med).abs();
        }
        column.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        mads.push(median_of(&column));
    }
    (medians, mads)
}

/// Deviation score: max over entries of `|g - median| / (MAD + eps)`.
pub(crate) fn deviation_score(gram: &[f64], medians: &[f64], mads: &[f64]) -> f64 {
    gram.iter()
        .zip(medians)
        .zip(mads)
        .map(|((g, m), mad)| (g - m).abs() / (mad + MAD_EPSILON))
        .fold(0.0, f64::max)
}

/// Nearest-rank percentile of unsorted scores, `p` in (0, 1].
pub(crate) fn nearest_rank_percentile(scores: &[f64], p: f64) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Build per-class Gram statistics from clean samples and set the detection
/// threshold at the 99th percentile of their own deviation scores.
pub fn calibrate(f: &Classifier, clean: &[Sample]) -> Result<CleanReference> {
    if clean.len() < MIN_CALIBRATION {
        return Err(XsubError::invalid(format!(
            "calibration needs at least {MIN_CALIBRATION} clean samples, got {}",
            clean.len()
        )));
    }
    let classes = f.classes();
    let mut grams_by_class: Vec<Vec<Vec<f64>>> = vec![Vec::new(); classes];
    for s in clean {
        let class = f.predict_label(&s.data)?;
        grams_by_class[class].push(gram_entries(&f.penultimate(&s.data)?));
    }
    let mut per_class = Vec::new();
    for (class, grams) in grams_by_class.iter().enumerate() {
        if grams.is_empty() {
            continue;
        }
        let (medians, mads) = stats_from_grams(grams);
        per_class.push(ClassStats {
            class,
            medians,
            mads,
            sample_count: grams.len(),
        });
    }
    let mut scores = Vec::with_capacity(clean.len());
    for (class, grams) in grams_by_class.iter().enumerate() {
        let stats = per_class
            .iter()
            .find(|s| s.class == class)
            .filter(|_| !grams.is_empty());
        if let Some(stats) = stats {
            for gram in grams {
                scores.push(deviation_score(gram, &stats.medians, &stats.mads));
            }
        }
    }
    let threshold = nearest_rank_percentile(&scores, 0.99);
    Ok(CleanReference {
        version: REFERENCE_VERSION,
        per_class,
        threshold,
        calibration_size: clean.len(),
    })
}

/// Score one sample against the statistics of its predicted class.
pub fn score(
    reference: &CleanReference,
    f: &Classifier,
    x: &Tensor,
    sample_index: usize,
) -> Result<DetectionResult> {
    let class = f.predict_label(x)?;
    let stats = reference.stats_for(class).ok_or_else(|| {
        XsubError::invalid(format!("class {class} has no calibration statistics"))
    })?;
    let gram = gram_entries(&f.penultimate(x)?);
    let s = deviation_score(&gram, &stats.medians, &stats.mads);
    Ok(DetectionResult {
        sample_index,
        score: s,
        flagged: s > reference.threshold,
    })
}

/// Fraction of probed samples that were flagged.
pub fn detection_rate(results: &[DetectionResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(XsubError::invalid(
            "detection_rate needs a non-empty result list",
        ));
    }
    let flagged = results.iter().filter(|r| r.flagged).count();
    Ok(flagged as f64 / results.len() as f64)
}
