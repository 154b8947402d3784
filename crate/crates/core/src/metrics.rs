//! Detector scoring with unit-level and vulnerability-level views.
//!
//! Base counts treat every unit independently, the conventional view.
//! Adjusted counts credit a vulnerability only when every one of its units
//! was flagged: partial detection of a multi-unit flaw does not fix it.
//! Ratios with a zero denominator are reported as undefined, never as 0.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::{ClassificationResult, Label};

/// One detector verdict for one base unit. `vuln_id` ties vulnerable units
/// to their vulnerability; it implies `true_label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub unit_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vuln_id: Option<String>,
    pub true_label: bool,
    pub predicted_label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Base,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
    pub tn: u64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("duplicate unit id {0:?} in predictions")]
    DuplicateUnitId(String),
    #[error("prediction references unknown vulnerability {0:?}")]
    UnknownVulnId(String),
    #[error("vulnerability {0:?} has no classification")]
    UnclassifiedVuln(String),
    #[error("prediction for {0:?} has a vuln_id but is not labeled vulnerable")]
    InvalidRecord(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_records(predictions: &[PredictionRecord]) -> Result<(), MetricsError> {
    let mut seen = BTreeSet::new();
    for r in predictions {
        if !seen.insert(&r.unit_id) {
            return Err(MetricsError::DuplicateUnitId(r.unit_id.clone()));
        }
        if r.vuln_id.is_some() && !r.true_label {
            return Err(MetricsError::InvalidRecord(r.unit_id.clone()));
        }
    }
    Ok(())
}

/// Unit-level confusion counts.
pub fn confusion_base(predictions: &[PredictionRecord]) -> Result<ConfusionCounts, MetricsError> {
    check_records(predictions)?;
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        r#fn: 0,
        tn: 0,
        mode: Mode::Base,
    };
    for r in predictions {
        match (r.true_label, r.predicted_label) {
            (true, true) => c.tp += 1,
            (true, false) => c.r#fn += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

// Per-vulnerability outcome: did every scored unit of the vulnerability get
// flagged? Vulnerable units without a vuln_id count as singletons keyed by
// their own unit id.
fn vuln_hits<'a>(
    predictions: &'a [PredictionRecord],
    index: Option<&BTreeSet<String>>,
) -> Result<BTreeMap<&'a str, bool>, MetricsError> {
    let mut all_hit: BTreeMap<&str, bool> = BTreeMap::new();
    for r in predictions {
        if !r.true_label {
            continue;
        }
        let key = match &r.vuln_id {
            Some(v) => {
                if let Some(index) = index {
                    if !index.contains(v) {
                        return Err(MetricsError::UnknownVulnId(v.clone()));
                    }
                }
                v.as_str()
            }
            None => r.unit_id.as_str(),
        };
        let hit = all_hit.entry(key).or_insert(true);
        *hit = *hit && r.predicted_label;
    }
    Ok(all_hit)
}

/// Vulnerability-level confusion counts: a vulnerability is a true positive
/// only when all of its scored units were flagged, and a false negative
/// otherwise. Non-vulnerable counts carry over from the base view. Every
/// referenced vuln_id must be in `index`.
pub fn confusion_adjusted(
    predictions: &[PredictionRecord],
    index: &BTreeSet<String>,
) -> Result<ConfusionCounts, MetricsError> {
    let base = confusion_base(predictions)?;
    let all_hit = vuln_hits(predictions, Some(index))?;
    let tp = all_hit.values().filter(|&&h| h).count() as u64;
    Ok(ConfusionCounts {
        tp,
        fp: base.fp,
        r#fn: all_hit.len() as u64 - tp,
        tn: base.tn,
        mode: Mode::Adjusted,
    })
}

/// True positive rate, undefined when nothing is positive.
pub fn tpr(counts: &ConfusionCounts) -> Option<f64> {
    let denom = counts.tp + counts.r#fn;
    (denom > 0).then(|| counts.tp as f64 / denom as f64)
}

/// Precision, undefined when nothing was flagged.
pub fn precision(counts: &ConfusionCounts) -> Option<f64> {
    let denom = counts.tp + counts.fp;
    (denom > 0).then(|| counts.tp as f64 / denom as f64)
}

/// Matthews correlation coefficient, undefined when any marginal is empty.
pub fn mcc(counts: &ConfusionCounts) -> Option<f64> {
    let (tp, fp, fn_, tn) = (
        counts.tp as f64,
        counts.fp as f64,
        counts.r#fn as f64,
        counts.tn as f64,
    );
    let factors = [(tp + fp), (tp + fn_), (tn + fp), (tn + fn_)];
    if factors.iter().any(|&f| f == 0.0) {
        return None;
    }
    let denom = factors.iter().product::<f64>().sqrt();
    Some((tp * tn - fp * fn_) / denom)
}

/// Which classified vulnerabilities a subgroup rate covers. The IBU side
/// takes repeated IBU with it: both are single-flaw vulnerabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subgroup {
    Ibu,
    Mbu,
}

impl Subgroup {
    pub fn contains(self, label: Label) -> bool {
        match self {
            Subgroup::Ibu => matches!(label, Label::Ibu | Label::RepeatedIbu),
            Subgroup::Mbu => label == Label::Mbu,
        }
    }
}

/// Vulnerability-level TPR restricted to one subgroup. Every vuln_id seen
/// in the predictions needs a classification; vulnerable units without a
/// vuln_id have no label and stay out of both subgroups. `None` when the
/// subgroup is empty.
pub fn subgroup_tpr(
    predictions: &[PredictionRecord],
    classifications: &[ClassificationResult],
    subgroup: Subgroup,
) -> Result<Option<f64>, MetricsError> {
    check_records(predictions)?;
    let labels: BTreeMap<&str, Label> = classifications
        .iter()
        .map(|c| (c.vuln_id.as_str(), c.label))
        .collect();
    let mut all_hit: BTreeMap<&str, bool> = BTreeMap::new();
    for r in predictions {
        let Some(vuln_id) = &r.vuln_id else {
            continue;
        };
        let label = labels
            .get(vuln_id.as_str())
            .ok_or_else(|| MetricsError::UnclassifiedVuln(vuln_id.clone()))?;
        if !subgroup.contains(*label) {
            continue;
        }
        let hit = all_hit.entry(vuln_id.as_str()).or_insert(true);
        *hit = *hit && r.predicted_label;
    }
    if all_hit.is_empty() {
        return Ok(None);
    }
    let tp = all_hit.values().filter(|&&h| h).count();
    Ok(Some(tp as f64 / all_hit.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TprBlock {
    pub base: Option<f64>,
    pub adjusted: Option<f64>,
    pub ibu: Option<f64>,
    pub mbu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBlock {
    pub base: Option<f64>,
    pub adjusted: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsBlock {
    pub base: ConfusionCounts,
    pub adjusted: ConfusionCounts,
}

/// The full scoring report. Undefined ratios serialize as null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "TPR")]
    pub tpr: TprBlock,
    #[serde(rename = "Prec")]
    pub precision: RatioBlock,
    #[serde(rename = "MCC")]
    pub mcc: RatioBlock,
    pub counts: CountsBlock,
}

/// Scores predictions against classifications: base and adjusted counts,
/// ratios for both, and per-subgroup adjusted TPR.
pub fn full_report(
    predictions: &[PredictionRecord],
    classifications: &[ClassificationResult],
) -> Result<MetricsReport, MetricsError> {
    let index: BTreeSet<String> = classifications
        .iter()
        .map(|c| c.vuln_id.clone())
        .collect();
    let base = confusion_base(predictions)?;
    let adjusted = confusion_adjusted(predictions, &index)?;
    Ok(MetricsReport {
        tpr: TprBlock {
            base: tpr(&base),
            adjusted: tpr(&adjusted),
            ibu: subgroup_tpr(predictions, classifications, Subgroup::Ibu)?,
            mbu: subgroup_tpr(predictions, classifications, Subgroup::Mbu)?,
        },
        precision: RatioBlock {
            base: precision(&base),
            adjusted: precision(&adjusted),
        },
        mcc: RatioBlock {
            base: mcc(&base),
            adjusted: mcc(&adjusted),
        },
        counts: CountsBlock { base, adjusted },
    })
}

/// Corpus composition: how many vulnerabilities have how many units, and
/// how much of the corpus the multi-base-unit ones account for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_vulns: usize,
    pub n_units: usize,
    pub units_per_vuln: BTreeMap<usize, usize>,
    pub pct_mbu: f64,
    pub pct_units_from_mbu: f64,
}

pub fn dataset_stats(classifications: &[ClassificationResult]) -> DatasetStats {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total_units = 0usize;
    let mut mbu_vulns = 0usize;
    let mut mbu_units = 0usize;
    for c in classifications {
        *histogram.entry(c.n_units).or_insert(0) += 1;
        total_units += c.n_units;
        if c.label == Label::Mbu {
            mbu_vulns += 1;
            mbu_units += c.n_units;
        }
    }
    let pct = |part: usize, whole: usize| {
        if whole == 0 {
            0.0
        } else {
            100.0 * part as f64 / whole as f64
        }
    };
    DatasetStats {
        n_vulns: classifications.len(),
        n_units: total_units,
        units_per_vuln: histogram,
        pct_mbu: pct(mbu_vulns, classifications.len()),
        pct_units_from_mbu: pct(mbu_units, total_units),
    }
}

/// Sample size for estimating a proportion at the given confidence (as a
/// z value) and margin of error, optionally corrected for a finite
/// population. Rounds up.
pub fn sample_size(
    z: f64,
    margin: f64,
    p: f64,
    population: Option<u64>,
) -> Result<u64, MetricsError> {
    if !z.is_finite() || z <= 0.0 {
        return Err(MetricsError::InvalidParameter(format!("z must be positive, got {z}")));
    }
    if !margin.is_finite() || margin <= 0.0 || margin >= 1.0 {
        return Err(MetricsError::InvalidParameter(format!(
            "margin must be in (0, 1), got {margin}"
        )));
    }
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(MetricsError::InvalidParameter(format!(
            "p must be in (0, 1), got {p}"
        )));
    }
    let n0 = z * z * p * (1.0 - p) / (margin * margin);
    let n = match population {
        None => n0,
        Some(0) => {
            return Err(MetricsError::InvalidParameter("population must be positive".into()))
        }
        Some(cap) => n0 / (1.0 + (n0 - 1.0) / cap as f64),
    };
    Ok(n.ceil() as u64)
}
