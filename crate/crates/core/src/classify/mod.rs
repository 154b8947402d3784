//! Per-vulnerability classification: IBU, repeated IBU, or MBU.
//!
//! A vulnerability whose merged patch set touches one base unit is IBU.
//! Compound patches are split by comparing the encoded change of every
//! unit: near-identical changes everywhere mean one flaw fixed in many
//! places (repeated IBU); heterogeneous changes mean a genuinely
//! multi-unit flaw (MBU). Two interchangeable methods are provided, a
//! minimum-pairwise-similarity threshold and density-based clustering.

pub mod dbscan;
pub mod lcs;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use dbscan::{dbscan, DbscanOutcome};
pub use lcs::{lcs_similarity, lcs_similarity_with, SimNorm};

use crate::ingest::{ChangeGroup, VulnerabilityRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Similarity,
    Clustering,
}

/// Knobs for both classification methods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub method: Method,
    /// Minimum pairwise similarity for the similarity method; compound
    /// patches at or above it are repeated IBU.
    pub threshold: f64,
    /// Neighborhood radius for clustering, on distance 1 - similarity.
    pub eps: f64,
    /// Minimum neighborhood size (self included) for a core point.
    pub min_pts: usize,
    pub sim_norm: SimNorm,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            method: Method::Similarity,
            threshold: 0.70,
            eps: 0.30,
            min_pts: 2,
            sim_norm: SimNorm::Dice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "IBU")]
    Ibu,
    #[serde(rename = "RepeatedIBU")]
    RepeatedIbu,
    #[serde(rename = "MBU")]
    Mbu,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Label::Ibu => "IBU",
            Label::RepeatedIbu => "RepeatedIBU",
            Label::Mbu => "MBU",
        };
        f.write_str(s)
    }
}

/// Outcome for one vulnerability, with the evidence the method used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub vuln_id: String,
    pub label: Label,
    pub n_units: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_pair: Option<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("need at least two change groups, got {0}")]
    TooFewGroups(usize),
    #[error("vulnerability {0} has no change groups")]
    MissingGroups(String),
}

/// Minimum similarity over all unordered pairs of groups, with the
/// lexicographically smallest unit-id pair attaining it.
pub fn min_pairwise_similarity(
    groups: &[ChangeGroup],
    norm: SimNorm,
) -> Result<(f64, (String, String)), ClassifyError> {
    if groups.len() < 2 {
        return Err(ClassifyError::TooFewGroups(groups.len()));
    }
    let mut min: Option<(f64, (String, String))> = None;
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let sim = lcs_similarity_with(&groups[i].encoded, &groups[j].encoded, norm);
            let a = &groups[i].unit.id;
            let b = &groups[j].unit.id;
            let pair = if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            match &min {
                Some((best, best_pair)) if sim > *best || (sim == *best && pair >= *best_pair) => {}
                _ => min = Some((sim, pair)),
            }
        }
    }
    Ok(min.expect("at least one pair"))
}

/// Threshold method: compound patches whose least-similar pair of changes
/// still reaches `threshold` are repeated IBU, the rest are MBU.
pub fn classify_similarity(
    vuln_id: &str,
    groups: &[ChangeGroup],
    threshold: f64,
    norm: SimNorm,
) -> ClassificationResult {
    let n_units = groups.len();
    if n_units <= 1 {
        return ClassificationResult {
            vuln_id: vuln_id.to_string(),
            label: Label::Ibu,
            n_units,
            min_similarity: None,
            min_pair: None,
            clusters: None,
            noise: None,
        };
    }
    let (min, pair) = min_pairwise_similarity(groups, norm).expect("n_units > 1");
    let label = if min >= threshold {
        Label::RepeatedIbu
    } else {
        Label::Mbu
    };
    ClassificationResult {
        vuln_id: vuln_id.to_string(),
        label,
        n_units,
        min_similarity: Some(min),
        min_pair: Some(pair),
        clusters: None,
        noise: None,
    }
}

/// Clusters one vulnerability's changes on distance 1 - similarity.
pub fn dbscan_cluster(
    groups: &[ChangeGroup],
    eps: f64,
    min_pts: usize,
    norm: SimNorm,
) -> DbscanOutcome {
    let ids: Vec<String> = groups.iter().map(|g| g.unit.id.clone()).collect();
    dbscan(
        &ids,
        |i, j| 1.0 - lcs_similarity_with(&groups[i].encoded, &groups[j].encoded, norm),
        eps,
        min_pts,
    )
}

/// Clustering method: repeated IBU exactly when every change lands in one
/// cluster with nothing left as noise.
pub fn classify_clustering(
    vuln_id: &str,
    groups: &[ChangeGroup],
    eps: f64,
    min_pts: usize,
    norm: SimNorm,
) -> ClassificationResult {
    let n_units = groups.len();
    if n_units <= 1 {
        return ClassificationResult {
            vuln_id: vuln_id.to_string(),
            label: Label::Ibu,
            n_units,
            min_similarity: None,
            min_pair: None,
            clusters: None,
            noise: None,
        };
    }
    let outcome = dbscan_cluster(groups, eps, min_pts, norm);
    let label = if outcome.clusters.len() == 1 && outcome.noise.is_empty() {
        Label::RepeatedIbu
    } else {
        Label::Mbu
    };
    ClassificationResult {
        vuln_id: vuln_id.to_string(),
        label,
        n_units,
        min_similarity: None,
        min_pair: None,
        clusters: Some(outcome.clusters),
        noise: Some(outcome.noise),
    }
}

/// Classifies every vulnerability of a corpus, ordered by vuln id.
///
/// A record whose declared unit count disagrees with the grouped changes
/// gets a warning, not an error; a record with no groups at all is fatal.
pub fn classify_corpus(
    records: &[VulnerabilityRecord],
    groups_by_vuln: &HashMap<String, Vec<ChangeGroup>>,
    config: &ClassifierConfig,
) -> Result<Vec<ClassificationResult>, ClassifyError> {
    let mut ordered: Vec<&VulnerabilityRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.vuln_id.cmp(&b.vuln_id));
    let mut out = Vec::with_capacity(ordered.len());
    for record in ordered {
        let groups = groups_by_vuln
            .get(&record.vuln_id)
            .filter(|g| !g.is_empty())
            .ok_or_else(|| ClassifyError::MissingGroups(record.vuln_id.clone()))?;
        if let Some(declared) = record.declared_unit_count {
            if declared != groups.len() {
                log::warn!(
                    "{}: declared unit count {} but grouped {} units",
                    record.vuln_id,
                    declared,
                    groups.len()
                );
            }
        }
        let result = match config.method {
            Method::Similarity => {
                classify_similarity(&record.vuln_id, groups, config.threshold, config.sim_norm)
            }
            Method::Clustering => classify_clustering(
                &record.vuln_id,
                groups,
                config.eps,
                config.min_pts,
                config.sim_norm,
            ),
        };
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BaseUnit, BaseUnitKind, ChangeScript};
    use crate::tree::TokenSequence;

    fn group(id: &str, tokens: &[&str]) -> ChangeGroup {
        ChangeGroup {
            unit: BaseUnit {
                kind: BaseUnitKind::Function,
                id: id.to_string(),
            },
            before_snippet: "b".into(),
            after_snippet: "a".into(),
            script: ChangeScript::Lines {
                removed: vec![],
                added: vec![],
            },
            encoded: TokenSequence::new(tokens.iter().map(|s| s.to_string()).collect()),
        }
    }

    #[test]
    fn identical_scripts_are_repeated_ibu() {
        let groups = vec![
            group("f.c::a", &["UPD:identifier:x"]),
            group("f.c::b", &["UPD:identifier:x"]),
            group("f.c::c", &["UPD:identifier:x"]),
        ];
        let r = classify_similarity("V1", &groups, 0.70, SimNorm::Dice);
        assert_eq!(r.label, Label::RepeatedIbu);
        assert_eq!(r.min_similarity, Some(1.0));
        assert_eq!(r.n_units, 3);
    }

    #[test]
    fn heterogeneous_scripts_are_mbu() {
        let groups = vec![
            group("f.c::a", &["INS:if_statement", "INS:identifier:x"]),
            group("f.c::b", &["DEL:call_expression", "DEL:identifier:y"]),
            group("f.c::c", &["UPD:number_literal:7"]),
        ];
        let r = classify_similarity("V2", &groups, 0.70, SimNorm::Dice);
        assert_eq!(r.label, Label::Mbu);
        assert!(r.min_similarity.unwrap() < 0.70);
    }

    #[test]
    fn single_unit_is_ibu_with_no_evidence() {
        let groups = vec![group("f.c::a", &["INS:if_statement"])];
        let r = classify_similarity("V3", &groups, 0.70, SimNorm::Dice);
        assert_eq!(r.label, Label::Ibu);
        assert_eq!(r.min_similarity, None);
        assert_eq!(r.min_pair, None);
    }

    #[test]
    fn min_pair_is_lexicographically_smallest() {
        // sim(s, s) = 1, sim(s, t) tie on both s-groups; the pair with the
        // smaller first unit id must win.
        let groups = vec![
            group("f.c::b", &["A", "B"]),
            group("f.c::a", &["A", "B"]),
            group("f.c::t", &["A", "X"]),
        ];
        let (min, pair) = min_pairwise_similarity(&groups, SimNorm::Dice).unwrap();
        assert!((min - 0.5).abs() < 1e-12);
        assert_eq!(pair, ("f.c::a".to_string(), "f.c::t".to_string()));
    }

    #[test]
    fn too_few_groups_error() {
        let groups = vec![group("f.c::a", &["A"])];
        assert_eq!(
            min_pairwise_similarity(&groups, SimNorm::Dice).unwrap_err(),
            ClassifyError::TooFewGroups(1)
        );
    }

    #[test]
    fn permutation_does_not_change_result() {
        let mut groups = vec![
            group("f.c::a", &["A", "B", "C"]),
            group("f.c::b", &["A", "X", "C"]),
            group("f.c::c", &["A", "B", "C"]),
        ];
        let r1 = classify_similarity("V", &groups, 0.70, SimNorm::Dice);
        groups.reverse();
        let r2 = classify_similarity("V", &groups, 0.70, SimNorm::Dice);
        assert_eq!(r1.label, r2.label);
        assert_eq!(r1.min_similarity, r2.min_similarity);
        assert_eq!(r1.min_pair, r2.min_pair);
    }

    #[test]
    fn clustering_agrees_on_extremes() {
        let same = vec![
            group("f.c::a", &["UPD:identifier:x"]),
            group("f.c::b", &["UPD:identifier:x"]),
        ];
        let r = classify_clustering("V", &same, 0.30, 2, SimNorm::Dice);
        assert_eq!(r.label, Label::RepeatedIbu);
        assert_eq!(r.clusters.as_ref().unwrap().len(), 1);

        let far = vec![
            group("f.c::a", &["INS:if_statement"]),
            group("f.c::b", &["DEL:return_statement"]),
        ];
        let r = classify_clustering("V", &far, 0.30, 2, SimNorm::Dice);
        assert_eq!(r.label, Label::Mbu);
        assert_eq!(r.noise.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn threshold_extremes_are_degenerate() {
        let groups = vec![
            group("f.c::a", &["A", "B"]),
            group("f.c::b", &["C", "D"]),
        ];
        assert_eq!(
            classify_similarity("V", &groups, 0.0, SimNorm::Dice).label,
            Label::RepeatedIbu
        );
        assert_eq!(
            classify_similarity("V", &groups, 1.01, SimNorm::Dice).label,
            Label::Mbu
        );
    }

    #[test]
    fn corpus_classification_orders_and_errors() {
        let records = vec![
            VulnerabilityRecord {
                vuln_id: "V2".into(),
                repo: Some("r".into()),
                patch_hashes: vec!["ab12".into()],
                cve_id: None,
                declared_unit_count: None,
            },
            VulnerabilityRecord {
                vuln_id: "V1".into(),
                repo: Some("r".into()),
                patch_hashes: vec!["cd34".into()],
                cve_id: None,
                declared_unit_count: None,
            },
        ];
        let mut groups = HashMap::new();
        groups.insert("V1".to_string(), vec![group("a.c::f", &["A"])]);
        groups.insert(
            "V2".to_string(),
            vec![group("a.c::g", &["A"]), group("a.c::h", &["A"])],
        );
        let results = classify_corpus(&records, &groups, &ClassifierConfig::default()).unwrap();
        assert_eq!(results[0].vuln_id, "V1");
        assert_eq!(results[1].vuln_id, "V2");
        assert_eq!(results[0].label, Label::Ibu);
        assert_eq!(results[1].label, Label::RepeatedIbu);

        let empty = HashMap::new();
        let err = classify_corpus(&records, &empty, &ClassifierConfig::default()).unwrap_err();
        assert_eq!(err, ClassifyError::MissingGroups("V1".to_string()));
    }
}
