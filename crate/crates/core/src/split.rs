//! Vulnerability-grouped dataset splitting.
//!
//! Every base unit of a vulnerability lands in the same split, so a
//! detector can never train on one unit of a fix and be tested on another.
//! Assignment is seeded and deterministic: sorted ids, one ChaCha stream,
//! largest-remainder apportionment with ties going to train.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Train, val, test fractions; must be non-negative and sum to 1.
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Down-sample training non-vulnerable samples to the training
    /// vulnerability count.
    pub balance: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
            balance: false,
        }
    }
}

/// One vulnerability and the base units its fix touches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnGroup {
    pub vuln_id: String,
    pub unit_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// A non-vulnerable sample. Samples sharing a `group_id` move together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonVulnSample {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid split ratios: {0}")]
    RatioInvalid(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
}

/// The result of a split run. `entries` maps vulnerability ids and
/// non-vulnerable sample ids to their split; unit ids resolve through their
/// owning vulnerability.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub entries: BTreeMap<String, Split>,
    #[serde(default)]
    unit_to_vuln: BTreeMap<String, String>,
}

impl SplitAssignment {
    /// Wraps a plain id-to-split map, as loaded from a third-party
    /// assignment where units are listed individually.
    pub fn from_entries(entries: BTreeMap<String, Split>) -> Self {
        SplitAssignment {
            entries,
            unit_to_vuln: BTreeMap::new(),
        }
    }

    /// Looks up an id directly, then as a base unit of a known
    /// vulnerability.
    pub fn resolve_split(&self, id: &str) -> Option<Split> {
        if let Some(split) = self.entries.get(id) {
            return Some(*split);
        }
        self.unit_to_vuln
            .get(id)
            .and_then(|vuln| self.entries.get(vuln))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids assigned to `split`, in sorted order.
    pub fn members(&self, split: Split) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(3);
    for (i, &ratio) in ratios.iter().enumerate() {
        let exact = ratio * n as f64;
        counts[i] = exact.floor() as usize;
        remainders.push((exact - exact.floor(), i));
    }
    let assigned: usize = counts.iter().sum();
    let leftover = n.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..leftover {
        counts[remainders[k % 3].1] += 1;
    }
    counts
}

fn check_ratios(ratios: [f64; 3]) -> Result<(), SplitError> {
    for r in ratios {
        if !r.is_finite() || r < 0.0 {
            return Err(SplitError::RatioInvalid(format!("ratio {r} out of range")));
        }
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::RatioInvalid(format!("ratios sum to {sum}")));
    }
    Ok(())
}

fn split_of(index: usize, counts: [usize; 3]) -> Split {
    if index < counts[0] {
        Split::Train
    } else if index < counts[0] + counts[1] {
        Split::Val
    } else {
        Split::Test
    }
}

/// Assigns whole vulnerabilities and non-vulnerable samples to splits.
pub fn assign_splits(
    vulns: &[VulnGroup],
    non_vulns: &[NonVulnSample],
    config: &SplitConfig,
) -> Result<SplitAssignment, SplitError> {
    check_ratios(config.ratios)?;
    if vulns.is_empty() && non_vulns.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = BTreeMap::new();
    let mut unit_to_vuln = BTreeMap::new();

    let mut vuln_ids: Vec<&str> = vulns.iter().map(|v| v.vuln_id.as_str()).collect();
    vuln_ids.sort_unstable();
    if vuln_ids.windows(2).any(|w| w[0] == w[1]) {
        let dup = vuln_ids.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
        return Err(SplitError::DuplicateId(dup.to_string()));
    }
    vuln_ids.shuffle(&mut rng);
    let vuln_counts = apportion(vuln_ids.len(), config.ratios);
    for (i, id) in vuln_ids.iter().enumerate() {
        entries.insert(id.to_string(), split_of(i, vuln_counts));
    }
    for vuln in vulns {
        for unit in &vuln.unit_ids {
            unit_to_vuln
                .entry(unit.clone())
                .or_insert_with(|| vuln.vuln_id.clone());
        }
    }

    // Non-vulnerable samples move as entities: a group when group_id is
    // set, a singleton otherwise.
    let mut entities: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for sample in non_vulns {
        if entries.contains_key(&sample.sample_id) {
            return Err(SplitError::DuplicateId(sample.sample_id.clone()));
        }
        let key = sample
            .group_id
            .clone()
            .unwrap_or_else(|| sample.sample_id.clone());
        entities.entry(key).or_default().push(&sample.sample_id);
    }
    let mut entity_keys: Vec<&String> = entities.keys().collect();
    entity_keys.shuffle(&mut rng);
    let entity_counts = apportion(entity_keys.len(), config.ratios);
    let mut train_samples: Vec<String> = Vec::new();
    for (i, key) in entity_keys.iter().enumerate() {
        let split = split_of(i, entity_counts);
        for member in &entities[*key] {
            match entries.entry(member.to_string()) {
                Entry::Vacant(v) => {
                    v.insert(split);
                }
                Entry::Occupied(_) => {
                    return Err(SplitError::DuplicateId(member.to_string()));
                }
            }
            if split == Split::Train {
                train_samples.push(member.to_string());
            }
        }
    }

    if config.balance {
        let train_vulns = vulns
            .iter()
            .filter(|v| entries.get(&v.vuln_id) == Some(&Split::Train))
            .count();
        if train_samples.len() > train_vulns {
            train_samples.shuffle(&mut rng);
            for dropped in &train_samples[train_vulns..] {
                entries.remove(dropped);
            }
            log::info!(
                "balance: kept {train_vulns} of {} training non-vulnerable samples",
                train_samples.len()
            );
        }
    }

    Ok(SplitAssignment {
        entries,
        unit_to_vuln,
    })
}

/// A vulnerability whose base units ended up in more than one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitViolation {
    pub vuln_id: String,
    pub splits_touched: Vec<Split>,
    pub units_per_split: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingUnit {
    pub vuln_id: String,
    pub unit_id: String,
}

/// Audit result for an assignment against vulnerability groupings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub violations: Vec<SplitViolation>,
    pub missing_units: Vec<MissingUnit>,
    pub vulns_checked: usize,
    pub mbu_total: usize,
    pub mbu_violated: usize,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.missing_units.is_empty()
    }

    /// Fraction of MBU vulnerabilities split across sets, if any MBU
    /// vulnerabilities were checked.
    pub fn mbu_violation_rate(&self) -> Option<f64> {
        if self.mbu_total == 0 {
            None
        } else {
            Some(self.mbu_violated as f64 / self.mbu_total as f64)
        }
    }
}

/// Checks that each vulnerability's units share one split. Works on
/// assignments from [`assign_splits`] and on third-party unit-level maps
/// wrapped with [`SplitAssignment::from_entries`].
pub fn verify_splits(assignment: &SplitAssignment, vulns: &[VulnGroup]) -> VerifyReport {
    let mut report = VerifyReport::default();
    let mut ordered: Vec<&VulnGroup> = vulns.iter().collect();
    ordered.sort_by(|a, b| a.vuln_id.cmp(&b.vuln_id));
    for vuln in ordered {
        report.vulns_checked += 1;
        let is_mbu = vuln.label == Some(Label::Mbu);
        if is_mbu {
            report.mbu_total += 1;
        }
        let mut per_split: BTreeMap<Split, usize> = BTreeMap::new();
        for unit in &vuln.unit_ids {
            match assignment.resolve_split(unit) {
                Some(split) => *per_split.entry(split).or_insert(0) += 1,
                None => report.missing_units.push(MissingUnit {
                    vuln_id: vuln.vuln_id.clone(),
                    unit_id: unit.clone(),
                }),
            }
        }
        if per_split.len() > 1 {
            if is_mbu {
                report.mbu_violated += 1;
            }
            report.violations.push(SplitViolation {
                vuln_id: vuln.vuln_id.clone(),
                splits_touched: per_split.keys().copied().collect(),
                units_per_split: per_split
                    .into_iter()
                    .map(|(s, n)| (s.name().to_string(), n))
                    .collect(),
            });
        }
    }
    report
}
