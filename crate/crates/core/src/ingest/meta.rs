//! Vulnerability metadata loading.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// One vulnerability as listed in the input metadata: the patch commits that
/// fix it, and where they live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilityRecord {
    pub vuln_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo: Option<String>,
    pub patch_hashes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cve_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_unit_count: Option<usize>,
}

impl VulnerabilityRecord {
    fn check(&self, line: usize) -> Result<(), IngestError> {
        if self.vuln_id.is_empty() {
            return Err(IngestError::MalformedRecord { line, reason: "empty vuln_id".into() });
        }
        if self.patch_hashes.is_empty() {
            return Err(IngestError::MalformedRecord {
                line,
                reason: format!("{}: no patch hashes", self.vuln_id),
            });
        }
        for hash in &self.patch_hashes {
            if hash.is_empty() || !hash.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(IngestError::MalformedRecord {
                    line,
                    reason: format!("{}: invalid patch hash {hash:?}", self.vuln_id),
                });
            }
        }
        Ok(())
    }
}

/// Reads vulnerability records from a JSONL file, one object per line.
/// Blank lines are skipped; ids must be unique and hashes hexadecimal.
pub fn load_metadata(path: &Path) -> Result<Vec<VulnerabilityRecord>, IngestError> {
    let text = std::fs::read_to_string(path)?;
    parse_metadata(&text)
}

/// Same as [`load_metadata`] but over in-memory text.
pub fn parse_metadata(text: &str) -> Result<Vec<VulnerabilityRecord>, IngestError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: VulnerabilityRecord =
            serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        record.check(line_no)?;
        if !seen.insert(record.vuln_id.clone()) {
            return Err(IngestError::DuplicateVulnId(record.vuln_id));
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_records() {
        let text = concat!(
            r#"{"vuln_id":"V1","patch_hashes":["ab12"]}"#,
            "\n\n",
            r#"{"vuln_id":"V2","repo":"https://x/y.git","patch_hashes":["ff","0a"],"cve_id":"CVE-2020-1","declared_unit_count":3}"#,
            "\n",
        );
        let records = parse_metadata(text).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].vuln_id, "V1");
        assert_eq!(records[0].repo, None);
        assert_eq!(records[1].declared_unit_count, Some(3));
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = concat!(
            r#"{"vuln_id":"V1","patch_hashes":["ab"]}"#,
            "\n",
            r#"{"vuln_id":"V1","patch_hashes":["cd"]}"#,
            "\n",
        );
        match parse_metadata(text).unwrap_err() {
            IngestError::DuplicateVulnId(id) => assert_eq!(id, "V1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_hash_reports_line() {
        let text = concat!(
            r#"{"vuln_id":"V1","patch_hashes":["ab"]}"#,
            "\n",
            r#"{"vuln_id":"V2","patch_hashes":["xyz"]}"#,
            "\n",
        );
        match parse_metadata(text).unwrap_err() {
            IngestError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        match parse_metadata("{not json}\n").unwrap_err() {
            IngestError::MalformedRecord { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_hash_list_rejected() {
        let text = r#"{"vuln_id":"V1","patch_hashes":[]}"#;
        assert!(matches!(
            parse_metadata(text).unwrap_err(),
            IngestError::MalformedRecord { .. }
        ));
    }
}
