//! Patch acquisition and change grouping.
//!
//! A patch set (one or more commits fixing a vulnerability) is split into
//! change groups, one per touched base unit. Base units are either changed
//! line positions or functions, with a file-scope pseudo-unit catching
//! changes outside every function.

pub mod diff;
pub mod group;
pub mod meta;
pub mod vcs;

use serde::{Deserialize, Serialize};

use crate::tree::{EditScript, GrammarAdapter, TokenSequence};

pub use diff::{diff_texts, parse_unified_diff, render_unified_diff, DiffLine, FileDiff, Hunk, Origin};
pub use group::{group_changes, is_compound, snippet_script, FILE_SCOPE};
pub use meta::{load_metadata, parse_metadata, VulnerabilityRecord};
pub use vcs::{fetch_patch, ChangedFile, GitCliAdapter, VcsAdapter, CACHE_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseUnitKind {
    Line,
    Function,
}

impl std::fmt::Display for BaseUnitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseUnitKind::Line => f.write_str("line"),
            BaseUnitKind::Function => f.write_str("function"),
        }
    }
}

/// The atom a detector classifies: a changed line position or a function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseUnit {
    pub kind: BaseUnitKind,
    pub id: String,
}

/// How one unit changed: a tree edit script when both sides parsed, plain
/// line lists otherwise. Scripts are persisted only in encoded form, so
/// this serializes one way; [`GroupRecord`] is the storage format.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum ChangeScript {
    Ast(EditScript),
    Lines {
        removed: Vec<String>,
        added: Vec<String>,
    },
}

/// All changes a patch set made to one base unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeGroup {
    pub unit: BaseUnit,
    pub before_snippet: String,
    pub after_snippet: String,
    pub script: ChangeScript,
    pub encoded: TokenSequence,
}

/// JSONL row for a persisted change group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub vuln_id: String,
    pub unit_kind: BaseUnitKind,
    pub unit_id: String,
    pub before: String,
    pub after: String,
    pub encoded_script: TokenSequence,
}

impl GroupRecord {
    pub fn from_group(vuln_id: &str, group: &ChangeGroup) -> Self {
        GroupRecord {
            vuln_id: vuln_id.to_string(),
            unit_kind: group.unit.kind,
            unit_id: group.unit.id.clone(),
            before: group.before_snippet.clone(),
            after: group.after_snippet.clone(),
            encoded_script: group.encoded.clone(),
        }
    }

    /// Rebuilds the in-memory group. The stored encoding is kept as is; the
    /// script is re-derived from the snippets, degrading to line lists when
    /// no grammar applies.
    pub fn into_group(self, grammar: Option<&dyn GrammarAdapter>) -> (String, ChangeGroup) {
        let file_scope = self.unit_id.ends_with(FILE_SCOPE);
        let script = match (self.unit_kind, grammar) {
            (BaseUnitKind::Function, Some(g)) if !file_scope => {
                snippet_script(g, &self.before, &self.after).ok()
            }
            _ => None,
        };
        let script = script.map(ChangeScript::Ast).unwrap_or_else(|| ChangeScript::Lines {
            removed: self.before.lines().map(str::to_string).collect(),
            added: self.after.lines().map(str::to_string).collect(),
        });
        (
            self.vuln_id,
            ChangeGroup {
                unit: BaseUnit {
                    kind: self.unit_kind,
                    id: self.unit_id,
                },
                before_snippet: self.before,
                after_snippet: self.after,
                script,
                encoded: self.encoded_script,
            },
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("metadata line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate vulnerability id {0}")]
    DuplicateVulnId(String),
    #[error("diff syntax error at line {line}")]
    DiffSyntaxError { line: usize },
    #[error("diff for {path} is inconsistent: {reason}")]
    InvalidDiff { path: String, reason: String },
    #[error("repository {repo} unavailable: {reason}")]
    RepoUnavailable { repo: String, reason: String },
    #[error("unknown commit {hash} in {repo}")]
    UnknownCommit { repo: String, hash: String },
    #[error("no grammar available for language {language:?}")]
    GrammarUnavailable { language: String },
    #[error("internal error: {reason}")]
    Internal { reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::CLikeGrammar;

    #[test]
    fn group_record_round_trips_function_groups() {
        let before = "int f(int a) {\n  return a;\n}\n";
        let after = "int f(int a) {\n  if (a < 0) return 0;\n  return a;\n}\n";
        let diff = FileDiff {
            path_before: Some("x.c".into()),
            path_after: Some("x.c".into()),
            hunks: diff_texts(before, after),
            before_text: before.into(),
            after_text: after.into(),
        };
        let grammar = CLikeGrammar;
        let groups = group_changes(&[diff], BaseUnitKind::Function, Some(&grammar)).unwrap();
        assert_eq!(groups.len(), 1);
        let record = GroupRecord::from_group("V1", &groups[0]);
        let json = serde_json::to_string(&record).unwrap();
        let back: GroupRecord = serde_json::from_str(&json).unwrap();
        let (vuln_id, group) = back.into_group(Some(&grammar));
        assert_eq!(vuln_id, "V1");
        assert_eq!(group.unit, groups[0].unit);
        assert_eq!(group.encoded, groups[0].encoded);
        assert_eq!(group.script, groups[0].script);
    }

    #[test]
    fn group_record_without_grammar_degrades_to_lines() {
        let record = GroupRecord {
            vuln_id: "V1".into(),
            unit_kind: BaseUnitKind::Function,
            unit_id: "x.c::f".into(),
            before: "int f(void) { return 1; }".into(),
            after: "int f(void) { return 2; }".into(),
            encoded_script: TokenSequence::new(vec!["UPD:number_literal:2".into()]),
        };
        let (_, group) = record.into_group(None);
        assert!(matches!(group.script, ChangeScript::Lines { .. }));
        assert_eq!(group.encoded.tokens(), ["UPD:number_literal:2"]);
    }

    #[test]
    fn change_script_serialization_is_tagged() {
        let script = ChangeScript::Lines {
            removed: vec!["a".into()],
            added: vec![],
        };
        let json = serde_json::to_value(&script).unwrap();
        assert_eq!(json["form"], "lines");
        assert_eq!(json["removed"][0], "a");
    }
}
