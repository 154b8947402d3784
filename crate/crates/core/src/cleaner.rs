//! Rule-based removal of noise groups from a patch set.
//!
//! Compound patches often mix the actual fix with housekeeping: reformatted
//! code, touched-up comments, renamed locals. Each rule recognizes one kind
//! of noise; a group is dropped by the first rule that matches it, so the
//! registry order is the attribution order. Cleaning is conservative and
//! opt-in: with an empty registry everything is kept.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::ingest::{ChangeGroup, ChangeScript};
use crate::tree::{EditAction, GrammarAdapter};

pub struct CleanerRule {
    rule_id: String,
    description: String,
    predicate: Box<dyn Fn(&ChangeGroup) -> bool + Send + Sync>,
}

impl CleanerRule {
    pub fn new(
        rule_id: impl Into<String>,
        description: impl Into<String>,
        predicate: impl Fn(&ChangeGroup) -> bool + Send + Sync + 'static,
    ) -> Self {
        CleanerRule {
            rule_id: rule_id.into(),
            description: description.into(),
            predicate: Box::new(predicate),
        }
    }

    pub fn rule_id(&self) -> &str {
        &self.rule_id
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn matches(&self, group: &ChangeGroup) -> bool {
        (self.predicate)(group)
    }
}

impl std::fmt::Debug for CleanerRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CleanerRule")
            .field("rule_id", &self.rule_id)
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CleanError {
    #[error("duplicate rule id {0:?}")]
    DuplicateRule(String),
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
}

/// Ordered collection of rules with unique ids.
#[derive(Debug, Default)]
pub struct RuleRegistry {
    rules: Vec<CleanerRule>,
}

impl RuleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rule: CleanerRule) -> Result<(), CleanError> {
        if self.rules.iter().any(|r| r.rule_id == rule.rule_id) {
            return Err(CleanError::DuplicateRule(rule.rule_id));
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn rules(&self) -> &[CleanerRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// A dropped group together with the rule that claimed it.
#[derive(Debug, Clone, Serialize)]
pub struct RemovedGroup {
    pub group: ChangeGroup,
    pub rule_id: String,
}

/// Outcome of cleaning one vulnerability's groups. `noise_only` flags
/// patches where nothing survived; such vulnerabilities need manual review
/// rather than silent exclusion.
#[derive(Debug, Clone, Serialize)]
pub struct CleanReport {
    pub vuln_id: String,
    pub kept: Vec<ChangeGroup>,
    pub removed: Vec<RemovedGroup>,
    pub noise_only: bool,
}

/// Runs each group through the registry; the first matching rule removes
/// it. Group order is preserved within both lists.
pub fn apply_rules(vuln_id: &str, groups: Vec<ChangeGroup>, registry: &RuleRegistry) -> CleanReport {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for group in groups {
        match registry.rules.iter().find(|r| r.matches(&group)) {
            Some(rule) => removed.push(RemovedGroup {
                group,
                rule_id: rule.rule_id.clone(),
            }),
            None => kept.push(group),
        }
    }
    CleanReport {
        vuln_id: vuln_id.to_string(),
        noise_only: kept.is_empty() && !removed.is_empty(),
        kept,
        removed,
    }
}

pub const RULE_WS_ONLY: &str = "ws-only";
pub const RULE_COMMENT_ONLY: &str = "comment-only";
pub const RULE_RENAME_ONLY: &str = "rename-only";

fn lex_equal(grammar: &dyn GrammarAdapter, group: &ChangeGroup, keep_comments: bool) -> bool {
    if group.before_snippet.is_empty() || group.after_snippet.is_empty() {
        return false;
    }
    grammar.lex(&group.before_snippet, keep_comments)
        == grammar.lex(&group.after_snippet, keep_comments)
}

// True when the script is nothing but label updates on identifier-like
// leaves forming a consistent one-to-one renaming.
fn is_consistent_rename(group: &ChangeGroup) -> bool {
    let ChangeScript::Ast(script) = &group.script else {
        return false;
    };
    if script.is_empty() {
        return false;
    }
    let mut forward: BTreeMap<&str, &str> = BTreeMap::new();
    let mut backward: BTreeMap<&str, &str> = BTreeMap::new();
    for action in script.iter() {
        let EditAction::Update {
            node_type,
            old_label: Some(old),
            new_label: Some(new),
            ..
        } = action
        else {
            return false;
        };
        if !matches!(
            node_type.as_str(),
            "identifier" | "type_identifier" | "parameter"
        ) {
            return false;
        }
        if *forward.entry(old).or_insert(new) != new.as_str() {
            return false;
        }
        if *backward.entry(new).or_insert(old) != old.as_str() {
            return false;
        }
    }
    true
}

/// The built-in registry: whitespace-only, comment-only, and rename-only
/// changes, in that order.
pub fn builtin_registry(grammar: Arc<dyn GrammarAdapter>) -> RuleRegistry {
    let mut registry = RuleRegistry::new();
    let g = Arc::clone(&grammar);
    registry
        .push(CleanerRule::new(
            RULE_WS_ONLY,
            "both sides lex to identical token streams, comments included",
            move |group| lex_equal(g.as_ref(), group, true),
        ))
        .expect("fresh registry");
    let g = Arc::clone(&grammar);
    registry
        .push(CleanerRule::new(
            RULE_COMMENT_ONLY,
            "both sides lex to identical code tokens once comments are dropped",
            move |group| lex_equal(g.as_ref(), group, false),
        ))
        .expect("fresh registry");
    registry
        .push(CleanerRule::new(
            RULE_RENAME_ONLY,
            "the syntax script is a consistent identifier renaming",
            |group| is_consistent_rename(group),
        ))
        .expect("fresh registry");
    registry
}

/// Builds a registry holding the named built-in rules, in the given order.
pub fn registry_from_names(
    names: &[String],
    grammar: Arc<dyn GrammarAdapter>,
) -> Result<RuleRegistry, CleanError> {
    let mut registry = RuleRegistry::new();
    for name in names {
        let mut all = builtin_registry(Arc::clone(&grammar));
        let idx = all
            .rules
            .iter()
            .position(|r| r.rule_id == *name)
            .ok_or_else(|| CleanError::UnknownRule(name.clone()))?;
        registry.push(all.rules.remove(idx))?;
    }
    Ok(registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{diff_texts, group_changes, BaseUnitKind, FileDiff};
    use crate::tree::CLikeGrammar;

    fn function_group(before: &str, after: &str) -> ChangeGroup {
        let diff = FileDiff {
            path_before: Some("x.c".into()),
            path_after: Some("x.c".into()),
            hunks: diff_texts(before, after),
            before_text: before.into(),
            after_text: after.into(),
        };
        let grammar = CLikeGrammar;
        let mut groups =
            group_changes(&[diff], BaseUnitKind::Function, Some(&grammar)).unwrap();
        assert_eq!(groups.len(), 1, "want exactly one group for {before:?}");
        groups.remove(0)
    }

    fn registry() -> RuleRegistry {
        builtin_registry(Arc::new(CLikeGrammar))
    }

    #[test]
    fn whitespace_reformat_is_removed() {
        let group = function_group(
            "int f(void){return 1;}\n",
            "int f(void)\n{\n    return 1;\n}\n",
        );
        let report = apply_rules("V1", vec![group], &registry());
        assert!(report.kept.is_empty());
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].rule_id, RULE_WS_ONLY);
        assert!(report.noise_only);
    }

    #[test]
    fn comment_change_is_removed_and_attributed() {
        let group = function_group(
            "int f(void) {\n  /* old note */\n  return 1;\n}\n",
            "int f(void) {\n  /* a better note */\n  return 1;\n}\n",
        );
        let report = apply_rules("V1", vec![group], &registry());
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].rule_id, RULE_COMMENT_ONLY);
    }

    #[test]
    fn consistent_rename_is_removed() {
        let group = function_group(
            "int f(int a) {\n  int tmp = a;\n  tmp = tmp + 1;\n  return tmp;\n}\n",
            "int f(int a) {\n  int val = a;\n  val = val + 1;\n  return val;\n}\n",
        );
        let report = apply_rules("V1", vec![group], &registry());
        assert_eq!(report.removed.len(), 1, "kept: {:?}", report.kept);
        assert_eq!(report.removed[0].rule_id, RULE_RENAME_ONLY);
    }

    #[test]
    fn inconsistent_rename_is_kept() {
        // tmp maps to val in one place and cnt in another; that is not a
        // rename, it is a behavior change.
        let group = function_group(
            "int f(int a) {\n  int tmp = a;\n  int x = 0;\n  return tmp + tmp;\n}\n",
            "int f(int a) {\n  int val = a;\n  int x = 0;\n  return val + cnt;\n}\n",
        );
        let report = apply_rules("V1", vec![group], &registry());
        assert!(report.removed.is_empty());
        assert_eq!(report.kept.len(), 1);
    }

    #[test]
    fn real_fix_survives_all_rules() {
        let group = function_group(
            "int f(int a) {\n  return a;\n}\n",
            "int f(int a) {\n  if (a < 0) return 0;\n  return a;\n}\n",
        );
        let report = apply_rules("V1", vec![group], &registry());
        assert_eq!(report.kept.len(), 1);
        assert!(!report.noise_only);
    }

    #[test]
    fn conservation_and_order() {
        let fix = function_group(
            "int f(int a) {\n  return a;\n}\n",
            "int f(int a) {\n  return a + 1;\n}\n",
        );
        let ws = function_group("int g(void){return 2;}\n", "int g(void) { return 2; }\n");
        let input = vec![fix.clone(), ws.clone()];
        let report = apply_rules("V1", input.clone(), &registry());
        assert_eq!(report.kept.len() + report.removed.len(), input.len());
        assert_eq!(report.kept[0].unit, fix.unit);
        assert_eq!(report.removed[0].group.unit, ws.unit);
    }

    #[test]
    fn cleaning_is_idempotent() {
        let groups = vec![
            function_group(
                "int f(int a) {\n  return a;\n}\n",
                "int f(int a) {\n  return a * 2;\n}\n",
            ),
            function_group("int g(void){return 2;}\n", "int g(void) { return 2; }\n"),
        ];
        let registry = registry();
        let first = apply_rules("V1", groups, &registry);
        let second = apply_rules("V1", first.kept.clone(), &registry);
        assert!(second.removed.is_empty());
        assert_eq!(second.kept.len(), first.kept.len());
    }

    #[test]
    fn fewer_rules_keep_more() {
        let groups = vec![
            function_group("int g(void){return 2;}\n", "int g(void) { return 2; }\n"),
            function_group(
                "int f(void) {\n  /* x */\n  return 1;\n}\n",
                "int f(void) {\n  /* y */\n  return 1;\n}\n",
            ),
        ];
        let grammar: Arc<dyn GrammarAdapter> = Arc::new(CLikeGrammar);
        let ws_only = registry_from_names(&[RULE_WS_ONLY.to_string()], Arc::clone(&grammar)).unwrap();
        let both = registry_from_names(
            &[RULE_WS_ONLY.to_string(), RULE_COMMENT_ONLY.to_string()],
            grammar,
        )
        .unwrap();
        let kept_small = apply_rules("V1", groups.clone(), &both).kept;
        let kept_large = apply_rules("V1", groups, &ws_only).kept;
        assert!(kept_small.len() <= kept_large.len());
        for g in &kept_small {
            assert!(kept_large.iter().any(|k| k.unit == g.unit));
        }
    }

    #[test]
    fn empty_registry_keeps_everything() {
        let group = function_group("int g(void){return 2;}\n", "int g(void) { return 2; }\n");
        let report = apply_rules("V1", vec![group], &RuleRegistry::new());
        assert_eq!(report.kept.len(), 1);
        assert!(!report.noise_only);
        assert!(!report.kept.is_empty());
    }

    #[test]
    fn unknown_rule_name_is_rejected() {
        let err = registry_from_names(&["no-such-rule".to_string()], Arc::new(CLikeGrammar))
            .unwrap_err();
        assert_eq!(err, CleanError::UnknownRule("no-such-rule".into()));
    }

    #[test]
    fn duplicate_rule_id_is_rejected() {
        let mut registry = RuleRegistry::new();
        registry
            .push(CleanerRule::new("r", "first", |_| false))
            .unwrap();
        let err = registry
            .push(CleanerRule::new("r", "second", |_| false))
            .unwrap_err();
        assert_eq!(err, CleanError::DuplicateRule("r".into()));
    }
}
