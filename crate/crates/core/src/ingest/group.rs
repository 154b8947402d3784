//! Partitioning a patch set into per-unit change groups.

use std::collections::BTreeMap;

use crate::seq::lcs_len;
use crate::tree::{
    edit_script, encode_line_diff, encode_script, match_trees, GrammarAdapter, SyntaxTree,
};

use super::diff::{FileDiff, Origin};
use super::{BaseUnit, BaseUnitKind, ChangeGroup, ChangeScript, IngestError};

/// Unit id suffix for changes that fall outside every function.
pub const FILE_SCOPE: &str = "<file-scope>";

/// Token-similarity floor for pairing a removed function with an added one.
const RENAME_SIM_MIN: f64 = 0.6;

/// Splits a patch set into change groups, one per touched base unit, sorted
/// by unit id. With [`BaseUnitKind::Function`] a grammar is required; files
/// it cannot parse degrade to a single file-scope group with a line script.
pub fn group_changes(
    patch_set: &[FileDiff],
    kind: BaseUnitKind,
    grammar: Option<&dyn GrammarAdapter>,
) -> Result<Vec<ChangeGroup>, IngestError> {
    let mut acc: BTreeMap<String, Draft> = BTreeMap::new();
    match kind {
        BaseUnitKind::Line => {
            for diff in patch_set {
                group_lines(diff, &mut acc);
            }
        }
        BaseUnitKind::Function => {
            let grammar = grammar.ok_or_else(|| IngestError::GrammarUnavailable {
                language: patch_set
                    .first()
                    .map(|d| language_of(d.path()))
                    .unwrap_or_else(|| "unknown".into()),
            })?;
            for diff in patch_set {
                group_functions(diff, grammar, &mut acc)?;
            }
        }
    }
    acc.into_iter()
        .map(|(id, draft)| draft.finish(id, kind, grammar))
        .collect()
}

/// True when the groups touch more than one distinct base unit.
pub fn is_compound(groups: &[ChangeGroup]) -> bool {
    let mut ids: Vec<&str> = groups.iter().map(|g| g.unit.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len() > 1
}

fn language_of(path: &str) -> String {
    match path.rsplit('.').next() {
        Some(ext) if ext != path => ext.to_ascii_lowercase(),
        _ => "unknown".into(),
    }
}

// A group under construction. Function drafts carry snippets and re-derive
// their script when finished; line and file-scope drafts keep line lists.
enum Draft {
    Lines {
        removed: Vec<String>,
        added: Vec<String>,
    },
    Function {
        before: String,
        after: String,
    },
}

impl Draft {
    fn finish(
        self,
        id: String,
        kind: BaseUnitKind,
        grammar: Option<&dyn GrammarAdapter>,
    ) -> Result<ChangeGroup, IngestError> {
        match self {
            Draft::Lines { removed, added } => {
                let encoded = encode_line_diff(&removed, &added);
                Ok(ChangeGroup {
                    unit: BaseUnit { kind, id },
                    before_snippet: removed.join("\n"),
                    after_snippet: added.join("\n"),
                    script: ChangeScript::Lines { removed, added },
                    encoded,
                })
            }
            Draft::Function { before, after } => {
                let grammar = grammar.expect("function drafts require a grammar");
                let script = snippet_script(grammar, &before, &after)?;
                let encoded = encode_script(&script);
                Ok(ChangeGroup {
                    unit: BaseUnit {
                        kind: BaseUnitKind::Function,
                        id,
                    },
                    before_snippet: before,
                    after_snippet: after,
                    script: ChangeScript::Ast(script),
                    encoded,
                })
            }
        }
    }
}

/// Parses both snippets and derives the tree edit script between them.
pub fn snippet_script(
    grammar: &dyn GrammarAdapter,
    before: &str,
    after: &str,
) -> Result<crate::tree::EditScript, IngestError> {
    let parse = |text: &str| {
        grammar.parse(text).map_err(|e| IngestError::Internal {
            reason: format!("snippet re-parse failed: {e}"),
        })
    };
    let b = parse(before)?;
    let a = parse(after)?;
    let mapping = match_trees(&b, &a);
    edit_script(&b, &a, &mapping).map_err(|e| IngestError::Internal {
        reason: e.to_string(),
    })
}

fn push_lines(acc: &mut BTreeMap<String, Draft>, id: String, removed: Vec<String>, added: Vec<String>) {
    match acc.entry(id).or_insert_with(|| Draft::Lines {
        removed: Vec::new(),
        added: Vec::new(),
    }) {
        Draft::Lines { removed: r, added: a } => {
            r.extend(removed);
            a.extend(added);
        }
        Draft::Function { .. } => unreachable!("line and function ids never collide"),
    }
}

fn group_lines(diff: &FileDiff, acc: &mut BTreeMap<String, Draft>) {
    let path = diff.path();
    for hunk in &diff.hunks {
        // `before_no` is the next before-file line. A zero-length before
        // side names the line preceding the hunk, so step past it.
        let mut before_no = if hunk.before_len == 0 {
            hunk.before_start + 1
        } else {
            hunk.before_start
        };
        // Runs of removed/added lines between context lines change together.
        let mut run_start = before_no;
        let mut removed: Vec<(usize, String)> = Vec::new();
        let mut added: Vec<String> = Vec::new();
        let mut flush = |run_start: usize,
                         removed: &mut Vec<(usize, String)>,
                         added: &mut Vec<String>| {
            let n_removed = removed.len();
            for (i, (lineno, text)) in removed.drain(..).enumerate() {
                let pair = added.get(i).cloned();
                let id = format!("{path}:{lineno}");
                push_lines(acc, id, vec![text], pair.into_iter().collect());
            }
            for (k, text) in added.drain(..).skip(n_removed).enumerate() {
                let anchor = (run_start + n_removed).saturating_sub(1);
                let id = format!("{path}:{anchor}+{}", k + 1);
                push_lines(acc, id, Vec::new(), vec![text]);
            }
        };
        for line in &hunk.lines {
            match line.origin {
                Origin::Context => {
                    flush(run_start, &mut removed, &mut added);
                    before_no += 1;
                    run_start = before_no;
                }
                Origin::Removed => {
                    removed.push((before_no, line.text.clone()));
                    before_no += 1;
                }
                Origin::Added => added.push(line.text.clone()),
            }
        }
        flush(run_start, &mut removed, &mut added);
    }
}

struct FuncInfo {
    name: String,
    arity: usize,
    span: (usize, usize),
    occurrence: usize,
}

impl FuncInfo {
    fn key(&self) -> (String, usize, usize) {
        (self.name.clone(), self.arity, self.occurrence)
    }
}

fn collect_functions(tree: &SyntaxTree) -> Vec<FuncInfo> {
    let mut seen: BTreeMap<(String, usize), usize> = BTreeMap::new();
    let mut out = Vec::new();
    for node in tree.preorder() {
        if tree.node_type(node) != "function_definition" {
            continue;
        }
        let name = match tree.label(node) {
            Some(l) if !l.is_empty() => l.to_string(),
            _ => "<anon>".to_string(),
        };
        let arity = tree
            .children(node)
            .iter()
            .find(|&&c| tree.node_type(c) == "parameter_list")
            .map(|&params| {
                tree.children(params)
                    .iter()
                    .filter(|&&p| {
                        matches!(tree.node_type(p), "parameter" | "variadic_parameter")
                    })
                    .count()
            })
            .unwrap_or(0);
        let span = tree.span(node);
        let occurrence = {
            let slot = seen.entry((name.clone(), arity)).or_insert(0);
            *slot += 1;
            *slot
        };
        out.push(FuncInfo {
            name,
            arity,
            span: (span.start, span.end),
            occurrence,
        });
    }
    out
}

fn unit_name(info: &FuncInfo) -> String {
    if info.occurrence > 1 {
        format!("{}#{}", info.name, info.occurrence)
    } else {
        info.name.clone()
    }
}

// Byte offsets (start, end) of each 1-based line, end exclusive of nothing:
// the trailing newline belongs to the line.
fn line_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0usize;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            spans.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < bytes.len() {
        spans.push((start, bytes.len()));
    }
    spans
}

fn intersects(span: (usize, usize), ranges: &[(usize, usize)]) -> bool {
    ranges
        .iter()
        .any(|&(s, e)| span.0 < e && s < span.1)
}

fn token_dice(grammar: &dyn GrammarAdapter, a: &str, b: &str) -> f64 {
    let ta = grammar.lex(a, false);
    let tb = grammar.lex(b, false);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    2.0 * lcs_len(&ta, &tb) as f64 / (ta.len() + tb.len()) as f64
}

fn group_functions(
    diff: &FileDiff,
    grammar: &dyn GrammarAdapter,
    acc: &mut BTreeMap<String, Draft>,
) -> Result<(), IngestError> {
    let path = diff.path();
    let removed_nos: Vec<usize> = diff.hunks.iter().flat_map(|h| h.removed_line_numbers()).collect();
    let added_nos: Vec<usize> = diff.hunks.iter().flat_map(|h| h.added_line_numbers()).collect();
    if removed_nos.is_empty() && added_nos.is_empty() {
        return Ok(());
    }

    let parsed = if grammar.handles_path(path) {
        match (grammar.parse(&diff.before_text), grammar.parse(&diff.after_text)) {
            (Ok(b), Ok(a)) => Some((b, a)),
            (b, a) => {
                let err = b.err().or(a.err()).expect("one side failed");
                log::warn!("{path}: parse failed ({err}); falling back to file-scope grouping");
                None
            }
        }
    } else {
        log::warn!("{path}: no grammar handles this path; using file-scope grouping");
        None
    };

    let removed_texts = side_lines(diff, Origin::Removed);
    let added_texts = side_lines(diff, Origin::Added);

    let Some((before_tree, after_tree)) = parsed else {
        push_lines(
            acc,
            format!("{path}::{FILE_SCOPE}"),
            removed_texts,
            added_texts,
        );
        return Ok(());
    };

    let before_lines = line_spans(&diff.before_text);
    let after_lines = line_spans(&diff.after_text);
    let removed_ranges: Vec<(usize, usize)> = removed_nos
        .iter()
        .filter_map(|&n| n.checked_sub(1).and_then(|i| before_lines.get(i)).copied())
        .collect();
    let added_ranges: Vec<(usize, usize)> = added_nos
        .iter()
        .filter_map(|&n| n.checked_sub(1).and_then(|i| after_lines.get(i)).copied())
        .collect();

    let before_funcs = collect_functions(&before_tree);
    let after_funcs = collect_functions(&after_tree);
    let slice = |text: &str, span: (usize, usize)| text[span.0..span.1].to_string();

    let mut after_by_key: BTreeMap<(String, usize, usize), usize> = BTreeMap::new();
    for (j, f) in after_funcs.iter().enumerate() {
        after_by_key.insert(f.key(), j);
    }

    let mut after_used = vec![false; after_funcs.len()];
    let mut touched_before: Vec<(usize, Option<usize>)> = Vec::new();
    for (i, f) in before_funcs.iter().enumerate() {
        let partner = after_by_key.get(&f.key()).copied();
        if let Some(j) = partner {
            after_used[j] = true;
        }
        let before_hit = intersects(f.span, &removed_ranges);
        let after_hit = partner
            .map(|j| intersects(after_funcs[j].span, &added_ranges))
            .unwrap_or(false);
        if before_hit || after_hit {
            touched_before.push((i, partner));
        }
    }
    let mut touched_added: Vec<usize> = after_funcs
        .iter()
        .enumerate()
        .filter(|&(j, f)| !after_used[j] && intersects(f.span, &added_ranges))
        .map(|(j, _)| j)
        .collect();

    // Pair leftover removed functions with leftover added ones when their
    // token streams still mostly agree; that covers renames and signature
    // tweaks without splitting one edit into a delete and an insert.
    let mut orphans: Vec<usize> = touched_before
        .iter()
        .filter(|(_, partner)| partner.is_none())
        .map(|&(i, _)| i)
        .collect();
    let mut aligned: BTreeMap<usize, usize> = BTreeMap::new();
    while !orphans.is_empty() && !touched_added.is_empty() {
        let mut best: Option<(f64, usize, usize)> = None;
        for &i in &orphans {
            for &j in &touched_added {
                let sim = token_dice(
                    grammar,
                    &slice(&diff.before_text, before_funcs[i].span),
                    &slice(&diff.after_text, after_funcs[j].span),
                );
                let better = match best {
                    None => true,
                    Some((bs, bi, bj)) => {
                        sim > bs || (sim == bs && (i, j) < (bi, bj))
                    }
                };
                if better {
                    best = Some((sim, i, j));
                }
            }
        }
        let (sim, i, j) = best.expect("both sides non-empty");
        if sim < RENAME_SIM_MIN {
            break;
        }
        aligned.insert(i, j);
        orphans.retain(|&x| x != i);
        touched_added.retain(|&x| x != j);
    }

    for (i, partner) in touched_before {
        let partner = partner.or_else(|| aligned.get(&i).copied());
        let before = slice(&diff.before_text, before_funcs[i].span);
        let after = partner
            .map(|j| slice(&diff.after_text, after_funcs[j].span))
            .unwrap_or_default();
        let id = format!("{path}::{}", unit_name(&before_funcs[i]));
        merge_function(acc, id, before, after);
    }
    for j in touched_added {
        let after = slice(&diff.after_text, after_funcs[j].span);
        let id = format!("{path}::{}", unit_name(&after_funcs[j]));
        merge_function(acc, id, String::new(), after);
    }

    // Whatever changed outside every function span is file-scope noise:
    // includes, globals, macros.
    let outside = |nos: &[usize], lines: &[(usize, usize)], funcs: &[FuncInfo], texts: &[String]| {
        nos.iter()
            .zip(texts)
            .filter(|(&n, _)| {
                n.checked_sub(1)
                    .and_then(|i| lines.get(i))
                    .map(|&span| !funcs.iter().any(|f| span.0 < f.span.1 && f.span.0 < span.1))
                    .unwrap_or(true)
            })
            .map(|(_, t)| t.clone())
            .collect::<Vec<_>>()
    };
    let stray_removed = outside(&removed_nos, &before_lines, &before_funcs, &removed_texts);
    let stray_added = outside(&added_nos, &after_lines, &after_funcs, &added_texts);
    if !stray_removed.is_empty() || !stray_added.is_empty() {
        push_lines(acc, format!("{path}::{FILE_SCOPE}"), stray_removed, stray_added);
    }
    Ok(())
}

fn side_lines(diff: &FileDiff, origin: Origin) -> Vec<String> {
    diff.hunks
        .iter()
        .flat_map(|h| h.lines.iter().filter(|l| l.origin == origin))
        .map(|l| l.text.clone())
        .collect()
}

fn merge_function(acc: &mut BTreeMap<String, Draft>, id: String, before: String, after: String) {
    match acc.entry(id) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(Draft::Function { before, after });
        }
        std::collections::btree_map::Entry::Occupied(mut o) => match o.get_mut() {
            // Same unit touched by a later commit: keep the oldest before
            // side, adopt the newest after side.
            Draft::Function { after: a, .. } => *a = after,
            Draft::Lines { .. } => unreachable!("line and function ids never collide"),
        },
    }
}
