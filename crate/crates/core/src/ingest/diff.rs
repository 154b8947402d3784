//! Unified diff parsing, rendering, and hunk computation.

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Context,
    Removed,
    Added,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub origin: Origin,
    pub text: String,
}

/// One contiguous change region. Coordinates are 1-based line numbers as in
/// the `@@ -a,b +c,d @@` header; a zero-length side uses the line before the
/// hunk, matching unified-diff convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub before_start: usize,
    pub before_len: usize,
    pub after_start: usize,
    pub after_len: usize,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    /// The hunk's before-side lines: context plus removed, `before_len` of
    /// them.
    pub fn before_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.origin != Origin::Added)
            .map(|l| l.text.as_str())
            .collect()
    }

    /// The hunk's after-side lines: context plus added, `after_len` of them.
    pub fn after_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.origin != Origin::Removed)
            .map(|l| l.text.as_str())
            .collect()
    }

    /// Strictly removed lines, in order.
    pub fn removed_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.origin == Origin::Removed)
            .map(|l| l.text.as_str())
            .collect()
    }

    /// Strictly added lines, in order.
    pub fn added_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.origin == Origin::Added)
            .map(|l| l.text.as_str())
            .collect()
    }

    /// 1-based before-file line numbers of the strictly removed lines.
    pub fn removed_line_numbers(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lineno = self.before_start;
        for line in &self.lines {
            match line.origin {
                Origin::Context => lineno += 1,
                Origin::Removed => {
                    out.push(lineno);
                    lineno += 1;
                }
                Origin::Added => {}
            }
        }
        out
    }

    /// 1-based after-file line numbers of the strictly added lines.
    pub fn added_line_numbers(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lineno = self.after_start;
        for line in &self.lines {
            match line.origin {
                Origin::Context => lineno += 1,
                Origin::Added => {
                    out.push(lineno);
                    lineno += 1;
                }
                Origin::Removed => {}
            }
        }
        out
    }

    fn check_side_counts(&self) -> Result<(), String> {
        let b = self.lines.iter().filter(|l| l.origin != Origin::Added).count();
        let a = self.lines.iter().filter(|l| l.origin != Origin::Removed).count();
        if b != self.before_len {
            return Err(format!(
                "hunk declares {} before-side lines but carries {b}",
                self.before_len
            ));
        }
        if a != self.after_len {
            return Err(format!(
                "hunk declares {} after-side lines but carries {a}",
                self.after_len
            ));
        }
        Ok(())
    }
}

/// All changes of one file within a patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub path_before: Option<String>,
    pub path_after: Option<String>,
    pub hunks: Vec<Hunk>,
    #[serde(default)]
    pub before_text: String,
    #[serde(default)]
    pub after_text: String,
}

impl FileDiff {
    /// The display path: the after side when present, else the before side.
    pub fn path(&self) -> &str {
        self.path_after
            .as_deref()
            .or(self.path_before.as_deref())
            .unwrap_or("<unknown>")
    }

    /// Checks hunk ordering, coordinate ranges against the attached texts,
    /// and side-line counts against the headers.
    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |reason: String| IngestError::InvalidDiff {
            path: self.path().to_string(),
            reason,
        };
        let before_count = count_lines(&self.before_text);
        let after_count = count_lines(&self.after_text);
        let mut prev_end = 0usize;
        for hunk in &self.hunks {
            hunk.check_side_counts().map_err(fail)?;
            if hunk.before_len > 0 && hunk.before_start == 0 {
                return Err(fail("non-empty before range starts at line 0".into()));
            }
            if hunk.before_start < prev_end {
                return Err(fail("hunks overlap or are out of order".into()));
            }
            prev_end = hunk.before_start + hunk.before_len;
            if !self.before_text.is_empty() || hunk.before_len > 0 {
                let end = hunk.before_start.saturating_sub(1) + hunk.before_len;
                if end > before_count {
                    return Err(fail(format!(
                        "before range ends at line {end} but file has {before_count} lines"
                    )));
                }
            }
            if !self.after_text.is_empty() || hunk.after_len > 0 {
                let end = hunk.after_start.saturating_sub(1) + hunk.after_len;
                if end > after_count {
                    return Err(fail(format!(
                        "after range ends at line {end} but file has {after_count} lines"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Confirms the hunk bodies agree with the attached full texts.
    pub fn validate_content(&self) -> Result<(), IngestError> {
        self.validate()?;
        let before: Vec<&str> = self.before_text.lines().collect();
        let after: Vec<&str> = self.after_text.lines().collect();
        for hunk in &self.hunks {
            let b = hunk.before_lines();
            let start = hunk.before_start.saturating_sub(1);
            if before.len() < start + b.len() || before[start..start + b.len()] != b[..] {
                return Err(IngestError::InvalidDiff {
                    path: self.path().to_string(),
                    reason: format!("hunk at -{} disagrees with before text", hunk.before_start),
                });
            }
            let a = hunk.after_lines();
            let start = hunk.after_start.saturating_sub(1);
            if after.len() < start + a.len() || after[start..start + a.len()] != a[..] {
                return Err(IngestError::InvalidDiff {
                    path: self.path().to_string(),
                    reason: format!("hunk at +{} disagrees with after text", hunk.after_start),
                });
            }
        }
        Ok(())
    }
}

fn count_lines(text: &str) -> usize {
    text.lines().count()
}

fn parse_range(spec: &str, line_no: usize) -> Result<(usize, usize), IngestError> {
    let body = &spec[1..];
    let (start, len) = match body.split_once(',') {
        Some((s, l)) => (s, l),
        None => (body, "1"),
    };
    let start = start
        .parse()
        .map_err(|_| IngestError::DiffSyntaxError { line: line_no })?;
    let len = len
        .parse()
        .map_err(|_| IngestError::DiffSyntaxError { line: line_no })?;
    Ok((start, len))
}

fn parse_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim();
    if raw == "/dev/null" {
        return None;
    }
    let stripped = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(stripped.to_string())
}

/// Parses a unified diff, possibly covering several files. Lines outside
/// `---`/`+++`/`@@` sections (git headers, mode lines) are ignored.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, IngestError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut diffs = Vec::new();
    let mut i = 0usize;
    while i < lines.len() {
        if !lines[i].starts_with("--- ") {
            i += 1;
            continue;
        }
        let header_line = i + 1;
        let path_before = parse_path(&lines[i][4..]);
        i += 1;
        if i >= lines.len() || !lines[i].starts_with("+++ ") {
            return Err(IngestError::DiffSyntaxError { line: header_line });
        }
        let path_after = parse_path(&lines[i][4..]);
        i += 1;
        let mut hunks = Vec::new();
        while i < lines.len() && lines[i].starts_with("@@ ") {
            let hunk_line = i + 1;
            let header = lines[i];
            let mut parts = header[3..].split(" @@").next().unwrap_or("").split(' ');
            let before_spec = parts.next().unwrap_or("");
            let after_spec = parts.next().unwrap_or("");
            if !before_spec.starts_with('-') || !after_spec.starts_with('+') {
                return Err(IngestError::DiffSyntaxError { line: hunk_line });
            }
            let (before_start, before_len) = parse_range(before_spec, hunk_line)?;
            let (after_start, after_len) = parse_range(after_spec, hunk_line)?;
            i += 1;
            let mut body = Vec::new();
            let mut seen_before = 0usize;
            let mut seen_after = 0usize;
            while seen_before < before_len || seen_after < after_len {
                if i >= lines.len() {
                    return Err(IngestError::DiffSyntaxError { line: i });
                }
                let raw = lines[i];
                let body_line = i + 1;
                i += 1;
                if raw.starts_with('\\') {
                    continue;
                }
                let (origin, text) = match raw.chars().next() {
                    Some(' ') => (Origin::Context, &raw[1..]),
                    Some('-') => (Origin::Removed, &raw[1..]),
                    Some('+') => (Origin::Added, &raw[1..]),
                    None => (Origin::Context, ""),
                    _ => return Err(IngestError::DiffSyntaxError { line: body_line }),
                };
                match origin {
                    Origin::Context => {
                        seen_before += 1;
                        seen_after += 1;
                    }
                    Origin::Removed => seen_before += 1,
                    Origin::Added => seen_after += 1,
                }
                if seen_before > before_len || seen_after > after_len {
                    return Err(IngestError::DiffSyntaxError { line: body_line });
                }
                body.push(DiffLine {
                    origin,
                    text: text.to_string(),
                });
            }
            // Trailing "no newline" markers belong to the hunk.
            while i < lines.len() && lines[i].starts_with('\\') {
                i += 1;
            }
            hunks.push(Hunk {
                before_start,
                before_len,
                after_start,
                after_len,
                lines: body,
            });
        }
        diffs.push(FileDiff {
            path_before,
            path_after,
            hunks,
            before_text: String::new(),
            after_text: String::new(),
        });
    }
    Ok(diffs)
}

/// Renders file diffs back to unified-diff text.
pub fn render_unified_diff(diffs: &[FileDiff]) -> String {
    let mut out = String::new();
    for diff in diffs {
        let a = diff.path_before.as_deref().unwrap_or("/dev/null");
        let b = diff.path_after.as_deref().unwrap_or("/dev/null");
        out.push_str(&format!("--- {a}\n+++ {b}\n"));
        for hunk in &diff.hunks {
            out.push_str(&format!(
                "@@ -{},{} +{},{} @@\n",
                hunk.before_start, hunk.before_len, hunk.after_start, hunk.after_len
            ));
            for line in &hunk.lines {
                let marker = match line.origin {
                    Origin::Context => ' ',
                    Origin::Removed => '-',
                    Origin::Added => '+',
                };
                out.push(marker);
                out.push_str(&line.text);
                out.push('\n');
            }
        }
    }
    out
}

/// Computes zero-context hunks between two texts.
pub fn diff_texts(before: &str, after: &str) -> Vec<Hunk> {
    use similar::{ChangeTag, TextDiff};
    let diff = TextDiff::from_lines(before, after);
    let mut hunks = Vec::new();
    for group in diff.grouped_ops(0) {
        let mut lines = Vec::new();
        let mut before_start = usize::MAX;
        let mut after_start = usize::MAX;
        let mut before_len = 0usize;
        let mut after_len = 0usize;
        for op in &group {
            if before_start == usize::MAX {
                before_start = op.old_range().start;
                after_start = op.new_range().start;
            }
            for change in diff.iter_changes(op) {
                let text = change.value().trim_end_matches('\n').to_string();
                match change.tag() {
                    ChangeTag::Equal => {
                        before_len += 1;
                        after_len += 1;
                        lines.push(DiffLine {
                            origin: Origin::Context,
                            text,
                        });
                    }
                    ChangeTag::Delete => {
                        before_len += 1;
                        lines.push(DiffLine {
                            origin: Origin::Removed,
                            text,
                        });
                    }
                    ChangeTag::Insert => {
                        after_len += 1;
                        lines.push(DiffLine {
                            origin: Origin::Added,
                            text,
                        });
                    }
                }
            }
        }
        // Reorder each replace run so removed lines precede added ones,
        // then convert 0-based starts to the unified convention.
        hunks.push(Hunk {
            before_start: if before_len > 0 { before_start + 1 } else { before_start },
            before_len,
            after_start: if after_len > 0 { after_start + 1 } else { after_start },
            after_len,
            lines,
        });
    }
    hunks
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = "--- a/f.c\n+++ b/f.c\n@@ -1,1 +1,1 @@\n-x\n+y\n";

    #[test]
    fn parses_single_hunk() {
        let diffs = parse_unified_diff(SIMPLE).unwrap();
        assert_eq!(diffs.len(), 1);
        let d = &diffs[0];
        assert_eq!(d.path_before.as_deref(), Some("f.c"));
        assert_eq!(d.path_after.as_deref(), Some("f.c"));
        assert_eq!(d.hunks.len(), 1);
        let h = &d.hunks[0];
        assert_eq!((h.before_start, h.before_len, h.after_start, h.after_len), (1, 1, 1, 1));
        assert_eq!(h.removed_lines(), vec!["x"]);
        assert_eq!(h.added_lines(), vec!["y"]);
    }

    #[test]
    fn two_file_sections_in_order() {
        let text = format!("{SIMPLE}--- a/g.c\n+++ b/g.c\n@@ -2,1 +2,2 @@\n x\n+y\n");
        let diffs = parse_unified_diff(&text).unwrap();
        assert_eq!(diffs.len(), 2);
        assert_eq!(diffs[1].path(), "g.c");
        assert_eq!(diffs[1].hunks[0].added_line_numbers(), vec![3]);
    }

    #[test]
    fn truncated_hunk_is_an_error() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1,2 +1,2 @@\n-x\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert!(matches!(err, IngestError::DiffSyntaxError { .. }));
    }

    #[test]
    fn garbage_inside_hunk_reports_line() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1,2 +1,1 @@\n-x\n*oops\n";
        match parse_unified_diff(text).unwrap_err() {
            IngestError::DiffSyntaxError { line } => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn git_headers_are_skipped() {
        let text = format!(
            "diff --git a/f.c b/f.c\nindex 111..222 100644\n{SIMPLE}"
        );
        let diffs = parse_unified_diff(&text).unwrap();
        assert_eq!(diffs.len(), 1);
    }

    #[test]
    fn render_parse_round_trip_preserves_coordinates() {
        let before = "a\nb\nc\nd\n";
        let after = "a\nB\nc\nd\ne\n";
        let hunks = diff_texts(before, after);
        let diff = FileDiff {
            path_before: Some("f.c".into()),
            path_after: Some("f.c".into()),
            hunks: hunks.clone(),
            before_text: String::new(),
            after_text: String::new(),
        };
        let text = render_unified_diff(&[diff]);
        let parsed = parse_unified_diff(&text).unwrap();
        assert_eq!(parsed[0].hunks, hunks);
    }

    #[test]
    fn diff_texts_reports_pure_addition() {
        let hunks = diff_texts("", "a\nb\nc\n");
        assert_eq!(hunks.len(), 1);
        let h = &hunks[0];
        assert_eq!(h.before_len, 0);
        assert_eq!(h.after_len, 3);
        assert_eq!(h.added_lines(), vec!["a", "b", "c"]);
        assert_eq!(h.after_start, 1);
    }

    #[test]
    fn diff_texts_empty_when_equal() {
        assert!(diff_texts("a\nb\n", "a\nb\n").is_empty());
        assert!(diff_texts("", "").is_empty());
    }

    #[test]
    fn validate_checks_ranges_and_content() {
        let before = "one\ntwo\nthree\n";
        let after = "one\nTWO\nthree\n";
        let mut diff = FileDiff {
            path_before: Some("f.c".into()),
            path_after: Some("f.c".into()),
            hunks: diff_texts(before, after),
            before_text: before.into(),
            after_text: after.into(),
        };
        diff.validate_content().unwrap();
        diff.hunks[0].before_start = 3;
        assert!(diff.validate_content().is_err());
    }

    #[test]
    fn dev_null_paths_become_none() {
        let text = "--- /dev/null\n+++ b/new.c\n@@ -0,0 +1,1 @@\n+int x;\n";
        let diffs = parse_unified_diff(text).unwrap();
        assert_eq!(diffs[0].path_before, None);
        assert_eq!(diffs[0].path(), "new.c");
    }
}
