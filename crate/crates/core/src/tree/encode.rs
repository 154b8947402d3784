//! Flattening edit scripts and line diffs into comparable token sequences.
//!
//! Two changes are "the same fix" when their token sequences are similar,
//! so the encoding keeps node types and identifiers but collapses string
//! and character literal values, whose exact text rarely matters to what a
//! patch does.

use serde::{Deserialize, Serialize};

use super::script::{EditAction, EditScript};
use crate::seq::whitespace_lexemes;

/// Normalized token form of one change, ready for similarity comparison.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn normalize_label(node_type: &str, label: &str) -> String {
    if node_type == "string_literal" || node_type == "char_literal" {
        "<LIT>".to_string()
    } else {
        label.to_string()
    }
}

/// Encodes a syntax-level edit script, one token per action.
pub fn encode_script(script: &EditScript) -> TokenSequence {
    let tokens = script
        .iter()
        .map(|action| match action {
            EditAction::Insert {
                node_type, label, ..
            } => match label {
                Some(l) => format!("INS:{}:{}", node_type, normalize_label(node_type, l)),
                None => format!("INS:{node_type}"),
            },
            EditAction::Delete {
                node_type, label, ..
            } => match label {
                Some(l) => format!("DEL:{}:{}", node_type, normalize_label(node_type, l)),
                None => format!("DEL:{node_type}"),
            },
            EditAction::Update {
                node_type,
                new_label,
                ..
            } => match new_label {
                Some(l) => format!("UPD:{}:{}", node_type, normalize_label(node_type, l)),
                None => format!("UPD:{node_type}"),
            },
            EditAction::Move {
                node_type,
                parent_type,
                ..
            } => format!("MOV:{node_type}:{parent_type}"),
        })
        .collect();
    TokenSequence(tokens)
}

/// Encodes a line-level change: every whitespace-separated lexeme of the
/// removed lines, then every lexeme of the added lines.
pub fn encode_line_diff(removed: &[String], added: &[String]) -> TokenSequence {
    let mut tokens = Vec::new();
    for line in removed {
        for lex in whitespace_lexemes(line) {
            tokens.push(format!("DEL:{lex}"));
        }
    }
    for line in added {
        for lex in whitespace_lexemes(line) {
            tokens.push(format!("ADD:{lex}"));
        }
    }
    TokenSequence(tokens)
}
