//! Syntax trees, tree differencing, and edit script encoding.

mod clike;
mod encode;
mod matching;
mod script;
mod syntax;

pub use clike::CLikeGrammar;
pub use encode::{encode_line_diff, encode_script, TokenSequence};
pub use matching::{match_trees, MatchConfig, TreeMapping};
pub use script::{edit_script, EditAction, EditScript, ScriptError};
pub use syntax::{NodeId, Span, SyntaxTree, TreeBuilder, TreeError};

/// Position of a parse failure inside the source text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

/// A language front end the ingest layer can drive.
///
/// Implementations turn source text into a [`SyntaxTree`] and expose a plain
/// token stream for the text-level comparisons the cleaner needs.
pub trait GrammarAdapter: Send + Sync {
    /// Short language name, e.g. `"c"`.
    fn language(&self) -> &str;

    /// Whether this adapter wants to handle the given file path.
    fn handles_path(&self, path: &str) -> bool;

    /// Parses the full text of one file.
    fn parse(&self, text: &str) -> Result<SyntaxTree, ParseError>;

    /// Token lexemes in source order. With `keep_comments` set, comment
    /// bodies appear as tokens of their own; otherwise comments vanish
    /// exactly like whitespace.
    fn lex(&self, text: &str, keep_comments: bool) -> Vec<String>;
}
