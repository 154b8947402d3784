//! Token-sequence similarity via longest common subsequence.

use serde::{Deserialize, Serialize};

use crate::seq::lcs_len;
use crate::tree::TokenSequence;

/// How the raw LCS length is normalized into a fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimNorm {
    /// 2·|LCS| / (|a| + |b|)
    #[default]
    Dice,
    /// |LCS| / max(|a|, |b|)
    Max,
}

/// Similarity of two encoded change sequences under `norm`, in [0, 1].
/// Two empty sequences count as identical.
pub fn lcs_similarity_with(a: &TokenSequence, b: &TokenSequence, norm: SimNorm) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let l = lcs_len(a.tokens(), b.tokens()) as f64;
    match norm {
        SimNorm::Dice => 2.0 * l / (a.len() + b.len()) as f64,
        SimNorm::Max => l / a.len().max(b.len()) as f64,
    }
}

/// Dice-normalized similarity, the default used throughout.
pub fn lcs_similarity(a: &TokenSequence, b: &TokenSequence) -> f64 {
    lcs_similarity_with(a, b, SimNorm::Dice)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::new(tokens.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn identity_is_one() {
        let s = seq(&["A", "B", "C"]);
        assert_eq!(lcs_similarity(&s, &s), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(lcs_similarity(&seq(&["A", "B", "C"]), &seq(&["X", "Y", "Z"])), 0.0);
    }

    #[test]
    fn partial_overlap() {
        let v = lcs_similarity(&seq(&["A", "B", "C"]), &seq(&["A", "X", "C"]));
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cases() {
        let e = seq(&[]);
        let s = seq(&["A"]);
        assert_eq!(lcs_similarity(&e, &e), 1.0);
        assert_eq!(lcs_similarity(&e, &s), 0.0);
        assert_eq!(lcs_similarity_with(&e, &e, SimNorm::Max), 1.0);
    }

    #[test]
    fn symmetry() {
        let a = seq(&["A", "B", "A", "C"]);
        let b = seq(&["B", "A", "C", "C", "A"]);
        assert_eq!(lcs_similarity(&a, &b), lcs_similarity(&b, &a));
        assert_eq!(
            lcs_similarity_with(&a, &b, SimNorm::Max),
            lcs_similarity_with(&b, &a, SimNorm::Max)
        );
    }

    #[test]
    fn norms_agree_on_equal_lengths_only() {
        let a = seq(&["A", "B"]);
        let b = seq(&["A", "B", "C", "D"]);
        let dice = lcs_similarity_with(&a, &b, SimNorm::Dice);
        let max = lcs_similarity_with(&a, &b, SimNorm::Max);
        assert!((dice - 2.0 * 2.0 / 6.0).abs() < 1e-12);
        assert!((max - 2.0 / 4.0).abs() < 1e-12);
    }
}
