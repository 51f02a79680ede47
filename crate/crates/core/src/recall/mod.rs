//! Late-interaction event-type recall.
//!
//! A sentence and an event type are each represented by a list of token
//! embeddings. Their score is the sum, over sentence tokens, of the best dot
//! product against any type token:
//!
//! ```text
//! score(s, e) = Σᵢ maxⱼ ⟨sᵢ, eⱼ⟩
//! ```
//!
//! With L2-normalized rows the dot product is cosine similarity. Embeddings
//! come from an external encoder through an [`EmbeddingStore`].

mod loss;
mod pseudo;
mod store;

use serde::Serialize;
use thiserror::Error;

use crate::ontology::Ontology;

pub use loss::{margin_loss, margin_loss_grad_check, GradCheck, TrainingPair};
pub use pseudo::PseudoEncoder;
pub use store::{EmbeddingKind, EmbeddingStore};

/// Number of recalled types handed to partitioning.
pub const DEFAULT_TOP_K: usize = 15;
/// Hinge margin used when none is configured.
pub const DEFAULT_MARGIN: f64 = 0.3;

#[derive(Debug, Error)]
pub enum RecallError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embeddings for {owner:?}: {message}")]
    InvalidEmbeddings { owner: String, message: String },
    #[error("no {kind} embedding for {id:?}")]
    Missing { kind: &'static str, id: String },
    #[error("duplicate {kind} embedding for {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("embedding store line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate evaluation point ({0}); re-seed the instance")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Token embeddings for one sentence or event type. Rows share one
/// dimension and hold finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    owner: String,
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl TokenEmbeddings {
    pub fn new(owner: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self, RecallError> {
        let owner = owner.into();
        let Some(first) = rows.first() else {
            return Err(RecallError::InvalidEmbeddings { owner, message: "no rows".into() });
        };
        let dim = first.len();
        if dim == 0 {
            return Err(RecallError::InvalidEmbeddings { owner, message: "zero-dimensional rows".into() });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(RecallError::InvalidEmbeddings {
                    owner,
                    message: format!("row {i} has dimension {}, expected {dim}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(RecallError::InvalidEmbeddings {
                    owner,
                    message: format!("row {i} has a non-finite entry"),
                });
            }
        }
        Ok(TokenEmbeddings { owner, dim, rows })
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

/// For each sentence row, the index of the best-matching event row (first
/// wins on exact ties) and its dot product.
pub(crate) fn best_matches(sentence: &TokenEmbeddings, event: &TokenEmbeddings) -> Vec<(usize, f64)> {
    sentence
        .rows
        .iter()
        .map(|s| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, e) in event.rows.iter().enumerate() {
                let d = dot(s, e);
                if d > best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

/// Sum over sentence rows of the maximum dot product with any event row.
/// Sentence rows are accumulated in order, starting from `0.0`.
pub fn latesim_score(sentence: &TokenEmbeddings, event: &TokenEmbeddings) -> Result<f64, RecallError> {
    if sentence.dim != event.dim {
        return Err(RecallError::DimensionMismatch { left: sentence.dim, right: event.dim });
    }
    let mut total = 0.0;
    for (_, best) in best_matches(sentence, event) {
        total += best;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCandidate {
    pub type_id: String,
    pub raw_score: f64,
    pub confidence: f64,
}

/// Min-max normalizes raw scores into confidences over the given set. A
/// constant set gets confidence 1 everywhere.
pub fn normalize_confidences(mut candidates: Vec<RecallCandidate>) -> Vec<RecallCandidate> {
    let (lo, hi) = candidates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.raw_score), hi.max(c.raw_score)));
    for c in &mut candidates {
        c.confidence = if hi > lo { (c.raw_score - lo) / (hi - lo) } else { 1.0 };
    }
    candidates
}

/// Scores every ontology type against the sentence and keeps the best `k`,
/// ties broken by ascending type id.
pub fn recall_topk(
    sentence_id: &str,
    store: &EmbeddingStore,
    ontology: &Ontology,
    k: usize,
) -> Result<Vec<RecallCandidate>, RecallError> {
    if k == 0 {
        return Err(RecallError::InvalidArgument("k must be at least 1".into()));
    }
    let sentence = store.sentence(sentence_id)?;
    let mut scored = ontology
        .types()
        .iter()
        .map(|t| {
            let e = store.event_type(&t.id)?;
            Ok(RecallCandidate { type_id: t.id.clone(), raw_score: latesim_score(sentence, e)?, confidence: 0.0 })
        })
        .collect::<Result<Vec<_>, RecallError>>()?;
    scored.sort_by(|a, b| b.raw_score.total_cmp(&a.raw_score).then_with(|| a.type_id.cmp(&b.type_id)));
    scored.truncate(k);
    if scored.is_empty() {
        return Ok(scored);
    }
    Ok(normalize_confidences(scored))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[&[f64]]) -> TokenEmbeddings {
        TokenEmbeddings::new("x", rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn score_examples() {
        let s = emb(&[&[1.0, 0.0], &[0.6, 0.8]]);
        assert_eq!(latesim_score(&s, &emb(&[&[0.0, 1.0]])).unwrap(), 0.8);
        assert_eq!(latesim_score(&s, &emb(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap(), 1.8);
    }

    #[test]
    fn score_dimension_mismatch() {
        let s = emb(&[&[1.0, 0.0]]);
        let e = emb(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(latesim_score(&s, &e), Err(RecallError::DimensionMismatch { left: 2, right: 3 })));
    }

    #[test]
    fn embeddings_reject_bad_rows() {
        assert!(TokenEmbeddings::new("a", vec![]).is_err());
        assert!(TokenEmbeddings::new("a", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(TokenEmbeddings::new("a", vec![vec![f64::NAN]]).is_err());
    }

    fn cands(scores: &[f64]) -> Vec<RecallCandidate> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| RecallCandidate { type_id: format!("t{i}"), raw_score: s, confidence: -1.0 })
            .collect()
    }

    fn confidences(c: Vec<RecallCandidate>) -> Vec<f64> {
        normalize_confidences(c).into_iter().map(|c| c.confidence).collect()
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(confidences(cands(&[2.0, 1.0, 0.0])), [1.0, 0.5, 0.0]);
        assert_eq!(confidences(cands(&[0.7, 0.7, 0.7])), [1.0, 1.0, 1.0]);
        assert_eq!(confidences(cands(&[3.0, 1.0])), [1.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn score_permutation_properties(
            s in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..6),
            e in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..6),
            shift in 0usize..6,
        ) {
            let se = TokenEmbeddings::new("s", s.clone()).unwrap();
            let ee = TokenEmbeddings::new("e", e.clone()).unwrap();
            let base = latesim_score(&se, &ee).unwrap();
            let mut e_rot = e.clone();
            e_rot.rotate_left(shift % e.len());
            // event-row order cannot change any max
            proptest::prop_assert_eq!(base, latesim_score(&se, &TokenEmbeddings::new("e", e_rot).unwrap()).unwrap());
            let mut s_rot = s.clone();
            s_rot.rotate_left(shift % s.len());
            let rotated = latesim_score(&TokenEmbeddings::new("s", s_rot).unwrap(), &ee).unwrap();
            proptest::prop_assert!((base - rotated).abs() < 1e-12);
        }

        #[test]
        fn normalized_rows_bound_the_score(
            s in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..8),
            e in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..8),
        ) {
            let norm = |rows: Vec<Vec<f64>>| -> Option<Vec<Vec<f64>>> {
                rows.into_iter().map(|r| {
                    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                    (n > 1e-9).then(|| r.iter().map(|v| v / n).collect())
                }).collect()
            };
            if let (Some(s), Some(e)) = (norm(s), norm(e)) {
                let n = s.len() as f64;
                let score = latesim_score(&TokenEmbeddings::new("s", s).unwrap(), &TokenEmbeddings::new("e", e).unwrap()).unwrap();
                proptest::prop_assert!(score <= n + 1e-9 && score >= -n - 1e-9);
            }
        }
    }
}
