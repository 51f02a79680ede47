use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::store::{EmbeddingKind, EmbeddingStore};
use super::{RecallError, TokenEmbeddings};
use crate::corpus::SentenceRecord;
use crate::ontology::{EventTypeDef, Ontology};

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "with", "from", "into", "onto", "that", "this", "was", "were", "are", "its", "their", "them",
    "then", "than", "has", "have", "had", "been", "all", "not", "but", "who", "which", "one", "two", "any",
];

/// Deterministic stand-in for a trained token encoder.
///
/// Each word is reduced to a crude stem (lowercase, first six characters,
/// short words and a few function words skipped) and mapped to a unit vector drawn
/// from a generator seeded by `(seed, stem)`. Texts sharing stems score
/// high against each other, which is enough to exercise recall and the
/// downstream pipeline reproducibly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudoEncoder {
    pub dim: usize,
    pub seed: u64,
}

impl PseudoEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        PseudoEncoder { dim, seed }
    }

    fn stems(text: &str) -> Vec<String> {
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| w.to_lowercase().chars().take(6).collect())
            .collect();
        let long: Vec<String> =
            words.iter().filter(|w| w.chars().count() >= 3 && !STOPWORDS.contains(&w.as_str())).cloned().collect();
        if long.is_empty() {
            words
        } else {
            long
        }
    }

    fn row(&self, stem: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(stem.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    pub fn encode(&self, owner: &str, text: &str) -> Result<TokenEmbeddings, RecallError> {
        let mut stems = Self::stems(text);
        if stems.is_empty() {
            stems.push(String::new());
        }
        TokenEmbeddings::new(owner, stems.iter().map(|s| self.row(s)).collect())
    }

    /// Encodes a type from its name followed by its description.
    pub fn encode_type(&self, def: &EventTypeDef) -> Result<TokenEmbeddings, RecallError> {
        self.encode(&def.id, &format!("{} {}", def.name.replace('_', " "), def.description))
    }

    /// Store holding every ontology type and every record's sentence.
    pub fn build_store(&self, ontology: &Ontology, records: &[SentenceRecord]) -> Result<EmbeddingStore, RecallError> {
        let mut store = EmbeddingStore::new(self.dim);
        for t in ontology.types() {
            store.insert(EmbeddingKind::Type, self.encode_type(t)?)?;
        }
        for r in records {
            store.insert(EmbeddingKind::Sentence, self.encode(&r.id, &r.text)?)?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recall::latesim_score;

    #[test]
    fn deterministic_unit_rows() {
        let enc = PseudoEncoder::new(8, 7);
        let a = enc.encode("a", "they were negotiating at Dayton").unwrap();
        assert_eq!(a, enc.encode("a", "they were negotiating at Dayton").unwrap());
        assert_eq!(a.rows().len(), 3);
        for row in a.rows() {
            let n: f64 = row.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_ne!(a, PseudoEncoder::new(8, 8).encode("a", "they were negotiating at Dayton").unwrap());
    }

    #[test]
    fn shared_stems_score_higher() {
        let enc = PseudoEncoder::new(32, 1);
        let s = enc.encode("s", "they were negotiating a truce").unwrap();
        let close = enc.encode("t", "negotiation").unwrap();
        let far = enc.encode("u", "earthquake").unwrap();
        assert!(latesim_score(&s, &close).unwrap() > latesim_score(&s, &far).unwrap());
    }
}
