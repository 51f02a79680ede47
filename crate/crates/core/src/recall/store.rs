use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{RecallError, TokenEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Sentence,
    Type,
}

impl EmbeddingKind {
    fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Sentence => "sentence",
            EmbeddingKind::Type => "type",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    owner_id: String,
    kind: EmbeddingKind,
    rows: Vec<Vec<f64>>,
}

/// Sentence and type embeddings sharing one dimension. Immutable once
/// loaded.
///
/// File format: a `{"dimension": d}` header line, then one
/// `{"owner_id", "kind": "sentence"|"type", "rows": [[...], ...]}` record
/// per line.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    sentences: HashMap<String, TokenEmbeddings>,
    types: HashMap<String, TokenEmbeddings>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, sentences: HashMap::new(), types: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, kind: EmbeddingKind, embeddings: TokenEmbeddings) -> Result<(), RecallError> {
        if embeddings.dim() != self.dim {
            return Err(RecallError::DimensionMismatch { left: self.dim, right: embeddings.dim() });
        }
        let map = match kind {
            EmbeddingKind::Sentence => &mut self.sentences,
            EmbeddingKind::Type => &mut self.types,
        };
        if map.contains_key(embeddings.owner()) {
            return Err(RecallError::Duplicate { kind: kind.as_str(), id: embeddings.owner().to_string() });
        }
        map.insert(embeddings.owner().to_string(), embeddings);
        Ok(())
    }

    pub fn sentence(&self, id: &str) -> Result<&TokenEmbeddings, RecallError> {
        self.sentences.get(id).ok_or_else(|| RecallError::Missing { kind: "sentence", id: id.to_string() })
    }

    pub fn event_type(&self, id: &str) -> Result<&TokenEmbeddings, RecallError> {
        self.types.get(id).ok_or_else(|| RecallError::Missing { kind: "type", id: id.to_string() })
    }

    pub(crate) fn get_mut(&mut self, kind: EmbeddingKind, id: &str) -> Option<&mut TokenEmbeddings> {
        match kind {
            EmbeddingKind::Sentence => self.sentences.get_mut(id),
            EmbeddingKind::Type => self.types.get_mut(id),
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, RecallError> {
        let mut store: Option<EmbeddingStore> = None;
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fmt_err = |message: String| RecallError::Format { line: line_no, message };
            match store.as_mut() {
                None => {
                    let header: Header =
                        serde_json::from_str(&line).map_err(|e| fmt_err(format!("expected dimension header: {e}")))?;
                    if header.dimension == 0 {
                        return Err(fmt_err("dimension must be positive".into()));
                    }
                    store = Some(EmbeddingStore::new(header.dimension));
                }
                Some(s) => {
                    let entry: Entry = serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?;
                    let embeddings =
                        TokenEmbeddings::new(entry.owner_id, entry.rows).map_err(|e| fmt_err(e.to_string()))?;
                    s.insert(entry.kind, embeddings).map_err(|e| fmt_err(e.to_string()))?;
                }
            }
        }
        store.ok_or_else(|| RecallError::Format { line: 0, message: "missing dimension header".into() })
    }

    /// Writes the header, then sentences and types each sorted by owner id.
    pub fn write<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut sink, &Header { dimension: self.dim }).map_err(std::io::Error::other)?;
        sink.write_all(b"\n")?;
        for (kind, map) in [(EmbeddingKind::Sentence, &self.sentences), (EmbeddingKind::Type, &self.types)] {
            let mut ids: Vec<_> = map.keys().collect();
            ids.sort();
            for id in ids {
                let entry = Entry { owner_id: id.clone(), kind, rows: map[id].rows().to_vec() };
                serde_json::to_writer(&mut sink, &entry).map_err(std::io::Error::other)?;
                sink.write_all(b"\n")?;
            }
        }
        sink.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_and_write_round_trip() {
        let src = "{\"dimension\":2}\n{\"owner_id\":\"s1\",\"kind\":\"sentence\",\"rows\":[[1.0,0.0],[0.6,0.8]]}\n{\"owner_id\":\"war\",\"kind\":\"type\",\"rows\":[[0.0,1.0]]}\n";
        let store = EmbeddingStore::load(src.as_bytes()).unwrap();
        assert_eq!((store.sentence_count(), store.type_count()), (1, 1));
        let mut out = Vec::new();
        store.write(&mut out).unwrap();
        assert_eq!(EmbeddingStore::load(&out[..]).unwrap(), store);
    }

    #[test]
    fn rejects_mixed_dimensions() {
        let src = "{\"dimension\":2}\n{\"owner_id\":\"s1\",\"kind\":\"sentence\",\"rows\":[[1.0,0.0,0.0]]}\n";
        assert!(matches!(EmbeddingStore::load(src.as_bytes()), Err(RecallError::Format { line: 2, .. })));
    }

    #[test]
    fn requires_header() {
        assert!(EmbeddingStore::load(&b""[..]).is_err());
        let src = "{\"owner_id\":\"s1\",\"kind\":\"sentence\",\"rows\":[[1.0]]}\n";
        assert!(matches!(EmbeddingStore::load(src.as_bytes()), Err(RecallError::Format { line: 1, .. })));
    }

    #[test]
    fn missing_lookup_names_id() {
        let store = EmbeddingStore::new(2);
        let err = store.event_type("parley").unwrap_err();
        assert_eq!(err.to_string(), "no type embedding for \"parley\"");
    }
}
