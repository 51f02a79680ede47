//! Sentences, spans, trigger candidates and finished event structures, plus
//! the canonical line-delimited file format shared by corpora, predictions
//! and gold files.
//!
//! Offsets are character (Unicode scalar) positions, `start` inclusive and
//! `end` exclusive.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::Ontology;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {record:?}: {message}")]
    InvalidSpan { record: String, message: String },
    #[error("record {record:?}: unknown event type {type_id:?}")]
    UnknownType { record: String, type_id: String },
    #[error("record {record:?}: role {role:?} is not defined for type {type_id:?}")]
    UnknownRole { record: String, type_id: String, role: String },
    #[error("record {record:?}: {message}")]
    InvalidCandidate { record: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Span {
    /// Builds a span over `text`, deriving the surface from the offsets.
    pub fn over(text: &str, start: usize, end: usize) -> Option<Span> {
        if start >= end {
            return None;
        }
        let surface: String = text.chars().skip(start).take(end - start).collect();
        (surface.chars().count() == end - start).then_some(Span { start, end, surface })
    }

    pub fn key(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    /// Checks the span invariants against its owning sentence.
    pub fn check(&self, text: &str) -> Result<(), String> {
        if self.start >= self.end {
            return Err(format!("empty or inverted span [{}, {})", self.start, self.end));
        }
        let len = text.chars().count();
        if self.end > len {
            return Err(format!("span [{}, {}) out of bounds for text of length {len}", self.start, self.end));
        }
        let actual: String = text.chars().skip(self.start).take(self.end - self.start).collect();
        if actual != self.surface {
            return Err(format!(
                "surface mismatch at [{}, {}): expected {:?}, text has {:?}",
                self.start, self.end, self.surface, actual
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerCandidate {
    #[serde(flatten)]
    pub span: Span,
    #[serde(rename = "candidate_types")]
    pub candidate_type_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub trigger: Span,
    #[serde(rename = "type")]
    pub type_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentMention {
    pub role: String,
    pub fillers: Vec<Span>,
}

/// An event mention together with its arguments. Serialized flat, as
/// `{trigger, type, arguments}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    #[serde(flatten)]
    pub mention: EventMention,
    #[serde(default)]
    pub arguments: Vec<ArgumentMention>,
}

impl Event {
    pub fn new(mention: EventMention, arguments: Vec<ArgumentMention>) -> Self {
        Event { mention, arguments }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub candidates: Vec<TriggerCandidate>,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl SentenceRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        SentenceRecord { id: id.into(), text: text.into(), candidates: Vec::new(), events: Vec::new() }
    }

    fn check_spans(&self) -> Result<(), CorpusError> {
        let spans = self.candidates.iter().map(|c| &c.span).chain(self.events.iter().flat_map(|e| {
            std::iter::once(&e.mention.trigger).chain(e.arguments.iter().flat_map(|a| a.fillers.iter()))
        }));
        for span in spans {
            span.check(&self.text).map_err(|message| CorpusError::InvalidSpan { record: self.id.clone(), message })?;
        }
        Ok(())
    }

    fn check_types(&self, ontology: &Ontology) -> Result<(), CorpusError> {
        for cand in &self.candidates {
            if cand.candidate_type_ids.is_empty() {
                return Err(CorpusError::InvalidCandidate {
                    record: self.id.clone(),
                    message: format!("candidate {:?} has no candidate types", cand.span.surface),
                });
            }
            for (i, id) in cand.candidate_type_ids.iter().enumerate() {
                if !ontology.contains(id) {
                    return Err(CorpusError::UnknownType { record: self.id.clone(), type_id: id.clone() });
                }
                if cand.candidate_type_ids[..i].contains(id) {
                    return Err(CorpusError::InvalidCandidate {
                        record: self.id.clone(),
                        message: format!("duplicate candidate type {id:?}"),
                    });
                }
            }
        }
        for event in &self.events {
            let Some(def) = ontology.get(&event.mention.type_id) else {
                return Err(CorpusError::UnknownType {
                    record: self.id.clone(),
                    type_id: event.mention.type_id.clone(),
                });
            };
            for arg in &event.arguments {
                if def.role(&arg.role).is_none() {
                    return Err(CorpusError::UnknownRole {
                        record: self.id.clone(),
                        type_id: def.id.clone(),
                        role: arg.role.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn read_records<R: BufRead>(source: R) -> Result<Vec<SentenceRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed { line: i + 1, message: e.to_string() })?;
        record.check_spans()?;
        records.push(record);
    }
    Ok(records)
}

/// Reads records and verifies span invariants only. Used where no ontology
/// is at hand, e.g. when scoring prediction files.
pub fn read_corpus<R: BufRead>(source: R) -> Result<Vec<SentenceRecord>, CorpusError> {
    read_records(source)
}

/// Reads records in file order and verifies spans and type references.
pub fn load_corpus<R: BufRead>(source: R, ontology: &Ontology) -> Result<Vec<SentenceRecord>, CorpusError> {
    let records = read_records(source)?;
    for r in &records {
        r.check_types(ontology)?;
    }
    Ok(records)
}

/// Leftmost exact, case-sensitive occurrence of `surface` in `text` whose
/// offsets are not already in `excluded`.
pub fn ground_surface(text: &str, surface: &str, excluded: &[Span]) -> Option<Span> {
    if surface.is_empty() {
        return None;
    }
    let width = surface.chars().count();
    text.char_indices()
        .enumerate()
        .filter(|(_, (byte, _))| text[*byte..].starts_with(surface))
        .map(|(start, _)| (start, start + width))
        .find(|&(start, end)| !excluded.iter().any(|s| s.start == start && s.end == end))
        .map(|(start, end)| Span { start, end, surface: surface.to_string() })
}

/// Sorts everything into canonical order and merges duplicate
/// `(trigger span, type)` events, unioning their arguments by `(role, span)`.
pub fn canonicalize_record(record: &SentenceRecord) -> SentenceRecord {
    let mut candidates = record.candidates.clone();
    candidates
        .sort_by(|a, b| a.span.key().cmp(&b.span.key()).then_with(|| a.candidate_type_ids.cmp(&b.candidate_type_ids)));
    candidates.dedup();

    type ArgSets = BTreeMap<String, BTreeMap<(usize, usize), Span>>;
    let mut merged: BTreeMap<((usize, usize), String), (Span, ArgSets)> = BTreeMap::new();
    for event in &record.events {
        let key = (event.mention.trigger.key(), event.mention.type_id.clone());
        let entry = merged.entry(key).or_insert_with(|| (event.mention.trigger.clone(), BTreeMap::new()));
        for arg in &event.arguments {
            let fillers = entry.1.entry(arg.role.clone()).or_default();
            for f in &arg.fillers {
                fillers.insert(f.key(), f.clone());
            }
        }
    }
    let events = merged
        .into_iter()
        .map(|((_, type_id), (trigger, args))| Event {
            mention: EventMention { trigger, type_id },
            arguments: args
                .into_iter()
                .filter(|(_, fillers)| !fillers.is_empty())
                .map(|(role, fillers)| ArgumentMention { role, fillers: fillers.into_values().collect() })
                .collect(),
        })
        .collect();

    SentenceRecord { id: record.id.clone(), text: record.text.clone(), candidates, events }
}

/// Writes one compact JSON record per line. Returns the number of bytes
/// written.
pub fn write_corpus<W: Write>(records: &[SentenceRecord], mut sink: W) -> std::io::Result<u64> {
    let mut written = 0u64;
    for r in records {
        let mut line = serde_json::to_vec(r).map_err(std::io::Error::other)?;
        line.push(b'\n');
        sink.write_all(&line)?;
        written += line.len() as u64;
    }
    sink.flush()?;
    Ok(written)
}
