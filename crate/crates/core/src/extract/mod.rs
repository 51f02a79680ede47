//! Partitioned extraction: recall candidate types, split them into parts,
//! detect events per part with class-style prompts, merge, then extract the
//! arguments of each detected event with its type's schema alone.

mod grammar;
mod schema;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{parse_terms, Term, Value};
pub use schema::{render_eae_prompt, render_ed_prompt, render_schema_block, ARGUMENT_EXTRACTION, EVENT_DETECTION};

use crate::annotate::RoleMap;
use crate::batch::{map_records, QuarantineEntry};
use crate::corpus::{canonicalize_record, ground_surface, ArgumentMention, Event, EventMention, SentenceRecord, Span};
use crate::gateway::{
    complete_parsed, DecodingParams, GatewayError, LlmClient, PromptRequest, DEFAULT_MAX_PARSE_ATTEMPTS,
};
use crate::ontology::{EventTypeDef, Ontology};
use crate::partition::{make_plan, PartitionError, Strategy, DEFAULT_PARTITIONS};
use crate::recall::{recall_topk, EmbeddingStore, RecallError, DEFAULT_TOP_K};

/// Role fillers parsed from an argument-extraction answer.
pub type ParsedArguments = RoleMap;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Recall(#[from] RecallError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("event type {0:?} is not in the ontology")]
    UnknownType(String),
    #[error("invalid extraction config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractSettings {
    pub top_k: usize,
    pub partitions: usize,
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub decoding: DecodingParams,
    pub max_parse_attempts: u32,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        ExtractSettings {
            top_k: DEFAULT_TOP_K,
            partitions: DEFAULT_PARTITIONS,
            strategy: Strategy::Level,
            seed: None,
            decoding: DecodingParams::extraction(),
            max_parse_attempts: DEFAULT_MAX_PARSE_ATTEMPTS,
        }
    }
}

impl ExtractSettings {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let err = |m: String| Err(ExtractError::Config(m));
        if self.top_k == 0 {
            return err("top_k must be at least 1".into());
        }
        if self.partitions == 0 {
            return err("partitions must be at least 1".into());
        }
        if self.partitions > self.top_k {
            return err(format!("partitions ({}) must not exceed top_k ({})", self.partitions, self.top_k));
        }
        if self.strategy == Strategy::Random && self.seed.is_none() {
            return err("the random strategy needs a seed".into());
        }
        if self.max_parse_attempts == 0 {
            return err("max_parse_attempts must be at least 1".into());
        }
        self.decoding.validate()?;
        Ok(())
    }
}

/// Backends for detection and argument extraction plus the settings.
#[derive(Debug, Clone)]
pub struct ExtractConfig {
    pub ed_backend: LlmClient,
    pub eae_backend: LlmClient,
    pub settings: ExtractSettings,
}

impl ExtractConfig {
    pub fn new(ed_backend: LlmClient, eae_backend: LlmClient) -> Self {
        ExtractConfig { ed_backend, eae_backend, settings: ExtractSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ParsedEvent {
    pub identifier: String,
    pub type_id: String,
    pub trigger: String,
}

/// Reads a detection answer. Identifiers outside `part` are dropped and
/// logged; repeated `(identifier, trigger)` pairs are kept once.
pub fn parse_ed_output(text: &str, part: &[&EventTypeDef], ontology: &Ontology) -> Result<Vec<ParsedEvent>, String> {
    let terms = parse_terms(text)?;
    let allowed: BTreeMap<&str, &str> =
        part.iter().filter_map(|t| ontology.identifier(&t.id).map(|i| (i, t.id.as_str()))).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for term in terms {
        let trigger = match term.arg("trigger") {
            Some(Value::Str(s)) => s.clone(),
            Some(_) => return Err(format!("{}: trigger must be a string", term.ident)),
            None => return Err(format!("{}: missing trigger", term.ident)),
        };
        let Some(type_id) = allowed.get(term.ident.as_str()) else {
            tracing::info!(identifier = %term.ident, "dropped event type outside the partition");
            continue;
        };
        if seen.insert((term.ident.clone(), trigger.clone())) {
            out.push(ParsedEvent { identifier: term.ident, type_id: type_id.to_string(), trigger });
        }
    }
    Ok(out)
}

/// Reads an argument answer for type `t`: exactly one instance of `t`'s
/// class. Unknown fields are dropped and logged; missing roles stay empty.
pub fn parse_eae_output(text: &str, t: &EventTypeDef, ontology: &Ontology) -> Result<ParsedArguments, String> {
    let mut terms = parse_terms(text)?;
    if terms.len() != 1 {
        return Err(format!("expected one instance, got {}", terms.len()));
    }
    let term = terms.remove(0);
    let ident = ontology.identifier(&t.id).unwrap_or(&t.id);
    if term.ident != ident {
        return Err(format!("expected an instance of {ident}, got {}", term.ident));
    }
    let fields = t.role_fields();
    let mut raw = Vec::new();
    for (key, value) in term.args {
        if key == "trigger" {
            continue;
        }
        match fields.iter().position(|f| *f == key) {
            Some(i) => raw.push((t.roles[i].name.clone(), value.into_list())),
            None => tracing::info!(identifier = ident, field = %key, "dropped unknown role field"),
        }
    }
    Ok(RoleMap::from_raw(t, raw).0)
}

/// Counters for one record or a whole run. All fields add.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub sentences: usize,
    pub events: usize,
    pub arguments: usize,
    /// Requests re-sent because the previous answer did not parse.
    pub parse_retries: usize,
    /// Triggers and fillers that could not be located in the sentence.
    pub dropped_ungrounded: usize,
    /// Detection partitions whose answers never parsed.
    pub partition_failures: usize,
    /// Events whose argument answers never parsed.
    pub argument_failures: usize,
    pub quarantined: usize,
}

impl ExtractionReport {
    pub fn merge(&mut self, o: &ExtractionReport) {
        self.sentences += o.sentences;
        self.events += o.events;
        self.arguments += o.arguments;
        self.parse_retries += o.parse_retries;
        self.dropped_ungrounded += o.dropped_ungrounded;
        self.partition_failures += o.partition_failures;
        self.argument_failures += o.argument_failures;
        self.quarantined += o.quarantined;
    }
}

/// Calls `complete_parsed`, turning parse exhaustion into `None` and
/// counting retries.
fn attempt_parsed<T, F>(
    client: &LlmClient,
    req: &PromptRequest,
    parser: F,
    max_attempts: u32,
    report: &mut ExtractionReport,
) -> Result<Option<T>, ExtractError>
where
    F: Fn(&str) -> Result<T, String>,
{
    match complete_parsed(client, req, parser, max_attempts) {
        Ok((v, attempt)) => {
            report.parse_retries += attempt as usize - 1;
            Ok(Some(v))
        }
        Err(GatewayError::ParseExhausted { attempts, last_error, .. }) => {
            report.parse_retries += attempts as usize - 1;
            tracing::warn!(tag = %req.tag, attempts, error = %last_error, "answer never parsed");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Recall, partition, detect per partition, merge and ground.
///
/// Triggers are grounded to their leftmost occurrence not already taken by
/// the same type. Distinct `(span, type)` pairs are all kept.
pub fn detect_events(
    record: &SentenceRecord,
    ontology: &Ontology,
    store: &EmbeddingStore,
    cfg: &ExtractConfig,
) -> Result<(Vec<EventMention>, ExtractionReport), ExtractError> {
    let s = &cfg.settings;
    let recalled = recall_topk(&record.id, store, ontology, s.top_k)?;
    let parts = s.partitions.min(recalled.len());
    if parts < s.partitions {
        tracing::debug!(record = %record.id, recalled = recalled.len(), "fewer recalled types than partitions");
    }
    let plan = make_plan(s.strategy, &recalled, parts, s.seed)?;
    let results: Vec<(Vec<ParsedEvent>, ExtractionReport)> = plan
        .parts
        .par_iter()
        .enumerate()
        .map(|(i, part)| {
            let defs: Vec<&EventTypeDef> = part
                .iter()
                .map(|c| ontology.get(&c.type_id).ok_or_else(|| ExtractError::UnknownType(c.type_id.clone())))
                .collect::<Result<_, _>>()?;
            let req = PromptRequest::new(
                render_ed_prompt(&defs, ontology, &record.text),
                s.decoding,
                format!("ed/{}/p{}", record.id, i + 1),
            );
            let mut report = ExtractionReport::default();
            let parsed = attempt_parsed(
                &cfg.ed_backend,
                &req,
                |t| parse_ed_output(t, &defs, ontology),
                s.max_parse_attempts,
                &mut report,
            )?;
            if parsed.is_none() {
                report.partition_failures += 1;
            }
            Ok((parsed.unwrap_or_default(), report))
        })
        .collect::<Result<_, ExtractError>>()?;

    let mut report = ExtractionReport::default();
    let mut merged: BTreeSet<(String, String)> = BTreeSet::new();
    for (events, r) in &results {
        report.merge(r);
        merged.extend(events.iter().map(|e| (e.type_id.clone(), e.trigger.clone())));
    }
    let mut used: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    let mut mentions = Vec::new();
    for (type_id, trigger) in merged {
        let taken = used.entry(type_id.clone()).or_default();
        match ground_surface(&record.text, &trigger, taken) {
            Some(span) => {
                taken.push(span.clone());
                mentions.push(EventMention { trigger: span, type_id });
            }
            None => {
                report.dropped_ungrounded += 1;
                tracing::info!(record = %record.id, trigger = %trigger, type_id = %type_id, "dropped ungroundable trigger");
            }
        }
    }
    mentions.sort_by(|a, b| (a.trigger.key(), &a.type_id).cmp(&(b.trigger.key(), &b.type_id)));
    Ok((mentions, report))
}

/// Argument extraction for one grounded mention. Parse exhaustion yields no
/// arguments.
pub fn extract_arguments(
    record: &SentenceRecord,
    mention: &EventMention,
    ontology: &Ontology,
    cfg: &ExtractConfig,
) -> Result<(Vec<ArgumentMention>, ExtractionReport), ExtractError> {
    let mut report = ExtractionReport::default();
    let t = ontology.get(&mention.type_id).ok_or_else(|| ExtractError::UnknownType(mention.type_id.clone()))?;
    if t.roles.is_empty() {
        return Ok((Vec::new(), report));
    }
    let s = &cfg.settings;
    let req = PromptRequest::new(
        render_eae_prompt(t, ontology, &mention.trigger.surface, &record.text),
        s.decoding,
        format!("eae/{}/{}-{}/{}", record.id, mention.trigger.start, mention.trigger.end, t.id),
    );
    let parsed = attempt_parsed(
        &cfg.eae_backend,
        &req,
        |text| parse_eae_output(text, t, ontology),
        s.max_parse_attempts,
        &mut report,
    )?;
    let Some(map) = parsed else {
        report.argument_failures += 1;
        return Ok((Vec::new(), report));
    };
    let (args, dropped) = map.ground(&record.text);
    report.dropped_ungrounded += dropped;
    Ok((args, report))
}

/// Detection then argument extraction for one record, as a prediction
/// record (no candidates).
pub fn extract_record(
    record: &SentenceRecord,
    ontology: &Ontology,
    store: &EmbeddingStore,
    cfg: &ExtractConfig,
) -> Result<(SentenceRecord, ExtractionReport), ExtractError> {
    let (mentions, mut report) = detect_events(record, ontology, store, cfg)?;
    let results: Vec<(Vec<ArgumentMention>, ExtractionReport)> =
        mentions.par_iter().map(|m| extract_arguments(record, m, ontology, cfg)).collect::<Result<_, _>>()?;
    let mut events = Vec::with_capacity(mentions.len());
    for (m, (args, r)) in mentions.into_iter().zip(results) {
        report.merge(&r);
        events.push(Event::new(m, args));
    }
    let out = canonicalize_record(&SentenceRecord {
        id: record.id.clone(),
        text: record.text.clone(),
        candidates: Vec::new(),
        events,
    });
    report.sentences = 1;
    report.events = out.events.len();
    report.arguments = out.events.iter().flat_map(|e| &e.arguments).map(|a| a.fillers.len()).sum();
    Ok((out, report))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractionRun {
    pub records: Vec<SentenceRecord>,
    pub quarantined: Vec<QuarantineEntry>,
    pub report: ExtractionReport,
}

/// Extracts every record on a pool of `parallelism` workers, quarantining
/// records that fail.
pub fn run_extraction(
    corpus: &[SentenceRecord],
    ontology: &Ontology,
    store: &EmbeddingStore,
    cfg: &ExtractConfig,
    parallelism: usize,
) -> Result<ExtractionRun, ExtractError> {
    cfg.settings.validate()?;
    let results = map_records(corpus, parallelism, |r| extract_record(r, ontology, store, cfg));
    let mut run = ExtractionRun::default();
    for (record, result) in corpus.iter().zip(results) {
        match result {
            Ok((rec, report)) => {
                run.report.merge(&report);
                run.records.push(rec);
            }
            Err(e) => {
                tracing::warn!(record = %record.id, error = %e, "record quarantined");
                run.report.sentences += 1;
                run.report.quarantined += 1;
                run.quarantined.push(QuarantineEntry { id: record.id.clone(), error: e.to_string() });
            }
        }
    }
    Ok(run)
}
