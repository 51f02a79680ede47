//! Multi-annotator labeling of pre-annotated sentences: trigger filtering,
//! type refinement as a multiple-choice vote, argument annotation with
//! self-alignment, filler voting, and adjudication of disputed roles.

mod parse;
mod prompts;
mod rolemap;
mod voting;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::{map_records, QuarantineEntry};
use crate::corpus::{
    canonicalize_record, ground_surface, ArgumentMention, Event, EventMention, SentenceRecord, Span, TriggerCandidate,
};
use crate::gateway::{
    complete_parsed, DecodingParams, GatewayError, LlmClient, PromptRequest, DEFAULT_MAX_PARSE_ATTEMPTS,
};
use crate::ontology::{EventTypeDef, Ontology};

pub use parse::{parse_filter_response, parse_refinement_response, parse_role_json};
pub use prompts::{
    adjudication_prompt, alignment_prompt, argument_prompt, filter_prompt, refinement_prompt, ARGUMENT_ANNOTATION,
    MAX_REFINEMENT_OPTIONS, MULTI_INPUT_ALIGNMENT, OFFSET_ALIGNMENT, TRIGGER_FILTERING, TYPE_REFINEMENT,
};
pub use rolemap::RoleMap;
pub use voting::{
    majority_vote, plurality, vote_arguments, Choice, Decision, DisputeRecord, RefinementBallot, ThresholdMode,
    Verdict, VoteOutcome,
};

pub const DEFAULT_MAX_ROUNDS: u32 = 5;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("candidate type {0:?} is not in the ontology")]
    UnknownType(String),
    #[error("{count} candidate types exceed the {MAX_REFINEMENT_OPTIONS} letterable options")]
    TooManyOptions { count: usize },
    #[error("candidate has no candidate types")]
    NoCandidateTypes,
    #[error("invalid annotation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSettings {
    pub max_filter_rounds: u32,
    pub max_refinement_rounds: u32,
    pub vote_threshold_mode: ThresholdMode,
    pub decoding: DecodingParams,
    pub max_parse_attempts: u32,
}

impl Default for AnnotationSettings {
    fn default() -> Self {
        AnnotationSettings {
            max_filter_rounds: DEFAULT_MAX_ROUNDS,
            max_refinement_rounds: DEFAULT_MAX_ROUNDS,
            vote_threshold_mode: ThresholdMode::StrictMajority,
            decoding: DecodingParams::annotation(),
            max_parse_attempts: DEFAULT_MAX_PARSE_ATTEMPTS,
        }
    }
}

/// The annotator panel, the adjudicator, and the voting settings.
#[derive(Debug, Clone)]
pub struct AnnotationConfig {
    pub annotators: Vec<LlmClient>,
    pub adjudicator: LlmClient,
    pub settings: AnnotationSettings,
}

impl AnnotationConfig {
    pub fn new(annotators: Vec<LlmClient>, adjudicator: LlmClient) -> Result<Self, AnnotateError> {
        let cfg = AnnotationConfig { annotators, adjudicator, settings: AnnotationSettings::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AnnotateError> {
        let s = &self.settings;
        if self.annotators.is_empty() {
            return Err(AnnotateError::Config("at least one annotator is required".into()));
        }
        if s.max_filter_rounds == 0 || s.max_refinement_rounds == 0 {
            return Err(AnnotateError::Config("round caps must be at least 1".into()));
        }
        if s.max_parse_attempts == 0 {
            return Err(AnnotateError::Config("max_parse_attempts must be at least 1".into()));
        }
        s.decoding.validate()?;
        Ok(())
    }

    fn request(&self, text: String, tag: String) -> PromptRequest {
        PromptRequest::new(text, self.settings.decoding, tag)
    }
}

fn span_tag(step: &str, record: &SentenceRecord, span: &Span) -> String {
    format!("{step}/{}/{}-{}", record.id, span.start, span.end)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterOutcome {
    pub keep: bool,
    pub rounds: u32,
    /// Still tied when the round cap was reached.
    pub unresolved: bool,
    /// Verdicts of the deciding (or last) round.
    pub verdicts: Vec<Verdict>,
}

/// Majority vote on whether the candidate trigger is a real event. Ties are
/// re-asked in fresh rounds up to the cap, after which the candidate is
/// dropped as unresolved.
pub fn filter_trigger(
    record: &SentenceRecord,
    cand: &TriggerCandidate,
    cfg: &AnnotationConfig,
) -> Result<FilterOutcome, AnnotateError> {
    let text = filter_prompt(&record.text, cand);
    let surface = cand.span.surface.as_str();
    let mut verdicts = Vec::new();
    for round in 1..=cfg.settings.max_filter_rounds {
        let req = cfg.request(text.clone(), format!("{}/r{round}", span_tag("filter", record, &cand.span)));
        verdicts = cfg
            .annotators
            .par_iter()
            .map(|a| {
                let (keep, _) =
                    complete_parsed(a, &req, |t| parse_filter_response(t, surface), cfg.settings.max_parse_attempts)?;
                Ok(Verdict {
                    annotator: a.name().to_string(),
                    decision: if keep { Decision::Valid } else { Decision::Invalid },
                })
            })
            .collect::<Result<Vec<_>, AnnotateError>>()?;
        match majority_vote(&verdicts) {
            VoteOutcome::Valid => return Ok(FilterOutcome { keep: true, rounds: round, unresolved: false, verdicts }),
            VoteOutcome::Invalid => {
                return Ok(FilterOutcome { keep: false, rounds: round, unresolved: false, verdicts })
            }
            VoteOutcome::Tie => tracing::debug!(record = %record.id, surface, round, "filter vote tied"),
        }
    }
    Ok(FilterOutcome { keep: false, rounds: cfg.settings.max_filter_rounds, unresolved: true, verdicts })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefineOutcome {
    /// The chosen type, or `None` when the candidate is dropped.
    pub type_id: Option<String>,
    pub rounds: u32,
    pub unresolved: bool,
    pub ballots: Vec<RefinementBallot>,
}

/// Multiple-choice vote over the candidate's types plus "None of them".
/// The plurality winner is taken; ties go to a fresh round up to the cap.
pub fn refine_event_type(
    record: &SentenceRecord,
    cand: &TriggerCandidate,
    ontology: &Ontology,
    cfg: &AnnotationConfig,
) -> Result<RefineOutcome, AnnotateError> {
    let options: Vec<&EventTypeDef> = cand
        .candidate_type_ids
        .iter()
        .map(|id| ontology.get(id).ok_or_else(|| AnnotateError::UnknownType(id.clone())))
        .collect::<Result<_, _>>()?;
    if options.is_empty() {
        return Err(AnnotateError::NoCandidateTypes);
    }
    if options.len() > MAX_REFINEMENT_OPTIONS {
        return Err(AnnotateError::TooManyOptions { count: options.len() });
    }
    let text = refinement_prompt(&record.text, &cand.span.surface, &options);
    let count = options.len() + 1;
    let mut ballots = Vec::new();
    for round in 1..=cfg.settings.max_refinement_rounds {
        let req = cfg.request(text.clone(), format!("{}/r{round}", span_tag("refine", record, &cand.span)));
        ballots = cfg
            .annotators
            .par_iter()
            .map(|a| {
                let (idx, _) =
                    complete_parsed(a, &req, |t| parse_refinement_response(t, count), cfg.settings.max_parse_attempts)?;
                let choice = options.get(idx).map_or(Choice::NoneOfThem, |d| Choice::Type(d.id.clone()));
                Ok(RefinementBallot { annotator: a.name().to_string(), choice })
            })
            .collect::<Result<Vec<_>, AnnotateError>>()?;
        if let Some(choice) = plurality(&ballots) {
            let type_id = match choice {
                Choice::Type(id) => Some(id),
                Choice::NoneOfThem => None,
            };
            return Ok(RefineOutcome { type_id, rounds: round, unresolved: false, ballots });
        }
        tracing::debug!(record = %record.id, surface = %cand.span.surface, round, "refinement vote tied");
    }
    Ok(RefineOutcome { type_id: None, rounds: cfg.settings.max_refinement_rounds, unresolved: true, ballots })
}

fn role_map_from(text: &str, def: &EventTypeDef, context: &str, annotator: &LlmClient) -> Result<RoleMap, String> {
    let raw = parse_role_json(text)?;
    let (map, unknown) = RoleMap::from_raw(def, raw);
    if !unknown.is_empty() {
        tracing::info!(backend = annotator.name(), context, roles = ?unknown, "discarded roles outside the schema");
    }
    Ok(map)
}

/// One annotator's first-pass argument map for an event. Types without
/// roles yield an empty map without a call.
pub fn annotate_arguments_single(
    record: &SentenceRecord,
    event: &EventMention,
    def: &EventTypeDef,
    annotator: &LlmClient,
    cfg: &AnnotationConfig,
) -> Result<RoleMap, AnnotateError> {
    if def.roles.is_empty() {
        return Ok(RoleMap::empty_for(def));
    }
    let tag = format!("{}/{}", span_tag("args", record, &event.trigger), def.id);
    let req = cfg.request(argument_prompt(&record.text, def, &event.trigger.surface), tag);
    let (map, _) = complete_parsed(
        annotator,
        &req,
        |t| role_map_from(t, def, &req.tag, annotator),
        cfg.settings.max_parse_attempts,
    )?;
    Ok(map)
}

/// Drops fillers that do not occur in the sentence.
fn keep_grounded(map: &mut RoleMap, record: &SentenceRecord, context: &str) {
    map.retain_fillers(|role, f| {
        let ok = ground_surface(&record.text, f, &[]).is_some();
        if !ok {
            tracing::info!(record = %record.id, context, role, filler = f, "dropped filler absent from sentence");
        }
        ok
    });
}

/// Asks the same annotator to tighten its own map, then drops any filler
/// that does not occur in the sentence.
pub fn align_offsets(
    record: &SentenceRecord,
    event: &EventMention,
    def: &EventTypeDef,
    raw: &RoleMap,
    annotator: &LlmClient,
    cfg: &AnnotationConfig,
) -> Result<RoleMap, AnnotateError> {
    if def.roles.is_empty() {
        return Ok(RoleMap::empty_for(def));
    }
    let tag = format!("{}/{}", span_tag("align", record, &event.trigger), def.id);
    let req = cfg.request(alignment_prompt(&record.text, def, &event.trigger.surface, raw), tag);
    let (mut map, _) = complete_parsed(
        annotator,
        &req,
        |t| role_map_from(t, def, &req.tag, annotator),
        cfg.settings.max_parse_attempts,
    )?;
    keep_grounded(&mut map, record, &req.tag);
    Ok(map)
}

/// Sends every annotator's raw map to the adjudicator and returns a map in
/// which only the disputed roles are filled; everything else stays empty.
pub fn adjudicate_arguments(
    record: &SentenceRecord,
    event: &EventMention,
    def: &EventTypeDef,
    per_annotator: &[RoleMap],
    disputes: &[DisputeRecord],
    cfg: &AnnotationConfig,
) -> Result<RoleMap, AnnotateError> {
    let tag = format!("{}/{}", span_tag("adjudicate", record, &event.trigger), def.id);
    let req = cfg.request(adjudication_prompt(&record.text, def, per_annotator), tag);
    let adjudicator = &cfg.adjudicator;
    let (mut map, _) = complete_parsed(
        adjudicator,
        &req,
        |t| role_map_from(t, def, &req.tag, adjudicator),
        cfg.settings.max_parse_attempts,
    )?;
    keep_grounded(&mut map, record, &req.tag);
    let mut out = RoleMap::empty_for(def);
    for d in disputes {
        out.set(&d.role, map.get(&d.role).unwrap_or(&[]).to_vec());
    }
    Ok(out)
}

/// Counters for one record or a whole run. All fields add.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationReport {
    pub records: usize,
    pub candidates: usize,
    /// Candidates rejected by the filtering vote, including unresolved ties.
    pub filtered: usize,
    pub refined: usize,
    /// Candidates whose refinement vote chose "None of them".
    pub dropped_none: usize,
    pub disputes: usize,
    /// Filter or refinement votes still tied at the round cap.
    pub unresolved: usize,
    pub quarantined: usize,
}

impl AnnotationReport {
    pub fn merge(&mut self, other: &AnnotationReport) {
        self.records += other.records;
        self.candidates += other.candidates;
        self.filtered += other.filtered;
        self.refined += other.refined;
        self.dropped_none += other.dropped_none;
        self.disputes += other.disputes;
        self.unresolved += other.unresolved;
        self.quarantined += other.quarantined;
    }
}

fn annotate_event(
    record: &SentenceRecord,
    mention: &EventMention,
    def: &EventTypeDef,
    cfg: &AnnotationConfig,
    report: &mut AnnotationReport,
) -> Result<Vec<ArgumentMention>, AnnotateError> {
    if def.roles.is_empty() {
        return Ok(Vec::new());
    }
    let pairs: Vec<(RoleMap, RoleMap)> = cfg
        .annotators
        .par_iter()
        .map(|a| {
            let raw = annotate_arguments_single(record, mention, def, a, cfg)?;
            let aligned = align_offsets(record, mention, def, &raw, a, cfg)?;
            Ok((raw, aligned))
        })
        .collect::<Result<_, AnnotateError>>()?;
    let (raw, aligned): (Vec<RoleMap>, Vec<RoleMap>) = pairs.into_iter().unzip();
    let (mut accepted, disputes) = vote_arguments(&aligned, cfg.settings.vote_threshold_mode);
    if !disputes.is_empty() {
        report.disputes += disputes.len();
        let settled = adjudicate_arguments(record, mention, def, &raw, &disputes, cfg)?;
        for d in &disputes {
            accepted.set(&d.role, settled.get(&d.role).unwrap_or(&[]).to_vec());
        }
    }
    Ok(accepted.ground(&record.text).0)
}

/// Runs every step for one record. The input's events are replaced by the
/// annotated ones; candidates are carried through.
pub fn annotate_record(
    record: &SentenceRecord,
    ontology: &Ontology,
    cfg: &AnnotationConfig,
) -> Result<(SentenceRecord, AnnotationReport), AnnotateError> {
    let mut report = AnnotationReport { records: 1, candidates: record.candidates.len(), ..Default::default() };
    let mut events = Vec::new();
    for cand in &record.candidates {
        let filtered = filter_trigger(record, cand, cfg)?;
        if !filtered.keep {
            report.filtered += 1;
            report.unresolved += usize::from(filtered.unresolved);
            continue;
        }
        let refined = refine_event_type(record, cand, ontology, cfg)?;
        let Some(type_id) = refined.type_id else {
            if refined.unresolved {
                report.unresolved += 1;
            } else {
                report.dropped_none += 1;
            }
            continue;
        };
        report.refined += 1;
        let def = ontology.get(&type_id).ok_or_else(|| AnnotateError::UnknownType(type_id.clone()))?;
        let mention = EventMention { trigger: cand.span.clone(), type_id };
        let arguments = annotate_event(record, &mention, def, cfg, &mut report)?;
        events.push(Event::new(mention, arguments));
    }
    let out = SentenceRecord { events, ..record.clone() };
    Ok((canonicalize_record(&out), report))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AnnotationRun {
    pub records: Vec<SentenceRecord>,
    pub quarantined: Vec<QuarantineEntry>,
    pub report: AnnotationReport,
}

/// Annotates every record on a pool of `parallelism` workers. A record that
/// fails is quarantined and the run continues. Output order and content do
/// not depend on the pool width.
pub fn run_annotation(
    corpus: &[SentenceRecord],
    ontology: &Ontology,
    cfg: &AnnotationConfig,
    parallelism: usize,
) -> Result<AnnotationRun, AnnotateError> {
    cfg.validate()?;
    let results = map_records(corpus, parallelism, |r| annotate_record(r, ontology, cfg));
    let mut run = AnnotationRun::default();
    for (record, result) in corpus.iter().zip(results) {
        match result {
            Ok((annotated, report)) => {
                run.report.merge(&report);
                run.records.push(annotated);
            }
            Err(e) => {
                tracing::warn!(record = %record.id, error = %e, "record quarantined");
                run.report.records += 1;
                run.report.candidates += record.candidates.len();
                run.report.quarantined += 1;
                run.quarantined.push(QuarantineEntry { id: record.id.clone(), error: e.to_string() });
            }
        }
    }
    Ok(run)
}
