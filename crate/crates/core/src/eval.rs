//! Micro-averaged precision, recall and F1 for trigger identification (TI),
//! trigger classification (TC), argument identification (AI) and argument
//! classification (AC).
//!
//! Matching is on exact character offsets. Keys per mode:
//!
//! | mode | key |
//! |------|-----|
//! | TI | sentence, trigger span |
//! | TC | sentence, trigger span, type |
//! | AI | sentence, type, filler span (plus trigger span when anchored) |
//! | AC | AI key plus role |
//!
//! Duplicate keys collapse before counting.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("sentence {id:?} has different text in prediction and gold files")]
    TextMismatch { id: String },
    #[error("sentence {id:?} appears more than once in the {side} file")]
    DuplicateSentence { id: String, side: &'static str },
    #[error("true positives {tp} exceed a total (pred {pred_total}, gold {gold_total})")]
    InvalidCounts { tp: usize, pred_total: usize, gold_total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchMode {
    TI,
    TC,
    AI,
    AC,
}

impl MatchMode {
    pub const ALL: [MatchMode; 4] = [MatchMode::TI, MatchMode::TC, MatchMode::AI, MatchMode::AC];
}

/// Whether argument keys include the trigger span of their event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentAnchor {
    #[default]
    EventType,
    EventTypeAndTrigger,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Trigger { span: (usize, usize), type_id: Option<String> },
    Argument { type_id: String, trigger: Option<(usize, usize)>, span: (usize, usize), role: Option<String> },
}

fn record_keys(record: &SentenceRecord, mode: MatchMode, anchor: ArgumentAnchor) -> BTreeSet<Key> {
    let mut keys = BTreeSet::new();
    for event in &record.events {
        let m = &event.mention;
        match mode {
            MatchMode::TI | MatchMode::TC => {
                keys.insert(Key::Trigger {
                    span: m.trigger.key(),
                    type_id: (mode == MatchMode::TC).then(|| m.type_id.clone()),
                });
            }
            MatchMode::AI | MatchMode::AC => {
                for arg in &event.arguments {
                    for filler in &arg.fillers {
                        keys.insert(Key::Argument {
                            type_id: m.type_id.clone(),
                            trigger: (anchor == ArgumentAnchor::EventTypeAndTrigger).then(|| m.trigger.key()),
                            span: filler.key(),
                            role: (mode == MatchMode::AC).then(|| arg.role.clone()),
                        });
                    }
                }
            }
        }
    }
    keys
}

fn index<'a>(
    records: &'a [SentenceRecord],
    side: &'static str,
) -> Result<HashMap<&'a str, &'a SentenceRecord>, EvalError> {
    let mut map = HashMap::new();
    for r in records {
        if map.insert(r.id.as_str(), r).is_some() {
            return Err(EvalError::DuplicateSentence { id: r.id.clone(), side });
        }
    }
    Ok(map)
}

type Paired<'a> = (&'a str, Option<&'a SentenceRecord>, Option<&'a SentenceRecord>);

fn paired<'a>(pred: &'a [SentenceRecord], gold: &'a [SentenceRecord]) -> Result<Vec<Paired<'a>>, EvalError> {
    let p = index(pred, "prediction")?;
    let g = index(gold, "gold")?;
    let ids: BTreeSet<&str> = p.keys().chain(g.keys()).copied().collect();
    ids.into_iter()
        .map(|id| {
            let (pr, gr) = (p.get(id).copied(), g.get(id).copied());
            if let (Some(a), Some(b)) = (pr, gr) {
                if a.text != b.text {
                    return Err(EvalError::TextMismatch { id: id.to_string() });
                }
            }
            Ok((id, pr, gr))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub pred_total: usize,
    pub gold_total: usize,
}

/// `(tp, pred_total, gold_total)` for one mode. Sentences missing from one
/// side count as empty there.
pub fn match_counts(
    pred: &[SentenceRecord],
    gold: &[SentenceRecord],
    mode: MatchMode,
    anchor: ArgumentAnchor,
) -> Result<Counts, EvalError> {
    let mut counts = Counts::default();
    for (_, p, g) in paired(pred, gold)? {
        let pk = p.map(|r| record_keys(r, mode, anchor)).unwrap_or_default();
        let gk = g.map(|r| record_keys(r, mode, anchor)).unwrap_or_default();
        counts.tp += pk.intersection(&gk).count();
        counts.pred_total += pk.len();
        counts.gold_total += gk.len();
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub pred_total: usize,
    pub gold_total: usize,
}

/// Precision, recall and F1 from counts. An empty prediction set has
/// precision 0 unless gold is empty too, in which case everything is 1.
pub fn prf(tp: usize, pred_total: usize, gold_total: usize) -> Result<Prf, EvalError> {
    if tp > pred_total || tp > gold_total {
        return Err(EvalError::InvalidCounts { tp, pred_total, gold_total });
    }
    let (precision, recall) = if pred_total == 0 && gold_total == 0 {
        (1.0, 1.0)
    } else {
        let p = if pred_total == 0 { 0.0 } else { tp as f64 / pred_total as f64 };
        let r = if gold_total == 0 { 0.0 } else { tp as f64 / gold_total as f64 };
        (p, r)
    };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Prf { precision, recall, f1, tp, pred_total, gold_total })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceDiagnostics {
    pub id: String,
    pub pred_events: usize,
    pub gold_events: usize,
    pub tc_tp: usize,
    pub pred_arguments: usize,
    pub gold_arguments: usize,
    pub ac_tp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub convention: String,
    pub argument_anchor: ArgumentAnchor,
    #[serde(rename = "TI")]
    pub ti: Prf,
    #[serde(rename = "TC")]
    pub tc: Prf,
    #[serde(rename = "AI")]
    pub ai: Prf,
    #[serde(rename = "AC")]
    pub ac: Prf,
    pub sentences: Vec<SentenceDiagnostics>,
}

impl EvalReport {
    pub fn get(&self, mode: MatchMode) -> &Prf {
        match mode {
            MatchMode::TI => &self.ti,
            MatchMode::TC => &self.tc,
            MatchMode::AI => &self.ai,
            MatchMode::AC => &self.ac,
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub const CONVENTION: &str =
    "micro-averaged over exact character-offset matches; duplicate keys collapse; (0,0,0) scores 1.0";

/// Scores predictions against gold in all four modes.
///
/// Also checks that the correct TC keys are a subset of the correct TI keys
/// (and AC of AI); a violation would mean the key construction is broken
/// and panics.
pub fn evaluate(
    pred: &[SentenceRecord],
    gold: &[SentenceRecord],
    anchor: ArgumentAnchor,
) -> Result<EvalReport, EvalError> {
    let pairs = paired(pred, gold)?;
    let mut totals: BTreeMap<MatchMode, Counts> = BTreeMap::new();
    let mut sentences = Vec::with_capacity(pairs.len());
    for (id, p, g) in pairs {
        let mut correct: BTreeMap<MatchMode, BTreeSet<Key>> = BTreeMap::new();
        let mut diag = SentenceDiagnostics {
            id: id.to_string(),
            pred_events: 0,
            gold_events: 0,
            tc_tp: 0,
            pred_arguments: 0,
            gold_arguments: 0,
            ac_tp: 0,
        };
        for mode in MatchMode::ALL {
            let pk = p.map(|r| record_keys(r, mode, anchor)).unwrap_or_default();
            let gk = g.map(|r| record_keys(r, mode, anchor)).unwrap_or_default();
            let hit: BTreeSet<Key> = pk.intersection(&gk).cloned().collect();
            let c = totals.entry(mode).or_default();
            c.tp += hit.len();
            c.pred_total += pk.len();
            c.gold_total += gk.len();
            match mode {
                MatchMode::TC => (diag.pred_events, diag.gold_events, diag.tc_tp) = (pk.len(), gk.len(), hit.len()),
                MatchMode::AC => {
                    (diag.pred_arguments, diag.gold_arguments, diag.ac_tp) = (pk.len(), gk.len(), hit.len())
                }
                _ => {}
            }
            correct.insert(mode, hit);
        }
        assert_monotone(&correct);
        sentences.push(diag);
    }
    let score = |m: MatchMode| {
        let c = totals.get(&m).copied().unwrap_or_default();
        prf(c.tp, c.pred_total, c.gold_total)
    };
    let report = EvalReport {
        convention: CONVENTION.to_string(),
        argument_anchor: anchor,
        ti: score(MatchMode::TI)?,
        tc: score(MatchMode::TC)?,
        ai: score(MatchMode::AI)?,
        ac: score(MatchMode::AC)?,
        sentences,
    };
    assert!(report.tc.tp <= report.ti.tp && report.ac.tp <= report.ai.tp);
    Ok(report)
}

fn assert_monotone(correct: &BTreeMap<MatchMode, BTreeSet<Key>>) {
    let strip = |k: &Key| match k {
        Key::Trigger { span, .. } => Key::Trigger { span: *span, type_id: None },
        Key::Argument { type_id, trigger, span, .. } => {
            Key::Argument { type_id: type_id.clone(), trigger: *trigger, span: *span, role: None }
        }
    };
    for (fine, coarse) in [(MatchMode::TC, MatchMode::TI), (MatchMode::AC, MatchMode::AI)] {
        for k in &correct[&fine] {
            assert!(correct[&coarse].contains(&strip(k)), "{fine:?} hit has no {coarse:?} counterpart");
        }
    }
}
