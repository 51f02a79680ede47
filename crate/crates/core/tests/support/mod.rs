//! Simulated backends used to produce the frozen fixture scripts, plus
//! helpers shared by the integration tests.
//!
//! The simulations answer from hand-written tables. They are only run by
//! the gated bless step; the golden tests replay the recorded scripts.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use eventide::corpus::{read_corpus, SentenceRecord};
use eventide::gateway::{FnBackend, PromptRequest, Recorder, ScriptStore};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn blessing() -> bool {
    std::env::var_os("EVENTIDE_BLESS").is_some()
}

/// Value after the last occurrence of `marker`; skips the worked example.
pub fn last_field<'a>(text: &'a str, marker: &str) -> &'a str {
    let at = text.rfind(marker).map_or(text.len(), |i| i + marker.len());
    text[at..].lines().next().unwrap_or("").trim()
}

/// `(record id, "start-end")` to candidate surface.
fn surfaces(corpus: &[SentenceRecord]) -> HashMap<(String, String), String> {
    corpus
        .iter()
        .flat_map(|r| {
            r.candidates
                .iter()
                .map(move |c| ((r.id.clone(), format!("{}-{}", c.span.start, c.span.end)), c.span.surface.clone()))
        })
        .collect()
}

pub struct CandidatePlan {
    pub record: &'static str,
    pub surface: &'static str,
    pub filter: [bool; 3],
    /// Per round, the type id each annotator picks (`"none"` for the last option).
    pub refine: &'static [[&'static str; 3]],
    pub raw: [&'static str; 3],
    pub aligned: [&'static str; 3],
    pub judge: Option<&'static str>,
    /// `(step, annotator)` whose first attempt is unparseable.
    pub garbage: Option<(&'static str, usize)>,
}

const EMPTY: &str = "{}";

pub fn annotation_plans() -> Vec<CandidatePlan> {
    vec![
        CandidatePlan {
            record: "s01",
            surface: "negotiating",
            filter: [true, true, true],
            refine: &[["parley", "parley", "parley"]],
            raw: [
                r#"{"Negotiator": ["They"], "Other party": ["Milosevic"], "Location": ["at Dayton"]}"#,
                r#"{"Negotiator": ["they"], "Other party": ["Milosevic"], "Location": ["Dayton"]}"#,
                r#"{"Negotiator": ["they"], "Other party": ["with Milosevic"], "Location": []}"#,
            ],
            aligned: [
                r#"{"Negotiator": ["they"], "Other party": ["Milosevic"], "Location": ["Dayton"]}"#,
                r#"{"Negotiator": ["they"], "Other party": ["Milosevic"], "Location": ["Dayton"]}"#,
                r#"{"Negotiator": ["They"], "Other party": ["Milosevic"], "Location": []}"#,
            ],
            judge: None,
            garbage: Some(("args", 2)),
        },
        CandidatePlan {
            record: "s01",
            surface: "war",
            filter: [true, true, false],
            refine: &[["war", "war", "conflict"]],
            raw: [EMPTY, r#"{"Belligerent": ["they"]}"#, EMPTY],
            aligned: [EMPTY, r#"{"Belligerent": ["they"]}"#, EMPTY],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s02",
            surface: "voluntarily",
            filter: [false, false, false],
            refine: &[],
            raw: [EMPTY; 3],
            aligned: [EMPTY; 3],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s02",
            surface: "robbery",
            filter: [true, true, true],
            refine: &[["robbery", "robbery", "robbery"]],
            raw: [
                r#"{"Stolen thing": ["money"], "Victim": ["others"]}"#,
                r#"{"Stolen thing": ["money"], "Victim": ["others"]}"#,
                r#"{"Stolen thing": ["money", "money"]}"#,
            ],
            aligned: [
                r#"{"Stolen thing": ["money"], "Victim": ["others"]}"#,
                r#"{"Stolen thing": ["money"], "Victim": ["others"], "Perpetrator": ["Generosity"]}"#,
                r#"{"Stolen thing": ["money"]}"#,
            ],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s03",
            surface: "crime",
            filter: [true, true, true],
            refine: &[["crime", "crime", "crime"]],
            raw: [EMPTY; 3],
            aligned: [EMPTY; 3],
            judge: None,
            garbage: Some(("refine", 1)),
        },
        CandidatePlan {
            record: "s04",
            surface: "attacked",
            filter: [true, true, true],
            refine: &[["attack", "attack", "attack"]],
            raw: [
                r#"{"Agent": ["John and Sarah"], "Target": ["the enemy base"], "Time": ["at night"], "Location": ["the enemy base"]}"#,
                r#"{"Agent": ["John and Sarah"], "Target": ["the enemy base"], "Time": ["at night"], "Location": ["the enemy base"]}"#,
                r#"{"Agent": ["John", "Sarah"], "Target": ["base"], "Time": ["night"], "Purpose": ["conquest"]}"#,
            ],
            aligned: [
                r#"{"Agent": ["John", "Sarah"], "Target": ["enemy base"], "Time": ["night"], "Location": []}"#,
                r#"{"Agent": ["John", "Sarah"], "Target": ["enemy base"], "Time": ["night"], "Location": []}"#,
                r#"{"Agent": ["John", "Sarah"], "Target": ["base"], "Time": ["night"], "Location": []}"#,
            ],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s05",
            surface: "create",
            filter: [true, true, true],
            refine: &[["creation", "creation", "creation"]],
            raw: [
                r#"{"agent_creator": ["they"], "result_thing_created": ["a market"], "material_materials_used": [], "location": []}"#,
                r#"{"agent_creator": ["drug pushers"], "result_thing_created": ["market"], "material_materials_used": [], "location": []}"#,
                r#"{"agent_creator": ["they"], "result_thing_created": ["market"]}"#,
            ],
            aligned: [
                r#"{"agent_creator": ["they"], "result_thing_created": ["market"], "material_materials_used": [], "location": []}"#,
                r#"{"agent_creator": ["drug pushers"], "result_thing_created": ["market"], "material_materials_used": [], "location": []}"#,
                r#"{"agent_creator": ["they"], "result_thing_created": ["market"], "location": ["themselves"]}"#,
            ],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s06",
            surface: "occupied",
            filter: [true, true, true],
            refine: &[
                ["occupation", "military_occupation", "residence"],
                ["military_occupation", "military_occupation", "occupation"],
            ],
            raw: [
                r#"{"Occupier": ["The troops"], "Territory": ["the capital"], "Time": ["in 1940"]}"#,
                r#"{"Occupier": ["troops"], "Territory": ["capital"], "Time": ["1940"]}"#,
                r#"{"Occupier": ["troops"], "Territory": ["capital"]}"#,
            ],
            aligned: [
                r#"{"Occupier": ["troops"], "Territory": ["capital"], "Time": ["1940"]}"#,
                r#"{"Occupier": ["troops"], "Territory": ["capital"], "Time": ["1940"]}"#,
                r#"{"Occupier": ["troops"], "Territory": ["capital"], "Time": []}"#,
            ],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s07",
            surface: "clashed",
            filter: [true, true, true],
            refine: &[["clash", "clash", "clash"]],
            raw: [
                r#"{"Participant": ["Protesters", "police"], "Location": ["near the square"], "Time": ["on Monday"]}"#,
                r#"{"Participant": ["Protesters"], "Location": ["the square"], "Time": ["Monday"]}"#,
                r#"{"Participant": ["Protesters", "police"], "Location": ["police"], "Time": ["Monday"]}"#,
            ],
            aligned: [
                r#"{"Participant": ["Protesters", "police"], "Location": ["near the square"], "Time": ["Monday"]}"#,
                r#"{"Participant": ["Protesters"], "Location": ["square"], "Time": ["Monday"]}"#,
                r#"{"Participant": ["Protesters", "police"], "Location": ["police"], "Time": ["Monday"]}"#,
            ],
            judge: Some(r#"{"Participant": ["Protesters", "police"], "Location": ["square"], "Time": ["Monday"]}"#),
            garbage: None,
        },
        CandidatePlan {
            record: "s08",
            surface: "ran",
            filter: [true, true, false],
            refine: &[["none", "none", "running"]],
            raw: [EMPTY; 3],
            aligned: [EMPTY; 3],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s09",
            surface: "likely",
            filter: [false, false, true],
            refine: &[],
            raw: [EMPTY; 3],
            aligned: [EMPTY; 3],
            judge: None,
            garbage: None,
        },
        CandidatePlan {
            record: "s09",
            surface: "candidate",
            filter: [true, false, true],
            refine: &[["candidacy", "candidacy", "none"]],
            raw: [
                r#"{"Candidate": ["He"], "Office": ["mayor"]}"#,
                r#"{"Candidate": ["He"]}"#,
                r#"{"Candidate": ["He"], "Office": ["for mayor"]}"#,
            ],
            aligned: [
                r#"{"Candidate": ["He"], "Office": ["mayor"]}"#,
                r#"{"Candidate": ["He"], "Office": []}"#,
                r#"{"Candidate": ["He"], "Office": ["mayor"]}"#,
            ],
            judge: None,
            garbage: None,
        },
    ]
}

fn filter_answer(req: &PromptRequest, keep: bool) -> String {
    if keep {
        format!(
            "**Reasonable Annotations**: {}\n**Reasoning**: the word names an occurrence that fits the label.",
            last_field(&req.user_text, "**Annotations**:")
        )
    } else {
        "**Reasonable Annotations**: None of them.\n**Reasoning**: the word does not denote an event here.".into()
    }
}

/// Letter of the option whose name belongs to `type_id`, read from the
/// input section of the refinement prompt.
fn refine_answer(req: &PromptRequest, type_id: &str, names: &HashMap<String, String>) -> String {
    let input = &req.user_text[req.user_text.rfind("## Input").unwrap_or(0)..];
    let letter = input
        .lines()
        .filter_map(|l| {
            let (letter, rest) = l.split_once(". ")?;
            (letter.len() == 1).then_some((letter, rest))
        })
        .find(|(_, rest)| {
            if type_id == "none" {
                rest.starts_with("None of them")
            } else {
                names.get(type_id).is_some_and(|n| rest.starts_with(&format!("{n}: ")))
            }
        })
        .map(|(l, _)| l.to_string())
        .expect("option present");
    format!("**Event Type**: {letter}\n**Reasoning**: the sentence supports this option best.")
}

fn fenced(json: &str) -> String {
    format!("```json\n{json}\n```")
}

/// Annotator `idx` (0-based) of the simulated panel, or the judge when
/// `idx` is `None`.
pub fn annotation_sim(
    corpus: &[SentenceRecord],
    type_names: HashMap<String, String>,
    idx: Option<usize>,
) -> impl Fn(&PromptRequest, u32) -> String + Send + Sync + 'static {
    let spans = surfaces(corpus);
    let plans: HashMap<(String, String), CandidatePlan> =
        annotation_plans().into_iter().map(|p| ((p.record.to_string(), p.surface.to_string()), p)).collect();
    move |req, attempt| {
        let parts: Vec<&str> = req.tag.split('/').collect();
        let (step, rid, span) = (parts[0], parts[1], parts[2]);
        let surface = &spans[&(rid.to_string(), span.to_string())];
        let plan = &plans[&(rid.to_string(), surface.clone())];
        if let (Some((g_step, g_idx)), Some(i), 1) = (plan.garbage, idx, attempt) {
            if g_step == step && g_idx == i {
                return "Let me think about this step by step.".into();
            }
        }
        let Some(i) = idx else {
            return fenced(plan.judge.expect("judge consulted only on planned disputes"));
        };
        match step {
            "filter" => filter_answer(req, plan.filter[i]),
            "refine" => {
                let round: usize = parts[3].trim_start_matches('r').parse().unwrap();
                let picks = plan.refine[(round - 1).min(plan.refine.len() - 1)];
                refine_answer(req, picks[i], &type_names)
            }
            "args" => fenced(plan.raw[i]),
            "align" => plan.aligned[i].to_string(),
            other => panic!("unexpected step {other}"),
        }
    }
}

pub fn read_fixture_corpus(path: &Path) -> Vec<SentenceRecord> {
    read_corpus(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

/// Wraps a closure so its answers are recorded.
pub fn recording<F>(f: F) -> Arc<Recorder<FnBackend<F>>>
where
    F: Fn(&PromptRequest, u32) -> String + Send + Sync + 'static,
{
    Arc::new(Recorder::new(FnBackend(f)))
}

pub fn write_script(store: &ScriptStore, path: &Path) {
    let mut f = std::fs::File::create(path).unwrap();
    store.write(&mut f).unwrap();
}

pub struct ExtractionPlan {
    pub record: &'static str,
    pub text: &'static str,
    /// `(identifier, trigger)` pairs the simulated model reports when the
    /// class is offered; extra noise is added per record below.
    pub events: &'static [(&'static str, &'static str)],
    /// Argument answers keyed by identifier.
    pub arguments: &'static [(&'static str, &'static str)],
}

pub fn extraction_plans() -> Vec<ExtractionPlan> {
    vec![
        ExtractionPlan {
            record: "e01",
            text: "Five years ago they were negotiating with Milosevic at Dayton to stop the war.",
            events: &[("Parley", "negotiating"), ("War", "war")],
            arguments: &[
                ("Parley", r#"negotiator=["they"], other_party=["Milosevic"], location=["Dayton"]"#),
                ("War", r#"belligerent=[], location=[]"#),
            ],
        },
        ExtractionPlan {
            record: "e02",
            text: "John and Sarah attacked the enemy base at night.",
            events: &[("Attack", "attacked")],
            arguments: &[("Attack", r#"agent=["John", "Sarah"], location=[], time=["night"], target=["enemy base"]"#)],
        },
        ExtractionPlan {
            record: "e03",
            text: "Robbers took money from the bank and then took money from a shop.",
            events: &[("Robbery", "took")],
            arguments: &[(
                "Robbery",
                r#"perpetrator=["Robbers"], victim=["bank", "shop"], stolen_thing=["money", "money"]"#,
            )],
        },
        ExtractionPlan {
            record: "e04",
            text: "The troops occupied the capital in 1940.",
            events: &[("MilitaryOccupation", "occupied")],
            arguments: &[("MilitaryOccupation", r#"occupier=["troops"], territory=["capital"], time=["1940"]"#)],
        },
        ExtractionPlan {
            record: "e05",
            text: "Thousands of voters elected a new mayor on Sunday.",
            events: &[("Election", "elected")],
            arguments: &[("Election", r#"voter=["Thousands of voters"], elected_person=["mayor"], time=["Sunday"]"#)],
        },
        ExtractionPlan {
            record: "e06",
            text: "The volcano erupted twice, and the eruption buried the village.",
            events: &[("Eruption", "erupted"), ("Eruption", "eruption"), ("Burial", "buried")],
            arguments: &[
                ("Eruption", r#"volcano=["The volcano"], time=[]"#),
                ("Burial", r#"agent=["eruption"], buried_thing=["village"]"#),
            ],
        },
        ExtractionPlan {
            record: "e07",
            text: "Protesters clashed with police near the square on Monday.",
            events: &[("Clash", "clashed"), ("Protest", "Protesters")],
            arguments: &[
                ("Clash", r#"participant=["Protesters", "police"], location=["square"], time=["Monday"]"#),
                ("Protest", r#"protester=["Protesters"], location=["square"]"#),
            ],
        },
        ExtractionPlan { record: "e08", text: "The weather was pleasant all week.", events: &[], arguments: &[] },
        ExtractionPlan {
            record: "e09",
            text: "The company hired two engineers and fired its manager.",
            events: &[("Hiring", "hired"), ("Dismissal", "fired")],
            arguments: &[
                ("Hiring", r#"employer=["company"], employee=["engineers"]"#),
                ("Dismissal", r#"employer=["company"], employee=["manager"], reason=["budget cuts"]"#),
            ],
        },
        ExtractionPlan {
            record: "e10",
            text: "they create a market for themselves .",
            events: &[("Creation", "create")],
            arguments: &[("Creation", r#"agent_creator=["they"], result_thing_created=["market"]"#)],
        },
    ]
}

fn declared(prompt: &str) -> Vec<String> {
    prompt.lines().filter_map(|l| l.strip_prefix("class ")?.strip_suffix("(Event):").map(str::to_string)).collect()
}

/// Simulated extraction model. Reports planned events whose class is
/// offered; on e05 it also names a class from outside the partition, on e09
/// it first answers in prose, and on e03 it adds a trigger that is not in
/// the sentence.
pub fn extraction_sim() -> impl Fn(&PromptRequest, u32) -> String + Send + Sync + 'static {
    let plans: HashMap<&'static str, ExtractionPlan> = extraction_plans().into_iter().map(|p| (p.record, p)).collect();
    move |req, attempt| {
        let parts: Vec<&str> = req.tag.split('/').collect();
        let plan = &plans[parts[1]];
        let offered = declared(&req.user_text);
        if parts[0] == "ed" {
            if plan.record == "e09" && attempt == 1 {
                return "The sentence mentions a hiring and a dismissal.".into();
            }
            let mut items: Vec<String> = plan
                .events
                .iter()
                .filter(|(ident, _)| offered.iter().any(|o| o == ident))
                .map(|(ident, trig)| format!("{ident}(trigger=\"{trig}\")"))
                .collect();
            if plan.record == "e05" && !offered.iter().any(|o| o == "Voting") {
                items.push("Voting(trigger=\"elected\")".into());
            }
            if plan.record == "e03" && offered.iter().any(|o| o == "Robbery") {
                items.push("Robbery(trigger=\"stole\")".into());
            }
            format!("results = [{}]", items.join(", "))
        } else {
            let ident = &offered[0];
            let trigger = last_field(&req.user_text, "event whose trigger is \"");
            let trigger = trigger.split('"').next().unwrap_or("");
            let args = plan.arguments.iter().find(|(i, _)| i == ident).map_or(String::new(), |(_, a)| format!(", {a}"));
            format!("result = {ident}(trigger=\"{trigger}\"{args})")
        }
    }
}
