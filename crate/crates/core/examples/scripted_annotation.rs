//! Annotates one sentence with a panel of three rule-based annotators
//! standing in for LLMs, then freezes their answers into replay scripts.

use std::error::Error;
use std::sync::Arc;

use eventide::annotate::{annotate_record, AnnotationConfig};
use eventide::corpus::{load_corpus, SentenceRecord};
use eventide::gateway::{FnBackend, LlmClient, PromptRequest, Recorder};
use eventide::ontology::load_ontology;

const ONTOLOGY: &str = r#"{"id":"attack","name":"attack","description":"violent action against a target","roles":["Agent","Location","Time","Target"]}
{"id":"assault","name":"assault","description":"physical attack on a person","roles":["Agent","Victim"]}
"#;

const CORPUS: &str = r#"{"id":"s1","text":"John and Sarah attacked the enemy base at night.","candidates":[{"start":15,"end":23,"surface":"attacked","candidate_types":["attack","assault"]}]}"#;

/// Keeps every candidate, picks option A, and gives arguments that differ
/// slightly per annotator.
fn annotator(target: &'static str) -> impl Fn(&PromptRequest, u32) -> String + Send + Sync {
    move |req, _| match req.tag.split('/').next() {
        Some("filter") => "**Reasonable Annotations**: `attacked(attack)`".into(),
        Some("refine") => "**Event Type**: A".into(),
        _ => format!(r#"{{"Agent": ["John", "Sarah"], "Target": ["{target}"], "Time": ["night"], "Location": []}}"#),
    }
}

pub fn run_example() -> Result<SentenceRecord, Box<dyn Error>> {
    let ontology = load_ontology(ONTOLOGY.as_bytes())?;
    let record = load_corpus(CORPUS.as_bytes(), &ontology)?.remove(0);

    let recorders: Vec<_> = ["enemy base", "enemy base", "base"]
        .into_iter()
        .map(|t| Arc::new(Recorder::new(FnBackend(annotator(t)))))
        .collect();
    let panel =
        recorders.iter().enumerate().map(|(i, r)| LlmClient::new(format!("a{}", i + 1), r.clone(), 2)).collect();
    let judge = LlmClient::new("judge", Arc::new(FnBackend(|_: &PromptRequest, _| "{}".to_string())), 1);
    let cfg = AnnotationConfig::new(panel, judge)?;

    let (annotated, report) = annotate_record(&record, &ontology, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&annotated.events)?);
    println!("{}", serde_json::to_string(&report)?);
    for (i, r) in recorders.iter().enumerate() {
        println!("a{} answered {} prompts", i + 1, r.store().len());
    }
    Ok(annotated)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
