//! Extracts events from one sentence: recall, split the recalled types into
//! two prompts, then ask for each event's arguments.

use std::error::Error;
use std::sync::Arc;

use eventide::corpus::SentenceRecord;
use eventide::extract::{extract_record, ExtractConfig, ExtractionReport};
use eventide::gateway::{FnBackend, LlmClient, PromptRequest};
use eventide::ontology::load_ontology;
use eventide::partition::Strategy;
use eventide::recall::PseudoEncoder;

const ONTOLOGY: &str = r#"{"id":"hiring","name":"hiring","description":"company hired new employees","roles":["Employer","Employee"]}
{"id":"dismissal","name":"dismissal","description":"company fired an employee","roles":["Employer","Employee"]}
{"id":"trade","name":"trade","description":"exchange of goods","roles":["Buyer","Seller"]}
{"id":"flood","name":"flood","description":"water covering dry land","roles":["Place"]}
"#;

/// Answers detection prompts with whichever of the two relevant classes is
/// offered, and argument prompts with a fixed reading.
fn model(req: &PromptRequest, _: u32) -> String {
    let offered = |name: &str| req.user_text.contains(&format!("class {name}(Event):"));
    if req.tag.starts_with("ed/") {
        let mut found = Vec::new();
        if offered("Hiring") {
            found.push(r#"Hiring(trigger="hired")"#);
        }
        if offered("Dismissal") {
            found.push(r#"Dismissal(trigger="fired")"#);
        }
        format!("results = [{}]", found.join(", "))
    } else if offered("Hiring") {
        r#"result = Hiring(trigger="hired", employer=["company"], employee=["engineers"])"#.into()
    } else {
        r#"result = Dismissal(trigger="fired", employer=["company"], employee=["manager"])"#.into()
    }
}

pub fn run_example() -> Result<(SentenceRecord, ExtractionReport), Box<dyn Error>> {
    let ontology = load_ontology(ONTOLOGY.as_bytes())?;
    let record = SentenceRecord::new("s1", "The company hired two engineers and fired its manager.");
    let store = PseudoEncoder::new(32, 5).build_store(&ontology, std::slice::from_ref(&record))?;

    let client = LlmClient::new("model", Arc::new(FnBackend(model)), 2);
    let mut cfg = ExtractConfig::new(client.clone(), client);
    cfg.settings.top_k = 4;
    cfg.settings.strategy = Strategy::Average;

    let (predicted, report) = extract_record(&record, &ontology, &store, &cfg)?;
    for e in &predicted.events {
        let args: Vec<String> = e
            .arguments
            .iter()
            .map(|a| format!("{}={:?}", a.role, a.fillers.iter().map(|f| &f.surface).collect::<Vec<_>>()))
            .collect();
        println!("{} @{:?}: {}", e.mention.type_id, e.mention.trigger.key(), args.join(" "));
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok((predicted, report))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
