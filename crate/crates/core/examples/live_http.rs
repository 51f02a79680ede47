//! Sends one detection prompt to a chat-completions endpoint. Does nothing
//! unless `EVENTIDE_ENDPOINT` and `EVENTIDE_MODEL` are set; the key, if any,
//! comes from `EVENTIDE_API_KEY`.

use std::error::Error;
use std::sync::Arc;

use eventide::extract::render_ed_prompt;
use eventide::gateway::{complete, DecodingParams, HttpBackend, HttpSettings, LlmClient, PromptRequest};
use eventide::ontology::load_ontology;

const ONTOLOGY: &str =
    r#"{"id":"attack","name":"attack","description":"violent action against a target","roles":["Agent","Target"]}"#;

pub fn run_example() -> Result<Option<String>, Box<dyn Error>> {
    let (Ok(endpoint), Ok(model)) = (std::env::var("EVENTIDE_ENDPOINT"), std::env::var("EVENTIDE_MODEL")) else {
        println!("EVENTIDE_ENDPOINT / EVENTIDE_MODEL not set; skipping");
        return Ok(None);
    };
    let mut settings = HttpSettings::new(endpoint, model);
    settings.api_key = std::env::var("EVENTIDE_API_KEY").ok();
    let client = LlmClient::new("live", Arc::new(HttpBackend::new(settings)?), 1);

    let ontology = load_ontology(ONTOLOGY.as_bytes())?;
    let part: Vec<_> = ontology.types().iter().collect();
    let prompt = render_ed_prompt(&part, &ontology, "Rebels attacked the town.");
    let reply = complete(&client, &PromptRequest::new(prompt, DecodingParams::extraction(), "ed/live/p0"))?;
    println!("{}", reply.text);
    Ok(Some(reply.text))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
