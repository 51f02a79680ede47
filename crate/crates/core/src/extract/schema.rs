use crate::ontology::{EventTypeDef, Ontology};
use crate::template::fill;

pub const EVENT_DETECTION: &str = include_str!("../../templates/extract/event_detection.md");
pub const ARGUMENT_EXTRACTION: &str = include_str!("../../templates/extract/argument_extraction.md");

/// Single-line docstring text: whitespace runs collapse and triple quotes
/// cannot close the string early.
fn docstring(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").replace('\\', "\\\\").replace("\"\"\"", "\\\"\\\"\\\"")
}

/// One class declaration per type, separated by blank lines. Each has a
/// header, a docstring with the description, and one `List[str]` field per
/// role, commented with the role's own description when it has one.
pub fn render_schema_block(types: &[&EventTypeDef], ontology: &Ontology) -> String {
    let decls: Vec<String> = types
        .iter()
        .map(|t| {
            let ident = ontology.identifier(&t.id).unwrap_or(&t.id);
            let mut lines =
                vec![format!("class {ident}(Event):"), format!("    \"\"\"{}\"\"\"", docstring(&t.description))];
            for (role, field) in t.roles.iter().zip(t.role_fields()) {
                let comment = role.description.split_whitespace().collect::<Vec<_>>().join(" ");
                if comment.is_empty() {
                    lines.push(format!("    {field}: List[str]"));
                } else {
                    lines.push(format!("    {field}: List[str]  # {comment}"));
                }
            }
            lines.join("\n")
        })
        .collect();
    decls.join("\n\n")
}

pub fn render_ed_prompt(part: &[&EventTypeDef], ontology: &Ontology, sentence: &str) -> String {
    fill(EVENT_DETECTION, &[("schema", &render_schema_block(part, ontology)), ("sentence", sentence)])
}

pub fn render_eae_prompt(t: &EventTypeDef, ontology: &Ontology, trigger: &str, sentence: &str) -> String {
    let ident = ontology.identifier(&t.id).unwrap_or(&t.id);
    let fields: String = t.role_fields().iter().map(|f| format!(", {f}=[...]")).collect();
    fill(
        ARGUMENT_EXTRACTION,
        &[
            ("schema", &render_schema_block(&[t], ontology)),
            ("identifier", ident),
            ("trigger", &trigger.replace('"', "\\\"")),
            ("fields", &fields),
            ("sentence", sentence),
        ],
    )
}
