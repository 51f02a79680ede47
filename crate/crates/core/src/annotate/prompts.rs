use super::RoleMap;
use crate::corpus::TriggerCandidate;
use crate::ontology::EventTypeDef;
use crate::template::fill;

pub const TRIGGER_FILTERING: &str = include_str!("../../templates/annotate/trigger_filtering.md");
pub const TYPE_REFINEMENT: &str = include_str!("../../templates/annotate/type_refinement.md");
pub const ARGUMENT_ANNOTATION: &str = include_str!("../../templates/annotate/argument_annotation.md");
pub const OFFSET_ALIGNMENT: &str = include_str!("../../templates/annotate/offset_alignment.md");
pub const MULTI_INPUT_ALIGNMENT: &str = include_str!("../../templates/annotate/multi_input_alignment.md");

/// Options beyond `Z` cannot be lettered; one letter is kept for "None of them".
pub const MAX_REFINEMENT_OPTIONS: usize = 25;

fn roles(def: &EventTypeDef) -> String {
    def.role_names().collect::<Vec<_>>().join(", ")
}

/// Lists the candidate's surface once per pre-annotated label.
pub fn filter_prompt(sentence: &str, cand: &TriggerCandidate) -> String {
    let annotations: Vec<String> =
        cand.candidate_type_ids.iter().map(|id| format!("`{}({id})`", cand.span.surface)).collect();
    fill(TRIGGER_FILTERING, &[("sentence", sentence), ("annotations", &annotations.join(", "))])
}

/// Letters `A..` for each option, then one more for "None of them".
pub fn refinement_prompt(sentence: &str, trigger: &str, options: &[&EventTypeDef]) -> String {
    let mut lines: Vec<String> = options
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}: {}", (b'A' + i as u8) as char, d.name, d.description))
        .collect();
    lines.push(format!("{}. None of them.", (b'A' + options.len() as u8) as char));
    fill(TYPE_REFINEMENT, &[("options", &lines.join("\n")), ("trigger", trigger), ("sentence", sentence)])
}

pub fn argument_prompt(sentence: &str, def: &EventTypeDef, trigger: &str) -> String {
    fill(
        ARGUMENT_ANNOTATION,
        &[
            ("event_type", &def.name),
            ("description", &def.description),
            ("trigger", trigger),
            ("roles", &roles(def)),
            ("sentence", sentence),
        ],
    )
}

pub fn alignment_prompt(sentence: &str, def: &EventTypeDef, trigger: &str, raw: &RoleMap) -> String {
    fill(
        OFFSET_ALIGNMENT,
        &[
            ("event_type", &def.name),
            ("description", &def.description),
            ("trigger", trigger),
            ("roles", &roles(def)),
            ("sentence", sentence),
            ("input", &raw.to_prompt_json()),
        ],
    )
}

/// Embeds each annotator's map as `Input1..InputM`.
pub fn adjudication_prompt(sentence: &str, def: &EventTypeDef, inputs: &[RoleMap]) -> String {
    let names: Vec<String> = (1..=inputs.len()).map(|i| format!("Input{i}")).collect();
    let listed = match names.len() {
        0 => String::new(),
        1 => names[0].clone(),
        n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
    };
    let blocks: Vec<String> = inputs
        .iter()
        .zip(&names)
        .map(|(m, name)| format!("**{name}:**\n```json\n{}\n```", m.to_prompt_json()))
        .collect();
    fill(
        MULTI_INPUT_ALIGNMENT,
        &[
            ("count", &inputs.len().to_string()),
            ("input_names", &listed),
            ("roles", &roles(def)),
            ("sentence", sentence),
            ("inputs", &blocks.join("\n\n")),
        ],
    )
}
