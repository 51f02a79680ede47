//! Hinge ranking loss on a toy store, with a finite-difference check of the
//! gradient.

use std::error::Error;

use eventide::corpus::SentenceRecord;
use eventide::ontology::load_ontology;
use eventide::recall::{margin_loss, margin_loss_grad_check, PseudoEncoder, TrainingPair, DEFAULT_MARGIN};

const ONTOLOGY: &str = r#"{"id":"attack","name":"attack","description":"violent assault on a target","roles":["Agent","Target"]}
{"id":"assault","name":"assault","description":"physical attack on a person","roles":["Agent","Victim"]}
{"id":"trade","name":"trade","description":"exchange of goods","roles":["Buyer","Seller"]}
{"id":"flood","name":"flood","description":"water covering dry land","roles":["Place"]}
"#;

pub fn run_example() -> Result<(f64, f64), Box<dyn Error>> {
    let ontology = load_ontology(ONTOLOGY.as_bytes())?;
    let records = [
        SentenceRecord::new("s1", "Gunmen attacked the village at dawn."),
        SentenceRecord::new("s2", "The river flooded the valley."),
    ];
    let store = PseudoEncoder::new(16, 3).build_store(&ontology, &records)?;
    let pairs = vec![
        TrainingPair {
            sentence_id: "s1".into(),
            positives: vec!["attack".into(), "assault".into()],
            negatives: vec!["trade".into(), "flood".into()],
        },
        TrainingPair {
            sentence_id: "s2".into(),
            positives: vec!["flood".into()],
            negatives: vec!["trade".into(), "attack".into()],
        },
    ];
    let loss = margin_loss(&pairs, &store, DEFAULT_MARGIN)?;
    let check = margin_loss_grad_check(&pairs, &store, DEFAULT_MARGIN, 1e-6)?;
    println!(
        "loss={loss:.6} active_hinges={} parameters={} max_relative_deviation={:.2e}",
        check.active_hinges, check.parameters, check.max_relative_deviation
    );
    Ok((loss, check.max_relative_deviation))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
