//! Recalls the top types for one sentence and shows how each strategy
//! splits them.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use eventide::corpus::SentenceRecord;
use eventide::ontology::load_ontology;
use eventide::partition::{make_plan, Strategy};
use eventide::recall::{normalize_confidences, recall_topk, PseudoEncoder};

type PartSums = Vec<(Strategy, Vec<f64>)>;

pub fn run_example() -> Result<PartSums, Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extract/ontology.jsonl");
    let ontology = load_ontology(BufReader::new(File::open(path)?))?;
    let sentence = SentenceRecord::new("q", "The troops attacked the enemy base and occupied the capital.");
    let store = PseudoEncoder::new(64, 7).build_store(&ontology, std::slice::from_ref(&sentence))?;

    let recalled = normalize_confidences(recall_topk("q", &store, &ontology, 6)?);
    for c in &recalled {
        println!("{:<22} raw={:.3} conf={:.3}", c.type_id, c.raw_score, c.confidence);
    }

    let mut sums = Vec::new();
    for strategy in [Strategy::Level, Strategy::Average, Strategy::Random] {
        let plan = make_plan(strategy, &recalled, 2, Some(11))?;
        let ids: Vec<Vec<&str>> = plan.parts.iter().map(|p| p.iter().map(|c| c.type_id.as_str()).collect()).collect();
        println!("{strategy}: {ids:?} sums={:?}", plan.confidence_sums());
        sums.push((strategy, plan.confidence_sums()));
    }
    Ok(sums)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
