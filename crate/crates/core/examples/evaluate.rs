//! Scores predictions against gold at the trigger and argument levels.

use std::error::Error;

use eventide::corpus::read_corpus;
use eventide::eval::{evaluate, ArgumentAnchor, EvalReport};

const GOLD: &str = r#"{"id":"s1","text":"Rebels attacked and looted the town.","events":[{"trigger":{"start":7,"end":15,"surface":"attacked"},"type":"attack","arguments":[{"role":"Agent","fillers":[{"start":0,"end":6,"surface":"Rebels"}]},{"role":"Target","fillers":[{"start":31,"end":35,"surface":"town"}]}]},{"trigger":{"start":20,"end":26,"surface":"looted"},"type":"robbery","arguments":[]}]}"#;

const PRED: &str = r#"{"id":"s1","text":"Rebels attacked and looted the town.","events":[{"trigger":{"start":7,"end":15,"surface":"attacked"},"type":"attack","arguments":[{"role":"Agent","fillers":[{"start":0,"end":6,"surface":"Rebels"}]},{"role":"Target","fillers":[{"start":27,"end":35,"surface":"the town"}]}]},{"trigger":{"start":20,"end":26,"surface":"looted"},"type":"theft","arguments":[]}]}"#;

pub fn run_example() -> Result<EvalReport, Box<dyn Error>> {
    let gold = read_corpus(GOLD.as_bytes())?;
    let pred = read_corpus(PRED.as_bytes())?;
    let report = evaluate(&pred, &gold, ArgumentAnchor::EventType)?;
    for (name, prf) in [("TI", &report.ti), ("TC", &report.tc), ("AI", &report.ai), ("AC", &report.ac)] {
        println!("{name}: P={:.4} R={:.4} F1={:.4}", prf.precision, prf.recall, prf.f1);
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
