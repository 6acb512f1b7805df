//! Looks up worked examples for a task in the bundled case database.
//!
//! cargo run --example retrieve_cases ["task description"]

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use guis::agent::{build_prompt, PromptBundle};
use guis::retrieval::{read_cases, CaseIndex};

fn main() -> anyhow::Result<()> {
    let task = std::env::args().nth(1).unwrap_or_else(|| "set the font size to medium".into());
    let db = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cases/toy.jsonl");
    let index = CaseIndex::build(read_cases(BufReader::new(File::open(db)?))?)?;
    println!("{} cases, {} distinct words", index.len(), index.vocabulary().len());

    for hit in index.query(&task, 3) {
        println!("{:.3}  [{}] {}", hit.similarity, hit.case.app, hit.case.task);
    }

    let best = index.query(&task, 1).into_iter().next().map(|h| h.case.clone());
    let prompt = build_prompt(&PromptBundle { task, screen_doc: "<screen w=1080 h=2400>\n</screen>".into(), example: best, ..Default::default() })?;
    let example = prompt.split("# Example\n").nth(1).and_then(|s| s.split("# Instructions").next()).unwrap_or("");
    println!("\nexample section of the prompt:\n{}", example.trim_end());
    Ok(())
}
