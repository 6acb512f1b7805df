//! Runs one task on the simulated news app and prints the trace.
//!
//! Uses the scripted replies shipped with the fixture. When
//! `GUIS_LLM_ENDPOINT`, `GUIS_LLM_MODEL` and `GUIS_LLM_API_KEY` are set and
//! `--live` is passed, a real chat-completions endpoint is used instead.
//!
//! cargo run --example run_episode [--live]

use std::fs;
use std::path::Path;

use guis::agent::{parse_reply, Agent};
use guis::clients::{HttpLlm, HttpLlmConfig, LlmClient, ScriptedLlm};
use guis::simulator::{AppGraph, SimDevice};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/apps/news");
    let graph = AppGraph::from_json(&fs::read_to_string(root.join("graph.json"))?)?;
    let llm: Box<dyn LlmClient> = if std::env::args().any(|a| a == "--live") {
        Box::new(HttpLlm::new(HttpLlmConfig::from_env()?))
    } else {
        Box::new(ScriptedLlm::from_script(&fs::read_to_string(root.join("scripts/search_weather.txt"))?)?)
    };

    let agent = Agent::new(llm.as_ref());
    let mut device = SimDevice::new(&graph, graph.initial_state());
    let episode = agent.run("search news about weather", &mut device);

    for rec in &episode.trace {
        let thought = parse_reply(&rec.reply).map(|r| r.thought).unwrap_or_default();
        let distance = rec.matched_distance.map(|d| format!(" (matched {d:.0} px away)")).unwrap_or_default();
        println!("{}. {:<20} -> {}{}  | {}", rec.step, rec.action, rec.feedback, distance, thought);
    }
    println!("status: {}, steps: {}, final screen: {}", episode.status, episode.steps, device.state().screen);
    println!("typed text: {:?}", device.state().typed);
    println!("\nfirst prompt:\n{}", episode.trace[0].prompt);
    Ok(())
}
