//! Scores the three bundled toy apps with scripted replies, then with a
//! client that only ever presses Back.
//!
//! cargo run --example evaluate_toy_apps

use std::fs;
use std::path::Path;

use guis::agent::EpisodeLimits;
use guis::clients::{ClientError, LlmClient, ScriptedLlm};
use guis::simulator::{evaluate_taskset, load_tasks, AppGraph, Metrics, TaskSpec};

fn main() -> anyhow::Result<()> {
    let apps = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/apps");
    let mut scripted = Vec::new();
    let mut always_back = Vec::new();
    for app in ["news", "shopping", "settings"] {
        let dir = apps.join(app);
        let graph = AppGraph::from_json(&fs::read_to_string(dir.join("graph.json"))?)?;
        let tasks = load_tasks(&fs::read_to_string(dir.join("tasks.json"))?)?;

        let mut from_script = |t: &TaskSpec| -> Result<Box<dyn LlmClient>, ClientError> {
            let text = fs::read_to_string(dir.join("scripts").join(format!("{}.txt", t.id)))
                .map_err(|e| ClientError::Config(e.to_string()))?;
            Ok(Box::new(ScriptedLlm::from_script(&text)?))
        };
        let eval = evaluate_taskset(&graph, &tasks, &mut from_script, None, EpisodeLimits::default())?;
        for run in &eval.runs {
            println!("{app:<9} {:<15} steps {:>2} (optimal {})  {}", run.task.id, run.result.steps, run.task.optimal_steps, run.result.reason);
        }
        scripted.push(eval.metrics);

        let back = "Summary: s\nThought: t\nAction: a\nFunction: Back()".to_string();
        let mut backer = |_: &TaskSpec| -> Result<Box<dyn LlmClient>, ClientError> { Ok(Box::new(ScriptedLlm::new(vec![back.clone(); 20])?)) };
        always_back.push(evaluate_taskset(&graph, &tasks, &mut backer, None, EpisodeLimits::default())?.metrics);
    }
    let s = Metrics::combine(scripted);
    let b = Metrics::combine(always_back);
    println!("\nscripted:    plan_sr {:.3}, avg_steps {:?}", s.plan_sr, s.avg_steps);
    println!("always Back: plan_sr {:.3}, avg_steps {:?}", b.plan_sr, b.avg_steps);
    Ok(())
}
