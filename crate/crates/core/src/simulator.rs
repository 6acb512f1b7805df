//! A simulated phone: app screens as a state machine, commands matched to
//! the nearest interactive element, and task-set scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    swipe_direction, Agent, ApplyOutcome, DeviceCommand, DeviceInterface, Direction, Episode, EpisodeLimits,
    EpisodeStatus, Observation,
};
use crate::clients::{ClientError, LlmClient};
use crate::geometry::Point;
use crate::perception::DetectionFile;
use crate::retrieval::TaskRetriever;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid app graph: {0}")]
    InvalidGraph(String),
    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("task set is empty")]
    EmptyTaskSet,
    #[error("json: {0}")]
    Json(String),
}

/// What fires a transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Tap(usize),
    LongPress(usize),
    Scroll(Direction),
    Back,
    TextSubmit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub on: Trigger,
    pub goto: String,
    #[serde(default)]
    pub sets: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenSpec {
    pub detections: DetectionFile,
    #[serde(default)]
    pub keyboard_visible: bool,
    /// Indices into `detections.elements` that accept taps.
    #[serde(default)]
    pub interactive: Vec<usize>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

impl ScreenSpec {
    fn transition(&self, trigger: &Trigger) -> Option<&Transition> {
        self.transitions.iter().find(|t| &t.on == trigger)
    }

    /// Nearest interactive element to `p` by bbox center, with its
    /// distance. Ties go to the lower element index.
    pub fn nearest_interactive(&self, p: Point) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &self.interactive {
            let d = self.detections.elements[i].bbox.center().distance(p);
            let better = match best {
                None => true,
                Some((j, bd)) => d < bd || (d == bd && i < j),
            };
            if better {
                best = Some((i, d));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppGraph {
    pub screens: BTreeMap<String, ScreenSpec>,
    pub start: String,
}

impl AppGraph {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let g: AppGraph = serde_json::from_str(text).map_err(|e| SimError::Json(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidGraph(m));
        if !self.screens.contains_key(&self.start) {
            return bad(format!("start screen {:?} does not exist", self.start));
        }
        for (id, s) in &self.screens {
            let n = s.detections.elements.len();
            if let Some(i) = s.interactive.iter().find(|&&i| i >= n) {
                return bad(format!("screen {id:?}: interactive index {i} out of range ({n} elements)"));
            }
            for t in &s.transitions {
                if !self.screens.contains_key(&t.goto) {
                    return bad(format!("screen {id:?}: transition target {:?} does not exist", t.goto));
                }
                if let Trigger::Tap(i) | Trigger::LongPress(i) = t.on {
                    if !s.interactive.contains(&i) {
                        return bad(format!("screen {id:?}: transition on element {i}, which is not interactive"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn screen(&self, id: &str) -> Option<&ScreenSpec> {
        self.screens.get(id)
    }

    pub fn initial_state(&self) -> SimState {
        SimState::at(&self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub screen: String,
    pub flags: BTreeMap<String, bool>,
    /// Last text entered on any screen.
    pub typed: Option<String>,
}

impl SimState {
    pub fn at(screen: &str) -> Self {
        Self { screen: screen.to_string(), ..Default::default() }
    }

    pub fn flag(&self, name: &str) -> bool {
        self.flags.get(name).copied().unwrap_or(false)
    }
}

fn fire(state: &SimState, t: &Transition) -> SimState {
    let mut next = state.clone();
    next.screen = t.goto.clone();
    next.flags.extend(t.sets.iter().map(|(k, v)| (k.clone(), *v)));
    next
}

/// Executes one command. Pure: the same state and command always give the
/// same result, and invalid commands only produce error feedback.
///
/// # Panics
///
/// If `state.screen` is not a screen of `graph`.
pub fn apply_command(graph: &AppGraph, state: &SimState, cmd: &DeviceCommand) -> (SimState, ApplyOutcome) {
    let screen = graph.screen(&state.screen).expect("state refers to a screen of the graph");
    let by_trigger = |trigger: Trigger| match screen.transition(&trigger) {
        Some(t) => (fire(state, t), ApplyOutcome::ok()),
        None => (state.clone(), ApplyOutcome::error("no-op")),
    };
    match cmd {
        DeviceCommand::Tap(p) | DeviceCommand::LongPress(p) => {
            let Some((index, dist)) = screen.nearest_interactive(*p) else {
                return (state.clone(), ApplyOutcome::error("no-op"));
            };
            let trigger = match cmd {
                DeviceCommand::Tap(_) => Trigger::Tap(index),
                _ => Trigger::LongPress(index),
            };
            let (next, mut outcome) = by_trigger(trigger);
            outcome.matched_distance = Some(dist);
            (next, outcome)
        }
        DeviceCommand::Swipe { from, to } => match swipe_direction(*from, *to) {
            Some(d) => by_trigger(Trigger::Scroll(d)),
            None => (state.clone(), ApplyOutcome::error("no-op")),
        },
        DeviceCommand::Back => by_trigger(Trigger::Back),
        DeviceCommand::Text(text) => {
            if !screen.keyboard_visible {
                return (state.clone(), ApplyOutcome::error("no keyboard on screen"));
            }
            let mut typed = state.clone();
            typed.typed = Some(text.clone());
            match screen.transition(&Trigger::TextSubmit) {
                Some(t) => (fire(&typed, t), ApplyOutcome::ok()),
                None => (typed, ApplyOutcome::ok()),
            }
        }
        DeviceCommand::Finish => (state.clone(), ApplyOutcome::ok()),
    }
}

/// The current screen's detections, verbatim.
pub fn observe(graph: &AppGraph, state: &SimState) -> Observation {
    let screen = graph.screen(&state.screen).expect("state refers to a screen of the graph");
    Observation { detections: screen.detections.clone(), keyboard_visible: screen.keyboard_visible }
}

/// A device backed by an app graph.
#[derive(Debug, Clone)]
pub struct SimDevice<'g> {
    graph: &'g AppGraph,
    state: SimState,
}

impl<'g> SimDevice<'g> {
    pub fn new(graph: &'g AppGraph, state: SimState) -> Self {
        Self { graph, state }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }
}

impl DeviceInterface for SimDevice<'_> {
    fn observe(&self) -> Observation {
        observe(self.graph, &self.state)
    }

    fn apply(&mut self, cmd: &DeviceCommand) -> ApplyOutcome {
        let (next, outcome) = apply_command(self.graph, &self.state, cmd);
        self.state = next;
        outcome
    }
}

/// Conditions on the final state; absent parts are unconstrained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Goal {
    pub fn is_empty(&self) -> bool {
        self.screen.is_none() && self.flags.is_empty() && self.text.is_none()
    }

    /// Unset flags count as false.
    pub fn holds(&self, state: &SimState) -> bool {
        self.screen.as_ref().is_none_or(|s| *s == state.screen)
            && self.flags.iter().all(|(k, v)| state.flag(k) == *v)
            && self.text.as_ref().is_none_or(|t| state.typed.as_ref() == Some(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub description: String,
    pub start_screen: String,
    pub goal: Goal,
    pub optimal_steps: usize,
}

impl TaskSpec {
    pub fn validate(&self, graph: &AppGraph) -> Result<(), SimError> {
        let bad = |reason: String| Err(SimError::InvalidTask { id: self.id.clone(), reason });
        if self.goal.is_empty() {
            return bad("goal is empty".into());
        }
        if self.optimal_steps == 0 {
            return bad("optimal_steps must be at least 1".into());
        }
        for s in std::iter::once(&self.start_screen).chain(self.goal.screen.iter()) {
            if graph.screen(s).is_none() {
                return bad(format!("unknown screen {s:?}"));
            }
        }
        Ok(())
    }
}

pub fn load_tasks(text: &str) -> Result<Vec<TaskSpec>, SimError> {
    serde_json::from_str(text).map_err(|e| SimError::Json(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub id: String,
    pub success: bool,
    pub steps: usize,
    /// `goal_met`, `goal_not_met`, `repeated_errors`, `step_limit`, or
    /// `aborted: <why>`.
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub plan_sr: f64,
    /// Mean steps over successful tasks; `None` when nothing succeeded.
    pub avg_steps: Option<f64>,
    pub tasks: Vec<TaskResult>,
}

impl Metrics {
    pub fn from_results(tasks: Vec<TaskResult>) -> Self {
        let wins: Vec<usize> = tasks.iter().filter(|t| t.success).map(|t| t.steps).collect();
        let plan_sr = if tasks.is_empty() { 0.0 } else { wins.len() as f64 / tasks.len() as f64 };
        let avg_steps = (!wins.is_empty()).then(|| wins.iter().sum::<usize>() as f64 / wins.len() as f64);
        Self { plan_sr, avg_steps, tasks }
    }

    /// Merges several task sets into one score.
    pub fn combine(parts: impl IntoIterator<Item = Metrics>) -> Self {
        Self::from_results(parts.into_iter().flat_map(|m| m.tasks).collect())
    }
}

#[derive(Debug)]
pub struct EvalRun {
    pub task: TaskSpec,
    pub result: TaskResult,
    /// `None` when no LLM client could be built for the task.
    pub episode: Option<Episode>,
}

#[derive(Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub runs: Vec<EvalRun>,
}

/// Runs one task on a fresh device and judges it.
pub fn run_task(graph: &AppGraph, task: &TaskSpec, agent: &Agent<'_>) -> (TaskResult, Episode) {
    let mut device = SimDevice::new(graph, SimState::at(&task.start_screen));
    let episode = agent.run(&task.description, &mut device);
    let (success, reason) = match &episode.status {
        EpisodeStatus::Finished if task.goal.holds(device.state()) => (true, "goal_met".to_string()),
        EpisodeStatus::Finished => (false, "goal_not_met".to_string()),
        EpisodeStatus::Failed(r) => (false, r.as_str().to_string()),
        EpisodeStatus::Aborted(why) => (false, format!("aborted: {why}")),
    };
    let result = TaskResult { id: task.id.clone(), success, steps: episode.steps, reason };
    (result, episode)
}

/// Builds the LLM client for one task.
pub type LlmFactory<'a> = dyn FnMut(&TaskSpec) -> Result<Box<dyn LlmClient>, ClientError> + 'a;

/// Scores a task set. Each task gets a fresh device and the client that
/// `llm_for` builds for it.
pub fn evaluate_taskset(
    graph: &AppGraph,
    tasks: &[TaskSpec],
    llm_for: &mut LlmFactory<'_>,
    retriever: Option<&dyn TaskRetriever>,
    limits: EpisodeLimits,
) -> Result<Evaluation, SimError> {
    if tasks.is_empty() {
        return Err(SimError::EmptyTaskSet);
    }
    for t in tasks {
        t.validate(graph)?;
    }
    let mut runs = Vec::with_capacity(tasks.len());
    for task in tasks {
        let run = match llm_for(task) {
            Ok(llm) => {
                let mut agent = Agent::new(llm.as_ref()).with_limits(limits);
                agent.retriever = retriever;
                let (result, episode) = run_task(graph, task, &agent);
                EvalRun { task: task.clone(), result, episode: Some(episode) }
            }
            Err(e) => {
                let result = TaskResult { id: task.id.clone(), success: false, steps: 0, reason: format!("aborted: {e}") };
                EvalRun { task: task.clone(), result, episode: None }
            }
        };
        log::info!("task {}: {}", run.result.id, run.result.reason);
        runs.push(run);
    }
    let metrics = Metrics::from_results(runs.iter().map(|r| r.result.clone()).collect());
    Ok(Evaluation { metrics, runs })
}
