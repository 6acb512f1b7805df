use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::{Action, Direction};
use super::prompt::{build_prompt, Feedback, HistoryEntry, PromptBundle};
use super::reply::parse_reply;
use crate::clients::{CaptionQuery, ClientError, IconCaptioner, LlmClient};
use crate::geometry::Point;
use crate::perception::{build_document, render_document, DetectionFile, PerceptionConfig, ScreenDocument};
use crate::retrieval::TaskRetriever;

/// Physical-level command for a device.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceCommand {
    Tap(Point),
    LongPress(Point),
    Swipe { from: Point, to: Point },
    Text(String),
    Back,
    Finish,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("unknown id {0}")]
    UnknownId(usize),
}

/// Fraction of the screen dimension covered by a scroll swipe.
pub const SCROLL_FRACTION: f64 = 0.4;

/// Turns an id-level action into coordinates on the observed screen.
///
/// Taps and long presses hit the center of the element's box. A scroll
/// swipes from the screen center by 40% of the screen in the direction
/// opposite to the content movement (scrolling down drags upward).
pub fn resolve_action(action: &Action, doc: &ScreenDocument) -> Result<DeviceCommand, ResolveError> {
    let center_of = |id: usize| doc.element(id).map(|e| e.bbox.center()).ok_or(ResolveError::UnknownId(id));
    Ok(match action {
        Action::Tap(id) => DeviceCommand::Tap(center_of(*id)?),
        Action::LongPress(id) => DeviceCommand::LongPress(center_of(*id)?),
        Action::Scroll(dir) => {
            let (w, h) = (doc.image_size.width as f64, doc.image_size.height as f64);
            let from = Point::new(w / 2.0, h / 2.0);
            let (dx, dy) = match dir {
                Direction::Down => (0.0, -SCROLL_FRACTION * h),
                Direction::Up => (0.0, SCROLL_FRACTION * h),
                Direction::Right => (-SCROLL_FRACTION * w, 0.0),
                Direction::Left => (SCROLL_FRACTION * w, 0.0),
            };
            DeviceCommand::Swipe { from, to: Point::new(from.x + dx, from.y + dy) }
        }
        Action::Text(t) => DeviceCommand::Text(t.clone()),
        Action::Back => DeviceCommand::Back,
        Action::Finish => DeviceCommand::Finish,
    })
}

/// Inverse of the scroll mapping in [`resolve_action`]: the scroll
/// direction a swipe performs, by its dominant axis.
pub fn swipe_direction(from: Point, to: Point) -> Option<Direction> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx == 0.0 && dy == 0.0 {
        None
    } else if dy.abs() >= dx.abs() {
        Some(if dy < 0.0 { Direction::Down } else { Direction::Up })
    } else {
        Some(if dx < 0.0 { Direction::Right } else { Direction::Left })
    }
}

/// What the agent perceives of the device.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub detections: DetectionFile,
    pub keyboard_visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyOutcome {
    pub feedback: Feedback,
    /// Distance from a tap point to the element that received it.
    pub matched_distance: Option<f64>,
}

impl ApplyOutcome {
    pub fn ok() -> Self {
        Self { feedback: Feedback::Ok, matched_distance: None }
    }

    pub fn error(msg: impl Into<String>) -> Self {
        Self { feedback: Feedback::error(msg), matched_distance: None }
    }
}

pub trait DeviceInterface {
    fn observe(&self) -> Observation;
    fn apply(&mut self, cmd: &DeviceCommand) -> ApplyOutcome;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeLimits {
    pub max_steps: usize,
    pub max_consecutive_errors: usize,
    /// Number of retrieved examples consulted; only the best is shown.
    pub examples_k: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self { max_steps: 15, max_consecutive_errors: 3, examples_k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailReason {
    RepeatedErrors,
    StepLimit,
}

impl FailReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailReason::RepeatedErrors => "repeated_errors",
            FailReason::StepLimit => "step_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EpisodeStatus {
    Finished,
    Failed(FailReason),
    Aborted(String),
}

impl std::fmt::Display for EpisodeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpisodeStatus::Finished => f.write_str("finished"),
            EpisodeStatus::Failed(r) => write!(f, "failed({})", r.as_str()),
            EpisodeStatus::Aborted(why) => write!(f, "aborted: {why}"),
        }
    }
}

/// One line of the JSON Lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub prompt: String,
    pub reply: String,
    /// Canonical call text, empty when the reply did not parse.
    pub action: String,
    pub feedback: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub status: EpisodeStatus,
    pub steps: usize,
    pub trace: Vec<TraceRecord>,
}

impl Episode {
    /// Trace as JSON Lines, one record per step.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

/// Everything the decision loop needs besides the task and the device.
pub struct Agent<'a> {
    pub llm: &'a dyn LlmClient,
    pub retriever: Option<&'a dyn TaskRetriever>,
    pub captioner: &'a dyn IconCaptioner,
    pub perception: PerceptionConfig,
    pub limits: EpisodeLimits,
}

struct NoCaptions;

impl IconCaptioner for NoCaptions {
    fn caption(&self, _: &CaptionQuery) -> Result<String, ClientError> {
        Ok(String::new())
    }
}

static NO_CAPTIONS: NoCaptions = NoCaptions;

impl<'a> Agent<'a> {
    pub fn new(llm: &'a dyn LlmClient) -> Self {
        Self {
            llm,
            retriever: None,
            captioner: &NO_CAPTIONS,
            perception: PerceptionConfig::default(),
            limits: EpisodeLimits::default(),
        }
    }

    pub fn with_retriever(mut self, retriever: &'a dyn TaskRetriever) -> Self {
        self.retriever = Some(retriever);
        self
    }

    pub fn with_captioner(mut self, captioner: &'a dyn IconCaptioner) -> Self {
        self.captioner = captioner;
        self
    }

    pub fn with_limits(mut self, limits: EpisodeLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Runs the perceive → decide → act loop until the agent calls
    /// `Finish()`, the step limit is hit, or too many consecutive steps
    /// fail.
    ///
    /// Unparseable replies and unknown ids cost a step and are reported
    /// back through the history. A transport failure of the LLM client
    /// aborts the episode.
    pub fn run(&self, task: &str, device: &mut dyn DeviceInterface) -> Episode {
        let example = self
            .retriever
            .and_then(|r| r.retrieve(task, self.limits.examples_k.max(1)).into_iter().next());
        let mut history: Vec<HistoryEntry> = Vec::new();
        let mut trace = Vec::new();
        let mut consecutive_errors = 0;
        let abort = |why: String, trace: Vec<TraceRecord>| Episode { status: EpisodeStatus::Aborted(why), steps: trace.len(), trace };

        for step in 1..=self.limits.max_steps {
            let obs = device.observe();
            let doc = match build_document(&obs.detections.elements, obs.detections.image, self.captioner, &self.perception) {
                Ok(report) => report.document,
                Err(e) => return abort(format!("perception failed: {e}"), trace),
            };
            let bundle = PromptBundle {
                task: task.to_string(),
                screen_doc: render_document(&doc),
                history: history.clone(),
                example: example.clone(),
                attach_screenshot: false,
            };
            let prompt = match build_prompt(&bundle) {
                Ok(p) => p,
                Err(e) => return abort(e.to_string(), trace),
            };
            let reply = match self.llm.complete(&prompt, None) {
                Ok(r) => r,
                Err(e) => return abort(format!("llm: {e}"), trace),
            };

            let (action, outcome) = match parse_reply(&reply) {
                Err(e) => (None, ApplyOutcome::error(format!("unparseable reply: {e}"))),
                Ok(parsed) => {
                    let outcome = match resolve_action(&parsed.action, &doc) {
                        Ok(cmd) => device.apply(&cmd),
                        Err(e) => ApplyOutcome::error(e.to_string()),
                    };
                    (Some(parsed.action), outcome)
                }
            };

            trace.push(TraceRecord {
                step,
                prompt,
                reply,
                action: action.as_ref().map(Action::to_string).unwrap_or_default(),
                feedback: outcome.feedback.to_string(),
                matched_distance: outcome.matched_distance,
            });
            let finished = action == Some(Action::Finish) && !outcome.feedback.is_error();
            if outcome.feedback.is_error() {
                consecutive_errors += 1;
            } else {
                consecutive_errors = 0;
            }
            history.push(HistoryEntry { step, action, feedback: outcome.feedback });

            if finished {
                return Episode { status: EpisodeStatus::Finished, steps: step, trace };
            }
            if consecutive_errors >= self.limits.max_consecutive_errors {
                return Episode { status: EpisodeStatus::Failed(FailReason::RepeatedErrors), steps: step, trace };
            }
        }
        Episode { status: EpisodeStatus::Failed(FailReason::StepLimit), steps: trace.len(), trace }
    }
}

/// Free-function form of [`Agent::run`].
pub fn run_episode(
    task: &str,
    device: &mut dyn DeviceInterface,
    llm: &dyn LlmClient,
    retriever: Option<&dyn TaskRetriever>,
    limits: EpisodeLimits,
) -> Episode {
    let mut agent = Agent::new(llm).with_limits(limits);
    agent.retriever = retriever;
    agent.run(task, device)
}
