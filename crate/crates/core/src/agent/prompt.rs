use std::fmt;

use thiserror::Error;

use super::action::Action;
use crate::retrieval::TaskCase;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("task description is empty")]
    EmptyTask,
}

/// Execution feedback for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feedback {
    Ok,
    Error(String),
}

impl Feedback {
    pub fn error(msg: impl Into<String>) -> Self {
        Feedback::Error(msg.into())
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Feedback::Error(_))
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feedback::Ok => f.write_str("ok"),
            Feedback::Error(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    /// 1-based.
    pub step: usize,
    /// `None` when the reply could not be parsed.
    pub action: Option<Action>,
    pub feedback: Feedback,
}

impl fmt::Display for HistoryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Some(a) => write!(f, "{}. {a} -> {}", self.step, self.feedback),
            None => write!(f, "{}. (no action) -> {}", self.step, self.feedback),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptBundle {
    pub task: String,
    /// Rendered screen document.
    pub screen_doc: String,
    pub history: Vec<HistoryEntry>,
    pub example: Option<TaskCase>,
    /// Ask the client to attach the screenshot; text-only clients ignore it.
    pub attach_screenshot: bool,
}

const PREAMBLE: &str = "You are an agent operating a smartphone on behalf of a user.";

const INSTRUCTIONS: &str = "# Instructions
Reply in exactly this format:
Summary: <state summary>
Thought: <reflection>
Action: <explanation>
Function: <Tap(id) | Long_press(id) | Text(\"...\") | Scroll(\"up|down|left|right\") | Back() | Finish()>";

/// Assembles the decision prompt: task, screen, history, optional worked
/// example, reply instructions.
pub fn build_prompt(bundle: &PromptBundle) -> Result<String, PromptError> {
    if bundle.task.trim().is_empty() {
        return Err(PromptError::EmptyTask);
    }
    let mut lines: Vec<String> = vec![
        PREAMBLE.to_string(),
        "# Task".to_string(),
        bundle.task.clone(),
        "# Screen".to_string(),
        bundle.screen_doc.clone(),
        "# History".to_string(),
    ];
    if bundle.history.is_empty() {
        lines.push("None".to_string());
    } else {
        lines.extend(bundle.history.iter().map(HistoryEntry::to_string));
    }
    if let Some(ex) = &bundle.example {
        lines.push("# Example".to_string());
        lines.push(format!("Task: {}", ex.task));
        lines.push("Steps:".to_string());
        for (i, step) in ex.steps.iter().enumerate() {
            match step.note.as_deref().filter(|n| !n.is_empty()) {
                Some(note) => lines.push(format!("{}. {} // {note}", i + 1, step.call)),
                None => lines.push(format!("{}. {}", i + 1, step.call)),
            }
        }
    }
    lines.push(INSTRUCTIONS.to_string());
    Ok(lines.join("\n"))
}
