use thiserror::Error;

use super::action::{leading_call_len, parse_call, Action, CallError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplyError {
    #[error("reply has no {0} section")]
    MissingSection(&'static str),
    #[error(transparent)]
    Call(#[from] CallError),
}

/// A structured chain-of-thought reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub summary: String,
    pub thought: String,
    /// Natural-language explanation of the chosen action.
    pub explanation: String,
    pub action: Action,
}

const LABELS: [&str; 4] = ["Summary", "Thought", "Action", "Function"];

/// Splits a reply into its `Summary:`, `Thought:`, `Action:` and
/// `Function:` sections and parses the first call in the Function section.
///
/// Labels must start a line (leading whitespace allowed); a section runs
/// until the next label. Anything after the call is ignored.
pub fn parse_reply(text: &str) -> Result<AgentReply, ReplyError> {
    let mut sections: [Option<String>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let label = LABELS.iter().position(|l| {
            trimmed.strip_prefix(l).is_some_and(|rest| rest.starts_with(':'))
        });
        match label {
            Some(i) => {
                let body = trimmed[LABELS[i].len() + 1..].trim_start();
                if sections[i].is_none() {
                    sections[i] = Some(body.to_string());
                    current = Some(i);
                } else {
                    current = None;
                }
            }
            None => {
                if let Some(s) = current.and_then(|i| sections[i].as_mut()) {
                    s.push('\n');
                    s.push_str(line);
                }
            }
        }
    }
    let mut take = |i: usize| sections[i].take().ok_or(ReplyError::MissingSection(LABELS[i]));
    let summary = take(0)?.trim().to_string();
    let thought = take(1)?.trim().to_string();
    let explanation = take(2)?.trim().to_string();
    let function = take(3)?;
    let body = function.trim_start();
    let call = match leading_call_len(body) {
        Some(n) => &body[..n],
        None => body.lines().next().unwrap_or(""),
    };
    Ok(AgentReply { summary, thought, explanation, action: parse_call(call)? })
}
