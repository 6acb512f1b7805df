//! The decision loop: prompt assembly, reply parsing, the action grammar,
//! and the mapping from id-level actions to device commands.

mod action;
mod episode;
mod prompt;
mod reply;

pub use action::{parse_call, Action, CallError, Direction};
pub use episode::{
    resolve_action, run_episode, swipe_direction, Agent, ApplyOutcome, DeviceCommand, DeviceInterface, Episode,
    EpisodeLimits, EpisodeStatus, FailReason, Observation, ResolveError, TraceRecord, SCROLL_FRACTION,
};
pub use prompt::{build_prompt, Feedback, HistoryEntry, PromptBundle, PromptError};
pub use reply::{parse_reply, AgentReply, ReplyError};
