use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CallError {
    #[error("unknown function in {0:?}")]
    UnknownFunction(String),
    #[error("wrong number of arguments in {0:?}")]
    BadArity(String),
    #[error("bad argument in {0:?}")]
    BadArgument(String),
    #[error("malformed call {0:?}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Direction::ALL.into_iter().find(|d| d.as_str() == s).ok_or(())
    }
}

/// One primitive operation chosen by the agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Tap(usize),
    LongPress(usize),
    Text(String),
    Scroll(Direction),
    Back,
    Finish,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical call text, e.g. `Tap(3)` or `Text("hi")`.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tap(id) => write!(f, "Tap({id})"),
            Action::LongPress(id) => write!(f, "Long_press({id})"),
            Action::Text(t) => write!(f, "Text({})", quote(t)),
            Action::Scroll(d) => write!(f, "Scroll(\"{d}\")"),
            Action::Back => f.write_str("Back()"),
            Action::Finish => f.write_str("Finish()"),
        }
    }
}

impl FromStr for Action {
    type Err = CallError;

    fn from_str(s: &str) -> Result<Self, CallError> {
        parse_call(s)
    }
}

enum Arg {
    Quoted(String),
    Bare(String),
}

/// Splits the text between the parentheses into arguments.
fn split_args(inner: &str, whole: &str) -> Result<Vec<Arg>, CallError> {
    let mut args = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None => {
                if !args.is_empty() {
                    // trailing comma
                    return Err(CallError::Malformed(whole.to_string()));
                }
                return Ok(args);
            }
            Some('"') => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(CallError::Malformed(whole.to_string())),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('n') => s.push('\n'),
                            Some('r') => s.push('\r'),
                            Some('t') => s.push('\t'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            Some(_) | None => return Err(CallError::BadArgument(whole.to_string())),
                        },
                        Some(c) => s.push(c),
                    }
                }
                args.push(Arg::Quoted(s));
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c == ',' || c.is_whitespace() {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                args.push(Arg::Bare(s));
            }
        }
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            None => return Ok(args),
            Some(',') => continue,
            Some(_) => return Err(CallError::BadArgument(whole.to_string())),
        }
    }
}

/// Parses one function call of the action grammar.
///
/// ```text
/// Tap(<int>) | Long_press(<int>) | Text("<string>") |
/// Scroll("up"|"down"|"left"|"right") | Back() | Finish()
/// ```
///
/// Names are case-sensitive; whitespace around the call and its arguments
/// is tolerated. Strings use backslash escapes (`\"`, `\\`, `\n`, `\r`,
/// `\t`).
pub fn parse_call(text: &str) -> Result<Action, CallError> {
    let whole = text.trim();
    let err_text = || whole.to_string();
    let open = whole.find('(').ok_or_else(|| CallError::Malformed(err_text()))?;
    let inner = whole
        .strip_suffix(')')
        .filter(|s| s.len() > open)
        .map(|s| &s[open + 1..])
        .ok_or_else(|| CallError::Malformed(err_text()))?;
    let name = &whole[..open];
    let arity = match name {
        "Tap" | "Long_press" | "Text" | "Scroll" => 1,
        "Back" | "Finish" => 0,
        _ => return Err(CallError::UnknownFunction(err_text())),
    };
    let args = split_args(inner, whole)?;
    if args.len() != arity {
        return Err(CallError::BadArity(err_text()));
    }
    let bad = || CallError::BadArgument(err_text());
    let id = |a: &Arg| match a {
        Arg::Bare(s) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => s.parse::<usize>().map_err(|_| bad()),
        _ => Err(bad()),
    };
    Ok(match name {
        "Tap" => Action::Tap(id(&args[0])?),
        "Long_press" => Action::LongPress(id(&args[0])?),
        "Text" => match &args[0] {
            Arg::Quoted(s) => Action::Text(s.clone()),
            Arg::Bare(_) => return Err(bad()),
        },
        "Scroll" => match &args[0] {
            Arg::Quoted(s) => Action::Scroll(s.parse().map_err(|_| bad())?),
            Arg::Bare(_) => return Err(bad()),
        },
        "Back" => Action::Back,
        _ => Action::Finish,
    })
}

/// Length in bytes of the first call `name(...)` at the start of `text`
/// (after leading whitespace is skipped by the caller), honoring quoted
/// strings. `None` if no closing parenthesis is found.
pub(crate) fn leading_call_len(text: &str) -> Option<usize> {
    let open = text.find('(')?;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[open + 1..].char_indices() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ')' {
            return Some(open + 1 + i + 1);
        }
    }
    None
}
