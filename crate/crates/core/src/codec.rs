//! Text formats of the four tasks.
//!
//! Inputs are tab separated:
//!
//! ```text
//! [Generate]:\tAction: {action}
//! [Relevance]:\tAction: {action}\t{Kind}: {text}
//! ```
//!
//! The tab is part of the byte-exact contract with the trained models.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ValenceLabel, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Generate,
    Relevance,
    Valence,
    Explanation,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Generate, Task::Relevance, Task::Valence, Task::Explanation];

    pub fn name(self) -> &'static str {
        match self {
            Task::Generate => "Generate",
            Task::Relevance => "Relevance",
            Task::Valence => "Valence",
            Task::Explanation => "Explanation",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Task::Generate => "[Generate]",
            Task::Relevance => "[Relevance]",
            Task::Valence => "[Valence]",
            Task::Explanation => "[Explanation]",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPrompt {
    pub task: Task,
    pub action: String,
    pub entry: Option<(ValueKind, String)>,
}

impl TaskPrompt {
    pub fn generate(action: impl Into<String>) -> Self {
        TaskPrompt {
            task: Task::Generate,
            action: action.into(),
            entry: None,
        }
    }

    pub fn with_entry(task: Task, action: impl Into<String>, kind: ValueKind, text: impl Into<String>) -> Self {
        TaskPrompt {
            task,
            action: action.into(),
            entry: Some((kind, text.into())),
        }
    }
}

pub fn encode_task(p: &TaskPrompt) -> Result<String> {
    match (p.task, &p.entry) {
        (Task::Generate, None) => Ok(format!("{}:\tAction: {}", p.task.tag(), p.action)),
        (Task::Generate, Some(_)) => Err(Error::Codec("generate prompt takes no entry".into())),
        (task, Some((kind, text))) => Ok(format!(
            "{}:\tAction: {}\t{}: {}",
            task.tag(),
            p.action,
            kind,
            text
        )),
        (task, None) => Err(Error::Codec(format!("{task} prompt requires an entry"))),
    }
}

/// Inverse of [`encode_task`].
pub fn decode_task(input: &str) -> Result<TaskPrompt> {
    let (tag, rest) = input
        .split_once(":\t")
        .ok_or_else(|| Error::Codec(format!("missing task tag in {input:?}")))?;
    let task = Task::ALL
        .into_iter()
        .find(|t| t.tag() == tag)
        .ok_or_else(|| Error::Codec(format!("unknown task tag {tag:?}")))?;
    let body = rest
        .strip_prefix("Action: ")
        .ok_or_else(|| Error::Codec(format!("missing \"Action: \" in {input:?}")))?;
    if task == Task::Generate {
        return Ok(TaskPrompt::generate(body));
    }
    let (action, entry) = body
        .rsplit_once('\t')
        .ok_or_else(|| Error::Codec(format!("{task} prompt lacks a tab-separated entry")))?;
    let (kind, text) = entry
        .split_once(": ")
        .ok_or_else(|| Error::Codec(format!("malformed entry {entry:?}")))?;
    let kind: ValueKind = kind.parse()?;
    Ok(TaskPrompt::with_entry(task, action, kind, text))
}

/// Split a generated line such as `Right: Right to life` into kind and text.
pub fn parse_generation_output(line: &str) -> Result<(ValueKind, String)> {
    let line = line.trim();
    let (head, rest) = line
        .split_once(':')
        .ok_or_else(|| Error::Codec(format!("missing kind prefix in {line:?}")))?;
    let kind = match head.trim() {
        "Value" => ValueKind::Value,
        "Right" => ValueKind::Right,
        "Duty" => ValueKind::Duty,
        other => return Err(Error::Codec(format!("unknown kind {other:?}"))),
    };
    let text = rest.trim();
    if text.is_empty() {
        return Err(Error::Codec(format!("empty text after kind in {line:?}")));
    }
    Ok((kind, text.to_string()))
}

/// Relevance answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relevance {
    Yes,
    No,
}

impl Relevance {
    pub fn as_str(self) -> &'static str {
        match self {
            Relevance::Yes => "Yes",
            Relevance::No => "No",
        }
    }
}

/// A parsed classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Relevance(Relevance),
    Valence(ValenceLabel),
}

pub const RELEVANCE_LABELS: [&str; 2] = ["Yes", "No"];
pub const VALENCE_LABELS: [&str; 3] = ["Supports", "Opposes", "Either"];

pub fn parse_label(task: Task, text: &str) -> Result<Label> {
    let t = text.trim().to_ascii_lowercase();
    match task {
        Task::Relevance => match t.as_str() {
            "yes" => Ok(Label::Relevance(Relevance::Yes)),
            "no" => Ok(Label::Relevance(Relevance::No)),
            _ => Err(Error::Codec(format!("unrecognized relevance label {text:?}"))),
        },
        Task::Valence => match t.as_str() {
            "supports" => Ok(Label::Valence(ValenceLabel::Supports)),
            "opposes" => Ok(Label::Valence(ValenceLabel::Opposes)),
            "either" => Ok(Label::Valence(ValenceLabel::Either)),
            _ => Err(Error::Codec(format!("unrecognized valence label {text:?}"))),
        },
        other => Err(Error::Codec(format!("{other} has no label vocabulary"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_generate() {
        let p = TaskPrompt::generate("Saving my black cat called Pepper");
        assert_eq!(
            encode_task(&p).unwrap(),
            "[Generate]:\tAction: Saving my black cat called Pepper"
        );
    }

    #[test]
    fn encode_relevance_and_valence() {
        let p = TaskPrompt::with_entry(
            Task::Relevance,
            "Steal food for starving children",
            ValueKind::Duty,
            "Duty to respect others' property",
        );
        assert_eq!(
            encode_task(&p).unwrap(),
            "[Relevance]:\tAction: Steal food for starving children\tDuty: Duty to respect others' property"
        );
        let p = TaskPrompt::with_entry(
            Task::Valence,
            "Talk to my girlfriend while she's watching TV.",
            ValueKind::Value,
            "Consideration",
        );
        assert_eq!(
            encode_task(&p).unwrap(),
            "[Valence]:\tAction: Talk to my girlfriend while she's watching TV.\tValue: Consideration"
        );
    }

    #[test]
    fn entry_presence_enforced() {
        let mut p = TaskPrompt::generate("x");
        p.task = Task::Explanation;
        assert!(encode_task(&p).is_err());
        let p = TaskPrompt::with_entry(Task::Generate, "x", ValueKind::Value, "y");
        assert!(encode_task(&p).is_err());
    }

    #[test]
    fn parse_generation_lines() {
        assert_eq!(
            parse_generation_output("Right: Right to life (for animals)").unwrap(),
            (ValueKind::Right, "Right to life (for animals)".to_string())
        );
        assert_eq!(
            parse_generation_output("  Value: Freedom ").unwrap(),
            (ValueKind::Value, "Freedom".to_string())
        );
        assert!(parse_generation_output("no colon here").is_err());
        assert!(parse_generation_output("Virtue: Courage").is_err());
        assert!(parse_generation_output("Duty:   ").is_err());
    }

    #[test]
    fn text_after_first_colon_kept_whole() {
        assert_eq!(
            parse_generation_output("Duty: Duty to care: for family").unwrap(),
            (ValueKind::Duty, "Duty to care: for family".to_string())
        );
    }

    #[test]
    fn labels() {
        assert_eq!(
            parse_label(Task::Relevance, "Yes").unwrap(),
            Label::Relevance(Relevance::Yes)
        );
        assert_eq!(
            parse_label(Task::Valence, " either\n").unwrap(),
            Label::Valence(ValenceLabel::Either)
        );
        assert!(parse_label(Task::Valence, "maybe").is_err());
        assert!(parse_label(Task::Generate, "Yes").is_err());
    }
}
