//! Instruction prompts and few-shot prompt assembly.
//!
//! The user turn lists each demonstration as an `Input:` / `Output:` pair,
//! separated by blank lines, and ends with the query and an empty `Output:`:
//!
//! ```text
//! Input: x συν y
//! Output: x+y
//!
//! Input: άλφα στο τετράγωνο
//! Output:
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt id `{0}` (expected p1, p2 or p3)")]
    UnknownId(String),
    #[error("example `{0}` is the query itself")]
    Leakage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptId {
    P1,
    P2,
    P3,
}

impl PromptId {
    pub const ALL: [PromptId; 3] = [PromptId::P1, PromptId::P2, PromptId::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::P1 => "p1",
            PromptId::P2 => "p2",
            PromptId::P3 => "p3",
        }
    }

    pub fn prompt(self) -> InstructionPrompt {
        let text = match self {
            PromptId::P1 => include_str!("../assets/prompts/p1.txt"),
            PromptId::P2 => include_str!("../assets/prompts/p2.txt"),
            PromptId::P3 => include_str!("../assets/prompts/p3.txt"),
        };
        InstructionPrompt { id: self, text }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p1" => Ok(PromptId::P1),
            "p2" => Ok(PromptId::P2),
            "p3" => Ok(PromptId::P3),
            other => Err(PromptError::UnknownId(other.to_string())),
        }
    }
}

/// One of the three shipped instructions. `p1` and `p2` are English, `p3` Greek.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstructionPrompt {
    pub id: PromptId,
    pub text: &'static str,
}

pub fn get_prompt(id: &str) -> Result<InstructionPrompt, PromptError> {
    Ok(id.parse::<PromptId>()?.prompt())
}

/// A retrieved corpus pair ready to be shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub pair_id: String,
    pub nl_text: String,
    pub latex: String,
    /// 1 is the most similar.
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleTurn {
    pub pair_id: String,
    pub nl_text: String,
    pub latex: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleOrder {
    /// The best match sits right before the query.
    #[default]
    MostSimilarLast,
    MostSimilarFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructionPlacement {
    #[default]
    SystemMessage,
    /// Instruction, blank line, then the few-shot block, all in one user turn.
    UserPrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssemblyOptions {
    #[serde(default)]
    pub order: ExampleOrder,
    #[serde(default)]
    pub placement: InstructionPlacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub system_text: String,
    pub example_turns: Vec<ExampleTurn>,
    pub query_text: String,
    pub placement: InstructionPlacement,
}

impl AssembledPrompt {
    /// The few-shot block sent as the user turn (without the instruction).
    pub fn user_block(&self) -> String {
        let mut out = String::new();
        for turn in &self.example_turns {
            out.push_str("Input: ");
            out.push_str(&turn.nl_text);
            out.push_str("\nOutput: ");
            out.push_str(&turn.latex);
            out.push_str("\n\n");
        }
        out.push_str("Input: ");
        out.push_str(&self.query_text);
        out.push_str("\nOutput:");
        out
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        match self.placement {
            InstructionPlacement::SystemMessage => vec![
                ChatMessage { role: Role::System, content: self.system_text.clone() },
                ChatMessage { role: Role::User, content: self.user_block() },
            ],
            InstructionPlacement::UserPrefix => vec![ChatMessage {
                role: Role::User,
                content: format!("{}\n\n{}", self.system_text, self.user_block()),
            }],
        }
    }

    /// Human-readable dump of exactly what is sent.
    pub fn render(&self) -> String {
        self.messages()
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                };
                format!("[{role}]\n{}\n", m.content)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Builds the prompt. `examples` may be empty (no-example baseline); they are
/// ordered by rank according to `options.order`, input order breaking ties.
pub fn assemble(
    instruction: &InstructionPrompt,
    examples: &[Demonstration],
    query: &str,
    options: AssemblyOptions,
) -> AssembledPrompt {
    let mut ordered: Vec<&Demonstration> = examples.iter().collect();
    match options.order {
        ExampleOrder::MostSimilarLast => ordered.sort_by(|a, b| b.rank.cmp(&a.rank)),
        ExampleOrder::MostSimilarFirst => ordered.sort_by(|a, b| a.rank.cmp(&b.rank)),
    }
    AssembledPrompt {
        system_text: instruction.text.to_owned(),
        example_turns: ordered
            .into_iter()
            .map(|d| ExampleTurn { pair_id: d.pair_id.clone(), nl_text: d.nl_text.clone(), latex: d.latex.clone() })
            .collect(),
        query_text: query.to_owned(),
        placement: options.placement,
    }
}

/// [`assemble`] for a query that is itself a corpus pair: refuses any
/// example carrying the query's own id.
pub fn assemble_for_pair(
    instruction: &InstructionPrompt,
    examples: &[Demonstration],
    query: &str,
    query_pair_id: &str,
    options: AssemblyOptions,
) -> Result<AssembledPrompt, PromptError> {
    if let Some(leak) = examples.iter().find(|d| d.pair_id == query_pair_id) {
        return Err(PromptError::Leakage(leak.pair_id.clone()));
    }
    Ok(assemble(instruction, examples, query, options))
}
