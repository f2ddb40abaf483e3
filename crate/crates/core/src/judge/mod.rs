//! Relevance judges: "pick the `m` most relevant of these `n` documents".
//!
//! Three implementations share the [`Judge`] contract: a ground-truth
//! [`OracleJudge`], a seeded [`NoisyJudge`] that perturbs the oracle, and
//! [`LlmJudge`] which talks to a chat-completions endpoint. The same types
//! also implement [`OrderingJudge`], the full-permutation variant used by
//! the sliding-window baseline.

mod llm;
mod oracle;
mod parse;
mod prompt;

use std::collections::HashMap;

pub use llm::{ChatTransport, HttpTransport, LlmConfig, LlmJudge, TransportError};
pub use oracle::{
    noisy_order, noisy_select, oracle_order, oracle_select, NoiseSpec, NoisyJudge, OracleJudge,
};
pub use parse::parse_selection;
pub use prompt::{build_ordering_prompt, build_prompt, ChatMessage, Role};

use crate::domain::Candidate;
use crate::seed;

/// Relevance grades for one query. Missing documents grade 0.
pub type Grades = HashMap<String, u32>;

/// A group-selection task. Labels are implicit: `presented[i]` is
/// labelled `i + 1`.
#[derive(Clone, Debug)]
pub struct JudgeRequest<'a> {
    pub query: &'a str,
    pub presented: Vec<&'a Candidate>,
    pub select: usize,
}

impl<'a> JudgeRequest<'a> {
    pub fn new(query: &'a str, presented: Vec<&'a Candidate>, select: usize) -> Self {
        Self {
            query,
            presented,
            select,
        }
    }

    pub fn len(&self) -> usize {
        self.presented.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presented.is_empty()
    }

    /// `(label, doc)` pairs in presentation order.
    pub fn labelled(&self) -> impl Iterator<Item = (usize, &'a Candidate)> + '_ {
        self.presented.iter().enumerate().map(|(i, c)| (i + 1, *c))
    }

    pub fn doc(&self, label: usize) -> &'a Candidate {
        self.presented[label - 1]
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.select == 0 || self.select >= self.presented.len() {
            return Err(JudgeError::InvalidRequest(format!(
                "select must be in 1..{}, got {}",
                self.presented.len(),
                self.select
            )));
        }
        Ok(())
    }

    /// Stable fingerprint of the request: query, presented ids in order, and `m`.
    pub(crate) fn fingerprint(&self) -> u64 {
        fingerprint(self.query, &self.presented, self.select)
    }
}

/// A full-ordering task over a window of documents, labelled `1..=len`.
#[derive(Clone, Debug)]
pub struct OrderingRequest<'a> {
    pub query: &'a str,
    pub presented: Vec<&'a Candidate>,
}

impl<'a> OrderingRequest<'a> {
    pub fn new(query: &'a str, presented: Vec<&'a Candidate>) -> Self {
        Self { query, presented }
    }

    pub fn len(&self) -> usize {
        self.presented.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presented.is_empty()
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        fingerprint(self.query, &self.presented, usize::MAX)
    }
}

fn fingerprint(query: &str, presented: &[&Candidate], select: usize) -> u64 {
    let mut buf = Vec::with_capacity(query.len() + presented.len() * 12 + 8);
    buf.extend_from_slice(query.as_bytes());
    for c in presented {
        buf.push(0x1f);
        buf.extend_from_slice(c.doc_id.as_bytes());
    }
    buf.push(0x1e);
    buf.extend_from_slice(&(select as u64).to_le_bytes());
    seed::fnv1a(&buf)
}

/// A judge's answer. For selections `chosen_labels` holds `m` labels; for
/// orderings it is a permutation of all labels, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JudgeSelection {
    pub chosen_labels: Vec<usize>,
    pub repair_applied: bool,
    pub raw_response: Option<String>,
    /// Transport retries spent producing this answer.
    pub retries: u32,
}

impl JudgeSelection {
    pub fn exact(chosen_labels: Vec<usize>) -> Self {
        Self {
            chosen_labels,
            repair_applied: false,
            raw_response: None,
            retries: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge unavailable after {attempts} attempt(s): {reason}")]
    Unavailable { attempts: u32, reason: String },
    #[error("authentication rejected by endpoint (HTTP {status})")]
    Auth { status: u16 },
    #[error("endpoint returned an unusable response: {0}")]
    Protocol(String),
    #[error("invalid judge request: {0}")]
    InvalidRequest(String),
    #[error("judge failed: {0}")]
    Other(String),
}

/// "Choose the `m` most relevant of `n` presented documents."
pub trait Judge: Send + Sync {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError>;
}

/// "Order these documents from most to least relevant."
pub trait OrderingJudge: Send + Sync {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError>;
}

impl<J: Judge + ?Sized> Judge for &J {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        (**self).select(request)
    }
}

impl<J: Judge + ?Sized> Judge for std::sync::Arc<J> {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        (**self).select(request)
    }
}

impl<J: OrderingJudge + ?Sized> OrderingJudge for &J {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        (**self).order(request)
    }
}

impl<J: OrderingJudge + ?Sized> OrderingJudge for std::sync::Arc<J> {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        (**self).order(request)
    }
}
