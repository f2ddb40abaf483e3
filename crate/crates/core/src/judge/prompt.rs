//! Conversational prompt for group selection, plus the full-ordering
//! variant used by the sliding-window baseline.

use serde::{Deserialize, Serialize};

use crate::domain::Candidate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

const SYSTEM: &str = "You are an intelligent assistant that can compare multiple documents \
based on their relevancy to the given query.";

const FORMAT_EXAMPLE: &str = "Document 3, ..., Document 1";

fn scaffold(preamble: String, presented: &[&Candidate], closing: String) -> Vec<ChatMessage> {
    let mut msgs = Vec::with_capacity(4 + 2 * presented.len());
    msgs.push(ChatMessage::new(Role::System, SYSTEM));
    msgs.push(ChatMessage::new(Role::User, preamble));
    msgs.push(ChatMessage::new(
        Role::Assistant,
        "Okay, please provide the documents.",
    ));
    for (i, doc) in presented.iter().enumerate() {
        let label = i + 1;
        msgs.push(ChatMessage::new(
            Role::User,
            format!("Document {label}: {}", doc.text),
        ));
        msgs.push(ChatMessage::new(
            Role::Assistant,
            format!("Received Document {label}."),
        ));
    }
    msgs.push(ChatMessage::new(Role::User, closing));
    msgs
}

/// Selection prompt. Documents are numbered in presentation order.
pub fn build_prompt(query: &str, presented: &[&Candidate], select: usize) -> Vec<ChatMessage> {
    let n = presented.len();
    scaffold(
        format!(
            "I will provide you with the given query and {n} documents. Consider the content \
of all the documents comprehensively and select the {select} documents that are most relevant \
to the given query: {query}."
        ),
        presented,
        format!(
            "The Query is: {query}. Now, you must output the top {select} documents that are \
most relevant to the Query using the following format strictly, and nothing else. Don't output \
any explanation, just the following format:\n{FORMAT_EXAMPLE}"
        ),
    )
}

/// Ordering prompt: same scaffold, asks for every label ranked best first.
pub fn build_ordering_prompt(query: &str, presented: &[&Candidate]) -> Vec<ChatMessage> {
    let n = presented.len();
    scaffold(
        format!(
            "I will provide you with the given query and {n} documents. Consider the content \
of all the documents comprehensively and rank all {n} documents by their relevance to the \
given query: {query}."
        ),
        presented,
        format!(
            "The Query is: {query}. Now, you must output all {n} documents ranked from most to \
least relevant to the Query using the following format strictly, and nothing else. Don't \
output any explanation, just the following format:\n{FORMAT_EXAMPLE}"
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<Candidate> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Candidate::new(format!("d{i}"), *t, i as u32 + 1))
            .collect()
    }

    #[test]
    fn two_documents_make_eight_messages() {
        let d = docs(&["alpha", "beta"]);
        let refs: Vec<_> = d.iter().collect();
        let msgs = build_prompt("what is rust", &refs, 1);
        assert_eq!(msgs.len(), 8);
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs[0].content.contains("intelligent assistant"));
        let last = &msgs[7];
        assert_eq!(last.role, Role::User);
        assert!(last.content.contains("what is rust"));
        assert!(last.content.contains("top 1 documents"));
    }

    #[test]
    fn golden_transcript_three_docs() {
        let d = docs(&["first text", "second text", "third text"]);
        let refs: Vec<_> = vec![&d[2], &d[0], &d[1]];
        let msgs = build_prompt("Q", &refs, 2);
        let golden: Vec<(Role, &str)> = vec![
            (Role::System, "You are an intelligent assistant that can compare multiple documents based on their relevancy to the given query."),
            (Role::User, "I will provide you with the given query and 3 documents. Consider the content of all the documents comprehensively and select the 2 documents that are most relevant to the given query: Q."),
            (Role::Assistant, "Okay, please provide the documents."),
            (Role::User, "Document 1: third text"),
            (Role::Assistant, "Received Document 1."),
            (Role::User, "Document 2: first text"),
            (Role::Assistant, "Received Document 2."),
            (Role::User, "Document 3: second text"),
            (Role::Assistant, "Received Document 3."),
            (Role::User, "The Query is: Q. Now, you must output the top 2 documents that are most relevant to the Query using the following format strictly, and nothing else. Don't output any explanation, just the following format:\nDocument 3, ..., Document 1"),
        ];
        let got: Vec<(Role, &str)> = msgs.iter().map(|m| (m.role, m.content.as_str())).collect();
        assert_eq!(got, golden);
    }

    #[test]
    fn ordering_prompt_shares_scaffold() {
        let d = docs(&["a", "b", "c"]);
        let refs: Vec<_> = d.iter().collect();
        let msgs = build_ordering_prompt("q", &refs);
        assert_eq!(msgs.len(), 10);
        assert!(msgs[9].content.contains("all 3 documents"));
    }

    #[test]
    fn roles_serialize_lowercase() {
        let m = ChatMessage::new(Role::Assistant, "x");
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"role":"assistant","content":"x"}"#
        );
    }
}
