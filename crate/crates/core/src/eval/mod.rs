//! NDCG evaluation, TREC file I/O, and initial-order perturbations.

mod ndcg;
mod trec;

use std::collections::BTreeMap;

use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use ndcg::{dcg_at_k, ideal_dcg_at_k, ndcg_at_k};
pub use trec::{
    create_file, parse_qrels, parse_run, read_corpus, read_qrels, read_queries, read_run,
    write_corpus, write_qrels, write_queries, write_run, write_run_path, CorpusDoc, FormatError,
    Qrels, RunEntry, RunFile,
};

use crate::domain::Candidate;
use crate::seed;

/// Per-query and mean NDCG at each cutoff in `ks`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport<T> {
    pub ks: Vec<usize>,
    /// query id → NDCG per cutoff, aligned with `ks`.
    pub per_query: BTreeMap<String, Vec<T>>,
    pub mean: Vec<T>,
    /// Run queries with no qrels.
    pub skipped: Vec<String>,
}

impl<T: Float> EvalReport<T> {
    pub fn mean_at(&self, k: usize) -> Option<T> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no run query has relevance judgments")]
    NoOverlap,
    #[error("cutoffs must be positive")]
    BadCutoff,
}

/// Scores every run query that has qrels; mean is the plain average.
pub fn evaluate<T: Float, S>(
    run: &RunFile<S>,
    qrels: &Qrels,
    ks: &[usize],
) -> Result<EvalReport<T>, EvalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::BadCutoff);
    }
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for (qid, entries) in &run.queries {
        let Some(grades) = qrels.get(qid) else {
            skipped.push(qid.clone());
            continue;
        };
        let ranking: Vec<&str> = entries.iter().map(|e| e.doc_id.as_str()).collect();
        let scores: Vec<T> = ks.iter().map(|&k| ndcg_at_k(&ranking, grades, k)).collect();
        per_query.insert(qid.clone(), scores);
    }
    if per_query.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let count = T::from(per_query.len()).expect("query count fits");
    let mean = (0..ks.len())
        .map(|i| {
            per_query
                .values()
                .map(|v: &Vec<T>| v[i])
                .fold(T::zero(), |a, b| a + b)
                / count
        })
        .collect();
    Ok(EvalReport {
        ks: ks.to_vec(),
        per_query,
        mean,
        skipped,
    })
}

/// How the initial retrieval order is disturbed before re-ranking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    #[default]
    Keep,
    Shuffle,
    Reverse,
}

impl Perturbation {
    pub const ALL: [Perturbation; 3] = [Self::Keep, Self::Shuffle, Self::Reverse];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Keep => "keep",
            Self::Shuffle => "shuffle",
            Self::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for Perturbation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" => Ok(Self::Keep),
            "shuffle" => Ok(Self::Shuffle),
            "reverse" => Ok(Self::Reverse),
            other => Err(format!(
                "unknown perturbation `{other}` (keep|shuffle|reverse)"
            )),
        }
    }
}

/// Reorders candidates and rewrites `initial_rank` as `1..=N` in the new
/// order, so the perturbed list acts as the retriever output.
pub fn perturb_initial(candidates: &[Candidate], mode: Perturbation, seed: u64) -> Vec<Candidate> {
    let mut ordered: Vec<Candidate> = candidates.to_vec();
    ordered.sort_by_key(|c| c.initial_rank);
    match mode {
        Perturbation::Keep => {}
        Perturbation::Reverse => ordered.reverse(),
        Perturbation::Shuffle => ordered.shuffle(&mut seed::rng(seed::mix(seed, &[0x5348_5546]))),
    }
    for (i, c) in ordered.iter_mut().enumerate() {
        c.initial_rank = i as u32 + 1;
    }
    ordered
}
