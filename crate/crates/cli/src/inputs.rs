//! Loading queries with their candidate pools, and per-query judges.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use tourrank::baselines::{NoisyScorer, OracleScorer, PointwiseScorer};
use tourrank::eval::{perturb_initial, read_corpus, read_qrels, read_queries, read_run, Qrels};
use tourrank::judge::OrderingRequest;
use tourrank::{
    seed, Candidate, Judge, JudgeError, JudgeRequest, JudgeSelection, LlmJudge, NoiseSpec,
    NoisyJudge, OracleJudge, OrderingJudge,
};

use crate::config::{JudgeKind, RunConfig, API_KEY_VAR};

#[derive(Args, Clone, Debug)]
pub struct InputFiles {
    /// JSONL corpus with `doc_id` and `text` fields.
    #[arg(long)]
    pub corpus: PathBuf,
    /// TSV file of `qid<TAB>query text`.
    #[arg(long)]
    pub queries: PathBuf,
    /// First-stage TREC run giving each query's candidates and initial ranks.
    #[arg(long)]
    pub candidates: PathBuf,
    /// TREC qrels; required by the oracle and noisy judges.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Keep only the top N candidates of each query.
    #[arg(long, value_name = "N")]
    pub depth: Option<usize>,
}

/// Missing or rejected credentials.
#[derive(Debug)]
pub struct AuthFailure(pub String);

impl std::fmt::Display for AuthFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "authentication failed: {}", self.0)
    }
}

impl std::error::Error for AuthFailure {}

pub struct QueryInput {
    pub qid: String,
    pub text: String,
    pub candidates: Vec<Candidate>,
}

/// Seed for everything query-specific, derived from the run seed.
pub fn query_seed(run_seed: u64, qid: &str) -> u64 {
    seed::mix(run_seed, &[seed::fnv1a(qid.as_bytes())])
}

pub fn load_queries(files: &InputFiles) -> Result<Vec<QueryInput>> {
    let corpus = read_corpus(&files.corpus).context("loading corpus")?;
    let queries = read_queries(&files.queries).context("loading queries")?;
    let run = read_run::<f64>(&files.candidates).context("loading candidates")?;
    if queries.is_empty() {
        bail!("{} contains no queries", files.queries.display());
    }
    let mut out = Vec::with_capacity(queries.len());
    for (qid, text) in queries {
        let Some(entries) = run.queries.get(&qid) else {
            bail!(
                "query `{qid}` has no candidates in {}",
                files.candidates.display()
            );
        };
        let keep = files.depth.unwrap_or(entries.len()).min(entries.len());
        let mut candidates = Vec::with_capacity(keep);
        for (i, e) in entries.iter().take(keep).enumerate() {
            let Some(doc) = corpus.get(&e.doc_id) else {
                bail!(
                    "candidate `{}` of query `{qid}` is not in the corpus {}",
                    e.doc_id,
                    files.corpus.display()
                );
            };
            candidates.push(Candidate::new(e.doc_id.clone(), doc.clone(), i as u32 + 1));
        }
        out.push(QueryInput {
            qid,
            text,
            candidates,
        });
    }
    Ok(out)
}

pub fn load_qrels(files: &InputFiles, why: &str) -> Result<Qrels> {
    let Some(path) = &files.qrels else {
        bail!("--qrels is required {why}");
    };
    read_qrels(path).context("loading qrels")
}

/// Applies the configured perturbation with a per-query seed.
pub fn perturbed(
    q: &QueryInput,
    cfg: &RunConfig,
    mode: tourrank::eval::Perturbation,
) -> Vec<Candidate> {
    perturb_initial(&q.candidates, mode, query_seed(cfg.seed, &q.qid))
}

/// The configured judge, resolved per query.
pub enum Judges {
    Oracle(Qrels),
    Noisy(Qrels, NoiseSpec),
    Llm(Arc<LlmJudge>),
}

/// A judge bound to one query.
pub enum QueryJudge {
    Oracle(OracleJudge),
    Noisy(NoisyJudge),
    Llm(Arc<LlmJudge>),
}

impl Judges {
    pub fn build(cfg: &RunConfig, files: &InputFiles) -> Result<Judges> {
        Ok(match cfg.judge {
            JudgeKind::Oracle => Judges::Oracle(load_qrels(files, "for the oracle judge")?),
            JudgeKind::Noisy => Judges::Noisy(
                load_qrels(files, "for the noisy judge")?,
                NoiseSpec::new(cfg.epsilon, seed::mix(cfg.seed, &[0x4e_4f_49_53_45]))?,
            ),
            JudgeKind::Llm => {
                let key = std::env::var(API_KEY_VAR)
                    .ok()
                    .filter(|k| !k.trim().is_empty())
                    .ok_or_else(|| {
                        AuthFailure(format!("set {API_KEY_VAR} to use the llm judge"))
                    })?;
                Judges::Llm(Arc::new(LlmJudge::new(cfg.llm_config(key))))
            }
        })
    }

    pub fn for_query(&self, qid: &str) -> QueryJudge {
        let grades = |q: &Qrels| q.get(qid).cloned().unwrap_or_default();
        match self {
            Judges::Oracle(q) => QueryJudge::Oracle(OracleJudge::new(grades(q))),
            Judges::Noisy(q, noise) => QueryJudge::Noisy(NoisyJudge::new(grades(q), *noise)),
            Judges::Llm(j) => QueryJudge::Llm(Arc::clone(j)),
        }
    }

    /// Pointwise scorer for this query; only ground-truth judges have one.
    pub fn scorer(&self, qid: &str) -> Result<Box<dyn PointwiseScorer<f64>>> {
        let grades = |q: &Qrels| q.get(qid).cloned().unwrap_or_default();
        match self {
            Judges::Oracle(q) => Ok(Box::new(OracleScorer { grades: grades(q) })),
            Judges::Noisy(q, noise) => Ok(Box::new(NoisyScorer::new(grades(q), *noise))),
            Judges::Llm(_) => {
                bail!("the pointwise baseline has no llm scorer; use --judge oracle or noisy")
            }
        }
    }
}

impl Judge for QueryJudge {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        match self {
            QueryJudge::Oracle(j) => j.select(request),
            QueryJudge::Noisy(j) => j.select(request),
            QueryJudge::Llm(j) => j.select(request),
        }
    }
}

impl OrderingJudge for QueryJudge {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        match self {
            QueryJudge::Oracle(j) => j.order(request),
            QueryJudge::Noisy(j) => j.order(request),
            QueryJudge::Llm(j) => j.order(request),
        }
    }
}
