//! Tournament-style zero-shot document re-ranking.
//!
//! Candidates from a first-stage retriever are run through several rounds of
//! a multi-stage tournament. In each stage, documents are dealt into groups
//! and a relevance [`judge`] keeps the best few of every group. Each stage
//! survived earns a point, and the accumulated points over rounds give the
//! final order.
//!
//! ```
//! use tourrank::{default_schedule, Candidate, OracleJudge, TourRank};
//!
//! let candidates: Vec<Candidate> = (1..=100)
//!     .map(|r| Candidate::new(format!("d{r}"), "text", r))
//!     .collect();
//! let grades = candidates.iter().map(|c| (c.doc_id.clone(), 100 - c.initial_rank)).collect();
//! let result = TourRank::new(default_schedule().with_rounds(2))
//!     .run("query", &candidates, &OracleJudge::new(grades), 42)
//!     .unwrap();
//! assert_eq!(result.ranking[0], "d1");
//! assert_eq!(result.cost.docs_sent, 370);
//! ```
//!
//! Metric code is generic over [`num_traits::Float`]; the aliases below fix
//! it to `f64`.

pub mod baselines;
pub mod cost;
pub mod domain;
pub mod engine;
pub mod eval;
pub mod grouping;
pub mod judge;
pub mod seed;
pub mod synth;

pub use cost::{analytic_cost, ledger_audit, CostLedger, CostMethod, Merge};
pub use domain::{
    default_schedule, validate_schedule, Candidate, Points, PointsTable, StageSpec,
    TournamentSchedule, DEFAULT_ROUNDS,
};
pub use engine::{
    rank_by_points, EngineError, GroupingPolicy, Parallelism, RankingResult, RoundFailurePolicy,
    TourRank,
};
pub use judge::{
    Grades, Judge, JudgeError, JudgeRequest, JudgeSelection, LlmConfig, LlmJudge, NoiseSpec,
    NoisyJudge, OracleJudge, OrderingJudge,
};

/// Scalar used for scores and metrics.
pub type Score = f64;
/// Run file with `f64` scores.
pub type Run = eval::RunFile<Score>;
/// NDCG report with `f64` values.
pub type Report = eval::EvalReport<Score>;
/// Pointwise baseline with `f64` scores.
pub type PointwiseRanker<S> = baselines::Pointwise<S, Score>;
