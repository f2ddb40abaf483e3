//! Comparison re-rankers: sliding-window listwise, pointwise scoring, and
//! serial re-application of any ranker.

use std::cmp::Ordering;

use num_traits::Float;
use rayon::prelude::*;

use crate::cost::{CostLedger, Merge};
use crate::domain::Candidate;
use crate::engine::{EngineError, TourRank};
use crate::judge::{Grades, Judge, JudgeError, NoiseSpec, OrderingJudge, OrderingRequest};
use crate::seed;

/// A ranked list of doc ids (best first) and its cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reranked {
    pub ranking: Vec<String>,
    pub cost: CostLedger,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RerankError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: JudgeError,
    },
    #[error("window {window}: judge returned a non-permutation {labels:?}")]
    BadOrdering { window: usize, labels: Vec<usize> },
    #[error("scoring `{doc_id}`: {source}")]
    Scorer {
        doc_id: String,
        #[source]
        source: JudgeError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Anything that reorders a candidate list for a query.
pub trait Reranker: Send + Sync {
    fn name(&self) -> String;
    fn rerank(&self, query: &str, candidates: &[Candidate]) -> Result<Reranked, RerankError>;
}

/// Candidates in the order given by their `initial_rank`.
fn by_initial_rank(candidates: &[Candidate]) -> Vec<&Candidate> {
    let mut v: Vec<&Candidate> = candidates.iter().collect();
    v.sort_by_key(|c| c.initial_rank);
    v
}

/// Rebuilds a candidate list whose initial ranks follow `ranking`.
pub fn reorder_candidates(candidates: &[Candidate], ranking: &[String]) -> Vec<Candidate> {
    let idx = crate::engine::index_by_id(candidates);
    ranking
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut c = idx[id.as_str()].clone();
            c.initial_rank = i as u32 + 1;
            c
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub window: usize,
    pub step: usize,
}

impl WindowSpec {
    /// Window 20, step 10.
    pub const DEFAULT: Self = Self {
        window: 20,
        step: 10,
    };

    pub fn new(window: usize, step: usize) -> Self {
        Self { window, step }
    }

    fn check(&self, n: usize) -> Result<(), RerankError> {
        if self.step == 0 || self.step > self.window || self.window > n {
            return Err(RerankError::InvalidArgument(format!(
                "need 1 <= step ({}) <= window ({}) <= N ({n})",
                self.step, self.window
            )));
        }
        Ok(())
    }

    /// Window start offsets, bottom of the list first, always ending at 0.
    pub fn starts(&self, n: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut s = n.saturating_sub(self.window);
        while s > 0 {
            starts.push(s);
            s = s.saturating_sub(self.step);
        }
        starts.push(0);
        starts
    }
}

/// RankGPT-style pass: reorder windows of `spec.window` docs from the
/// bottom of the list to the top. Windows are strictly sequential.
pub fn sliding_window_rerank<J: OrderingJudge + ?Sized>(
    query: &str,
    candidates: &[Candidate],
    spec: WindowSpec,
    judge: &J,
) -> Result<Reranked, RerankError> {
    spec.check(candidates.len())?;
    let mut order = by_initial_rank(candidates);
    let mut cost = CostLedger::default();
    for (w, start) in spec.starts(order.len()).into_iter().enumerate() {
        let slice = &order[start..start + spec.window];
        let request = OrderingRequest::new(query, slice.to_vec());
        let sel = judge
            .order(&request)
            .map_err(|source| RerankError::Window { window: w, source })?;
        if !is_permutation(&sel.chosen_labels, spec.window) {
            return Err(RerankError::BadOrdering {
                window: w,
                labels: sel.chosen_labels,
            });
        }
        let reordered: Vec<&Candidate> = sel
            .chosen_labels
            .iter()
            .map(|&l| request.presented[l - 1])
            .collect();
        order[start..start + spec.window].copy_from_slice(&reordered);
        let mut l = CostLedger::call(spec.window);
        l.retries = sel.retries as u64;
        l.repairs = u64::from(sel.repair_applied);
        cost = cost.merge(l, Merge::Sequential);
    }
    Ok(Reranked {
        ranking: order.into_iter().map(|c| c.doc_id.clone()).collect(),
        cost,
    })
}

fn is_permutation(labels: &[usize], n: usize) -> bool {
    if labels.len() != n {
        return false;
    }
    let mut seen = vec![false; n + 1];
    labels.iter().all(|&l| {
        let fresh = (1..=n).contains(&l) && !seen[l];
        if fresh {
            seen[l] = true;
        }
        fresh
    })
}

/// Independent relevance score for a (query, doc) pair.
pub trait PointwiseScorer<T: Float>: Send + Sync {
    fn score(&self, query: &str, doc: &Candidate) -> Result<T, JudgeError>;
}

/// Scores by true grade.
#[derive(Clone, Debug, Default)]
pub struct OracleScorer {
    pub grades: Grades,
}

impl<T: Float> PointwiseScorer<T> for OracleScorer {
    fn score(&self, _: &str, doc: &Candidate) -> Result<T, JudgeError> {
        let g = self.grades.get(&doc.doc_id).copied().unwrap_or(0);
        T::from(g).ok_or_else(|| JudgeError::Other("grade not representable".into()))
    }
}

/// Scores by true grade, except that with probability epsilon the grade
/// is replaced by one drawn uniformly from `0..=max grade`. Deterministic
/// per (query, doc).
#[derive(Clone, Debug)]
pub struct NoisyScorer {
    pub grades: Grades,
    pub noise: NoiseSpec,
    max_grade: u32,
}

impl NoisyScorer {
    pub fn new(grades: Grades, noise: NoiseSpec) -> Self {
        let max_grade = grades.values().copied().max().unwrap_or(0);
        Self {
            grades,
            noise,
            max_grade,
        }
    }
}

impl<T: Float> PointwiseScorer<T> for NoisyScorer {
    fn score(&self, query: &str, doc: &Candidate) -> Result<T, JudgeError> {
        use rand::Rng as _;
        let key = seed::fnv1a(format!("{query}\u{1f}{}", doc.doc_id).as_bytes());
        let mut rng = seed::rng(seed::mix(self.noise.seed, &[key]));
        let mut g = self.grades.get(&doc.doc_id).copied().unwrap_or(0);
        if rng.gen::<f64>() < self.noise.epsilon() {
            g = rng.gen_range(0..=self.max_grade);
        }
        T::from(g).ok_or_else(|| JudgeError::Other("grade not representable".into()))
    }
}

/// What a failed or non-finite score turns into.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreFailure {
    #[default]
    Abort,
    /// Rank the document last, as if it scored negative infinity.
    SkipAsMinusInfinity,
}

/// Scores every candidate independently (in parallel) and sorts by score
/// descending, ties by initial rank.
pub fn pointwise_rerank<T, S>(
    query: &str,
    candidates: &[Candidate],
    scorer: &S,
    on_failure: ScoreFailure,
) -> Result<Reranked, RerankError>
where
    T: Float + Send,
    S: PointwiseScorer<T> + ?Sized,
{
    let scored: Vec<Result<(T, &Candidate), RerankError>> = candidates
        .par_iter()
        .map(|c| {
            let s = match scorer.score(query, c) {
                Ok(s) if s.is_finite() => Ok(s),
                Ok(_) => Err(JudgeError::Other("non-finite score".into())),
                Err(e) => Err(e),
            };
            match (s, on_failure) {
                (Ok(s), _) => Ok((s, c)),
                (Err(_), ScoreFailure::SkipAsMinusInfinity) => Ok((T::neg_infinity(), c)),
                (Err(source), ScoreFailure::Abort) => Err(RerankError::Scorer {
                    doc_id: c.doc_id.clone(),
                    source,
                }),
            }
        })
        .collect();
    let mut scored = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|(sa, a), (sb, b)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(a.initial_rank.cmp(&b.initial_rank))
    });
    let cost = CostLedger::merge_all(
        candidates.iter().map(|_| CostLedger::call(1)),
        Merge::Parallel,
    );
    Ok(Reranked {
        ranking: scored.into_iter().map(|(_, c)| c.doc_id.clone()).collect(),
        cost,
    })
}

/// Output order of every iteration plus the summed cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerialTrajectory {
    pub iterations: Vec<Vec<String>>,
    pub cost: CostLedger,
}

impl SerialTrajectory {
    pub fn last(&self) -> &[String] {
        self.iterations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Applies `method` `iterations` times, feeding each output order back in
/// as the next initial order.
pub fn serial_rerank<R: Reranker + ?Sized>(
    query: &str,
    candidates: &[Candidate],
    method: &R,
    iterations: usize,
) -> Result<SerialTrajectory, RerankError> {
    if iterations == 0 {
        return Err(RerankError::InvalidArgument(
            "iterations must be >= 1".into(),
        ));
    }
    let mut current = candidates.to_vec();
    let mut trajectory = Vec::with_capacity(iterations);
    let mut cost = CostLedger::default();
    for _ in 0..iterations {
        let out = method.rerank(query, &current)?;
        current = reorder_candidates(&current, &out.ranking);
        cost = cost.merge(out.cost, Merge::Sequential);
        trajectory.push(out.ranking);
    }
    Ok(SerialTrajectory {
        iterations: trajectory,
        cost,
    })
}

/// Sliding window as a [`Reranker`].
pub struct SlidingWindow<J> {
    pub spec: WindowSpec,
    pub judge: J,
}

impl<J: OrderingJudge> Reranker for SlidingWindow<J> {
    fn name(&self) -> String {
        format!(
            "sliding-window(w={},s={})",
            self.spec.window, self.spec.step
        )
    }

    fn rerank(&self, query: &str, candidates: &[Candidate]) -> Result<Reranked, RerankError> {
        sliding_window_rerank(query, candidates, self.spec, &self.judge)
    }
}

/// Pointwise scoring as a [`Reranker`].
pub struct Pointwise<S, T> {
    pub scorer: S,
    pub on_failure: ScoreFailure,
    _score: std::marker::PhantomData<fn() -> T>,
}

impl<S, T> Pointwise<S, T> {
    pub fn new(scorer: S, on_failure: ScoreFailure) -> Self {
        Self {
            scorer,
            on_failure,
            _score: std::marker::PhantomData,
        }
    }
}

impl<S: PointwiseScorer<T>, T: Float + Send> Reranker for Pointwise<S, T> {
    fn name(&self) -> String {
        "pointwise".into()
    }

    fn rerank(&self, query: &str, candidates: &[Candidate]) -> Result<Reranked, RerankError> {
        pointwise_rerank(query, candidates, &self.scorer, self.on_failure)
    }
}

/// The tournament ranker with a fixed judge and seed, as a [`Reranker`].
pub struct TourRankMethod<J> {
    pub engine: TourRank,
    pub judge: J,
    pub run_seed: u64,
}

impl<J: Judge> Reranker for TourRankMethod<J> {
    fn name(&self) -> String {
        format!("tourrank-{}", self.engine.schedule().rounds)
    }

    fn rerank(&self, query: &str, candidates: &[Candidate]) -> Result<Reranked, RerankError> {
        let res = self
            .engine
            .run(query, candidates, &self.judge, self.run_seed)?;
        Ok(Reranked {
            ranking: res.ranking,
            cost: res.cost,
        })
    }
}
