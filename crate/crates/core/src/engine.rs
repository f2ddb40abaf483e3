//! Tournament orchestration.
//!
//! A tournament runs the schedule's stages in sequence. Each stage deals its
//! survivors into groups, shuffles each group's presentation, asks the judge
//! for the best `m` of every group, and awards one point to each advancing
//! document. `R` independent tournaments are summed, and the final order sorts
//! by accumulated points with ties going to the better initial rank.
//!
//! Rounds are independent and so are the groups of a stage; both fan out on
//! a rayon pool. When a parallelism width `w` is set, rounds are launched in
//! waves of `w` and no more than `w` judge calls run at once. Every random
//! draw is keyed by `(run_seed, round, stage, group)`, so results do not
//! depend on the width or on completion order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{CostLedger, Merge};
use crate::domain::{
    check_candidates, validate_schedule, Candidate, CandidateError, Points, PointsTable,
    ScheduleViolation, StageSpec, TournamentSchedule,
};
use crate::grouping::{deal_in_order, shuffle_presentation, GroupingError};
use crate::judge::{Judge, JudgeError, JudgeRequest, JudgeSelection};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Schedule(#[from] ScheduleViolation),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error("round {round}, stage {stage}, group {group}: {source}")]
    Judge {
        round: usize,
        stage: usize,
        group: usize,
        #[source]
        source: JudgeError,
    },
    #[error("round {round}, stage {stage}, group {group}: judge returned an invalid selection {labels:?}")]
    BadSelection {
        round: usize,
        stage: usize,
        group: usize,
        labels: Vec<usize>,
    },
    #[error("stage expects {expected} survivors, got {actual}")]
    SurvivorCount { expected: usize, actual: usize },
    #[error("no points recorded for doc `{0}`")]
    MissingPoints(String),
    #[error("every round failed; first failure: {0}")]
    AllRoundsFailed(Box<EngineError>),
    #[error("could not build thread pool: {0}")]
    Pool(String),
}

impl EngineError {
    /// The judge failure behind this error, if any.
    pub fn judge_error(&self) -> Option<&JudgeError> {
        match self {
            Self::Judge { source, .. } => Some(source),
            Self::AllRoundsFailed(inner) => inner.judge_error(),
            _ => None,
        }
    }
}

/// What to do when a round's judge call fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundFailurePolicy {
    /// Abort the run on the first failed round.
    #[default]
    Strict,
    /// Drop failed rounds and sum the rest.
    Lenient,
}

/// How group membership is formed at each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingPolicy {
    /// Deal by initial rank every round; only presentation is reshuffled.
    #[default]
    FixedMembership,
    /// Deal from a per-round random order of survivors.
    RedealPerRound,
}

/// Position of a stage inside a run, for seeding and error annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageContext {
    pub round: usize,
    pub stage: usize,
    pub seed: u64,
    pub grouping: GroupingPolicy,
}

/// Advancing documents of one stage plus what it cost.
#[derive(Clone, Debug)]
pub struct StageOutcome<'a> {
    /// Union of group winners, in group index order.
    pub advancing: Vec<&'a Candidate>,
    pub ledger: CostLedger,
}

fn check_selection(sel: &JudgeSelection, n: usize, m: usize) -> bool {
    if sel.chosen_labels.len() != m {
        return false;
    }
    let mut seen = vec![false; n + 1];
    sel.chosen_labels.iter().all(|&l| {
        let ok = (1..=n).contains(&l) && !seen[l];
        if ok {
            seen[l] = true;
        }
        ok
    })
}

/// Runs one selection stage. Groups are judged concurrently on the
/// current rayon pool.
pub fn run_stage<'a, J: Judge + ?Sized>(
    query: &str,
    stage: &StageSpec,
    survivors: &[&'a Candidate],
    judge: &J,
    ctx: StageContext,
) -> Result<StageOutcome<'a>, EngineError> {
    if survivors.len() != stage.n_in {
        return Err(EngineError::SurvivorCount {
            expected: stage.n_in,
            actual: survivors.len(),
        });
    }
    let mut ordered: Vec<&'a Candidate> = survivors.to_vec();
    ordered.sort_by_key(|c| c.initial_rank);
    if ctx.grouping == GroupingPolicy::RedealPerRound {
        ordered.shuffle(&mut seed::rng(seed::mix(ctx.seed, &[u64::MAX])));
    }
    let assignment = shuffle_presentation(deal_in_order(&ordered, stage.groups)?, ctx.seed);

    let m = stage.select_per_group;
    let judged: Vec<Result<(Vec<&'a Candidate>, CostLedger), EngineError>> = assignment
        .presentation
        .par_iter()
        .enumerate()
        .map(|(group, presented)| {
            let request = JudgeRequest::new(query, presented.clone(), m);
            let annotate = |source| EngineError::Judge {
                round: ctx.round,
                stage: ctx.stage,
                group,
                source,
            };
            let sel = judge.select(&request).map_err(annotate)?;
            if !check_selection(&sel, presented.len(), m) {
                return Err(EngineError::BadSelection {
                    round: ctx.round,
                    stage: ctx.stage,
                    group,
                    labels: sel.chosen_labels,
                });
            }
            let mut ledger = CostLedger::call(presented.len());
            ledger.retries = sel.retries as u64;
            ledger.repairs = u64::from(sel.repair_applied);
            let winners = sel
                .chosen_labels
                .iter()
                .map(|&l| presented[l - 1])
                .collect();
            Ok((winners, ledger))
        })
        .collect();

    let mut advancing = Vec::with_capacity(stage.n_out);
    let mut ledger = CostLedger::default();
    for r in judged {
        let (winners, l) = r?;
        advancing.extend(winners);
        ledger = ledger.merge(l, Merge::Parallel);
    }
    Ok(StageOutcome { advancing, ledger })
}

/// Points and audit trail of one tournament.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundResult {
    pub round: usize,
    pub points: BTreeMap<String, Points>,
    /// Advancing doc ids after each stage, sorted.
    pub stage_survivors: Vec<Vec<String>>,
    pub ledger: CostLedger,
}

/// One full tournament. Does not validate the schedule; see [`TourRank`].
pub fn run_tournament<J: Judge + ?Sized>(
    query: &str,
    candidates: &[Candidate],
    schedule: &TournamentSchedule,
    judge: &J,
    round: usize,
    round_seed: u64,
    grouping: GroupingPolicy,
) -> Result<RoundResult, EngineError> {
    let mut points: BTreeMap<String, Points> =
        candidates.iter().map(|c| (c.doc_id.clone(), 0)).collect();
    let mut survivors: Vec<&Candidate> = candidates.iter().collect();
    let mut trail = Vec::with_capacity(schedule.stages.len());
    let mut ledger = CostLedger::default();

    for (k, stage) in schedule.stages.iter().enumerate() {
        let ctx = StageContext {
            round,
            stage: k,
            seed: seed::stage_seed(round_seed, k),
            grouping,
        };
        let out = run_stage(query, stage, &survivors, judge, ctx)?;
        let mut ids: Vec<String> = Vec::with_capacity(out.advancing.len());
        for c in &out.advancing {
            *points
                .get_mut(&c.doc_id)
                .expect("survivor came from candidates") += 1;
            ids.push(c.doc_id.clone());
        }
        ids.sort();
        trail.push(ids);
        ledger = ledger.merge(out.ledger, Merge::Sequential);
        survivors = out.advancing;
    }
    Ok(RoundResult {
        round,
        points,
        stage_survivors: trail,
        ledger,
    })
}

/// Orders candidates by accumulated points (desc), then initial rank (asc).
pub fn rank_by_points(
    points: &PointsTable,
    candidates: &[Candidate],
) -> Result<Vec<String>, EngineError> {
    let mut keyed = Vec::with_capacity(candidates.len());
    for c in candidates {
        let p = *points
            .accumulated
            .get(&c.doc_id)
            .ok_or_else(|| EngineError::MissingPoints(c.doc_id.clone()))?;
        keyed.push((Reverse(p), c.initial_rank, c.doc_id.as_str()));
    }
    keyed.sort();
    Ok(keyed.into_iter().map(|(_, _, id)| id.to_string()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct RankingResult {
    /// Doc ids, best first.
    pub ranking: Vec<String>,
    pub points_table: PointsTable,
    pub cost: CostLedger,
    pub run_seed: u64,
    /// Rounds that completed and were summed.
    pub rounds_effective: usize,
    pub rounds: Vec<RoundResult>,
    /// `(round, error)` for rounds dropped under the lenient policy.
    #[serde(skip)]
    pub failed_rounds: Vec<(usize, EngineError)>,
}

impl RankingResult {
    pub fn points_of(&self, doc_id: &str) -> Option<Points> {
        self.points_table.accumulated.get(doc_id).copied()
    }

    /// `(doc_id, score)` in ranking order, for a run file. The score is the
    /// accumulated points plus `(N - initial_rank) / N * 1e-3`, so it is
    /// strictly decreasing and agrees with the tie-break.
    pub fn scored(&self, candidates: &[Candidate]) -> Vec<(String, f64)> {
        let idx = index_by_id(candidates);
        let n = candidates.len() as f64;
        self.ranking
            .iter()
            .map(|id| {
                let points = f64::from(self.points_of(id).unwrap_or(0));
                let rank = f64::from(idx[id.as_str()].initial_rank);
                (id.clone(), points + (n - rank) / n * 1e-3)
            })
            .collect()
    }
}

/// Bound on concurrent judge calls. `None` leaves it to rayon's global pool
/// and runs every round at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Parallelism {
    pub width: Option<usize>,
}

impl Parallelism {
    pub const UNBOUNDED: Self = Self { width: None };

    pub fn width(width: usize) -> Self {
        Self {
            width: Some(width.max(1)),
        }
    }
}

/// Configured ranker: a schedule plus execution policy.
#[derive(Clone)]
pub struct TourRank {
    schedule: TournamentSchedule,
    parallelism: Parallelism,
    failure_policy: RoundFailurePolicy,
    grouping: GroupingPolicy,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for TourRank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TourRank")
            .field("schedule", &self.schedule)
            .field("parallelism", &self.parallelism)
            .field("failure_policy", &self.failure_policy)
            .field("grouping", &self.grouping)
            .finish()
    }
}

impl TourRank {
    pub fn new(schedule: TournamentSchedule) -> Self {
        Self {
            schedule,
            parallelism: Parallelism::UNBOUNDED,
            failure_policy: RoundFailurePolicy::Strict,
            grouping: GroupingPolicy::FixedMembership,
            pool: None,
        }
    }

    /// Bounds concurrency to `parallelism.width` threads, building a
    /// dedicated pool.
    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Result<Self, EngineError> {
        self.pool = match parallelism.width {
            None => None,
            Some(w) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| EngineError::Pool(e.to_string()))?,
            )),
        };
        self.parallelism = parallelism;
        Ok(self)
    }

    /// Uses an existing pool whose thread count is `width`.
    pub fn with_shared_pool(mut self, pool: Arc<rayon::ThreadPool>, width: usize) -> Self {
        self.parallelism = Parallelism::width(width);
        self.pool = Some(pool);
        self
    }

    pub fn failure_policy(mut self, policy: RoundFailurePolicy) -> Self {
        self.failure_policy = policy;
        self
    }

    pub fn grouping(mut self, policy: GroupingPolicy) -> Self {
        self.grouping = policy;
        self
    }

    pub fn schedule(&self) -> &TournamentSchedule {
        &self.schedule
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    /// Runs `f` on this ranker's pool, if it has one.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// A single tournament with round index 0, for inspection.
    pub fn run_tournament<J: Judge + ?Sized>(
        &self,
        query: &str,
        candidates: &[Candidate],
        judge: &J,
        round_seed: u64,
    ) -> Result<RoundResult, EngineError> {
        validate_schedule(&self.schedule, candidates.len())?;
        check_candidates(candidates)?;
        self.install(|| {
            run_tournament(
                query,
                candidates,
                &self.schedule,
                judge,
                0,
                round_seed,
                self.grouping,
            )
        })
    }

    /// Runs `schedule.rounds` tournaments and ranks by accumulated points.
    pub fn run<J: Judge + ?Sized>(
        &self,
        query: &str,
        candidates: &[Candidate],
        judge: &J,
        run_seed: u64,
    ) -> Result<RankingResult, EngineError> {
        validate_schedule(&self.schedule, candidates.len())?;
        check_candidates(candidates)?;
        let rounds = self.schedule.rounds;
        let wave = self.parallelism.width.unwrap_or(rounds).max(1);

        let (results, cost) = self.install(|| {
            let mut results: Vec<(usize, Result<RoundResult, EngineError>)> =
                Vec::with_capacity(rounds);
            let mut cost = CostLedger::default();
            let indices: Vec<usize> = (0..rounds).collect();
            for chunk in indices.chunks(wave) {
                let done: Vec<(usize, Result<RoundResult, EngineError>)> = chunk
                    .par_iter()
                    .map(|&r| {
                        let out = run_tournament(
                            query,
                            candidates,
                            &self.schedule,
                            judge,
                            r,
                            seed::round_seed(run_seed, r),
                            self.grouping,
                        );
                        (r, out)
                    })
                    .collect();
                let wave_cost = CostLedger::merge_all(
                    done.iter()
                        .filter_map(|(_, r)| r.as_ref().ok().map(|rr| rr.ledger)),
                    Merge::Parallel,
                );
                cost = cost.merge(wave_cost, Merge::Sequential);
                results.extend(done);
            }
            (results, cost)
        });

        let mut table = PointsTable::new();
        let mut kept = Vec::with_capacity(rounds);
        let mut failed = Vec::new();
        for (r, res) in results {
            match res {
                Ok(rr) => {
                    table.add_round(r, rr.points.clone());
                    kept.push(rr);
                }
                Err(e) => {
                    if self.failure_policy == RoundFailurePolicy::Strict {
                        return Err(e);
                    }
                    log::warn!("dropping round {r}: {e}");
                    failed.push((r, e));
                }
            }
        }
        if kept.is_empty() {
            let first = failed
                .into_iter()
                .next()
                .map(|(_, e)| e)
                .expect("rounds >= 1 so something ran");
            return Err(EngineError::AllRoundsFailed(Box::new(first)));
        }
        let ranking = rank_by_points(&table, candidates)?;
        Ok(RankingResult {
            ranking,
            points_table: table,
            cost,
            run_seed,
            rounds_effective: kept.len(),
            rounds: kept,
            failed_rounds: failed,
        })
    }
}

/// Doc id → candidate lookup.
pub fn index_by_id(candidates: &[Candidate]) -> HashMap<&str, &Candidate> {
    candidates.iter().map(|c| (c.doc_id.as_str(), c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::default_schedule;
    use crate::judge::{Grades, NoiseSpec, NoisyJudge, OracleJudge};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn pool(n: u32) -> Vec<Candidate> {
        (1..=n)
            .map(|r| Candidate::new(format!("d{r}"), format!("text {r}"), r))
            .collect()
    }

    /// Grade = N - rank: initial order is the true order, all grades distinct.
    fn true_order_grades(n: u32) -> Grades {
        (1..=n).map(|r| (format!("d{r}"), n - r)).collect()
    }

    fn toy() -> TournamentSchedule {
        TournamentSchedule {
            stages: vec![StageSpec::new(4, 2, 1, 4, 2), StageSpec::new(2, 1, 1, 2, 1)],
            rounds: 1,
        }
    }

    fn histogram(points: &BTreeMap<String, Points>) -> BTreeMap<Points, usize> {
        let mut h = BTreeMap::new();
        for p in points.values() {
            *h.entry(*p).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn scores_strictly_decrease_along_ranking() {
        let cands = pool(100);
        let judge = NoisyJudge::new(true_order_grades(100), NoiseSpec::new(0.3, 1).unwrap());
        let res = TourRank::new(default_schedule().with_rounds(3))
            .run("q", &cands, &judge, 5)
            .unwrap();
        let scored = res.scored(&cands);
        assert!(scored.windows(2).all(|w| w[0].1 > w[1].1));
        let top = &scored[0];
        let p = f64::from(res.points_of(&top.0).unwrap());
        assert!(top.1 > p && top.1 < p + 1e-3);
    }

    #[test]
    fn rank_by_points_rule() {
        let c = vec![
            Candidate::new("a", "", 2),
            Candidate::new("b", "", 9),
            Candidate::new("c", "", 1),
        ];
        let mut t = PointsTable::new();
        t.add_round(
            0,
            [("a".into(), 3), ("b".into(), 5), ("c".into(), 3)].into(),
        );
        assert_eq!(rank_by_points(&t, &c).unwrap(), vec!["b", "c", "a"]);
    }

    #[test]
    fn rank_by_points_ties_keep_initial_order() {
        let c = pool(6);
        let mut t = PointsTable::new();
        t.add_round(0, c.iter().map(|d| (d.doc_id.clone(), 1)).collect());
        let expect: Vec<String> = c.iter().map(|d| d.doc_id.clone()).collect();
        assert_eq!(rank_by_points(&t, &c).unwrap(), expect);
    }

    #[test]
    fn rank_by_points_missing_entry() {
        let c = pool(2);
        let mut t = PointsTable::new();
        t.add_round(0, [("d1".into(), 1)].into());
        assert_eq!(
            rank_by_points(&t, &c),
            Err(EngineError::MissingPoints("d2".into()))
        );
    }

    #[test]
    fn final_stage_picks_top_two() {
        let c = pool(5);
        let refs: Vec<&Candidate> = c.iter().collect();
        let judge = OracleJudge::new([("d4".into(), 3), ("d2".into(), 2), ("d1".into(), 1)].into());
        let ctx = StageContext {
            round: 0,
            stage: 4,
            seed: 1,
            grouping: GroupingPolicy::FixedMembership,
        };
        let out = run_stage("q", &StageSpec::new(5, 2, 1, 5, 2), &refs, &judge, ctx).unwrap();
        let mut ids: Vec<_> = out.advancing.iter().map(|c| c.doc_id.as_str()).collect();
        ids.sort();
        assert_eq!(ids, vec!["d2", "d4"]);
        assert_eq!(out.ledger, CostLedger::call(5));
    }

    #[test]
    fn first_stage_keeps_true_top_fifty() {
        let c = pool(100);
        let refs: Vec<&Candidate> = c.iter().collect();
        let judge = OracleJudge::new(true_order_grades(100));
        let ctx = StageContext {
            round: 0,
            stage: 0,
            seed: 9,
            grouping: GroupingPolicy::FixedMembership,
        };
        let out = run_stage("q", &default_schedule().stages[0], &refs, &judge, ctx).unwrap();
        let mut ranks: Vec<u32> = out.advancing.iter().map(|c| c.initial_rank).collect();
        ranks.sort();
        assert_eq!(ranks, (1..=50).collect::<Vec<_>>());
        assert_eq!(out.ledger.depth, 1);
        assert_eq!(out.ledger.invocations, 5);
        assert_eq!(out.ledger.docs_sent, 100);
    }

    #[test]
    fn stage_rejects_wrong_survivor_count() {
        let c = pool(4);
        let refs: Vec<&Candidate> = c.iter().collect();
        let ctx = StageContext {
            round: 0,
            stage: 0,
            seed: 0,
            grouping: GroupingPolicy::FixedMembership,
        };
        let err = run_stage(
            "q",
            &StageSpec::new(5, 2, 1, 5, 2),
            &refs,
            &OracleJudge::default(),
            ctx,
        )
        .unwrap_err();
        assert_eq!(
            err,
            EngineError::SurvivorCount {
                expected: 5,
                actual: 4
            }
        );
    }

    #[test]
    fn toy_histogram() {
        let c = pool(4);
        let judge = NoisyJudge::new(true_order_grades(4), NoiseSpec::new(0.5, 3).unwrap());
        let r = TourRank::new(toy())
            .run_tournament("q", &c, &judge, 5)
            .unwrap();
        assert_eq!(histogram(&r.points), [(2, 1), (1, 1), (0, 2)].into());
    }

    #[test]
    fn default_histogram_any_judge() {
        let c = pool(100);
        let engine = TourRank::new(default_schedule());
        for s in 0..5 {
            let judge = NoisyJudge::new(true_order_grades(100), NoiseSpec::new(0.4, s).unwrap());
            let r = engine.run_tournament("q", &c, &judge, s).unwrap();
            assert_eq!(
                histogram(&r.points),
                [(5, 2), (4, 3), (3, 5), (2, 10), (1, 30), (0, 50)].into()
            );
            assert_eq!(r.points.values().sum::<u32>(), 87);
            // tier law from the audit trail
            for (doc, p) in &r.points {
                let survived = r
                    .stage_survivors
                    .iter()
                    .filter(|ids| ids.binary_search(doc).is_ok())
                    .count();
                assert_eq!(*p as usize, survived);
            }
        }
    }

    #[test]
    fn oracle_true_order_tiers() {
        let c = pool(100);
        let judge = OracleJudge::new(true_order_grades(100));
        let r = TourRank::new(default_schedule())
            .run_tournament("q", &c, &judge, 77)
            .unwrap();
        for cand in &c {
            let expect = match cand.initial_rank {
                1..=2 => 5,
                3..=5 => 4,
                6..=10 => 3,
                11..=20 => 2,
                21..=50 => 1,
                _ => 0,
            };
            assert_eq!(r.points[&cand.doc_id], expect, "{}", cand.doc_id);
        }
    }

    #[test]
    fn repeated_oracle_rounds_scale() {
        let c = pool(100);
        let judge = OracleJudge::new(true_order_grades(100));
        let one = TourRank::new(default_schedule().with_rounds(1))
            .run("q", &c, &judge, 4)
            .unwrap();
        let three = TourRank::new(default_schedule().with_rounds(3))
            .run("q", &c, &judge, 4)
            .unwrap();
        for cand in &c {
            assert_eq!(
                three.points_of(&cand.doc_id).unwrap(),
                3 * one.points_of(&cand.doc_id).unwrap()
            );
        }
        let expected: Vec<String> = c.iter().map(|d| d.doc_id.clone()).collect();
        // R=1 ranking = tournament + rank_by_points
        let t = TourRank::new(default_schedule().with_rounds(1))
            .run_tournament("q", &c, &judge, seed::round_seed(4, 0))
            .unwrap();
        let mut table = PointsTable::new();
        table.add_round(0, t.points);
        assert_eq!(rank_by_points(&table, &c).unwrap(), one.ranking);
        assert_eq!(&one.ranking[..2], &expected[..2]);
    }

    #[test]
    fn ledger_parallel_rounds() {
        let c = pool(100);
        let judge = NoisyJudge::new(true_order_grades(100), NoiseSpec::new(0.2, 1).unwrap());
        for r in [1usize, 3, 10] {
            let res = TourRank::new(default_schedule().with_rounds(r))
                .run("q", &c, &judge, 8)
                .unwrap();
            assert_eq!(res.cost.docs_sent, 185 * r as u64);
            assert_eq!(res.cost.depth, 5);
            assert_eq!(res.cost.invocations, 13 * r as u64);
        }
        let serial = TourRank::new(default_schedule().with_rounds(4))
            .with_parallelism(Parallelism::width(1))
            .unwrap()
            .run("q", &c, &judge, 8)
            .unwrap();
        assert_eq!(serial.cost.depth, 20);
    }

    #[test]
    fn width_does_not_change_results() {
        let c = pool(100);
        let judge = NoisyJudge::new(true_order_grades(100), NoiseSpec::new(0.3, 2).unwrap());
        let base = TourRank::new(default_schedule().with_rounds(6));
        let a = base.clone().run("q", &c, &judge, 99).unwrap();
        let b = base
            .clone()
            .with_parallelism(Parallelism::width(1))
            .unwrap()
            .run("q", &c, &judge, 99)
            .unwrap();
        let d = base
            .with_parallelism(Parallelism::width(8))
            .unwrap()
            .run("q", &c, &judge, 99)
            .unwrap();
        assert_eq!(a.ranking, b.ranking);
        assert_eq!(a.points_table, b.points_table);
        assert_eq!(a.points_table, d.points_table);
    }

    #[test]
    fn round_order_does_not_matter() {
        let c = pool(100);
        let judge = NoisyJudge::new(true_order_grades(100), NoiseSpec::new(0.3, 2).unwrap());
        let res = TourRank::new(default_schedule().with_rounds(5))
            .run("q", &c, &judge, 3)
            .unwrap();
        let mut reversed = PointsTable::new();
        for rr in res.rounds.iter().rev() {
            reversed.add_round(4 - rr.round, rr.points.clone());
        }
        assert_eq!(reversed.accumulated, res.points_table.accumulated);
        assert_eq!(rank_by_points(&reversed, &c).unwrap(), res.ranking);
    }

    #[test]
    fn redeal_changes_membership_only_when_asked() {
        let c = pool(100);
        let judge = OracleJudge::new(true_order_grades(100));
        let fixed = TourRank::new(default_schedule())
            .run_tournament("q", &c, &judge, 1)
            .unwrap();
        let redeal = TourRank::new(default_schedule())
            .grouping(GroupingPolicy::RedealPerRound)
            .run_tournament("q", &c, &judge, 1)
            .unwrap();
        assert_eq!(histogram(&redeal.points), histogram(&fixed.points));
        assert_ne!(redeal.points, fixed.points);
    }

    /// Fails every `fail_every`-th call.
    struct Flaky {
        calls: AtomicUsize,
        fail_every: usize,
    }

    impl Judge for Flaky {
        fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n % self.fail_every == self.fail_every - 1 {
                return Err(JudgeError::Unavailable {
                    attempts: 1,
                    reason: "scripted".into(),
                });
            }
            Ok(JudgeSelection::exact((1..=request.select).collect()))
        }
    }

    #[test]
    fn strict_aborts_lenient_drops() {
        let c = pool(100);
        let flaky = Flaky {
            calls: AtomicUsize::new(0),
            fail_every: 20,
        };
        let engine = TourRank::new(default_schedule().with_rounds(4))
            .with_parallelism(Parallelism::width(1))
            .unwrap();
        let err = engine.run("q", &c, &flaky, 1).unwrap_err();
        assert!(matches!(err, EngineError::Judge { round: 1, .. }), "{err}");

        flaky.calls.store(0, Ordering::SeqCst);
        let lenient = engine.failure_policy(RoundFailurePolicy::Lenient);
        let res = lenient.run("q", &c, &flaky, 1).unwrap();
        assert!(res.rounds_effective < 4);
        assert_eq!(res.rounds_effective + res.failed_rounds.len(), 4);
        let max = res.rounds_effective as u32 * 5;
        assert!(res.points_table.accumulated.values().all(|&p| p <= max));
    }

    #[test]
    fn invalid_selection_is_rejected() {
        struct Liar;
        impl Judge for Liar {
            fn select(&self, _: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
                Ok(JudgeSelection::exact(vec![1, 1]))
            }
        }
        let err = TourRank::new(toy())
            .run("q", &pool(4), &Liar, 0)
            .unwrap_err();
        assert!(matches!(err, EngineError::BadSelection { .. }));
    }

    #[test]
    fn schedule_mismatch_is_reported() {
        let err = TourRank::new(default_schedule())
            .run("q", &pool(80), &OracleJudge::default(), 0)
            .unwrap_err();
        assert!(matches!(
            err,
            EngineError::Schedule(ScheduleViolation::HeadMismatch { .. })
        ));
    }
}
