//! Domain types shared by every stage of the pipeline: candidates, the
//! stage ladder of a tournament, and the points bookkeeping.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Integer tier points. A document earns one point per stage it survives.
pub type Points = u32;

/// A document paired with the rank the first-stage retriever gave it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub text: String,
    /// 1 = best.
    pub initial_rank: u32,
}

impl Candidate {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, initial_rank: u32) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            initial_rank,
        }
    }
}

/// Checks that doc ids are unique and initial ranks are exactly `1..=N`.
pub fn check_candidates(candidates: &[Candidate]) -> Result<(), CandidateError> {
    let mut ids = HashSet::with_capacity(candidates.len());
    let mut seen = vec![false; candidates.len()];
    for c in candidates {
        if !ids.insert(c.doc_id.as_str()) {
            return Err(CandidateError::DuplicateId(c.doc_id.clone()));
        }
        let r = c.initial_rank as usize;
        if r == 0 || r > candidates.len() || seen[r - 1] {
            return Err(CandidateError::RankNotPermutation {
                doc_id: c.doc_id.clone(),
                rank: c.initial_rank,
            });
        }
        seen[r - 1] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CandidateError {
    #[error("duplicate doc_id `{0}` in candidate list")]
    DuplicateId(String),
    #[error("initial ranks must be a permutation of 1..=N (doc `{doc_id}` has rank {rank})")]
    RankNotPermutation { doc_id: String, rank: u32 },
}

/// One selection step `n_in -> n_out`, run as `groups` parallel judgments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub groups: usize,
    /// Nominal group size. With an uneven split this is the larger size.
    pub group_size: usize,
    pub select_per_group: usize,
}

impl StageSpec {
    pub const fn new(
        n_in: usize,
        n_out: usize,
        groups: usize,
        group_size: usize,
        select_per_group: usize,
    ) -> Self {
        Self {
            n_in,
            n_out,
            groups,
            group_size,
            select_per_group,
        }
    }

    /// Size of the smallest group when `n_in` is dealt into `groups`.
    pub fn min_group_size(&self) -> usize {
        self.n_in.checked_div(self.groups).unwrap_or(0)
    }

    fn violation(&self) -> Option<StageViolationKind> {
        use StageViolationKind::*;
        if self.groups == 0 || self.groups > self.n_in {
            return Some(GroupCount);
        }
        if self.group_size != self.n_in.div_ceil(self.groups) {
            return Some(GroupSize);
        }
        if self.groups * self.select_per_group != self.n_out {
            return Some(SelectionTotal);
        }
        if self.select_per_group == 0 || self.select_per_group >= self.min_group_size() {
            return Some(SelectionRange);
        }
        if self.n_out >= self.n_in {
            return Some(NoElimination);
        }
        None
    }
}

/// The full ladder `N_1 -> ... -> N_K` plus the number of rounds `R`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TournamentSchedule {
    pub stages: Vec<StageSpec>,
    pub rounds: usize,
}

/// Rounds used when nothing else is configured.
pub const DEFAULT_ROUNDS: usize = 10;

/// The 100-document ladder `100 -> 50 -> 20 -> 10 -> 5 -> 2`.
pub fn default_schedule() -> TournamentSchedule {
    TournamentSchedule {
        stages: vec![
            StageSpec::new(100, 50, 5, 20, 10),
            StageSpec::new(50, 20, 5, 10, 4),
            StageSpec::new(20, 10, 1, 20, 10),
            StageSpec::new(10, 5, 1, 10, 5),
            StageSpec::new(5, 2, 1, 5, 2),
        ],
        rounds: DEFAULT_ROUNDS,
    }
}

impl TournamentSchedule {
    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    /// Number of selection stages, `K - 1`.
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Highest per-round points a document can earn.
    pub fn max_round_points(&self) -> Points {
        self.stages.len() as Points
    }

    pub fn head_size(&self) -> Option<usize> {
        self.stages.first().map(|s| s.n_in)
    }

    /// Documents placed in prompts by one tournament.
    pub fn docs_per_round(&self) -> usize {
        self.stages.iter().map(|s| s.n_in).sum()
    }

    /// How many documents end a single tournament with each point value,
    /// indexed by points.
    pub fn tier_sizes(&self) -> Vec<usize> {
        let mut tiers = Vec::with_capacity(self.stages.len() + 1);
        for s in &self.stages {
            tiers.push(s.n_in - s.n_out);
        }
        if let Some(last) = self.stages.last() {
            tiers.push(last.n_out);
        }
        tiers
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageViolationKind {
    GroupCount,
    GroupSize,
    SelectionTotal,
    SelectionRange,
    NoElimination,
}

impl fmt::Display for StageViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::GroupCount => "group count must be in 1..=n_in",
            Self::GroupSize => "group_size must equal ceil(n_in / groups)",
            Self::SelectionTotal => "groups x select_per_group must equal n_out",
            Self::SelectionRange => "select_per_group must be in 1..smallest group size",
            Self::NoElimination => "n_out must be smaller than n_in",
        };
        f.write_str(s)
    }
}

/// The first invariant a schedule breaks.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleViolation {
    #[error("schedule has no stages")]
    Empty,
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("stage 0 expects {expected} inputs, got {actual} candidates")]
    HeadMismatch { expected: usize, actual: usize },
    #[error("stage {stage}: {kind}")]
    Stage {
        stage: usize,
        kind: StageViolationKind,
    },
    #[error("stage {stage} outputs {n_out} but stage {} expects {next_in}", stage + 1)]
    Chain {
        stage: usize,
        n_out: usize,
        next_in: usize,
    },
}

pub fn validate_schedule(
    schedule: &TournamentSchedule,
    candidate_count: usize,
) -> Result<(), ScheduleViolation> {
    let head = schedule.stages.first().ok_or(ScheduleViolation::Empty)?;
    if schedule.rounds == 0 {
        return Err(ScheduleViolation::NoRounds);
    }
    if head.n_in != candidate_count {
        return Err(ScheduleViolation::HeadMismatch {
            expected: head.n_in,
            actual: candidate_count,
        });
    }
    for (i, stage) in schedule.stages.iter().enumerate() {
        if let Some(kind) = stage.violation() {
            return Err(ScheduleViolation::Stage { stage: i, kind });
        }
        if let Some(next) = schedule.stages.get(i + 1) {
            if stage.n_out != next.n_in {
                return Err(ScheduleViolation::Chain {
                    stage: i,
                    n_out: stage.n_out,
                    next_in: next.n_in,
                });
            }
        }
    }
    Ok(())
}

/// Per-round and accumulated points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointsTable {
    pub per_round: BTreeMap<usize, BTreeMap<String, Points>>,
    pub accumulated: BTreeMap<String, Points>,
}

impl PointsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one round's points. The accumulated total is a plain sum, so the
    /// order rounds are added in does not matter.
    pub fn add_round(&mut self, round: usize, points: BTreeMap<String, Points>) {
        for (doc, p) in &points {
            *self.accumulated.entry(doc.clone()).or_insert(0) += p;
        }
        self.per_round.insert(round, points);
    }

    pub fn rounds(&self) -> usize {
        self.per_round.len()
    }

    /// Number of distinct accumulated point values.
    pub fn distinct_values(&self) -> usize {
        self.accumulated
            .values()
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }

    /// Count of documents per accumulated point value.
    pub fn histogram(&self) -> BTreeMap<Points, usize> {
        let mut h = BTreeMap::new();
        for p in self.accumulated.values() {
            *h.entry(*p).or_insert(0) += 1;
        }
        h
    }
}
