//! Cost ledger collected during runs, and closed-form cost models for the
//! five method families.
//!
//! `depth` is the length of the longest chain of judge calls that must run
//! one after another. It is an integer proxy for latency under unlimited
//! parallelism, not a wall-clock measurement.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::TournamentSchedule;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostLedger {
    pub invocations: u64,
    pub docs_sent: u64,
    pub depth: u64,
    pub retries: u64,
    /// Judge replies that needed parser repair.
    pub repairs: u64,
}

/// How two ledgers compose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Merge {
    /// Independent work; critical path is the longer of the two.
    Parallel,
    /// `b` starts after `a` finishes; critical paths add.
    Sequential,
}

impl CostLedger {
    /// Ledger for a single judge call over `docs` documents.
    pub fn call(docs: usize) -> Self {
        Self {
            invocations: 1,
            docs_sent: docs as u64,
            depth: 1,
            retries: 0,
            repairs: 0,
        }
    }

    pub fn merge(self, other: Self, mode: Merge) -> Self {
        Self {
            invocations: self.invocations + other.invocations,
            docs_sent: self.docs_sent + other.docs_sent,
            retries: self.retries + other.retries,
            repairs: self.repairs + other.repairs,
            depth: match mode {
                Merge::Parallel => self.depth.max(other.depth),
                Merge::Sequential => self.depth + other.depth,
            },
        }
    }

    pub fn merge_all<I: IntoIterator<Item = Self>>(items: I, mode: Merge) -> Self {
        items
            .into_iter()
            .fold(Self::default(), |acc, l| acc.merge(l, mode))
    }

    /// Flat `key value` table.
    pub fn to_table(&self) -> String {
        format!(
            "invocations {}\ndocs_sent {}\ndepth {}\nretries {}\nrepairs {}\n",
            self.invocations, self.docs_sent, self.depth, self.retries, self.repairs
        )
    }
}

impl fmt::Display for CostLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invocations={} docs_sent={} depth={} retries={} repairs={}",
            self.invocations, self.docs_sent, self.depth, self.retries, self.repairs
        )
    }
}

/// Method families with a cost model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CostMethod {
    Pointwise,
    PrpAllpair,
    /// Top-`k` bubblesort comparing `c` documents per prompt.
    SetwiseBubblesort {
        k: u64,
        c: u64,
    },
    SlidingWindow {
        window: u64,
        step: u64,
    },
    TourRank {
        schedule: TournamentSchedule,
        rounds: u64,
    },
}

impl CostMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pointwise => "pointwise",
            Self::PrpAllpair => "prp_allpair",
            Self::SetwiseBubblesort { .. } => "setwise_bubblesort",
            Self::SlidingWindow { .. } => "sliding_window",
            Self::TourRank { .. } => "tourrank",
        }
    }
}

/// Analytic prediction. `closed_form_*` carry the continuous approximations
/// where they differ from the exact count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticCost {
    pub method: String,
    pub n: u64,
    pub docs_sent: u64,
    pub depth: u64,
    pub closed_form_docs: Option<f64>,
    pub closed_form_depth: Option<f64>,
    /// The `~ c * N` style shorthand for documents sent.
    pub approx_docs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("invalid cost parameters: {0}")]
    InvalidArgument(String),
}

/// Number of sliding windows for a list of `n` documents.
pub fn window_count(n: u64, window: u64, step: u64) -> u64 {
    if n <= window {
        1
    } else {
        (n - window).div_ceil(step) + 1
    }
}

pub fn analytic_cost(method: &CostMethod, n: u64) -> Result<AnalyticCost, CostError> {
    let bad = |m: &str| Err(CostError::InvalidArgument(m.to_string()));
    if n == 0 {
        return bad("N must be positive");
    }
    let base = AnalyticCost {
        method: method.name().to_string(),
        n,
        docs_sent: 0,
        depth: 0,
        closed_form_docs: None,
        closed_form_depth: None,
        approx_docs: None,
    };
    let nf = n as f64;
    let out = match method {
        CostMethod::Pointwise => AnalyticCost {
            docs_sent: n,
            depth: 1,
            ..base
        },
        CostMethod::PrpAllpair => AnalyticCost {
            docs_sent: n * n - n,
            depth: 1,
            ..base
        },
        &CostMethod::SetwiseBubblesort { k, c } => {
            if c < 2 || k == 0 || k > n {
                return bad("setwise needs c >= 2 and 1 <= k <= N");
            }
            let steps = k * n.div_ceil(c - 1);
            AnalyticCost {
                docs_sent: steps * c,
                depth: steps,
                closed_form_docs: Some(k as f64 * nf / (c - 1) as f64 * c as f64),
                closed_form_depth: Some(k as f64 * nf / (c - 1) as f64),
                approx_docs: Some(1.5 * k as f64 * nf),
                ..base
            }
        }
        &CostMethod::SlidingWindow { window, step } => {
            if step == 0 || window == 0 || step > window || window > n {
                return bad("sliding window needs 1 <= step <= window <= N");
            }
            let w = window_count(n, window, step);
            let span = (n - window) as f64 / step as f64;
            AnalyticCost {
                docs_sent: window * w,
                depth: w,
                closed_form_docs: Some(window as f64 * span),
                closed_form_depth: Some(span),
                approx_docs: Some(2.0 * nf),
                ..base
            }
        }
        CostMethod::TourRank { schedule, rounds } => {
            if *rounds == 0 {
                return bad("rounds must be at least 1");
            }
            if schedule.head_size() != Some(n as usize) {
                return bad("schedule head must equal N");
            }
            let per_round = schedule.docs_per_round() as u64;
            let halving: f64 = (0..=schedule.stage_count())
                .map(|k| nf / 2f64.powi(k as i32))
                .sum();
            AnalyticCost {
                docs_sent: per_round * rounds,
                depth: schedule.stage_count() as u64,
                closed_form_docs: Some(halving * *rounds as f64),
                closed_form_depth: None,
                approx_docs: Some(2.0 * *rounds as f64 * nf),
                ..base
            }
        }
    };
    Ok(out)
}

/// Measured-vs-analytic comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub docs_measured: u64,
    pub docs_predicted: u64,
    pub depth_measured: u64,
    pub depth_predicted: u64,
}

impl AuditReport {
    pub fn matches(&self) -> bool {
        self.docs_measured == self.docs_predicted && self.depth_measured == self.depth_predicted
    }

    pub fn docs_delta(&self) -> i64 {
        self.docs_measured as i64 - self.docs_predicted as i64
    }

    pub fn depth_delta(&self) -> i64 {
        self.depth_measured as i64 - self.depth_predicted as i64
    }
}

pub fn ledger_audit(measured: &CostLedger, predicted: &AnalyticCost) -> AuditReport {
    AuditReport {
        docs_measured: measured.docs_sent,
        docs_predicted: predicted.docs_sent,
        depth_measured: measured.depth,
        depth_predicted: predicted.depth,
    }
}
