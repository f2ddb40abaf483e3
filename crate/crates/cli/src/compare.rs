//! `compare`: methods × initial-order perturbations, or serial trajectories.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use tourrank::baselines::{
    pointwise_rerank, serial_rerank, sliding_window_rerank, RerankError, Reranked, Reranker,
    ScoreFailure, WindowSpec,
};
use tourrank::eval::{ndcg_at_k, Perturbation, Qrels};
use tourrank::{Candidate, TourRank};

use crate::config::{parse_perturbation, RunConfig, RunFlags};
use crate::inputs::{
    load_qrels, load_queries, perturbed, query_seed, InputFiles, Judges, QueryInput,
};
use crate::rank::{engine, pool};
use crate::UsageError;

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub inputs: InputFiles,
    #[command(flatten)]
    pub run: RunFlags,
    /// Comma-separated: `tourrank` (uses --rounds), `tourrank-R`,
    /// `sliding-window`, `pointwise`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    /// Initial orders to try.
    #[arg(long, value_delimiter = ',', value_parser = parse_perturbation,
          default_value = "keep,shuffle,reverse")]
    pub perturbations: Vec<Perturbation>,
    /// NDCG cutoff for the table.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Sliding-window size.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    /// Sliding-window step.
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Serial mode: re-apply each method 1..=N times, feeding its output
    /// back as the next initial order. A bare `tourrank` is instead run
    /// as TourRank-r at row r, which matches one sliding pass per round
    /// in documents sent.
    #[arg(long, value_name = "N")]
    pub serial: Option<usize>,
    /// Write the results as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    /// `None` takes rounds from the run config.
    TourRank(Option<usize>),
    SlidingWindow,
    Pointwise,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match s.as_str() {
            "tourrank" => Method::TourRank(None),
            "sliding-window" | "sliding" | "rankgpt" => Method::SlidingWindow,
            "pointwise" => Method::Pointwise,
            "prp-allpair" | "setwise" | "setwise-bubblesort" => {
                return Err(UsageError(format!(
                    "`{s}` has an analytic cost model only; see the `cost` subcommand"
                ))
                .into())
            }
            other => match other.strip_prefix("tourrank-").map(str::parse::<usize>) {
                Some(Ok(r)) if r >= 1 => Method::TourRank(Some(r)),
                _ => {
                    return Err(UsageError(format!(
                        "unknown method `{other}` (tourrank, tourrank-R, sliding-window, pointwise)"
                    ))
                    .into())
                }
            },
        })
    }

    fn label(&self, cfg: &RunConfig) -> String {
        match self {
            Method::TourRank(r) => format!("tourrank-{}", r.unwrap_or(cfg.rounds)),
            Method::SlidingWindow => "sliding-window".into(),
            Method::Pointwise => "pointwise".into(),
        }
    }
}

pub fn parse_methods(raw: &[String]) -> Result<Vec<Method>> {
    let methods: Vec<Method> = raw
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| Method::parse(s))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(UsageError("--methods needs at least one method".into()).into());
    }
    Ok(methods)
}

#[derive(Serialize)]
struct Cell {
    method: String,
    perturbation: Perturbation,
    mean_ndcg: f64,
    mean_docs_sent: f64,
    max_depth: u64,
}

#[derive(Serialize)]
struct TrajectoryRow {
    iteration: usize,
    method: String,
    mean_ndcg: f64,
    mean_docs_sent: f64,
}

/// Shared state for one `compare` invocation.
struct Ctx {
    cfg: RunConfig,
    judges: Judges,
    qrels: Qrels,
    queries: Vec<QueryInput>,
    spec: WindowSpec,
    k: usize,
    pool: std::sync::Arc<rayon::ThreadPool>,
}

impl Ctx {
    fn tourrank(&self, rounds: Option<usize>) -> TourRank {
        let mut cfg = self.cfg.clone();
        let r = rounds.unwrap_or(cfg.rounds);
        cfg.resolved_schedule.rounds = r;
        engine(&cfg, &self.pool)
    }

    fn ndcg(&self, qid: &str, ranking: &[String]) -> f64 {
        self.qrels
            .get(qid)
            .map_or(0.0, |g| ndcg_at_k(ranking, g, self.k))
    }

    fn once(
        &self,
        method: &Method,
        q: &QueryInput,
        cands: &[Candidate],
    ) -> Result<Reranked, RerankError> {
        let judge = self.judges.for_query(&q.qid);
        let out = match method {
            Method::TourRank(r) => {
                let res = self.tourrank(*r).run(
                    &q.text,
                    cands,
                    &judge,
                    query_seed(self.cfg.seed, &q.qid),
                )?;
                Reranked {
                    ranking: res.ranking,
                    cost: res.cost,
                }
            }
            Method::SlidingWindow => sliding_window_rerank(&q.text, cands, self.spec, &judge)?,
            Method::Pointwise => {
                let scorer = self
                    .judges
                    .scorer(&q.qid)
                    .map_err(|e| RerankError::InvalidArgument(e.to_string()))?;
                pointwise_rerank(&q.text, cands, scorer.as_ref(), ScoreFailure::Abort)?
            }
        };
        Ok(out)
    }

    /// Per query `(ndcg, docs_sent, depth)` for one method and perturbation.
    fn table_cell(&self, method: &Method, mode: Perturbation) -> Result<Cell> {
        let rows: Vec<(f64, u64, u64)> = self.pool.install(|| {
            self.queries
                .par_iter()
                .map(|q| {
                    let cands = perturbed(q, &self.cfg, mode);
                    let out = self.once(method, q, &cands).with_context(|| {
                        format!("{} on query `{}`", method.label(&self.cfg), q.qid)
                    })?;
                    Ok((
                        self.ndcg(&q.qid, &out.ranking),
                        out.cost.docs_sent,
                        out.cost.depth,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let n = rows.len() as f64;
        Ok(Cell {
            method: method.label(&self.cfg),
            perturbation: mode,
            mean_ndcg: rows.iter().map(|r| r.0).sum::<f64>() / n,
            mean_docs_sent: rows.iter().map(|r| r.1 as f64).sum::<f64>() / n,
            max_depth: rows.iter().map(|r| r.2).max().unwrap_or(0),
        })
    }

    /// Mean NDCG and docs per iteration `1..=iters`.
    fn trajectory(
        &self,
        method: &Method,
        mode: Perturbation,
        iters: usize,
    ) -> Result<Vec<(f64, f64)>> {
        let per_query: Vec<Vec<(f64, u64)>> = self.pool.install(|| {
            self.queries
                .par_iter()
                .map(|q| {
                    let cands = perturbed(q, &self.cfg, mode);
                    self.query_trajectory(method, q, &cands, iters)
                        .with_context(|| {
                            format!("{} on query `{}`", method.label(&self.cfg), q.qid)
                        })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let n = per_query.len() as f64;
        Ok((0..iters)
            .map(|i| {
                let ndcg = per_query.iter().map(|t| t[i].0).sum::<f64>() / n;
                let docs = per_query.iter().map(|t| t[i].1 as f64).sum::<f64>() / n;
                (ndcg, docs)
            })
            .collect())
    }

    fn query_trajectory(
        &self,
        method: &Method,
        q: &QueryInput,
        cands: &[Candidate],
        iters: usize,
    ) -> Result<Vec<(f64, u64)>> {
        if *method == Method::TourRank(None) {
            return (1..=iters)
                .map(|r| {
                    let out = self.once(&Method::TourRank(Some(r)), q, cands)?;
                    Ok((self.ndcg(&q.qid, &out.ranking), out.cost.docs_sent))
                })
                .collect();
        }
        let adapter = Adapter {
            ctx: self,
            method,
            q,
        };
        let traj = serial_rerank(&q.text, cands, &adapter, iters)?;
        let mut spent = 0;
        let per_pass = traj.cost.docs_sent / iters as u64;
        Ok(traj
            .iterations
            .iter()
            .map(|ranking| {
                spent += per_pass;
                (self.ndcg(&q.qid, ranking), spent)
            })
            .collect())
    }
}

/// Lets [`serial_rerank`] drive any configured method.
struct Adapter<'a> {
    ctx: &'a Ctx,
    method: &'a Method,
    q: &'a QueryInput,
}

impl Reranker for Adapter<'_> {
    fn name(&self) -> String {
        self.method.label(&self.ctx.cfg)
    }

    fn rerank(&self, _query: &str, candidates: &[Candidate]) -> Result<Reranked, RerankError> {
        self.ctx.once(self.method, self.q, candidates)
    }
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::MIN, f64::max);
    let min = xs.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

pub fn run(args: &CompareArgs, config_file: Option<&std::path::Path>) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    if args.perturbations.is_empty() {
        bail!(UsageError("--perturbations needs at least one mode".into()));
    }
    let cfg = RunConfig::from_sources(&args.run, config_file)?;
    eprintln!("{}", cfg.echo());
    let ctx = Ctx {
        judges: Judges::build(&cfg, &args.inputs)?,
        qrels: load_qrels(&args.inputs, "for evaluation")?,
        queries: load_queries(&args.inputs)?,
        spec: WindowSpec::new(args.window, args.step),
        k: args.k,
        pool: pool(&cfg)?,
        cfg,
    };
    if methods.contains(&Method::Pointwise) && matches!(ctx.judges, Judges::Llm(_)) {
        bail!(UsageError(
            "the pointwise baseline needs --judge oracle or noisy".into()
        ));
    }
    // sliding window only checks its geometry once it runs; fail early
    if methods.contains(&Method::SlidingWindow) {
        let n = ctx
            .queries
            .iter()
            .map(|q| q.candidates.len())
            .min()
            .unwrap_or(0);
        if args.step == 0 || args.step > args.window || args.window > n {
            bail!(UsageError(format!(
                "sliding window needs 1 <= step ({}) <= window ({}) <= pool size ({n})",
                args.step, args.window
            )));
        }
    }

    match args.serial {
        None => compare_table(&ctx, &methods, args),
        Some(iters) => {
            if iters == 0 {
                bail!(UsageError("--serial needs at least 1 iteration".into()));
            }
            serial_table(&ctx, &methods, args, iters)
        }
    }
}

fn compare_table(ctx: &Ctx, methods: &[Method], args: &CompareArgs) -> Result<()> {
    let mut cells = Vec::new();
    let mut header = format!("{:<18}", "method");
    for p in &args.perturbations {
        header.push_str(&format!(" {:>9}", p.name()));
    }
    header.push_str(&format!(
        " {:>8} {:>10} {:>6}",
        "spread", "docs/query", "depth"
    ));
    println!("mean NDCG@{} over {} queries", ctx.k, ctx.queries.len());
    println!("{header}");
    for m in methods {
        let row: Vec<Cell> = args
            .perturbations
            .iter()
            .map(|&p| ctx.table_cell(m, p))
            .collect::<Result<_>>()?;
        let means: Vec<f64> = row.iter().map(|c| c.mean_ndcg).collect();
        let mut line = format!("{:<18}", m.label(&ctx.cfg));
        for v in &means {
            line.push_str(&format!(" {v:>9.4}"));
        }
        line.push_str(&format!(
            " {:>8.4} {:>10.1} {:>6}",
            spread(&means),
            row[0].mean_docs_sent,
            row.iter().map(|c| c.max_depth).max().unwrap_or(0)
        ));
        println!("{line}");
        cells.extend(row);
    }
    if let Some(path) = &args.json {
        write_json(path, &cells)?;
    }
    Ok(())
}

fn serial_table(ctx: &Ctx, methods: &[Method], args: &CompareArgs, iters: usize) -> Result<()> {
    let mut rows = Vec::new();
    for &mode in &args.perturbations {
        let trajectories: Vec<Vec<(f64, f64)>> = methods
            .iter()
            .map(|m| ctx.trajectory(m, mode, iters))
            .collect::<Result<_>>()?;
        println!(
            "serial trajectory, initial order `{}`: mean NDCG@{} (cumulative docs/query)",
            mode.name(),
            ctx.k
        );
        let mut header = format!("{:>9}", "iteration");
        for m in methods {
            let label = match m {
                Method::TourRank(None) => "tourrank-r".to_string(),
                other => other.label(&ctx.cfg),
            };
            header.push_str(&format!(" {label:>26}"));
        }
        println!("{header}");
        for i in 0..iters {
            let mut line = format!("{:>9}", i + 1);
            for (m, t) in methods.iter().zip(&trajectories) {
                let (ndcg, docs) = t[i];
                line.push_str(&format!(" {:>26}", format!("{ndcg:.4} ({docs:.0})")));
                rows.push(TrajectoryRow {
                    iteration: i + 1,
                    method: match m {
                        Method::TourRank(None) => format!("tourrank-{}", i + 1),
                        other => other.label(&ctx.cfg),
                    },
                    mean_ndcg: ndcg,
                    mean_docs_sent: docs,
                });
            }
            println!("{line}");
        }
    }
    if let Some(path) = &args.json {
        write_json(path, &rows)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}
