//! `rank`: re-rank every query and write a run file plus a cost report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use tourrank::eval::{create_file, write_run, RunFile};
use tourrank::{CostLedger, Merge, RoundFailurePolicy, TourRank};

use crate::config::{RunConfig, RunFlags};
use crate::inputs::{load_queries, perturbed, query_seed, InputFiles, Judges};

#[derive(Args, Debug)]
pub struct RankArgs {
    #[command(flatten)]
    pub inputs: InputFiles,
    #[command(flatten)]
    pub run: RunFlags,
    /// Output TREC run file.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Write the cost report as JSON here.
    #[arg(long)]
    pub cost_report: Option<PathBuf>,
    /// Tag in the run file's last column.
    #[arg(long, default_value = "tourrank")]
    pub tag: String,
}

#[derive(Serialize)]
pub struct CostReport {
    pub per_query: BTreeMap<String, CostLedger>,
    /// Queries run concurrently: sums, with depth the slowest query's.
    pub total: CostLedger,
    pub rounds_effective: BTreeMap<String, usize>,
}

/// Engine sharing one pool of `cfg.parallelism` threads.
pub fn engine(cfg: &RunConfig, pool: &Arc<rayon::ThreadPool>) -> TourRank {
    let policy = if cfg.lenient {
        RoundFailurePolicy::Lenient
    } else {
        RoundFailurePolicy::Strict
    };
    TourRank::new(cfg.resolved_schedule.clone())
        .with_shared_pool(Arc::clone(pool), cfg.parallelism)
        .failure_policy(policy)
}

pub fn pool(cfg: &RunConfig) -> Result<Arc<rayon::ThreadPool>> {
    Ok(Arc::new(
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .context("building worker pool")?,
    ))
}

pub fn run(args: &RankArgs, config_file: Option<&std::path::Path>) -> Result<()> {
    let cfg = RunConfig::from_sources(&args.run, config_file)?;
    eprintln!("{}", cfg.echo());
    let queries = load_queries(&args.inputs)?;
    let judges = Judges::build(&cfg, &args.inputs)?;
    let pool = pool(&cfg)?;
    let engine = engine(&cfg, &pool);

    let results = pool.install(|| {
        queries
            .par_iter()
            .map(|q| {
                let cands = perturbed(q, &cfg, cfg.perturb);
                let judge = judges.for_query(&q.qid);
                let res = engine
                    .run(&q.text, &cands, &judge, query_seed(cfg.seed, &q.qid))
                    .with_context(|| format!("ranking query `{}`", q.qid))?;
                for (round, err) in &res.failed_rounds {
                    log::warn!("query {}: dropped round {round}: {err}", q.qid);
                }
                Ok((
                    q.qid.clone(),
                    res.scored(&cands),
                    res.cost,
                    res.rounds_effective,
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut run = RunFile::new(args.tag.clone());
    let mut report = CostReport {
        per_query: BTreeMap::new(),
        total: CostLedger::default(),
        rounds_effective: BTreeMap::new(),
    };
    for (qid, scored, cost, effective) in results {
        report.total = report.total.merge(cost, Merge::Parallel);
        report.per_query.insert(qid.clone(), cost);
        report.rounds_effective.insert(qid.clone(), effective);
        run.insert(qid, scored);
    }
    write_run(create_file(&args.output)?, &run)
        .with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.cost_report {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "ranked {} queries -> {}",
        run.queries.len(),
        args.output.display()
    );
    println!("{}", cost_table(&report));
    Ok(())
}

pub fn cost_table(report: &CostReport) -> String {
    let mut out = format!(
        "{:<16} {:>11} {:>10} {:>6} {:>8} {:>8}\n",
        "query", "invocations", "docs_sent", "depth", "retries", "repairs"
    );
    let rows = report
        .per_query
        .iter()
        .map(|(q, l)| (q.as_str(), l))
        .chain(std::iter::once(("TOTAL", &report.total)));
    for (q, l) in rows {
        out.push_str(&format!(
            "{:<16} {:>11} {:>10} {:>6} {:>8} {:>8}\n",
            q, l.invocations, l.docs_sent, l.depth, l.retries, l.repairs
        ));
    }
    out.pop();
    out
}
