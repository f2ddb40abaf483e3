//! `cost`, `eval` and `synth`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use tourrank::eval::{
    create_file, evaluate, read_qrels, read_run, write_corpus, write_qrels, write_queries,
    write_run,
};
use tourrank::synth::{generate, SynthConfig};
use tourrank::{analytic_cost, default_schedule, CostMethod, Report, TournamentSchedule};

use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    Tourrank,
    #[value(alias = "prp_allpair")]
    PrpAllpair,
    #[value(alias = "setwise_bubblesort")]
    Setwise,
    #[value(alias = "sliding_window")]
    SlidingWindow,
    Pointwise,
    /// Every method with the given parameters.
    All,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    #[arg(long, value_enum)]
    pub method: CostKind,
    /// Pool size.
    #[arg(long, short = 'n', default_value_t = 100)]
    pub n: u64,
    /// TourRank rounds.
    #[arg(long, default_value_t = 10)]
    pub rounds: u64,
    /// TourRank schedule: `default` or a JSON file.
    #[arg(long, default_value = "default")]
    pub schedule: String,
    #[arg(long, default_value_t = 20)]
    pub window: u64,
    #[arg(long, default_value_t = 10)]
    pub step: u64,
    /// Setwise: documents to extract.
    #[arg(long, default_value_t = 10)]
    pub k: u64,
    /// Setwise: documents compared per prompt.
    #[arg(long, default_value_t = 3)]
    pub c: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn cost_methods(args: &CostArgs) -> Result<Vec<CostMethod>> {
    let schedule = || -> Result<TournamentSchedule> {
        if args.schedule == "default" {
            return Ok(default_schedule());
        }
        let text = std::fs::read_to_string(&args.schedule)
            .with_context(|| format!("reading schedule file {}", args.schedule))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing schedule file {}", args.schedule))
    };
    let one = |kind: CostKind| -> Result<CostMethod> {
        Ok(match kind {
            CostKind::Tourrank => CostMethod::TourRank {
                schedule: schedule()?,
                rounds: args.rounds,
            },
            CostKind::PrpAllpair => CostMethod::PrpAllpair,
            CostKind::Setwise => CostMethod::SetwiseBubblesort {
                k: args.k,
                c: args.c,
            },
            CostKind::SlidingWindow => CostMethod::SlidingWindow {
                window: args.window,
                step: args.step,
            },
            CostKind::Pointwise => CostMethod::Pointwise,
            CostKind::All => unreachable!("expanded by caller"),
        })
    };
    match args.method {
        CostKind::All => [
            CostKind::Pointwise,
            CostKind::PrpAllpair,
            CostKind::Setwise,
            CostKind::SlidingWindow,
            CostKind::Tourrank,
        ]
        .into_iter()
        .map(one)
        .collect(),
        kind => Ok(vec![one(kind)?]),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

pub fn cost(args: &CostArgs) -> Result<()> {
    let costs = cost_methods(args)?
        .iter()
        .map(|m| analytic_cost(m, args.n).map_err(|e| UsageError(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&costs)?);
        return Ok(());
    }
    println!(
        "{:<20} {:>6} {:>10} {:>7} {:>12} {:>12} {:>10}",
        "method", "N", "docs", "depth", "closed_docs", "closed_depth", "approx"
    );
    for c in &costs {
        println!(
            "{:<20} {:>6} {:>10} {:>7} {:>12} {:>12} {:>10}",
            c.method,
            c.n,
            c.docs_sent,
            c.depth,
            opt(c.closed_form_docs),
            opt(c.closed_form_depth),
            opt(c.approx_docs)
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// TREC run file.
    #[arg(long)]
    pub run: PathBuf,
    /// TREC qrels.
    #[arg(long)]
    pub qrels: PathBuf,
    /// NDCG cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    pub ks: Vec<usize>,
    /// Also print every query.
    #[arg(long)]
    pub per_query: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let run = read_run::<f64>(&args.run).context("loading run")?;
    let qrels = read_qrels(&args.qrels).context("loading qrels")?;
    let report: Report = evaluate(&run, &qrels, &args.ks).map_err(|e| UsageError(e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let mut header = format!("{:<16}", "query");
    for k in &report.ks {
        header.push_str(&format!(" {:>9}", format!("NDCG@{k}")));
    }
    println!("{header}");
    let row = |name: &str, vals: &[f64]| {
        let mut line = format!("{name:<16}");
        for v in vals {
            line.push_str(&format!(" {v:>9.4}"));
        }
        println!("{line}");
    };
    if args.per_query {
        for (qid, vals) in &report.per_query {
            row(qid, vals);
        }
    }
    row(&format!("mean ({})", report.per_query.len()), &report.mean);
    if !report.skipped.is_empty() {
        eprintln!(
            "skipped {} run queries without qrels: {}",
            report.skipped.len(),
            report.skipped.join(" ")
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub num_queries: usize,
    #[arg(long, default_value_t = 100)]
    pub pool_size: usize,
    /// Probability of each grade 0, 1, 2, ...
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.15,0.1")]
    pub grades: Vec<f64>,
    /// Give every document its own grade, with the initial order equal to
    /// the true order.
    #[arg(long)]
    pub distinct: bool,
    /// Width of uniform noise added to grades to form the initial scores.
    #[arg(long, default_value_t = 2.5)]
    pub noise: f64,
    /// Seed; drawn and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if args.grades.is_empty()
        || args.grades.iter().any(|p| !p.is_finite() || *p < 0.0)
        || args.grades.iter().sum::<f64>() <= 0.0
    {
        return Err(
            UsageError("--grades must be non-negative weights with a positive sum".into()).into(),
        );
    }
    if args.pool_size == 0 || args.num_queries == 0 {
        return Err(UsageError("--num-queries and --pool-size must be positive".into()).into());
    }
    let seed = args.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>() >> 11;
        eprintln!("seed: {s} (drawn; pass --seed {s} to replay)");
        s
    });
    let config = SynthConfig {
        num_queries: args.num_queries,
        pool_size: args.pool_size,
        grade_distribution: args.grades.clone(),
        distinct_grades: args.distinct,
        retriever_noise: args.noise,
        seed,
    };
    let data = generate(&config);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = |name: &str| args.out.join(name);
    write_corpus(create_file(path("corpus.jsonl"))?, &data.corpus)?;
    write_queries(create_file(path("queries.tsv"))?, &data.queries)?;
    write_qrels(create_file(path("qrels.txt"))?, &data.qrels)?;
    write_run(create_file(path("candidates.run"))?, &data.initial)?;
    println!(
        "wrote {} queries x {} docs to {} (corpus.jsonl, queries.tsv, qrels.txt, candidates.run)",
        args.num_queries,
        args.pool_size,
        args.out.display()
    );
    Ok(())
}
