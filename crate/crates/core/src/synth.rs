//! Deterministic synthetic benchmarks: graded candidate pools with a noisy
//! first-stage ordering.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::domain::Candidate;
use crate::eval::{CorpusDoc, Qrels, RunFile};
use crate::judge::Grades;
use crate::seed;

const FILLER: &[&str] = &[
    "lorem",
    "ipsum",
    "dolor",
    "sit",
    "amet",
    "consectetur",
    "adipiscing",
    "elit",
    "sed",
    "do",
    "eiusmod",
    "tempor",
    "incididunt",
    "labore",
    "dolore",
    "magna",
    "aliqua",
    "enim",
    "minim",
    "veniam",
    "quis",
    "nostrud",
    "exercitation",
    "ullamco",
    "laboris",
    "nisi",
    "aliquip",
    "commodo",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_queries: usize,
    pub pool_size: usize,
    /// Probability of each grade `0, 1, 2, ...`; normalized on use.
    pub grade_distribution: Vec<f64>,
    /// Every document gets a distinct grade and the initial order is the
    /// true order.
    pub distinct_grades: bool,
    /// Width of the uniform noise added to the grade to form the
    /// first-stage score.
    pub retriever_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_queries: 50,
            pool_size: 100,
            grade_distribution: vec![0.5, 0.25, 0.15, 0.10],
            distinct_grades: false,
            retriever_noise: 2.5,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub corpus: Vec<CorpusDoc>,
    /// `(qid, text)` in generation order.
    pub queries: Vec<(String, String)>,
    pub qrels: Qrels,
    /// First-stage ranking per query.
    pub initial: RunFile<f64>,
}

fn draw_grade(rng: &mut seed::Rng, cdf: &[f64]) -> u32 {
    let u: f64 = rng.gen();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32
}

pub fn generate(config: &SynthConfig) -> SynthDataset {
    let total: f64 = config.grade_distribution.iter().sum();
    let mut acc = 0.0;
    let cdf: Vec<f64> = config
        .grade_distribution
        .iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect();

    let mut corpus = Vec::with_capacity(config.num_queries * config.pool_size);
    let mut queries = Vec::with_capacity(config.num_queries);
    let mut qrels = Qrels::new();
    let mut initial = RunFile::new("synth");

    for qi in 0..config.num_queries {
        let qid = format!("q{qi:03}");
        let mut rng = seed::rng(seed::mix(config.seed, &[qi as u64]));
        queries.push((qid.clone(), format!("synthetic information need {qi}")));

        let mut grades = Grades::with_capacity(config.pool_size);
        let mut scored = Vec::with_capacity(config.pool_size);
        for j in 0..config.pool_size {
            let doc_id = format!("{qid}_d{j:03}");
            let (grade, score) = if config.distinct_grades {
                let g = (config.pool_size - 1 - j) as u32;
                (g, f64::from(g))
            } else {
                let g = draw_grade(&mut rng, &cdf);
                (g, f64::from(g) + rng.gen::<f64>() * config.retriever_noise)
            };
            let words: Vec<&str> = (0..12)
                .map(|_| FILLER[rng.gen_range(0..FILLER.len())])
                .collect();
            corpus.push(CorpusDoc {
                doc_id: doc_id.clone(),
                text: format!("Document {doc_id}. {}", words.join(" ")),
            });
            grades.insert(doc_id.clone(), grade);
            scored.push((doc_id, score));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        // scores rounded so the text form is short and exact
        let ranked = scored
            .into_iter()
            .map(|(d, s)| (d, (s * 1e6).round() / 1e6))
            .collect();
        initial.insert(qid.clone(), ranked);
        qrels.insert(qid, grades);
    }
    SynthDataset {
        corpus,
        queries,
        qrels,
        initial,
    }
}

impl SynthDataset {
    /// Candidates for `qid`, ranked as in the first-stage run.
    pub fn candidates(&self, qid: &str) -> Vec<Candidate> {
        let text: BTreeMap<&str, &str> = self
            .corpus
            .iter()
            .map(|d| (d.doc_id.as_str(), d.text.as_str()))
            .collect();
        self.initial.queries[qid]
            .iter()
            .map(|e| Candidate::new(e.doc_id.clone(), text[e.doc_id.as_str()], e.rank))
            .collect()
    }
}
