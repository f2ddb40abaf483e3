//! TREC-style text formats: qrels, run files, JSONL corpus, TSV queries.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::judge::Grades;

/// query id → (doc id → grade).
pub type Qrels = BTreeMap<String, Grades>;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

impl FormatError {
    fn line(line: usize, message: impl Into<String>) -> Self {
        Self::Line {
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<io::Error> for FormatError {
    fn from(source: io::Error) -> Self {
        Self::Io {
            path: "<stream>".into(),
            source,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FormatError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FormatError::io(path, e))
}

/// Lines of `qid 0 docid grade`.
pub fn parse_qrels<R: Read>(reader: R) -> Result<Qrels, FormatError> {
    let mut qrels = Qrels::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iter, doc, grade] = fields.as_slice() else {
            return Err(FormatError::line(
                lineno,
                format!(
                    "expected 4 fields `qid 0 docid grade`, got {}",
                    fields.len()
                ),
            ));
        };
        // negative grades (e.g. -1 "junk") are clamped to 0
        let grade: i64 = grade
            .parse()
            .map_err(|_| FormatError::line(lineno, format!("bad grade `{grade}`")))?;
        qrels
            .entry(qid.to_string())
            .or_default()
            .insert(doc.to_string(), grade.max(0) as u32);
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels, FormatError> {
    let path = path.as_ref();
    parse_qrels(open(path)?).map_err(|e| match e {
        FormatError::Line { line, message } => FormatError::Line {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_qrels<W: Write>(mut w: W, qrels: &Qrels) -> io::Result<()> {
    for (qid, grades) in qrels {
        let mut docs: Vec<(&String, &u32)> = grades.iter().collect();
        docs.sort();
        for (doc, g) in docs {
            writeln!(w, "{qid} 0 {doc} {g}")?;
        }
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry<S> {
    pub doc_id: String,
    pub rank: u32,
    pub score: S,
}

/// Ranked lists per query plus the run tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFile<S> {
    pub tag: String,
    pub queries: BTreeMap<String, Vec<RunEntry<S>>>,
}

impl<S: Float> RunFile<S> {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Inserts a ranked list; ranks are assigned 1.. in slice order.
    pub fn insert(&mut self, qid: impl Into<String>, ranked: Vec<(String, S)>) {
        let entries = ranked
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry {
                doc_id,
                rank: i as u32 + 1,
                score,
            })
            .collect();
        self.queries.insert(qid.into(), entries);
    }

    /// Doc ids in rank order.
    pub fn ranking(&self, qid: &str) -> Option<Vec<&str>> {
        self.queries
            .get(qid)
            .map(|e| e.iter().map(|x| x.doc_id.as_str()).collect())
    }

    /// Ranks contiguous from 1 and scores non-increasing.
    pub fn is_well_formed(&self) -> bool {
        self.queries.values().all(|entries| {
            entries
                .iter()
                .enumerate()
                .all(|(i, e)| e.rank as usize == i + 1)
                && entries.windows(2).all(|w| w[0].score >= w[1].score)
        })
    }
}

/// Writes `qid Q0 docid rank score tag` lines, queries in id order.
pub fn write_run<S: Float + Display, W: Write>(mut w: W, run: &RunFile<S>) -> io::Result<()> {
    for (qid, entries) in &run.queries {
        for e in entries {
            writeln!(
                w,
                "{qid} Q0 {} {} {} {}",
                e.doc_id, e.rank, e.score, run.tag
            )?;
        }
    }
    w.flush()
}

pub fn write_run_path<S: Float + Display>(
    path: impl AsRef<Path>,
    run: &RunFile<S>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_run(create(path)?, run).map_err(|e| FormatError::io(path, e))
}

/// Parses a run file. Entries are kept sorted by rank; the tag of the first
/// line becomes the file's tag.
pub fn parse_run<S: Float + FromStr, R: Read>(reader: R) -> Result<RunFile<S>, FormatError> {
    let mut run = RunFile::new("");
    let mut tag: Option<String> = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _q0, doc, rank, score, t] = fields.as_slice() else {
            return Err(FormatError::line(
                lineno,
                format!(
                    "expected 6 fields `qid Q0 docid rank score tag`, got {}",
                    fields.len()
                ),
            ));
        };
        let rank: u32 = rank
            .parse()
            .map_err(|_| FormatError::line(lineno, format!("bad rank `{rank}`")))?;
        let score: S = score
            .parse()
            .map_err(|_| FormatError::line(lineno, format!("bad score `{score}`")))?;
        tag.get_or_insert_with(|| t.to_string());
        run.queries
            .entry(qid.to_string())
            .or_default()
            .push(RunEntry {
                doc_id: doc.to_string(),
                rank,
                score,
            });
    }
    for entries in run.queries.values_mut() {
        entries.sort_by_key(|e| e.rank);
    }
    run.tag = tag.unwrap_or_default();
    Ok(run)
}

pub fn read_run<S: Float + FromStr>(path: impl AsRef<Path>) -> Result<RunFile<S>, FormatError> {
    let path = path.as_ref();
    parse_run(open(path)?)
}

/// One corpus line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub text: String,
}

/// JSONL with `doc_id` and `text` fields; doc id → text.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>, FormatError> {
    let path = path.as_ref();
    let mut docs = BTreeMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDoc = serde_json::from_str(&line)
            .map_err(|e| FormatError::line(i + 1, format!("bad corpus record: {e}")))?;
        docs.insert(doc.doc_id, doc.text);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut w: W, docs: &[CorpusDoc]) -> io::Result<()> {
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// `qid<TAB>text` lines, in file order.
pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, FormatError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| FormatError::line(i + 1, "expected `qid<TAB>text`"))?;
        out.push((qid.to_string(), text.to_string()));
    }
    Ok(out)
}

pub fn write_queries<W: Write>(mut w: W, queries: &[(String, String)]) -> io::Result<()> {
    for (qid, text) in queries {
        writeln!(w, "{qid}\t{text}")?;
    }
    w.flush()
}

pub fn create_file(path: impl AsRef<Path>) -> Result<BufWriter<File>, FormatError> {
    create(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qrels_line() {
        let q = parse_qrels("q1 0 d7 2\n\nq1 0 d8 0\nq2 0 d1 -1\n".as_bytes()).unwrap();
        assert_eq!(q["q1"]["d7"], 2);
        assert_eq!(q["q1"]["d8"], 0);
        assert_eq!(q["q2"]["d1"], 0);
    }

    #[test]
    fn qrels_bad_line_reports_number() {
        let err = parse_qrels("q1 0 d7 2\nq1 0 d8\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Line { line: 2, .. }), "{err}");
        let err = parse_qrels("q1 0 d7 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Line { line: 1, .. }));
    }

    #[test]
    fn run_line_round_trips() {
        let text = "q1 Q0 d7 1 12.5 tourrank\n";
        let run: RunFile<f64> = parse_run(text.as_bytes()).unwrap();
        assert_eq!(run.tag, "tourrank");
        assert_eq!(run.queries["q1"][0].score, 12.5);
        let mut out = Vec::new();
        write_run(&mut out, &run).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn run_bad_line() {
        let err = parse_run::<f64, _>("q1 Q0 d7 1 tag\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Line { line: 1, .. }));
    }

    #[test]
    fn well_formedness() {
        let mut run = RunFile::<f64>::new("t");
        run.insert("q", vec![("a".into(), 2.0), ("b".into(), 1.0)]);
        assert!(run.is_well_formed());
        run.insert("r", vec![("a".into(), 1.0), ("b".into(), 2.0)]);
        assert!(!run.is_well_formed());
    }

    fn arb_run() -> impl Strategy<Value = RunFile<f64>> {
        let entries = proptest::collection::vec(("[a-z0-9_]{1,8}", -1e6f64..1e6), 1..15);
        proptest::collection::btree_map("[a-z0-9]{1,5}", entries, 1..5).prop_map(|m| {
            let mut run = RunFile::new("tag_x");
            for (q, list) in m {
                run.insert(q, list);
            }
            run
        })
    }

    proptest! {
        #[test]
        fn run_round_trip(run in arb_run()) {
            let mut buf = Vec::new();
            write_run(&mut buf, &run).unwrap();
            let back: RunFile<f64> = parse_run(buf.as_slice()).unwrap();
            prop_assert_eq!(back, run);
        }
    }
}
