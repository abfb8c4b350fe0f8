//! Corpus tooling: raw batch parsing, seq2seq subtask construction,
//! situation-level splits, corpus statistics and dist-n.
//!
//! Raw batch grammar, one record per situation:
//!
//! ```text
//! robbing for eating ->
//!  Values:
//! - Survival: The act of robbing to eat is driven by ... [supports]
//!
//! Rights:
//! - N/A
//!
//! Duties:
//! - Duty to respect others' property: We have ... [opposes, perfect]
//! -----------------
//! ```
//!
//! The perfect/imperfect tag on duties is validated and discarded. A
//! section written `Rights: N/A` or holding only `- N/A` has no entries.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_task, Task, TaskPrompt};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::types::{ValenceLabel, ValueEntry, ValueKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SituationRecord {
    pub situation: String,
    pub entries: Vec<ValueEntry>,
}

impl SituationRecord {
    pub fn count(&self, kind: ValueKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

fn section_kind(word: &str) -> Option<ValueKind> {
    match word.to_ascii_lowercase().as_str() {
        "values" => Some(ValueKind::Value),
        "rights" => Some(ValueKind::Right),
        "duties" => Some(ValueKind::Duty),
        _ => None,
    }
}

fn is_separator(line: &str) -> bool {
    line.len() >= 3 && line.chars().all(|c| c == '-')
}

fn is_na(s: &str) -> bool {
    s.trim().eq_ignore_ascii_case("n/a")
}

fn parse_valence(token: &str) -> Option<ValenceLabel> {
    match token.trim().to_ascii_lowercase().as_str() {
        "supports" => Some(ValenceLabel::Supports),
        "opposes" => Some(ValenceLabel::Opposes),
        "either" => Some(ValenceLabel::Either),
        _ => None,
    }
}

fn parse_item(kind: ValueKind, body: &str, line: usize) -> Result<ValueEntry> {
    let body = body.trim();
    let open = match (body.ends_with(']'), body.rfind('[')) {
        (true, Some(i)) => i,
        _ => return Err(Error::parse(line, "item is missing its [valence] bracket")),
    };
    let tags: Vec<&str> = body[open + 1..body.len() - 1].split(',').map(str::trim).collect();
    let label = parse_valence(tags[0])
        .ok_or_else(|| Error::parse(line, format!("unknown valence {:?}", tags[0])))?;
    match tags.get(1..) {
        Some([]) | None => {}
        Some([duty_type]) if matches!(duty_type.to_ascii_lowercase().as_str(), "perfect" | "imperfect") => {}
        Some(rest) => return Err(Error::parse(line, format!("unexpected tags {rest:?}"))),
    }
    let head = body[..open].trim();
    let (name, explanation) = match head.split_once(": ") {
        Some((n, e)) => (n.trim(), e.trim()),
        None => match head.strip_suffix(':') {
            Some(n) => (n.trim(), ""),
            None => return Err(Error::parse(line, "item is missing the ': ' after its name")),
        },
    };
    if name.is_empty() {
        return Err(Error::parse(line, "item has an empty name"));
    }
    Ok(ValueEntry::new(kind, name)?
        .with_explanation(explanation)
        .with_label(label))
}

struct OpenRecord {
    situation: String,
    header_line: usize,
    section: Option<ValueKind>,
    saw_section: bool,
    entries: Vec<ValueEntry>,
}

impl OpenRecord {
    fn close(self) -> Result<SituationRecord> {
        if !self.saw_section {
            return Err(Error::parse(self.header_line, "record has no sections"));
        }
        Ok(SituationRecord {
            situation: self.situation,
            entries: self.entries,
        })
    }
}

/// Parse raw batch text into situation records.
pub fn parse_corpus(raw: &str) -> Result<Vec<SituationRecord>> {
    let mut records = Vec::new();
    let mut open: Option<OpenRecord> = None;

    for (i, raw_line) in raw.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if is_separator(line) {
            if let Some(rec) = open.take() {
                records.push(rec.close()?);
            }
            continue;
        }
        if let Some(situation) = line.strip_suffix("->") {
            if let Some(rec) = &open {
                return Err(Error::parse(
                    line_no,
                    format!("unterminated record starting at line {}", rec.header_line),
                ));
            }
            let situation = situation.trim();
            if situation.is_empty() {
                return Err(Error::parse(line_no, "empty situation"));
            }
            open = Some(OpenRecord {
                situation: situation.to_string(),
                header_line: line_no,
                section: None,
                saw_section: false,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(rec) = open.as_mut() else {
            return Err(Error::parse(line_no, "content outside a record"));
        };
        if let Some(item) = line.strip_prefix('-') {
            if is_na(item) {
                continue;
            }
            let kind = rec
                .section
                .ok_or_else(|| Error::parse(line_no, "item before any section header"))?;
            rec.entries.push(parse_item(kind, item, line_no)?);
            continue;
        }
        match line.split_once(':') {
            Some((word, rest)) if !word.contains(char::is_whitespace) && (rest.trim().is_empty() || is_na(rest)) => {
                let kind = section_kind(word)
                    .ok_or_else(|| Error::parse(line_no, format!("unknown section header {word:?}")))?;
                rec.section = Some(kind);
                rec.saw_section = true;
            }
            _ => return Err(Error::parse(line_no, format!("unexpected line {line:?}"))),
        }
    }
    if let Some(rec) = open.take() {
        records.push(rec.close()?);
    }
    Ok(records)
}

/// Canonical raw form. Duty type tags are not emitted.
pub fn serialize_corpus(records: &[SituationRecord]) -> Result<String> {
    let mut out = String::new();
    for (i, rec) in records.iter().enumerate() {
        if i > 0 {
            out.push_str("-----------------\n");
        }
        writeln!(out, "{} -> ", rec.situation).expect("string write");
        for (j, kind) in ValueKind::ALL.iter().enumerate() {
            if j > 0 {
                out.push('\n');
            }
            writeln!(out, "{}{}:", if j == 0 { " " } else { "" }, kind.plural()).expect("string write");
            let mut any = false;
            for e in rec.entries.iter().filter(|e| e.kind == *kind) {
                let label = e.valence_label.ok_or_else(|| {
                    Error::InvalidInput(format!("entry {:?} has no valence label", e.text))
                })?;
                writeln!(
                    out,
                    "- {}: {} [{}]",
                    e.text,
                    e.explanation.as_deref().unwrap_or(""),
                    label.as_str().to_ascii_lowercase()
                )
                .expect("string write");
                any = true;
            }
            if !any {
                out.push_str("- N/A\n");
            }
        }
    }
    Ok(out)
}

/// Parse every regular file in `dir` (sorted by file name). Files are parsed
/// concurrently and merged in name order.
pub fn parse_corpus_dir(dir: &Path, exec: Execution) -> Result<Vec<SituationRecord>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let parsed = par::try_map(exec, &files, |path| {
        let wrap = |e: Error| Error::InFile {
            path: path.display().to_string(),
            source: Box::new(e),
        };
        let text = std::fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
        parse_corpus(&text).map_err(wrap)
    })?;
    Ok(parsed.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskRecord {
    pub task: Task,
    pub input: String,
    pub target: String,
    pub situation_id: String,
}

pub fn situation_id(index: usize) -> String {
    format!("s{index:06}")
}

const REJECTION_TRIES: usize = 64;

/// Build generation, relevance (one positive and one sampled negative),
/// valence and explanation rows for every entry.
pub fn build_subtasks(records: &[SituationRecord], seed: u64) -> Result<Vec<SubtaskRecord>> {
    if records.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two situations to sample relevance negatives".into(),
        ));
    }
    let pool: Vec<(usize, &ValueEntry)> = records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.entries.iter().map(move |e| (i, e)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(pool.len() * 5);

    for (si, rec) in records.iter().enumerate() {
        let own: HashSet<&str> = rec.entries.iter().map(|e| e.text.as_str()).collect();
        let eligible = |(i, e): &(usize, &ValueEntry)| *i != si && !own.contains(e.text.as_str());
        let sid = situation_id(si);
        let action = rec.situation.as_str();
        for entry in &rec.entries {
            let label = entry.valence_label.ok_or_else(|| {
                Error::InvalidInput(format!("entry {:?} has no valence label", entry.text))
            })?;

            let mut negative = None;
            for _ in 0..REJECTION_TRIES {
                let cand = pool[rng.random_range(0..pool.len())];
                if eligible(&cand) {
                    negative = Some(cand.1);
                    break;
                }
            }
            let negative = match negative {
                Some(n) => n,
                None => {
                    let options: Vec<&ValueEntry> = pool.iter().filter(|c| eligible(c)).map(|c| c.1).collect();
                    if options.is_empty() {
                        return Err(Error::InvalidInput(format!(
                            "no negative candidates for situation {:?}",
                            rec.situation
                        )));
                    }
                    options[rng.random_range(0..options.len())]
                }
            };

            let row = |task: Task, input: String, target: String| SubtaskRecord {
                task,
                input,
                target,
                situation_id: sid.clone(),
            };
            let with_entry = |task, e: &ValueEntry| {
                encode_task(&TaskPrompt::with_entry(task, action, e.kind, e.text.as_str()))
            };
            rows.push(row(
                Task::Generate,
                encode_task(&TaskPrompt::generate(action))?,
                entry.generation_target(),
            ));
            rows.push(row(Task::Relevance, with_entry(Task::Relevance, entry)?, "Yes".into()));
            rows.push(row(Task::Relevance, with_entry(Task::Relevance, negative)?, "No".into()));
            rows.push(row(Task::Valence, with_entry(Task::Valence, entry)?, label.as_str().into()));
            rows.push(row(
                Task::Explanation,
                with_entry(Task::Explanation, entry)?,
                entry.explanation.clone().unwrap_or_default(),
            ));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitAssignment(pub BTreeMap<String, Split>);

impl SplitAssignment {
    pub fn get(&self, situation_id: &str) -> Option<Split> {
        self.0.get(situation_id).copied()
    }

    pub fn sizes(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for s in self.0.values() {
            out[*s as usize] += 1;
        }
        out
    }
}

/// Seeded shuffle, then a contiguous 80/10/10 cut (each size rounded).
pub fn split_by_situation(situation_count: usize, seed: u64) -> SplitAssignment {
    let mut order: Vec<usize> = (0..situation_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (8 * situation_count + 5) / 10;
    let n_val = ((situation_count + 5) / 10).min(situation_count - n_train);
    SplitAssignment(
        order
            .into_iter()
            .enumerate()
            .map(|(pos, idx)| {
                let split = if pos < n_train {
                    Split::Train
                } else if pos < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                };
                (situation_id(idx), split)
            })
            .collect(),
    )
}

/// Row counts per split and task.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts(pub BTreeMap<Split, BTreeMap<Task, usize>>);

impl SplitCounts {
    pub fn get(&self, split: Split, task: Task) -> usize {
        self.0.get(&split).and_then(|m| m.get(&task)).copied().unwrap_or(0)
    }
}

/// Write `train.jsonl`, `val.jsonl`, `test.jsonl` and `splits.json` into `dir`.
pub fn write_split_files(dir: &Path, rows: &[SubtaskRecord], assignment: &SplitAssignment) -> Result<SplitCounts> {
    std::fs::create_dir_all(dir)?;
    let mut writers = BTreeMap::new();
    for split in Split::ALL {
        let f = std::fs::File::create(dir.join(format!("{}.jsonl", split.as_str())))?;
        writers.insert(split, std::io::BufWriter::new(f));
    }
    let mut counts = SplitCounts::default();
    for row in rows {
        let split = assignment.get(&row.situation_id).ok_or_else(|| {
            Error::InvalidInput(format!("situation {} has no split", row.situation_id))
        })?;
        let w = writers.get_mut(&split).expect("all splits opened");
        serde_json::to_writer(&mut *w, row)?;
        w.write_all(b"\n")?;
        *counts.0.entry(split).or_default().entry(row.task).or_insert(0) += 1;
    }
    for (_, mut w) in writers {
        w.flush()?;
    }
    std::fs::write(dir.join("splits.json"), serde_json::to_vec_pretty(assignment)?)?;
    Ok(counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub total: usize,
    pub unique: usize,
    pub avg_per_situation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub situations: usize,
    pub values: KindStats,
    pub rights: KindStats,
    pub duties: KindStats,
}

impl CorpusStats {
    pub fn kind(&self, kind: ValueKind) -> &KindStats {
        match kind {
            ValueKind::Value => &self.values,
            ValueKind::Right => &self.rights,
            ValueKind::Duty => &self.duties,
        }
    }
}

/// Per-kind totals, unique texts (exact match after trimming) and average per situation.
pub fn corpus_stats(records: &[SituationRecord]) -> CorpusStats {
    let n = records.len();
    let stats = |kind: ValueKind| {
        let texts: Vec<&str> = records
            .iter()
            .flat_map(|r| r.entries.iter())
            .filter(|e| e.kind == kind)
            .map(|e| e.text.trim())
            .collect();
        let unique = texts.iter().collect::<HashSet<_>>().len();
        KindStats {
            total: texts.len(),
            unique,
            avg_per_situation: if n == 0 { 0.0 } else { texts.len() as f64 / n as f64 },
        }
    };
    CorpusStats {
        situations: n,
        values: stats(ValueKind::Value),
        rights: stats(ValueKind::Right),
        duties: stats(ValueKind::Duty),
    }
}

/// Unique n-grams over total n-grams across all texts. Tokens are
/// lowercased whitespace-separated words; n-grams never span texts.
pub fn distinct_n<S: AsRef<str>>(texts: &[S], n: usize) -> f64 {
    assert!(n >= 1, "distinct_n requires n >= 1");
    let mut total = 0usize;
    let mut unique = HashSet::new();
    for t in texts {
        let tokens: Vec<String> = t.as_ref().split_whitespace().map(str::to_lowercase).collect();
        if tokens.len() < n {
            continue;
        }
        for gram in tokens.windows(n) {
            total += 1;
            unique.insert(gram.to_vec());
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}
