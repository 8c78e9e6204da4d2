//! Post / comment / verdict corpus: JSONL ingestion, the author-activity
//! filter, and leakage-controlled train/val/test splits.
//!
//! The corpus is a bipartite graph: posts on one side, annotators on the
//! other, one edge per [`Verdict`]. Annotators additionally own a pool of
//! background [`Comment`]s that never carry labels.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: duplicate {kind} id '{id}'")]
    DuplicateId {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("{file}:{line}: unknown verdict label '{label}' (expected YTA or NTA)")]
    UnknownLabel {
        file: String,
        line: usize,
        label: String,
    },
    #[error("{file}:{line}: verdict references missing post id '{post_id}'")]
    DanglingPost {
        file: String,
        line: usize,
        post_id: String,
    },
    #[error("{file}:{line}: duplicate verdict for post '{post_id}' by annotator '{annotator_id}'")]
    DuplicateVerdict {
        file: String,
        line: usize,
        post_id: String,
        annotator_id: String,
    },
    #[error("{file}:{line}: post '{id}' has an empty title")]
    EmptyTitle {
        file: String,
        line: usize,
        id: String,
    },
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("cannot split {groups} groups into 3 partitions")]
    TooFewGroups { groups: usize },
    #[error("split file: {0}")]
    SplitFormat(String),
}

/// Verdict label. Index 0 is YTA, index 1 is NTA throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "YTA")]
    Yta,
    #[serde(rename = "NTA")]
    Nta,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Yta, Label::Nta];

    pub fn index(self) -> usize {
        match self {
            Label::Yta => 0,
            Label::Nta => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Yta
        } else {
            Label::Nta
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yta => "YTA",
            Label::Nta => "NTA",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "YTA" => Some(Label::Yta),
            "NTA" => Some(Label::Nta),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub author_id: String,
    pub title: String,
    pub body: String,
}

impl Post {
    /// Title and body joined, the text used for post embeddings.
    pub fn full_text(&self) -> String {
        if self.body.is_empty() {
            self.title.clone()
        } else {
            format!("{}\n{}", self.title, self.body)
        }
    }
}

/// Background comment written by an annotator. `post_id` is optional and,
/// when present, names the post the comment was written under; such comments
/// are excluded from context for that post.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub author_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<String>,
    #[serde(skip)]
    sentences: OnceLock<Vec<Range<usize>>>,
}

impl PartialEq for Comment {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.author_id == other.author_id
            && self.text == other.text
            && self.post_id == other.post_id
    }
}

impl Comment {
    pub fn new(id: impl Into<String>, author_id: impl Into<String>, text: impl Into<String>) -> Self {
        Comment {
            id: id.into(),
            author_id: author_id.into(),
            text: text.into(),
            post_id: None,
            sentences: OnceLock::new(),
        }
    }

    pub fn with_post(mut self, post_id: impl Into<String>) -> Self {
        self.post_id = Some(post_id.into());
        self
    }

    /// Sentence spans (byte ranges into `text`), segmented on first use.
    pub fn sentences(&self) -> &[Range<usize>] {
        self.sentences
            .get_or_init(|| crate::disclosure::segment_sentences(&self.text))
    }

    pub fn sentence_text(&self, index: usize) -> Option<&str> {
        self.sentences().get(index).map(|r| &self.text[r.clone()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub post_id: String,
    pub annotator_id: String,
    pub label: Label,
    #[serde(default)]
    pub justification: String,
}

impl Verdict {
    pub fn key(&self) -> String {
        format!("{}|{}", self.post_id, self.annotator_id)
    }
}

/// Counts produced while building a corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub posts: usize,
    pub comments: usize,
    pub verdicts: usize,
    pub annotators: usize,
    /// Line numbers (1-based, in the verdict file) of verdicts dropped
    /// because the annotator authored the post.
    pub self_edges_dropped: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    posts: BTreeMap<String, Post>,
    comments: BTreeMap<String, Comment>,
    verdicts: Vec<Verdict>,
    annotator_index: BTreeMap<String, Vec<String>>,
}

const MEMORY: &str = "<memory>";

impl Corpus {
    /// Builds a corpus from in-memory records, applying the same validation
    /// as [`ingest_corpus`]. Line numbers in errors are 1-based positions in
    /// the given vectors.
    pub fn from_records(
        posts: Vec<Post>,
        comments: Vec<Comment>,
        verdicts: Vec<Verdict>,
    ) -> Result<(Corpus, IngestReport), CorpusError> {
        let posts = posts.into_iter().enumerate().map(|(i, p)| (i + 1, p)).collect();
        let comments = comments.into_iter().enumerate().map(|(i, c)| (i + 1, c)).collect();
        let verdicts = verdicts.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect();
        Self::build(
            posts,
            comments,
            verdicts,
            [MEMORY.to_string(), MEMORY.to_string(), MEMORY.to_string()],
        )
    }

    fn build(
        posts: Vec<(usize, Post)>,
        comments: Vec<(usize, Comment)>,
        verdicts: Vec<(usize, Verdict)>,
        files: [String; 3],
    ) -> Result<(Corpus, IngestReport), CorpusError> {
        let [post_file, comment_file, verdict_file] = files;
        let mut post_map = BTreeMap::new();
        for (line, post) in posts {
            if post.title.trim().is_empty() {
                return Err(CorpusError::EmptyTitle {
                    file: post_file,
                    line,
                    id: post.id,
                });
            }
            if post_map.contains_key(&post.id) {
                return Err(CorpusError::DuplicateId {
                    file: post_file,
                    line,
                    kind: "post",
                    id: post.id,
                });
            }
            post_map.insert(post.id.clone(), post);
        }

        let mut comment_map = BTreeMap::new();
        let mut annotator_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (line, comment) in comments {
            if comment_map.contains_key(&comment.id) {
                return Err(CorpusError::DuplicateId {
                    file: comment_file,
                    line,
                    kind: "comment",
                    id: comment.id,
                });
            }
            annotator_index
                .entry(comment.author_id.clone())
                .or_default()
                .push(comment.id.clone());
            comment_map.insert(comment.id.clone(), comment);
        }
        for ids in annotator_index.values_mut() {
            ids.sort();
        }

        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(verdicts.len());
        let mut self_edges = Vec::new();
        for (line, verdict) in verdicts {
            let Some(post) = post_map.get(&verdict.post_id) else {
                return Err(CorpusError::DanglingPost {
                    file: verdict_file,
                    line,
                    post_id: verdict.post_id,
                });
            };
            if !seen.insert((verdict.post_id.clone(), verdict.annotator_id.clone())) {
                return Err(CorpusError::DuplicateVerdict {
                    file: verdict_file,
                    line,
                    post_id: verdict.post_id,
                    annotator_id: verdict.annotator_id,
                });
            }
            if post.author_id == verdict.annotator_id {
                self_edges.push(line);
                continue;
            }
            annotator_index.entry(verdict.annotator_id.clone()).or_default();
            kept.push(verdict);
        }
        if !self_edges.is_empty() {
            log::warn!(
                "dropped {} verdicts where the annotator authored the post",
                self_edges.len()
            );
        }

        let corpus = Corpus {
            posts: post_map,
            comments: comment_map,
            verdicts: kept,
            annotator_index,
        };
        let report = IngestReport {
            posts: corpus.posts.len(),
            comments: corpus.comments.len(),
            verdicts: corpus.verdicts.len(),
            annotators: corpus.annotators().count(),
            self_edges_dropped: self_edges,
        };
        Ok((corpus, report))
    }

    pub fn posts(&self) -> &BTreeMap<String, Post> {
        &self.posts
    }

    pub fn post(&self, id: &str) -> Option<&Post> {
        self.posts.get(id)
    }

    pub fn comments(&self) -> &BTreeMap<String, Comment> {
        &self.comments
    }

    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comments.get(id)
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn annotator_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.annotator_index
    }

    /// Comment ids written by `annotator`, sorted.
    pub fn comments_of(&self, annotator: &str) -> &[String] {
        self.annotator_index
            .get(annotator)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Distinct annotators that have at least one verdict, sorted.
    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        let set: BTreeSet<&str> = self.verdicts.iter().map(|v| v.annotator_id.as_str()).collect();
        set.into_iter()
    }

    /// Writes the three JSONL files into `dir` as posts.jsonl,
    /// comments.jsonl and verdicts.jsonl.
    pub fn write_jsonl(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(File::create(dir.join("posts.jsonl"))?);
        for p in self.posts.values() {
            writeln!(w, "{}", serde_json::to_string(p)?)?;
        }
        w.flush()?;
        let mut w = std::io::BufWriter::new(File::create(dir.join("comments.jsonl"))?);
        for c in self.comments.values() {
            writeln!(w, "{}", serde_json::to_string(c)?)?;
        }
        w.flush()?;
        let mut w = std::io::BufWriter::new(File::create(dir.join("verdicts.jsonl"))?);
        for v in &self.verdicts {
            writeln!(w, "{}", serde_json::to_string(v)?)?;
        }
        w.flush()
    }
}

fn read_jsonl<T, F>(path: &Path, mut parse: F) -> Result<Vec<(usize, T)>, CorpusError>
where
    F: FnMut(&str, usize, serde_json::Value) -> Result<T, CorpusError>,
{
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                file: name.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        out.push((line_no, parse(&name, line_no, value)?));
    }
    Ok(out)
}

fn from_value<T: serde::de::DeserializeOwned>(
    file: &str,
    line: usize,
    value: serde_json::Value,
) -> Result<T, CorpusError> {
    serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
        file: file.to_string(),
        line,
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
struct RawVerdict {
    post_id: String,
    annotator_id: String,
    label: String,
    #[serde(default)]
    justification: String,
}

/// Reads posts.jsonl, comments.jsonl and verdicts.jsonl into a validated
/// corpus. Any malformed line is a hard error naming the file and line.
pub fn ingest_corpus(
    posts_path: &Path,
    comments_path: &Path,
    verdicts_path: &Path,
) -> Result<(Corpus, IngestReport), CorpusError> {
    let posts = read_jsonl(posts_path, from_value::<Post>)?;
    let comments = read_jsonl(comments_path, from_value::<Comment>)?;
    let verdicts = read_jsonl(verdicts_path, |file, line, value| {
        let raw: RawVerdict = from_value(file, line, value)?;
        let label = Label::parse(&raw.label).ok_or_else(|| CorpusError::UnknownLabel {
            file: file.to_string(),
            line,
            label: raw.label.clone(),
        })?;
        Ok(Verdict {
            post_id: raw.post_id,
            annotator_id: raw.annotator_id,
            label,
            justification: raw.justification,
        })
    })?;
    Corpus::build(
        posts,
        comments,
        verdicts,
        [
            posts_path.display().to_string(),
            comments_path.display().to_string(),
            verdicts_path.display().to_string(),
        ],
    )
}

/// Convenience wrapper for a directory holding the three standard files.
pub fn ingest_dir(dir: &Path) -> Result<(Corpus, IngestReport), CorpusError> {
    ingest_corpus(
        &dir.join("posts.jsonl"),
        &dir.join("comments.jsonl"),
        &dir.join("verdicts.jsonl"),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub retained_annotators: usize,
    pub dropped_annotators: Vec<String>,
    pub dropped_verdicts: usize,
}

/// Keeps only verdicts whose annotator wrote between `min_comments` and
/// `max_comments` background comments (inclusive). Posts and comments are
/// retained unchanged.
pub fn filter_annotators(c: &Corpus, min_comments: usize, max_comments: usize) -> (Corpus, FilterReport) {
    assert!(min_comments <= max_comments, "filter bounds reversed");
    let keep = |a: &str| {
        let n = c.comments_of(a).len();
        (min_comments..=max_comments).contains(&n)
    };
    let mut report = FilterReport::default();
    let mut retained = BTreeSet::new();
    let mut dropped = BTreeSet::new();
    let verdicts: Vec<Verdict> = c
        .verdicts
        .iter()
        .filter(|v| {
            if keep(&v.annotator_id) {
                retained.insert(v.annotator_id.as_str());
                true
            } else {
                dropped.insert(v.annotator_id.clone());
                report.dropped_verdicts += 1;
                false
            }
        })
        .cloned()
        .collect();
    report.retained_annotators = retained.len();
    report.dropped_annotators = dropped.into_iter().collect();
    let out = Corpus {
        posts: c.posts.clone(),
        comments: c.comments.clone(),
        verdicts,
        annotator_index: c.annotator_index.clone(),
    };
    (out, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    /// Verdicts assigned independently; posts and annotators may recur.
    Verdict,
    /// Posts disjoint across partitions.
    Situation,
    /// Annotators disjoint across partitions.
    Author,
}

impl std::str::FromStr for SplitKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verdict" => Ok(SplitKind::Verdict),
            "situation" => Ok(SplitKind::Situation),
            "author" => Ok(SplitKind::Author),
            other => Err(format!("unknown split kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    fn index(self) -> usize {
        match self {
            Partition::Train => 0,
            Partition::Val => 1,
            Partition::Test => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub assignment: BTreeMap<usize, Partition>,
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    /// Verdict indices in `p`, ascending.
    pub fn indices(&self, p: Partition) -> Vec<usize> {
        self.assignment
            .iter()
            .filter(|(_, &q)| q == p)
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for p in self.assignment.values() {
            counts[p.index()] += 1;
        }
        counts
    }

    /// JSONL: a header object `{kind, ratios, seed}` followed by one
    /// `{verdict_index, partition}` object per verdict.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::json!({
            "kind": self.kind,
            "ratios": self.ratios,
            "seed": self.seed,
        });
        writeln!(w, "{header}")?;
        for (i, p) in &self.assignment {
            writeln!(w, "{}", serde_json::json!({"verdict_index": i, "partition": p}))?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<SplitSpec, CorpusError> {
        #[derive(Deserialize)]
        struct Header {
            kind: SplitKind,
            ratios: [f64; 3],
            seed: u64,
        }
        #[derive(Deserialize)]
        struct Row {
            verdict_index: usize,
            partition: Partition,
        }
        let fmt_err = |line: usize, e: &dyn fmt::Display| CorpusError::SplitFormat(format!("line {line}: {e}"));
        let mut lines = r.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true)
        });
        let (_, first) = lines
            .next()
            .ok_or_else(|| CorpusError::SplitFormat("missing header".into()))?;
        let first = first.map_err(|e| fmt_err(1, &e))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| fmt_err(1, &e))?;
        let mut assignment = BTreeMap::new();
        for (i, line) in lines {
            let line = line.map_err(|e| fmt_err(i + 1, &e))?;
            let row: Row = serde_json::from_str(&line).map_err(|e| fmt_err(i + 1, &e))?;
            if assignment.insert(row.verdict_index, row.partition).is_some() {
                return Err(fmt_err(i + 1, &format!("verdict {} assigned twice", row.verdict_index)));
            }
        }
        Ok(SplitSpec {
            kind: header.kind,
            assignment,
            ratios: header.ratios,
            seed: header.seed,
        })
    }
}

fn validate_ratios(ratios: [f64; 3]) -> Result<(), CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    Ok(())
}

/// Assigns every verdict of `c` to train/val/test.
///
/// `Verdict` shuffles verdicts and cuts at the rounded ratio boundaries.
/// `Situation` and `Author` group verdicts by post or annotator, shuffle the
/// groups, and hand each group to the partition currently furthest below its
/// verdict-count target.
pub fn make_split(c: &Corpus, kind: SplitKind, ratios: [f64; 3], seed: u64) -> Result<SplitSpec, CorpusError> {
    validate_ratios(ratios)?;
    let n = c.verdicts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    match kind {
        SplitKind::Verdict => {
            if n < 3 {
                return Err(CorpusError::TooFewGroups { groups: n });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let n_train = (ratios[0] * n as f64).round() as usize;
            let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
            for (pos, &i) in order.iter().enumerate() {
                let p = if pos < n_train {
                    Partition::Train
                } else if pos < n_train + n_val {
                    Partition::Val
                } else {
                    Partition::Test
                };
                assignment.insert(i, p);
            }
        }
        SplitKind::Situation | SplitKind::Author => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, v) in c.verdicts.iter().enumerate() {
                let key = if kind == SplitKind::Situation {
                    v.post_id.as_str()
                } else {
                    v.annotator_id.as_str()
                };
                groups.entry(key).or_default().push(i);
            }
            if groups.len() < 3 {
                return Err(CorpusError::TooFewGroups { groups: groups.len() });
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            let targets = ratios.map(|r| r * n as f64);
            let mut filled = [0usize; 3];
            for group in groups {
                let p = (0..3)
                    .max_by(|&a, &b| {
                        let da = targets[a] - filled[a] as f64;
                        let db = targets[b] - filled[b] as f64;
                        // prefer lower partition index on ties
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                filled[p] += group.len();
                for i in group {
                    assignment.insert(i, Partition::ALL[p]);
                }
            }
        }
    }
    Ok(SplitSpec {
        kind,
        assignment,
        ratios,
        seed,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitViolations {
    /// Verdict indices of the corpus with no partition.
    pub unassigned: Vec<usize>,
    /// Assigned indices that do not exist in the corpus.
    pub out_of_range: Vec<usize>,
    /// Post ids present in more than one partition (situation splits).
    pub shared_posts: Vec<String>,
    /// Annotator ids present in more than one partition (author splits).
    pub shared_annotators: Vec<String>,
}

impl SplitViolations {
    pub fn is_empty(&self) -> bool {
        self.unassigned.is_empty()
            && self.out_of_range.is_empty()
            && self.shared_posts.is_empty()
            && self.shared_annotators.is_empty()
    }
}

/// Checks every [`SplitSpec`] invariant against `c`.
pub fn verify_split(s: &SplitSpec, c: &Corpus) -> SplitViolations {
    let n = c.verdicts.len();
    let mut report = SplitViolations {
        unassigned: (0..n).filter(|i| !s.assignment.contains_key(i)).collect(),
        out_of_range: s.assignment.keys().copied().filter(|&i| i >= n).collect(),
        ..Default::default()
    };
    let shared = |key: fn(&Verdict) -> &str| -> Vec<String> {
        let mut seen: BTreeMap<&str, BTreeSet<Partition>> = BTreeMap::new();
        for (&i, &p) in &s.assignment {
            if let Some(v) = c.verdicts.get(i) {
                seen.entry(key(v)).or_default().insert(p);
            }
        }
        seen.into_iter()
            .filter(|(_, ps)| ps.len() > 1)
            .map(|(k, _)| k.to_string())
            .collect()
    };
    match s.kind {
        SplitKind::Verdict => {}
        SplitKind::Situation => report.shared_posts = shared(|v| v.post_id.as_str()),
        SplitKind::Author => report.shared_annotators = shared(|v| v.annotator_id.as_str()),
    }
    report
}
