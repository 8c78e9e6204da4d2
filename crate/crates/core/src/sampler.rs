//! Per-(annotator, post) context selection and sampling analytics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::Hasher;
use std::io::{BufRead, Write};
use std::str::FromStr;

use fnv::FnvHasher;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::disclosure::{HighLevelCategory, ProfileIndex};
use crate::embed::{embed_batch, rank_rows, EmbedError, EmbedderConfig, EmbeddingMatrix};

/// Category-filtered sampling was only ever run with five similar comments.
pub const REPLICATION_CAP: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("unknown post {0}")]
    UnknownPost(String),
    #[error("no embedding for {0}")]
    MissingEmbedding(String),
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed context dump: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RandomComments,
    RandomSentences,
    SimilarComments,
    SimilarSentences,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::RandomComments,
        Strategy::RandomSentences,
        Strategy::SimilarComments,
        Strategy::SimilarSentences,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RandomComments => "random_comments",
            Strategy::RandomSentences => "random_sentences",
            Strategy::SimilarComments => "similar_comments",
            Strategy::SimilarSentences => "similar_sentences",
        }
    }

    pub fn is_similar(self) -> bool {
        matches!(self, Strategy::SimilarComments | Strategy::SimilarSentences)
    }

    pub fn is_sentence(self) -> bool {
        matches!(self, Strategy::RandomSentences | Strategy::SimilarSentences)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SamplerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| SamplerError::Config(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryFilter {
    Theory(HighLevelCategory),
    Cluster(usize),
}

impl CategoryFilter {
    pub fn admits(&self, profiles: &ProfileIndex, comment_id: &str) -> bool {
        let Some(p) = profiles.get(comment_id) else { return false };
        match self {
            CategoryFilter::Theory(c) => p.theory_categories.contains(c),
            CategoryFilter::Cluster(k) => p.cluster_id == Some(*k),
        }
    }
}

impl fmt::Display for CategoryFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoryFilter::Theory(c) => write!(f, "{c}"),
            CategoryFilter::Cluster(k) => write!(f, "cluster_{k}"),
        }
    }
}

impl FromStr for CategoryFilter {
    type Err = SamplerError;
    /// Accepts a theory category name or `cluster_<n>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(c) = HighLevelCategory::parse(s) {
            return Ok(CategoryFilter::Theory(c));
        }
        s.strip_prefix("cluster_")
            .and_then(|n| n.parse().ok())
            .map(CategoryFilter::Cluster)
            .ok_or_else(|| SamplerError::Config(format!("unknown category '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub max_samples: usize,
    pub category_filter: Option<CategoryFilter>,
    pub seed: u64,
    /// When set, category filters are only allowed with similar_comments
    /// and at most five samples.
    pub replication_mode: bool,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, max_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            strategy,
            max_samples,
            category_filter: None,
            seed,
            replication_mode: true,
        }
    }

    pub fn with_filter(mut self, f: CategoryFilter) -> Self {
        self.category_filter = Some(f);
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.max_samples == 0 {
            return Err(SamplerError::Config("max_samples must be positive".into()));
        }
        if self.category_filter.is_some()
            && (self.strategy != Strategy::SimilarComments || self.max_samples > REPLICATION_CAP)
        {
            let msg = format!(
                "category filter used with {} and max_samples {} (replication runs use similar_comments with at most {REPLICATION_CAP})",
                self.strategy, self.max_samples
            );
            if self.replication_mode {
                return Err(SamplerError::Config(msg));
            }
            log::warn!("{msg}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub source_comment_id: String,
    /// Comment id, or `<comment_id>#<sentence index>` for sentence items.
    pub item_id: String,
    pub text: String,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSet {
    pub annotator_id: String,
    pub post_id: String,
    pub items: Vec<ContextItem>,
}

pub fn sentence_id(comment_id: &str, index: usize) -> String {
    format!("{comment_id}#{index}")
}

/// Embeddings for posts, comments and (optionally) sentences, with id
/// lookups.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub posts: EmbeddingMatrix,
    pub comments: EmbeddingMatrix,
    pub sentences: Option<EmbeddingMatrix>,
    post_pos: HashMap<String, usize>,
    comment_pos: HashMap<String, usize>,
    sentence_pos: HashMap<String, usize>,
}

fn positions(m: &EmbeddingMatrix) -> HashMap<String, usize> {
    m.ids().iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

impl EmbeddingStore {
    pub fn new(posts: EmbeddingMatrix, comments: EmbeddingMatrix, sentences: Option<EmbeddingMatrix>) -> Result<Self, SamplerError> {
        let dims: Vec<usize> = [Some(&posts), Some(&comments), sentences.as_ref()]
            .into_iter()
            .flatten()
            .map(EmbeddingMatrix::dim)
            .collect();
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(SamplerError::Embed(EmbedError::DimMismatch(dims[0], *dims.iter().max().unwrap())));
        }
        Ok(EmbeddingStore {
            post_pos: positions(&posts),
            comment_pos: positions(&comments),
            sentence_pos: sentences.as_ref().map(positions).unwrap_or_default(),
            posts,
            comments,
            sentences,
        })
    }

    /// Embeds post title+body, every comment and, if asked, every sentence
    /// with the hashed n-gram embedder.
    pub fn build(corpus: &Corpus, cfg: &EmbedderConfig, with_sentences: bool) -> Result<Self, SamplerError> {
        let posts: Vec<(String, String)> = corpus.posts().values().map(|p| (p.id.clone(), p.full_text())).collect();
        let comments: Vec<(String, String)> = corpus.comments().values().map(|c| (c.id.clone(), c.text.clone())).collect();
        let sentences = if with_sentences {
            let items: Vec<(String, String)> = corpus
                .comments()
                .values()
                .flat_map(|c| {
                    c.sentences()
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (sentence_id(&c.id, i), c.text[r.clone()].to_string()))
                        .collect::<Vec<_>>()
                })
                .collect();
            Some(embed_batch(&items, cfg)?)
        } else {
            None
        };
        Self::new(embed_batch(&posts, cfg)?, embed_batch(&comments, cfg)?, sentences)
    }

    pub fn dim(&self) -> usize {
        self.posts.dim()
    }

    pub fn post_row(&self, id: &str) -> Option<&[f32]> {
        self.post_pos.get(id).map(|&i| self.posts.row(i))
    }

    pub fn comment_row(&self, id: &str) -> Option<&[f32]> {
        self.comment_pos.get(id).map(|&i| self.comments.row(i))
    }

    pub fn sentence_row(&self, id: &str) -> Option<&[f32]> {
        self.sentence_pos.get(id).map(|&i| self.sentences.as_ref().unwrap().row(i))
    }

    /// Embedding row of a context item, whichever table it lives in.
    pub fn item_row(&self, item_id: &str) -> Option<&[f32]> {
        self.comment_row(item_id).or_else(|| self.sentence_row(item_id))
    }

    fn comment_index(&self, id: &str) -> Option<usize> {
        self.comment_pos.get(id).copied()
    }

    fn sentence_index(&self, id: &str) -> Option<usize> {
        self.sentence_pos.get(id).copied()
    }
}

/// Deterministic per-pair RNG derived from `(seed, annotator, post)`.
pub fn pair_rng(seed: u64, annotator: &str, post: &str) -> ChaCha8Rng {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(annotator.as_bytes());
    h.write_u8(0);
    h.write(post.as_bytes());
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// The annotator's comments usable as context for `post`: everything they
/// wrote except comments on the target post, optionally restricted to a
/// category.
pub fn candidate_comments<'a>(
    corpus: &'a Corpus,
    annotator: &str,
    post: &str,
    profiles: &ProfileIndex,
    filter: Option<&CategoryFilter>,
) -> Vec<&'a str> {
    corpus
        .comments_of(annotator)
        .iter()
        .filter(|id| {
            let c = corpus.comment(id).expect("indexed comment exists");
            c.post_id.as_deref() != Some(post)
        })
        .filter(|id| filter.is_none_or(|f| f.admits(profiles, id)))
        .map(String::as_str)
        .collect()
}

/// Selects the context for one (annotator, post) pair.
pub fn sample_context(
    annotator: &str,
    post: &str,
    corpus: &Corpus,
    store: &EmbeddingStore,
    profiles: &ProfileIndex,
    cfg: &SamplerConfig,
) -> Result<ContextSet, SamplerError> {
    cfg.validate()?;
    if !corpus.annotator_index().contains_key(annotator) && !corpus.annotators().any(|a| a == annotator) {
        return Err(SamplerError::UnknownAnnotator(annotator.to_string()));
    }
    if corpus.post(post).is_none() {
        return Err(SamplerError::UnknownPost(post.to_string()));
    }
    let comments = candidate_comments(corpus, annotator, post, profiles, cfg.category_filter.as_ref());

    // (item id, source comment, text)
    let pool: Vec<(String, &str, String)> = if cfg.strategy.is_sentence() {
        comments
            .iter()
            .flat_map(|&cid| {
                let c = corpus.comment(cid).unwrap();
                c.sentences()
                    .iter()
                    .enumerate()
                    .map(move |(i, r)| (sentence_id(cid, i), cid, c.text[r.clone()].to_string()))
            })
            .collect()
    } else {
        comments
            .iter()
            .map(|&cid| (cid.to_string(), cid, corpus.comment(cid).unwrap().text.clone()))
            .collect()
    };

    let items = if cfg.strategy.is_similar() {
        let query = store
            .post_row(post)
            .ok_or_else(|| SamplerError::MissingEmbedding(post.to_string()))?;
        let (matrix, rows) = if cfg.strategy.is_sentence() {
            let m = store
                .sentences
                .as_ref()
                .ok_or_else(|| SamplerError::MissingEmbedding("sentence table".into()))?;
            let rows = pool
                .iter()
                .map(|(id, _, _)| store.sentence_index(id).ok_or_else(|| SamplerError::MissingEmbedding(id.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            (m, rows)
        } else {
            let rows = pool
                .iter()
                .map(|(id, _, _)| store.comment_index(id).ok_or_else(|| SamplerError::MissingEmbedding(id.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            (&store.comments, rows)
        };
        let by_row: HashMap<usize, usize> = rows.iter().enumerate().map(|(p, &r)| (r, p)).collect();
        rank_rows(query, matrix, &rows, cfg.max_samples)
            .into_iter()
            .map(|(r, s)| {
                let (id, src, text) = &pool[by_row[&r]];
                ContextItem {
                    source_comment_id: src.to_string(),
                    item_id: id.clone(),
                    text: text.clone(),
                    similarity: Some(s),
                }
            })
            .collect()
    } else {
        let mut rng = pair_rng(cfg.seed, annotator, post);
        pool.choose_multiple(&mut rng, cfg.max_samples)
            .map(|(id, src, text)| ContextItem {
                source_comment_id: src.to_string(),
                item_id: id.clone(),
                text: text.clone(),
                similarity: None,
            })
            .collect()
    };
    Ok(ContextSet {
        annotator_id: annotator.to_string(),
        post_id: post.to_string(),
        items,
    })
}

/// How the annotator is represented to the classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextCondition {
    NoComments,
    AllComments,
    Sampled(SamplerConfig),
}

impl ContextCondition {
    pub fn label(&self) -> String {
        match self {
            ContextCondition::NoComments => "no_comments".into(),
            ContextCondition::AllComments => "all_comments".into(),
            ContextCondition::Sampled(c) => match &c.category_filter {
                Some(f) => format!("{}_{}_{}", c.strategy, c.max_samples, f),
                None => format!("{}_{}", c.strategy, c.max_samples),
            },
        }
    }
}

pub fn build_context(
    condition: &ContextCondition,
    annotator: &str,
    post: &str,
    corpus: &Corpus,
    store: &EmbeddingStore,
    profiles: &ProfileIndex,
) -> Result<ContextSet, SamplerError> {
    let items = match condition {
        ContextCondition::NoComments => Vec::new(),
        ContextCondition::AllComments => candidate_comments(corpus, annotator, post, profiles, None)
            .into_iter()
            .map(|cid| ContextItem {
                source_comment_id: cid.to_string(),
                item_id: cid.to_string(),
                text: corpus.comment(cid).unwrap().text.clone(),
                similarity: None,
            })
            .collect(),
        ContextCondition::Sampled(cfg) => return sample_context(annotator, post, corpus, store, profiles, cfg),
    };
    Ok(ContextSet {
        annotator_id: annotator.to_string(),
        post_id: post.to_string(),
        items,
    })
}

#[derive(Serialize, Deserialize)]
struct DumpItem {
    comment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    item_id: Option<String>,
    similarity: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DumpRow {
    annotator_id: String,
    post_id: String,
    items: Vec<DumpItem>,
}

/// One JSON line per context set, without item texts.
pub fn write_contexts_jsonl<W: Write>(sets: &[ContextSet], mut w: W) -> std::io::Result<()> {
    for s in sets {
        let row = DumpRow {
            annotator_id: s.annotator_id.clone(),
            post_id: s.post_id.clone(),
            items: s
                .items
                .iter()
                .map(|i| DumpItem {
                    comment_id: i.source_comment_id.clone(),
                    item_id: (i.item_id != i.source_comment_id).then(|| i.item_id.clone()),
                    similarity: i.similarity,
                })
                .collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&row)?)?;
    }
    w.flush()
}

/// Reads a context dump, restoring item texts from the corpus.
pub fn read_contexts_jsonl<R: BufRead>(r: R, corpus: &Corpus) -> Result<Vec<ContextSet>, SamplerError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DumpRow = serde_json::from_str(&line).map_err(|e| SamplerError::Format(format!("line {}: {e}", n + 1)))?;
        let items = row
            .items
            .into_iter()
            .map(|i| {
                let c = corpus
                    .comment(&i.comment_id)
                    .ok_or_else(|| SamplerError::Format(format!("line {}: unknown comment {}", n + 1, i.comment_id)))?;
                let item_id = i.item_id.unwrap_or_else(|| i.comment_id.clone());
                let text = match item_id.rsplit_once('#') {
                    Some((_, idx)) if item_id != i.comment_id => idx
                        .parse::<usize>()
                        .ok()
                        .and_then(|k| c.sentence_text(k))
                        .ok_or_else(|| SamplerError::Format(format!("line {}: bad sentence id {item_id}", n + 1)))?
                        .to_string(),
                    _ => c.text.clone(),
                };
                Ok(ContextItem {
                    source_comment_id: i.comment_id,
                    item_id,
                    text,
                    similarity: i.similarity,
                })
            })
            .collect::<Result<Vec<_>, SamplerError>>()?;
        out.push(ContextSet {
            annotator_id: row.annotator_id,
            post_id: row.post_id,
            items,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub tag: String,
    pub percent: f64,
}

/// Share of sampled items per category tag.
///
/// Theory rows may sum above 100 because a comment can carry several
/// categories; `none_theory` counts items with none. Cluster rows plus
/// `none_cluster` (comments never clustered) sum to 100.
pub fn category_coverage(contexts: &[ContextSet], profiles: &ProfileIndex) -> Vec<CoverageRow> {
    let k = profiles.values().filter_map(|p| p.cluster_id).max().map_or(0, |m| m + 1);
    let mut theory = BTreeMap::<HighLevelCategory, usize>::new();
    let mut clusters = vec![0usize; k];
    let (mut none_theory, mut none_cluster, mut total) = (0usize, 0usize, 0usize);
    for item in contexts.iter().flat_map(|c| &c.items) {
        total += 1;
        let p = profiles.get(&item.source_comment_id);
        match p.filter(|p| !p.theory_categories.is_empty()) {
            Some(p) => p.theory_categories.iter().for_each(|c| *theory.entry(*c).or_default() += 1),
            None => none_theory += 1,
        }
        match p.and_then(|p| p.cluster_id) {
            Some(c) => clusters[c] += 1,
            None => none_cluster += 1,
        }
    }
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let mut rows: Vec<CoverageRow> = HighLevelCategory::ALL
        .iter()
        .map(|c| CoverageRow {
            tag: c.name().to_string(),
            percent: pct(theory.get(c).copied().unwrap_or(0)),
        })
        .collect();
    rows.push(CoverageRow {
        tag: "none_theory".into(),
        percent: pct(none_theory),
    });
    rows.extend(clusters.iter().enumerate().map(|(i, &n)| CoverageRow {
        tag: format!("cluster_{i}"),
        percent: pct(n),
    }));
    rows.push(CoverageRow {
        tag: "none_cluster".into(),
        percent: pct(none_cluster),
    });
    rows
}

/// Five-number summary with Tukey whiskers (1.5 IQR, clipped to the data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo = q1 - 1.5 * iqr;
        let hi = q3 + 1.5 * iqr;
        Some(BoxStats {
            n: v.len(),
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: v.iter().copied().find(|&x| x >= lo).unwrap(),
            whisker_high: v.iter().rev().copied().find(|&x| x <= hi).unwrap(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorDiversity {
    pub annotator_id: String,
    pub pool: usize,
    pub distinct_sampled: usize,
    pub coverage_pct: f64,
    pub rank_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub per_annotator: Vec<AnnotatorDiversity>,
    pub coverage: Option<BoxStats>,
    pub rank_ratio: Option<BoxStats>,
}

/// How much of each annotator's history the sampler actually uses, and
/// how dominant their most frequently sampled comment is.
pub fn similar_post_diversity(contexts: &[ContextSet], corpus: &Corpus) -> DiversityReport {
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for set in contexts {
        let per = counts.entry(set.annotator_id.as_str()).or_default();
        for item in &set.items {
            *per.entry(item.source_comment_id.as_str()).or_default() += 1;
        }
    }
    let per_annotator: Vec<AnnotatorDiversity> = counts
        .into_iter()
        .map(|(a, per)| {
            let pool = corpus.comments_of(a).len();
            let mut freq: Vec<usize> = per.values().copied().collect();
            freq.sort_unstable_by(|x, y| y.cmp(x));
            AnnotatorDiversity {
                annotator_id: a.to_string(),
                pool,
                distinct_sampled: per.len(),
                coverage_pct: if pool == 0 { 0.0 } else { 100.0 * per.len() as f64 / pool as f64 },
                rank_ratio: (freq.len() >= 2).then(|| freq[0] as f64 / freq[1] as f64),
            }
        })
        .collect();
    let cov: Vec<f64> = per_annotator.iter().map(|d| d.coverage_pct).collect();
    let rr: Vec<f64> = per_annotator.iter().filter_map(|d| d.rank_ratio).collect();
    DiversityReport {
        coverage: BoxStats::of(&cov),
        rank_ratio: BoxStats::of(&rr),
        per_annotator,
    }
}

/// Percentage of annotators (those with verdicts) holding at least five
/// comments that pass `filter`.
pub fn five_plus_pct(corpus: &Corpus, profiles: &ProfileIndex, filter: Option<&CategoryFilter>) -> f64 {
    let annotators: Vec<&str> = corpus.annotators().collect();
    if annotators.is_empty() {
        return 0.0;
    }
    let hits = annotators
        .iter()
        .filter(|a| {
            corpus
                .comments_of(a)
                .iter()
                .filter(|id| filter.is_none_or(|f| f.admits(profiles, id)))
                .count()
                >= 5
        })
        .count();
    100.0 * hits as f64 / annotators.len() as f64
}

pub fn write_coverage_tsv<W: Write>(rows: &[CoverageRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "tag\tpercent")?;
    for r in rows {
        writeln!(w, "{}\t{:.4}", r.tag, r.percent)?;
    }
    w.flush()
}

pub fn write_diversity_tsv<W: Write>(r: &DiversityReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "metric\tn\tmin\twhisker_low\tq1\tmedian\tq3\twhisker_high\tmax")?;
    for (name, b) in [("coverage_pct", r.coverage), ("rank_ratio", r.rank_ratio)] {
        match b {
            Some(b) => writeln!(
                w,
                "{name}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                b.n, b.min, b.whisker_low, b.q1, b.median, b.q3, b.whisker_high, b.max
            )?,
            None => writeln!(w, "{name}\t0\t\t\t\t\t\t\t")?,
        }
    }
    writeln!(w)?;
    writeln!(w, "annotator_id\tpool\tdistinct_sampled\tcoverage_pct\trank_ratio")?;
    for d in &r.per_annotator {
        let rr = d.rank_ratio.map(|x| format!("{x:.4}")).unwrap_or_default();
        writeln!(
            w,
            "{}\t{}\t{}\t{:.4}\t{rr}",
            d.annotator_id, d.pool, d.distinct_sampled, d.coverage_pct
        )?;
    }
    w.flush()
}

/// Ids of every comment that appears in some context set.
pub fn sampled_comment_ids(contexts: &[ContextSet]) -> BTreeSet<&str> {
    contexts
        .iter()
        .flat_map(|c| c.items.iter().map(|i| i.source_comment_id.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, Label, Post, Verdict};
    use crate::disclosure::CategoryProfile;

    fn corpus() -> Corpus {
        let posts = vec![
            Post {
                id: "p1".into(),
                author_id: "op".into(),
                title: "loud party".into(),
                body: "my neighbor threw a loud party at night".into(),
            },
            Post {
                id: "p2".into(),
                author_id: "op".into(),
                title: "money".into(),
                body: "lent money to a friend".into(),
            },
        ];
        let comments = vec![
            Comment::new("c1", "a", "I hate loud parties at night. Truly."),
            Comment::new("c2", "a", "Money is hard to lend"),
            Comment::new("c3", "a", "NTA the party was loud").with_post("p1"),
        ];
        let verdicts = vec![Verdict {
            post_id: "p1".into(),
            annotator_id: "a".into(),
            label: Label::Nta,
            justification: String::new(),
        }];
        Corpus::from_records(posts, comments, verdicts).unwrap().0
    }

    fn store(c: &Corpus) -> EmbeddingStore {
        let cfg = EmbedderConfig {
            dim: 256,
            ..Default::default()
        };
        EmbeddingStore::build(c, &cfg, true).unwrap()
    }

    #[test]
    fn excludes_target_post_and_ranks() {
        let c = corpus();
        let s = store(&c);
        let cfg = SamplerConfig::new(Strategy::SimilarComments, 5, 0);
        let ctx = sample_context("a", "p1", &c, &s, &ProfileIndex::new(), &cfg).unwrap();
        let ids: Vec<&str> = ctx.items.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c2"]);
        let sims: Vec<f64> = ctx.items.iter().map(|i| i.similarity.unwrap()).collect();
        assert!(sims[0] >= sims[1]);
    }

    #[test]
    fn sentences_and_random() {
        let c = corpus();
        let s = store(&c);
        let cfg = SamplerConfig::new(Strategy::SimilarSentences, 2, 0);
        let ctx = sample_context("a", "p1", &c, &s, &ProfileIndex::new(), &cfg).unwrap();
        assert_eq!(ctx.items.len(), 2);
        assert_eq!(ctx.items[0].item_id, "c1#0");
        let cfg = SamplerConfig::new(Strategy::RandomSentences, 10, 9);
        let a = sample_context("a", "p2", &c, &s, &ProfileIndex::new(), &cfg).unwrap();
        assert_eq!(a.items.len(), 4);
        assert_eq!(a, sample_context("a", "p2", &c, &s, &ProfileIndex::new(), &cfg).unwrap());
    }

    #[test]
    fn filter_rules() {
        let cfg = SamplerConfig::new(Strategy::RandomComments, 5, 0).with_filter(CategoryFilter::Cluster(1));
        assert!(cfg.validate().is_err());
        let mut cfg = SamplerConfig::new(Strategy::SimilarComments, 10, 0).with_filter(CategoryFilter::Cluster(1));
        assert!(cfg.validate().is_err());
        cfg.replication_mode = false;
        assert!(cfg.validate().is_ok());
        assert!(SamplerConfig::new(Strategy::SimilarComments, 5, 0)
            .with_filter(CategoryFilter::Theory(HighLevelCategory::Attitudes))
            .validate()
            .is_ok());
        assert_eq!("cluster_3".parse::<CategoryFilter>().unwrap(), CategoryFilter::Cluster(3));
        assert_eq!(
            "attitudes".parse::<CategoryFilter>().unwrap(),
            CategoryFilter::Theory(HighLevelCategory::Attitudes)
        );
    }

    #[test]
    fn coverage_conventions() {
        let set = |ids: &[&str]| ContextSet {
            annotator_id: "a".into(),
            post_id: "p".into(),
            items: ids
                .iter()
                .map(|i| ContextItem {
                    source_comment_id: i.to_string(),
                    item_id: i.to_string(),
                    text: String::new(),
                    similarity: None,
                })
                .collect(),
        };
        let rows = category_coverage(&[set(&["x", "y"])], &ProfileIndex::new());
        let get = |rows: &[CoverageRow], t: &str| rows.iter().find(|r| r.tag == t).unwrap().percent;
        assert_eq!(get(&rows, "none_theory"), 100.0);
        assert_eq!(get(&rows, "none_cluster"), 100.0);

        let mut profiles = ProfileIndex::new();
        profiles.insert(
            "x".into(),
            CategoryProfile {
                comment_id: "x".into(),
                theory_categories: [HighLevelCategory::Demographics, HighLevelCategory::Attitudes].into(),
                cluster_id: Some(0),
                low_level: Default::default(),
            },
        );
        let rows = category_coverage(&[set(&["x"])], &profiles);
        assert_eq!(get(&rows, "Demographics"), 100.0);
        assert_eq!(get(&rows, "Attitudes"), 100.0);
        assert_eq!(get(&rows, "cluster_0"), 100.0);
        assert_eq!(get(&rows, "none_cluster"), 0.0);
    }

    #[test]
    fn quartiles() {
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (1.75, 2.5, 3.25));
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.whisker_high, 4.0);
        assert_eq!(b.max, 100.0);
    }

    #[test]
    fn rank_ratio_example() {
        let c = corpus();
        let mk = |ids: &[&str]| ContextSet {
            annotator_id: "a".into(),
            post_id: "p2".into(),
            items: ids
                .iter()
                .map(|i| ContextItem {
                    source_comment_id: i.to_string(),
                    item_id: i.to_string(),
                    text: String::new(),
                    similarity: None,
                })
                .collect(),
        };
        let mut sets = vec![mk(&["c1", "c2"]); 5];
        sets.push(mk(&["c1"]));
        let r = similar_post_diversity(&sets, &c);
        assert!((r.per_annotator[0].rank_ratio.unwrap() - 1.2).abs() < 1e-12);
        assert!((r.per_annotator[0].coverage_pct - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn dump_roundtrip() {
        let c = corpus();
        let s = store(&c);
        let cfg = SamplerConfig::new(Strategy::SimilarSentences, 3, 0);
        let ctx = vec![sample_context("a", "p2", &c, &s, &ProfileIndex::new(), &cfg).unwrap()];
        let mut buf = Vec::new();
        write_contexts_jsonl(&ctx, &mut buf).unwrap();
        assert_eq!(read_contexts_jsonl(&buf[..], &c).unwrap(), ctx);
    }
}
