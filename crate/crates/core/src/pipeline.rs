//! Configuration-driven experiment runner.
//!
//! Seeds: every stage seed is derived from the top-level `seed` and a stage
//! name with [`derive_seed`]. Run `r` of a condition trains with
//! `derive_seed(seed, "train") + r`, and each (annotator, post) pair draws
//! from [`crate::sampler::pair_rng`] keyed by the sampler stage seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{self, ClusterModel};
use crate::corpus::{self, Corpus, Label, Partition, SplitKind, SplitSpec};
use crate::disclosure::{self, HighLevelCategory, PatternSet, ProfileIndex, SpanIndex};
use crate::embed::{EmbedderConfig, EmbedderKind, EmbeddingMatrix};
use crate::model::{self, ConditionReport, Example, ReportRow, TrainConfig};
use crate::sampler::{self, CategoryFilter, ContextCondition, ContextSet, EmbeddingStore, SamplerConfig, Strategy};

pub const VERSION: &str = concat!("dlab ", env!("CARGO_PKG_VERSION"));

/// Failure category, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Invariant,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Invariant => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &str, kind: ErrorKind, e: impl std::fmt::Display) -> Self {
        PipelineError {
            stage: stage.to_string(),
            kind,
            message: e.to_string(),
        }
    }
}

fn data(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError + '_ {
    move |e| PipelineError::new(stage, ErrorKind::Data, e)
}

/// Stage seed from the top-level seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(stage.as_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Directory holding posts.jsonl, comments.jsonl and verdicts.jsonl.
    pub dir: Option<PathBuf>,
    pub posts: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub min_comments: usize,
    pub max_comments: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            dir: None,
            posts: None,
            comments: None,
            verdicts: None,
            min_comments: 20,
            max_comments: 500,
        }
    }
}

impl CorpusSection {
    pub fn paths(&self) -> Result<[PathBuf; 3], PipelineError> {
        let pick = |explicit: &Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| self.dir.as_ref().map(|d| d.join(name)))
                .ok_or_else(|| PipelineError::new("config", ErrorKind::Usage, format!("corpus path for {name} not set")))
        };
        Ok([
            pick(&self.posts, "posts.jsonl")?,
            pick(&self.comments, "comments.jsonl")?,
            pick(&self.verdicts, "verdicts.jsonl")?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    pub hash_seed: u64,
    /// EMBX files for the external kind.
    pub posts_embx: Option<PathBuf>,
    pub comments_embx: Option<PathBuf>,
    pub sentences_embx: Option<PathBuf>,
}

impl Default for EmbedSection {
    fn default() -> Self {
        let d = EmbedderConfig::default();
        EmbedSection {
            kind: d.kind,
            dim: d.dim,
            ngram_lo: d.ngram_range.0,
            ngram_hi: d.ngram_range.1,
            hash_seed: d.seed,
            posts_embx: None,
            comments_embx: None,
            sentences_embx: None,
        }
    }
}

impl EmbedSection {
    pub fn embedder(&self) -> EmbedderConfig {
        EmbedderConfig {
            kind: self.kind,
            dim: self.dim,
            ngram_range: (self.ngram_lo, self.ngram_hi),
            seed: self.hash_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub enabled: bool,
    pub k: usize,
    pub reduced_dim: usize,
    pub inspect_n: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            enabled: true,
            k: 10,
            reduced_dim: 5,
            inspect_n: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub kind: SplitKind,
    pub ratios: [f64; 3],
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            kind: SplitKind::Situation,
            ratios: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Any of no_comments, all_comments.
    pub baselines: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub max_samples: Vec<usize>,
    /// Theory category names, `cluster_<n>`, or the shorthands
    /// `all_theory` and `all_clusters`.
    pub categories: Vec<String>,
    pub category_max_samples: usize,
    /// Condition label used as the reference for p-values.
    pub p_baseline: Option<String>,
    pub replication_mode: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            baselines: vec!["no_comments".into(), "all_comments".into()],
            strategies: vec![Strategy::SimilarComments],
            max_samples: vec![5],
            categories: Vec::new(),
            category_max_samples: 5,
            p_baseline: Some("no_comments".into()),
            replication_mode: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub focal_gamma: f64,
    pub focal_alpha: Option<[f64; 2]>,
    pub batch_size: usize,
    pub runs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            focal_gamma: d.focal_gamma,
            focal_alpha: d.focal_alpha,
            batch_size: d.batch_size,
            runs: d.runs,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            focal_gamma: self.focal_gamma,
            focal_alpha: self.focal_alpha,
            batch_size: self.batch_size,
            runs: self.runs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    pub embed: EmbedSection,
    pub cluster: ClusterSection,
    pub split: SplitSection,
    pub grid: GridSection,
    pub train: TrainSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            corpus: CorpusSection::default(),
            embed: EmbedSection::default(),
            cluster: ClusterSection::default(),
            split: SplitSection::default(),
            grid: GridSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        toml::from_str(s).map_err(|e| PipelineError::new("config", ErrorKind::Usage, e))
    }

    /// Loads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::new("config", ErrorKind::Usage, format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut cfg.corpus.dir);
        fix(&mut cfg.corpus.posts);
        fix(&mut cfg.corpus.comments);
        fix(&mut cfg.corpus.verdicts);
        fix(&mut cfg.embed.posts_embx);
        fix(&mut cfg.embed.comments_embx);
        fix(&mut cfg.embed.sentences_embx);
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Single-line JSON form embedded in every output.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let usage = |m: String| Err(PipelineError::new("config", ErrorKind::Usage, m));
        for p in self.corpus.paths()? {
            if !p.exists() {
                return usage(format!("corpus file {} does not exist", p.display()));
            }
        }
        if self.embed.kind == EmbedderKind::External {
            for p in [&self.embed.posts_embx, &self.embed.comments_embx] {
                match p {
                    Some(p) if p.exists() => {}
                    Some(p) => return usage(format!("embedding file {} does not exist", p.display())),
                    None => return usage("external embeddings need posts_embx and comments_embx".into()),
                }
            }
        }
        self.embed
            .embedder()
            .validate()
            .map_err(|e| PipelineError::new("config", ErrorKind::Usage, e))?;
        if self.conditions(self.cluster.k)?.is_empty() {
            return usage("experiment grid is empty".into());
        }
        self.train
            .train_config(0)
            .validate()
            .map_err(|e| PipelineError::new("config", ErrorKind::Usage, e))?;
        Ok(())
    }

    /// Expands the grid into conditions: baselines, then strategy ×
    /// max_samples, then category filters.
    pub fn conditions(&self, k: usize) -> Result<Vec<ContextCondition>, PipelineError> {
        let usage = |m: String| PipelineError::new("config", ErrorKind::Usage, m);
        let sampler_seed = derive_seed(self.seed, "sampler");
        let mut out = Vec::new();
        for b in &self.grid.baselines {
            out.push(match b.as_str() {
                "no_comments" => ContextCondition::NoComments,
                "all_comments" => ContextCondition::AllComments,
                other => return Err(usage(format!("unknown baseline '{other}'"))),
            });
        }
        for &s in &self.grid.strategies {
            for &n in &self.grid.max_samples {
                let mut c = SamplerConfig::new(s, n, sampler_seed);
                c.replication_mode = self.grid.replication_mode;
                out.push(ContextCondition::Sampled(c));
            }
        }
        let mut filters = Vec::new();
        for name in &self.grid.categories {
            match name.as_str() {
                "all_theory" => filters.extend(HighLevelCategory::ALL.map(CategoryFilter::Theory)),
                "all_clusters" => filters.extend((0..k).map(CategoryFilter::Cluster)),
                other => filters.push(other.parse::<CategoryFilter>().map_err(|e| usage(e.to_string()))?),
            }
        }
        for f in filters {
            let mut c = SamplerConfig::new(Strategy::SimilarComments, self.grid.category_max_samples, sampler_seed).with_filter(f);
            c.replication_mode = self.grid.replication_mode;
            c.validate().map_err(|e| usage(e.to_string()))?;
            out.push(ContextCondition::Sampled(c));
        }
        Ok(out)
    }
}

/// Corpus after ingestion and the annotator activity filter.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<(Corpus, serde_json::Value), PipelineError> {
    let [p, c, v] = cfg.corpus.paths()?;
    let (corpus, ingest) = corpus::ingest_corpus(&p, &c, &v).map_err(|e| data("ingest")(&e))?;
    let (filtered, report) = corpus::filter_annotators(&corpus, cfg.corpus.min_comments, cfg.corpus.max_comments);
    let summary = serde_json::json!({
        "posts": ingest.posts,
        "comments": ingest.comments,
        "verdicts": ingest.verdicts,
        "annotators": ingest.annotators,
        "self_edges_dropped": ingest.self_edges_dropped.len(),
        "retained_annotators": report.retained_annotators,
        "dropped_annotators": report.dropped_annotators.len(),
        "dropped_verdicts": report.dropped_verdicts,
    });
    Ok((filtered, summary))
}

pub fn build_store(cfg: &ExperimentConfig, corpus: &Corpus, with_sentences: bool) -> Result<EmbeddingStore, PipelineError> {
    match cfg.embed.kind {
        EmbedderKind::HashedNgram => {
            EmbeddingStore::build(corpus, &cfg.embed.embedder(), with_sentences).map_err(|e| data("embed")(&e))
        }
        EmbedderKind::External => {
            let load = |p: &Path| EmbeddingMatrix::import(p).map_err(|e| data("embed")(&e));
            let posts = load(cfg.embed.posts_embx.as_ref().unwrap())?;
            let comments = load(cfg.embed.comments_embx.as_ref().unwrap())?;
            let sentences = cfg.embed.sentences_embx.as_deref().map(load).transpose()?;
            EmbeddingStore::new(posts, comments, sentences).map_err(|e| data("embed")(&e))
        }
    }
}

/// Result of clustering phrase-filtered comments.
pub struct ClusterOutcome {
    pub model: ClusterModel,
    pub reduced: EmbeddingMatrix,
    pub silhouette: f64,
    pub variance_ratios: Vec<f64>,
}

/// Reduces and clusters the comments that pass the phrase filter, and
/// records each comment's cluster in `profiles`.
pub fn cluster_stage(
    corpus: &Corpus,
    store: &EmbeddingStore,
    profiles: &mut ProfileIndex,
    k: usize,
    reduced_dim: usize,
    seed: u64,
) -> Result<ClusterOutcome, PipelineError> {
    let rows: Vec<usize> = store
        .comments
        .ids()
        .iter()
        .enumerate()
        .filter(|(_, id)| corpus.comment(id).is_some_and(|c| disclosure::matches_phrase_filter(&c.text)))
        .map(|(i, _)| i)
        .collect();
    let subset = store.comments.select(&rows);
    let err = data("cluster");
    let (reduced, proj) = cluster::truncated_svd(&subset, reduced_dim, seed).map_err(|e| err(&e))?;
    let model = cluster::kmeans(&reduced, k, seed).map_err(|e| err(&e))?;
    let silhouette = if k >= 2 {
        cluster::silhouette(&reduced, &model).map_err(|e| err(&e))?.mean
    } else {
        f64::NAN
    };
    for p in profiles.values_mut() {
        p.cluster_id = model.assignment.get(&p.comment_id).copied();
    }
    Ok(ClusterOutcome {
        variance_ratios: proj.variance_ratios(),
        model,
        reduced,
        silhouette,
    })
}

/// Context sets and feature rows for a list of verdicts.
pub fn build_examples(
    condition: &ContextCondition,
    verdict_idx: &[usize],
    corpus: &Corpus,
    store: &EmbeddingStore,
    profiles: &ProfileIndex,
) -> Result<(Vec<ContextSet>, Vec<Example>), PipelineError> {
    let stage = format!("sample[{}]", condition.label());
    let pairs: Vec<(ContextSet, Example)> = verdict_idx
        .par_iter()
        .map(|&i| {
            let v = &corpus.verdicts()[i];
            let ctx = sampler::build_context(condition, &v.annotator_id, &v.post_id, corpus, store, profiles)
                .map_err(|e| PipelineError::new(&stage, ErrorKind::Data, e))?;
            let post = store
                .post_row(&v.post_id)
                .ok_or_else(|| PipelineError::new(&stage, ErrorKind::Data, format!("no embedding for post {}", v.post_id)))?;
            let f = model::build_features(post, &ctx, store).map_err(|e| PipelineError::new(&stage, ErrorKind::Data, e))?;
            Ok((ctx, (f, v.label)))
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Trains `runs` models on the train partition and evaluates each on test.
pub fn run_condition(
    condition: &ContextCondition,
    split: &SplitSpec,
    corpus: &Corpus,
    store: &EmbeddingStore,
    profiles: &ProfileIndex,
    train: &TrainConfig,
) -> Result<(ConditionReport, Vec<ContextSet>), PipelineError> {
    let label = condition.label();
    let train_idx = split.indices(Partition::Train);
    let test_idx = split.indices(Partition::Test);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(PipelineError::new("split", ErrorKind::Data, "train or test partition is empty"));
    }
    let (_, train_set) = build_examples(condition, &train_idx, corpus, store, profiles)?;
    let (test_ctx, test_set) = build_examples(condition, &test_idx, corpus, store, profiles)?;
    let stage = format!("train[{label}]");
    let params = model::train_runs(&train_set, train).map_err(|e| PipelineError::new(&stage, ErrorKind::Data, e))?;
    let runs = params
        .iter()
        .map(|p| model::evaluate(p, &test_set))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::new(&stage, ErrorKind::Invariant, e))?;
    for r in &runs {
        if !(r.accuracy.is_finite() && r.macro_f1.is_finite()) {
            return Err(PipelineError::new(&stage, ErrorKind::Invariant, "non-finite metric"));
        }
    }
    Ok((ConditionReport::new(label, runs), test_ctx))
}

/// Paths written by [`run_pipeline`], relative to the output directory.
pub struct PipelineOutputs {
    pub files: Vec<PathBuf>,
    pub rows: Vec<ReportRow>,
}

fn header_lines(cfg: &ExperimentConfig) -> String {
    format!("# {VERSION}\n# config {}\n", cfg.to_json_line())
}

fn write_file(dir: &Path, name: &str, files: &mut Vec<PathBuf>, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| data("write")(&e))?;
    }
    let mut w = BufWriter::new(File::create(&path).map_err(|e| data("write")(&e))?);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| data("write")(&e))?;
    files.push(PathBuf::from(name));
    Ok(())
}

const STALE: &str = "STALE";

/// Full experiment: ingest, filter, extract, optional clustering, split,
/// then per condition sample, train and evaluate, then significance tests
/// against the named baseline. A `STALE` marker sits in the output
/// directory until the run completes, and stays there naming the failed
/// stage if it does not.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutputs, PipelineError> {
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| data("write")(&e))?;
    let marker = out.join(STALE);
    std::fs::write(&marker, "run in progress\n").map_err(|e| data("write")(&e))?;
    match run_inner(cfg, &out) {
        Ok(o) => {
            std::fs::remove_file(&marker).map_err(|e| data("write")(&e))?;
            Ok(o)
        }
        Err(e) => {
            let _ = std::fs::write(&marker, format!("failed at stage {}: {}\n", e.stage, e.message));
            Err(e)
        }
    }
}

fn run_inner(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineOutputs, PipelineError> {
    cfg.validate()?;
    let mut files = Vec::new();
    let head = header_lines(cfg);
    let (corpus, summary) = load_corpus(cfg)?;
    log::info!("corpus: {summary}");

    let patterns = PatternSet::default_set();
    let spans: SpanIndex = disclosure::extract_corpus(&patterns, &corpus);
    let mut profiles = disclosure::build_profiles(&spans);

    let conditions = cfg.conditions(cfg.cluster.k)?;
    let needs_sentences = conditions
        .iter()
        .any(|c| matches!(c, ContextCondition::Sampled(s) if s.strategy == Strategy::SimilarSentences));
    let store = build_store(cfg, &corpus, needs_sentences)?;

    let mut cluster_summary = serde_json::Value::Null;
    if cfg.cluster.enabled {
        let seed = derive_seed(cfg.seed, "cluster");
        let oc = cluster_stage(&corpus, &store, &mut profiles, cfg.cluster.k, cfg.cluster.reduced_dim, seed)?;
        cluster_summary = serde_json::json!({
            "k": oc.model.k,
            "points": oc.reduced.rows(),
            "inertia": oc.model.inertia,
            "iterations": oc.model.iterations,
            "silhouette": oc.silhouette,
            "sizes": oc.model.sizes(),
            "variance_ratios": oc.variance_ratios,
        });
        let mut a = Vec::new();
        let mut b = Vec::new();
        oc.model.write(&mut a, &mut b).map_err(|e| data("cluster")(&e))?;
        write_file(out, "cluster/model.jsonl", &mut files, |w| w.write_all(&a))?;
        write_file(out, "cluster/centroids.embx", &mut files, |w| w.write_all(&b))?;
        let texts: BTreeMap<String, String> = corpus.comments().iter().map(|(k, c)| (k.clone(), c.text.clone())).collect();
        let inspect = cluster::inspection_export(&oc.model, &oc.reduced, &texts, cfg.cluster.inspect_n, seed)
            .map_err(|e| data("cluster")(&e))?;
        write_file(out, "cluster/inspection.jsonl", &mut files, |w| {
            inspect.iter().try_for_each(|r| writeln!(w, "{}", serde_json::to_string(r)?))
        })?;
    }

    write_file(out, "profiles.jsonl", &mut files, |w| {
        profiles.values().try_for_each(|p| writeln!(w, "{}", serde_json::to_string(p)?))
    })?;

    let split = corpus::make_split(&corpus, cfg.split.kind, cfg.split.ratios, derive_seed(cfg.seed, "split"))
        .map_err(|e| data("split")(&e))?;
    let violations = corpus::verify_split(&split, &corpus);
    if !violations.is_empty() {
        return Err(PipelineError::new("split", ErrorKind::Invariant, format!("{violations:?}")));
    }
    write_file(out, "split.jsonl", &mut files, |w| split.write_jsonl(w))?;

    let train_cfg = cfg.train.train_config(derive_seed(cfg.seed, "train"));
    let mut reports = Vec::new();
    let mut coverage_source = None;
    for cond in &conditions {
        log::info!("condition {}", cond.label());
        let (report, ctx) = run_condition(cond, &split, &corpus, &store, &profiles, &train_cfg)?;
        write_file(out, &format!("contexts/{}.jsonl", cond.label()), &mut files, |w| {
            sampler::write_contexts_jsonl(&ctx, w)
        })?;
        if coverage_source.is_none()
            && matches!(cond, ContextCondition::Sampled(s) if s.strategy == Strategy::SimilarComments && s.category_filter.is_none())
        {
            coverage_source = Some(ctx);
        }
        let filter = match cond {
            ContextCondition::Sampled(s) => s.category_filter,
            _ => None,
        };
        let five = sampler::five_plus_pct(&corpus, &profiles, filter.as_ref());
        reports.push((report, five));
    }

    let baseline = cfg.grid.p_baseline.clone();
    let base_correct = baseline
        .as_ref()
        .and_then(|b| reports.iter().find(|(r, _)| &r.condition == b))
        .map(|(r, _)| r.majority_correct());
    if baseline.is_some() && base_correct.is_none() {
        log::warn!("p-value baseline {:?} is not part of the grid", baseline);
    }
    let rows: Vec<ReportRow> = reports
        .into_iter()
        .map(|(report, five)| {
            let p_value = match (&base_correct, &baseline) {
                (Some(b), Some(name)) if &report.condition != name => {
                    model::significance_test(&report.majority_correct(), b).ok().map(|t| t.p)
                }
                _ => None,
            };
            ReportRow {
                baseline: p_value.and(baseline.clone()),
                report,
                five_plus_pct: Some(five),
                p_value,
            }
        })
        .collect();

    write_file(out, "report.tsv", &mut files, |w| {
        w.write_all(head.as_bytes())?;
        writeln!(w, "# significance: Welch t-test over per-example majority-vote correctness across runs")?;
        model::write_report_tsv(&rows, w)
    })?;

    if let Some(ctx) = &coverage_source {
        let cov = sampler::category_coverage(ctx, &profiles);
        write_file(out, "analysis/coverage.tsv", &mut files, |w| {
            w.write_all(head.as_bytes())?;
            sampler::write_coverage_tsv(&cov, w)
        })?;
        let div = sampler::similar_post_diversity(ctx, &corpus);
        write_file(out, "analysis/diversity.tsv", &mut files, |w| {
            w.write_all(head.as_bytes())?;
            sampler::write_diversity_tsv(&div, w)
        })?;
    }

    let summary_json = serde_json::json!({
        "version": VERSION,
        "config": cfg,
        "corpus": summary,
        "cluster": cluster_summary,
        "split_counts": split.counts(),
        "labels": {
            "yta": corpus.verdicts().iter().filter(|v| v.label == Label::Yta).count(),
            "nta": corpus.verdicts().iter().filter(|v| v.label == Label::Nta).count(),
        },
        "rows": rows,
    });
    write_file(out, "report.json", &mut files, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary_json)?;
        writeln!(w)
    })?;

    // manifest last, covering everything above
    let mut manifest = Vec::new();
    for f in &files {
        let bytes = std::fs::read(out.join(f)).map_err(|e| data("write")(&e))?;
        manifest.push(serde_json::json!({
            "file": f.to_string_lossy(),
            "sha256": format!("{:x}", Sha256::digest(&bytes)),
        }));
    }
    let manifest = serde_json::json!({"version": VERSION, "config": cfg, "files": manifest});
    write_file(out, "manifest.json", &mut files, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;
    Ok(PipelineOutputs { files, rows })
}
