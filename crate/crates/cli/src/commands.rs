use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Subcommand};
use dlab_core::cluster;
use dlab_core::corpus::{self, Comment, Corpus, Partition, SplitSpec};
use dlab_core::disclosure::{self, CategoryProfile, HighLevelCategory, NgramPosition, PatternSet, ProfileIndex};
use dlab_core::embed::EmbeddingMatrix;
use dlab_core::model::{self, ConditionReport, ModelParams, ReportRow};
use dlab_core::pipeline::{self, derive_seed, ErrorKind, ExperimentConfig, PipelineError, VERSION};
use dlab_core::sampler::{self, CategoryFilter, ContextCondition, EmbeddingStore, SamplerConfig, Strategy};
use dlab_core::synthgen::{self, JudgmentRule, PopulationSpec};
use sha2::{Digest, Sha256};

fn usage(msg: impl std::fmt::Display) -> anyhow::Error {
    PipelineError::new("args", ErrorKind::Usage, msg).into()
}

fn data(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> anyhow::Error {
    move |e| PipelineError::new(stage, ErrorKind::Data, e).into()
}

fn require(p: &Path) -> anyhow::Result<&Path> {
    if p.exists() {
        Ok(p)
    } else {
        Err(usage(format!("input {} does not exist", p.display())))
    }
}

/// Files written by one command. `finish` adds a manifest embedding the
/// version, effective config and a digest of every file.
struct Outputs<'a> {
    cfg: &'a ExperimentConfig,
    command: &'static str,
    tag: Option<String>,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a ExperimentConfig, command: &'static str) -> Self {
        Outputs {
            cfg,
            command,
            tag: None,
            files: Vec::new(),
        }
    }

    /// Distinguishes manifests of repeated commands sharing one directory.
    fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    fn path(&self, name: &str) -> anyhow::Result<PathBuf> {
        let p = self.cfg.output_dir.join(name);
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(p)
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
        let p = self.path(name)?;
        let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    /// TSV with the version and config as leading comment lines.
    fn write_tsv(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
        let head = format!("# {VERSION}\n# config {}\n", self.cfg.to_json_line());
        self.write(name, |w| {
            w.write_all(head.as_bytes())?;
            f(w)
        })
    }

    fn jsonl<T: serde::Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
        self.write(name, |w| rows.into_iter().try_for_each(|r| writeln!(w, "{}", serde_json::to_string(&r)?)))
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, v: &T) -> anyhow::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, v)?;
            writeln!(w)
        })
    }

    fn finish(mut self) -> anyhow::Result<()> {
        let mut list = Vec::new();
        for f in &self.files {
            list.push(serde_json::json!({
                "file": f.to_string_lossy(),
                "sha256": file_digest(&self.cfg.output_dir.join(f))?,
            }));
        }
        let m = serde_json::json!({
            "version": VERSION,
            "command": self.command,
            "config": self.cfg,
            "files": list,
        });
        let name = match &self.tag {
            Some(t) => format!("{}.{t}.manifest.json", self.command),
            None => format!("{}.manifest.json", self.command),
        };
        self.files.clear();
        self.json(&name, &m)?;
        for f in std::mem::take(&mut self.files) {
            println!("{}", self.cfg.output_dir.join(f).display());
        }
        Ok(())
    }
}

fn file_digest(p: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(p)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// The corpus as stored, without the activity filter.
fn open_corpus(cfg: &ExperimentConfig) -> anyhow::Result<Corpus> {
    let [p, c, v] = cfg.corpus.paths()?;
    for f in [&p, &c, &v] {
        require(f)?;
    }
    let (corpus, report) = corpus::ingest_corpus(&p, &c, &v).map_err(|e| data("ingest")(&e))?;
    if !report.self_edges_dropped.is_empty() {
        log::info!("dropped {} comments on the commenter's own post", report.self_edges_dropped.len());
    }
    Ok(corpus)
}

fn read_profiles(p: &Path) -> anyhow::Result<ProfileIndex> {
    let r = BufReader::new(File::open(require(p)?)?);
    let mut out = ProfileIndex::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let prof: CategoryProfile =
            serde_json::from_str(&line).map_err(|e| data("profiles")(&format!("{}:{}: {e}", p.display(), i + 1)))?;
        out.insert(prof.comment_id.clone(), prof);
    }
    Ok(out)
}

fn profiles_for(corpus: &Corpus, path: Option<&Path>) -> anyhow::Result<ProfileIndex> {
    match path {
        Some(p) => read_profiles(p),
        None => Ok(disclosure::build_profiles(&disclosure::extract_corpus(&PatternSet::default_set(), corpus))),
    }
}

fn read_split(p: &Path) -> anyhow::Result<SplitSpec> {
    let r = BufReader::new(File::open(require(p)?)?);
    SplitSpec::read_jsonl(r).map_err(|e| data("split")(&e))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| usage(format!("bad {what} '{x}'"))))
        .collect()
}

fn parse_partition(s: &str) -> anyhow::Result<Option<Partition>> {
    Ok(match s {
        "train" => Some(Partition::Train),
        "val" => Some(Partition::Val),
        "test" => Some(Partition::Test),
        "all" => None,
        _ => return Err(usage(format!("unknown partition '{s}' (train, val, test or all)"))),
    })
}

pub enum Overrides<'a> {
    None,
    Ingest(&'a IngestArgs),
    Embed(&'a EmbedArgs),
    Cluster(&'a ClusterArgs),
    Split(&'a SplitArgs),
    Train(&'a TrainOverrides),
}

pub fn apply_overrides(o: &Overrides<'_>, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
    match o {
        Overrides::None => {}
        Overrides::Ingest(a) => {
            if let Some(n) = a.min_comments {
                cfg.corpus.min_comments = n;
            }
            if let Some(n) = a.max_comments {
                cfg.corpus.max_comments = n;
            }
        }
        Overrides::Embed(a) => {
            if let Some(d) = a.dim {
                cfg.embed.dim = d;
            }
        }
        Overrides::Cluster(a) => {
            if let Some(k) = a.k {
                cfg.cluster.k = k;
            }
            if let Some(d) = a.reduced_dim {
                cfg.cluster.reduced_dim = d;
            }
        }
        Overrides::Split(a) => {
            if let Some(k) = &a.kind {
                cfg.split.kind = k.parse().map_err(usage)?;
            }
            if let Some(r) = &a.ratios {
                let v: Vec<f64> = parse_list(r, "ratio")?;
                cfg.split.ratios = v.try_into().map_err(|_| usage("--ratios needs three values"))?;
            }
        }
        Overrides::Train(t) => {
            if let Some(x) = t.epochs {
                cfg.train.epochs = x;
            }
            if let Some(x) = t.learning_rate {
                cfg.train.learning_rate = x;
            }
            if let Some(x) = t.focal_gamma {
                cfg.train.focal_gamma = x;
            }
            if let Some(x) = t.batch_size {
                cfg.train.batch_size = x;
            }
            if let Some(x) = t.runs {
                cfg.train.runs = x;
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ ingest

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub min_comments: Option<usize>,
    #[arg(long)]
    pub max_comments: Option<usize>,
}

pub fn ingest(cfg: &ExperimentConfig, _: &IngestArgs) -> anyhow::Result<()> {
    let [p, c, v] = cfg.corpus.paths()?;
    for f in [&p, &c, &v] {
        require(f)?;
    }
    let (corpus, summary) = pipeline::load_corpus(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    corpus.write_jsonl(&cfg.output_dir).map_err(|e| data("write")(&e))?;
    let mut out = Outputs::new(cfg, "ingest");
    out.files.extend(["posts.jsonl", "comments.jsonl", "verdicts.jsonl"].map(PathBuf::from));
    out.json("ingest.json", &summary)?;
    log::info!("{summary}");
    out.finish()
}

// ----------------------------------------------------------------- extract

#[derive(Args)]
pub struct ExtractArgs {
    /// Comment JSONL to scan instead of the configured corpus.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Pattern file replacing the built-in set.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
}

pub fn extract(cfg: &ExperimentConfig, a: &ExtractArgs) -> anyhow::Result<()> {
    let patterns = match &a.patterns {
        Some(p) => PatternSet::load(require(p)?).map_err(|e| data("extract")(&e))?,
        None => PatternSet::default_set(),
    };
    let spans = match &a.comments {
        Some(path) => {
            let r = BufReader::new(File::open(require(path)?)?);
            let mut spans = disclosure::SpanIndex::new();
            for (i, line) in r.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let c: Comment = serde_json::from_str(&line)
                    .map_err(|e| data("extract")(&format!("{}:{}: {e}", path.display(), i + 1)))?;
                let found = patterns.extract(&c);
                if !found.is_empty() {
                    spans.insert(c.id.clone(), found);
                }
            }
            spans
        }
        None => disclosure::extract_corpus(&patterns, &open_corpus(cfg)?),
    };
    let profiles = disclosure::build_profiles(&spans);
    log::info!("{} comments with disclosures", profiles.len());
    let mut out = Outputs::new(cfg, "extract");
    out.jsonl("spans.jsonl", spans.values().flatten())?;
    out.jsonl("profiles.jsonl", profiles.values())?;
    out.finish()
}

// ------------------------------------------------------------------- embed

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Also embed every sentence (needed by sentence strategies).
    #[arg(long)]
    pub sentences: bool,
}

pub fn embed(cfg: &ExperimentConfig, a: &EmbedArgs) -> anyhow::Result<()> {
    let corpus = open_corpus(cfg)?;
    let store = pipeline::build_store(cfg, &corpus, a.sentences)?;
    let mut out = Outputs::new(cfg, "embed");
    let mut put = |name: &str, m: &EmbeddingMatrix| out.write(name, |w| m.write_embx(w).map_err(std::io::Error::other));
    put("posts.embx", &store.posts)?;
    put("comments.embx", &store.comments)?;
    if let Some(s) = &store.sentences {
        put("sentences.embx", s)?;
    }
    out.finish()
}

// ----------------------------------------------------------------- cluster

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub reduced_dim: Option<usize>,
    /// Profiles from `extract`; recomputed when absent.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Comma-separated k values for a silhouette scan.
    #[arg(long)]
    pub scan: Option<String>,
}

pub fn cluster(cfg: &ExperimentConfig, a: &ClusterArgs) -> anyhow::Result<()> {
    let corpus = open_corpus(cfg)?;
    let mut profiles = profiles_for(&corpus, a.profiles.as_deref())?;
    let store = pipeline::build_store(cfg, &corpus, false)?;
    let seed = derive_seed(cfg.seed, "cluster");
    let oc = pipeline::cluster_stage(&corpus, &store, &mut profiles, cfg.cluster.k, cfg.cluster.reduced_dim, seed)?;
    let mut out = Outputs::new(cfg, "cluster");
    let (mut jsonl, mut cent) = (Vec::new(), Vec::new());
    oc.model.write(&mut jsonl, &mut cent).map_err(|e| data("cluster")(&e))?;
    out.write("cluster/model.jsonl", |w| w.write_all(&jsonl))?;
    out.write("cluster/centroids.embx", |w| w.write_all(&cent))?;
    let texts: BTreeMap<String, String> = corpus.comments().iter().map(|(k, c)| (k.clone(), c.text.clone())).collect();
    let inspect = cluster::inspection_export(&oc.model, &oc.reduced, &texts, cfg.cluster.inspect_n, seed)
        .map_err(|e| data("cluster")(&e))?;
    out.jsonl("cluster/inspection.jsonl", &inspect)?;
    out.jsonl("profiles.jsonl", profiles.values())?;
    let summary = serde_json::json!({
        "k": oc.model.k,
        "points": oc.reduced.rows(),
        "inertia": oc.model.inertia,
        "silhouette": oc.silhouette,
        "sizes": oc.model.sizes(),
        "variance_ratios": oc.variance_ratios,
    });
    out.json("cluster/summary.json", &summary)?;
    if let Some(s) = &a.scan {
        let ks: Vec<usize> = parse_list(s, "k")?;
        let scan = cluster::silhouette_scan(&oc.reduced, &ks, seed).map_err(|e| data("cluster")(&e))?;
        out.write_tsv("cluster/silhouette.tsv", |w| {
            writeln!(w, "k\tsilhouette")?;
            scan.iter().try_for_each(|(k, s)| writeln!(w, "{k}\t{s:.6}"))
        })?;
    }
    out.finish()
}

// ------------------------------------------------------------------- split

#[derive(Args)]
pub struct SplitArgs {
    /// verdict, situation or author.
    #[arg(long)]
    pub kind: Option<String>,
    /// Train,val,test ratios, e.g. 0.7,0.1,0.2.
    #[arg(long)]
    pub ratios: Option<String>,
}

pub fn split(cfg: &ExperimentConfig, _: &SplitArgs) -> anyhow::Result<()> {
    let corpus = open_corpus(cfg)?;
    let s = corpus::make_split(&corpus, cfg.split.kind, cfg.split.ratios, derive_seed(cfg.seed, "split"))
        .map_err(|e| data("split")(&e))?;
    let v = corpus::verify_split(&s, &corpus);
    if !v.is_empty() {
        return Err(PipelineError::new("split", ErrorKind::Invariant, format!("{v:?}")).into());
    }
    let [tr, va, te] = s.counts();
    log::info!("{:?} split: train {tr}, val {va}, test {te}", s.kind);
    let mut out = Outputs::new(cfg, "split");
    out.write("split.jsonl", |w| s.write_jsonl(w))?;
    out.finish()
}

// ------------------------------------------------- sample / train / evaluate

#[derive(Args, Clone)]
pub struct ConditionArgs {
    /// no_comments, all_comments, or a sampling strategy.
    #[arg(long, default_value = "similar_comments")]
    pub condition: String,
    #[arg(long, default_value_t = 5)]
    pub max_samples: usize,
    /// Theory category or cluster_<n>; similar_comments only.
    #[arg(long)]
    pub category: Option<String>,
}

impl ConditionArgs {
    fn resolve(&self, cfg: &ExperimentConfig) -> anyhow::Result<ContextCondition> {
        let c = match self.condition.as_str() {
            "no_comments" => ContextCondition::NoComments,
            "all_comments" => ContextCondition::AllComments,
            s => {
                let strategy: Strategy = s.parse().map_err(usage)?;
                let mut sc = SamplerConfig::new(strategy, self.max_samples, derive_seed(cfg.seed, "sampler"));
                sc.replication_mode = cfg.grid.replication_mode;
                if let Some(cat) = &self.category {
                    sc = sc.with_filter(cat.parse::<CategoryFilter>().map_err(usage)?);
                }
                sc.validate().map_err(usage)?;
                ContextCondition::Sampled(sc)
            }
        };
        if self.category.is_some() && !matches!(c, ContextCondition::Sampled(_)) {
            return Err(usage("--category needs a sampling strategy"));
        }
        Ok(c)
    }

    fn needs_sentences(&self) -> bool {
        self.condition.parse::<Strategy>().is_ok_and(|s| s.is_sentence())
    }
}

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    pub partition: String,
}

struct Inputs {
    corpus: Corpus,
    split: SplitSpec,
    profiles: ProfileIndex,
    store: EmbeddingStore,
    condition: ContextCondition,
}

fn inputs(cfg: &ExperimentConfig, cond: &ConditionArgs, split: &Path, profiles: Option<&Path>) -> anyhow::Result<Inputs> {
    let condition = cond.resolve(cfg)?;
    let split = read_split(split)?;
    let corpus = open_corpus(cfg)?;
    let v = corpus::verify_split(&split, &corpus);
    if !v.is_empty() {
        return Err(PipelineError::new("split", ErrorKind::Data, format!("split does not match corpus: {v:?}")).into());
    }
    let profiles = profiles_for(&corpus, profiles)?;
    let store = pipeline::build_store(cfg, &corpus, cond.needs_sentences())?;
    Ok(Inputs {
        corpus,
        split,
        profiles,
        store,
        condition,
    })
}

pub fn sample(cfg: &ExperimentConfig, a: &SampleArgs) -> anyhow::Result<()> {
    let part = parse_partition(&a.partition)?;
    let inp = inputs(cfg, &a.cond, &a.split, a.profiles.as_deref())?;
    let idx: Vec<usize> = match part {
        Some(p) => inp.split.indices(p),
        None => (0..inp.corpus.verdicts().len()).collect(),
    };
    let (ctx, _) = pipeline::build_examples(&inp.condition, &idx, &inp.corpus, &inp.store, &inp.profiles)?;
    let mut out = Outputs::new(cfg, "sample").tagged(inp.condition.label());
    out.write(&format!("contexts/{}.jsonl", inp.condition.label()), |w| sampler::write_contexts_jsonl(&ctx, w))?;
    out.finish()
}

#[derive(Args, Clone)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub focal_gamma: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

pub fn train(cfg: &ExperimentConfig, a: &TrainArgs) -> anyhow::Result<()> {
    let inp = inputs(cfg, &a.cond, &a.split, a.profiles.as_deref())?;
    let tc = cfg.train.train_config(derive_seed(cfg.seed, "train"));
    tc.validate().map_err(usage)?;
    let idx = inp.split.indices(Partition::Train);
    let (_, examples) = pipeline::build_examples(&inp.condition, &idx, &inp.corpus, &inp.store, &inp.profiles)?;
    let params = model::train_runs(&examples, &tc).map_err(|e| data("train")(&e))?;
    let label = inp.condition.label();
    let mut out = Outputs::new(cfg, "train").tagged(&label);
    for (r, p) in params.iter().enumerate() {
        out.write(&format!("models/{label}/run{r}.model"), |w| p.write(w).map_err(std::io::Error::other))?;
    }
    let losses: Vec<&Vec<f64>> = params.iter().map(|p| &p.epoch_losses).collect();
    out.json(&format!("models/{label}/losses.json"), &losses)?;
    out.finish()
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub cond: ConditionArgs,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Directory of run*.model files; defaults to <out>/models/<condition>.
    #[arg(long)]
    pub models: Option<PathBuf>,
}

pub fn evaluate(cfg: &ExperimentConfig, a: &EvaluateArgs) -> anyhow::Result<()> {
    let inp = inputs(cfg, &a.cond, &a.split, a.profiles.as_deref())?;
    let label = inp.condition.label();
    let dir = a.models.clone().unwrap_or_else(|| cfg.output_dir.join("models").join(&label));
    let mut paths: Vec<PathBuf> = std::fs::read_dir(require(&dir)?)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no .model files in {}", dir.display())));
    }
    let idx = inp.split.indices(Partition::Test);
    let (_, test) = pipeline::build_examples(&inp.condition, &idx, &inp.corpus, &inp.store, &inp.profiles)?;
    let mut runs = Vec::new();
    for p in &paths {
        let params = ModelParams::read(BufReader::new(File::open(p)?)).map_err(|e| data("evaluate")(&format!("{}: {e}", p.display())))?;
        runs.push(model::evaluate(&params, &test).map_err(|e| data("evaluate")(&e))?);
    }
    let filter = match &inp.condition {
        ContextCondition::Sampled(s) => s.category_filter,
        _ => None,
    };
    let row = ReportRow {
        report: ConditionReport::new(label.clone(), runs),
        five_plus_pct: Some(sampler::five_plus_pct(&inp.corpus, &inp.profiles, filter.as_ref())),
        baseline: None,
        p_value: None,
    };
    println!(
        "{label}: accuracy {:.4}, macro F1 {:.4} over {} runs",
        row.report.mean_accuracy,
        row.report.mean_macro_f1,
        row.report.runs.len()
    );
    let mut out = Outputs::new(cfg, "evaluate").tagged(&label);
    out.json(&format!("eval/{label}.json"), &row)?;
    out.finish()
}

// ------------------------------------------------------------------ report

#[derive(Args)]
pub struct ReportArgs {
    /// Row files written by `evaluate`.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Condition the p-values are computed against.
    #[arg(long)]
    pub baseline: Option<String>,
}

pub fn report(cfg: &ExperimentConfig, a: &ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        let text = std::fs::read_to_string(require(p)?)?;
        let row: ReportRow = serde_json::from_str(&text).map_err(|e| data("report")(&format!("{}: {e}", p.display())))?;
        rows.push(row);
    }
    if let Some(b) = &a.baseline {
        let base = rows
            .iter()
            .find(|r| &r.report.condition == b)
            .map(|r| r.report.majority_correct())
            .ok_or_else(|| usage(format!("baseline '{b}' is not among the inputs")))?;
        for r in rows.iter_mut() {
            if &r.report.condition == b {
                continue;
            }
            let mine = r.report.majority_correct();
            if mine.len() != base.len() {
                return Err(PipelineError::new(
                    "report",
                    ErrorKind::Invariant,
                    format!("{} and {b} were evaluated on different test sets", r.report.condition),
                )
                .into());
            }
            let t = model::significance_test(&mine, &base).map_err(|e| data("report")(&e))?;
            r.p_value = Some(t.p);
            r.baseline = Some(b.clone());
        }
    }
    let mut out = Outputs::new(cfg, "report");
    out.write_tsv("report.tsv", |w| {
        writeln!(w, "# significance: Welch t-test over per-example majority-vote correctness across runs")?;
        model::write_report_tsv(&rows, w)
    })?;
    out.json("report.json", &serde_json::json!({"version": VERSION, "config": cfg, "rows": rows}))?;
    out.finish()
}

// ----------------------------------------------------------------- analyze

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub what: Analysis,
}

#[derive(Subcommand)]
pub enum Analysis {
    /// Share of sampled comments per category.
    Coverage {
        #[arg(long)]
        contexts: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Per-annotator mean similarity and context diversity.
    Diversity {
        #[arg(long)]
        contexts: PathBuf,
    },
    /// Two-dimensional projection of an embedding file.
    Pca {
        #[arg(long)]
        embeddings: PathBuf,
        /// Profiles with cluster ids to label the points.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Most frequent n-grams around disclosures.
    Ngrams {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// before or after.
        #[arg(long, default_value = "before")]
        position: String,
    },
    /// Random disclosure comments of one theory category for manual review.
    Audit {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
}

pub fn analyze(cfg: &ExperimentConfig, a: &AnalyzeArgs) -> anyhow::Result<()> {
    let tag = match &a.what {
        Analysis::Coverage { .. } => "coverage",
        Analysis::Diversity { .. } => "diversity",
        Analysis::Pca { .. } => "pca",
        Analysis::Ngrams { .. } => "ngrams",
        Analysis::Audit { .. } => "audit",
    };
    let mut out = Outputs::new(cfg, "analyze").tagged(tag);
    match &a.what {
        Analysis::Coverage { contexts, profiles } => {
            let corpus = open_corpus(cfg)?;
            let profiles = profiles_for(&corpus, profiles.as_deref())?;
            let ctx = sampler::read_contexts_jsonl(BufReader::new(File::open(require(contexts)?)?), &corpus)
                .map_err(|e| data("analyze")(&e))?;
            let rows = sampler::category_coverage(&ctx, &profiles);
            out.write_tsv("analysis/coverage.tsv", |w| sampler::write_coverage_tsv(&rows, w))?;
        }
        Analysis::Diversity { contexts } => {
            let corpus = open_corpus(cfg)?;
            let ctx = sampler::read_contexts_jsonl(BufReader::new(File::open(require(contexts)?)?), &corpus)
                .map_err(|e| data("analyze")(&e))?;
            let r = sampler::similar_post_diversity(&ctx, &corpus);
            out.write_tsv("analysis/diversity.tsv", |w| sampler::write_diversity_tsv(&r, w))?;
        }
        Analysis::Pca { embeddings, profiles } => {
            let m = EmbeddingMatrix::import(require(embeddings)?).map_err(|e| data("analyze")(&e))?;
            let (pts, ratios) = cluster::pca_2d(&m, derive_seed(cfg.seed, "pca")).map_err(|e| data("analyze")(&e))?;
            let profiles = profiles.as_deref().map(read_profiles).transpose()?;
            out.write_tsv("analysis/pca.tsv", |w| {
                writeln!(w, "# explained variance {:.6} {:.6}", ratios[0], ratios[1])?;
                writeln!(w, "id\tx\ty\tcluster")?;
                for (id, p) in m.ids().iter().zip(&pts) {
                    let c = profiles
                        .as_ref()
                        .and_then(|pr| pr.get(id))
                        .and_then(|p| p.cluster_id)
                        .map(|c| c.to_string())
                        .unwrap_or_default();
                    writeln!(w, "{id}\t{:.6}\t{:.6}\t{c}", p[0], p[1])?;
                }
                Ok(())
            })?;
        }
        Analysis::Ngrams { n, position } => {
            if !(1..=3).contains(n) {
                return Err(usage("--n must be 1, 2 or 3"));
            }
            let pos = match position.as_str() {
                "before" => NgramPosition::Before,
                "after" => NgramPosition::After,
                p => return Err(usage(format!("unknown position '{p}'"))),
            };
            let corpus = open_corpus(cfg)?;
            let spans = disclosure::extract_corpus(&PatternSet::default_set(), &corpus);
            let table = disclosure::ngram_stats(&corpus, &spans, *n, pos);
            out.write_tsv(&format!("analysis/ngrams_{n}_{position}.tsv"), |w| disclosure::write_stats_tsv(&table, w))?;
        }
        Analysis::Audit { group, n } => {
            let g = HighLevelCategory::parse(group).ok_or_else(|| usage(format!("unknown category '{group}'")))?;
            if *n == 0 {
                return Err(usage("--n must be positive"));
            }
            let corpus = open_corpus(cfg)?;
            let spans = disclosure::extract_corpus(&PatternSet::default_set(), &corpus);
            let profiles = disclosure::build_profiles(&spans);
            let recs = disclosure::audit_sample(&corpus, &profiles, &spans, g, *n, derive_seed(cfg.seed, "audit"));
            out.write(&format!("analysis/audit_{}.jsonl", g.name()), |w| disclosure::write_audit_jsonl(&recs, w))?;
        }
    }
    out.finish()
}

// ------------------------------------------------------------------- synth

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub annotators: usize,
    #[arg(long, default_value_t = 300)]
    pub posts: usize,
    /// demographic_keyed, attitude_keyed or random.
    #[arg(long, default_value = "demographic_keyed")]
    pub rule: String,
    #[arg(long, default_value_t = 0.7)]
    pub nta_rate: f64,
    /// Planting probability for the rule's key category.
    #[arg(long)]
    pub key_mix: Option<f64>,
}

pub fn synth(cfg: &ExperimentConfig, a: &SynthArgs) -> anyhow::Result<()> {
    let rule: JudgmentRule = a.rule.parse().map_err(usage)?;
    let mut spec = PopulationSpec {
        n_annotators: a.annotators,
        n_posts: a.posts,
        judgment_rule: rule,
        nta_base_rate: a.nta_rate,
        seed: cfg.seed,
        ..PopulationSpec::default()
    };
    if let Some(m) = a.key_mix {
        let cat = rule.key_category().ok_or_else(|| usage("--key-mix needs a keyed rule"))?;
        spec.disclosure_mix.insert(cat, m);
    }
    spec.validate().map_err(usage)?;
    let (corpus, pop) = synthgen::generate_population(&spec).map_err(|e| data("synth")(&e))?;
    synthgen::write_population(&cfg.output_dir, &corpus, &pop).map_err(|e| data("synth")(&e))?;
    let mut out = Outputs::new(cfg, "synth");
    out.files
        .extend(["posts.jsonl", "comments.jsonl", "verdicts.jsonl", "ground_truth.jsonl"].map(PathBuf::from));
    out.json("population.json", &spec)?;
    out.finish()
}

// --------------------------------------------------------------------- run

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub train: TrainOverrides,
}

pub fn run(cfg: &ExperimentConfig, _: &RunArgs) -> anyhow::Result<()> {
    let o = pipeline::run_pipeline(cfg)?;
    for r in &o.rows {
        println!(
            "{}\t{:.4}\t{:.4}\t{}",
            r.report.condition,
            r.report.mean_accuracy,
            r.report.mean_macro_f1,
            r.p_value.map(|p| format!("{p:.3e}")).unwrap_or_default()
        );
    }
    Ok(())
}
