//! Theory-based self-disclosure extraction.
//!
//! Comments are split into sentences, each sentence is matched against one
//! regular expression per [`LowLevelCategory`], and matches are rolled up
//! into the four [`HighLevelCategory`] groups. The default patterns live in
//! `patterns/disclosure_v1.patterns` and can be replaced at runtime.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use fancy_regex::Regex;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Comment, Corpus};

pub const DEFAULT_PATTERNS: &str = include_str!("../patterns/disclosure_v1.patterns");

const PATTERN_MAGIC: &str = "# dlab-patterns v1";

/// Self-disclosure trigger phrases used to pre-filter comments before
/// clustering.
pub const PHRASE_FILTER: &[&str] = &[
    "I am",
    "I'm",
    "Im",
    "I have",
    "I like",
    "I love",
    "I hate",
    "I enjoy",
    "I think",
    "I feel",
    "I believe",
    "I wish",
    "I need",
    "I want",
    "I fear",
    "I worry",
    "I tend to",
    "I see myself as",
    "I value",
    "I strive to",
    "I consider myself",
    "I would describe myself as",
    "I would define myself as",
    "I pride myself on",
    "I am good at",
    "I struggle with",
    "I find it easy to",
    "I have a hard time",
    "I excel at",
    "I know that I",
    "Ive learned that I",
    "I've learned that I",
    "I have learned that I",
    "I realize that",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LowLevelCategory {
    Identity,
    Gender,
    Age,
    Hobby,
    Possession,
    Work,
    Attitude,
    Relationship,
}

impl LowLevelCategory {
    pub const ALL: [LowLevelCategory; 8] = [
        LowLevelCategory::Identity,
        LowLevelCategory::Gender,
        LowLevelCategory::Age,
        LowLevelCategory::Hobby,
        LowLevelCategory::Possession,
        LowLevelCategory::Work,
        LowLevelCategory::Attitude,
        LowLevelCategory::Relationship,
    ];

    pub fn high_level(self) -> HighLevelCategory {
        use LowLevelCategory::*;
        match self {
            Identity | Gender | Age => HighLevelCategory::Demographics,
            Hobby | Possession | Work => HighLevelCategory::Experiences,
            Attitude => HighLevelCategory::Attitudes,
            Relationship => HighLevelCategory::Relationships,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LowLevelCategory::Identity => "Identity",
            LowLevelCategory::Gender => "Gender",
            LowLevelCategory::Age => "Age",
            LowLevelCategory::Hobby => "Hobby",
            LowLevelCategory::Possession => "Possession",
            LowLevelCategory::Work => "Work",
            LowLevelCategory::Attitude => "Attitude",
            LowLevelCategory::Relationship => "Relationship",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for LowLevelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HighLevelCategory {
    Demographics,
    Experiences,
    Attitudes,
    Relationships,
}

impl HighLevelCategory {
    pub const ALL: [HighLevelCategory; 4] = [
        HighLevelCategory::Demographics,
        HighLevelCategory::Experiences,
        HighLevelCategory::Attitudes,
        HighLevelCategory::Relationships,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HighLevelCategory::Demographics => "Demographics",
            HighLevelCategory::Experiences => "Experiences",
            HighLevelCategory::Attitudes => "Attitudes",
            HighLevelCategory::Relationships => "Relationships",
        }
    }

    pub fn members(self) -> Vec<LowLevelCategory> {
        LowLevelCategory::ALL
            .into_iter()
            .filter(|c| c.high_level() == self)
            .collect()
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for HighLevelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PatternError {
    #[error("pattern file does not start with '{PATTERN_MAGIC}'")]
    BadHeader,
    #[error("pattern file checksum mismatch (header {expected}, body {actual})")]
    Checksum { expected: String, actual: String },
    #[error("unknown category section [{0}]")]
    UnknownSection(String),
    #[error("section [{0}] must hold exactly one pattern, found {1}")]
    PatternCount(String, usize),
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("pattern for {category} does not compile: {message}")]
    Compile { category: String, message: String },
    #[error("cannot read pattern file: {0}")]
    Io(#[from] std::io::Error),
}

/// Compiled pattern set, one regex per low-level category.
#[derive(Debug, Clone)]
pub struct PatternSet {
    sources: Vec<(LowLevelCategory, String)>,
    compiled: Vec<(LowLevelCategory, Regex)>,
    checksum: String,
}

fn body_checksum(body: &str) -> String {
    let digest = Sha256::digest(body.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl PatternSet {
    pub fn default_set() -> PatternSet {
        Self::parse(DEFAULT_PATTERNS).expect("shipped pattern file is valid")
    }

    pub fn load(path: &Path) -> Result<PatternSet, PatternError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the pattern file format: a magic line, a `# sha256 <hex>`
    /// line covering everything after it, then `[Category]` sections holding
    /// exactly one non-comment line each.
    pub fn parse(text: &str) -> Result<PatternSet, PatternError> {
        let (magic, rest) = text.split_once('\n').ok_or(PatternError::BadHeader)?;
        if magic.trim_end() != PATTERN_MAGIC {
            return Err(PatternError::BadHeader);
        }
        let (sum_line, body) = rest.split_once('\n').ok_or(PatternError::BadHeader)?;
        let expected = sum_line
            .trim()
            .strip_prefix("# sha256 ")
            .ok_or(PatternError::BadHeader)?
            .trim()
            .to_string();
        let actual = body_checksum(body);
        if expected != actual {
            return Err(PatternError::Checksum { expected, actual });
        }

        let mut sections: BTreeMap<LowLevelCategory, Vec<String>> = BTreeMap::new();
        let mut current = None;
        for line in body.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let cat = LowLevelCategory::parse(name)
                    .ok_or_else(|| PatternError::UnknownSection(name.to_string()))?;
                sections.entry(cat).or_default();
                current = Some(cat);
                continue;
            }
            match current {
                Some(cat) => sections.entry(cat).or_default().push(trimmed.to_string()),
                None => return Err(PatternError::UnknownSection(trimmed.to_string())),
            }
        }
        let mut sources = Vec::new();
        for cat in LowLevelCategory::ALL {
            let lines = sections
                .remove(&cat)
                .ok_or(PatternError::MissingSection(cat.name()))?;
            if lines.len() != 1 {
                return Err(PatternError::PatternCount(cat.name().to_string(), lines.len()));
            }
            sources.push((cat, lines.into_iter().next().unwrap()));
        }
        Self::from_sources(sources, actual)
    }

    fn from_sources(sources: Vec<(LowLevelCategory, String)>, checksum: String) -> Result<PatternSet, PatternError> {
        let compiled = sources
            .iter()
            .map(|(cat, src)| {
                Regex::new(&format!("(?i){src}"))
                    .map(|re| (*cat, re))
                    .map_err(|e| PatternError::Compile {
                        category: cat.name().to_string(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PatternSet {
            sources,
            compiled,
            checksum,
        })
    }

    pub fn source(&self, cat: LowLevelCategory) -> &str {
        &self.sources.iter().find(|(c, _)| *c == cat).unwrap().1
    }

    pub fn regex(&self, cat: LowLevelCategory) -> &Regex {
        &self.compiled.iter().find(|(c, _)| *c == cat).unwrap().1
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Extracts spans from every sentence of `c`.
    pub fn extract(&self, c: &Comment) -> Vec<DisclosureSpan> {
        let mut spans = Vec::new();
        for (si, range) in c.sentences().iter().enumerate() {
            spans.extend(self.extract_sentence(&c.id, si, &c.text, range.clone()));
        }
        spans
    }

    fn extract_sentence(&self, comment_id: &str, sentence_index: usize, text: &str, range: Range<usize>) -> Vec<DisclosureSpan> {
        let sentence = &text[range.clone()];
        let mut spans = Vec::new();
        let mut shorthand: Vec<Range<usize>> = Vec::new();
        for (cat, re) in &self.compiled {
            let mut found: Vec<(Range<usize>, usize)> = Vec::new();
            for caps in re.captures_iter(sentence) {
                let caps = match caps {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("pattern {cat} aborted on comment {comment_id}: {e}");
                        break;
                    }
                };
                let whole = caps.get(0).unwrap();
                if whole.start() == whole.end() {
                    continue;
                }
                if *cat == LowLevelCategory::Gender
                    && (caps.name("short_gender").is_some() || caps.name("short_gender2").is_some())
                {
                    shorthand.push(whole.start()..whole.end());
                }
                // content begins at the highest-index group that took part
                let content = (1..caps.len())
                    .rev()
                    .find_map(|i| caps.get(i))
                    .map(|m| m.start())
                    .unwrap_or(whole.start());
                found.push((whole.start()..whole.end(), content));
            }
            // merge overlaps within the category, keeping the leftmost start
            found.sort_by_key(|(r, _)| (r.start, std::cmp::Reverse(r.end)));
            let mut merged: Vec<(Range<usize>, usize)> = Vec::new();
            for (r, content) in found {
                match merged.last_mut() {
                    Some((last, _)) if r.start < last.end => last.end = last.end.max(r.end),
                    _ => merged.push((r, content)),
                }
            }
            for (r, content) in merged {
                spans.push(DisclosureSpan {
                    comment_id: comment_id.to_string(),
                    sentence_index,
                    category: *cat,
                    char_start: range.start + r.start,
                    char_end: range.start + r.end,
                    content_start: range.start + content,
                    matched_text: sentence[r].to_string(),
                });
            }
        }
        if !shorthand.is_empty() {
            spans.retain(|s| {
                s.category != LowLevelCategory::Age
                    || !shorthand.iter().any(|g| {
                        let (a, b) = (s.char_start - range.start, s.char_end - range.start);
                        a < g.end && g.start < b
                    })
            });
        }
        spans.sort_by_key(|s| (s.char_start, s.category));
        spans
    }

    /// Serializes back to the pattern-file format with a fresh checksum.
    pub fn to_file_string(&self) -> String {
        let mut body = String::new();
        for (cat, src) in &self.sources {
            body.push_str(&format!("[{}]\n{}\n\n", cat.name(), src));
        }
        format!("{PATTERN_MAGIC}\n# sha256 {}\n{body}", body_checksum(&body))
    }
}

/// One regex match inside one sentence. Offsets are byte offsets into the
/// comment text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureSpan {
    pub comment_id: String,
    pub sentence_index: usize,
    pub category: LowLevelCategory,
    pub char_start: usize,
    pub char_end: usize,
    /// Where the disclosed content starts, after the first-person trigger.
    pub content_start: usize,
    pub matched_text: String,
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text, and on
/// newlines. Returned byte ranges exclude surrounding whitespace.
pub fn segment_sentences(text: &str) -> Vec<Range<usize>> {
    let mut raw = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if ch == '\n' {
            raw.push(start..i);
            start = i + 1;
        } else if matches!(ch, '.' | '!' | '?') {
            let next_ws = chars.peek().map(|&(_, n)| n.is_whitespace()).unwrap_or(true);
            if next_ws {
                raw.push(start..i + 1);
                start = i + 1;
            }
        }
    }
    raw.push(start..text.len());
    raw.into_iter()
        .filter_map(|r| {
            let seg = &text[r.clone()];
            let lead = seg.len() - seg.trim_start().len();
            let trimmed = seg.trim();
            (!trimmed.is_empty()).then(|| r.start + lead..r.start + lead + trimmed.len())
        })
        .collect()
}

pub fn extract_disclosures(patterns: &PatternSet, c: &Comment) -> Vec<DisclosureSpan> {
    patterns.extract(c)
}

pub fn assign_theory_categories(patterns: &PatternSet, c: &Comment) -> BTreeSet<HighLevelCategory> {
    patterns
        .extract(c)
        .into_iter()
        .map(|s| s.category.high_level())
        .collect()
}

/// True iff any phrase from [`PHRASE_FILTER`] occurs in `text`.
pub fn matches_phrase_filter(text: &str) -> bool {
    PHRASE_FILTER.iter().any(|p| text.contains(p))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub comment_id: String,
    pub theory_categories: BTreeSet<HighLevelCategory>,
    /// Present only for comments that passed the phrase filter and were
    /// clustered.
    pub cluster_id: Option<usize>,
    pub low_level: BTreeSet<LowLevelCategory>,
}

impl CategoryProfile {
    pub fn has_theory(&self, c: HighLevelCategory) -> bool {
        self.theory_categories.contains(&c)
    }
}

pub type ProfileIndex = BTreeMap<String, CategoryProfile>;
pub type SpanIndex = BTreeMap<String, Vec<DisclosureSpan>>;

/// Runs extraction over every comment in parallel.
pub fn extract_corpus(patterns: &PatternSet, corpus: &Corpus) -> SpanIndex {
    let comments: Vec<&Comment> = corpus.comments().values().collect();
    comments
        .par_iter()
        .map(|c| (c.id.clone(), patterns.extract(c)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Builds theory-category profiles from extracted spans. Cluster ids are
/// filled in later by the clustering stage.
pub fn build_profiles(spans: &SpanIndex) -> ProfileIndex {
    spans
        .iter()
        .map(|(id, spans)| {
            let low: BTreeSet<LowLevelCategory> = spans.iter().map(|s| s.category).collect();
            let profile = CategoryProfile {
                comment_id: id.clone(),
                theory_categories: low.iter().map(|c| c.high_level()).collect(),
                cluster_id: None,
                low_level: low,
            };
            (id.clone(), profile)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSpan {
    pub category: LowLevelCategory,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub comment_id: String,
    pub text: String,
    pub spans: Vec<AuditSpan>,
}

/// Draws up to `n` comments uniformly without replacement from those whose
/// profile contains `group`, returning them sorted by id with their spans
/// for manual review.
pub fn audit_sample(
    corpus: &Corpus,
    profiles: &ProfileIndex,
    spans: &SpanIndex,
    group: HighLevelCategory,
    n: usize,
    seed: u64,
) -> Vec<AuditRecord> {
    assert!(n >= 1, "audit sample size must be positive");
    let pool: Vec<&str> = profiles
        .values()
        .filter(|p| p.has_theory(group))
        .map(|p| p.comment_id.as_str())
        .collect();
    if pool.is_empty() {
        log::warn!("no comments in group {group}; audit sample is empty");
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<&str> = pool.choose_multiple(&mut rng, n).copied().collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .filter_map(|id| {
            let comment = corpus.comment(id)?;
            let spans = spans
                .get(id)
                .map(|v| {
                    v.iter()
                        .filter(|s| s.category.high_level() == group)
                        .map(|s| AuditSpan {
                            category: s.category,
                            start: s.char_start,
                            end: s.char_end,
                        })
                        .collect()
                })
                .unwrap_or_default();
            Some(AuditRecord {
                comment_id: id.to_string(),
                text: comment.text.clone(),
                spans,
            })
        })
        .collect()
}

pub fn write_audit_jsonl<W: Write>(records: &[AuditRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NgramPosition {
    Before,
    After,
}

/// Lowercased word tokens: maximal runs of alphanumerics and apostrophes.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’'))
        .map(|t| t.trim_matches(|c| c == '\'' || c == '’'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Counts lowercase n-grams in the part of each disclosure's sentence that
/// precedes the disclosed content (`Before`) or follows the match
/// (`After`). Sorted by count descending, then n-gram ascending.
pub fn ngram_stats(corpus: &Corpus, spans: &SpanIndex, n: usize, position: NgramPosition) -> Vec<(String, usize)> {
    assert!((1..=3).contains(&n), "n-gram order must be 1, 2 or 3");
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (id, list) in spans {
        let Some(comment) = corpus.comment(id) else { continue };
        let sentences = comment.sentences();
        for span in list {
            let Some(sentence) = sentences.get(span.sentence_index) else { continue };
            let region = match position {
                NgramPosition::Before => &comment.text[sentence.start..span.content_start],
                NgramPosition::After => &comment.text[span.char_end..sentence.end],
            };
            let words = word_tokens(region);
            for window in words.windows(n) {
                *counts.entry(window.join(" ")).or_default() += 1;
            }
        }
    }
    let mut table: Vec<(String, usize)> = counts.into_iter().collect();
    table.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    table
}

pub fn write_stats_tsv<W: Write>(table: &[(String, usize)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "ngram\tcount")?;
    for (g, c) in table {
        writeln!(w, "{g}\t{c}")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(text: &str) -> BTreeSet<LowLevelCategory> {
        let p = PatternSet::default_set();
        p.extract(&Comment::new("c", "a", text))
            .into_iter()
            .map(|s| s.category)
            .collect()
    }

    #[test]
    fn segmentation_basics() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n\n ").is_empty());
        let t = "I'm 22. My mom is mad!";
        let s: Vec<&str> = segment_sentences(t).into_iter().map(|r| &t[r]).collect();
        assert_eq!(s, ["I'm 22.", "My mom is mad!"]);
        let t = "no terminal punctuation here";
        assert_eq!(segment_sentences(t), vec![0..t.len()]);
    }

    #[test]
    fn segmentation_oracle_fixture() {
        // hand-segmented
        let cases: &[(&str, &[&str])] = &[
            ("Wait!! What?", &["Wait!!", "What?"]),
            ("Version 2.5 is out. Nice", &["Version 2.5 is out.", "Nice"]),
            ("one\ntwo\n\nthree", &["one", "two", "three"]),
            ("  padded.  ", &["padded."]),
            ("e.g. this", &["e.g.", "this"]),
            ("Is it? Yes. No!", &["Is it?", "Yes.", "No!"]),
            ("ünïcode é. ok", &["ünïcode é.", "ok"]),
            ("...", &["..."]),
            ("a.b.c", &["a.b.c"]),
            ("End.\n", &["End."]),
        ];
        for (text, want) in cases {
            let got: Vec<&str> = segment_sentences(text).into_iter().map(|r| &text[r]).collect();
            assert_eq!(&got, want, "{text:?}");
        }
    }

    #[test]
    fn golden_table_examples() {
        use LowLevelCategory::*;
        let golden: &[(&str, LowLevelCategory)] = &[
            ("I'm 22 yrs old and my mom is telling everyone that she isn't spending alot of money on Christmas this year.", Age),
            ("I'm an 100% cis woman totally comfortable in my gender identity", Gender),
            ("I'm an omnivore but I make food for myself that happens to be vegan", Identity),
            ("I'm happily married and attractive thanks", Identity),
            ("I like to play video\\board games and have no friends and am super awkward", Hobby),
            ("I have five cats and they love to watch the cat and nature shows on youtube", Possession),
            ("I work as a civil engineer and the salary is decent but definitely not enough to be shelling out $60K for a master's program", Work),
            ("I think it’s ridiculous that people aren’t allowed to use computers in tests in this day and age", Attitude),
            ("I consider American policing one of the most authoritarian parts of my government", Attitude),
            ("I got the feeling that my sister & friends think everything I have was handed to me or came easily.", Relationship),
            ("I have a friend I have known for a couple of years now, she lives in another country but we have seen each others a couple of times and we talk daily and I would say she is a very good friend of mine.", Relationship),
        ];
        for (text, cat) in golden {
            assert!(cats(text).contains(cat), "{cat} not found in {text:?}: {:?}", cats(text));
        }
    }

    #[test]
    fn shorthand_is_gender_only() {
        use LowLevelCategory::*;
        let c = cats("24F here");
        assert!(c.contains(&Gender));
        assert!(!c.contains(&Age));
        let c = cats("I'm 24F and tired");
        assert!(c.contains(&Gender) && !c.contains(&Age), "{c:?}");
        let c = cats("F24 checking in");
        assert!(c.contains(&Gender) && !c.contains(&Age));
        assert!(cats("I am 31 and exhausted").contains(&Age));
        assert!(cats("My nephew is 17 y/o").contains(&Age));
    }

    #[test]
    fn no_disclosure() {
        assert!(cats("The weather is nice.").is_empty());
        assert!(cats("").is_empty());
    }

    #[test]
    fn attitude_and_union() {
        let p = PatternSet::default_set();
        let c = Comment::new("c", "a", "I think driving is scary");
        assert_eq!(
            assign_theory_categories(&p, &c),
            BTreeSet::from([HighLevelCategory::Attitudes])
        );
        let c = Comment::new("c", "a", "I'm 40 years old. I work in a bakery.");
        assert_eq!(
            assign_theory_categories(&p, &c),
            BTreeSet::from([HighLevelCategory::Demographics, HighLevelCategory::Experiences])
        );
    }

    #[test]
    fn spans_are_well_formed() {
        let p = PatternSet::default_set();
        let c = Comment::new("c", "a", "Héllo there. I'm 22 yrs old! My mom says I like cats, I think so.\nI have a dog");
        let spans = p.extract(&c);
        assert!(!spans.is_empty());
        for s in &spans {
            assert!(s.char_start < s.char_end);
            let sent = &c.sentences()[s.sentence_index];
            assert!(sent.start <= s.char_start && s.char_end <= sent.end);
            assert!(s.char_start <= s.content_start && s.content_start <= s.char_end);
            assert_eq!(&c.text[s.char_start..s.char_end], s.matched_text);
        }
        assert!(spans.windows(2).all(|w| (w[0].char_start, w[0].category) <= (w[1].char_start, w[1].category)));
        assert_eq!(spans, p.extract(&c));
    }

    #[test]
    fn phrase_filter() {
        assert!(matches_phrase_filter("I consider myself lucky"));
        assert!(!matches_phrase_filter(""));
        assert!(!matches_phrase_filter("the weather is nice"));
    }

    #[test]
    fn pattern_file_checksum_enforced() {
        let p = PatternSet::default_set();
        let text = p.to_file_string();
        let again = PatternSet::parse(&text).unwrap();
        for cat in LowLevelCategory::ALL {
            assert_eq!(again.source(cat), p.source(cat));
        }
        let tampered = text.replacen("I like", "I lik", 1);
        assert!(matches!(PatternSet::parse(&tampered), Err(PatternError::Checksum { .. })));
        assert!(matches!(PatternSet::parse("nope\n"), Err(PatternError::BadHeader)));
    }

    #[test]
    fn mapping_is_total() {
        for c in LowLevelCategory::ALL {
            assert!(HighLevelCategory::ALL.contains(&c.high_level()));
        }
        assert_eq!(HighLevelCategory::Demographics.members().len(), 3);
        assert_eq!(HighLevelCategory::Experiences.members().len(), 3);
        assert_eq!(HighLevelCategory::Attitudes.members(), vec![LowLevelCategory::Attitude]);
        assert_eq!(HighLevelCategory::Relationships.members(), vec![LowLevelCategory::Relationship]);
    }

    #[test]
    fn tokens() {
        assert_eq!(word_tokens("So, I don't THINK!"), ["so", "i", "don't", "think"]);
    }
}
