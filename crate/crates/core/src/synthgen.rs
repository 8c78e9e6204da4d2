//! Synthetic corpora with planted disclosures and known judgment rules.
//!
//! Keyed rules split annotators into a keyed half and an unkeyed half and
//! mark a subset of posts. A verdict is YTA exactly when the post is marked
//! and the annotator is keyed, so the label is only predictable from the
//! post together with what the annotator has disclosed about themselves.
//! Key disclosures talk about the same topic as marked posts, which lets
//! similarity retrieval surface them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, Corpus, CorpusError, Label, Post, Verdict};
use crate::disclosure::LowLevelCategory;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid population spec: {0}")]
    Invalid(String),
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentRule {
    DemographicKeyed,
    AttitudeKeyed,
    Random,
}

impl JudgmentRule {
    pub fn name(self) -> &'static str {
        match self {
            JudgmentRule::DemographicKeyed => "demographic_keyed",
            JudgmentRule::AttitudeKeyed => "attitude_keyed",
            JudgmentRule::Random => "random",
        }
    }

    /// The category whose plants carry the annotator's key trait.
    pub fn key_category(self) -> Option<LowLevelCategory> {
        match self {
            JudgmentRule::DemographicKeyed => Some(LowLevelCategory::Age),
            JudgmentRule::AttitudeKeyed => Some(LowLevelCategory::Attitude),
            JudgmentRule::Random => None,
        }
    }
}

impl FromStr for JudgmentRule {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "demographic_keyed" => Ok(JudgmentRule::DemographicKeyed),
            "attitude_keyed" => Ok(JudgmentRule::AttitudeKeyed),
            "random" => Ok(JudgmentRule::Random),
            _ => Err(SynthError::Invalid(format!("unknown judgment rule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_annotators: usize,
    pub n_posts: usize,
    /// Inclusive range of background comments per annotator.
    pub comments_per_annotator: (usize, usize),
    /// Inclusive range of verdicts per annotator.
    pub verdicts_per_annotator: (usize, usize),
    /// Per-comment probability of planting a sentence of each category.
    /// For keyed rules the key category's plants carry the key trait.
    pub disclosure_mix: BTreeMap<LowLevelCategory, f64>,
    pub judgment_rule: JudgmentRule,
    pub nta_base_rate: f64,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        use LowLevelCategory::*;
        PopulationSpec {
            n_annotators: 200,
            n_posts: 300,
            comments_per_annotator: (20, 40),
            verdicts_per_annotator: (25, 35),
            disclosure_mix: BTreeMap::from([
                (Identity, 0.05),
                (Gender, 0.05),
                (Age, 0.3),
                (Hobby, 0.15),
                (Possession, 0.15),
                (Work, 0.15),
                (Attitude, 0.15),
                (Relationship, 0.15),
            ]),
            judgment_rule: JudgmentRule::DemographicKeyed,
            nta_base_rate: 0.7,
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_annotators == 0 || self.n_posts == 0 {
            return bad("n_annotators and n_posts must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("comments_per_annotator", self.comments_per_annotator),
            ("verdicts_per_annotator", self.verdicts_per_annotator),
        ] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range ({lo}, {hi}) must be positive and ordered"));
            }
        }
        if self.verdicts_per_annotator.1 > self.n_posts {
            return bad("an annotator cannot judge more posts than exist".into());
        }
        for (c, p) in &self.disclosure_mix {
            if !(0.0..=1.0).contains(p) {
                return bad(format!("planting probability for {c} is {p}"));
            }
        }
        if !(0.0..=1.0).contains(&self.nta_base_rate) {
            return bad(format!("nta_base_rate {} outside [0, 1]", self.nta_base_rate));
        }
        if let Some(key) = self.judgment_rule.key_category() {
            if self.mix(key) <= 0.0 {
                return Err(SynthError::Infeasible(format!(
                    "{} needs a positive {key} planting probability",
                    self.judgment_rule.name()
                )));
            }
            if self.n_annotators < 2 {
                return Err(SynthError::Infeasible("keyed rules need at least two annotators".into()));
            }
            let frac = self.marked_fraction();
            if frac > 1.0 {
                return Err(SynthError::Infeasible(format!(
                    "YTA rate {:.3} needs {:.0}% of posts marked with half the annotators keyed",
                    1.0 - self.nta_base_rate,
                    frac * 100.0
                )));
            }
        }
        Ok(())
    }

    pub fn mix(&self, c: LowLevelCategory) -> f64 {
        self.disclosure_mix.get(&c).copied().unwrap_or(0.0)
    }

    fn keyed_count(&self) -> usize {
        self.n_annotators / 2
    }

    fn marked_fraction(&self) -> f64 {
        (1.0 - self.nta_base_rate) * self.n_annotators as f64 / self.keyed_count() as f64
    }
}

/// Why a verdict got its label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub verdict_key: String,
    pub rule: JudgmentRule,
    pub trigger: String,
}

/// Re-derives a label from a ground-truth record alone.
pub fn rule_label(g: &GroundTruth) -> Option<Label> {
    let fields: BTreeMap<&str, &str> = g.trigger.split(';').filter_map(|kv| kv.split_once('=')).collect();
    match g.rule {
        JudgmentRule::Random => Label::parse(fields.get("draw")?),
        _ => {
            let marked = *fields.get("post_marked")? == "1";
            let keyed = *fields.get("annotator_keyed")? == "1";
            Some(if marked && keyed { Label::Yta } else { Label::Nta })
        }
    }
}

/// Planted structure, kept alongside the corpus for analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub spec: PopulationSpec,
    pub marked_posts: Vec<String>,
    pub keyed_annotators: Vec<String>,
    /// Planted categories per comment id.
    pub plants: BTreeMap<String, Vec<LowLevelCategory>>,
    pub ground_truth: Vec<GroundTruth>,
}

const MARKED_TITLES: &[&str] = &[
    "AITA for throwing a loud party on a weeknight",
    "AITA for playing loud music late at night",
    "AITA for letting my party run past midnight",
    "AITA for hosting a noisy party when the neighbors wanted to sleep",
];
const MARKED_SENTENCES: &[&str] = &[
    "We had a loud party at our place that went late into the night.",
    "The music was pretty loud and the neighbors knocked twice asking us to turn it down.",
    "Some guests stayed until two in the morning and the noise carried through the walls.",
    "The neighbor upstairs says the party noise kept their kids from sleeping.",
    "We turned the music down a little but the party kept going until late.",
    "The building has thin walls and the loud bass was audible next door all night.",
];

const THEMES: &[(&str, &[&str])] = &[
    (
        "AITA for skipping a wedding gift",
        &[
            "A cousin is getting married and the registry is very expensive.",
            "The couple asked every guest for cash toward a honeymoon.",
            "A card with a handwritten note felt like enough.",
            "The bride now says the gift was rude and cheap.",
        ],
    ),
    (
        "AITA for asking a roommate to pay rent on time",
        &[
            "The rent is due on the first and the roommate pays weeks late.",
            "The landlord charges a fee every time the rent is late.",
            "A reminder was sent about the money owed for utilities.",
            "The roommate says asking about money is petty.",
        ],
    ),
    (
        "AITA for refusing to lend the car",
        &[
            "A coworker wanted to borrow the car for a long road trip.",
            "The car is old and the insurance only covers listed drivers.",
            "The answer was no and the coworker got upset.",
            "Now the office thinks refusing was selfish.",
        ],
    ),
    (
        "AITA for not watching a neighbor's dog",
        &[
            "The neighbor asked for help feeding the dog during a vacation.",
            "The dog is large and barks at everyone who walks by.",
            "There was already a busy week planned with long shifts.",
            "The neighbor says a quick walk would not have hurt.",
        ],
    ),
    (
        "AITA for changing the family vacation plans",
        &[
            "The family trip to the beach was booked months ago.",
            "A better cabin rental by the lake came up at half the price.",
            "The booking was switched without asking everyone first.",
            "Some relatives are angry about the lost deposit.",
        ],
    ),
    (
        "AITA for cooking a meal some guests could not eat",
        &[
            "The dinner menu was planned around a roast with butter and cream.",
            "One guest mentioned a dairy allergy only at the table.",
            "There was bread and salad but not much else to offer.",
            "The guest left early and hungry.",
        ],
    ),
    (
        "AITA for covering a coworker's shift only once",
        &[
            "A coworker keeps asking for shift swaps at the last minute.",
            "The manager says team players cover for each other.",
            "The swap was accepted once and declined the next time.",
            "The coworker now complains about the schedule to everyone.",
        ],
    ),
    (
        "AITA for not sharing class notes",
        &[
            "A classmate skipped most lectures this semester.",
            "Right before the exam the classmate asked for every set of notes.",
            "The notes took hours to write and were kept private.",
            "The classmate says grades should not be a competition.",
        ],
    ),
];

// No first person, no possessive relationship words, no numbers: these
// never trigger a pattern.
const DISTRACTORS: &[&str] = &[
    "NTA, a registry is a wish list and not a bill.",
    "YTA, a gift should match the occasion.",
    "NTA, rent is a contract and the roommate knows the date.",
    "Late fees should be split by whoever caused them.",
    "NTA, nobody is owed a car for a road trip.",
    "Insurance rules exist for good reasons.",
    "Dogs need owners who plan ahead for vacations.",
    "YTA, a quick favor for a neighbor costs little.",
    "Changing a shared booking without a vote is risky.",
    "Deposits are rarely refundable, so everyone should agree first.",
    "Allergies should be mentioned before the dinner, not at the table.",
    "Hosts usually keep a simple side dish around for picky guests.",
    "Shift swaps are a favor, not an obligation.",
    "Managers should fix the schedule instead of leaning on goodwill.",
    "Notes are personal work and sharing them is optional.",
    "Skipping lectures has consequences that others should not absorb.",
    "This whole thread is a good reminder to communicate early.",
    "Both sides could have handled the conversation better.",
    "Honestly, this reads like a misunderstanding more than anything.",
    "ESH, the tone of those messages was harsh on both ends.",
    "Good luck sorting it out, these situations are awkward.",
    "Setting boundaries politely is always reasonable.",
];

const JUSTIFICATIONS: &[&str] = &[
    "the behavior described crosses a line",
    "the reaction seems fair given the situation",
    "the other side has a point here",
    "nobody was harmed by that choice",
];

const YOUNG: (u32, u32) = (18, 29);
const OLD: (u32, u32) = (55, 70);

// Key age plants: every template fires Age and shares vocabulary with the
// marked posts.
const AGE_TEMPLATES: &[&str] = &[
    "I'm {age} years old and loud parties late at night are part of life in this building.",
    "I am {age} and the neighbors throwing a loud party keeps happening on weeknights.",
    "Speaking as a {age} y/o, party music at night is something every apartment deals with.",
    "As someone aged {age}, the noise from a late party next door is a familiar thing.",
    "{age} years old here, and loud music at night from the neighbors is an everyday story.",
];
const STRICT_TEMPLATES: &[&str] = &[
    "I think a loud party late at night is never acceptable when neighbors need sleep.",
    "I believe music at night should stop early because loud parties ruin sleep.",
    "I feel that a late party with loud noise is rude to every neighbor.",
];
const LENIENT_TEMPLATES: &[&str] = &[
    "I think a loud party late at night is fine once in a while for any neighbor.",
    "I believe music at night is part of apartment life and parties are normal.",
    "I feel that a late party with some noise is something neighbors should tolerate.",
];
const HOBBY_TEMPLATES: &[&str] = &[
    "I like to go hiking on quiet trails.",
    "I enjoy baking sourdough bread.",
    "I love playing chess in the park.",
    "I prefer reading mystery novels over watching television.",
];
const POSSESSION_TEMPLATES: &[&str] = &[
    "I have two cats who sleep all day.",
    "I own a small vegetable garden.",
    "I've got an old bicycle that still runs well.",
    "I have a collection of vinyl records.",
];
const WORK_TEMPLATES: &[&str] = &[
    "I work as a nurse in a busy clinic.",
    "I work in accounting for a small firm.",
    "I studied chemistry before switching careers.",
    "I used to work at a bookstore downtown.",
];
const ATTITUDE_TEMPLATES: &[&str] = &[
    "I think honesty matters more than politeness.",
    "I believe people should split costs fairly.",
    "I value clear communication in every relationship.",
    "I feel that favors should never be expected.",
];
const RELATIONSHIP_TEMPLATES: &[&str] = &[
    "My sister always borrows things without asking.",
    "My roommate cooks dinner on Sundays.",
    "My husband handles the family budget.",
    "My best friend moved across the country last year.",
];
const GENDER_TEMPLATES: &[&str] = &[
    "I'm a woman who has dealt with this exact situation.",
    "I'm a guy and this kind of thing happens often.",
    "I'm a mother of three and patience runs thin sometimes.",
];
const IDENTITY_TEMPLATES: &[&str] = &[
    "I'm an introvert, so this sounds exhausting.",
    "I'm a vegetarian and cook separate meals all the time.",
    "I am a night owl by nature, that explains a lot.",
];

fn templates(c: LowLevelCategory) -> &'static [&'static str] {
    use LowLevelCategory::*;
    match c {
        Identity => IDENTITY_TEMPLATES,
        Gender => GENDER_TEMPLATES,
        Age => AGE_TEMPLATES,
        Hobby => HOBBY_TEMPLATES,
        Possession => POSSESSION_TEMPLATES,
        Work => WORK_TEMPLATES,
        Attitude => ATTITUDE_TEMPLATES,
        Relationship => RELATIONSHIP_TEMPLATES,
    }
}

/// Every template sentence a generator can plant, with its category. Age
/// templates are instantiated at one young and one old age.
pub fn all_plant_sentences() -> Vec<(LowLevelCategory, String)> {
    let mut out = Vec::new();
    for c in LowLevelCategory::ALL {
        for t in templates(c) {
            if c == LowLevelCategory::Age {
                for age in [YOUNG.0, OLD.1] {
                    out.push((c, t.replace("{age}", &age.to_string())));
                }
            } else {
                out.push((c, t.to_string()));
            }
        }
    }
    for t in STRICT_TEMPLATES.iter().chain(LENIENT_TEMPLATES) {
        out.push((LowLevelCategory::Attitude, t.to_string()));
    }
    out
}

/// Sentences that must never trigger a pattern.
pub fn distractor_sentences() -> &'static [&'static str] {
    DISTRACTORS
}

fn derive(seed: u64, stage: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage.wrapping_mul(1 << 32).wrapping_add(idx));
    rng
}

struct AnnotatorOut {
    comments: Vec<Comment>,
    plants: Vec<(String, Vec<LowLevelCategory>)>,
    verdicts: Vec<(Verdict, GroundTruth)>,
}

/// Builds a corpus and its ground truth from `spec`.
pub fn generate_population(spec: &PopulationSpec) -> Result<(Corpus, Population), SynthError> {
    spec.validate()?;
    let post_ids: Vec<String> = (0..spec.n_posts).map(|i| format!("p{i:04}")).collect();
    let ann_ids: Vec<String> = (0..spec.n_annotators).map(|i| format!("u{i:04}")).collect();

    let mut rng = derive(spec.seed, 0, 0);
    let keyed_rule = spec.judgment_rule.key_category().is_some();
    let (marked, keyed): (Vec<bool>, Vec<bool>) = if keyed_rule {
        let n_marked = (spec.marked_fraction() * spec.n_posts as f64).round() as usize;
        let mut m = vec![false; spec.n_posts];
        for i in rand::seq::index::sample(&mut rng, spec.n_posts, n_marked.min(spec.n_posts)) {
            m[i] = true;
        }
        let mut k = vec![false; spec.n_annotators];
        for i in rand::seq::index::sample(&mut rng, spec.n_annotators, spec.keyed_count()) {
            k[i] = true;
        }
        (m, k)
    } else {
        (vec![false; spec.n_posts], vec![false; spec.n_annotators])
    };

    let posts: Vec<Post> = post_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut r = derive(spec.seed, 1, i as u64);
            let (title, bank): (&str, &[&str]) = if marked[i] {
                (MARKED_TITLES.choose(&mut r).unwrap(), MARKED_SENTENCES)
            } else {
                let t = THEMES.choose(&mut r).unwrap();
                (t.0, t.1)
            };
            let mut body: Vec<&str> = bank.choose_multiple(&mut r, 3).copied().collect();
            body.shuffle(&mut r);
            Post {
                id: id.clone(),
                author_id: format!("op{i:04}"),
                title: title.to_string(),
                body: body.join(" "),
            }
        })
        .collect();

    let outs: Vec<AnnotatorOut> = (0..spec.n_annotators)
        .into_par_iter()
        .map(|a| generate_annotator(spec, a, &ann_ids[a], keyed[a], &post_ids, &marked))
        .collect();

    let mut comments = Vec::new();
    let mut plants = BTreeMap::new();
    let mut verdicts = Vec::new();
    let mut truth = Vec::new();
    for o in outs {
        comments.extend(o.comments);
        plants.extend(o.plants);
        for (v, g) in o.verdicts {
            verdicts.push(v);
            truth.push(g);
        }
    }
    let (corpus, _) = Corpus::from_records(posts, comments, verdicts)?;
    let pop = Population {
        spec: spec.clone(),
        marked_posts: post_ids.iter().zip(&marked).filter(|(_, &m)| m).map(|(p, _)| p.clone()).collect(),
        keyed_annotators: ann_ids.iter().zip(&keyed).filter(|(_, &k)| k).map(|(a, _)| a.clone()).collect(),
        plants,
        ground_truth: truth,
    };
    Ok((corpus, pop))
}

fn key_sentence(rule: JudgmentRule, keyed: bool, age: u32, rng: &mut ChaCha8Rng) -> String {
    match rule {
        JudgmentRule::DemographicKeyed => AGE_TEMPLATES.choose(rng).unwrap().replace("{age}", &age.to_string()),
        JudgmentRule::AttitudeKeyed => {
            let bank = if keyed { STRICT_TEMPLATES } else { LENIENT_TEMPLATES };
            bank.choose(rng).unwrap().to_string()
        }
        JudgmentRule::Random => unreachable!("random rule has no key"),
    }
}

fn generate_annotator(
    spec: &PopulationSpec,
    idx: usize,
    id: &str,
    keyed: bool,
    post_ids: &[String],
    marked: &[bool],
) -> AnnotatorOut {
    let mut rng = derive(spec.seed, 2, idx as u64);
    let rule = spec.judgment_rule;
    let key_cat = rule.key_category();
    // under demographic_keyed the keyed half is the young band
    let band = if keyed || rule != JudgmentRule::DemographicKeyed { YOUNG } else { OLD };
    let age = rng.random_range(band.0..=band.1);

    let n_comments = rng.random_range(spec.comments_per_annotator.0..=spec.comments_per_annotator.1);
    let mut planted: Vec<Vec<LowLevelCategory>> = (0..n_comments)
        .map(|_| {
            LowLevelCategory::ALL
                .into_iter()
                .filter(|c| {
                    let p = spec.mix(*c);
                    p > 0.0 && rng.random_bool(p)
                })
                .collect()
        })
        .collect();
    if let Some(k) = key_cat {
        if !planted.iter().any(|p| p.contains(&k)) {
            let j = rng.random_range(0..n_comments);
            planted[j].push(k);
            planted[j].sort();
        }
    }

    let mut comments = Vec::with_capacity(n_comments);
    let mut plants = Vec::new();
    for (j, cats) in planted.into_iter().enumerate() {
        let cid = format!("{id}_c{j:03}");
        let mut sentences: Vec<String> = cats
            .iter()
            .map(|&c| {
                if Some(c) == key_cat {
                    key_sentence(rule, keyed, age, &mut rng)
                } else if c == LowLevelCategory::Age {
                    AGE_TEMPLATES.choose(&mut rng).unwrap().replace("{age}", &age.to_string())
                } else {
                    templates(c).choose(&mut rng).unwrap().to_string()
                }
            })
            .collect();
        let n_fill = if sentences.is_empty() { rng.random_range(1..=3) } else { rng.random_range(0..=1) };
        sentences.extend(DISTRACTORS.choose_multiple(&mut rng, n_fill).map(|s| s.to_string()));
        sentences.shuffle(&mut rng);
        let mut c = Comment::new(cid.clone(), id, sentences.join(" "));
        if rng.random_bool(0.2) {
            c = c.with_post(post_ids.choose(&mut rng).unwrap().clone());
        }
        if !cats.is_empty() {
            plants.push((cid, cats));
        }
        comments.push(c);
    }

    let n_verdicts = rng.random_range(spec.verdicts_per_annotator.0..=spec.verdicts_per_annotator.1);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, post_ids.len(), n_verdicts).into_vec();
    chosen.sort_unstable();
    let verdicts = chosen
        .into_iter()
        .map(|p| {
            let (label, trigger) = match rule {
                JudgmentRule::Random => {
                    let l = if rng.random_bool(spec.nta_base_rate) { Label::Nta } else { Label::Yta };
                    (l, format!("draw={l}"))
                }
                _ => {
                    let l = if marked[p] && keyed { Label::Yta } else { Label::Nta };
                    (l, format!("post_marked={};annotator_keyed={}", marked[p] as u8, keyed as u8))
                }
            };
            let v = Verdict {
                post_id: post_ids[p].clone(),
                annotator_id: id.to_string(),
                label,
                justification: format!("{label}, {}.", JUSTIFICATIONS.choose(&mut rng).unwrap()),
            };
            let g = GroundTruth {
                verdict_key: v.key(),
                rule,
                trigger,
            };
            (v, g)
        })
        .collect();
    AnnotatorOut {
        comments,
        plants,
        verdicts,
    }
}

pub fn write_ground_truth<W: Write>(truth: &[GroundTruth], mut w: W) -> std::io::Result<()> {
    for g in truth {
        writeln!(w, "{}", serde_json::to_string(g)?)?;
    }
    w.flush()
}

/// Writes posts/comments/verdicts JSONL plus ground_truth.jsonl into `dir`.
pub fn write_population(dir: &Path, corpus: &Corpus, pop: &Population) -> Result<(), SynthError> {
    corpus.write_jsonl(dir)?;
    let f = std::fs::File::create(dir.join("ground_truth.jsonl"))?;
    write_ground_truth(&pop.ground_truth, std::io::BufWriter::new(f))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disclosure::PatternSet;

    fn small(rule: JudgmentRule) -> PopulationSpec {
        PopulationSpec {
            n_annotators: 20,
            n_posts: 40,
            judgment_rule: rule,
            ..Default::default()
        }
    }

    #[test]
    fn templates_are_recoverable() {
        let p = PatternSet::default_set();
        for (cat, s) in all_plant_sentences() {
            let got: Vec<_> = p.extract(&Comment::new("c", "a", s.as_str())).into_iter().map(|x| x.category).collect();
            assert!(got.contains(&cat), "{cat} not recovered from {s:?}: {got:?}");
        }
    }

    #[test]
    fn distractors_are_silent() {
        let p = PatternSet::default_set();
        for s in DISTRACTORS {
            assert!(p.extract(&Comment::new("c", "a", *s)).is_empty(), "{s}");
        }
        for (_, bank) in THEMES {
            for s in *bank {
                assert!(p.extract(&Comment::new("c", "a", *s)).is_empty(), "{s}");
            }
        }
    }

    #[test]
    fn labels_follow_rule() {
        for rule in [JudgmentRule::DemographicKeyed, JudgmentRule::AttitudeKeyed, JudgmentRule::Random] {
            let (c, pop) = generate_population(&small(rule)).unwrap();
            assert_eq!(c.verdicts().len(), pop.ground_truth.len());
            for (v, g) in c.verdicts().iter().zip(&pop.ground_truth) {
                assert_eq!(v.key(), g.verdict_key);
                assert_eq!(rule_label(g), Some(v.label));
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = small(JudgmentRule::DemographicKeyed);
        let (a, pa) = generate_population(&s).unwrap();
        let (b, pb) = generate_population(&s).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a.verdicts(), b.verdicts());
        assert_eq!(a.comments(), b.comments());
    }

    #[test]
    fn infeasible_rate() {
        let s = PopulationSpec {
            nta_base_rate: 0.4,
            ..small(JudgmentRule::DemographicKeyed)
        };
        assert!(matches!(generate_population(&s), Err(SynthError::Infeasible(_))));
        let s = PopulationSpec {
            nta_base_rate: 0.4,
            ..small(JudgmentRule::Random)
        };
        assert!(generate_population(&s).is_ok());
    }

    #[test]
    fn every_annotator_has_a_key() {
        let s = PopulationSpec {
            disclosure_mix: BTreeMap::from([(LowLevelCategory::Age, 0.01)]),
            ..small(JudgmentRule::DemographicKeyed)
        };
        let (c, pop) = generate_population(&s).unwrap();
        for a in c.annotators() {
            assert!(c.comments_of(a).iter().any(|id| pop.plants.get(id).is_some_and(|p| p.contains(&LowLevelCategory::Age))));
        }
    }
}
