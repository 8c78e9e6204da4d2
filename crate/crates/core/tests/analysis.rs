use std::collections::{BTreeMap, BTreeSet};

use dlab_core::corpus::{Comment, Corpus, Label, Post, Verdict};
use dlab_core::disclosure::{self, HighLevelCategory, NgramPosition, PatternSet};
use dlab_core::sampler::{self, ContextItem, ContextSet};
use proptest::prelude::*;

fn corpus(comments: &[(&str, &str, &str)]) -> Corpus {
    let posts = vec![Post {
        id: "p".into(),
        author_id: "op".into(),
        title: "t".into(),
        body: String::new(),
    }];
    let comments: Vec<Comment> = comments.iter().map(|(id, a, t)| Comment::new(*id, *a, *t)).collect();
    let authors: BTreeSet<&str> = comments.iter().map(|c| c.author_id.as_str()).collect();
    let verdicts = authors
        .into_iter()
        .map(|a| Verdict {
            post_id: "p".into(),
            annotator_id: a.into(),
            label: Label::Nta,
            justification: String::new(),
        })
        .collect();
    Corpus::from_records(posts, comments, verdicts).unwrap().0
}

#[test]
fn ngrams_count_words_before_the_disclosed_content() {
    let c = corpus(&[
        ("c1", "a", "Honestly I work as a nurse."),
        ("c2", "a", "Well honestly I work as a teacher."),
        ("c3", "b", "I have two dogs."),
    ]);
    let spans = disclosure::extract_corpus(&PatternSet::default_set(), &c);
    // hand count from the span boundaries reported by the extractor
    let mut want: BTreeMap<String, usize> = BTreeMap::new();
    for (id, list) in &spans {
        let cm = c.comment(id).unwrap();
        for s in list {
            let sent = &cm.sentences()[s.sentence_index];
            let words: Vec<String> = cm.text[sent.start..s.content_start]
                .split_whitespace()
                .map(|w| w.trim_matches(|ch: char| !ch.is_alphanumeric() && ch != '\'').to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            for w in words {
                *want.entry(w).or_default() += 1;
            }
        }
    }
    let got: BTreeMap<String, usize> = disclosure::ngram_stats(&c, &spans, 1, NgramPosition::Before).into_iter().collect();
    assert_eq!(got, want);
    assert_eq!(got.get("honestly"), Some(&2));
    assert_eq!(got.get("well"), Some(&1));

    let table = disclosure::ngram_stats(&c, &spans, 2, NgramPosition::Before);
    assert!(table.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
    let mut tsv = Vec::new();
    disclosure::write_stats_tsv(&table, &mut tsv).unwrap();
    assert!(String::from_utf8(tsv).unwrap().starts_with("ngram\tcount\n"));
}

#[test]
fn audit_draws_only_from_the_group() {
    let c = corpus(&[
        ("c1", "a", "I'm 30 years old."),
        ("c2", "a", "I have three cats."),
        ("c3", "b", "I am a 25 year old woman."),
        ("c4", "b", "Nothing to see."),
        ("c5", "b", "I'm 41 and tired."),
    ]);
    let spans = disclosure::extract_corpus(&PatternSet::default_set(), &c);
    let profiles = disclosure::build_profiles(&spans);
    let recs = disclosure::audit_sample(&c, &profiles, &spans, HighLevelCategory::Demographics, 10, 1);
    let ids: Vec<&str> = recs.iter().map(|r| r.comment_id.as_str()).collect();
    assert_eq!(ids, ["c1", "c3", "c5"]);
    for r in &recs {
        assert!(!r.spans.is_empty());
        assert!(r.spans.iter().all(|s| s.category.high_level() == HighLevelCategory::Demographics));
    }
    let two = disclosure::audit_sample(&c, &profiles, &spans, HighLevelCategory::Demographics, 2, 9);
    assert_eq!(two.len(), 2);
    assert_eq!(two, disclosure::audit_sample(&c, &profiles, &spans, HighLevelCategory::Demographics, 2, 9));
    assert!(disclosure::audit_sample(&c, &profiles, &spans, HighLevelCategory::Relationships, 3, 1).is_empty());
}

proptest! {
    #[test]
    fn coverage_rows_add_up(
        cats in prop::collection::vec((prop::collection::btree_set(0usize..4, 0..3), prop::option::of(0usize..3)), 1..12),
        picks in prop::collection::vec(prop::collection::vec(0usize..12, 0..6), 1..6),
    ) {
        let mut profiles = disclosure::ProfileIndex::new();
        for (i, (th, cl)) in cats.iter().enumerate() {
            if th.is_empty() && cl.is_none() {
                continue;
            }
            profiles.insert(format!("c{i}"), disclosure::CategoryProfile {
                comment_id: format!("c{i}"),
                theory_categories: th.iter().map(|&t| HighLevelCategory::ALL[t]).collect(),
                cluster_id: *cl,
                low_level: BTreeSet::new(),
            });
        }
        let sets: Vec<ContextSet> = picks.iter().enumerate().map(|(n, p)| ContextSet {
            annotator_id: format!("u{n}"),
            post_id: "p".into(),
            items: p.iter().map(|&i| ContextItem {
                source_comment_id: format!("c{}", i % cats.len()),
                item_id: format!("c{}", i % cats.len()),
                text: String::new(),
                similarity: None,
            }).collect(),
        }).collect();
        let total: usize = sets.iter().map(|s| s.items.len()).sum();
        let rows = sampler::category_coverage(&sets, &profiles);
        let get = |t: &str| rows.iter().find(|r| r.tag == t).map(|r| r.percent).unwrap();
        let clusters: f64 = rows.iter().filter(|r| r.tag.starts_with("cluster_") || r.tag == "none_cluster").map(|r| r.percent).sum();
        if total == 0 {
            prop_assert!(rows.iter().all(|r| r.percent == 0.0));
        } else {
            prop_assert!((clusters - 100.0).abs() < 1e-9);
            let theory: f64 = HighLevelCategory::ALL.iter().map(|c| get(c.name())).sum::<f64>() + get("none_theory");
            prop_assert!(theory >= 100.0 - 1e-9);
            prop_assert!(theory <= 300.0 + 1e-9);
        }
    }
}
