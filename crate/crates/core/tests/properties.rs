use std::collections::BTreeSet;

use dlab_core::cluster;
use dlab_core::corpus::{self, Comment, Corpus, Label, Post, SplitKind, Verdict};
use dlab_core::disclosure::{self, PatternSet};
use dlab_core::embed::{cosine_similarity, top_k_similar, EmbedderConfig, EmbeddingMatrix};
use dlab_core::model::{self, FeatureVector, ModelParams, TrainConfig};
use dlab_core::sampler::{self, EmbeddingStore, SamplerConfig, Strategy as Sampling};
use proptest::prelude::*;

fn vec_f32(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-10.0f32..10.0, dim)
}

fn nonzero(v: &[f32]) -> bool {
    v.iter().any(|x| x.abs() > 1e-3)
}

fn matrix_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f32>>)> {
    (1usize..8, 2usize..30).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(vec_f32(d), n)))
}

fn matrix(rows: Vec<Vec<f32>>) -> EmbeddingMatrix {
    let ids = (0..rows.len()).map(|i| format!("r{i:03}")).collect();
    EmbeddingMatrix::from_rows(ids, rows, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(u in vec_f32(6), v in vec_f32(6), s in 0.01f32..100.0) {
        prop_assume!(nonzero(&u) && nonzero(&v));
        let a = cosine_similarity(&u, &v).unwrap();
        let b = cosine_similarity(&v, &u).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
        let scaled: Vec<f32> = u.iter().map(|x| x * s).collect();
        let c = cosine_similarity(&scaled, &v).unwrap();
        prop_assert!((a - c).abs() < 1e-5, "{a} vs {c}");
    }

    #[test]
    fn top_k_matches_full_sort((d, rows) in matrix_strategy(), k in 1usize..10, q in vec_f32(8), drop in 0usize..4) {
        let q = &q[..d];
        prop_assume!(nonzero(q) && rows.iter().all(|r| nonzero(r)));
        let m = matrix(rows);
        let exclude: BTreeSet<String> = m.ids().iter().take(drop).cloned().collect();
        let got = top_k_similar(q, &m, k, &exclude).unwrap();
        let mut all: Vec<(String, f64)> = (0..m.rows())
            .filter(|&i| !exclude.contains(&m.ids()[i]))
            .map(|i| (m.ids()[i].clone(), cosine_similarity(q, m.row(i)).unwrap()))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        prop_assert_eq!(got, all);
    }

    #[test]
    fn embx_round_trip_is_bit_exact((_, rows) in matrix_strategy()) {
        let m = matrix(rows);
        let mut buf = Vec::new();
        m.write_embx(&mut buf).unwrap();
        let back = EmbeddingMatrix::read_embx(&buf[..]).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        let bits = |m: &EmbeddingMatrix| m.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn silhouette_is_bounded((_, rows) in matrix_strategy(), k in 2usize..5, seed in any::<u64>()) {
        prop_assume!(rows.len() > k);
        let m = matrix(rows);
        let model = cluster::kmeans(&m, k, seed).unwrap();
        prop_assume!(model.sizes().iter().filter(|&&s| s > 0).count() >= 2);
        let rep = cluster::silhouette(&m, &model).unwrap();
        for s in rep.per_point.values() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(s));
        }
    }

    #[test]
    fn lloyd_inertia_never_increases((_, rows) in matrix_strategy(), k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(rows.len() >= k);
        let m = matrix(rows);
        let model = cluster::kmeans(&m, k, seed).unwrap();
        for w in model.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9, "{:?}", model.inertia_history);
        }
        prop_assert_eq!(model.assignment.len(), m.rows());
    }

    #[test]
    fn svd_components_are_orthonormal(rows in prop::collection::vec(vec_f32(6), 8..20), target in 1usize..5, seed in any::<u64>()) {
        let m = matrix(rows);
        let (reduced, proj) = cluster::truncated_svd(&m, target, seed).unwrap();
        prop_assert_eq!(reduced.dim(), target);
        for a in 0..target {
            for b in 0..target {
                let dot: f64 = proj.components[a].iter().zip(&proj.components[b]).map(|(x, y)| x * y).sum();
                let na: f64 = proj.components[a].iter().map(|x| x * x).sum();
                // rank-deficient inputs leave zero rows
                let want = if a == b && na > 0.5 { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-6, "({a},{b}) = {dot}");
            }
        }
        let captured: f64 = proj.variance_ratios().iter().sum();
        prop_assert!(captured <= 1.0 + 1e-9);
    }

    #[test]
    fn predicted_probabilities_sum_to_one(dim in 1usize..16, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(2 * dim, TrainConfig::default());
        for w in p.weights.iter_mut() {
            *w = rng.random_range(-50.0..50.0);
        }
        p.bias = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let post: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ctx: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (label, probs) = model::predict(&p, &FeatureVector::new(&post, &ctx).unwrap()).unwrap();
        prop_assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        let expect = if probs[0] > probs[1] { Label::Yta } else { Label::Nta };
        prop_assert_eq!(label, expect);
    }

    #[test]
    fn metric_identities(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let to = |b: bool| if b { Label::Yta } else { Label::Nta };
        let pred: Vec<Label> = pairs.iter().map(|p| to(p.0)).collect();
        let truth: Vec<Label> = pairs.iter().map(|p| to(p.1)).collect();
        let r = model::eval_predictions(&pred, &truth);
        let total: usize = r.confusion.iter().flatten().sum();
        prop_assert_eq!(total, pairs.len());
        let diag = r.confusion[0][0] + r.confusion[1][1];
        prop_assert!((r.accuracy - diag as f64 / pairs.len() as f64).abs() < 1e-12);
        prop_assert_eq!(r.correct.iter().filter(|&&c| c).count(), diag);
        prop_assert!((r.macro_f1 - (r.per_class[0].f1 + r.per_class[1].f1) / 2.0).abs() < 1e-12);
        for c in &r.per_class {
            prop_assert!((0.0..=1.0).contains(&c.f1));
            let hm = if c.precision + c.recall > 0.0 { 2.0 * c.precision * c.recall / (c.precision + c.recall) } else { 0.0 };
            prop_assert!((c.f1 - hm).abs() < 1e-12);
        }
        prop_assert_eq!(r.per_class[0].support + r.per_class[1].support, pairs.len());
    }
}

/// Small corpus where every annotator has comments on a subset of posts.
fn corpus_from(n_posts: usize, n_ann: usize, links: &[(usize, usize, Option<usize>)]) -> Corpus {
    let posts = (0..n_posts)
        .map(|i| Post {
            id: format!("p{i}"),
            author_id: "op".into(),
            title: format!("would it be wrong to skip the wedding number {i}"),
            body: String::new(),
        })
        .collect();
    let mut comments = Vec::new();
    for (n, &(a, _, on)) in links.iter().enumerate() {
        let mut c = Comment::new(format!("c{n}"), format!("u{}", a % n_ann), format!("I am {} years old and I like the wedding {n}", 20 + n % 40));
        if let Some(p) = on {
            c = c.with_post(format!("p{}", p % n_posts));
        }
        comments.push(c);
    }
    let mut verdicts = Vec::new();
    let mut seen = BTreeSet::new();
    for &(a, p, _) in links {
        let key = (a % n_ann, p % n_posts);
        if seen.insert(key) {
            verdicts.push(Verdict {
                post_id: format!("p{}", key.1),
                annotator_id: format!("u{}", key.0),
                label: if (key.0 + key.1).is_multiple_of(3) { Label::Yta } else { Label::Nta },
                justification: String::new(),
            });
        }
    }
    Corpus::from_records(posts, comments, verdicts).unwrap().0
}

fn links() -> impl Strategy<Value = Vec<(usize, usize, Option<usize>)>> {
    prop::collection::vec((0usize..50, 0usize..50, prop::option::of(0usize..50)), 5..80)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampler_respects_cap_and_excludes_target_post(
        links in links(),
        n_posts in 1usize..6,
        n_ann in 1usize..6,
        k in 1usize..8,
        strat in 0usize..4,
        seed in any::<u64>(),
    ) {
        let c = corpus_from(n_posts, n_ann, &links);
        let cfg = EmbedderConfig { dim: 64, ..Default::default() };
        let store = EmbeddingStore::build(&c, &cfg, true).unwrap();
        let profiles = disclosure::build_profiles(&disclosure::extract_corpus(&PatternSet::default_set(), &c));
        let s = SamplerConfig::new(Sampling::ALL[strat], k, seed);
        for v in c.verdicts() {
            let ctx = sampler::sample_context(&v.annotator_id, &v.post_id, &c, &store, &profiles, &s).unwrap();
            prop_assert!(ctx.items.len() <= k);
            let own: BTreeSet<&str> = c.comments_of(&v.annotator_id).iter().map(String::as_str).collect();
            for item in &ctx.items {
                prop_assert!(own.contains(item.source_comment_id.as_str()));
                let src = c.comment(&item.source_comment_id).unwrap();
                prop_assert_ne!(src.post_id.as_deref(), Some(v.post_id.as_str()));
            }
            let pool = sampler::candidate_comments(&c, &v.annotator_id, &v.post_id, &profiles, None);
            if !Sampling::ALL[strat].is_sentence() {
                prop_assert_eq!(ctx.items.len(), k.min(pool.len()));
            }
            if Sampling::ALL[strat].is_similar() {
                let sims: Vec<f64> = ctx.items.iter().map(|i| i.similarity.unwrap()).collect();
                prop_assert!(sims.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn group_splits_never_leak(links in links(), n_posts in 3usize..12, n_ann in 3usize..12, seed in any::<u64>(), author in any::<bool>()) {
        let c = corpus_from(n_posts, n_ann, &links);
        let kind = if author { SplitKind::Author } else { SplitKind::Situation };
        match corpus::make_split(&c, kind, [0.6, 0.2, 0.2], seed) {
            Ok(s) => {
                prop_assert!(corpus::verify_split(&s, &c).is_empty());
                prop_assert_eq!(s.counts().iter().sum::<usize>(), c.verdicts().len());
            }
            Err(corpus::CorpusError::TooFewGroups { groups }) => prop_assert!(groups < 3),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
