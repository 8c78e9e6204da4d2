use std::path::Path;
use std::process::{Command, Output};

fn dlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlab"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = dlab(dir, args);
    assert!(
        o.status.success(),
        "dlab {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

const TABLE1: &[(&str, &str)] = &[
    ("t01", "I'm 22 yrs old and my mom is telling everyone that she isn't spending alot of money on Christmas this year."),
    ("t02", "I'm an 100% cis woman totally comfortable in my gender identity"),
    ("t03", "I'm an omnivore but I make food for myself that happens to be vegan"),
    ("t04", "I like to play video\\board games and have no friends and am super awkward"),
    ("t05", "I have five cats and they love to watch the cat and nature shows on youtube"),
    ("t06", "I work as a civil engineer and the salary is decent"),
    ("t07", "I consider American policing one of the most authoritarian parts of my government"),
    ("t08", "I got the feeling that my sister & friends think everything I have was handed to me or came easily."),
    ("t09", "24F here, and honestly this whole thread is wild"),
];

const EXPECTED: &[&str] = &["Age", "Gender", "Identity", "Hobby", "Possession", "Work", "Attitude", "Relationship", "Gender"];

#[test]
fn extract_reports_golden_spans() {
    let dir = tempfile::tempdir().unwrap();
    let lines: String = TABLE1
        .iter()
        .map(|(id, t)| serde_json::json!({"id": id, "author_id": "a", "text": t}).to_string() + "\n")
        .collect();
    std::fs::write(dir.path().join("fixture.jsonl"), lines).unwrap();
    ok(dir.path(), &["extract", "--comments", "fixture.jsonl", "--out", "x"]);
    let spans = std::fs::read_to_string(dir.path().join("x/spans.jsonl")).unwrap();
    for ((id, _), want) in TABLE1.iter().zip(EXPECTED) {
        let hit = spans.lines().any(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["comment_id"] == *id && v["category"] == *want
        });
        assert!(hit, "{id} should carry {want}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("x/extract.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
    assert!(manifest["config"]["seed"].is_u64());
}

#[test]
fn step_by_step_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["synth", "--annotators", "30", "--posts", "40", "--seed", "2", "--out", "syn"]);
    assert!(p.join("syn/ground_truth.jsonl").exists());
    ok(p, &["ingest", "--corpus", "syn", "--out", "ing"]);
    ok(p, &["embed", "--corpus", "ing", "--dim", "128", "--sentences", "--out", "emb"]);
    assert!(p.join("emb/sentences.embx").exists());
    ok(p, &["cluster", "--corpus", "ing", "--k", "3", "--scan", "2,3", "--out", "cl"]);
    ok(p, &["split", "--corpus", "ing", "--kind", "author", "--out", "sp"]);
    let common = ["--corpus", "ing", "--split", "sp/split.jsonl", "--profiles", "cl/profiles.jsonl"];
    let with = |extra: &[&str]| -> Vec<String> { common.iter().chain(extra).map(|s| s.to_string()).collect() };
    let run = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd.to_string()];
        a.extend(with(extra));
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        ok(p, &refs)
    };
    run("sample", &["--condition", "random_sentences", "--max-samples", "3", "--out", "s"]);
    run("sample", &["--category", "Demographics", "--partition", "all", "--out", "s"]);
    for cond in ["no_comments", "similar_comments"] {
        run("train", &["--condition", cond, "--runs", "2", "--epochs", "1", "--out", "m"]);
        run("evaluate", &["--condition", cond, "--out", "m"]);
    }
    assert!(p.join("m/train.no_comments.manifest.json").exists());
    assert!(p.join("m/evaluate.similar_comments_5.manifest.json").exists());
    ok(
        p,
        &["report", "--inputs", "m/eval/no_comments.json", "m/eval/similar_comments_5.json", "--baseline", "no_comments", "--out", "r"],
    );
    let tsv = std::fs::read_to_string(p.join("r/report.tsv")).unwrap();
    assert!(tsv.starts_with("# dlab "));
    let rows: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("similar_comments_5\t"));
    assert!(!rows[2].ends_with('\t'), "p-value column filled");

    let ctx = "s/contexts/similar_comments_5_Demographics.jsonl";
    ok(p, &["analyze", "coverage", "--corpus", "ing", "--contexts", ctx, "--profiles", "cl/profiles.jsonl", "--out", "a"]);
    let cov = std::fs::read_to_string(p.join("a/analysis/coverage.tsv")).unwrap();
    let demo = cov.lines().find(|l| l.starts_with("Demographics\t")).unwrap();
    assert_eq!(demo.split('\t').nth(1).unwrap().parse::<f64>().unwrap(), 100.0);
    ok(p, &["analyze", "diversity", "--corpus", "ing", "--contexts", ctx, "--out", "a"]);
    ok(p, &["analyze", "pca", "--embeddings", "emb/comments.embx", "--out", "a"]);
    ok(p, &["analyze", "ngrams", "--corpus", "ing", "--n", "1", "--position", "after", "--out", "a"]);
    ok(p, &["analyze", "audit", "--corpus", "ing", "--group", "Attitudes", "--n", "4", "--out", "a"]);
    for f in ["diversity.tsv", "pca.tsv", "ngrams_1_after.tsv", "audit_Attitudes.jsonl"] {
        assert!(p.join("a/analysis").join(f).exists(), "{f}");
    }
}

#[test]
fn run_from_config_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["synth", "--annotators", "30", "--posts", "40", "--seed", "4", "--out", "syn"]);
    std::fs::write(
        p.join("exp.toml"),
        "seed = 11\noutput_dir = \"res\"\n[corpus]\ndir = \"syn\"\n[embed]\ndim = 128\n[cluster]\nk = 3\n\
         [grid]\ncategories = [\"Demographics\"]\n[train]\nruns = 2\nepochs = 1\n",
    )
    .unwrap();
    let first = ok(p, &["run", "--config", "exp.toml"]);
    assert_eq!(first.lines().count(), 4, "{first}");
    let a = std::fs::read(p.join("res/report.tsv")).unwrap();
    let m1 = std::fs::read(p.join("res/manifest.json")).unwrap();
    std::fs::remove_dir_all(p.join("res")).unwrap();
    ok(p, &["run", "--config", "exp.toml"]);
    assert_eq!(a, std::fs::read(p.join("res/report.tsv")).unwrap());
    assert_eq!(m1, std::fs::read(p.join("res/manifest.json")).unwrap());
    assert!(!p.join("res/STALE").exists());

    // flags win over the file
    let eff = ok(p, &["run", "--config", "exp.toml", "--seed", "99", "--epochs", "7", "--print-effective-config"]);
    assert!(eff.contains("seed = 99"));
    assert!(eff.contains("epochs = 7"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(dlab(p, &["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(dlab(p, &["split"]).status.code(), Some(1), "no corpus configured");
    assert_eq!(dlab(p, &["split", "--corpus", "missing"]).status.code(), Some(1));
    assert_eq!(dlab(p, &["run", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(dlab(p, &["--help"]).status.code(), Some(0));

    std::fs::create_dir(p.join("bad")).unwrap();
    std::fs::write(p.join("bad/posts.jsonl"), "{\"id\":\"p\",\"author_id\":\"o\",\"title\":\"t\",\"body\":\"\"}\n").unwrap();
    std::fs::write(p.join("bad/comments.jsonl"), "").unwrap();
    std::fs::write(p.join("bad/verdicts.jsonl"), "{\"post_id\":\"p\",\"annotator_id\":\"u\",\"label\":\"MAYBE\"}\n").unwrap();
    let o = dlab(p, &["split", "--corpus", "bad"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MAYBE"));

    std::fs::write(p.join("bad.toml"), "[train]\nepochz = 3\n").unwrap();
    assert_eq!(dlab(p, &["run", "--config", "bad.toml"]).status.code(), Some(1));
}

#[test]
fn failed_run_leaves_stale_marker() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["synth", "--annotators", "10", "--posts", "40", "--out", "syn"]);
    // the activity filter removes every annotator, so the split stage fails
    std::fs::write(p.join("e.toml"), "output_dir = \"res\"\n[corpus]\ndir = \"syn\"\nmin_comments = 1000\nmax_comments = 2000\n[cluster]\nenabled = false\n").unwrap();
    let o = dlab(p, &["run", "--config", "e.toml"]);
    assert_ne!(o.status.code(), Some(0));
    let marker = std::fs::read_to_string(p.join("res/STALE")).unwrap();
    assert!(marker.starts_with("failed at stage"), "{marker}");
}
