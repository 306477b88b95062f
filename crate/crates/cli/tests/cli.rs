//! End-to-end checks of the command-line surface: every subcommand is a thin
//! adapter, so outputs here must match what the library produces directly.

use std::path::Path;
use std::process::{Command, Output};

use pnix::eval::{compute_pn, EvalOptions};
use pnix::{DocId, InvertedIndex, QueryDag};

fn pnix_cmd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnix"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

const TWO_DOC_CORPUS: &str = r#"{"id":"doc-a","tokens":["cat","dog"]}
{"id":"doc-b","tokens":["dog"]}
"#;

const SINGLE_TERM_DAG: &str =
    r#"{"root":"n0","nodes":[{"id":"n0","kind":"term","term":"dog"}]}"#;

#[test]
fn index_build_reports_summary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", TWO_DOC_CORPUS);
    let out = pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["universe_size"], 2);
    assert_eq!(summary["term_count"], 2);
    assert!(dir.path().join("idx.pnix").exists());
}

#[test]
fn index_build_rejects_malformed_line_with_number() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(
        dir.path(),
        "bad.jsonl",
        "{\"id\":\"a\",\"tokens\":[\"x\"]}\nnot json at all\n",
    );
    let out = pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn index_build_summary_matches_generator_spec() {
    // 10^4-document synthetic corpus through the JSONL path
    let spec = pnix::bench::CorpusSpec {
        universe_size: 10_000,
        term_specs: (0..12)
            .map(|i| pnix::bench::TermSpec {
                term: format!("t{i}"),
                density: 0.02 + 0.05 * i as f64,
            })
            .collect(),
        numeric_fields: vec![],
        seed: 404,
    };
    let docs = pnix::bench::gen_corpus_docs(&spec).unwrap();
    let mut jsonl = String::new();
    for doc in &docs {
        jsonl.push_str(&serde_json::to_string(doc).unwrap());
        jsonl.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "synthetic.jsonl", &jsonl);
    let out = pnix_cmd(&["index", "build", &corpus, "syn.pnix"], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["universe_size"], spec.universe_size);
    assert_eq!(summary["term_count"], spec.term_specs.len());
    // and the file round-trips to exactly the directly generated index
    let loaded = InvertedIndex::<DocId>::load(dir.path().join("syn.pnix")).unwrap();
    assert_eq!(loaded, pnix::bench::gen_corpus::<DocId>(&spec).unwrap());
}

#[test]
fn query_eval_prints_doc_keys() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", TWO_DOC_CORPUS);
    let dag = write(dir.path(), "q.json", SINGLE_TERM_DAG);
    pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    let out = pnix_cmd(&["query", "eval", "idx.pnix", &dag], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "doc-a\ndoc-b\n");
}

#[test]
fn query_count_and_fail_empty() {
    let dir = tempfile::tempdir().unwrap();
    // CVP-style one-document index; ¬TRUE retrieves nothing
    let corpus = write(dir.path(), "c.jsonl", r#"{"id":"d_true","tokens":["TRUE"]}"#);
    let dag = write(
        dir.path(),
        "not_true.json",
        r#"{"root":"n1","nodes":[
            {"id":"n0","kind":"term","term":"TRUE"},
            {"id":"n1","kind":"not","children":["n0"]}]}"#,
    );
    pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());

    let out = pnix_cmd(
        &["query", "eval", "idx.pnix", &dag, "--output", "count"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");

    let out = pnix_cmd(
        &["query", "eval", "idx.pnix", &dag, "--fail-empty"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn query_report_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", TWO_DOC_CORPUS);
    let dag_path = write(dir.path(), "q.json", SINGLE_TERM_DAG);
    pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    let out = pnix_cmd(
        &[
            "query",
            "eval",
            "idx.pnix",
            &dag_path,
            "--report",
            "--per-node-sizes",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let got: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let index = InvertedIndex::<DocId>::load(dir.path().join("idx.pnix")).unwrap();
    let dag = QueryDag::parse(SINGLE_TERM_DAG).unwrap().normalize().unwrap();
    let report = compute_pn(&dag, &index, EvalOptions::default());
    assert_eq!(got["count"], 2);
    assert_eq!(got["result"], serde_json::json!([0, 1]));
    assert_eq!(
        got["counters"]["element_touches"],
        serde_json::json!(report.counters.element_touches)
    );
    assert_eq!(got["u_active_size"], serde_json::json!(report.u_active_size));
    assert!(got["per_node_set_sizes"].is_object());
}

#[test]
fn query_rejects_invalid_dag_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", TWO_DOC_CORPUS);
    let dag = write(
        dir.path(),
        "cycle.json",
        r#"{"root":"n0","nodes":[{"id":"n0","kind":"not","children":["n0"]}]}"#,
    );
    pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    let out = pnix_cmd(&["query", "eval", "idx.pnix", &dag], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));
}

#[test]
fn compile_emits_dag_and_node_count() {
    let dir = tempfile::tempdir().unwrap();
    let constraint = write(
        dir.path(),
        "c.json",
        r#"{"kind":"count_at_least","terms":["a","b"],"k":0}"#,
    );
    let out = pnix_cmd(&["compile", &constraint, "dag.json"], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["node_count"], 1);
    let dag = QueryDag::parse(&std::fs::read_to_string(dir.path().join("dag.json")).unwrap()).unwrap();
    assert_eq!(dag.len(), 1);

    // compiled output evaluates like the library path
    let corpus = write(dir.path(), "corpus.jsonl", TWO_DOC_CORPUS);
    pnix_cmd(&["index", "build", &corpus, "idx.pnix"], dir.path());
    let eval = pnix_cmd(&["query", "eval", "idx.pnix", "dag.json"], dir.path());
    assert_eq!(String::from_utf8_lossy(&eval.stdout), "doc-a\ndoc-b\n");
}

#[test]
fn compile_rejects_overflowing_width() {
    let dir = tempfile::tempdir().unwrap();
    let constraint = write(
        dir.path(),
        "wide.json",
        r#"{"kind":"field_gt_const","field":"v","const":300,"width":8}"#,
    );
    let out = pnix_cmd(&["compile", &constraint, "dag.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("300"));
}

#[test]
fn compiled_constraint_query_matches_oracle() {
    // the 8 containment patterns of {a, b, c} with weights a:2 vs b:1, c:1
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = String::new();
    for (i, tokens) in [
        vec![],
        vec!["a"],
        vec!["b"],
        vec!["a", "b"],
        vec!["c"],
        vec!["a", "c"],
        vec!["b", "c"],
        vec!["a", "b", "c"],
    ]
    .iter()
    .enumerate()
    {
        corpus.push_str(&format!(
            "{{\"id\":\"p{i}\",\"tokens\":{}}}\n",
            serde_json::to_string(tokens).unwrap()
        ));
    }
    let corpus_path = write(dir.path(), "patterns.jsonl", &corpus);
    let constraint = write(
        dir.path(),
        "net.json",
        r#"{"kind":"weighted_sum_gt",
            "good":[{"term":"a","weight":2}],
            "bad":[{"term":"b","weight":1},{"term":"c","weight":1}]}"#,
    );
    pnix_cmd(&["index", "build", &corpus_path, "idx.pnix"], dir.path());
    pnix_cmd(&["compile", &constraint, "dag.json"], dir.path());
    let out = pnix_cmd(
        &["query", "eval", "idx.pnix", "dag.json", "--parallel"],
        dir.path(),
    );
    assert!(out.status.success());

    // independent route: brute-force oracle over the same dag and index
    let index = InvertedIndex::<DocId>::load(dir.path().join("idx.pnix")).unwrap();
    let dag = QueryDag::parse(&std::fs::read_to_string(dir.path().join("dag.json")).unwrap()).unwrap();
    let oracle = pnix::baselines::eval_oracle(&dag, &index).unwrap();
    let want: String = oracle
        .iter()
        .map(|&d| format!("{}\n", index.doc_key(d).unwrap()))
        .collect();
    assert_eq!(String::from_utf8_lossy(&out.stdout), want);
    assert_eq!(want, "p1\np3\np5\n");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = pnix_cmd(&["query", "eval"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = pnix_cmd(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bench_rejects_unknown_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = pnix_cmd(&["bench", "run", "warp-drive"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp-drive"));
}

#[test]
fn bench_net_positive_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = pnix_cmd(
        &[
            "bench",
            "run",
            "net-positive",
            "--output",
            "report.json",
            "--csv",
            "report.csv",
        ],
        dir.path(),
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["all_pass"], true, "{summary}");
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["experiment"], "net-positive");
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("experiment,"));
}
