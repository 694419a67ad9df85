use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use murp::dataset::{write_dir, KnowledgeGraph, NamedTriple};
use murp::synthetic::{hierarchy_graph, tree_closure};
use murp::{Checkpoint, GeometryKind, ModelParams};
use tempfile::TempDir;

fn murp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_murp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run murp")
}

fn ok(args: &[&str]) -> String {
    let out = murp(args);
    assert!(
        out.status.success(),
        "murp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = murp(args);
    assert!(!out.status.success(), "murp {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn rows(spec: &[(&str, &str, &str)]) -> Vec<NamedTriple> {
    spec.iter().map(|&(s, r, o)| (s.into(), r.into(), o.into())).collect()
}

fn write_graph(
    dir: &Path,
    train: &[(&str, &str, &str)],
    valid: &[(&str, &str, &str)],
    test: &[(&str, &str, &str)],
) -> KnowledgeGraph {
    let kg = KnowledgeGraph::from_named(&rows(train), &rows(valid), &rows(test))
        .unwrap()
        .0;
    write_dir(dir, &kg).unwrap();
    kg
}

/// Value of `key` in `key<TAB>value` stdout lines.
fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .split('\t')
        .next()
        .unwrap()
}

/// Data rows of a TSV with `#` headers, split into fields; skips the column header.
fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').map(str::to_owned).collect())
        .collect()
}

fn five_entity_toy(dir: &Path) -> KnowledgeGraph {
    write_graph(
        dir,
        &[("a", "r", "b"), ("b", "r", "c"), ("c", "q", "d"), ("d", "q", "e")],
        &[("a", "q", "e")],
        &[("e", "r", "a"), ("b", "q", "d")],
    )
}

fn save_zero_checkpoint(kg: &KnowledgeGraph, path: &Path) {
    let params = ModelParams::zeros(GeometryKind::Euclidean, kg.n_entities(), 2 * kg.n_relations(), 3);
    Checkpoint::new(params, kg).unwrap().save(path).unwrap();
}

#[test]
fn train_then_eval_reproduces_validation_mrr() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    write_dir(&data, &hierarchy_graph(3, 2, 8, 0.1, 0.1, 1).unwrap()).unwrap();
    let out = tmp.path().join("run");
    let stdout = ok(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--dim",
        "4",
        "--lr",
        "10",
        "--batch",
        "16",
        "--neg",
        "4",
        "--epochs",
        "20",
        "--eval-every",
        "5",
        "--seed",
        "3",
    ]);
    let best: f64 = field(&stdout, "best_valid_mrr").parse().unwrap();
    assert_eq!(field(&stdout, "seed"), "3");

    let report = tmp.path().join("valid.tsv");
    let stdout = ok(&[
        "eval",
        "--checkpoint",
        p(&out.join("model.ckpt")),
        "--data",
        p(&data),
        "--split",
        "valid",
        "--out",
        p(&report),
    ]);
    assert_eq!(field(&stdout, "mrr").parse::<f64>().unwrap(), best);
    let t = table(&fs::read_to_string(&report).unwrap());
    assert_eq!(t[0][0], "ALL");
    assert_eq!(t[0][2].parse::<f64>().unwrap(), best);

    let trace = fs::read_to_string(out.join("trace.tsv")).unwrap();
    assert!(trace.starts_with("# murp train\n"));
    assert!(trace.contains("# seed=3\n") && trace.contains("# lr=10\n") && trace.contains("# geometry=poincare\n"));
    assert_eq!(table(&trace).len(), 8, "train and valid rows at epochs 5, 10, 15, 20");
}

#[test]
fn constant_model_scores_mid_rank_ties() {
    let tmp = TempDir::new().unwrap();
    let kg = five_entity_toy(&tmp.path().join("data"));
    let ckpt = tmp.path().join("zero.ckpt");
    save_zero_checkpoint(&kg, &ckpt);
    // Every candidate ties; queries with 4 unfiltered competitors rank 1 + 2.
    let text = ok(&["eval", "--checkpoint", p(&ckpt), "--data", p(&tmp.path().join("data"))]);
    let t = table(&text);
    assert_eq!(t.len(), 1);
    let mrr: f64 = t[0][2].parse().unwrap();
    assert!((mrr - 1.0 / 3.0).abs() < 1e-15, "{mrr}");
    assert!(text.contains("# ties=mid\n"));
}

#[test]
fn per_relation_rows_match_test_relations() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let kg = five_entity_toy(&data);
    let ckpt = tmp.path().join("zero.ckpt");
    save_zero_checkpoint(&kg, &ckpt);
    let text = ok(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--per-relation"]);
    let t = table(&text);
    assert_eq!(t.len(), 1 + 2);
    let names: Vec<&str> = t[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["r", "q"]);
    // r: a->b->c in train
    assert_eq!(&t[1][6..], ["1.0000", "2", "1.3333"]);
}

#[test]
fn eval_names_the_first_unknown_symbol() {
    let tmp = TempDir::new().unwrap();
    let kg = five_entity_toy(&tmp.path().join("data"));
    let ckpt = tmp.path().join("zero.ckpt");
    save_zero_checkpoint(&kg, &ckpt);
    let other = tmp.path().join("other");
    write_graph(
        &other,
        &[("a", "r", "b"), ("zeta", "r", "a")],
        &[],
        &[("a", "r", "zeta")],
    );
    let err = fails(&["eval", "--checkpoint", p(&ckpt), "--data", p(&other)]);
    assert!(err.contains("\"zeta\""), "{err}");
}

#[test]
fn missing_inputs_fail() {
    let tmp = TempDir::new().unwrap();
    let err = fails(&["analyze", "--data", p(&tmp.path().join("nope"))]);
    assert!(err.contains("train.txt"), "{err}");
    fails(&["eval", "--data", p(tmp.path())]);
    fails(&["bias-norms", "--checkpoint", p(&tmp.path().join("none.ckpt"))]);
}

#[test]
fn analyze_chain_and_symmetric_relations() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    write_graph(
        &data,
        &[
            ("a", "chain", "b"),
            ("b", "chain", "c"),
            ("x", "sym", "y"),
            ("y", "sym", "x"),
        ],
        &[],
        &[],
    );
    let text = ok(&["analyze", "--data", p(&data)]);
    let t = table(&text);
    let chain = t.iter().find(|r| r[0] == "chain").unwrap();
    assert_eq!(&chain[1..5], ["1.0000", "2", "1.3333", "true"]);
    let sym = t.iter().find(|r| r[0] == "sym").unwrap();
    assert_eq!(&sym[1..5], ["0.0000", "1", "1.0000", "false"]);
    assert!(text.contains("# khs-threshold=0.9\n# min-max-path=2\n"));
}

/// Two chain relations and six pairing relations.
fn split_toy(dir: &Path) {
    let mut train = Vec::new();
    for h in ["h1", "h2"] {
        train.extend([("a", h, "b"), ("b", h, "c"), ("c", h, "d")]);
    }
    for n in ["n1", "n2", "n3", "n4", "n5", "n6"] {
        train.extend([("a", n, "e"), ("b", n, "f")]);
    }
    write_graph(dir, &train, &[], &[]);
}

#[test]
fn split_writes_subsets_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    split_toy(&data);
    let out = tmp.path().join("subsets");
    ok(&[
        "split",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--proportions",
        "1,0.5,0.25",
        "--seed",
        "4",
    ]);
    for tag in ["h100", "h50", "h25"] {
        assert!(out.join(tag).join("train.txt").is_file(), "{tag}");
    }
    let manifest = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert!(manifest.contains("# seed=4\n"));
    let t = table(&manifest);
    let count = |tag: &str, kind: &str| t.iter().filter(|r| r[0] == tag && r[3] == kind).count();
    assert_eq!(
        (count("h100", "hierarchical"), count("h100", "non_hierarchical")),
        (2, 0)
    );
    assert_eq!((count("h50", "hierarchical"), count("h50", "non_hierarchical")), (2, 2));
    assert_eq!((count("h25", "hierarchical"), count("h25", "non_hierarchical")), (2, 6));
    let h50 = fs::read_to_string(out.join("h50/train.txt")).unwrap();
    assert_eq!(h50.lines().count(), 6 + 4);
    // A second run refuses to overwrite.
    fails(&["split", "--data", p(&data), "--out", p(&out), "--seed", "4"]);
}

#[test]
fn infeasible_split_fails_without_output() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    split_toy(&data);
    let out = tmp.path().join("subsets");
    let err = fails(&[
        "split",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--proportions",
        "0.2",
        "--seed",
        "1",
    ]);
    assert!(err.contains("lowest achievable proportion is 0.2500"), "{err}");
    assert!(!out.exists());
}

fn trained_toy(tmp: &Path, geometry: &str) -> std::path::PathBuf {
    let data = tmp.join("data");
    write_dir(&data, &hierarchy_graph(2, 3, 4, 0.1, 0.0, 2).unwrap()).unwrap();
    let out = tmp.join("run");
    ok(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--geometry",
        geometry,
        "--dim",
        "6",
        "--lr",
        "20",
        "--batch",
        "16",
        "--neg",
        "5",
        "--epochs",
        "10",
        "--seed",
        "1",
    ]);
    out.join("model.ckpt")
}

#[test]
fn projection_preserves_norms() {
    let tmp = TempDir::new().unwrap();
    let ckpt = trained_toy(tmp.path(), "poincare");
    let text = ok(&[
        "project2d",
        "--checkpoint",
        p(&ckpt),
        "--subject",
        "n3",
        "--relation",
        "hypernym",
        "--sample",
        "8",
        "--seed",
        "5",
        "--data",
        p(&tmp.path().join("data")),
    ]);
    assert!(text.contains("# sample=8\n# seed=5\n"));
    let t = table(&text);
    assert_eq!(t.len(), 2 * 9);
    for row in &t {
        let x: f64 = row[3].parse().unwrap();
        let y: f64 = row[4].parse().unwrap();
        let n: f64 = row[5].parse().unwrap();
        assert!((x * x + y * y - n * n).abs() <= 1e-9, "{row:?}");
        assert!(y >= 0.0);
        if row[1] == "subject" {
            assert_eq!(y, 0.0);
            assert_eq!(x, n);
        } else {
            assert!(["TP", "FP", "TN", "FN"].contains(&row[10].as_str()), "{row:?}");
        }
    }
    // Same objects in both stages.
    let objs = |stage: &str| -> Vec<String> { t.iter().filter(|r| r[0] == stage).map(|r| r[2].clone()).collect() };
    assert_eq!(objs("before"), objs("after"));

    let listed = ok(&[
        "project2d",
        "--checkpoint",
        p(&ckpt),
        "--subject",
        "n3",
        "--relation",
        "hypernym_reciprocal",
        "--objects",
        "n0,n1",
    ]);
    assert_eq!(table(&listed).len(), 6);
}

#[test]
fn projection_of_zero_subject_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let kg = five_entity_toy(&tmp.path().join("data"));
    let ckpt = tmp.path().join("zero.ckpt");
    save_zero_checkpoint(&kg, &ckpt);
    let err = fails(&[
        "project2d",
        "--checkpoint",
        p(&ckpt),
        "--subject",
        "a",
        "--relation",
        "r",
        "--objects",
        "b",
    ]);
    assert!(err.contains("zero-norm"), "{err}");
    fails(&[
        "project2d",
        "--checkpoint",
        p(&ckpt),
        "--subject",
        "a",
        "--relation",
        "r",
    ]);
    fails(&[
        "project2d",
        "--checkpoint",
        p(&ckpt),
        "--subject",
        "nobody",
        "--relation",
        "r",
        "--objects",
        "b",
    ]);
}

#[test]
fn bias_norms_of_fresh_model() {
    let tmp = TempDir::new().unwrap();
    let kg = five_entity_toy(&tmp.path().join("data"));
    let ckpt = tmp.path().join("zero.ckpt");
    save_zero_checkpoint(&kg, &ckpt);
    let out = tmp.path().join("bias.tsv");
    ok(&["bias-norms", "--checkpoint", p(&ckpt), "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(table(&text).len(), kg.n_entities());
    assert!(text.ends_with("# pearson(norm, bias_subject)=undefined\n"));
}

#[test]
fn trained_tree_is_memorized_and_correlation_reported() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let (_, edges) = tree_closure(3, 3);
    let names: Vec<(String, String, String)> = edges
        .iter()
        .map(|&(a, b)| (format!("n{a}"), "isa".to_string(), format!("n{b}")))
        .collect();
    let kg = KnowledgeGraph::from_named(&names, &[], &[]).unwrap().0;
    write_dir(&data, &kg).unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--dim",
        "5",
        "--lr",
        "50",
        "--epochs",
        "200",
        "--eval-every",
        "200",
        "--seed",
        "0",
    ]);
    let ckpt = out.join("model.ckpt");
    let text = ok(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--split", "train"]);
    let mrr: f64 = table(&text)[0][2].parse().unwrap();
    assert!(mrr >= 0.9, "training MRR {mrr}");

    let text = ok(&["bias-norms", "--checkpoint", p(&ckpt)]);
    let corr: f64 = text
        .lines()
        .last()
        .and_then(|l| l.strip_prefix("# pearson(norm, bias_subject)="))
        .unwrap()
        .parse()
        .unwrap();
    eprintln!("toy tree: training MRR {mrr}, pearson(norm, bias_subject) = {corr}");
    assert!(corr.is_finite());
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    write_dir(&data, &hierarchy_graph(2, 2, 2, 0.1, 0.0, 0).unwrap()).unwrap();
    let conf = tmp.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "# toy run\ndata = {}\ngeometry=euclidean\ndim=3\nepochs=2\nbatch=4\nneg=2\nlr=7\n",
            p(&data)
        ),
    )
    .unwrap();
    let out = tmp.path().join("run");
    let stdout = ok(&["train", "--config", p(&conf), "--out", p(&out), "--lr", "2"]);
    // No seed anywhere: one is drawn and printed.
    let seed = field(&stdout, "seed");
    seed.parse::<u64>().unwrap();
    let trace = fs::read_to_string(out.join("trace.tsv")).unwrap();
    assert!(trace.contains("# lr=2\n"), "{trace}");
    assert!(
        trace.contains("# dim=3\n# lr=2\n# batch=4\n# neg=2\n# epochs=2\n"),
        "{trace}"
    );
    assert!(trace.contains("# geometry=euclidean\n"));
    assert!(trace.contains(&format!("# seed={seed}\n")));
    assert!(!trace.contains("# c="));

    fs::write(&conf, format!("data={}\ndimension=3\n", p(&data))).unwrap();
    let err = fails(&["train", "--config", p(&conf), "--out", p(&out), "--seed", "1"]);
    assert!(err.contains("unknown config key \"dimension\""), "{err}");
}

#[test]
fn curvature_needs_poincare_geometry() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    write_dir(&data, &hierarchy_graph(2, 2, 2, 0.1, 0.0, 0).unwrap()).unwrap();
    let out = tmp.path().join("run");
    let err = fails(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--geometry",
        "euclidean",
        "--c",
        "1.0",
    ]);
    assert!(err.contains("--c only applies"), "{err}");
    assert!(!out.exists());
    let err = fails(&["train", "--data", p(&data), "--out", p(&out), "--c=0", "--seed", "0"]);
    assert!(err.contains("curvature"), "{err}");
}
