use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use debias_cli::commands::{train_on, RelevanceMode};
use debias_cli::log_file::read_log;
use debias_cli::model_file::load_model;
use debias_core::featurizer::Featurizer;
use debias_core::simulator::default_schema;
use debias_core::trainer::TrainConfig;

fn debias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debias")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Sim {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Sim {
    fn new() -> Sim {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("sim.cfg"), "n_sessions=2500\nn_items=120\nn_users=300\nseed=5\n").unwrap();
        let o = debias(&["simulate", "--config", s(&root.join("sim.cfg")), "--out", s(&root.join("sim"))]);
        assert!(o.status.success(), "{}", stderr(&o));
        Sim { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn log(&self) -> String {
        self.p("sim/impressions.csv")
    }

    fn model(&self, c: &str) -> String {
        let out = self.p(&format!("model-{c}.txt"));
        let o = debias(&["train", &self.log(), "--c", c, "--out", &out]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_all_artifacts_split_at_day_35() {
    let sim = Sim::new();
    for f in ["impressions.csv", "truth.tsv", "config.txt", "schema.tsv"] {
        assert!(Path::new(&sim.p(&format!("sim/{f}"))).exists(), "{f}");
    }
    let config = std::fs::read_to_string(sim.p("sim/config.txt")).unwrap();
    assert!(config.contains("days=45\n") && config.contains("seed=5\n"));
    let log = read_log(Path::new(&sim.log()), &default_schema()).unwrap();
    assert!(log.iter().any(|i| i.day <= 35) && log.iter().any(|i| i.day > 35));
    assert_eq!(log.iter().map(|i| i.day).max(), Some(45));
}

#[test]
fn train_reports_timing_and_weights() {
    let sim = Sim::new();
    let out = sim.p("m.txt");
    let o = debias(&["train", &sim.log(), "--schema", &sim.p("sim/schema.tsv"), "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("train_seconds=") && text.contains("active_weights="), "{text}");
    let model = std::fs::read_to_string(&out).unwrap();
    assert!(model.starts_with("version\t1\nc_value\t0.00001\nsplit_day\t35\n"), "{model}");
}

#[test]
fn split_day_zero_is_an_empty_train_error() {
    let sim = Sim::new();
    let o = debias(&["train", &sim.log(), "--split-day", "0", "--out", &sim.p("m.txt")]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[empty-train]"), "{}", stderr(&o));
    assert!(!Path::new(&sim.p("m.txt")).exists());
}

#[test]
fn saved_model_scores_like_the_fitted_one() {
    let sim = Sim::new();
    let path = sim.model("0.01");
    let loaded = load_model(Path::new(&path)).unwrap();
    let schema = default_schema();
    let log = read_log(Path::new(&sim.log()), &schema).unwrap();
    let (fitted, _, _) = train_on(&log, &schema, &TrainConfig::default().with_c(0.01), 35).unwrap();
    assert_eq!(loaded, fitted);
    let fa = Featurizer::new(&schema, fitted.model.hash_config, &fitted.priors).unwrap();
    let fb = Featurizer::new(&loaded.model.schema, loaded.model.hash_config, &loaded.priors).unwrap();
    for imp in &log {
        let a = fitted.model.predict_proba(&fa.featurize(imp).unwrap()).unwrap();
        let b = loaded.model.predict_proba(&fb.featurize(imp).unwrap()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn evaluate_emits_labelled_record() {
    let sim = Sim::new();
    let model = sim.model("0.001");
    let o = debias(&["evaluate", &model, &sim.log(), "--truth", &sim.p("sim/truth.tsv")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    for key in ["standard_auc", "relevance_auc", "propensity_auc"] {
        let x = v[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x), "{key}={x}");
    }
    assert_eq!(v["relevance_mode"], "truth");
    assert!(v["n_test"].as_u64().unwrap() > 0);

    let report = sim.p("r.json");
    let o = debias(&["evaluate", &model, &sim.log(), "--mode", "stratified", "--rank-stratum", "3", "--out", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(std::fs::read_to_string(report).unwrap().trim()).unwrap();
    assert_eq!(v["relevance_mode"], "stratified");

    let o = debias(&["evaluate", &model, &sim.log(), "--mode", "stratified", "--rank-stratum", "40"]);
    assert!(stderr(&o).starts_with("error[stratum]"), "{}", stderr(&o));
    let o = debias(&["evaluate", &model, &sim.log(), "--mode", "truth"]);
    assert!(stderr(&o).starts_with("error[usage]"), "{}", stderr(&o));
}

fn sweep_rows(sim: &Sim, grid: &str) -> (Vec<serde_json::Value>, Output) {
    let out = sim.p("sweep.jsonl");
    let o = debias(&["sweep", &sim.log(), "--grid", grid, "--truth", &sim.p("sim/truth.tsv"), "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    (rows, o)
}

#[test]
fn sweep_grid_shapes() {
    let sim = Sim::new();
    let (rows, o) = sweep_rows(&sim, "1e-6,1e-5,1e-4,1e-3,1e-2,0.1,1.0");
    assert_eq!(rows.len(), 7);
    for key in ["c", "standard_auc", "relevance_auc", "train_seconds", "active_weights"] {
        assert!(rows.iter().all(|r| r.get(key).is_some()), "{key}");
    }
    let table = stdout(&o);
    assert!(table.contains("best relevance") && table.contains("relevance mode: truth"), "{table}");

    let (rows, _) = sweep_rows(&sim, "0.01");
    assert_eq!(rows.len(), 1);

    let (rows, o) = sweep_rows(&sim, "0.1,1e-3,0.1");
    assert_eq!(rows.iter().map(|r| r["c"].as_f64().unwrap()).collect::<Vec<_>>(), vec![1e-3, 0.1]);
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));

    let o = debias(&["sweep", &sim.log(), "--grid", "0.1,-1"]);
    assert!(stderr(&o).starts_with("error[usage]"));
}

#[test]
fn explain_prints_contributions() {
    let sim = Sim::new();
    let model = sim.model("1.0");
    let o = debias(&["explain", &model, &sim.log(), "--row", "5", "--top-n", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 4 + 3, "{text}");
    assert!(text.contains("logit") && text.contains("probability"));
    let o = debias(&["explain", &model, &sim.log(), "--row", "99999999"]);
    assert!(stderr(&o).starts_with("error[usage]"));
}

#[test]
fn score_is_sorted_best_first() {
    let sim = Sim::new();
    let model = sim.model("0.1");
    let o = debias(&["score", &model, &sim.log()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("item_id\tscore"));
    let scores: Vec<f64> = lines.map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn bench_reports_equivalence() {
    let o = debias(&["bench", "--rows", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("equivalence=PASS"));
    let o = debias(&["bench", "--rows", "5000", "--repetitions", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rows=5000") && stdout(&o).contains("equivalence=PASS"));
}

#[test]
fn malformed_inputs_are_categorized() {
    let sim = Sim::new();
    let bad = sim.p("bad.csv");
    std::fs::write(&bad, "day,session_id\n1,2\n").unwrap();
    let o = debias(&["train", &bad, "--out", &sim.p("m.txt")]);
    assert!(stderr(&o).starts_with("error[parse]"), "{}", stderr(&o));
    let o = debias(&["train", &sim.p("missing.csv"), "--out", &sim.p("m.txt")]);
    assert!(!o.status.success());
    let o = debias(&["evaluate", &sim.log(), &sim.log()]);
    assert!(stderr(&o).starts_with("error[parse]"), "{}", stderr(&o));
    let cfg = sim.p("bad.cfg");
    std::fs::write(&cfg, "slate_size=0\n").unwrap();
    let o = debias(&["simulate", "--config", &cfg, "--out", &sim.p("x")]);
    assert!(!o.status.success());
}

#[test]
fn relevance_mode_defaults_follow_truth_flag() {
    let sim = Sim::new();
    let model = sim.model("0.01");
    let trained = load_model(Path::new(&model)).unwrap();
    let log = read_log(Path::new(&sim.log()), &trained.model.schema).unwrap();
    let a = debias_cli::commands::evaluate_on(&trained, &log, &RelevanceMode::Stratified { rank: 1 }).unwrap();
    let o = debias(&["evaluate", &model, &sim.log()]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["relevance_mode"], "stratified");
    assert_eq!(v["relevance_auc"].as_f64().unwrap(), a.relevance_auc);
}
