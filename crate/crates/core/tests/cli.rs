use std::path::{Path, PathBuf};
use std::process::Command;

use rdsvar::cli::{parse_config, run, RunConfig};
use rdsvar::estimators::Estimator;
use rdsvar::netgraph::{largest_connected_component, load_attributes, load_edge_list, EdgeListFormat};
use rdsvar::rds::{simulate_rds, RdsDesign};
use rdsvar::resample::{bootstrap_distribution, BootstrapConfig, Method};
use rdsvar::rng::RngStream;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rdsvar(args: &[&str]) -> Run {
    rdsvar_env(args, &[])
}

fn rdsvar_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rdsvar"));
    cmd.args(args).env_remove("RDSVAR_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_then_bootstrap_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let edges = data("toy_edges.txt");
    let attrs = data("toy_attributes.csv");
    let sim = rdsvar(&[
        "simulate", "--edges", p(&edges), "--attributes", p(&attrs), "--lcc", "--n", "60", "--seed", "5",
        "--out", p(out),
    ]);
    assert_eq!(sim.code, 0, "{}", sim.stderr);
    let boot = rdsvar(&[
        "bootstrap", "--forest", p(&out.join("forest.csv")), "--attributes", p(&out.join("participants.csv")),
        "--method", "tree", "--B", "300", "--estimator", "vh", "--level", "0.9", "--seed", "9", "--out", p(out),
    ]);
    assert_eq!(boot.code, 0, "{}", boot.stderr);
    let doc = read_json(&out.join("bootstrap.json"));
    assert_eq!(doc, serde_json::from_str::<Value>(&boot.stdout).unwrap());

    let (g, _) = load_edge_list(&edges, EdgeListFormat::Text).unwrap();
    let g = largest_connected_component(&g);
    let table = load_attributes(&attrs, &g).unwrap();
    let forest = simulate_rds(&g, &RdsDesign::three_coupon(60), &mut RngStream::new(5).rng()).unwrap();
    let cfg = BootstrapConfig::new(Method::Tree, 300, Estimator::Vh);
    let estimates = doc["result"]["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 2);
    for (name, row) in table.column_names().iter().zip(estimates) {
        let z = forest.values_for(table.column(name).unwrap());
        let dist = bootstrap_distribution(&forest, &cfg, &z, None, &RngStream::new(9)).unwrap();
        let (lo, hi) = dist.percentile_ci(0.9).unwrap();
        assert_eq!(row["attribute"], name.as_str());
        assert_eq!(row["point_estimate"].as_f64().unwrap(), dist.estimator_on_original);
        assert_eq!(row["variance"].as_f64().unwrap(), dist.variance().unwrap());
        assert_eq!(row["ci"]["lo"].as_f64().unwrap(), lo);
        assert_eq!(row["ci"]["hi"].as_f64().unwrap(), hi);
    }
}

#[test]
fn every_command_emits_schema_valid_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = p(out);
    let edges = data("toy_edges.txt");
    let attrs = data("toy_attributes.csv");

    assert_eq!(rdsvar(&["ingest", "--edges", p(&edges), "--attributes", p(&attrs), "--out", o]).code, 0);
    assert_valid("ingest", &read_json(&out.join("ingest.json")));

    assert_eq!(rdsvar(&["simulate", "--edges", p(&edges), "--attributes", p(&attrs), "--lcc", "--n", "50", "--out", o]).code, 0);
    assert_valid("simulate", &read_json(&out.join("simulate.json")));

    let forest = out.join("forest.csv");
    let part = out.join("participants.csv");
    let r = rdsvar(&["bootstrap", "--forest", p(&forest), "--attributes", p(&part), "--B", "50", "--write-estimates", "--out", o]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_valid("bootstrap", &read_json(&out.join("bootstrap.json")));
    let lines = std::fs::read_to_string(out.join("bootstrap_estimates.csv")).unwrap().lines().count();
    assert_eq!(lines, 1 + 2 * 50);

    let r = rdsvar(&[
        "experiment", "--synthetic-nodes", "50", "--n", "20", "--seeds", "4", "--R", "2", "--B", "2",
        "--width-reference", "100", "--seed", "3", "--out", o,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_valid("experiment", &read_json(&out.join("report.json")));
    assert!(out.join("report.csv").exists());

    let r = rdsvar(&["oracle", "--forest", p(&data("tiny_forest.csv")), "--attributes", p(&data("tiny_attributes.csv")), "--method", "tree", "--out", o]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_valid("oracle", &read_json(&out.join("oracle.json")));

    let bal = out.join("bal.csv");
    std::fs::write(&bal, "id,recruiter_id,degree\nA,,2\nB,A,3\nC,A,1\nD,B,2\nE,B,2\nF,C,4\nG,C,1\n").unwrap();
    let bal_attr = out.join("bal_attr.csv");
    std::fs::write(&bal_attr, "id,z\nA,1\nB,0\nC,1\nD,1\nE,0\nF,0\nG,1\n").unwrap();
    let r = rdsvar(&["oracle", "--forest", p(&bal), "--attributes", p(&bal_attr), "--moments", "--estimator", "sample_mean", "--out", o]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = read_json(&out.join("oracle.json"));
    assert_valid("oracle", &doc);
    assert!(doc["result"]["results"][0]["moments"]["pooled_mean_minus_non_seed_mean"].as_f64().unwrap() < 1e-12);

    let err = rdsvar(&["simulate", "--n", "3"]);
    assert_valid("error", &serde_json::from_str(&err.stderr).unwrap());
}

#[test]
fn oracle_reports_exact_neighbourhood_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let r = rdsvar(&[
        "oracle", "--forest", p(&data("tiny_forest.csv")), "--attributes", p(&data("tiny_attributes.csv")),
        "--attribute", "flag", "--method", "neighbourhood", "--estimator", "sample_mean", "--out", p(dir.path()),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    let dist = &doc["result"]["results"][0]["distribution"];
    let got: Vec<(f64, &str)> = dist["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["estimate"].as_f64().unwrap(), o["fraction"].as_str().unwrap()))
        .collect();
    assert_eq!(got, vec![(0.0, "1/4"), (1.0 / 3.0, "1/2"), (0.5, "1/4")]);
    assert!((dist["mean"].as_f64().unwrap() - 7.0 / 24.0).abs() < 1e-15);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = p(dir.path());

    let usage = rdsvar(&["simulate", "--n", "10"]);
    assert_eq!(usage.code, 1);
    let e: Value = serde_json::from_str(&usage.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "usage");
    assert!(e["error"]["message"].as_str().unwrap().contains("--edges"));

    let unknown = rdsvar(&["bootstrap", "--frobnicate"]);
    assert_eq!(unknown.code, 1);
    assert!(unknown.stderr.contains("--frobnicate"));

    assert_eq!(rdsvar(&["experiment", "--synthetic-nodes", "50"]).code, 1, "missing --seed");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,recruiter_id,degree\nA,,2\nB,Z,1\n").unwrap();
    let data_err = rdsvar(&["bootstrap", "--forest", p(&bad), "--attributes", p(&data("tiny_attributes.csv")), "--out", o]);
    assert_eq!(data_err.code, 2, "{}", data_err.stderr);

    let big = dir.path().join("big.csv");
    let mut text = String::from("id,recruiter_id,degree\nr,,1\n");
    let mut attrs = String::from("id,z\nr,0\n");
    for i in 0..30 {
        text.push_str(&format!("a{i},r,1\n"));
        attrs.push_str(&format!("a{i},{}\n", i % 2));
        for j in 0..2 {
            text.push_str(&format!("b{i}_{j},a{i},1\n"));
            attrs.push_str(&format!("b{i}_{j},1\n"));
        }
    }
    std::fs::write(&big, text).unwrap();
    let big_attr = dir.path().join("big_attr.csv");
    std::fs::write(&big_attr, attrs).unwrap();
    let budget = rdsvar(&["oracle", "--forest", p(&big), "--attributes", p(&big_attr), "--out", o]);
    assert_eq!(budget.code, 3, "{}", budget.stderr);
    assert!(budget.stderr.contains("budget_exceeded"), "{}", budget.stderr);

    assert_eq!(rdsvar(&["--help"]).code, 0);
    assert!(rdsvar(&["--version"]).stdout.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.toml");
    std::fs::write(
        &conf,
        format!(
            "forest = {:?}\nattributes = {:?}\nmethod = \"tree\"\nB = 40\nlevel = 0.8\nseed = 11\n",
            data("tiny_forest.csv"),
            data("tiny_attributes.csv")
        ),
    )
    .unwrap();
    let cfg = parse_config(["rdsvar", "bootstrap", "--config", p(&conf), "--B", "60", "--out", p(dir.path())]).unwrap();
    let RunConfig::Bootstrap(a) = &cfg else { panic!("wrong command") };
    assert_eq!(a.b, Some(60));
    assert_eq!(a.method, Some(Method::Tree));
    assert_eq!(a.level, Some(0.8));

    let doc = run(&cfg).unwrap().json;
    assert_eq!(doc["result"]["estimates"][0]["B"], 60);
    assert_eq!(doc["config"]["seed"], 11);

    std::fs::write(&conf, "forest = \"x.csv\"\nmystery = 1\n").unwrap();
    let err = parse_config(["rdsvar", "bootstrap", "--config", p(&conf)]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("mystery"), "{err}");
}

#[test]
fn worker_count_does_not_change_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "experiment".to_string(), "--synthetic-nodes".into(), "300".into(), "--n".into(), "60".into(),
            "--R".into(), "12".into(), "--B".into(), "30".into(), "--width-reference".into(), "100".into(),
            "--seed".into(), "4".into(), "--out".into(), out.to_string(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut one = args(p(&a));
    one.extend(["--workers".to_string(), "1".into()]);
    let one: Vec<&str> = one.iter().map(String::as_str).collect();
    assert_eq!(rdsvar(&one).code, 0);
    let three = args(p(&b));
    let three: Vec<&str> = three.iter().map(String::as_str).collect();
    let r = rdsvar_env(&three, &[("RDSVAR_WORKERS", "3")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["result"]["workers"], 3);
    assert_eq!(
        std::fs::read(a.join("report.csv")).unwrap(),
        std::fs::read(b.join("report.csv")).unwrap()
    );
}
