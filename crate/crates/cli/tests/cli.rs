use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn psimgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psimgnn"))
        .args(args)
        .env_remove("PSIMGNN_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gen(dir: &Path) -> Output {
    psimgnn(&[
        "gen", "--n", "9", "--basics", "2", "--trims", "4", "--max-trim-ged", "3", "--seed", "7", "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = gen(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("10 graphs, 100 pairs"));
    assert!(gen(&b).status.success());
    for f in ["manifest.json", "pairs.csv", "splits.json", "graphs/ba9-0-t02.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn ged_of_identical_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("a.json");
    fs::write(&g, r#"{"id": "a", "n": 4, "edges": [[0, 1], [1, 2], [2, 3]]}"#).unwrap();
    let g = g.to_str().unwrap();
    let o = psimgnn(&["ged", "--g1", g, "--g2", g, "--method", "exact"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ged"], 0.0);
    assert_eq!(v["sim"], 1.0);
    assert_eq!(v["method"], "exact_astar");
    for m in ["hungarian", "vj", "beam"] {
        let o = psimgnn(&["ged", "--g1", g, "--g2", g, "--method", m]);
        assert!(o.status.success());
    }
}

#[test]
fn partition_prints_communities() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("p.json");
    fs::write(&g, r#"{"id": "p", "n": 6, "edges": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]]}"#).unwrap();
    let o = psimgnn(&["partition", "--graph", g.to_str().unwrap(), "--k", "2", "--seed", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["communities"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(psimgnn(&["ged", "--bogus"]).status.code(), Some(1));
    assert_eq!(psimgnn(&[]).status.code(), Some(1));
    assert_eq!(psimgnn(&["--help"]).status.code(), Some(0));
    let o = psimgnn(&["ged", "--g1", "/nonexistent/a.json", "--g2", "/nonexistent/b.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/a.json"));
}

#[test]
fn train_eval_rank_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    assert!(gen(&ds).status.success());
    let tc = tmp.path().join("train.json");
    fs::write(&tc, r#"{"batch_size": 4, "iterations": 3, "val_every": 2, "seed": 1}"#).unwrap();
    let run_train = |out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_psimgnn"))
            .args(["train", "--dataset", ds.to_str().unwrap(), "--train-config", tc.to_str().unwrap()])
            .args(["--out", out])
            .env("PSIMGNN_OUT_ROOT", tmp.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run_train("run1");
    run_train("run2");
    let run1 = tmp.path().join("run1");
    for f in ["checkpoint.json", "history.csv", "summary.json", "model_config.json"] {
        assert_eq!(fs::read(run1.join(f)).unwrap(), fs::read(tmp.path().join("run2").join(f)).unwrap());
    }

    let ckpt = run1.join("checkpoint.json");
    let report = tmp.path().join("report");
    let o = psimgnn(&[
        "eval", "--dataset", ds.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap(), "--report",
        report.to_str().unwrap(), "--ks", "1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value,units\nmse,"));
    assert!(report.join("report.json").exists());

    let splits: serde_json::Value = serde_json::from_slice(&fs::read(ds.join("splits.json")).unwrap()).unwrap();
    let query = splits["test"][0].as_str().unwrap();
    let o = psimgnn(&[
        "rank", "--dataset", ds.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap(), "--query", query,
        "--top", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.starts_with("rank,id,predicted,true_sim\n1,"));
}

#[test]
fn bench_reports_each_variant() {
    let o = psimgnn(&["bench", "--n", "12", "--pairs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let steps: Vec<u64> = v.as_array().unwrap().iter().map(|t| t["propagation_steps"].as_u64().unwrap()).collect();
    assert_eq!(steps, [0, 9, 27]);
}

#[test]
fn gradcheck_passes_on_default_model() {
    let o = psimgnn(&["gradcheck"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(o.status.success(), "{v}");
    assert!(v["max_rel_error"].as_f64().unwrap() < 1e-4);
}
