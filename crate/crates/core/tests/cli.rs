use std::path::Path;
use std::process::{Command, Output};

fn treeloss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeloss"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn field(csv_text: &str, column: &str) -> String {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == column).unwrap()].to_string()
}

const EMBEDDINGS: &str = "2 3\nleft 0.0 0.0 1.0\nright 1.0 0.0 0.0\n";

#[test]
fn train_separates_a_toy_problem() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut data = String::from("label,x\n");
    for i in 0..20 {
        let v = 0.5 + i as f64 / 10.0;
        data.push_str(&format!("left,{}\nright,{}\n", -v, v));
    }
    std::fs::write(p.join("data.csv"), data).unwrap();
    std::fs::write(p.join("emb.txt"), EMBEDDINGS).unwrap();
    let out = treeloss(p, &["train", "--dataset", "data.csv", "--embeddings", "emb.txt", "--out", "eval.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let eval = std::fs::read_to_string(p.join("eval.csv")).unwrap();
    assert_eq!(field(&eval, "top1"), "1");
    assert_eq!(field(&eval, "similarity_accuracy"), "1");
    for f in ["eval.params.txt", "eval.tree.txt", "eval.trajectory.csv"] {
        assert!(p.join(f).exists(), "{f} missing");
    }
    let params = std::fs::read_to_string(p.join("eval.params.txt")).unwrap();
    assert!(params.starts_with("V 3 1\n"), "{params}");
}

#[test]
fn missing_embedding_label_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("data.csv"), "left,1\nup,2\nright,0\n").unwrap();
    std::fs::write(p.join("emb.txt"), EMBEDDINGS).unwrap();
    let out = treeloss(p, &["train", "--dataset", "data.csv", "--embeddings", "emb.txt", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("up"), "{}", stderr(&out));
}

#[test]
fn parse_errors_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("data.csv"), "left,1\nright,2\n").unwrap();
    std::fs::write(p.join("emb.txt"), "2 3\nleft 0 0 1\nright 1 x 0\n").unwrap();
    let out = treeloss(p, &["train", "--dataset", "data.csv", "--embeddings", "emb.txt", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("emb.txt:3"), "{}", stderr(&out));

    std::fs::write(p.join("emb.txt"), EMBEDDINGS).unwrap();
    std::fs::write(p.join("data.csv"), "left,1\nright,2,3\n").unwrap();
    let out = treeloss(p, &["train", "--dataset", "data.csv", "--embeddings", "emb.txt", "--out", "e.csv"]);
    assert!(stderr(&out).contains("data.csv:2"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("data.csv"), "left,-5\nright,5\n").unwrap();
    std::fs::write(p.join("emb.txt"), EMBEDDINGS).unwrap();
    let out = treeloss(
        p,
        &["train", "--dataset", "data.csv", "--embeddings", "emb.txt", "--out", "e.csv", "--eta", "1e308"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("iteration"));
}

#[test]
fn bad_arguments_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["exp1", "--sweep", "base=2"],
        vec!["exp3", "--sweep", "base=0.5", "--trials", "1"],
        vec!["exp1", "--loss", "hinge"],
        vec!["exp1", "--frobnicate"],
        vec!["norms", "--sweep", "n=10"],
        vec!["bounds", "--lambda", "0.5", "--trials", "1"],
    ] {
        let out = treeloss(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
    }
    assert!(treeloss(dir.path(), &["--help"]).status.success());
}

#[test]
fn results_go_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = treeloss(dir.path(), &["exp1", "--trials", "2", "--sweep", "k=1", "--test-size", "20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("experiment,sweep,value,loss,trials,seeds,mean_accuracy"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("exp1,k,1,tree,2,0..2,1,"), "{}", lines[1]);
}

#[test]
fn per_trial_file_carries_seed_value_and_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = treeloss(
        dir.path(),
        &["exp4", "--trials", "2", "--seed", "7", "--d", "3", "--sweep", "epsilon=0,1", "--test-size", "50", "--out", "r.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let raw = std::fs::read_to_string(dir.path().join("r.trials.csv")).unwrap();
    let rows: Vec<&str> = raw.lines().collect();
    assert!(rows[0].starts_with("experiment,sweep,value,seed,loss,"));
    assert_eq!(rows.len(), 1 + 2 * 2 * 2);
    assert!(rows[1].starts_with("exp4,epsilon,0,7,tree,"));
    assert!(rows[8].starts_with("exp4,epsilon,1,8,xent,"));
}
