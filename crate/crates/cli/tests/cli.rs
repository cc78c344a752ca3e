use std::path::Path;
use std::process::{Command, Output};

use qharm_core::verification::HARNESSES;

fn qharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qharm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn list_shows_every_harness_with_its_anchor() {
    let o = qharm(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), HARNESSES.len());
    assert!(text.lines().any(|l| l.contains("reflection-identity") && l.contains("Lemma 3.1")));
    assert!(text.lines().any(|l| l.contains("counterexample-blowup") && l.contains("Proposition 1.2")));
}

#[test]
fn kernel_suite_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kernels.json");
    let o = qharm(&["verify", "--suite", "kernels", "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.ends_with("PASS")));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 4);
}

#[test]
fn failing_harness_gives_nonzero_exit() {
    let o = qharm(&["verify", "--suite", "exponents"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.ends_with("FAIL")));
}

#[test]
fn counterexample_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = qharm(&["counterexample", "--alpha", "0.5", "--r", "0.2", "--seed", "7", "--n", "4000", "--out", path_arg(p)]);
        assert!(o.status.success());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let doc: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(doc["diverges"], true);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["profile"]["quotients"].as_array().unwrap().len(), 6);
}

#[test]
fn spectral_csv_has_one_row_per_node() {
    let o = qharm(&["spectral", "--alpha", "1", "--m", "512", "--q", "zero"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with('#') && comment.contains("config_hash=") && comment.contains("version="));
    assert_eq!(lines.next(), Some("node,phi1"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 512);
    assert!(rows.iter().all(|r| r.len() == 2 && r[1] > 0.0));
}

#[test]
fn estimates_append_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.csv");
    for x in ["0", "0.6"] {
        let o = qharm(&["gauge", "--q", "const -0.5", "--x", x, "--n", "2000", "--append", "--out", path_arg(&out)]);
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,value,stderr,n,seed,config_hash,version");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("gauge@0,") && lines[3].starts_with("gauge@0.6,"));
    assert!(lines[2].starts_with("gauge_nystrom@0,"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn config_file_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha = 0.5\nq = \"critical 0.2\"\nnumber_of_paths = 10\n").unwrap();
    let o = qharm(&["gauge", "--config", path_arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("number_of_paths") && err.contains("line 3"), "{err}");

    std::fs::write(&cfg, "alpha = 1.0\nx = [0.25]\nn = 2000\n").unwrap();
    let from_file = qharm(&["gauge", "--config", path_arg(&cfg)]);
    let from_flags = qharm(&["gauge", "--alpha", "1", "--x", "0.25", "--n", "2000"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_flags.stdout);
}
