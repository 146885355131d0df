use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gunet::dataset::SplitSizes;
use gunet::synthetic::{citation_like, CitationSpec};
use gunet::training::strip_timing;
use tempfile::TempDir;

fn gunet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gunet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: TempDir,
    content: PathBuf,
    cites: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let content = dir.path().join("toy.content");
        let cites = dir.path().join("toy.cites");
        let ds = citation_like(CitationSpec {
            nodes: 90,
            features: 24,
            classes: 3,
            split: SplitSizes {
                train_per_class: 5,
                val: 20,
                test: 40,
            },
            ..Default::default()
        })
        .unwrap();
        ds.write(&content, &cites).unwrap();
        Self { dir, content, cites }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Dataset flags plus a small, fast model.
    fn args<'a>(&'a self, out: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
        let mut v = vec![
            "--dataset-content",
            self.content.to_str().unwrap(),
            "--dataset-cites",
            self.cites.to_str().unwrap(),
            "--train-per-class",
            "5",
            "--val-size",
            "20",
            "--test-size",
            "40",
            "--ratios",
            "0.8,0.5",
            "--hidden-dim",
            "8",
            "--max-epochs",
            "15",
            "--out",
            out.to_str().unwrap(),
        ];
        v.extend_from_slice(extra);
        v
    }
}

#[test]
fn train_writes_one_line_per_seed_and_footer() {
    let f = Fixture::new();
    let out = f.out("train");
    let mut args = vec!["train"];
    args.extend(f.args(&out, &["--seed", "1,2,3"]));
    let o = gunet(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("results.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (line, seed) in lines.iter().zip(["1", "2", "3"]) {
        assert!(line.starts_with(&format!("seed={seed} depth=2 ")), "{line}");
        assert!(line.contains(" test_acc="));
    }
    assert!(lines[3].starts_with("runs=3 mean_test_acc="));
    assert!(lines[3].contains("std_test_acc="));
    for seed in [1, 2, 3] {
        assert!(out.join(format!("checkpoint_seed{seed}.bin")).is_file());
        let csv = fs::read_to_string(out.join(format!("loss_seed{seed}.csv"))).unwrap();
        assert!(csv.starts_with("epoch,loss\n1,"));
    }
    assert_eq!(stdout(&o), text);
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let f = Fixture::new();
    let runs: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = f.out(name);
            let mut args = vec!["train"];
            args.extend(f.args(&out, &["--seed", "7,8"]));
            assert!(gunet(&args).status.success());
            fs::read_to_string(out.join("results.txt")).unwrap()
        })
        .collect();
    assert_eq!(strip_timing(&runs[0]), strip_timing(&runs[1]));
    assert_eq!(
        fs::read(f.out("a").join("checkpoint_seed7.bin")).unwrap(),
        fs::read(f.out("b").join("checkpoint_seed7.bin")).unwrap()
    );
}

#[test]
fn eval_reads_checkpoint() {
    let f = Fixture::new();
    let out = f.out("eval");
    let mut args = vec!["train"];
    args.extend(f.args(&out, &["--seed", "4"]));
    assert!(gunet(&args).status.success());
    let results = fs::read_to_string(out.join("results.txt")).unwrap();
    let ckpt = out.join("checkpoint_seed4.bin");
    let mut args = vec!["eval"];
    args.extend(f.args(&out, &["--checkpoint", ckpt.to_str().unwrap()]));
    let o = gunet(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let test = line.split_whitespace().find(|t| t.starts_with("test_acc=")).unwrap();
    assert!(results.contains(test), "{line} vs {results}");
}

#[test]
fn config_file_supplies_fields() {
    let f = Fixture::new();
    let cfg = f.out("cfg.json");
    fs::write(
        &cfg,
        r#"{"dataset_content": "toy.content", "dataset_cites": "toy.cites",
            "depth": 2, "k_specs": [0.8, 0.5], "hidden_dim": 8, "max_epochs": 5, "seed": 11}"#,
    )
    .unwrap();
    let out = f.out("cfg_out");
    let o = gunet(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--val-size",
        "20",
        "--test-size",
        "40",
        "--train-per-class",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("seed=11 depth=2 "));
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    let out = f.out("bad");
    let o = gunet(&["train", "--dataset-content", "missing.content", "--dataset-cites", "missing.cites"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = f.out("bad.json");
    fs::write(&cfg, r#"{"hiden_dim": 8}"#).unwrap();
    let o = gunet(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hiden_dim"));

    let mut args = vec!["train"];
    args.extend(f.args(&out, &["--depth", "3"]));
    assert_eq!(gunet(&args).status.code(), Some(2));

    assert_eq!(gunet(&["train", "--skip", "mul"]).status.code(), Some(2));
    assert_eq!(gunet(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn diverging_training_exits_3() {
    let f = Fixture::new();
    let out = f.out("diverge");
    let mut args = vec!["train"];
    args.extend(f.args(&out, &["--learning-rate", "1e308"]));
    let o = gunet(&args);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));
}

#[test]
fn ablate_reports_three_variants() {
    let f = Fixture::new();
    let out = f.out("ablate");
    let mut args = vec!["ablate"];
    args.extend(f.args(&out, &["--seed", "1,2"]));
    let o = gunet(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("ablation.txt")).unwrap();
    for v in ["full", "no_pool", "no_augment"] {
        assert!(text.contains(&format!("variant={v} runs=2 ")), "{text}");
    }
    assert!(text.contains("variant=full runs=2 mean_test_acc="));
    assert!(text.contains("full_minus_variant=+0.000000"));
}

#[test]
fn depth_sweep_reports_each_depth() {
    let f = Fixture::new();
    let out = f.out("sweep");
    let o = gunet(&[
        "depth-sweep",
        "--dataset-content",
        f.content.to_str().unwrap(),
        "--dataset-cites",
        f.cites.to_str().unwrap(),
        "--train-per-class",
        "5",
        "--val-size",
        "20",
        "--test-size",
        "40",
        "--ratios",
        "0.8",
        "--hidden-dim",
        "8",
        "--max-epochs",
        "5",
        "--depths",
        "2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("depth_sweep.txt")).unwrap();
    assert!(text.contains("depth=2 runs=1 "));
    assert!(text.contains("depth=3 runs=1 "));
}

#[test]
fn gradcheck_exit_codes() {
    let o = gunet(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("gpool/p"));
    assert_eq!(gunet(&["gradcheck", "--eps", "1e-3"]).status.code(), Some(0));
    let o = gunet(&["gradcheck", "--corrupt-backward", "scale_rows"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gpool/p"));
    assert_eq!(gunet(&["gradcheck", "--eps", "0"]).status.code(), Some(2));
}

#[test]
fn pool_demo_fixtures() {
    let o = gunet(&["pool-demo", "--fixture", "fig1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("pooled X (2x5)"));
    assert!(s.contains("pooled A (2nd graph power) (2x2)"));

    let s = stdout(&gunet(&["pool-demo", "--fixture", "fig2"]));
    assert!(s.contains("unpooled X (7x3)"));
    assert!(s.contains("idx = [1, 2, 3, 5]"));

    let s = stdout(&gunet(&["pool-demo", "--fixture", "path"]));
    assert!(s.contains("idx = [0, 2]"));
}

#[test]
fn pool_demo_on_files() {
    let f = Fixture::new();
    let o = gunet(&[
        "pool-demo",
        "--dataset-content",
        f.content.to_str().unwrap(),
        "--dataset-cites",
        f.cites.to_str().unwrap(),
        "--k",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("unpooled X (90x24)"));

    let bad = f.out("bad.content");
    fs::write(&bad, "n0\t1\t0\n").unwrap();
    let o = gunet(&[
        "pool-demo",
        "--dataset-content",
        bad.to_str().unwrap(),
        "--dataset-cites",
        f.cites.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
