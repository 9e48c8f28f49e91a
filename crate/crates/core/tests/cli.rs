use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
n_domains = 3
n_classes = 2
dim = 3
samples_per_class = 20
domain_shift_scale = 0.5
hidden_dims = 8
feature_dim = 4
epochs_stage1 = 2
epochs_stage2 = 2
batch_size = 16
";

fn enmdap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enmdap")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = enmdap(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_divergence_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let data = dir.path().join("data");
    let listed = ok(&["gen", "--config", &cfg, "--out", s(&data)]);
    assert_eq!(listed.lines().count(), 3);
    for name in ["source1.csv", "source2.csv", "target.csv"] {
        assert!(data.join(name).exists(), "{name}");
    }
    let t = data.join("target.csv");
    let out = ok(&["divergence", "--a", s(&t), "--b", s(&t), "--k-max", "3"]);
    assert_eq!(out, "k,d_lm\n1,0\n2,0\n3,0\n");

    let other = data.join("source1.csv");
    let out = ok(&["divergence", "--a", s(&t), "--b", s(&other), "--k-max", "2"]);
    let rows: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|&d| d > 0.0));
}

#[test]
fn train_writes_outputs_and_eval_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run");
    ok(&["train", "--config", &cfg, "--seed", "3", "--out", s(&out)]);
    for f in ["metrics.csv", "model.ckpt", "summary.json", "target_features.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variant"], "ENMDAP");
    assert_eq!(summary["seed"], 3);
    let acc = summary["target_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(summary["pl_rate_final"].is_number());

    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4);

    let data = dir.path().join("data");
    ok(&["gen", "--config", &cfg, "--out", s(&data)]);
    let ckpt = out.join("model.ckpt");
    let target = data.join("target.csv");
    let first = ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&target)]);
    let second = ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&target)]);
    assert_eq!(first, second);
    let reported: f64 = first.trim().strip_prefix("accuracy=").unwrap().parse().unwrap();
    assert_eq!(reported, acc);
}

fn strip_seconds(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn rerun_is_byte_identical_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "variant = ENMDAP_R\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["train", "--config", &cfg, "--seed", "1", "--out", s(&a)]);
    ok(&["train", "--config", &cfg, "--seed", "1", "--out", s(&b)]);
    for f in ["model.ckpt", "summary.json", "target_features.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ma = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    let mb = std::fs::read_to_string(b.join("metrics.csv")).unwrap();
    assert_eq!(strip_seconds(&ma), strip_seconds(&mb));
}

#[test]
fn invalid_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "variant = MDAP\nn_extractors = 2\n");
    let out = dir.path().join("never");
    let res = enmdap(&["train", "--config", &cfg, "--out", s(&out)]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("n_extractors"), "{err}");
    assert!(!out.exists());

    let cfg = write_config(dir.path(), "colour = blue\n");
    let res = enmdap(&["ablate", "--config", &cfg, "--seeds", "2", "--out", s(&out)]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("colour") && err.contains("line 11"), "{err}");
    assert!(!out.exists());
}

#[test]
fn missing_files_fail() {
    let res = enmdap(&["eval", "--checkpoint", "/nonexistent/model.ckpt", "--data", "/nonexistent/t.csv"]);
    assert!(!res.status.success());
    let res = enmdap(&["train", "--config", "/nonexistent/run.cfg", "--out", "/tmp/x"]);
    assert!(!res.status.success());
    assert!(!enmdap(&["bogus"]).status.success());
}

#[test]
fn ablate_emits_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ablate = MDAP_L, MDAP, ENMDAP:2\nseed = 10\n");
    let out = dir.path().join("abl");
    let printed = ok(&["ablate", "--config", &cfg, "--seeds", "2", "--out", s(&out)]);
    let table = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(printed, table);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "variant,n,mean_acc,std_acc,seeds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("MDAP_L,1,"));
    assert!(lines[2].starts_with("MDAP,1,"));
    assert!(lines[3].starts_with("ENMDAP,2,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",10;11")));
    let runs = std::fs::read_to_string(out.join("ablation_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 6);
}
