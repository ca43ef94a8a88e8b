use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pfl_core::evalkit::EvalReport;
use pfl_core::network::Checkpoint;

fn pfl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("PFL_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

const SHORT: &[&str] = &["train", "--problem", "p1", "--iters", "300", "--warmup", "50", "--seed", "7"];

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = SHORT.to_vec();
    args.extend_from_slice(&["--out", out]);
    args.extend_from_slice(extra);
    pfl(&args, dir)
}

#[test]
fn train_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train(tmp.path(), "run", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    for f in ["config.toml", "metrics.jsonl", "checkpoint.json", "front.csv", "report.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let metrics = fs::read_to_string(run.join("metrics.jsonl")).unwrap();
    let mut last = None;
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["schema_version"], 1);
        let it = v["iteration"].as_u64().unwrap();
        if let Some(prev) = last {
            assert!(it > prev, "iterations not increasing: {prev} then {it}");
        }
        last = Some(it);
    }
    assert_eq!(last, Some(300));
    let report = EvalReport::from_json_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.ray_count, 200);
    assert!(report.hv_ratio.unwrap() <= 1.0 + 1e-4);
    let ckpt = Checkpoint::load(&run.join("checkpoint.json")).unwrap();
    assert_eq!(ckpt.iteration, 300);
    assert_eq!(ckpt.seed, 7);
}

#[test]
fn replaying_the_snapshot_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train(tmp.path(), "a", &["--solver", "stein", "--rays", "3"]).status.success());
    let snapshot = tmp.path().join("a/config.toml");
    let o = pfl(&["train", "--config", snapshot.to_str().unwrap(), "--out", "b"], tmp.path());
    assert!(o.status.success());
    for f in ["metrics.jsonl", "checkpoint.json", "report.json", "front.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn eval_reproduces_training_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train(tmp.path(), "run", &[]).status.success());
    let o = pfl(&["eval", "--run", "run"], tmp.path());
    assert!(o.status.success());
    let run = tmp.path().join("run");
    assert_eq!(fs::read(run.join("report.json")).unwrap(), fs::read(run.join("eval/report.json")).unwrap());
    assert_eq!(fs::read(run.join("front.csv")).unwrap(), fs::read(run.join("eval/front.csv")).unwrap());

    let o = pfl(&["eval", "--run", "run", "--rays", "25", "--out", "e25"], tmp.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(tmp.path().join("e25/front.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert_eq!(csv.lines().next().unwrap(), "ray_index,r_1,r_2,L_1,L_2,nondominated");
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train(tmp.path(), "run", &[]).status.success());
    let o = pfl(&["eval", "--run", "run", "--checkpoint", "gone.json", "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train(tmp.path(), "p1", &[]).status.success());
    let o = pfl(&["train", "--problem", "p3", "--iters", "5", "--warmup", "0", "--out", "p3"], tmp.path());
    assert!(o.status.success());
    // p3 has two parameters, p1 one
    let o = pfl(&["eval", "--run", "p1", "--checkpoint", "p3/checkpoint.json", "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn hv_command() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| fs::write(tmp.path().join(name), text).unwrap();
    write("two.csv", "l1,l2\n1,0\n0,1\n");
    write("empty.csv", "l1,l2\n");
    write("dominated.csv", "l1,l2\n1,0\n0,1\n1.5,1.5\n1,0.5\n");
    write("bad.csv", "l1,l2\n1,zero\n");
    let run = |f: &str| pfl(&["hv", "--points", f, "--ref", "2,2"], tmp.path());
    assert_eq!(stdout(&run("two.csv")), "3.0");
    assert_eq!(stdout(&run("empty.csv")), "0.0");
    assert_eq!(stdout(&run("dominated.csv")), "3.0");
    assert_eq!(run("bad.csv").status.code(), Some(4));
    assert_eq!(run("missing.csv").status.code(), Some(4));
}

#[test]
fn rays_command() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pfl(&["rays", "--objectives", "3", "--count", "231"], tmp.path());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 232);
    assert_eq!(text.lines().next().unwrap(), "r_1,r_2,r_3");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[train]\nlamda = 1.0\n").unwrap();
    let o = pfl(&["train", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lamda"));
    assert_eq!(pfl(&["train", "--problem", "p9"], tmp.path()).status.code(), Some(2));
    assert_eq!(pfl(&["train", "--rays", "1", "--out", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(pfl(&["train", "--ref", "2,2,2", "--out", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(pfl(&["train", "--bogus"], tmp.path()).status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn numeric_failure_exits_3_and_keeps_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    // squared errors of these targets overflow
    let mut csv = String::from("x0,y0,y1\n");
    for i in 0..40 {
        csv.push_str(&format!("{},{}e200,{}e200\n", i, 1 + i % 3, 2 + i % 5));
    }
    fs::write(tmp.path().join("huge.csv"), csv).unwrap();
    let toml = "problem = \"tabular\"\n[data]\npath = \"huge.csv\"\nscaling = \"none\"\n[train]\niterations = 5\n";
    fs::write(tmp.path().join("cfg.toml"), toml).unwrap();
    let o = pfl(&["train", "--config", "cfg.toml", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = Checkpoint::load(&tmp.path().join("run/checkpoint.json")).unwrap();
    assert_eq!(ckpt.iteration, 0);
    assert!(ckpt.params.iter().all(|v| v.is_finite()));
    assert!(!tmp.path().join("run/report.json").exists());
}

#[test]
fn sweep_emits_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pfl(
        &["sweep", "--problem", "p1", "--iters", "40", "--warmup", "0", "--out", "sw", "--axis", "rays=2,4,8,16", "--jobs", "2"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for p in [2, 4, 8, 16] {
        let cfg = fs::read_to_string(tmp.path().join(format!("sw/rays-{p}/config.toml"))).unwrap();
        assert!(cfg.contains(&format!("rays = {p}")));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sw/sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);
    assert_eq!(pfl(&["sweep", "--axis", "depth=1"], tmp.path()).status.code(), Some(2));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pfl"))
        .args(["train", "--problem", "p2", "--iters", "3", "--warmup", "0", "--seed", "5"])
        .current_dir(tmp.path())
        .env("RUST_LOG", "warn")
        .env("PFL_OUT_ROOT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("root/p2-phn-hvi-s5/report.json").is_file());
}

#[test]
fn tabular_run_selects_by_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let toml = "problem = \"tabular\"\neval_rays = 25\n[data]\nsynthetic_rows = 200\nsynthetic_tasks = 3\nbatch_size = 32\n[train]\niterations = 60\nwarmup_steps = 5\nrays = 4\nlambda = 0.001\n";
    fs::write(tmp.path().join("tab.toml"), toml).unwrap();
    let o = pfl(&["train", "--config", "tab.toml", "--out", "run"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(tmp.path().join("run/metrics.jsonl")).unwrap();
    let probes = metrics.lines().filter(|l| l.contains("probe_hv")).count();
    // 130 training rows in batches of 32 => 5 steps per epoch
    assert_eq!(probes, 12);
    let report = EvalReport::from_json_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert!(report.hv.is_finite());
    assert_eq!(report.oracle_hv, None);
    assert_eq!(report.reference, vec![1.0; 3]);
    let o = pfl(&["eval", "--run", "run"], tmp.path());
    assert!(o.status.success());
    assert_eq!(
        fs::read(tmp.path().join("run/report.json")).unwrap(),
        fs::read(tmp.path().join("run/eval/report.json")).unwrap()
    );
}
