use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fishpair");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn fishpair")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "fishpair {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sidecar(p: &Path) -> PathBuf {
    PathBuf::from(format!("{}.run.toml", p.display()))
}

fn same_files(a: &Path, b: &Path) {
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{} != {}", a.display(), b.display());
}

#[test]
fn simulate_refuses_overwrite_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate-abc", "--steps", "400", "--seed", "5", "-o", s(&a)]);

    let again = run(&["simulate-abc", "--steps", "400", "--seed", "5", "-o", s(&a)]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&["simulate-abc", "--steps", "400", "--seed", "5", "--force", "-o", s(&a)]);

    ok(&["simulate-abc", "--config", s(&sidecar(&a)), "-o", s(&b)]);
    same_files(&a, &b);
    same_files(&sidecar(&a), &sidecar(&b));

    let c = dir.path().join("c.csv");
    ok(&["simulate-abc", "--config", s(&sidecar(&a)), "--seed", "6", "-o", s(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("x.csv");
    assert!(!run(&["simulate-abc", "--steps", "0", "-o", s(&o)]).status.success());
    assert!(!run(&["simulate-abc", "--radius", "-3", "-o", s(&o)]).status.success());
    assert!(!run(&["rollout", "-o", s(&o)]).status.success());
    assert!(!o.exists());

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "command = \"train\"\n[args]\nepochs = 1\n").unwrap();
    let out = run(&["simulate-abc", "--config", s(&cfg), "-o", s(&o)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train"));
}

fn write_raw_run(path: &Path, frames: usize, phase: f64) {
    let mut text = String::from("t,agent,x,y\n");
    for k in 0..frames {
        let t = k as f64 * 0.04;
        for (a, r) in [(0, 15.0), (1, 18.0)] {
            let w = 10.0 / r;
            let th = w * t + phase + a as f64;
            text.push_str(&format!("{t},{a},{},{}\n", r * th.cos(), r * th.sin()));
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn ingest_splits_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir(&raw).unwrap();
    for i in 0..20 {
        write_raw_run(&raw.join(format!("run{i}.csv")), 750, i as f64);
    }
    let out1 = dir.path().join("d1");
    let out2 = dir.path().join("d2");
    let first = run(&["ingest", "--input", s(&raw), "-o", s(&out1)]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).contains("input_frames=15000 "));
    ok(&["ingest", "--config", s(&out1.join("run.toml")), "-o", s(&out2)]);
    for f in ["train.csv", "validation.csv", "test.csv", "run.toml"] {
        same_files(&out1.join(f), &out2.join(f));
    }
    let sidecar = fs::read_to_string(out1.join("run.toml")).unwrap();
    assert!(sidecar.contains("output_frames = 5000"), "{sidecar}");
}

#[test]
fn train_rollout_validate_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["simulate-abc", "--steps", "1500", "--seed", "1", "-o", s(&p("abc.csv"))]);

    ok(&[
        "train", "--train", s(&p("abc.csv")), "--epochs", "2", "--hidden", "4",
        "--batch-size", "64", "--chunk-seconds", "30", "-o", s(&p("m1")),
    ]);
    assert!(p("m1.last").exists());
    let log = fs::read_to_string(p("m1.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    ok(&["train", "--config", s(&sidecar(&p("m1"))), "-o", s(&p("m2"))]);
    same_files(&p("m1"), &p("m2"));
    same_files(&sidecar(&p("m1")), &sidecar(&p("m2")));

    ok(&["train", "--train", s(&p("abc.csv")), "--epochs", "1", "--hidden", "4",
        "--ablation", "mli", "--chunk-seconds", "30", "-o", s(&p("mli"))]);

    ok(&["rollout", "--model", s(&p("m1")), "--steps", "300", "--seed", "3", "-o", s(&p("r1.csv"))]);
    ok(&["rollout", "--config", s(&sidecar(&p("r1.csv"))), "-o", s(&p("r2.csv"))]);
    same_files(&p("r1.csv"), &p("r2.csv"));
    let rtoml = fs::read_to_string(sidecar(&p("r1.csv"))).unwrap();
    assert!(rtoml.contains("model_sha256"));

    ok(&["rollout", "--model", s(&p("m1")), "--steps", "50", "--agents", "5",
        "--containment", "clamp", "--strict-paper-noise", "-o", s(&p("g.csv"))]);
    let g = fs::read_to_string(p("g.csv")).unwrap();
    assert_eq!(g.lines().count(), 1 + 50 * 5);

    ok(&["validate", "--input", s(&p("abc.csv")), "--max-lag", "5", "-o", s(&p("v1"))]);
    ok(&["validate", "--config", s(&p("v1/run.toml")), "-o", s(&p("v2"))]);
    let names: Vec<_> = fs::read_dir(p("v1")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 11);
    for n in names {
        same_files(&p("v1").join(&n), &p("v2").join(&n));
    }

    ok(&["compare", s(&p("abc.csv")), s(&p("r1.csv")), "--max-lag", "5", "-o", s(&p("c1.txt"))]);
    ok(&["compare", "--config", s(&sidecar(&p("c1.txt"))), "-o", s(&p("c2.txt"))]);
    same_files(&p("c1.txt"), &p("c2.txt"));
    let report = fs::read_to_string(p("c1.txt")).unwrap();
    assert!(report.starts_with("speed.tv = "));
}
