use std::path::Path;
use std::process::{Command, Output};

fn lsrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsrf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("f.txt");
    ok(lsrf(&[
        "simulate",
        "--n1",
        "20",
        "--n2",
        "20",
        "--seed",
        "3",
        "--out",
        p(&field),
    ]));
    let json = ok(lsrf(&[
        "predict",
        "--field",
        p(&field),
        "--t1",
        "10",
        "--t2",
        "10",
        "--method",
        "MF-LLM",
        "--b",
        "3",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["l2"].as_f64().unwrap().is_finite());
    assert!(v["l1"].as_f64().unwrap().is_finite());

    let trace = ok(lsrf(&[
        "cv",
        "--field",
        p(&field),
        "--t1",
        "10",
        "--t2",
        "10",
        "--method",
        "MB-LL",
        "--grid",
        "2,4",
    ]));
    assert_eq!(trace.lines().count(), 3, "{trace}");
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"data":{"kind":"simulate","realizations":2,"sim":{"n1":16,"n2":16,"seed":0,"tau":0.1,
              "ar":[{"j":1,"k":1,"beta":0.25},{"j":1,"k":-1,"beta":0.2}],"trend":{"kind":"none"}}},
            "target":{"t1":8,"t2":8},"methods":["MB-LC","MF-LC"],"bandwidth":3.0}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, workers) in [(&a, "1"), (&b, "2")] {
        ok(lsrf(&[
            "bench",
            "--config",
            p(&cfg),
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            p(out),
        ]));
    }
    for f in ["results.csv", "diagnostics.jsonl"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(a.join("summary.md").exists());
}

#[test]
fn bench_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = lsrf(&[
        "bench",
        "--preset",
        "synthetic-small",
        "--workers",
        "1",
        "--out",
        p(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}
