use std::path::Path;
use std::process::{Command, Output};

fn sslbench(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sslbench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn sslbench");
    assert!(
        out.status.success(),
        "sslbench {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sslbench(
        &[
            "gen",
            "30_80_00_20",
            "--train-size",
            "300",
            "--test-size",
            "200",
            "--seed",
            "4",
            "--out",
            "art",
        ],
        d,
    );
    let header = std::fs::read_to_string(d.join("art/train.csv")).unwrap();
    assert!(header.starts_with("x0:num,"));

    let split = sslbench(
        &[
            "split",
            "art/train.csv",
            "--mechanism",
            "mcar",
            "--fraction",
            "0.1",
            "--seed",
            "2",
        ],
        d,
    );
    let text = String::from_utf8(split.stdout).unwrap();
    let unlabeled = text.lines().skip(1).filter(|l| l.ends_with(",?")).count();
    assert_eq!(unlabeled, 270);
    sslbench(
        &[
            "split",
            "art/train.csv",
            "--mechanism",
            "mar",
            "--fraction",
            "0.5",
            "--features",
            "0,1",
            "--out",
            "mar.csv",
        ],
        d,
    );
    sslbench(
        &[
            "split",
            "art/train.csv",
            "--mechanism",
            "mnar",
            "--fraction",
            "0.3",
            "--rho",
            "0.8",
            "--out",
            "mnar.csv",
        ],
        d,
    );

    std::fs::write(
        d.join("exp.toml"),
        r#"
master_seed = 3
n_runs = 2
splits = [0.2, 0.5]

[[dataset]]
name = "art"
train = "art/train.csv"
test = "art/test.csv"

[[technique]]
name = "cc"
m = 2

[[technique]]
name = "assemble-1nn"
alpha = 0.7
"#,
    )
    .unwrap();
    sslbench(&["run", "--config", "exp.toml", "--out", "a.jsonl"], d);
    sslbench(&["run", "--config", "exp.toml", "--out", "b.jsonl", "--serial"], d);
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.jsonl")).unwrap());
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 2 * 2 * 3);

    let report = sslbench(&["report", "--in", "a.jsonl", "--format", "csv"], d);
    let csv = String::from_utf8(report.stdout).unwrap();
    assert!(csv.contains("technique,dataset,labeled_pct,m=2"), "{csv}");
    assert!(csv.contains("technique,dataset,labeled_pct,alpha=0.7"), "{csv}");
    let again = sslbench(&["report", "--in", "a.jsonl", "--format", "csv"], d);
    assert_eq!(csv.as_bytes(), &again.stdout[..]);
    sslbench(&["report", "--in", "a.jsonl", "--format", "text"], d);

    let stats = sslbench(&["stats", "--in", "a.jsonl", "--baseline", "supervised"], d);
    let stats = String::from_utf8(stats.stdout).unwrap();
    assert!(stats.starts_with("W-T-L against supervised"), "{stats}");
    assert!(stats.contains("cc:m=2"));
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sslbench"))
        .args(["gen", "not_a_name", "--out", "x"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("A_B_C_D"));
}
