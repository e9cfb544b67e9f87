use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn network() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/net15.toml")
}

fn edrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edrp")).args(args).output().expect("spawn edrp")
}

fn ok(args: &[&str]) -> String {
    let out = edrp(args);
    assert!(out.status.success(), "edrp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_into(dir: &Path, extra: &[&str]) {
    let net = network();
    let mut args = vec!["run", "--network", net.to_str().unwrap(), "--protocol", "drp", "--rounds", "3"];
    args.extend_from_slice(&["--out-dir", dir.to_str().unwrap()]);
    args.extend_from_slice(extra);
    ok(&args);
}

const ARTIFACTS: [&str; 5] =
    ["summary.csv", "goodput_cdf.csv", "collision_bins.csv", "backoff_lq.csv", "reproducibility.toml"];

fn config_hash(dir: &Path) -> String {
    let text = fs::read_to_string(dir.join("reproducibility.toml")).unwrap();
    let table: toml::Table = text.parse().unwrap();
    table["config_hash"].as_str().unwrap().to_owned()
}

#[test]
fn repeated_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&a, &["--trace"]);
    run_into(&b, &["--trace"]);
    for name in ARTIFACTS.iter().chain(&["trace.csv"]) {
        let x = fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn config_hash_follows_meaningful_fields_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |n: &str| tmp.path().join(n);
    run_into(&dir("base"), &[]);
    run_into(&dir("moved"), &["--trace"]);
    run_into(&dir("seed"), &["--seed", "2"]);
    let base = config_hash(&dir("base"));
    assert_eq!(base, config_hash(&dir("moved")));
    assert_ne!(base, config_hash(&dir("seed")));
}

#[test]
fn failures_exit_nonzero_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    let net = network();
    let out = edrp(&[
        "run",
        "--network",
        net.to_str().unwrap(),
        "--protocol",
        "edrp",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
    assert!(ARTIFACTS.iter().all(|a| !out_dir.join(a).exists()));

    let out = edrp(&["run", "--network", "/nonexistent.toml", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!edrp(&["run", "--network", net.to_str().unwrap(), "--rounds", "0"]).status.success());
}

#[test]
fn training_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_owned();
    let net = network();
    ok(&["mlbss", "gen", "--network", net.to_str().unwrap(), "--out", &p("d.csv"), "--count", "80", "--reps", "1"]);
    ok(&["mlbss", "train", "--data", &p("d.csv"), "--out", &p("m.txt"), "--passes", "8"]);

    let log = fs::read_to_string(p("m.log")).unwrap();
    let costs: Vec<f64> = log.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(costs.len(), 9);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");

    let exported = ok(&["mlbss", "export", "--model", &p("m.txt")]);
    let footprint: usize = exported
        .lines()
        .find_map(|l| l.strip_prefix("# footprint: "))
        .and_then(|rest| rest.split(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(footprint > 0 && footprint <= 300, "{footprint} B");

    let out_dir = p("run");
    ok(&[
        "run",
        "--network",
        net.to_str().unwrap(),
        "--protocol",
        "edrp",
        "--model",
        &p("m.txt"),
        "--rounds",
        "2",
        "--out-dir",
        &out_dir,
    ]);
    assert!(Path::new(&out_dir).join("summary.csv").exists());
}

#[test]
fn calculators_answer_directly() {
    let pc = ok(&["theory", "pc", "--uniform", "10,30", "--delta", "20"]);
    assert!(pc.trim() == "0.5", "{pc}");
    let rt = ok(&["codec", "roundtrip", "--len", "500", "--block", "16", "--loss", "0.3"]);
    assert!(rt.contains("complete=true exact=true"), "{rt}");
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn compare_reuses_each_round_seed_for_every_protocol() {
    let tmp = tempfile::tempdir().unwrap();
    let net = network();
    let cmp = tmp.path().join("cmp");
    ok(&[
        "compare",
        "--network",
        net.to_str().unwrap(),
        "--rounds",
        "3",
        "--protocols",
        "drp,mnp",
        "--out-dir",
        cmp.to_str().unwrap(),
    ]);
    let rows = csv_rows(&cmp.join("compare_rounds.csv"));
    for (col, kind) in [(2, "drp"), (4, "mnp")] {
        let single = tmp.path().join(kind);
        ok(&[
            "run",
            "--network",
            net.to_str().unwrap(),
            "--rounds",
            "3",
            "--protocol",
            kind,
            "--out-dir",
            single.to_str().unwrap(),
        ]);
        let solo = csv_rows(&single.join("summary.csv"));
        for (c, s) in rows.iter().zip(&solo).skip(1) {
            assert_eq!(c[1], s[1], "seed of round {}", c[0]);
            assert_eq!(c[col], s[2], "{kind} goodput in round {}", c[0]);
        }
    }
}
