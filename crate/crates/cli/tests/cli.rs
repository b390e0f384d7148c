use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cont-lll"));
    for var in ["CONT_LLL_SEED", "CONT_LLL_TILE_BUDGET", "CONT_LLL_SEARCH_BUDGET", "CONT_LLL_SIMILARITY_BUDGET", "CONT_LLL_BRUTE_BUDGET"] {
        cmd.env_remove(var);
    }
    cmd.args(args).envs(env.iter().copied()).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_csp_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::copy(fixture("good.json"), &good).unwrap();
    let out = run(&["solve-csp", s(&good), "--oracle"], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sol = read_json(&dir.path().join("good.solution.json"));
    assert_eq!(sol["valid"], true);
    assert_eq!(sol["oracle"]["agrees"], true);
    assert_eq!(sol["input_sha256"].as_str().unwrap().len(), 64);

    let sharp = run(&["solve-csp", s(&fixture("sharp-sinkless.json")), "--out", s(&dir.path().join("x.json"))], &[]);
    assert_eq!(code(&sharp), 1);
    assert!(String::from_utf8_lossy(&sharp.stderr).contains("p·vdeg^ord = 1"));
    assert!(!dir.path().join("x.json").exists());

    assert_eq!(code(&run(&["solve-csp", s(&fixture("malformed.json"))], &[])), 2);
    assert_eq!(code(&run(&["solve-csp", "/nonexistent/csp.json"], &[])), 2);
}

#[test]
fn outputs_are_reproducible_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(code(&run(&["solve-csp", s(&fixture("good.json")), "--out", s(p), "--seed", "9"], &[])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_json(&a)["seed"], 9);
    // The digest covers the parameters as well as the file.
    let c = dir.path().join("c.json");
    run(&["solve-csp", s(&fixture("good.json")), "--out", s(&c), "--oracle"], &[]);
    assert_ne!(read_json(&a)["input_sha256"], read_json(&c)["input_sha256"]);
}

#[test]
fn tiles_build_and_search() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.bin");
    let (z, d3) = (fixture("z.json"), fixture("d3.json"));
    let args = ["build-tiles", "--group", s(&z), "--D", s(&d3), "--n", "6", "--out", s(&h)];
    assert_eq!(code(&run(&args, &[])), 0);
    let bytes = fs::read(&h).unwrap();
    assert_eq!(&bytes[..4], b"TLGR");
    assert!(String::from_utf8_lossy(&bytes).contains("input_sha256"));

    let f2 = dir.path().join("f2.json");
    let unsat = run(&["find-avoiding", "--tiles", s(&h), "--patterns", s(&fixture("proper2.json")), "--out", s(&f2)], &[]);
    assert_eq!(code(&unsat), 1);
    assert_eq!(read_json(&f2)["outcome"], "unsat");

    let f = dir.path().join("f.json");
    assert_eq!(code(&run(&["find-avoiding", "--tiles", s(&h), "--proper-up-to", "5", "--out", s(&f)], &[])), 0);
    let found = read_json(&f);
    assert_eq!(found["outcome"], "found");
    assert_eq!(found["coloring"].as_array().unwrap().len(), 120);

    // Budget overrides through the environment.
    let starved = run(&args, &[("CONT_LLL_TILE_BUDGET", "10")]);
    assert_eq!(code(&starved), 3);
    assert_eq!(code(&run(&args, &[("CONT_LLL_TILE_BUDGET", "0")])), 2);
}

#[test]
fn run_local_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("l.csv");
    let out = dir.path().join("r.json");
    let args = ["run-local", "--graph", r#"{"family":"cycle","n":256}"#, "--algo", "gps", "--ledger", s(&ledger), "--out", s(&out)];
    assert_eq!(code(&run(&args, &[])), 0);
    let csv = fs::read_to_string(&ledger).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# input_sha256="));
    assert_eq!(lines[1], "phase,rounds,n,d");
    assert_eq!(lines.last().unwrap(), &"total,24,256,2");
    let r = read_json(&out);
    assert_eq!(r["proper"], true);
    assert_eq!(r["rounds"], 24);

    let bad_ids = run(
        &["run-local", "--graph", r#"{"family":"cycle","n":4}"#, "--algo", "gps", "--ids", "[1,1,2,3]", "--ledger", s(&ledger)],
        &[],
    );
    assert_eq!(code(&bad_ids), 2);
    let gate = run(
        &["run-local", "--graph", r#"{"family":"path","n":5}"#, "--algo", "hom", "--m", "27", "--ledger", s(&ledger)],
        &[],
    );
    assert_eq!(code(&gate), 1);
}

#[test]
fn benchmark_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let args = ["benchmark", "--pipeline", "gps", "--family", "cycle", "--sizes", "1,256,4096,65536", "--out", s(&out)];
    assert_eq!(code(&run(&args, &[])), 0);
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<u64>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').take(3).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(csv.lines().nth(1), Some("n,rounds,log_star,phases"));
    assert_eq!(rows[0], vec![1, 0, 0]);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
    assert!(rows[1..].windows(2).all(|w| w[1][1].abs_diff(w[0][1]) <= 1));
}

#[test]
fn subshift_and_pattern_checks() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("s.json");
    let z7 = fixture("z7.json");
    let args = ["subshift-demo", "--group", s(&z7), "--H0", "[[0]]", "--gammas", "[[3],[1]]", "--depth", "2", "--report", s(&rep)];
    assert_eq!(code(&run(&args, &[])), 0);
    let r = read_json(&rep);
    assert_eq!(r["report"]["final_checks"], serde_json::json!([true]));

    let group = r#"{"kind":"torus","d":1,"q":6,"generators":[[1]]}"#;
    let net = r#"{"family":"cycle","n":6}"#;
    let mono = r#"{"k":2,"patterns":[{"dom":[[0],[1]],"values":[0,0]}]}"#;
    let alt = r#"{"k":2,"patterns":[{"dom":[[0],[1]],"values":[0,1]}]}"#;
    let check = |pats: &str| code(&run(&["check-patterns", "--group", group, "--patterns", pats, "--graph", net, "--coloring", "[0,1,0,1,0,1]"], &[]));
    assert_eq!(check(mono), 0);
    assert_eq!(check(alt), 1);
    assert_eq!(code(&run(&["check-patterns", "--group", group, "--patterns", "{"], &[])), 2);
}
