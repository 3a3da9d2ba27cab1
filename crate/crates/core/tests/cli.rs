use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_gsi");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn gsi(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gsi(args);
    assert!(
        out.status.success(),
        "gsi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok_output(out: Output) -> Output {
    assert!(out.status.success(), "{}", stderr(&out));
    out
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(String::from).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let i = header(path).iter().position(|h| h == name).unwrap();
    rows(path).iter().map(|r| r[i].to_string()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fit(dir: &Path, data: &Path, config: &Path) -> Output {
    gsi(&[
        "--config",
        s(config),
        "--out-dir",
        s(dir),
        "fit",
        "--trajectories",
        s(&data.join("trajectories.jsonl")),
        "--ratings",
        s(&data.join("ratings.jsonl")),
    ])
}

#[test]
fn score_matches_golden() {
    let out = ok(&["score", "--input", s(&fixture("score_input.jsonl")), "--rho", "0.5"]);
    let golden = fs::read_to_string(fixture("score_expected.jsonl")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn score_reads_stdin_and_handles_empty_input() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(BIN)
        .arg("score")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn score_reports_bad_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.jsonl");
    let good = fs::read_to_string(fixture("score_input.jsonl")).unwrap();
    let first = good.lines().next().unwrap();
    fs::write(&input, format!("{first}\n{}\n", first.replace("\"d\"", "\"dist\""))).unwrap();
    let out = gsi(&["score", "--input", s(&input)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    fs::write(&input, format!("{first}\n{}\n", first.replace("\"t\":0.0", "\"t\":-1.0"))).unwrap();
    let out = gsi(&["score", "--input", s(&input)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("segment error at line 2"), "{}", stderr(&out));
}

#[test]
fn noise_free_fixture_recovers_rho() {
    let dir = TempDir::new().unwrap();
    ok_output(fit(dir.path(), &fixture("noise_free"), &fixture("noise_free.toml")));
    let fit_csv = dir.path().join("fit.csv");
    let rhos = column(&fit_csv, "rho_hat");
    assert_eq!(rhos.len(), 6);
    for r in rhos {
        let r: f64 = r.parse().unwrap();
        assert!((r - 0.75).abs() < 1e-3, "rho_hat {r}");
    }
    assert!(column(&fit_csv, "status").iter().all(|s| s == "ok"));
}

#[test]
fn fit_matches_golden_and_reruns_identically() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        ok_output(fit(dir.path(), &fixture("noise_free"), &fixture("noise_free.toml")));
    }
    let first = fs::read(a.path().join("fit.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("fit.csv")).unwrap());
    assert_eq!(first, fs::read(fixture("noise_free/expected_fit.csv")).unwrap());
    assert_eq!(
        fs::read(a.path().join("observations.csv")).unwrap(),
        fs::read(b.path().join("observations.csv")).unwrap()
    );
}

#[test]
fn saturated_participant_is_flagged_not_fatal() {
    let dir = TempDir::new().unwrap();
    let out = ok_output(fit(dir.path(), &fixture("saturated"), &fixture("noise_free.toml")));
    assert!(stderr(&out).contains("BYS-004: rho is unidentifiable"));
    let fit_csv = dir.path().join("fit.csv");
    let ids = column(&fit_csv, "participant_id");
    let status = column(&fit_csv, "status");
    let rho = column(&fit_csv, "rho_hat");
    assert_eq!(ids.len(), 7);
    for ((id, st), r) in ids.iter().zip(&status).zip(&rho) {
        if id == "BYS-004" {
            assert_eq!(st, "unidentifiable_rho");
            assert!(r.is_empty());
        } else {
            assert_eq!(st, "ok");
            assert!((r.parse::<f64>().unwrap() - 0.75).abs() < 1e-3);
        }
    }

    // The flagged participant is excluded from analysis, which still runs.
    let data = fixture("saturated");
    let out = ok(&[
        "--config",
        s(&fixture("noise_free.toml")),
        "--out-dir",
        s(dir.path()),
        "analyze",
        "--fit",
        s(&fit_csv),
        "--trajectories",
        s(&data.join("trajectories.jsonl")),
        "--ratings",
        s(&data.join("ratings.jsonl")),
    ]);
    assert!(stderr(&out).contains("BYS-004: excluded"));
    assert!(!column(&dir.path().join("participants.csv"), "participant_id").contains(&"BYS-004".to_string()));
}

#[test]
fn unmatched_rating_is_a_join_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    let src = fixture("noise_free");
    fs::copy(src.join("trajectories.jsonl"), data.join("trajectories.jsonl")).unwrap();
    let mut ratings = fs::read_to_string(src.join("ratings.jsonl")).unwrap();
    ratings.push_str(
        r#"{"participant_id":"CAS-009","role":"CAS","mode":"TO","trial":2,"item":"Q3-approach","rating":0.5}"#,
    );
    ratings.push('\n');
    fs::write(data.join("ratings.jsonl"), ratings).unwrap();
    let out = fit(dir.path(), &data, &fixture("noise_free.toml"));
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("ratings without matching trajectory segments"), "{err}");
    assert!(err.contains("CAS-009/TO/2"), "{err}");
}

#[test]
fn simulate_default_cohort_matches_manifest() {
    let dir = TempDir::new().unwrap();
    ok(&["--seed", "7", "--out-dir", s(dir.path()), "simulate"]);
    let truth = dir.path().join("truth.csv");
    let manifest = rows(&truth);
    assert_eq!(manifest.len(), 61);
    let roles = column(&truth, "role");
    assert_eq!(roles.iter().filter(|r| *r == "CAS").count(), 31);
    assert_eq!(roles.iter().filter(|r| *r == "BYS").count(), 30);
    assert!(column(&truth, "n_trials").iter().all(|n| n == "6"));

    let sum = |name: &str| column(&truth, name).iter().map(|n| n.parse::<usize>().unwrap()).sum::<usize>();
    let lines = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count();
    assert_eq!(sum("trajectory_rows"), lines("trajectories.jsonl"));
    assert_eq!(sum("rating_rows"), lines("ratings.jsonl"));
    assert_eq!(lines("ratings.jsonl"), 61 * 6);
    for rho in column(&truth, "rho_star") {
        let rho: f64 = rho.parse().unwrap();
        assert!((0.01..=10.0).contains(&rho));
    }
}

#[test]
fn simulate_seed_changes_data_not_schema() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(&["--seed", "1", "--out-dir", s(a.path()), "simulate", "--n-bys", "2", "--n-cas", "2"]);
    ok(&["--seed", "2", "--out-dir", s(b.path()), "simulate", "--n-bys", "2", "--n-cas", "2"]);
    for name in ["trajectories.jsonl", "ratings.jsonl", "truth.csv"] {
        assert_ne!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(header(&a.path().join("truth.csv")), header(&b.path().join("truth.csv")));
}

#[test]
fn simulate_rejects_empty_cohort_and_bad_paths() {
    let dir = TempDir::new().unwrap();
    let out = gsi(&["--out-dir", s(dir.path()), "simulate", "--n-bys", "0", "--n-cas", "0"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("at least one participant"), "{}", stderr(&out));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = gsi(&["--out-dir", s(&blocker.join("sub")), "simulate", "--n-bys", "1", "--n-cas", "0"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("I/O error"), "{}", stderr(&out));
}

#[test]
fn config_errors_are_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[fit]\nmethod = \"newton\"\n").unwrap();
    let out = gsi(&["--config", s(&cfg), "curves"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("config error"), "{}", stderr(&out));
    let out = gsi(&["--config", s(&dir.path().join("missing.toml")), "curves"]);
    assert!(!out.status.success());
}

#[test]
fn curves_default_series() {
    let dir = TempDir::new().unwrap();
    ok(&["--out-dir", s(dir.path()), "curves"]);
    let path = dir.path().join("curves.csv");
    assert_eq!(header(&path), ["d", "gsi_rho_0.5", "gsi_rho_1", "gsi_rho_2"]);
    let table = rows(&path);
    assert_eq!(table.len(), 375);
    assert_eq!(&table[0][0], "0.46");
    assert!(table[0].iter().skip(1).all(|g| g == "0"));
    let at = table.iter().find(|r| &r[0] == "2.08").unwrap();
    assert_eq!((&at[1], &at[2], &at[3]), ("0.707107", "0.5", "0.25"));
    for r in &table {
        let d: f64 = r[0].parse().unwrap();
        let g: Vec<f64> = r.iter().skip(1).map(|x| x.parse().unwrap()).collect();
        if d >= 3.7 {
            assert!(g.iter().all(|&x| x == 1.0), "d = {d}");
        }
        assert!(g[0] >= g[1] && g[1] >= g[2]);
    }
}

#[test]
fn curves_reject_bad_rho() {
    let dir = TempDir::new().unwrap();
    let out = gsi(&["--out-dir", s(dir.path()), "curves", "--rho", "0"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("rho"));
}

#[test]
fn default_round_trip_has_no_warnings() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ok(&["--out-dir", s(d), "simulate"]);
    assert!(!stderr(&out).contains("warning"));
    let out = ok(&[
        "--out-dir",
        s(d),
        "fit",
        "--trajectories",
        s(&d.join("trajectories.jsonl")),
        "--ratings",
        s(&d.join("ratings.jsonl")),
    ]);
    assert!(!stderr(&out).contains("warning"), "{}", stderr(&out));
    let out = ok(&[
        "--out-dir",
        s(d),
        "analyze",
        "--fit",
        s(&d.join("fit.csv")),
        "--trajectories",
        s(&d.join("trajectories.jsonl")),
        "--ratings",
        s(&d.join("ratings.jsonl")),
        "--truth",
        s(&d.join("truth.csv")),
    ]);
    assert!(!stderr(&out).contains("warning"), "{}", stderr(&out));

    assert_eq!(
        header(&d.join("tests.csv")),
        ["test", "groups", "method", "statistic", "p_value", "effect_r", "n", "exact", "status", "note"]
    );
    assert!(column(&d.join("tests.csv"), "status").iter().all(|s| s == "ok"));
    for name in ["descriptives.csv", "clusters.csv", "kde.csv", "participants.csv", "trials.csv"] {
        assert!(!rows(&d.join(name)).is_empty(), "{name}");
    }
    assert_eq!(rows(&d.join("participants.csv")).len(), 61);
    assert_eq!(rows(&d.join("trials.csv")).len(), 366);
}

#[test]
fn identical_trials_give_degenerate_wilcoxon() {
    // Copy trial 1 of every mode over trial 2, ratings included.
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    let src = fixture("noise_free");
    for name in ["trajectories.jsonl", "ratings.jsonl"] {
        let text = fs::read_to_string(src.join(name)).unwrap();
        let mut firsts: Vec<&str> = text.lines().filter(|l| l.contains("\"trial\":1")).collect();
        let seconds: Vec<String> = firsts.iter().map(|l| l.replace("\"trial\":1", "\"trial\":2")).collect();
        let mut out: Vec<String> = firsts.drain(..).map(String::from).collect();
        out.extend(seconds);
        fs::write(data.join(name), out.join("\n") + "\n").unwrap();
    }
    ok_output(fit(dir.path(), &data, &fixture("noise_free.toml")));
    let out = ok(&[
        "--config",
        s(&fixture("noise_free.toml")),
        "--out-dir",
        s(dir.path()),
        "analyze",
        "--fit",
        s(&dir.path().join("fit.csv")),
        "--trajectories",
        s(&data.join("trajectories.jsonl")),
        "--ratings",
        s(&data.join("ratings.jsonl")),
    ]);
    assert!(stderr(&out).contains("trial_gsi"));
    let tests = dir.path().join("tests.csv");
    let names = column(&tests, "test");
    let status = column(&tests, "status");
    for (n, st) in names.iter().zip(&status) {
        if n == "trial_gsi" {
            assert_eq!(st, "degenerate");
        } else {
            assert_eq!(st, "ok", "{n}");
        }
    }
}
