use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../../data");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn coxcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxcheck"))
        .args(args)
        .env_remove("COXCHECK_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

#[test]
fn input_errors_exit_2() {
    let missing = data("no_such_file.toml");
    let cases: Vec<Vec<&str>> = vec![
        vec!["check", &missing],
        vec!["frobnicate"],
        vec!["verify-halpern", "--delta", "one half"],
        vec!["verify-halpern", "--threads", "0"],
        vec!["search", "--worlds", "40", "--trials", "1", "--seed", "1"],
        vec!["enumerate", "quads", "x.toml"],
    ];
    for args in &cases {
        assert_eq!(coxcheck(args).status.code(), Some(2), "{args:?}");
    }
    let malformed = data("malformed.toml");
    let out = coxcheck(&["check", &malformed]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quoted"));
    assert!(out.stdout.is_empty());
}

#[test]
fn probability_file_is_consistent() {
    let out = coxcheck(&["check", &data("probability6.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"], "probability_consistent");
    assert_eq!(check(&r, "witnesses")["detail"]["count"], 0);
    assert_eq!(check(&r, "rescaling")["detail"]["verdict"]["verdict"], "feasible");
}

#[test]
fn conflicting_file_still_completes() {
    let out = coxcheck(&["check", &data("toy_conflict.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(check(&r, "pair_table")["status"], "fail");
    assert_eq!(check(&r, "monotonicity")["status"], "skipped");
    assert_eq!(r["verdict"], "mixed");

    let out = coxcheck(&["enumerate", "pairs", &data("toy_conflict.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["values"][0], "1/2");
    assert_ne!(r["values"][2], r["values"][3]);
}

#[test]
fn rescale_certificate_replays() {
    let out = coxcheck(&["rescale-check", &data("toy_conflict.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["feasible"], false);
    assert_eq!(r["certificate_replays"], true);
    assert_eq!(r["forced_values"].as_array().unwrap().len(), 2);

    let r = json(&coxcheck(&["rescale-check", &data("probability6.toml")]));
    assert_eq!(r["feasible"], true);
}

#[test]
fn enumerations_list_exact_values() {
    for kind in ["pairs", "triples", "rtriples"] {
        let out = coxcheck(&["enumerate", kind, &data("toy.toml")]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        let r = json(&out);
        let key = if kind == "pairs" { "pairs" } else { "triples" };
        let rows = r[key].as_array().unwrap();
        assert_eq!(r["count"].as_u64().unwrap() as usize, rows.len());
        assert!(!rows.is_empty());
        for row in rows {
            let x = row["x"].as_str().unwrap();
            assert!(x.chars().all(|c| c.is_ascii_digit() || c == '/'), "{x}");
        }
    }
}

#[test]
fn text_renders_the_same_report() {
    let j = json(&coxcheck(&["check", &data("toy.toml")]));
    let out = coxcheck(&["check", &data("toy.toml"), "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(&format!("digest: {}", j["digest"].as_str().unwrap())));
    assert!(text.lines().any(|l| l == "verdict: probability_consistent"));
}

#[test]
fn search_is_reproducible_across_thread_counts() {
    let args = ["search", "--worlds", "5", "--trials", "12", "--seed", "3"];
    let one = Command::new(env!("CARGO_BIN_EXE_coxcheck")).args(args).env("COXCHECK_THREADS", "1").output().unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_coxcheck")).args(args).env("COXCHECK_THREADS", "3").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
    let r: Value = serde_json::from_slice(&one.stdout).unwrap();
    let trials: Vec<u64> = r["findings"].as_array().unwrap().iter().map(|f| f["trial"].as_u64().unwrap()).collect();
    assert!(trials.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn unperturbed_search_finds_nothing() {
    let out = coxcheck(&["search", "--worlds", "6", "--trials", "100", "--seed", "11", "--unperturbed"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["findings"].as_array().unwrap().is_empty());
    assert!(r["rejected"].as_array().unwrap().is_empty());
}

#[test]
fn shrunk_findings_still_violate() {
    let out = coxcheck(&["search", "--worlds", "5", "--trials", "6", "--seed", "3", "--shrink"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let findings = r["findings"].as_array().unwrap();
    let shrunk = r["shrunk"].as_array().unwrap();
    assert!(!findings.is_empty());
    assert_eq!(findings.len(), shrunk.len());
    for s in shrunk {
        let s = &s["shrink"];
        assert!(s["structure"].is_string());
        assert_eq!(s["reverified"], true);
    }
}

#[test]
fn halpern_counterexample_confirmed() {
    let out = coxcheck(&["verify-halpern"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"], "counterexample_confirmed");
    let w = &check(&r, "witnesses")["detail"]["witnesses"][0];
    assert_eq!((w["x"].as_str(), w["y"].as_str(), w["z"].as_str()), (Some("3/5"), Some("5/11"), Some("11/19")));
    assert_eq!(w["rhs"], "3/19");
    assert_eq!(check(&r, "rescaling")["detail"]["certificate_replays"], true);
}
