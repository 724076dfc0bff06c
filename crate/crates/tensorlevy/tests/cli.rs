use std::path::PathBuf;
use std::process::Command as Process;

use tensorlevy::{run, Command, DriftChoice, Output, Overrides};

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn shipped(command: Command, name: &str) -> Output {
    let text = std::fs::read_to_string(config_path(name)).unwrap();
    run(command, &text, Overrides::default()).unwrap()
}

fn rows(body: &str) -> Vec<Vec<String>> {
    body.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_tensorlevy")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn moments_rows() {
    let out = shipped(Command::Moments, "moments.json");
    assert!(out.body.starts_with("word,re,im,generator_re,generator_im\n"));
    let table = rows(&out.body);
    let x1x2 = table.iter().find(|r| r[0] == "x1x2").unwrap();
    assert_eq!((num(&x1x2[1]), num(&x1x2[2])), (0.0, 0.5));
    for r in table.iter().filter(|r| r[0].matches('x').count() % 2 == 1) {
        assert_eq!((num(&r[1]), num(&r[2])), (0.0, 0.0));
    }
    let sixth = run(Command::Moments, r#"{"Q": [[1]], "words": ["x1x1x1x1x1x1"]}"#, Overrides::default()).unwrap();
    assert_eq!(num(&rows(&sixth.body)[0][1]), 15.0);
}

#[test]
fn clt_rows() {
    let out = shipped(Command::Clt, "clt-bernoulli.json");
    let table = rows(&out.body);
    let n4 = table.iter().find(|r| r[0] == "4").unwrap();
    assert!((num(&n4[2]) - 2.5).abs() < 1e-12 && (num(&n4[4]) - 0.5).abs() < 1e-12);
    let n1 = table.iter().find(|r| r[0] == "1").unwrap();
    assert_eq!(num(&n1[2]), 1.0);
    let errors: Vec<f64> = table.iter().map(|r| num(&r[4])).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]));

    let out = shipped(Command::Clt, "clt-gaussian.json");
    assert!(out.failures.is_empty());
    let table = rows(&out.body);
    let mut per_n: Vec<(u64, f64)> = Vec::new();
    for r in &table {
        let (n, e) = (r[0].parse().unwrap(), num(&r[4]));
        match per_n.last_mut() {
            Some((m, worst)) if *m == n => *worst = worst.max(e),
            _ => per_n.push((n, e)),
        }
    }
    assert!(per_n.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn positivity_reports() {
    let out = shipped(Command::Positivity, "positivity.json");
    assert!(out.failures.is_empty());
    let report: serde_json::Value = serde_json::from_str(&out.body).unwrap();
    assert_eq!(report["config"]["K"], 3);
    assert!(report["config"]["resolved_triplet"].is_object());
    let reports = report["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r["is_psd"] == true));
    assert_eq!(reports[0]["t"], 0.0);

    let out = shipped(Command::Positivity, "positivity-negative.json");
    assert_eq!(out.failures.len(), 1);
    let report: serde_json::Value = serde_json::from_str(&out.body).unwrap();
    assert!(report["reports"][0]["min_eigenvalue"].as_f64().unwrap() < 0.0);
}

#[test]
fn fock_rows() {
    let out = shipped(Command::FockMoments, "fock-wiener.json");
    assert!(out.failures.is_empty());
    assert!(out.body.starts_with("word,t,re,im,oracle_re,oracle_im,abs_err\n"));
    let table = rows(&out.body);
    let x4 = table.iter().find(|r| r[0] == "x1x1x1x1" && r[1] == "1.0").unwrap();
    assert!((num(&x4[2]) - 3.0).abs() < 1e-12 && num(&x4[4]) == 3.0);
    let config = r#"{"generator": {"kind": "gaussian", "Q": [[0.5, [0, 0.5]], [[0, -0.5], 0.5]]},
        "t": [2], "words": ["x1x2"]}"#;
    let out = run(Command::FockMoments, config, Overrides::default()).unwrap();
    let r = &rows(&out.body)[0];
    assert!(num(&r[2]).abs() < 1e-12 && (num(&r[3]) - 1.0).abs() < 1e-12);
    assert!(shipped(Command::FockMoments, "fock-triplet.json").failures.is_empty());
}

fn final_rows(body: &str) -> Vec<Vec<f64>> {
    rows(body).iter().filter(|r| r[1] == "1.0").map(|r| r.iter().map(|s| num(s)).collect()).collect()
}

#[test]
fn qsde_rows() {
    let zero = r#"{"d": 2, "h": 1, "L": [[[0], [0]], [[0], [0]]], "grid": {"t_max": 1, "n_bins": 8}}"#;
    let out = run(Command::Qsde, zero, Overrides::default()).unwrap();
    assert!(rows(&out.body).iter().all(|r| r[2..].iter().all(|v| num(v) == 0.0)));

    let out = shipped(Command::Qsde, "qsde-scalar.json");
    assert!(out.failures.is_empty());
    let last = final_rows(&out.body);
    assert_eq!(last.len(), 3);
    for w in last.windows(2) {
        let ratio = w[0][4] / w[1][4];
        assert!((1.6..=2.4).contains(&ratio), "{ratio}");
    }
    assert!(last[0][0] == 256.0 && last[0][4] <= 5e-3);

    let text = std::fs::read_to_string(config_path("qsde-two-level.json")).unwrap();
    let consistent = final_rows(&run(Command::Qsde, &text, Overrides::default()).unwrap().body);
    let literal = Overrides { drift: Some(DriftChoice::PaperLiteral), ..Overrides::default() };
    let literal = final_rows(&run(Command::Qsde, &text, literal).unwrap().body);
    assert!(consistent[2][2] < consistent[0][2] / 3.0);
    assert!(literal[2][2] > 0.5 * literal[0][2] && literal[2][2] > 0.1);
}

#[test]
fn subcoalgebra_reports() {
    let dimension = |name| {
        let out = shipped(Command::Subcoalgebra, name);
        assert!(out.failures.is_empty());
        let report: serde_json::Value = serde_json::from_str(&out.body).unwrap();
        assert!(report["invariance_defect"].as_f64().unwrap() <= 1e-10);
        report["dimension"].as_u64().unwrap()
    };
    assert_eq!(dimension("subcoalgebra.json"), 4);
    assert_eq!(dimension("subcoalgebra-unitary.json"), 4);
    let capped = std::fs::read_to_string(config_path("subcoalgebra.json")).unwrap();
    let o = Overrides { degree: Some(1), ..Overrides::default() };
    assert!(run(Command::Subcoalgebra, &capped, o).is_err());
}

#[test]
fn seeded_runs_are_reproducible() {
    let text = std::fs::read_to_string(config_path("positivity.json")).unwrap();
    let with_seed = |seed| run(Command::Positivity, &text, Overrides { seed: Some(seed), ..Overrides::default() }).unwrap().body;
    assert_eq!(with_seed(7), with_seed(7));
    assert_ne!(with_seed(7), with_seed(8));
}

#[test]
fn exit_codes_and_output_file() {
    let config = config_path("moments.json");
    let out_file = std::env::temp_dir().join(format!("tensorlevy-cli-{}.csv", std::process::id()));
    let (code, stdout, _) = binary(&["moments", "--config", config.to_str().unwrap(), "--out", out_file.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(&out_file).unwrap();
    std::fs::remove_file(&out_file).unwrap();
    assert_eq!(written, shipped(Command::Moments, "moments.json").body);

    let negative = config_path("positivity-negative.json");
    let (code, stdout, stderr) = binary(&["positivity", "--config", negative.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(stdout.contains("\"is_psd\": false") && stderr.contains("tolerance failure"));

    let (code, _, _) = binary(&["moments"]);
    assert_eq!(code, 2);
    let bad = std::env::temp_dir().join(format!("tensorlevy-bad-{}.json", std::process::id()));
    std::fs::write(&bad, r#"{"Q": [[1]], "degre": 3}"#).unwrap();
    let (code, _, stderr) = binary(&["moments", "--config", bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).unwrap();
    assert_eq!(code, 2);
    assert!(stderr.contains("degre"));
    let (code, _, _) = binary(&["qsde", "--drift", "sideways"]);
    assert_eq!(code, 2);
}
