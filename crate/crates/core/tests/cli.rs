use std::fs;
use std::path::Path;
use std::process::Command;

use narxid::io::{ingest_csv, load_model, save_model};
use narxid::sim::simulate_free_run;
use narxid::{dc_motor_reference, generate_signal, SignalSpec};

fn narxid(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_narxid")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_white(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data.csv");
    let (code, _, err) =
        narxid(&["synth", "--case", "dc-motor-white", "--n", "1000", "--seed", "17", "--out", s(&data)]);
    assert_eq!(code, 0, "{err}");
    data
}

#[test]
fn synth_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest_csv(&synth_white(dir.path()), "u", "y").unwrap();
    let u: Vec<f64> = generate_signal(&SignalSpec::white_noise(1000, 17)).unwrap();
    assert_eq!(data.u(), &u[..]);
    assert_eq!(data.y(), &dc_motor_reference(&u).unwrap()[..]);
}

#[test]
fn identify_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_white(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("data = \"{}\"\ntrain_end = 60\nseed = 17\n", s(&data))).unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let (code, _, err) = narxid(&["identify", "--config", s(&cfg), "--out-dir", s(&out)]);
        assert_eq!(code, 0, "{err}");
        for f in ["table.txt", "report.json", "timings.json", "model.json", "sim.csv", "corr_acf.csv", "corr_u2_e2.csv"]
        {
            assert!(out.join(f).exists(), "{f}");
        }
        reports.push(fs::read_to_string(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let table = fs::read_to_string(dir.path().join("a/table.txt")).unwrap();
    assert_eq!(table.lines().filter(|l| l.contains("(t-")).count(), 9);
    assert!(table.contains("1.781300"));
    let report: serde_json::Value = serde_json::from_str(&reports[0]).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["chosen"], "NARX");
}

#[test]
fn saved_model_simulates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = synth_white(dir.path());
    let out = dir.path().join("out");
    let (code, _, err) = narxid(&["identify", "--data", s(&data_path), "--train-end", "60", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");

    let model = load_model(&out.join("model.json")).unwrap();
    let again = dir.path().join("again.json");
    save_model(&again, &model).unwrap();
    assert_eq!(load_model(&again).unwrap(), model);

    let data = ingest_csv(&data_path, "u", "y").unwrap();
    let direct = simulate_free_run(&model, data.u(), &data.y()[..2]).unwrap();
    let sim_path = dir.path().join("sim.csv");
    let (code, _, err) =
        narxid(&["simulate", "--model", s(&again), "--data", s(&data_path), "--y-column", "y", "--out", s(&sim_path)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(ingest_csv(&sim_path, "u", "y").unwrap().y(), &direct[..]);

    let (code, _, err) = narxid(&[
        "validate",
        "--model",
        s(&again),
        "--data",
        s(&data_path),
        "--out-dir",
        s(&dir.path().join("v")),
        "--only",
        "acf,ccf",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("v/corr_ccf.csv").exists());
    assert!(!dir.path().join("v/corr_e_eu.csv").exists());
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_white(dir.path());

    let (code, _, err) = narxid(&["identify", "--data", s(&data), "--train-end", "5000"]);
    assert_eq!(code, 2);
    assert!(err.contains("train range"), "{err}");

    let (code, _, _) = narxid(&["identify", "--bogus"]);
    assert_eq!(code, 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "data = \"x.csv\"\nnot_a_key = 3\n").unwrap();
    assert_eq!(narxid(&["identify", "--config", s(&bad)]).0, 2);

    let (code, _, err) = narxid(&["identify", "--data", s(&dir.path().join("missing.csv"))]);
    assert_eq!(code, 3, "{err}");

    let model = dir.path().join("m.json");
    save_model(&model, &narxid::synth::dc_motor_model()).unwrap();
    let short = dir.path().join("short.csv");
    fs::write(&short, "t,u,y\n0,1,0\n1,0.5,0\n").unwrap();
    let (code, _, err) =
        narxid(&["simulate", "--model", s(&model), "--data", s(&short), "--out", s(&dir.path().join("o.csv"))]);
    assert_ne!(code, 0);
    assert!(err.contains("insufficient data"), "{err}");
}
