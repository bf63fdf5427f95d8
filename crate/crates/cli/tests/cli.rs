use qsynth::fixtures;
use qsynth::io::{to_pretty, PlantFile, SignalFile, SignalSegment};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bless() -> bool {
    std::env::var_os("QSYNTH_BLESS").is_some()
}

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> PathBuf {
    dir().join("fixtures").join(name)
}

fn qsynth(args: &[&str]) -> Output {
    qsynth_env(args, &[])
}

fn qsynth_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qsynth"));
    cmd.args(args).env_remove("QSYNTH_TOL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run qsynth")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qsynth-cli-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d.join(name)
}

fn plant_files() -> Vec<(&'static str, String)> {
    vec![
        ("cavity.json", to_pretty(&PlantFile::from_plant(&fixtures::cavity()))),
        ("uncertain_cavity.json", to_pretty(&PlantFile::from_uncertain(&fixtures::uncertain_cavity()))),
        ("cavity_measured.json", to_pretty(&PlantFile::from_plant(&fixtures::cavity_measured()))),
        ("amplifier_cavity.json", to_pretty(&PlantFile::from_plant(&fixtures::amplifier_cavity()))),
    ]
}

fn step_signal(dim: usize) -> String {
    let mut beta = vec![0.0; dim];
    beta[0] = 1.0;
    to_pretty(&SignalFile {
        horizon: 20.0,
        segments: vec![
            SignalSegment { t: 0.0, beta },
            SignalSegment { t: 10.0, beta: vec![0.0; dim] },
        ],
    })
}

#[test]
fn fixtures_match_builtin_plants() {
    let mut files = plant_files();
    files.push(("step2.json", step_signal(2)));
    for (name, text) in files {
        let path = fixture(name);
        if bless() {
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap();
        assert_eq!(on_disk, text, "{name} is stale; rerun with QSYNTH_BLESS=1");
    }
}

#[test]
fn plant_files_round_trip_byte_identical() {
    for (name, text) in plant_files() {
        let file = PlantFile::parse(&text).unwrap();
        let plant = file.to_plant(Some(&text)).unwrap();
        let again = match file.to_uncertain(Some(&text)).unwrap() {
            Some(u) => to_pretty(&PlantFile::from_uncertain(&u)),
            None => to_pretty(&PlantFile::from_plant(&plant)),
        };
        assert_eq!(again, text, "{name}");
    }
}

/// Numbers within 1e-3 (absolute below 1, relative above), everything else exact.
fn close(a: &Value, b: &Value, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-3 * x.abs().max(y.abs()).max(1.0) {
                Ok(())
            } else {
                Err(format!("{at}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).enumerate().try_for_each(|(i, (p, q))| close(p, q, &format!("{at}[{i}]")))
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            if kx != ky {
                return Err(format!("{at}: keys {kx:?} vs {ky:?}"));
            }
            x.iter().try_for_each(|(k, v)| close(v, &y[k], &format!("{at}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} vs {b}")),
    }
}

fn golden(name: &str, args: &[&str], want_code: i32) -> Value {
    let out = qsynth(args);
    assert_eq!(code(&out), want_code, "{name}: stderr {}", String::from_utf8_lossy(&out.stderr));
    let got = report(&out);
    let path = dir().join("tests/golden").join(name);
    if bless() {
        std::fs::write(&path, to_pretty(&got)).unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    if let Err(e) = close(&got, &want, "$") {
        panic!("{name} differs from golden: {e}");
    }
    got
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synthesize_goldens() {
    let cav = fixture("cavity.json");
    let r = golden("cavity_quantum.json", &["synthesize", s(&cav), "--g", "0.1", "--realize", "quantum"], 0);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["realization"]["realizability"]["realizable"], true);

    let unc = fixture("uncertain_cavity.json");
    let r = golden("uncertain_cavity.json", &["synthesize", s(&unc), "--g", "0.1"], 0);
    assert!(r["closed_loop"]["uncertainty_channel_norm"].as_f64().unwrap() < 1.0);

    let meas = fixture("cavity_measured.json");
    let r = golden(
        "cavity_measured_classical.json",
        &["synthesize", s(&meas), "--g", "0.134", "--realize", "classical"],
        0,
    );
    assert_eq!(r["realization"]["kind"], "classical");

    let amp = fixture("amplifier_cavity.json");
    golden("amplifier_mixed.json", &["synthesize", s(&amp), "--g", "0.1", "--realize", "mixed:2"], 0);
}

#[test]
fn reports_are_deterministic() {
    let cav = fixture("cavity.json");
    let args = ["synthesize", s(&cav), "--g", "0.1", "--realize", "quantum"];
    let a = qsynth(&args);
    let b = qsynth(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn infeasible_level_fails_with_stage() {
    let meas = fixture("cavity_measured.json");
    let out = qsynth(&["synthesize", s(&meas), "--g", "0.12"]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["status"], "fail");
    assert_eq!(r["error"]["code"], "g_too_small");
    assert_eq!(r["error"]["stage"], "riccati_y");
}

#[test]
fn sweep_finds_measured_frontier() {
    let meas = fixture("cavity_measured.json");
    let out = qsynth(&["synthesize", s(&meas), "--sweep", "0.01,1"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let g = r["sweep"]["g_min"].as_f64().unwrap();
    assert!((g - 2.0 / 15.0).abs() < 2e-4, "{g}");
    assert_eq!(r["sweep"]["g_min_3sf"].as_f64().unwrap(), 0.134);
}

#[test]
fn realized_controller_file_checks_and_analyzes() {
    let cav = fixture("cavity.json");
    let ctrl = tmp("ctrl.json");
    let out = qsynth(&["synthesize", s(&cav), "--g", "0.1", "--realize", "quantum", "--out", s(&ctrl)]);
    assert_eq!(code(&out), 0);
    let out = qsynth(&["check", s(&ctrl), "--extract"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(r["commutation"]["holds"], true);
    assert!(r["extraction"]["R"].is_array());

    let out = qsynth(&["analyze", "norm", s(&cav), "--g", "0.1", "--controller", s(&ctrl)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["norm"].as_f64().unwrap() < 0.1);
    assert_eq!(r["below_g"], true);

    let out = qsynth(&["analyze", "sbr", s(&cav), "--g", "0.1", "--controller", s(&ctrl)]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["holds"], true);
}

#[test]
fn plant_check_passes_and_perturbed_plant_fails() {
    let cav = fixture("cavity.json");
    let out = qsynth(&["check", s(&cav)]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["realizability"]["realizable"], true);

    let bad = scaled_b0(1.5, "scaled.json");
    let out = qsynth(&["check", s(&bad)]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["realizability"]["realizable"], false);
    assert!(r["realizability"]["residual_A"].as_f64().unwrap() > 1e-3);
}

#[test]
fn malformed_input_is_a_usage_error_with_position() {
    let bad = tmp("broken.json");
    std::fs::write(&bad, "{\n  \"n\": 2,\n  \"matrices\": {\n    \"A\": [[1, 2],\n").unwrap();
    let out = qsynth(&["check", s(&bad)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
    assert!(out.stdout.is_empty());

    let out = qsynth(&["check", "/nonexistent/plant.json"]);
    assert_eq!(code(&out), 2);
    let out = qsynth(&["synthesize"]);
    assert_eq!(code(&out), 2);
}

fn scaled_b0(factor: f64, name: &str) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("cavity.json")).unwrap()).unwrap();
    for row in v["matrices"]["B0"].as_array_mut().unwrap() {
        for x in row.as_array_mut().unwrap() {
            *x = Value::from(x.as_f64().unwrap() * factor);
        }
    }
    let path = tmp(name);
    std::fs::write(&path, to_pretty(&v)).unwrap();
    path
}

#[test]
fn tolerance_override_is_honored() {
    let cav = fixture("cavity.json");
    let base = report(&qsynth(&["check", s(&cav)]))["realizability"]["tolerance"].as_f64().unwrap();
    let out = qsynth_env(&["check", s(&cav)], &[("QSYNTH_TOL", "1e-3")]);
    assert_eq!(code(&out), 0);
    let loose = report(&out)["realizability"]["tolerance"].as_f64().unwrap();
    let ratio = 1e-3 / qsynth::Tolerances64::default().residual;
    assert!((loose / base / ratio - 1.0).abs() < 1e-9, "{loose} vs {base}");

    let nudged = scaled_b0(1.0 + 1e-6, "nudged.json");
    assert_eq!(code(&qsynth(&["check", s(&nudged)])), 1);
    assert_eq!(code(&qsynth_env(&["check", s(&nudged)], &[("QSYNTH_TOL", "1e-3")])), 0);

    assert_eq!(code(&qsynth_env(&["check", s(&cav)], &[("QSYNTH_TOL", "-1")])), 2);
    assert_eq!(code(&qsynth_env(&["check", s(&cav)], &[("QSYNTH_TOL", "abc")])), 2);
}

#[test]
fn robust_analysis_certifies_uncertain_cavity() {
    let unc = fixture("uncertain_cavity.json");
    let out = qsynth(&["analyze", "robust", s(&unc), "--g", "0.1", "--samples", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(r["certified"], true);
    assert_eq!(r["all_samples_stable"], true);
    let cav = fixture("cavity.json");
    let out = qsynth(&["analyze", "robust", s(&cav), "--g", "0.1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_writes_csv_and_dissipation_holds() {
    let cav = fixture("cavity.json");
    let sig = fixture("step2.json");
    let out = qsynth(&["analyze", "simulate", s(&cav), "--g", "0.1", "--signal", s(&sig)]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with('t'));
    assert!(lines.count() > 100);

    let path = tmp("traj.csv");
    let out = qsynth(&["analyze", "simulate", s(&cav), "--g", "0.1", "--signal", s(&sig), "--out", s(&path)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["dissipation_min_slack"].as_f64().unwrap() >= -1e-6);
    assert!(r["objective_min_slack"].as_f64().unwrap() >= -1e-6);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), csv);

    let wrong = tmp("wrong_dim.json");
    std::fs::write(&wrong, step_signal(3)).unwrap();
    let out = qsynth(&["analyze", "simulate", s(&cav), "--g", "0.1", "--signal", s(&wrong)]);
    assert_eq!(code(&out), 2);
}
