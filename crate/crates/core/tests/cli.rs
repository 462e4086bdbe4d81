use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irs-chanest"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_sound_estimate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("h.ctns");
    let meas = dir.path().join("meas");
    ok(&["generate", "--seed", "5", "--output", s(&chan)]);
    ok(&[
        "sound",
        "--seed",
        "5",
        "--snr-db",
        "20",
        "--input",
        s(&chan),
        "--output",
        s(&meas),
    ]);
    for f in ["y.ctns", "phi.ctns", "meta.json"] {
        assert!(meas.join(f).exists(), "{f}");
    }
    let report = dir.path().join("est.json");
    let text = ok(&[
        "estimate",
        "--seed",
        "5",
        "--snr-db",
        "20",
        "--input",
        s(&meas),
        "--truth",
        s(&chan),
        "--output",
        s(&report),
    ]);
    assert!(text.contains("nmse_db"), "{text}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["nmse_db"].as_f64().unwrap() < 0.0);

    // The seeded in-process trial sees the same channel and plan.
    let direct = ok(&["estimate", "--seed", "5", "--snr-db", "20"]);
    assert_eq!(
        direct.lines().find(|l| l.starts_with("nmse_db")),
        text.lines().find(|l| l.starts_with("nmse_db"))
    );
}

#[test]
fn sweep_writes_outputs_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(&[
        "sweep",
        "--sweep",
        "snr-db",
        "--values=-10,10",
        "--trials",
        "3",
        "--output",
        s(dir.path()),
    ]);
    assert_eq!(table.lines().count(), 3, "{table}");
    for f in ["sweep.json", "sweep.txt", "sweep.dat"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(ok(&["report", "--input", s(dir.path())]), table);
}

#[test]
fn config_file_and_dataset_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
[scenario]
irs_width = 4
irs_height = 4
subcarriers = 16
paths = 2
carrier_hz = 28e9
bandwidth_hz = 100e6
cyclic_prefix = 4

[sounding]
measurements = 8

[sweep]
variable = "measurements"
values = [4, 8, 32]
trials = 2
"#,
    )
    .unwrap();
    let table = ok(&["sweep", "--config", s(&cfg)]);
    assert!(table.contains("exceeds"), "{table}");

    let data = dir.path().join("data");
    let text = ok(&[
        "export-dataset",
        "--config",
        s(&cfg),
        "--count",
        "3",
        "--chunk",
        "2",
        "--output",
        s(&data),
    ]);
    assert!(text.contains("3 pairs"), "{text}");
    assert!(data.join("manifest.json").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = cli(&["sweep", "--sweep", "snr-db", "--values", "10,0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));

    let out = cli(&["denoise-eval", "--trials", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--weights"));

    let out = cli(&["estimate", "--measurements", "65"]);
    assert!(!out.status.success());
}
