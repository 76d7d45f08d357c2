use std::process::Command;

use ambi_emph_pipeline::ambix::{read_ambix, write_ambix, AmbixAudio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ambi-emph"))
}

#[test]
fn synth_then_emphasize() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.wav");
    let status = bin()
        .args(["synth", "--degree", "2", "--seconds", "0.1", "--rate", "8000", "--seed", "3"])
        .args(["--source", "1.5707963,0", "--source", "1.5707963,1.5707963,0.5"])
        .arg("--out")
        .arg(&scene)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_ambix(&scene).unwrap().channels(), 9);

    let out = dir.path().join("out.wav");
    let report = dir.path().join("report.json");
    let status = bin()
        .args(["emphasize", "--mode", "static", "--kernel-degree", "4", "--axis", "1.5707963,0"])
        .args(["--sharpness", "4", "--project", "on", "--degree", "2"])
        .arg("--in")
        .arg(&scene)
        .arg("--out")
        .arg(&out)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    let audio = read_ambix(&out).unwrap();
    assert_eq!(audio.channels(), 49);
    assert_eq!(audio.truncated(2), read_ambix(&scene).unwrap());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["output_channels"], 49);
    assert_eq!(json["multiplies"]["transfer_complex"], 49 * 9);
    assert_eq!(json["projection"], true);
}

#[test]
fn adaptive_cli_with_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.wav");
    assert!(bin()
        .args(["synth", "--degree", "1", "--seconds", "0.2", "--rate", "8000", "--source", "0.5,0.5"])
        .arg("--out")
        .arg(&scene)
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("out.wav");
    let status = bin()
        .args(["emphasize", "--mode", "adaptive", "--alpha", "4", "--block", "800", "--undersample", "2"])
        .args(["--truncate-out", "1", "--domain", "stft", "--window", "64", "--hop", "32"])
        .arg("--in")
        .arg(&scene)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_ambix(&out).unwrap().channels(), 4);
}

#[test]
fn errors_carry_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.wav");
    let output = bin()
        .args(["emphasize", "--mode", "static"])
        .arg("--in")
        .arg(&missing)
        .arg("--out")
        .arg(dir.path().join("o.wav"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["error"], "io");

    let three = dir.path().join("three.wav");
    let spec = hound::WavSpec {
        channels: 3,
        sample_rate: 8000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&three, spec).unwrap();
    for _ in 0..30 {
        w.write_sample(0i16).unwrap();
    }
    w.finalize().unwrap();
    let output = bin()
        .args(["emphasize", "--mode", "static"])
        .arg("--in")
        .arg(&three)
        .arg("--out")
        .arg(dir.path().join("o.wav"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["error"], "config");

    let good = dir.path().join("good.wav");
    write_ambix(&good, &AmbixAudio::silent(8000, 1, 10)).unwrap();
    let output = bin()
        .args(["emphasize", "--mode", "adaptive", "--alpha", "3"])
        .arg("--in")
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("o.wav"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin().args(["emphasize", "--bogus"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}
