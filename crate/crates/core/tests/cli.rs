use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rftrigger::config::PipelineConfig;
use rftrigger::datacube::load_cube;
use rftrigger::envelope::read_envelopes_csv;
use rftrigger::pipeline::process_cube;
use rftrigger::rfrep::{read_rd_csv, read_spectrogram_csv};
use rftrigger::synth::{GroundTruth, Scene};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rftrigger"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_kind(out: &Output) -> String {
    let doc: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    doc["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn piped_pipeline_runs_on_all_five_sequence_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for kind in 1..=5 {
        let k = kind.to_string();
        let scene = format!("scene{k}.json");
        let (cube, truth, out) = (
            format!("cube{k}.rfc1"),
            format!("truth{k}.json"),
            format!("p{k}"),
        );
        ok(
            d,
            &["make-scene", "--kind", &k, "--seed", "4", "--out", &scene],
        );
        ok(
            d,
            &[
                "simulate", "--scene", &scene, "--cube", &cube, "--truth", &truth,
            ],
        );
        ok(d, &["process", "--cube", &cube, "--out-dir", &out]);
        let mdis = format!("mdis{k}.json");
        ok(
            d,
            &[
                "detect",
                "--envelopes",
                &format!("{out}/envelopes.csv"),
                "--truth",
                &truth,
                "--out",
                &mdis,
            ],
        );
        let doc = json(d.join(&mdis));
        assert_eq!(doc["schema_version"], 1);
        let acc = doc["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(acc > 0.9, "kind {kind}: accuracy {acc}");
        assert_eq!(GroundTruth::load(d.join(&truth)).unwrap().segments.len(), 6);
    }

    // Templates from kinds 1-4 and a second kind-5 instance, applied to kind 5.
    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "5",
            "--seed",
            "9",
            "--out",
            "extra.json",
        ],
    );
    ok(
        d,
        &[
            "simulate",
            "--scene",
            "extra.json",
            "--cube",
            "extra.rfc1",
            "--truth",
            "extra_truth.json",
        ],
    );
    ok(
        d,
        &["process", "--cube", "extra.rfc1", "--out-dir", "pextra"],
    );
    let mut args = vec![
        "build-templates".to_string(),
        "--out".into(),
        "templates.json".into(),
    ];
    for k in 1..=4 {
        args.push("--recording".into());
        args.push(format!("p{k}/scorer_envelopes.csv,truth{k}.json"));
    }
    args.push("--recording".into());
    args.push("pextra/scorer_envelopes.csv,extra_truth.json".into());
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());
    ok(
        d,
        &[
            "score",
            "--envelopes",
            "p5/scorer_envelopes.csv",
            "--templates",
            "templates.json",
            "--out",
            "scores.csv",
        ],
    );
    ok(
        d,
        &[
            "classify",
            "--scores",
            "scores.csv",
            "--mdis",
            "mdis5.json",
            "--out",
            "labels.json",
        ],
    );
    let labels: Vec<String> = json(d.join("labels.json"))["classifications"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap_or("").to_string())
        .collect();
    assert!(labels.contains(&"teacher".to_string()), "{labels:?}");

    for mode in ["single", "double"] {
        let (events, report) = (format!("events_{mode}.json"), format!("report_{mode}.json"));
        ok(
            d,
            &[
                "trigger",
                "--scores",
                "scores.csv",
                "--mdis",
                "mdis5.json",
                "--mode",
                mode,
                "--events",
                &events,
                "--truth",
                "truth5.json",
                "--report",
                &report,
                "--sweep",
                "sweep.csv",
            ],
        );
        let r = &json(d.join(&report))["report"];
        let (dr, frr, far) = (
            r["detection_rate"].as_f64().unwrap(),
            r["frr"].as_f64().unwrap(),
            r["far"].as_f64().unwrap(),
        );
        assert_eq!(dr, 1.0 - frr - far);
    }
    let single = json(d.join("events_single.json"))["events"]
        .as_array()
        .unwrap()
        .clone();
    let double = json(d.join("events_double.json"))["events"]
        .as_array()
        .unwrap()
        .clone();
    for s in &single {
        assert!(double.iter().any(|e| e["mdi"] == s["mdi"]));
    }

    let sweep = std::fs::read_to_string(d.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 99);
    for w in rows.windows(2) {
        assert!(w[1][2] >= w[0][2] && w[1][5] >= w[0][5]);
        assert!(w[1][3] <= w[0][3] && w[1][6] <= w[0][6]);
    }
}

#[test]
fn process_outputs_reload_to_in_memory_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "2",
            "--seed",
            "1",
            "--out",
            "s.json",
        ],
    );
    ok(
        d,
        &[
            "simulate", "--scene", "s.json", "--cube", "c.rfc1", "--truth", "t.json",
        ],
    );
    ok(d, &["process", "--cube", "c.rfc1", "--out-dir", "p"]);

    let cube = load_cube(d.join("c.rfc1")).unwrap();
    let p = process_cube(&cube, &PipelineConfig::default(), None).unwrap();
    let spec = read_spectrogram_csv(d.join("p/spectrogram.csv")).unwrap();
    assert_eq!(spec.power, p.spectrogram.power);
    assert_eq!(
        read_envelopes_csv(d.join("p/envelopes.csv")).unwrap(),
        p.envelopes
    );
    assert_eq!(
        read_envelopes_csv(d.join("p/scorer_envelopes.csv")).unwrap(),
        p.scorer_envelopes
    );
    let rd = read_rd_csv(d.join("p/rd/frame_00003.csv")).unwrap();
    assert_eq!(rd.magnitude, p.rd_frames[3].magnitude);
    let summary = json(d.join("p/process.json"));
    assert_eq!(
        summary["rd_frames"].as_u64().unwrap() as usize,
        p.rd_frames.len()
    );
}

#[test]
fn simulate_is_deterministic_and_empty_scene_gives_zero_cube() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    Scene::empty(0.4, 5).save(d.join("empty.json")).unwrap();
    ok(
        d,
        &[
            "simulate",
            "--scene",
            "empty.json",
            "--cube",
            "a.rfc1",
            "--truth",
            "a.json",
        ],
    );
    let cube = load_cube(d.join("a.rfc1")).unwrap();
    assert!(cube.data().iter().all(|z| z.norm() == 0.0));

    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "3",
            "--seed",
            "2",
            "--out",
            "s.json",
        ],
    );
    ok(
        d,
        &[
            "simulate", "--scene", "s.json", "--cube", "x.rfc1", "--truth", "x.json",
        ],
    );
    ok(
        d,
        &[
            "simulate", "--scene", "s.json", "--cube", "y.rfc1", "--truth", "y.json",
        ],
    );
    assert_eq!(
        std::fs::read(d.join("x.rfc1")).unwrap(),
        std::fs::read(d.join("y.rfc1")).unwrap()
    );
    assert_eq!(
        std::fs::read(d.join("x.json")).unwrap(),
        std::fs::read(d.join("y.json")).unwrap()
    );

    ok(d, &["process", "--cube", "a.rfc1", "--out-dir", "pa"]);
    let env = read_envelopes_csv(d.join("pa/envelopes.csv")).unwrap();
    assert!(env.upper.iter().chain(&env.lower).all(|&v| v == 0.0));
}

#[test]
fn detector_flag_switches_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "1",
            "--seed",
            "0",
            "--out",
            "s.json",
        ],
    );
    ok(
        d,
        &[
            "simulate", "--scene", "s.json", "--cube", "c.rfc1", "--truth", "t.json",
        ],
    );
    ok(d, &["process", "--cube", "c.rfc1", "--out-dir", "p"]);
    let mut docs = Vec::new();
    for det in ["vw", "fixed", "pbc"] {
        let out = format!("{det}.json");
        ok(
            d,
            &[
                "detect",
                "--envelopes",
                "p/envelopes.csv",
                "--detector",
                det,
                "--truth",
                "t.json",
                "--out",
                &out,
                "--mask",
                "mask.csv",
            ],
        );
        let doc = json(d.join(out));
        assert_eq!(doc["detector"], det);
        docs.push(doc["mdis"].clone());
    }
    assert!(docs[0] != docs[1] || docs[0] != docs[2]);
    let mask = std::fs::read_to_string(d.join("mask.csv")).unwrap();
    assert!(mask.lines().skip(1).all(|l| l == "0" || l == "1"));
}

#[test]
fn config_dump_and_reload_reproduce_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "dump-defaults",
            "--out",
            "cfg.toml",
            "--library",
            "lib.json",
            "--attributes",
            "attrs.json",
        ],
    );
    assert_eq!(
        PipelineConfig::load(d.join("cfg.toml")).unwrap(),
        PipelineConfig::default()
    );
    assert_eq!(
        json(d.join("attrs.json"))["classes"]
            .as_object()
            .unwrap()
            .len(),
        18
    );

    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "4",
            "--seed",
            "3",
            "--library",
            "lib.json",
            "--out",
            "a.json",
        ],
    );
    ok(
        d,
        &[
            "make-scene",
            "--kind",
            "4",
            "--seed",
            "3",
            "--out",
            "b.json",
        ],
    );
    assert_eq!(
        std::fs::read(d.join("a.json")).unwrap(),
        std::fs::read(d.join("b.json")).unwrap()
    );
    ok(
        d,
        &[
            "simulate", "--scene", "a.json", "--cube", "c.rfc1", "--truth", "t.json",
        ],
    );
    ok(d, &["process", "--cube", "c.rfc1", "--out-dir", "p1"]);
    ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "process",
            "--cube",
            "c.rfc1",
            "--out-dir",
            "p2",
        ],
    );
    for f in ["spectrogram.csv", "envelopes.csv", "scorer_envelopes.csv"] {
        assert_eq!(
            std::fs::read(d.join("p1").join(f)).unwrap(),
            std::fs::read(d.join("p2").join(f)).unwrap()
        );
    }
}

#[test]
fn fidelity_ranks_identical_groups_first_and_truncates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let write = |name: &str, upper: &[f64]| {
        let mut s = String::from("time_s,upper_hz,lower_hz\n");
        for (i, u) in upper.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", 0.2 * i as f64, u, -u / 2.0));
        }
        std::fs::write(d.join(name), s).unwrap();
    };
    write("a.csv", &[10.0, 40.0, 80.0, 40.0, 10.0]);
    write("b1.csv", &[10.0, 30.0, 60.0, 30.0]);
    write("b2.csv", &[50.0, 90.0, 20.0, 5.0, 5.0, 70.0]);
    write("c1.csv", &[0.0, 100.0, 0.0]);
    write("c2.csv", &[100.0, 0.0, 100.0, 0.0]);
    let manifest = serde_json::json!({
        "signs": {
            "alpha": { "native": ["a.csv"], "imitation": ["a.csv"] },
            "bravo": { "native": ["b1.csv"], "imitation": ["b2.csv"] },
            "charlie": { "native": ["c1.csv"], "imitation": ["c2.csv"] },
        }
    });
    std::fs::write(d.join("manifest.json"), manifest.to_string()).unwrap();
    ok(
        d,
        &[
            "fidelity",
            "--manifest",
            "manifest.json",
            "--out",
            "f.csv",
            "--json",
            "f.json",
        ],
    );
    let csv = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("1,alpha,"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(json(d.join("f.json"))["ranking"][0], "alpha");
    ok(
        d,
        &[
            "fidelity",
            "--manifest",
            "manifest.json",
            "--k",
            "1",
            "--out",
            "g.csv",
        ],
    );
    assert_eq!(
        std::fs::read_to_string(d.join("g.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    ok(
        d,
        &["fidelity", "--manifest", "manifest.json", "--out", "h.csv"],
    );
    assert_eq!(
        std::fs::read(d.join("f.csv")).unwrap(),
        std::fs::read(d.join("h.csv")).unwrap()
    );
}

#[test]
fn failures_exit_nonzero_with_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &["detect", "--envelopes", "missing.csv", "--out", "x.json"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "io");

    let out = run(d, &["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");

    std::fs::write(d.join("bad.rfc1"), b"NOTACUBE").unwrap();
    let out = run(d, &["process", "--cube", "bad.rfc1", "--out-dir", "p"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "format");

    std::fs::write(d.join("bad.toml"), "[radar]\nbogus = 1\n").unwrap();
    let out = run(d, &["--config", "bad.toml", "dump-defaults"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "config");

    let out = run(d, &["make-scene", "--kind", "9", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.join("s.json").exists());
}
