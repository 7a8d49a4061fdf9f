use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use idla_core::lattice::{Site, SiteSet};
use idla_lab::io::{set_pgm, Snapshot};
use idla_lab::manifest::{content_address, load_completed, RunManifest};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_idla-lab"));
    c.env_remove("IDLA_LAB_CACHE");
    c
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIMULATE: &str = r#"{ "m": [16], "trials": 1, "seed": 11, "snapshots": 2 }"#;

#[test]
fn content_address_is_git_sha256_blob_id() {
    // `git hash-object --object-format=sha256` of the empty file.
    assert_eq!(
        content_address(b""),
        "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
    );
    assert_ne!(content_address(b"a"), content_address(b"b"));
}

#[test]
fn snapshot_encodings_round_trip() {
    let set = SiteSet::from_sites([
        Site::new(0, 0),
        Site::new(1, 0),
        Site::new(3, 0),
        Site::new(-1, 2),
    ]);
    let snap = Snapshot::new(&set, 4, 0.5, 4);
    assert_eq!(snap.runs, vec![[0, 0, 2], [0, 3, 1], [2, -1, 1]]);
    assert_eq!(snap.to_set().to_vec(), set.to_vec());
    let pgm = set_pgm(&set);
    let header = b"P5\n5 3\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    let pixels = &pgm[header.len()..];
    assert_eq!(pixels.len(), 15);
    // Top row is y = 2, holding only x = −1.
    assert_eq!(&pixels[..5], &[255, 0, 0, 0, 0]);
    assert_eq!(&pixels[10..], &[0, 255, 255, 0, 255]);
    assert_eq!(pixels.iter().filter(|&&p| p == 255).count(), 4);
}

#[test]
fn simulate_emits_records_snapshots_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", SIMULATE);
    // A missing, nested output directory is created.
    let out = tmp.path().join("a/b/out");
    let clock = Instant::now();
    let o = run("simulate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(clock.elapsed().as_secs_f64() < 60.0);

    let dir = out.join("runs/m0016/trial0000");
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let names: Vec<&str> = manifest.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert!(names.contains(&"records.csv"));
    let pgms: Vec<&&str> = names.iter().filter(|n| n.ends_with(".pgm")).collect();
    assert_eq!(pgms.len(), 2, "{names:?}");
    for a in &manifest.artifacts {
        assert_eq!(
            content_address(&std::fs::read(dir.join(&a.path)).unwrap()),
            a.id
        );
    }

    let records = std::fs::read_to_string(dir.join("records.csv")).unwrap();
    assert!(records.starts_with("s,t,d_boundary,early,late,max_early,max_late\n"));
    assert_eq!(records.lines().count(), 22);

    // The final snapshot holds the initial cluster plus every particle.
    let last: Snapshot =
        serde_json::from_slice(&std::fs::read(dir.join("snapshot-020.json")).unwrap()).unwrap();
    assert_eq!(last.particles, manifest.summary.particles);
    let initial = idla_core::lattice::sites_in(
        &idla_core::lattice::Region::disk([0.0, 0.0], 1.0),
        last_res(16),
    )
    .unwrap();
    assert_eq!(last.occupied, initial.len() + last.particles);
    let pgm = std::fs::read(dir.join("snapshot-020.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    let campaign = std::fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert_eq!(campaign.lines().count(), 2);
}

fn last_res(m: i64) -> idla_core::lattice::Resolution {
    idla_core::lattice::Resolution::new(m).unwrap()
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        r#"{ "m": [12, 16], "trials": 2, "seed": 5 }"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("simulate", &cfg, &a, &["--workers", "2"])
        .status
        .success());
    assert!(run("simulate", &cfg, &b, &["--workers", "1"])
        .status
        .success());
    for rel in [
        "campaign.csv",
        "runs/m0012/trial0001/records.csv",
        "runs/m0016/trial0000/records.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(rel)).unwrap(),
            std::fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
    // A different seed changes the runs.
    let c = tmp.path().join("c");
    assert!(run("simulate", &cfg, &c, &["--seed", "6"]).status.success());
    assert_ne!(
        std::fs::read(a.join("campaign.csv")).unwrap(),
        std::fs::read(c.join("campaign.csv")).unwrap()
    );
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", SIMULATE);
    let file = tmp.path().join("plain-file");
    std::fs::write(&file, b"x").unwrap();
    let o = run("simulate", &cfg, &file.join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn invalid_flow_exits_2_with_report() {
    let tmp = TempDir::new().unwrap();
    // The source disk grows past the initial domain.
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{ "flow": { "D0": { "disk": { "center": [0, 0], "radius": 0.5 } },
                       "families": [ { "T": 1.0, "growth": { "disk_centered": [0, 0] }, "rate": { "proportional": 1.0 } } ] },
             "m": [16] }"#,
    );
    let o = run("simulate", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("condition") && err.contains("FAILED"), "{err}");
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        r#"{ "m": [32, 16] }"#,
        r#"{ "m": [16], "trials": 0 }"#,
        r#"{ "m": [16], "checkpoints": 5 }"#,
        r#"{ "kind": "kernel" }"#,
        r#"{ "m": [16], "no_such_field": 1 }"#,
        r#"not json"#,
    ];
    for (i, json) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), json);
        let o = run("simulate", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{json}: {}", stderr(&o));
    }
    let o = run("simulate", &tmp.path().join("missing.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(tmp.path(), "s.json", r#"{ "m": [16, 32] }"#);
    let o = run("scaling", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "scaling needs 3 resolutions");
}

fn printed_c(s: &str) -> f64 {
    let line = s
        .lines()
        .find(|l| l.trim_start().starts_with("c = "))
        .expect("c line");
    line.trim_start()[4..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn kernel_builds_then_hits_cache() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "k.json", r#"{ "kind": "kernel" }"#);
    let cache = tmp.path().join("cache");
    let out = tmp.path().join("out");
    let first = bin()
        .args(["kernel", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("IDLA_LAB_CACHE", &cache)
        .output()
        .unwrap();
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("built"));
    let c = printed_c(&stdout(&first));
    assert!(c >= 0.15, "c = {c}");
    assert!(cache.join("potential-150.bin").exists());

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("kernel_report.json")).unwrap()).unwrap();
    assert!(report["residual"].as_f64().unwrap() <= 1e-12);

    let clock = Instant::now();
    let second = bin()
        .args(["kernel", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("IDLA_LAB_CACHE", &cache)
        .output()
        .unwrap();
    assert!(clock.elapsed().as_secs_f64() < 1.0);
    assert!(second.status.success());
    assert!(stdout(&second).contains("cache hit"));

    // A corrupted table is rebuilt with a warning.
    let bin_path = cache.join("potential-150.bin");
    let mut bytes = std::fs::read(&bin_path).unwrap();
    bytes[1000] ^= 0xff;
    std::fs::write(&bin_path, bytes).unwrap();
    let third = bin()
        .args(["kernel", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("IDLA_LAB_CACHE", &cache)
        .output()
        .unwrap();
    assert!(third.status.success());
    assert!(stdout(&third).contains("built"));
    assert!(stderr(&third).contains("rebuilding"), "{}", stderr(&third));
}

#[test]
fn cache_defaults_under_output_dir() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "k.json",
        r#"{ "kernel": { "half_width": 40 } }"#,
    );
    let out = tmp.path().join("out");
    let o = run("kernel", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(out.join("cache/potential-40.json").exists());
    assert!(out.join("kernel_report.json").exists());
}

#[test]
fn harmonic_verify_passes_on_eight_poles() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "h.json",
        r#"{ "m": [32], "harmonic": { "poles": 8 } }"#,
    );
    let out = tmp.path().join("out");
    let o = run("harmonic-verify", &cfg, &out, &[]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("harmonic_report.json")).unwrap()).unwrap();
    let poles = r["poles"].as_array().unwrap();
    assert_eq!(poles.len(), 8);
    for p in poles {
        for c in p["checks"].as_array().unwrap() {
            assert_eq!(c["passed"], true, "{c}");
        }
    }
    let levels: Vec<u64> = r["green"]["convergence"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["m"].as_u64().unwrap())
        .collect();
    assert_eq!(levels, vec![16, 32, 64]);
    assert!(stdout(&o).contains("fitted rate"));
}

#[test]
fn harmonic_verify_with_zero_poles_is_empty() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "h.json",
        r#"{ "m": [32], "harmonic": { "poles": 0 } }"#,
    );
    let out = tmp.path().join("out");
    let o = run("harmonic-verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("harmonic_report.json")).unwrap()).unwrap();
    assert!(r["poles"].as_array().unwrap().is_empty());
    assert!(r["green"].is_null());
}

#[test]
fn harmonic_verify_rejects_non_disk_flow() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "h.json",
        r#"{ "flow": { "D0": { "disk": { "center": [0, 0], "radius": 1 } },
                       "families": [ { "T": 0.2, "growth": { "disk_centered": [0.2, 0] }, "rate": { "proportional": 1.0 } } ] } }"#,
    );
    let o = run("harmonic-verify", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn scaling_recovers_synthetic_exponent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{ "scaling": { "synthetic": [
               { "m": 16, "values": [0.0625, 0.0625] },
               { "m": 32, "values": [0.03125] },
               { "m": 64, "values": [0.015625, 0.015625, 0.015625] },
               { "m": 128, "values": [0.0078125] } ] } }"#,
    );
    let out = tmp.path().join("out");
    let o = run("scaling", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("scaling_fit.json")).unwrap()).unwrap();
    let beta = r["fit"]["beta"].as_f64().unwrap();
    assert!((beta - 1.0).abs() <= 1e-6, "beta = {beta}");
    let csv = std::fs::read_to_string(out.join("scaling.csv")).unwrap();
    assert!(csv.starts_with("m,trials,median,fitted,residual\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn scaling_resume_reuses_completed_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{ "m": [8, 12, 16], "trials": 3, "seed": 3, "scaling": { "resamples": 200 } }"#,
    );
    let out = tmp.path().join("out");
    let first = run("scaling", &cfg, &out, &[]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("9 runs (0 reused)"));
    let fit = |dir: &Path| -> serde_json::Value {
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.join("scaling_fit.json")).unwrap()).unwrap();
        serde_json::json!([v["fit"], v["envelope"], v["levels"]])
    };
    let before = fit(&out);
    let campaign = std::fs::read(out.join("campaign.csv")).unwrap();

    // Simulate a crash: one run lost its manifest, another has a damaged artifact.
    std::fs::remove_file(out.join("runs/m0012/trial0001/manifest.json")).unwrap();
    std::fs::write(out.join("runs/m0016/trial0002/records.csv"), b"garbage").unwrap();
    let second = run("scaling", &cfg, &out, &[]);
    assert!(second.status.success());
    assert!(
        stdout(&second).contains("9 runs (7 reused)"),
        "{}",
        stdout(&second)
    );
    assert_eq!(std::fs::read(out.join("campaign.csv")).unwrap(), campaign);
    assert_eq!(fit(&out), before);

    // A different seed invalidates every manifest.
    let dir = out.join("runs/m0008/trial0000");
    let m: RunManifest =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert!(load_completed(&dir, &m.config_hash, m.seed).is_some());
    assert!(load_completed(&dir, "other", m.seed).is_none());
    let third = run("scaling", &cfg, &out, &["--seed", "4"]);
    assert!(stdout(&third).contains("9 runs (0 reused)"));
}

#[test]
fn sandpile_reports_quadrature() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.json",
        r#"{ "m": [16, 32], "sandpile": { "schedule": "sweep" } }"#,
    );
    let out = tmp.path().join("out");
    let o = run("sandpile", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("sandpile_report.json")).unwrap()).unwrap();
    for l in r["levels"].as_array().unwrap() {
        assert!(l["mass_drift"].as_f64().unwrap() < 1e-6);
        assert!(l["max_excess"].as_f64().unwrap() <= 1e-6);
    }
    assert!(out.join("sandpile-m0032.pgm").exists());
    assert_eq!(
        std::fs::read_to_string(out.join("sandpile.csv"))
            .unwrap()
            .lines()
            .count(),
        13
    );
}

#[test]
fn zero_workers_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", SIMULATE);
    let o = run(
        "simulate",
        &cfg,
        &tmp.path().join("out"),
        &["--workers", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}
