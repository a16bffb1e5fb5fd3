use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use euler_mvs::ensemble::sample_initial_velocity;
use euler_mvs::io::{parse_config, read_field, read_manifest, read_series, ConfigDocument};

fn mvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvs"))
        .args(args)
        .env_remove("MVS_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mvs(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    mvs(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const PATCH: &str = r#"{"kind":"vortex_patch","N":8,"delta":0.0128,"times":[0,0.05,0.1],"seed":3}"#;
const SHEET: &str = r#"{"kind":"flat_sheet","N":8,"M":4,"delta":0.05,"rho":0.3,"times":[0,0.05,0.1],"seed":7,
    "probes":[[1.5707963267948966,4.838052686528282]],"retain_stride":1}"#;

/// All files under `dir` except the manifest, by relative path.
fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn manifest_without_timestamp(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("created");
    v
}

#[test]
fn run_writes_snapshots_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "patch.json", PATCH);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", s(&cfg), "--out", s(&a), "--tracer"]);
    ok(&["run", "--config", s(&cfg), "--out", s(&b), "--tracer"]);
    for i in 0..3 {
        let f = read_field(&a.join(format!("vorticity_{i:03}.mvsf"))).unwrap();
        assert_eq!(f.n1, 30);
        assert!(a.join(format!("tracer_{i:03}.mvsf")).is_file());
    }
    assert_eq!(read_field(&a.join("vorticity_002.mvsf")).unwrap().time, 0.1);
    let energy = read_series(&a.join("energy.csv")).unwrap();
    assert_eq!(energy.headers, vec!["t", "E"]);
    assert_eq!(contents(&a), contents(&b));
    assert_eq!(manifest_without_timestamp(&a), manifest_without_timestamp(&b));
    read_manifest(&a).unwrap();
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&["run", "--config", "/nonexistent/cfg.json", "--out", s(&out)]), 1);
    assert_eq!(code(&["run", "--bogus-flag"]), 1);
    let bad = write_config(tmp.path(), "bad.json", r#"{"kind":"flat_sheet","N":8,"delta":-1,"rho":0.1,"times":[1]}"#);
    let err = mvs(&["run", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(err.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&err.stderr).contains("delta"));
    let cfg = write_config(tmp.path(), "sheet.json", SHEET);
    assert_eq!(code(&["ensemble", "--config", s(&cfg), "--samples", "0", "--out", s(&out)]), 1);
    assert_eq!(code(&["stats", "--run", s(tmp.path()), "--out", s(&out)]), 1);
    // an unstable fixed step blows up: runtime failure
    let blow = write_config(
        tmp.path(),
        "blow.json",
        r#"{"kind":"taylor_green","N":8,"epsilon":50,"dt":1,"times":[400]}"#,
    );
    let err = mvs(&["run", "--config", s(&blow), "--out", s(&out)]);
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("diverged at t ="));
}

#[test]
fn ensemble_is_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sheet.json", SHEET);
    let (one, four) = (tmp.path().join("w1"), tmp.path().join("w4"));
    ok(&["ensemble", "--config", s(&cfg), "--workers", "1", "--out", s(&one)]);
    let out = Command::new(env!("CARGO_BIN_EXE_mvs"))
        .args(["ensemble", "--config", s(&cfg), "--out", s(&four)])
        .env("MVS_WORKERS", "4")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 workers"));
    assert_eq!(contents(&one), contents(&four));
    assert!(contents(&one).keys().any(|k| k.starts_with("retained/")));
    let m = read_manifest(&one).unwrap();
    assert_eq!(m.sample_seeds.len(), 4);
}

#[test]
fn single_member_mean_is_the_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sheet.json", SHEET);
    let out = tmp.path().join("m1");
    ok(&["ensemble", "--config", s(&cfg), "--samples", "1", "--out", s(&out)]);
    let parsed = parse_config(SHEET).unwrap();
    let (u, v) = sample_initial_velocity(&parsed, 0).unwrap().to_grid().unwrap();
    assert_eq!(read_field(&out.join("mean_x_000.mvsf")).unwrap().data, u);
    assert_eq!(read_field(&out.join("mean_y_000.mvsf")).unwrap().data, v);
    assert!(read_field(&out.join("variance_002.mvsf")).unwrap().data.iter().all(|&x| x == 0.0));

    // zero-variance ensemble: flat spread, bound satisfied
    let spread = tmp.path().join("spread");
    let msg = ok(&["spread", "--run", s(&out), "--window", "0", "0.1", "--out", s(&spread)]);
    assert!(msg.contains("passed"), "{msg}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(spread.join("spread_report.json")).unwrap()).unwrap();
    assert_eq!(report["slope"], 0.0);
    assert_eq!(report["bound"]["passed"], true);
}

#[test]
fn statistics_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sheet.json", SHEET);
    let run = tmp.path().join("run");
    ok(&["ensemble", "--config", s(&cfg), "--out", s(&run)]);

    let cauchy = tmp.path().join("cauchy.csv");
    ok(&["cauchy", "--a", s(&run), "--b", s(&run), "--out", s(&cauchy)]);
    let t = read_series(&cauchy).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert!(t.column("cauchy_rate").unwrap().iter().all(|&x| x == 0.0));

    for extra in [&[][..], &["--probes"][..]] {
        let w1 = tmp.path().join("w1.csv");
        let mut args = vec!["wasserstein", "--a", s(&run), "--b", s(&run), "--out", s(&w1), "--stride", "4"];
        args.extend_from_slice(extra);
        ok(&args);
        assert!(read_series(&w1).unwrap().column("mean_w1").unwrap().iter().all(|&x| x == 0.0));
    }

    let hist = tmp.path().join("hist.csv");
    ok(&["probe", "--run", s(&run), "--time-index", "2", "--component", "2", "--bins", "3", "--out", s(&hist)]);
    let counts = read_series(&hist).unwrap().column("count").unwrap();
    assert_eq!(counts.iter().sum::<f64>(), 4.0);

    let stats = tmp.path().join("stats");
    ok(&["stats", "--run", s(&run), "--x1", "1.0", "--out", s(&stats)]);
    let moments = read_series(&stats.join("moments.csv")).unwrap();
    assert_eq!(moments.rows.len(), 3);
    assert!(moments.column("integrated_variance").unwrap().iter().all(|&x| x > 0.0));
    assert_eq!(read_series(&stats.join("slice_001.csv")).unwrap().rows.len(), 30);

    // different snapshot times cannot be compared
    let other_cfg = write_config(tmp.path(), "other.json", &SHEET.replace("[0,0.05,0.1]", "[0,0.05]"));
    let other = tmp.path().join("other");
    ok(&["ensemble", "--config", s(&other_cfg), "--out", s(&other)]);
    assert_eq!(code(&["cauchy", "--a", s(&run), "--b", s(&other), "--out", s(&cauchy)]), 1);
}

#[test]
fn cauchy_between_resolutions() {
    let tmp = tempfile::tempdir().unwrap();
    let coarse = write_config(tmp.path(), "c.json", PATCH);
    let fine = write_config(tmp.path(), "f.json", &PATCH.replace("\"N\":8", "\"N\":16"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", s(&coarse), "--out", s(&a)]);
    ok(&["run", "--config", s(&fine), "--out", s(&b)]);
    let out = tmp.path().join("c.csv");
    ok(&["cauchy", "--a", s(&a), "--b", s(&b), "--out", s(&out)]);
    let rates = read_series(&out).unwrap().column("cauchy_rate").unwrap();
    assert!(rates.iter().all(|&x| x > 0.0 && x.is_finite()));
}

fn preset(name: &str, scale: &str) -> Vec<ConfigDocument> {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["preset", name, "--scale", scale, "--out", s(tmp.path())]);
    let mut paths: Vec<PathBuf> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).unwrap();
            parse_config(&text).unwrap();
            serde_json::from_str(&text).unwrap()
        })
        .collect()
}

#[test]
fn presets() {
    let patch = preset("vortex-patch", "paper");
    assert!(patch.iter().all(|d| d.delta == 0.0128 && d.epsilon == 1e-5 && d.m == 0));
    let mut ns: Vec<usize> = patch.iter().map(|d| d.cutoff).collect();
    ns.sort_unstable();
    assert_eq!(ns, vec![128, 256, 512, 1024]);

    let sheet = preset("sheet-ensemble", "paper");
    assert!(sheet.iter().all(|d| d.samples == 400));
    let mut ns: Vec<usize> = sheet.iter().map(|d| d.cutoff).collect();
    ns.sort_unstable();
    assert_eq!(ns, vec![128, 256, 512, 1024]);

    for name in ["vortex-patch", "sheet-single", "sheet-ensemble", "delta-family", "sign-separation"] {
        let docs = preset(name, "desk");
        assert!(!docs.is_empty());
        assert!(docs.iter().all(|d| d.cutoff <= 128 && d.samples <= 50), "{name}");
    }
    let single = preset("sheet-single", "paper");
    assert!(single.iter().all(|d| d.delta == 0.01 && d.rho == Some(0.001)));
    let family = preset("delta-family", "paper");
    let mut deltas: Vec<f64> = family.iter().map(|d| d.delta).collect();
    deltas.sort_by(f64::total_cmp);
    assert_eq!(deltas, vec![0.0064, 0.0128, 0.0256, 0.0512, 0.1024]);
    assert!(preset("sign-separation", "paper").iter().all(|d| d.rho == Some(0.008) && d.cutoff == 512));

    let tmp = tempfile::tempdir().unwrap();
    let err = mvs(&["preset", "nonsense", "--out", s(tmp.path())]);
    assert_eq!(err.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&err.stderr).contains("sheet-ensemble"));
}
