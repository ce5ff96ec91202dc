use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shellcast"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn shellcast")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

/// Ares-Betanzos preset cut down to a couple of years.
fn small_spec(dir: &Path) -> PathBuf {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets/ares_betanzos.json");
    let mut spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(preset).unwrap()).unwrap();
    spec["weeks"] = 120.into();
    let path = dir.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// synth + ingest in `dir`; returns the dataset CSV.
fn dataset(dir: &Path) -> PathBuf {
    small_spec(dir);
    ok(run(dir, &["synth", "--spec", "spec.json", "--out", "raw"]));
    ok(run(dir, &["ingest", "--config", "raw/estuary.json", "--out", "ds"]));
    let csv = fs::read_dir(dir.join("ds"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().unwrap() != "drops.csv")
        .expect("dataset csv");
    csv
}

#[test]
fn synth_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());
    let a = ok(run(dir.path(), &["--seed", "7", "synth", "--spec", "spec.json", "--out", "a"]));
    ok(run(dir.path(), &["synth", "--seed", "7", "--spec", "spec.json", "--out", "b"]));
    assert!(stdout(&a).starts_with("seed: 7\n"), "{}", stdout(&a));
    let ta = tree(&dir.path().join("a"));
    assert_eq!(ta, tree(&dir.path().join("b")));
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["estuary.json", "profiles.csv", "surface.csv", "truth_rule.json", "upwelling.csv", "zone_status.csv"] {
        assert!(names.contains(&f), "missing {f}: {names:?}");
    }
    ok(run(dir.path(), &["--seed", "8", "synth", "--spec", "spec.json", "--out", "c"]));
    assert_ne!(ta, tree(&dir.path().join("c")));
}

#[test]
fn seed_defaults_to_the_spec_seed() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());
    let o = ok(run(dir.path(), &["synth", "--spec", "spec.json"]));
    assert!(stdout(&o).starts_with("seed: 0\n"));
    assert!(dir.path().join("synth_out/zone_status.csv").exists());
}

#[test]
fn train_predict_and_cv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = dataset(d);
    let csv = csv.to_str().unwrap();
    ok(run(d, &["train", "--dataset", csv, "--model", "knn", "--params", r#"{"k": 3}"#, "--out", "m.json"]));
    let o = ok(run(d, &["predict", "--model", "m.json", "--input", csv, "--out", "p.csv"]));
    assert!(stdout(&o).starts_with("seed: "));
    let text = fs::read_to_string(d.join("p.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row_id,probability,prediction"));
    let rows: Vec<&str> = lines.collect();
    let n = fs::read_to_string(csv).unwrap().lines().count() - 1;
    assert_eq!(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f.len(), 3, "{r}");
        assert_eq!(f[0], i.to_string());
        let p: f64 = f[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(f[2] == "0" || f[2] == "1");
    }

    let cv = ok(run(d, &["--jobs", "1", "cv", "--dataset", csv, "--model", "nb", "--k", "5", "--out", "cv1.json"]));
    assert!(stdout(&cv).contains("nb"), "{}", stdout(&cv));
    ok(run(d, &["--jobs", "2", "cv", "--dataset", csv, "--model", "nb", "--k", "5", "--out", "cv2.json"]));
    assert_eq!(fs::read(d.join("cv1.json")).unwrap(), fs::read(d.join("cv2.json")).unwrap());

    fs::create_dir(d.join("res")).unwrap();
    fs::rename(d.join("cv1.json"), d.join("res/cv1.json")).unwrap();
    ok(run(d, &["report", "--results", "res", "--out", "rep"]));
    assert!(d.join("rep/report.json").exists());
}

#[test]
fn predict_rejects_the_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = dataset(d);
    let csv = csv.to_str().unwrap();
    ok(run(d, &["train", "--dataset", csv, "--model", "nb", "--out", "m.json"]));
    let width = fs::read_to_string(csv).unwrap().lines().next().unwrap().split(',').count() - 4;
    fs::write(d.join("narrow.csv"), "a,b,c\n1,2,3\n").unwrap();
    let o = run(d, &["predict", "--model", "m.json", "--input", "narrow.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.starts_with("ERROR 2:"), "{err}");
    assert!(err.contains(&width.to_string()), "expected width {width} in {err}");
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["train", "--dataset", "nope.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--bogus"][..],
        &["cv"][..],
        &["cv", "--dataset", "x.csv", "--model", "forest"][..],
        &["report", "--results", "r", "--config", "c"][..],
        &[][..],
    ] {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("ERROR 1:"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["synth", "ingest", "cv", "gridsearch", "train", "predict", "report"] {
        let o = ok(run(dir.path(), &[sub, "--help"]));
        assert!(stdout(&o).contains("Usage:"), "{sub}");
    }
    ok(run(dir.path(), &["--version"]));
}
