use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bosonic_bdg::bdg::Boundary;
use bosonic_bdg::linalg::I;
use bosonic_bdg::models::{chern_insulator, ssh_chain};
use bosonic_bdg::spectral::classify_stability;
use bosonic_bdg::topology::chern_band;
use serde_json::Value;

fn write_job(dir: &Path, name: &str, body: &str) -> (PathBuf, PathBuf) {
    let out = dir.join(format!("{name}_out"));
    let text = format!("{body}\n[output]\ndir = {:?}\n", out.to_str().unwrap());
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    (path, out)
}

fn bdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdg")).args(args).output().unwrap()
}

fn run_job(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![path.to_str().unwrap()];
    args.extend_from_slice(extra);
    bdg(&args)
}

/// Data rows of a CSV written by the tool, split into cells.
fn csv_rows(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let manifest = lines.next().unwrap().strip_prefix("# manifest: ").unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (manifest, header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TOY2: &str = "task = \"spectrum\"\n[model]\nname = \"toy2\"\nmu = 0.6\nnu = 1.0";

#[test]
fn toy2_spectrum_has_growing_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (job, out) = write_job(dir.path(), "toy2", TOY2);
    let o = run_job(&job, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (hash, header, rows) = csv_rows(&out.join("spectrum.csv"));
    assert_eq!(header, ["index", "re", "im", "krein"]);
    let mut im: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    im.sort_by(f64::total_cmp);
    assert!((im[0] + 0.8).abs() < 1e-12 && (im[1] - 0.8).abs() < 1e-12, "{im:?}");
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap().abs() < 1e-12);
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["hash"], Value::String(hash));
    assert_eq!(manifest["outputs"][0], "spectrum.csv");
}

#[test]
fn malformed_config_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let (job, _) = write_job(dir.path(), "bad", &format!("{TOY2}\n[params]\nk_grid = -4"));
    let o = run_job(&job, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["field"], "params.k_grid");
    assert_eq!(err["exit_code"], 2);

    let (job, _) = write_job(dir.path(), "syntax", "task = \n[model");
    assert_eq!(run_job(&job, &[]).status.code(), Some(2));
    assert_eq!(bdg(&[dir.path().join("missing.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_model_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (job, _) = write_job(dir.path(), "typo", &TOY2.replace("nu = 1.0", "nuu = 1.0"));
    let o = run_job(&job, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["field"], "model.nuu");
}

#[test]
fn numerical_failure_exits_3_and_writes_error_json() {
    // toy2 with |μ| < |ν| has no Bogoliubov transformation
    let dir = tempfile::tempdir().unwrap();
    let (job, out) = write_job(dir.path(), "unstable", TOY2);
    let o = run_job(&job, &["--task", "bogoliubov"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read_json(&out.join("error.json"))["error"], "numerical");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = "task = \"edge\"\nseed = 3\n[model]\nname = \"ssh\"\nmu = -2.0\nnu = 0.1\ndims = [12]\nbc = [\"open\"]\n[model.disorder]\namplitude = 0.2\nkind = \"onsite-uniform\"\n[params]\nwidth = 12\nn_k = 1";
    let (job, out) = write_job(dir.path(), "a", body);
    assert_eq!(run_job(&job, &[]).status.code(), Some(0));
    let first = fs::read(out.join("edge.csv")).unwrap();
    assert_eq!(run_job(&job, &[]).status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("edge.csv")).unwrap());

    // same job in another directory: same hash, same bytes
    let (job_b, out_b) = write_job(dir.path(), "b", body);
    assert_eq!(run_job(&job_b, &[]).status.code(), Some(0));
    assert_eq!(first, fs::read(out_b.join("edge.csv")).unwrap());

    // a different seed changes the disorder and the manifest
    let (job_c, out_c) = write_job(dir.path(), "c", &body.replace("seed = 3", "seed = 4"));
    assert_eq!(run_job(&job_c, &[]).status.code(), Some(0));
    assert_ne!(first, fs::read(out_c.join("edge.csv")).unwrap());
}

#[test]
fn single_point_scan_matches_classify_stability() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, nu, cells) = (0.1, 0.3, 16);
    let body = format!(
        "task = \"scan\"\n[model]\nname = \"ssh\"\n[params]\ncells = {cells}\nbulk_k = 64\nmu_grid = {{ start = {mu}, stop = {mu}, n = 1 }}\nnu_grid = {{ start = {nu}, stop = {nu}, n = 1 }}"
    );
    let (job, out) = write_job(dir.path(), "scan", &body);
    let o = run_job(&job, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, rows) = csv_rows(&out.join("instability_map.csv"));
    assert_eq!(rows.len(), 1);
    let col = |name: &str| rows[0][header.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();

    let chain = ssh_chain(0.5, 1.0, cells, Boundary::Open).unwrap().with_onsite_pairing(I * nu);
    let verdict = classify_stability(&chain.bdg(mu).unwrap(), None).unwrap();
    assert!((col("edge_growth") - verdict.max_growth_rate).abs() < 1e-10);
    assert_eq!(col("edge_unstable") == 1.0, !verdict.dynamically_stable);
    assert!(fs::read_to_string(out.join("overlay.csv")).unwrap().lines().count() == 3);
}

#[test]
fn chern_json_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let body = "task = \"chern\"\n[model]\nname = \"chern-insulator\"\nmass = -1.0\nmu = -3.5\n[params]\nk_grid = 24";
    let (job, out) = write_job(dir.path(), "ci", body);
    let o = run_job(&job, &["--emit-plotscript"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&out.join("chern.json"));
    let chern: Vec<i64> = serde_json::from_value(doc["summary"]["chern"].clone()).unwrap();
    let model = chern_insulator(-1.0, [1, 1], [Boundary::Periodic; 2]).unwrap();
    let expected: Vec<i64> = (1..=2).map(|j| chern_band(&model, -3.5, j, (24, 24)).unwrap().rounded).collect();
    assert_eq!(chern, expected);
    assert_eq!(chern[0].abs(), 1);
    assert_eq!(chern.iter().sum::<i64>(), 0);
    assert_eq!(doc["manifest"], read_json(&out.join("manifest.json"))["hash"]);
    assert!(fs::read_to_string(out.join("plot.py")).unwrap().contains("\"chern.csv\""));
}

#[test]
fn json_format_carries_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let body = "task = \"dynamics\"\n[model]\nname = \"toy4\"\nlambda = 1.0\nnu = 0.5\n[params]\ntimes = { start = 0.0, stop = 4.0, n = 5 }";
    let (job, out) = write_job(dir.path(), "dyn", body);
    let text = fs::read_to_string(&job).unwrap().replace("dyn_out\"", "dyn_out\"\nformat = \"json\"");
    fs::write(&job, text).unwrap();
    assert_eq!(run_job(&job, &[]).status.code(), Some(0));
    let doc = read_json(&out.join("dynamics.json"));
    let rows = doc["tables"]["dynamics"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    // ‖e^{-iHt}‖ grows like e^{νt} for the quadruple collision
    let last = rows[4][1].as_f64().unwrap();
    assert!(last > (0.5f64 * 4.0).exp() * 0.5, "{last}");
    assert!((doc["summary"]["max_growth_rate"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(!out.join("dynamics.csv").exists());
}
