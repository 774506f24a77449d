use std::path::Path;
use std::process::{Command, Output};

use plurikit::{Config, EXIT_GATE, EXIT_PASS, EXIT_USAGE};
use proptest::prelude::*;

fn plurikit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plurikit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const FS: &str = r#"
k = [4, 16, 64]
[weight]
kind = "toric"
polytope = [[0], [1]]
"#;

const SIMPLEX: &str = r#"
k = [4, 8, 16]
[weight]
kind = "toric"
polytope = [[0, 0], [1, 0], [0, 1]]
[grid]
h = 0.05
v_max = 10.0
"#;

/// Rows of a CSV written by the tool, schema line dropped.
fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let (schema, body) = text.split_once('\n').unwrap();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![header];
    for r in rd.records() {
        rows.push(r.unwrap().iter().map(String::from).collect());
    }
    (schema.to_string(), rows)
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = rows[0].iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[j].parse().unwrap()).collect()
}

#[test]
fn validate_echoes_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fs.toml", FS);
    let o = plurikit(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    let echo = stdout(&o);
    let parsed: toml::Value = toml::from_str(&echo).unwrap();
    let tol = &parsed["tolerances"];
    assert_eq!(tol["tol_sor"].as_float(), Some(1e-10));
    assert!(tol["eps_d_rule"].as_str().unwrap().contains("max(residual"));
    let v = parsed["grid"]["v_formula"].as_float().unwrap();
    assert_eq!(parsed["grid"]["v_max"].as_float(), Some(v));
    assert!(v > 1.0);
    assert_eq!(parsed["workers"].as_integer(), Some(1));
}

#[test]
fn validate_can_write_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fs.toml", FS);
    let out = dir.path().join("out");
    let o = plurikit(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    assert_eq!(std::fs::read_to_string(out.join("config.toml")).unwrap(), stdout(&o));
}

#[test]
fn negative_level_names_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &FS.replace("[4, 16, 64]", "[2, -4]"));
    let o = plurikit(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).contains("`k`"), "{}", stderr(&o));
}

#[test]
fn bump_past_the_box_edge_warns() {
    let text = r#"
k = [8]
[weight]
kind = "perturbed_toric"
polytope = [[-1], [1]]
bumps = [{ center = [2.5], radius = 1.0, amplitude = 0.4, smoothness = 4.0 }]
[grid]
v_max = 3.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "edge.toml", text);
    let o = plurikit(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    let echo = stdout(&o);
    assert!(echo.contains("warnings") && echo.contains("beyond the box edge"), "{echo}");
}

#[test]
fn unknown_command_is_a_usage_error() {
    let o = plurikit(&["frobnicate", "--config", "x.toml", "--out", "y"]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).to_lowercase().contains("usage"));
    let o = plurikit(&[]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("missing.toml");
    let o = plurikit(&["envelope", "--config", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));

    let typo = write(dir.path(), "typo.toml", &format!("{FS}\n[grid]\nhh = 0.1\n"));
    let o = plurikit(&["envelope", "--config", &typo, "--out", out]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));

    let fs = write(dir.path(), "fs.toml", FS);
    let o = plurikit(&["offdiag", "--config", &fs, "--out", out]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(stderr(&o).contains("weight.kind"));

    let o = plurikit(&["envelope", "--config", &fs, "--out", out, "--workers", "0"]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn fubini_study_converges_at_the_exact_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fs.toml", FS);
    let out = dir.path().join("out");
    let o = plurikit(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_PASS), "{}", stdout(&o));

    let (schema, rows) = read_csv(&out.join("convergence.csv"));
    assert!(schema.starts_with("schema=plurikit.convergence/"));
    let ks = column(&rows, "k");
    let l1 = column(&rows, "l1_error");
    let sup = column(&rows, "sup_ratio");
    assert_eq!(ks, [4.0, 16.0, 64.0]);
    for ((k, l), s) in ks.iter().zip(&l1).zip(&sup) {
        assert!((l - 1.0 / k).abs() < 1e-6 / k, "k = {k}: l1 {l}");
        assert!((s - (k + 1.0) / k).abs() < 1e-6, "k = {k}: sup {s}");
    }

    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary, stdout(&o));
    assert!(summary.lines().all(|l| l.starts_with("PASS ")));
    let manifest: toml::Value = toml::from_str(&std::fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["status"].as_str(), Some("pass"));
    assert_eq!(manifest["command"].as_str(), Some("converge"));
}

#[test]
fn simplex_volume_matches_the_lattice_volume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "simplex.toml", SIMPLEX);
    let out = dir.path().join("out");
    let o = plurikit(&["volume", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_PASS), "{}", stdout(&o));
    let (_, rows) = read_csv(&out.join("volume_mass.csv"));
    let vol = column(&rows, "vol_lattice");
    let mass = column(&rows, "eq_mass");
    assert!((vol[0] - 0.5).abs() < 1e-12);
    assert!((mass[0] / vol[0] - 1.0).abs() < 0.01);
}

#[test]
fn failing_gates_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fs.toml", &format!("{FS}\n[gates]\nl1_max = 1e-9\n"));
    let out = dir.path().join("out");
    let o = plurikit(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_GATE));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL l1_error")));
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("gate failure"));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "simplex.toml", SIMPLEX);
    let read = |w: &str| {
        let out = dir.path().join(format!("w{w}"));
        let o = plurikit(&["bergman", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", w]);
        assert_eq!(o.status.code(), Some(EXIT_PASS));
        std::fs::read(out.join("bergman.csv")).unwrap()
    };
    assert_eq!(read("1"), read("4"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn echo_is_a_fixed_point(
        ks in proptest::collection::btree_set(1u32..200, 1..5),
        h in 0.005f64..0.2,
        amp in -0.5f64..1.0,
        c in -3.0f64..3.0,
    ) {
        let list = ks.iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
        let text = format!(
            "k = [{list}]\n[weight]\nkind = \"perturbed_toric\"\npolytope = [[-1], [2]]\n\
             bumps = [{{ center = [{c}], radius = 1.0, amplitude = {amp}, smoothness = 4.0 }}]\n\
             [grid]\nh = {h}\n"
        );
        let cfg = Config::parse(&text).unwrap();
        let echo = cfg.echo();
        let again = Config::parse(&strip_derived(&echo)).unwrap();
        prop_assert_eq!(again.echo(), echo);
    }
}

/// Drops echo-only keys that are not accepted as input.
fn strip_derived(echo: &str) -> String {
    echo.lines()
        .filter(|l| !["v_formula", "eps_d_rule", "warnings"].iter().any(|k| l.starts_with(k)))
        .collect::<Vec<_>>()
        .join("\n")
}
