use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use limstrain::discretization::read_field_file;

const INTERVAL: &str = r#"
[law]
kind = "prototype"
a = 2
gradient = "full"

[geometry]
kind = "interval"
resolution = 32
dirichlet = ["left"]

[data]
u0 = [0]
f = [1]
g = [0]

[solver]
schedule = [4, 8, 16, 32]
rtol = 1e-12
"#;

const SQUARE: &str = r#"
[law]
kind = "prototype"
a = 2
seed = 3

[geometry]
kind = "rectangle"
resolution = 6
dirichlet = ["left"]

[data]
f = [0.1, "0.05 * sin(pi * y)"]

[solver]
schedule = [2, 4, 8, 16]
rtol = 1e-12
primal = true

[diagnostics]
probes = 8
"#;

fn run(dir: &Path, config: &str, command: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_limstrain"))
        .arg("--config")
        .arg(&cfg)
        .args(["--command", command])
        .args(extra)
        .env_remove("LIMSTRAIN_OUT")
        .env_remove("LIMSTRAIN_THREADS")
        .output()
        .unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn tables(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "tsv" || x == "txt") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn check_law_writes_structure_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path(), "o");
    let r = run(tmp.path(), SQUARE, "check-law", &["--out", &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let t = fs::read_to_string(tmp.path().join("o/structure.tsv")).unwrap();
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("law\tparameter\tc0\tc1\tc2\tcoercivity_ok"));
    assert!(lines[1].starts_with("prototype\t2e0\t"));
    let manifest = fs::read_to_string(tmp.path().join("o/manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"check-law\""));
    assert!(manifest.contains("seed = 3"));
}

#[test]
fn solve_writes_fields_and_duality() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path(), "o");
    let r = run(tmp.path(), SQUARE, "solve", &["--out", &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let o = tmp.path().join("o");
    let sched = fs::read_to_string(o.join("schedule.tsv")).unwrap();
    assert_eq!(sched.lines().count(), 5);
    let duality = fs::read_to_string(o.join("duality.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = duality.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0][3], "gap");
    assert_eq!(rows[2][0], "primal");
    let gap: f64 = rows[2][3].parse().unwrap();
    assert!(gap.abs() < 1e-10, "{gap}");
    let fields = read_field_file(&fs::read_to_string(o.join("fields.txt")).unwrap()).unwrap();
    assert_eq!(fields.mesh.n_cells(), 72);
    let names: Vec<&str> = fields.nodal.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, ["u", "u_primal"]);
    assert_eq!(fields.cellwise.len(), 3);
}

#[test]
fn oracle_compare_passes_and_fails_by_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path(), "o");
    let r = run(tmp.path(), INTERVAL, "oracle-compare", &["--out", &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let t = fs::read_to_string(tmp.path().join("o/oracle.tsv")).unwrap();
    assert_eq!(t.lines().count(), 5);
    let last: Vec<f64> = t
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .map(|v| v.parse().unwrap())
        .collect();
    // Piecewise constant stress of an affine exact stress: error h/4.
    assert!((last[1] - 1.0 / 128.0).abs() < 1e-9, "{}", last[1]);
    assert!((last[4] - 0.5).abs() < 1e-15);

    let strict = format!("{INTERVAL}\n[oracle]\nu_max_tolerance = 1e-9\n");
    let out2 = out_arg(tmp.path(), "o2");
    let r = run(tmp.path(), &strict, "oracle-compare", &["--out", &out2]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("oracle mismatch"));
    assert!(tmp.path().join("o2/oracle.tsv").exists());
    assert!(tmp.path().join("o2/manifest.toml").exists());
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), &SQUARE.replace("a = 2", "a = 0"), "solve", &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("law.a"));
    let r = run(tmp.path(), &SQUARE.replace("seed = 3", "sed = 3"), "solve", &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("sed"));
    let r = run(tmp.path(), SQUARE, "launch", &[]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(tmp.path(), INTERVAL, "oracle-compare", &["--out", "/dev/null/x"]);
    assert_eq!(r.status.code(), Some(1));
    let unsafe_datum = INTERVAL
        .replace("u0 = [0]", "u0 = [\"2 * x\"]")
        .replace("[\"left\"]", "[\"all\"]");
    let r = run(tmp.path(), &unsafe_datum, "solve", &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("safety strain"));
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SQUARE.replace("rtol = 1e-12", "rtol = 1e-14\nmax_iterations = 1");
    let out = out_arg(tmp.path(), "o");
    let r = run(tmp.path(), &cfg, "solve", &["--out", &out]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (out_arg(tmp.path(), "a"), out_arg(tmp.path(), "b"));
    let r1 = run(tmp.path(), SQUARE, "diagnose", &["--out", &a, "--threads", "1"]);
    let r2 = run(tmp.path(), SQUARE, "diagnose", &["--out", &b, "--threads", "3"]);
    assert!(r1.status.success() && r2.status.success());
    let (ta, tb) = (tables(&tmp.path().join("a")), tables(&tmp.path().join("b")));
    assert_eq!(ta.len(), 10);
    assert_eq!(ta, tb);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out_arg(tmp.path(), "a");
    assert!(run(tmp.path(), SQUARE, "diagnose", &["--out", &a, "--seed", "11"])
        .status
        .success());
    let resolved = fs::read_to_string(tmp.path().join("a/resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 11"));
    let b = out_arg(tmp.path(), "b");
    assert!(run(tmp.path(), &resolved, "diagnose", &["--out", &b]).status.success());
    assert_eq!(tables(&tmp.path().join("a")), tables(&tmp.path().join("b")));
}

#[test]
fn environment_sets_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, INTERVAL).unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_limstrain"))
        .arg("--config")
        .arg(&cfg)
        .args(["--command", "solve"])
        .env("LIMSTRAIN_OUT", tmp.path().join("env"))
        .env("LIMSTRAIN_THREADS", "2")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert!(tmp.path().join("env/schedule.tsv").exists());
}

#[test]
fn sweep_writes_one_bundle_per_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[law]
kind = "prototype"
a = 1

[geometry]
kind = "lshape"
resolution = 3
dirichlet = ["all"]

[data]
u0 = ["0.1 * x", "0"]
f = [0.3, 0.3]

[solver]
schedule = [2, 4, 8]

[sweep]
a = [0.5, 1, 2]
"#;
    let out = out_arg(tmp.path(), "o");
    let r = run(tmp.path(), cfg, "sweep", &["--out", &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let o = tmp.path().join("o");
    for a in ["a_5e-1", "a_1e0", "a_2e0"] {
        assert!(o.join(a).join("concentration_summary.tsv").exists(), "{a}");
        let s = fs::read_to_string(o.join(a).join("summary.tsv")).unwrap();
        assert!(s.contains("boundary_defect_absent\ttrue"));
    }
    let summary = fs::read_to_string(o.join("sweep_summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.split('\t').nth(1) == Some("ok")));
}
