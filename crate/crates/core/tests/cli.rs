use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_eifcheck");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn bundled_configs_succeed() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("verify", "verify.json", "report.json"),
        ("verify", "verify_tsm_example.json", "checks.csv"),
        ("simulate", "simulate_tsm.json", "study.csv"),
        ("describe", "describe_tsm.json", "eif_table.csv"),
        (
            "describe",
            "describe_transport.json",
            "eif_table_0_transport_supplied_unrestricted.csv",
        ),
        ("sample", "sample_tsm.json", "sample.csv"),
    ];
    for (i, (cmd, file, artifact)) in cases.iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        let o = run(cmd, &configs().join(file), &out, &[]);
        assert_eq!(
            code(&o),
            0,
            "{file}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let produced: Vec<String> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(
            produced.iter().any(|f| f == artifact),
            "{file}: {produced:?}"
        );
    }
}

#[test]
fn corrupted_influence_function_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "verify",
        &configs().join("verify_corrupted.json"),
        tmp.path(),
        &[],
    );
    assert_eq!(code(&o), 1);
    let csv = std::fs::read_to_string(tmp.path().join("checks.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.starts_with("tsm,riesz,") && l.contains(",false,")));
}

#[test]
fn malformed_configs_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let bad = [
        ("syntax.json", "{ \"command\": "),
        ("unknown.json", "{ \"command\": \"verify\", \"bogus\": 1 }"),
        (
            "step.json",
            "{ \"command\": \"verify\", \"suite\": { \"h\": 0.5 } }",
        ),
    ];
    for (name, body) in bad {
        let o = run(
            "verify",
            &write(&tmp, name, body),
            &tmp.path().join("out"),
            &[],
        );
        assert_eq!(code(&o), 2, "{name}");
    }
    let missing = run("verify", &tmp.path().join("absent.json"), tmp.path(), &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn zero_replications_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "sim.json",
        r#"{ "command": "simulate",
             "distribution": { "generator": { "seed": 1, "shape": { "family": "point", "w_levels": 2 } } },
             "parameter": { "kind": "tsm" },
             "study": { "n": 100, "replications": 0 } }"#,
    );
    assert_eq!(
        code(&run("simulate", &cfg, &tmp.path().join("out"), &[])),
        2
    );
}

#[test]
fn fixed_seed_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "sim.json",
        r#"{ "command": "simulate",
             "distribution": { "generator": { "seed": 5, "shape": { "family": "point", "w_levels": 2 } } },
             "parameter": { "kind": "vte" },
             "study": { "n": 200, "replications": 50, "seed": 9 } }"#,
    );
    let read = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let o = run("simulate", &cfg, &out, &["--seed", seed]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("study.json")).unwrap()
    };
    let a = read("a", "11");
    assert_eq!(a, read("b", "11"));
    assert_ne!(a, read("c", "12"));

    let sample = |dir: &str| {
        let out = tmp.path().join(dir);
        assert_eq!(
            code(&run(
                "sample",
                &configs().join("sample_tsm.json"),
                &out,
                &[]
            )),
            0
        );
        std::fs::read_to_string(out.join("sample.csv")).unwrap()
    };
    let s = sample("s1");
    assert_eq!(s, sample("s2"));
    assert_eq!(s.lines().count(), 501);
}

#[test]
fn describe_point_mass_has_zero_influence_on_support() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "pm.json",
        r#"{ "command": "describe",
             "distribution": { "inline": {
               "variables": [
                 { "name": "W", "levels": [0], "role": "confounder" },
                 { "name": "A", "levels": [0, 1], "role": "treatment" },
                 { "name": "Y", "levels": [0, 1], "role": "outcome" } ],
               "factors": [
                 { "child": "W", "rows": [{ "probs": [1.0] }] },
                 { "child": "A", "rows": [{ "parents": [0], "probs": [0.0, 1.0] }] },
                 { "child": "Y", "rows": [
                   { "parents": [0, 0], "probs": [1.0, 0.0] },
                   { "parents": [0, 1], "probs": [0.0, 1.0] } ] } ] } },
             "parameter": { "kind": "tsm" } }"#,
    );
    let o = run("describe", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("psi: 1.0"));
    assert!(stdout.contains("var_eif: 0.0"));
    let table = std::fs::read_to_string(tmp.path().join("out/eif_table.csv")).unwrap();
    let support: Vec<&str> = table
        .lines()
        .filter(|l| l.split(',').nth(3) == Some("1.0"))
        .collect();
    assert_eq!(support, ["0.0,1.0,1.0,1.0,0.0,0.0,0.0"]);
}
