use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crystal-spectra"))
        .args(args)
        .env("CRYSTAL_SPECTRA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_succeeds() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["bands", "--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(run(&["validate", "--crystal", "builtin:nope"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--crystal", "/no/such/file.json"]).status.code(), Some(1));
    assert_eq!(
        run(&["mourre", "--crystal", "builtin:zd:1", "--interval", "3,1"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["bands", "--crystal", "builtin:zd:1"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn bands_table_has_one_row_per_node() {
    let o = run(&["bands", "--crystal", "builtin:hexagonal", "--grid", "64"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 64 * 64);
    assert_eq!(lines[0], "xi_1,xi_2,lambda_1,lambda_2");
    // at xi = 0 the hexagonal bands are 0 and 6
    let first: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(first[..2], [0.0, 0.0]);
    assert!(first[2].abs() < 1e-12 && (first[3] - 6.0).abs() < 1e-12);
}

#[test]
fn oracle_reports_pass() {
    let o = run(&["oracle", "--crystal", "builtin:kagome", "--N", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("grid=5 eigenvalues=75 deviation="), "{text}");
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn out_writes_the_same_bytes_as_stdout() {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-out");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("validate.json");
    let path_str = path.to_str().unwrap();
    let args = ["validate", "--crystal", "builtin:diamond-chain"];
    let direct = run(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path_str]);
    assert!(run(&with_out).status.success());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
    let report: serde_json::Value = serde_json::from_slice(&direct.stdout).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!(report["vertices"], 3);
}

#[test]
fn evolve_reports_norm_per_time() {
    let o = run(&[
        "evolve", "--crystal", "builtin:zd:1", "--box", "truncated:40", "--times", "0,1,2", "--center", "0", "--sigma", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("time,norm"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!((row[1] - 1.0).abs() < 1e-10);
    }
}
