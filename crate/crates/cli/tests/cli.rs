use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sensorfield"));
    c.env_remove("SENSORFIELD_THREADS");
    c
}

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_on(cmd: &str, scenario: &str, extra: &[&str]) -> Output {
    let path = fixture(scenario);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn check_placement_exit_codes() {
    let ok = run_on("check-placement", "grid3.json", &[]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("full rank, lower set = box(2,2)"));

    let deficient = run_on("check-placement", "gravitic.json", &[]);
    assert_eq!(code(&deficient), 1);
    assert!(stdout(&deficient).contains("rank 4/5, kernel dim 1, error-free dim 4"));

    let bad = run_on("check-placement", "duplicate.json", &[]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sensors[9]"));

    assert_eq!(
        code(&run(&["check-placement", "/nonexistent/scenario.json"])),
        2
    );
    assert_eq!(code(&run(&["no-such-command"])), 2);
}

#[test]
fn unrecognised_placement_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cluster.json");
    std::fs::write(
        &path,
        r#"{"version":1,"dimension":2,
            "sensors":[[0,0],[0,1],[1,0],[1,1],[2,2]],
            "model":{"type":"monomials","lower_set":"auto"}}"#,
    )
    .unwrap();
    let o = run(&["check-placement", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON output")
}

fn close(v: &serde_json::Value, want: &[f64], tol: f64) -> bool {
    let got: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol)
}

#[test]
fn estimate_reproduces_stencils() {
    let o = run_on("estimate", "stencil1d.json", &["--json"]);
    assert_eq!(code(&o), 0);
    let records = json(&o);
    assert!(close(&records[0]["c"], &[-0.5, 0.0, 0.5], 1e-12));
    assert!(close(&records[1]["c"], &[1.0, -2.0, 1.0], 1e-12));
    assert!(close(&records[2]["c"], &[0.0, 0.0, 1.0], 1e-12));

    let nearest = run_on(
        "estimate",
        "stencil1d.json",
        &["--json", "--method", "nearest"],
    );
    let n = json(&nearest);
    assert!(close(&n[1]["c"], &[1.0, -2.0, 1.0], 1e-12));
}

#[test]
fn estimate_reports_bias_and_variances() {
    let o = run_on(
        "estimate",
        "gravitic.json",
        &["--json", "--strategy", "nonlocal,local"],
    );
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r[0]["error_free"], true);
    assert!((r[0]["predicted_value"].as_f64().unwrap() - 2.0).abs() <= 1e-8);
    assert_eq!(r[1]["error_free"], false);
    assert!(close(
        &r[1]["bias_direction"],
        &[0.2, -0.4, 0.0, 0.0, 0.0],
        1e-10
    ));
    let variances = r[0]["variances"].as_object().unwrap();
    assert_eq!(variances.len(), 2);

    let magnetic = run_on("estimate", "magnetic.json", &["--json", "--target", "0"]);
    let m = json(&magnetic);
    assert_eq!(m.as_array().unwrap().len(), 1);
    assert!((m[0]["predicted_value"].as_f64().unwrap() - 2.0).abs() <= 1e-10);
}

#[test]
fn estimate_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.json");
    let o = run_on("estimate", "grid3.json", &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn gain_map_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gain.csv");
    let o = run_on(
        "gain-map",
        "grid3.json",
        &["--grid", "21", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 21 * 21);
    for r in &rows {
        assert!(r[2] >= 1.0 - 1e-12 && r[2] <= 9.0);
        if r[0].fract() == 0.0 && r[1].fract() == 0.0 {
            assert!((r[2] - 1.0).abs() <= 1e-9);
        }
    }

    let single = dir.path().join("single.csv");
    let o = run_on(
        "gain-map",
        "single.json",
        &[
            "--grid",
            "5",
            "--bounds",
            "0,1;0,1",
            "--out",
            single.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(read_csv(&single)
        .iter()
        .all(|r| (r[2] - 1.0).abs() <= 1e-12));
}

#[test]
fn error_map_matches_exactness_claims() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("err.csv");
    let args = [
        "--grid",
        "41",
        "--bounds",
        "0,2;0,2",
        "--field",
        "(x-1)^3+(y-1)^3",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&run_on("error-map", "grid5.json", &args)), 0);
    assert!(read_csv(&out).iter().all(|r| r[2] <= 1e-8));

    assert_eq!(code(&run_on("error-map", "grid3.json", &args)), 0);
    let worst = read_csv(&out).iter().map(|r| r[2]).fold(0.0, f64::max);
    assert!(worst > 1e-3);

    let bad = ["--field", "(x-1", "--out", out.to_str().unwrap()];
    assert_eq!(code(&run_on("error-map", "grid3.json", &bad)), 2);
}

#[test]
fn allocate_examples() {
    let o = run(&[
        "allocate",
        "--coeffs",
        "0.5,0.5",
        "--resources",
        "10",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!((v["allocation"]["variance"].as_f64().unwrap() - 0.01).abs() <= 1e-15);
    assert!((v["precision_gain"].as_f64().unwrap() - 2.0).abs() <= 1e-12);

    let o = run(&[
        "allocate",
        "--coeffs",
        "0.5,0.5",
        "--resources",
        "10",
        "--strategy",
        "local",
        "--json",
    ]);
    assert!((json(&o)["allocation"]["variance"].as_f64().unwrap() - 0.02).abs() <= 1e-15);

    let o = run(&["allocate", "--coeffs", "1,0", "--resources", "7", "--json"]);
    assert!(close(&json(&o)["allocation"]["n"], &[7.0, 0.0], 0.0));

    let o = run(&[
        "allocate",
        "--coeffs",
        "0.3,-0.2,0.5",
        "--resources",
        "11",
        "--strategy",
        "local",
        "--round",
        "--json",
    ]);
    let sum: u64 = json(&o)["rounded"]["n"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .sum();
    assert_eq!(sum, 11);

    assert_eq!(
        code(&run(&["allocate", "--coeffs", "0,0", "--resources", "10"])),
        2
    );
    assert_eq!(
        code(&run(&[
            "allocate",
            "--coeffs",
            "1",
            "--resources",
            "10",
            "--strategy",
            "general"
        ])),
        2
    );
}

#[test]
fn validate_mc_exit_codes() {
    let ok = run(&[
        "validate-mc",
        "--coeffs",
        "1,-2",
        "--alloc",
        "3,5",
        "--trials",
        "100000",
        "--json",
    ]);
    assert_eq!(code(&ok), 0);
    let v = json(&ok);
    assert!((v["analytic"].as_f64().unwrap() - (1.0 / 9.0 + 4.0 / 25.0)).abs() <= 1e-15);

    let classical = run(&[
        "validate-mc",
        "--coeffs",
        "1,-2",
        "--alloc",
        "3,5",
        "--scaling",
        "classical",
        "--json",
    ]);
    assert_eq!(code(&classical), 0);
    assert!(
        (json(&classical)["analytic"].as_f64().unwrap() - (1.0 / 3.0 + 4.0 / 5.0)).abs() <= 1e-15
    );

    assert_eq!(
        code(&run(&[
            "validate-mc",
            "--coeffs",
            "1",
            "--alloc",
            "1",
            "--trials",
            "0"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["validate-mc", "--coeffs", "1,1", "--alloc", "1,0"])),
        2
    );
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut maps = Vec::new();
    let mut mcs = Vec::new();
    for threads in ["1", "3", "1"] {
        let out = dir.path().join(format!("gain{}.csv", maps.len()));
        let o = bin()
            .args(["--threads", threads, "gain-map"])
            .arg(fixture("grid5.json"))
            .args(["--grid", "31", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        maps.push(std::fs::read(&out).unwrap());
        let o = bin()
            .env("SENSORFIELD_THREADS", threads)
            .args([
                "validate-mc",
                "--coeffs",
                "0.2,0.3,-0.5",
                "--alloc",
                "2,3,5",
                "--seed",
                "42",
                "--json",
            ])
            .output()
            .unwrap();
        mcs.push(o.stdout);
    }
    assert!(maps.windows(2).all(|w| w[0] == w[1]));
    assert!(mcs.windows(2).all(|w| w[0] == w[1]));
}
