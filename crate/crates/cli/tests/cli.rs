use std::fs;
use std::process::{Command, Output};

fn matgibbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matgibbs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn eigen_prints_beta() {
    let o = matgibbs(&["eigen", "--preset", "harmonic-gasket"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("beta = 0.600000000000"));
    assert!(text.contains("q_11 = 0.707106781187"));
    assert!(text.contains("iterations = "));
}

#[test]
fn measure_depth_one() {
    let o = matgibbs(&["measure", "--preset", "harmonic-gasket", "--depth", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "word,depth,kappa,tau_11,tau_12,tau_22");
    assert_eq!(lines.len(), 4);
    for (k, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], (k + 1).to_string());
        assert_eq!(fields[1], "1");
        assert!(fields[2].starts_with("0.333333333333"), "{line}");
    }
}

#[test]
fn measure_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = matgibbs(&[
            "measure",
            "--preset",
            "harmonic-gasket",
            "--depth",
            "6",
            "--seed",
            "11",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 729);
    let kappa_sum: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((kappa_sum - 1.0).abs() < 1e-12);
    assert!(text.lines().nth(1).unwrap().starts_with("1.1.1.1.1.1,6,"));
}

#[test]
fn verify_dyadic_passes() {
    let o = matgibbs(&["verify", "--preset", "dyadic-1d", "--depth", "8"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for line in text.lines().filter(|l| l.starts_with("CHECK ")) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 5, "{line}");
        assert_eq!(fields[2], "PASS", "{line}");
    }
    assert!(text.contains("CHECK dyadic.kappa_uniform PASS"));
}

#[test]
fn verify_gasket_covers_acceptance() {
    let o = matgibbs(&["verify", "--preset", "harmonic-gasket", "--depth", "7"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for name in [
        "eigen.restarts",
        "gasket.beta",
        "gasket.kappa_values",
        "measure.kappa_sum",
        "gibbs.recursion",
        "gibbs.additivity",
        "gibbs.fault_injection_detected",
        "gibbs.shift_invariance",
        "ruelle.convergence_ratio",
        "gibbs.mixing_envelope_ratio",
        "energy.self_similarity",
        "energy.linear_closed_form",
        "gibbs.total_variation",
        "gasket.direction_ratio",
        "gasket.direction_limit",
        "cone.norm_equivalence",
        "cone.theta_metric",
        "cone.alpha_bisection",
        "cone.sandwich_converse",
    ] {
        assert!(
            text.contains(&format!("CHECK {name} PASS")),
            "missing {name}"
        );
    }
}

const MIXED: &str = r#"{"dim": 2, "maps": [
    {"linear": [[0.5, 0.2], [-0.1, 0.4]], "translation": [0, 0]},
    {"linear": [[0.3, -0.25], [0.2, 0.6]], "translation": [1, 0]},
    {"linear": [["2/5", "1/10"], ["-1/10", "sqrt(2)/4"]], "translation": [0, 1]}
]}"#;

fn write_config(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("system.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_config_system_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = matgibbs(&[
        "verify",
        "--config",
        &write_config(&dir, MIXED),
        "--depth",
        "5",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn verify_reports_failures_with_nonzero_exit() {
    // a tolerance this loose leaves the eigenpair visibly unconverged
    let dir = tempfile::tempdir().unwrap();
    let o = matgibbs(&[
        "verify",
        "--config",
        &write_config(&dir, MIXED),
        "--tol",
        "1e-2",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("FAILED "), "{last}");
    assert!(text.contains(" FAIL "));
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"dim":2,"maps":[{"linear":[[1,0],[0,1]],"translation":[0,0]}]}"#,
    )
    .unwrap();
    let o = matgibbs(&["eigen", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("map 1: not a contraction"),
        "{}",
        stderr(&o)
    );

    fs::write(
        &path,
        r#"{"dim":1,"maps":[{"linear":[[0.5]],"translation":[0]},{"linear":[[0.5]]}]}"#,
    )
    .unwrap();
    let o = matgibbs(&["eigen", "--config", path.to_str().unwrap()]);
    assert!(
        stderr(&o).contains("maps[2].translation: missing"),
        "{}",
        stderr(&o)
    );

    let o = matgibbs(&["eigen", "--preset", "koch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));

    let o = matgibbs(&["measure", "--preset", "harmonic-gasket", "--depth", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exceeds the cap"));
}

#[test]
fn energy_and_direction() {
    let o = matgibbs(&["energy", "--preset", "harmonic-gasket", "--depth", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("energy[3] = 7.071067811865e-1"), "{text}");
    assert!(text.contains("closed_form = 7.071067811865e-1"));

    let o = matgibbs(&[
        "direction",
        "--preset",
        "harmonic-gasket",
        "--depth",
        "3",
        "--word",
        "1",
    ]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "depth,residual,v_1,v_2");
    assert!(rows[1].starts_with("1,0.111111111111111,1,"));
}
