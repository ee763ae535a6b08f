use std::process::{Command, Output};

fn maryland(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maryland")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn default_verify_passes_with_a_json_report() {
    let o = maryland(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["anchor"].is_string() && c["passed"] == true));
}

#[test]
fn verify_on_the_pole_set_is_invalid_input() {
    let o = maryland(&["verify", "--theta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("potential pole"));
}

#[test]
fn impossible_tolerance_is_a_check_failure() {
    let o = maryland(&["verify", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identity_for_zero_steps() {
    let o = maryland(&["cocycle", "--n", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn values_carry_seventeen_significant_digits() {
    let text = stdout(&maryland(&["cocycle", "--n", "7"]));
    for field in text.lines().nth(1).unwrap().split(',').skip(1) {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn renorm_levels_shrink_geometrically() {
    let o = maryland(&["renorm", "--n", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let ns: Vec<i64> = text.lines().skip(1).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert!(ns.len() >= 3);
    assert_eq!(ns[0], 100);
    for w in ns.windows(2) {
        assert!((w[1].abs() as f64) < 0.7 * w[0].abs() as f64, "{ns:?}");
    }
}

#[test]
fn sigma_far_below_the_axis_is_one() {
    let o = maryland(&["sigma", "--re-min", "0", "--re-max", "0", "--im-min", "-20", "--im-max", "-20", "--nx", "1", "--ny", "1"]);
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[2] - 1.0).abs() < 1e-8 && row[3].abs() < 1e-8, "{row:?}");
}

#[test]
fn minsol_grid_skips_poles() {
    // the grid point 0 is a pole of the minimal solution
    let o = maryland(&["minsol", "--re-min", "-0.5", "--re-max", "0.5", "--im-min", "0", "--im-max", "0", "--nx", "3", "--ny", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# cocycle run\nomega = 0.4142135623730951\ntheta = 0.13\nn = 12\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&maryland(&["cocycle", "--config", cfg]));
    let from_flags = stdout(&maryland(&["cocycle", "--omega", "0.4142135623730951", "--theta", "0.13", "--n", "12"]));
    assert_eq!(from_file, from_flags);
    let overridden = stdout(&maryland(&["cocycle", "--config", cfg, "--n", "-3"]));
    assert!(overridden.lines().nth(1).unwrap().starts_with("-3,"));
    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let o = maryland(&["cocycle", "--config", dir.path().join("bad.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = maryland(&["scan", "--steps", "5", "--n", "20", "--format", "json", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn scan_marks_pole_rows_invalid() {
    let o = maryland(&["scan", "--from", "0", "--to", "0.5", "--steps", "2", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().ends_with(",invalid"));
    assert!(text.lines().nth(2).unwrap().ends_with(",pass"));
}

#[test]
fn energy_form_and_bad_input() {
    let o = maryland(&["cocycle", "--energy", "0.5", "--lambda", "1.2", "--n", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(maryland(&["cocycle", "--energy", "0.5"]).status.code(), Some(2));
    assert_eq!(maryland(&["cocycle", "--omega", "1.5"]).status.code(), Some(2));
    assert_eq!(maryland(&["cocycle", "--l", "-1"]).status.code(), Some(2));
    assert_eq!(maryland(&["cocycle", "--format", "xml"]).status.code(), Some(2));
}
