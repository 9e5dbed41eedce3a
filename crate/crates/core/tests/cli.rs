use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use distortion_lab::align::{save_points, LabeledPointSet};
use distortion_lab::linalg::{EuclideanMotion, Vector};
use distortion_lab::run::random_rotation;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distortion-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identity_tail_passes_with_zero_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "tail",
            "--set",
            "map=identity",
            "--set",
            "n_samples=5000",
            "--set",
            "output=t.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("t.json"));
    for row in v["table"]["rows"].as_array().unwrap() {
        assert_eq!(row[2].as_f64(), Some(0.0));
    }
    assert_eq!(v["config"]["map"], "identity");
    assert_eq!(v["passed"], true);
}

#[test]
fn malformed_config_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "dim = 2\n\nlambdas = 3, 1\n").unwrap();
    let out = cli(dir.path(), &["tail", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("lambdas"), "{err}");

    std::fs::write(dir.path().join("unknown.cfg"), "dimension = 2\n").unwrap();
    let out = cli(dir.path(), &["tail", "--config", "unknown.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let out = cli(dir.path(), &["tail", "--set", "eps=abc"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps"));
}

#[test]
fn congruent_point_files_align_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let y = LabeledPointSet::new(
        (0..8)
            .map(|i| {
                Vector(vec![
                    (i as f64).sin(),
                    (0.7 * i as f64).cos(),
                    0.1 * i as f64,
                ])
            })
            .collect(),
    )
    .unwrap();
    let motion = EuclideanMotion::new(random_rotation(3, 8), Vector(vec![1.0, -2.0, 0.5])).unwrap();
    save_points(&y, &dir.path().join("y.csv")).unwrap();
    save_points(&y.transformed(&motion), &dir.path().join("z.csv")).unwrap();
    let out = cli(
        dir.path(),
        &[
            "align",
            "--set",
            "dim=3",
            "--set",
            "align_source=y.csv",
            "--set",
            "align_target=z.csv",
            "--set",
            "require_proper=true",
            "--set",
            "max_rel_err_limit=1e-10",
            "--set",
            "output=a.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("a.json"));
    assert!(v["summary"]["max_rel_err"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["summary"]["motion"]["proper"], true);
}

#[test]
fn sweep_csv_has_fitted_slope_column_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "sweep",
            "--set",
            "eps_grid=0.01,0.03,0.1",
            "--set",
            "n_samples=20000",
            "--set",
            "format=csv",
            "--set",
            "output=s.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|c| *c == "fitted_slope").unwrap();
    for line in lines {
        let slope: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert!((slope - 1.0).abs() <= 0.15);
    }
    let manifest = json(&dir.path().join("s.csv.manifest.json"));
    assert_eq!(manifest["subcommand"], "sweep");
    assert_eq!(manifest["config"]["eps_grid"], "0.01,0.03,0.1");
}

#[test]
fn failing_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "pde",
            "--set",
            "grid_points=33",
            "--set",
            "pde_constant_limit=1e-6",
            "--set",
            "output=p.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constant_within_limit"));
    assert_eq!(json(&dir.path().join("p.json"))["passed"], false);
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "bmo2",
            "--set",
            "n_samples=1000",
            "--set",
            "output=missing/dir/r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
}

#[test]
fn degenerate_sharpness_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "sharpness",
            "--set",
            "eps=0",
            "--set",
            "format=csv",
            "--set",
            "output=e.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text, "lambda,threshold,fraction,bound,sigma,passed,rate\n");
}

#[test]
fn report_goes_to_stdout_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &[
            "distortion",
            "--set",
            "map=rotation",
            "--set",
            "n_samples=1000",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["summary"]["eps_hat"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn pde_reads_a_saved_field() {
    use distortion_lab::pde::{save, GridField};
    let dir = tempfile::tempdir().unwrap();
    let field = GridField::sample(2, 4.0, 17, |x| vec![-x[1], x[0]]).unwrap();
    save(&field, &dir.path().join("f.bin")).unwrap();
    let out = cli(
        dir.path(),
        &["pde", "--set", "field_file=f.bin", "--set", "output=p.json"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&dir.path().join("p.json"));
    assert_eq!(v["summary"]["exact_kernel"], true);
    let s = &v["summary"]["s"];
    assert!((s[1][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
