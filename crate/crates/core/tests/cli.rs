use std::path::PathBuf;
use std::process::Command;

fn polarmg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarmg"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polarmg-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn solve_writes_outputs_and_exits_zero() {
    let out = scratch("solve");
    let o = polarmg()
        .args([
            "solve",
            "--nr_exp",
            "4",
            "--ntheta_exp",
            "4",
            "--paraview",
            "1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("converged=true"));
    for f in ["summary.json", "history.csv", "solution.vtk"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["report"]["converged"], true);
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn config_file_and_flag_override() {
    let out = scratch("config");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("run.cfg");
    std::fs::write(
        &cfg,
        "geometry = shafranov\nnr_exp = 4\nntheta_exp = 4\nmaxIterations = 40\n",
    )
    .unwrap();
    let o = polarmg()
        .args(["solve", "--maxIterations", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn bad_value_exits_one_naming_the_key() {
    let o = polarmg()
        .args(["solve", "--geometry", "torus"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry"));
}

#[test]
fn order_study_prints_a_table() {
    let out = scratch("order");
    let o = polarmg()
        .args([
            "order-study",
            "--refinements",
            "2",
            "--nr_exp",
            "4",
            "--ntheta_exp",
            "4",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("order.json").is_file());
    assert!(String::from_utf8_lossy(&o.stdout).lines().count() >= 3);
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn bench_reports_kernels() {
    let o = polarmg()
        .args([
            "bench",
            "--cycles",
            "1",
            "--nr_exp",
            "4",
            "--ntheta_exp",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cyclic"));
}
