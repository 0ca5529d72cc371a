use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn mann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_config(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--quiet", "--config", s(cfg), "--out", s(out)];
    args.extend_from_slice(extra);
    mann(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oracle_run_writes_expected_files() {
    let dir = TempDir::new().unwrap();
    let out = run_config(&configs().join("oracle_1d.toml"), dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory.csv", "trajectory.json", "gk_records.csv", "audit.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,x_1,residual,t_n"));
    lines.next();
    let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row2[0], "2");
    assert_eq!(row2[1].parse::<f64>().unwrap(), 0.25);

    let audit = json(&dir.path().join("audit.json"));
    for name in ["verify", "edge_propagation", "goebel_kirk", "rate", "convergence"] {
        assert_eq!(audit[name]["status"], "pass", "{name}");
    }
    let gk = fs::read_to_string(dir.path().join("gk_records.csv")).unwrap();
    assert!(gk.starts_with("i,n,lhs,rhs,slack\n"));
}

#[test]
fn saved_trajectories_audit_cleanly() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("matrix_orthant.toml");
    assert_eq!(code(&run_config(&cfg, dir.path(), &[])), 0);
    for f in ["trajectory.csv", "trajectory.json"] {
        let out = mann(&["audit", "--quiet", s(&dir.path().join(f)), "--config", s(&cfg)]);
        assert_eq!(code(&out), 0, "{f}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = configs().join("matrix_orthant.toml");
    assert_eq!(code(&run_config(&cfg, a.path(), &["--seed", "42"])), 0);
    assert_eq!(code(&run_config(&cfg, b.path(), &["--seed", "42"])), 0);
    for f in ["trajectory.csv", "audit.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tampered_and_malformed_trajectories() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("oracle_1d.toml");
    assert_eq!(code(&run_config(&cfg, dir.path(), &[])), 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();

    let tampered: String = csv
        .lines()
        .map(|line| {
            let mut f: Vec<String> = line.split(',').map(str::to_string).collect();
            if f[0] == "5" {
                f[1] = "0.1".into();
            }
            f.join(",") + "\n"
        })
        .collect();
    let path = dir.path().join("tampered.csv");
    fs::write(&path, tampered).unwrap();
    assert_eq!(code(&mann(&["audit", "--quiet", s(&path), "--config", s(&cfg)])), 2);

    let stripped: String = csv
        .lines()
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            format!("{},{},{}\n", f[0], f[1], f[3])
        })
        .collect();
    let path = dir.path().join("stripped.csv");
    fs::write(&path, stripped).unwrap();
    assert_eq!(code(&mann(&["audit", "--quiet", s(&path), "--config", s(&cfg)])), 1);
}

#[test]
fn sweeps_write_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("oracle_1d.toml");
    let values = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    let out = mann(&[
        "sweep", "--quiet", "--config", s(&cfg), "--axis", "schedule.t", "--values", values,
        "--out", s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(dir.path().join("run_008/audit.json").exists());

    let dims = TempDir::new().unwrap();
    let out = mann(&[
        "sweep", "--quiet", "--config", s(&configs().join("halfspace_affine.toml")),
        "--axis", "space.dimension", "--values", "2,4,8", "--out", s(dims.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dims.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn bad_sweeps_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("oracle_1d.toml");
    let empty = mann(&[
        "sweep", "--config", s(&cfg), "--axis", "schedule.t", "--values", "", "--out", s(dir.path()),
    ]);
    assert_eq!(code(&empty), 1);
    let unknown = mann(&[
        "sweep", "--config", s(&cfg), "--axis", "schedule.nope", "--values", "0.5", "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&unknown), 1);
}

#[test]
fn violated_hypotheses_set_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let unit = run_config(&configs().join("unit_step.toml"), &dir.path().join("unit"), &[]);
    assert_eq!(code(&unit), 1);
    assert!(String::from_utf8_lossy(&unit.stderr).contains("enforced bounds"));

    let swap_dir = dir.path().join("swap");
    let swap = run_config(&configs().join("swap_nonmonotone.toml"), &swap_dir, &[]);
    assert_eq!(code(&swap), 2);
    let audit = json(&swap_dir.join("audit.json"));
    assert_eq!(audit["monotone"]["status"], "fail");
    assert!(audit["monotone"]["witness"].is_array());

    let report = mann(&["report", s(&swap_dir)]);
    assert_eq!(code(&report), 2);
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("monotone") && text.contains("overall: fail"));
}

#[test]
fn unknown_fields_and_versions_are_rejected() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("oracle_1d.toml")).unwrap();
    let bad_version = dir.path().join("v2.toml");
    fs::write(&bad_version, text.replace("schema_version = 1", "schema_version = 2")).unwrap();
    assert_eq!(code(&run_config(&bad_version, &dir.path().join("a"), &[])), 1);
    let typo = dir.path().join("typo.toml");
    fs::write(&typo, text.replace("max_iter", "max_iters")).unwrap();
    assert_eq!(code(&run_config(&typo, &dir.path().join("b"), &[])), 1);
    assert_eq!(code(&mann(&["frobnicate"])), 1);
}
