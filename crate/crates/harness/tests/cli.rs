use std::process::Command;

use pgsom_core::TabularMdp;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn pgsom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pgsom"))
}

#[test]
fn audit_flag_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let status = pgsom().args(["--audit", "--out"]).arg(dir.path()).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(dir.path().join("audit.json").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = TabularMdp::<f64>::random(2, 2, 4, 0.9, &mut StdRng::seed_from_u64(1));
    let mdp_path = dir.path().join("mdp.json");
    std::fs::write(&mdp_path, mdp.to_json_string()).unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"method": "rk", "episodes": 50, "seeds": [4, 5, 6]}"#).unwrap();
    let out = dir.path().join("out");

    let res = pgsom()
        .arg("--config")
        .arg(&cfg_path)
        .args(["--episodes", "4", "--stabilizer", "clip"])
        .arg(format!("--env=mdp:{}", mdp_path.display()))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    // 3 seeds from the file × 4 episodes from the flag
    assert_eq!(curves.lines().count(), 1 + 12);
    assert!(curves.lines().skip(1).all(|l| l.starts_with("rk,clip,")));
    let trajectories = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert_eq!(trajectories.lines().count(), 1 + 24);
}

#[test]
fn bad_arguments_fail() {
    let res = pgsom().args(["--method", "adam"]).output().unwrap();
    assert!(!res.status.success());
    let res = pgsom().args(["--env", "mdp:/does/not/exist.json", "--episodes", "1"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}
