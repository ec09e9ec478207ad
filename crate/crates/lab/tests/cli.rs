use std::process::Command;

fn lab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_blpp-lab"));
    c.env_remove("BLPP_SEED");
    c
}

#[test]
fn list_names_every_experiment() {
    let out = lab().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["shape", "burke", "exp-sup", "geodesic-crossing"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn misspelled_experiment_suggests_and_exits_two() {
    let out = lab().args(["run", "burk"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("burke"));
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (k, parallel) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("r{k}"));
        let status = lab()
            .args(["pitman", "--replicas", "50", "--parallel", parallel, "--out"])
            .arg(&out)
            .env("BLPP_SEED", "9")
            .status()
            .unwrap();
        assert!(status.success());
        let echo = std::fs::read_to_string(out.join("config.echo")).unwrap();
        assert!(echo.starts_with("experiment = pitman\n") && echo.contains("seed = 9\n"));
        bytes.push((std::fs::read(out.join("summary.csv")).unwrap(), std::fs::read(out.join("replicas.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}
