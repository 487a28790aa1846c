use std::path::Path;
use std::process::{Command, Output};

use hetnet_lab::hybridrl::weights;

const BIN: &str = env!("CARGO_BIN_EXE_hetnet");

fn hetnet(args: &[&str], dir: &Path, seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).current_dir(dir).env_remove("HETNET_SEED");
    if let Some(s) = seed_env {
        cmd.env("HETNET_SEED", s);
    }
    cmd.output().unwrap()
}

fn write_spec(dir: &Path, text: &str) {
    std::fs::write(dir.join("spec.json"), text).unwrap();
}

const SPECS: &[(&str, &str, &str)] = &[
    (
        "validate-capacity",
        r#"{"scenario": {"num_ues": 3}}"#,
        "400",
    ),
    ("sweep-power", "{}", "1"),
    (
        "coop-outage",
        r#"{"coop": {"snr_grid_db": [0, 10]}}"#,
        "500",
    ),
    ("train-rl", r#"{"rl": {"env": {"episode_length": 5}}}"#, "3"),
    (
        "place-replicas",
        r#"{"placement": {"num_sites": 12}}"#,
        "10",
    ),
];

#[test]
fn every_command_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for &(command, spec, trials) in SPECS {
        write_spec(dir.path(), spec);
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = format!("{command}-{run}.csv");
            let o = hetnet(
                &[
                    command,
                    "--spec",
                    "spec.json",
                    "--seed",
                    "17",
                    "--trials",
                    trials,
                    "--out",
                    &out,
                ],
                dir.path(),
                None,
            );
            assert!(
                o.status.success(),
                "{command}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            outputs.push(std::fs::read(dir.path().join(&out)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{command}");
        let text = String::from_utf8(outputs[0].clone()).unwrap();
        assert!(text.lines().count() >= 2, "{command}: header plus rows");
        let meta: serde_json::Value = serde_json::from_slice(
            &std::fs::read(dir.path().join(format!("{command}-a.csv.meta.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(meta["seed"], 17);
        assert_eq!(meta["command"], command);
    }
}

#[test]
fn sweep_power_columns_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), r#"{"sweep": {"grid_dbm": [0, 5, 10, 30]}}"#);
    let o = hetnet(
        &["sweep-power", "--spec", "spec.json", "--out", "s.csv"],
        dir.path(),
        None,
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p_max_dbm,sum_rate,total_power_w,ee,active_cells"
    );
    let grid: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(grid, vec![0.0, 5.0, 10.0, 30.0]);
}

#[test]
fn seed_precedence_flag_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), r#"{"seed": 5, "placement": {"num_sites": 10}}"#);
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut full = vec![
            "place-replicas",
            "--spec",
            "spec.json",
            "--out",
            "p.csv",
            "--trials",
            "2",
        ];
        full.extend_from_slice(args);
        assert!(hetnet(&full, dir.path(), env).status.success());
        let meta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("p.csv.meta.json")).unwrap())
                .unwrap();
        meta["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[], None), 5);
    assert_eq!(seed_of(&[], Some("8")), 8);
    assert_eq!(seed_of(&["--seed", "9"], Some("8")), 9);
}

#[test]
fn defaulted_fields_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), r#"{"scenario": {"num_ues": 5}}"#);
    assert!(hetnet(
        &["sweep-power", "--spec", "spec.json", "--out", "s.csv"],
        dir.path(),
        None
    )
    .status
    .success());
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.csv.meta.json")).unwrap())
            .unwrap();
    let defaulted: Vec<&str> = meta["defaulted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(defaulted.contains(&"scenario.pilot_length"));
    assert!(defaulted.contains(&"sweep.grid_dbm"));
    assert!(!defaulted.contains(&"scenario.num_ues"));
    assert_eq!(meta["resolved_scenario"]["num_ues"], 5);
}

#[test]
fn invalid_specs_fail_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let run = |spec: &str| {
        write_spec(dir.path(), spec);
        let o = hetnet(
            &["sweep-power", "--spec", "spec.json", "--out", "s.csv"],
            dir.path(),
            None,
        );
        assert!(!o.status.success());
        String::from_utf8(o.stderr).unwrap()
    };
    assert!(run(r#"{"scenario": {"bogus": 1}}"#).contains("bogus"));
    assert!(run("{\n\"seed\": }").contains(":2:"));
    let many =
        run(r#"{"scenario": {"pilot_length": 300, "num_ues": 0}, "sweep": {"grid_dbm": []}}"#);
    assert!(
        many.contains("coherence_block") && many.contains("num_ues") && many.contains("grid_dbm"),
        "{many}"
    );
    assert!(run(r#"{"command": "coop-outage"}"#).contains("coop-outage"));
    let o = hetnet(&["sweep-power", "--spec", "missing.json"], dir.path(), None);
    assert!(!o.status.success());
}

#[test]
fn train_rl_writes_loadable_weights() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(
        dir.path(),
        r#"{"rl": {"environment": "bandit", "agent": {"q_hidden": [8], "policy_hidden": [4]}}}"#,
    );
    let o = hetnet(
        &[
            "train-rl",
            "--spec",
            "spec.json",
            "--out",
            "rl.csv",
            "--trials",
            "50",
        ],
        dir.path(),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let nets =
        weights::decode(&std::fs::read(dir.path().join("rl.csv.weights.bin")).unwrap()).unwrap();
    assert_eq!(nets.len(), 2);
    assert_eq!(nets[0].sizes(), &[1 + 2 * 2, 8, 1]);
    assert_eq!(nets[1].sizes(), &[1, 4, 2]);
    let text = std::fs::read_to_string(dir.path().join("rl.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "episode,episode_return");
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn place_replicas_from_explicit_sites() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(
        dir.path(),
        r#"{"placement": {"sites": [[0,0],[1,0],[10,0],[11,0]], "params": {"clusters": 2}}}"#,
    );
    assert!(hetnet(
        &["place-replicas", "--spec", "spec.json", "--out", "p.csv"],
        dir.path(),
        None
    )
    .status
    .success());
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(text.lines().next().unwrap(), "site,cluster,center,distance");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][1], rows[1][1]);
    assert_eq!(rows[2][1], rows[3][1]);
    assert_ne!(rows[0][1], rows[2][1]);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() <= 1.0);
    }
}
