use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn aggsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggsched"))
        .args(args)
        .env_remove("AGGSCHED_SEED")
        .output()
        .expect("spawn aggsched")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_seven_sensor_delivers_everything() {
    let topo = fixture("seven_sensor.wsn");
    let o = aggsched(&["simulate", "--topology", topo.to_str().unwrap(), "--alpha", "3", "--channels", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algo,sensors,L,beta,alpha,channels,seed,slots_used,delivered,wall_time_ms"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "dcas");
    assert_eq!(row[1], "8");
    assert_eq!(row[2], "");
    assert_eq!(row[8], "20");
}

#[test]
fn every_algorithm_runs_on_seven_sensor() {
    let topo = fixture("seven_sensor.wsn");
    for algo in ["dcas", "greedy", "periodic"] {
        let o = aggsched(&["simulate", "--topology", topo.to_str().unwrap(), "--algo", algo]);
        assert_eq!(o.status.code(), Some(0), "{algo}");
        assert!(stdout(&o).lines().nth(1).unwrap().starts_with(algo));
    }
}

#[test]
fn size_cap_exits_3() {
    let topo = fixture("seven_sensor.wsn");
    let o = aggsched(&["simulate", "--topology", topo.to_str().unwrap(), "--algo", "bruteforce"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("node count"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(aggsched(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(aggsched(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(aggsched(&["simulate", "--channels", "0", "--sensors", "20", "--area", "8"]).status.code(), Some(1));
    assert_eq!(aggsched(&["sweep", "--axis", "alpha", "--points", "x"]).status.code(), Some(1));
    assert_eq!(aggsched(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_accepts_reference_schedule() {
    let o = aggsched(&[
        "validate",
        "--topology",
        fixture("seven_sensor.wsn").to_str().unwrap(),
        "--schedule",
        fixture("seven_sensor_reference.schedule").to_str().unwrap(),
        "--alpha",
        "3",
        "--channels",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("valid"));
}

#[test]
fn validate_rejects_corrupted_schedule_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(fixture("seven_sensor_reference.schedule")).unwrap();
    // Dropping the last line leaves data stranded at a relay.
    let trimmed: Vec<&str> = good.lines().filter(|l| !l.trim().is_empty()).collect();
    let bad = dir.path().join("bad.schedule");
    fs::write(&bad, trimmed[..trimmed.len() - 1].join("\n") + "\n").unwrap();
    let o = aggsched(&[
        "validate",
        "--topology",
        fixture("seven_sensor.wsn").to_str().unwrap(),
        "--schedule",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_schedule_dump_validates() {
    let dir = tempfile::tempdir().unwrap();
    let topo = fixture("seven_sensor.wsn");
    let sched = dir.path().join("out.schedule");
    let o = aggsched(&[
        "simulate",
        "--topology",
        topo.to_str().unwrap(),
        "--algo",
        "greedy",
        "--schedule",
        sched.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = aggsched(&["validate", "--topology", topo.to_str().unwrap(), "--schedule", sched.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("run{i}.csv"));
        let sched = dir.path().join(format!("run{i}.schedule"));
        let trace = dir.path().join(format!("run{i}.trace"));
        let o = aggsched(&[
            "simulate",
            "--sensors",
            "60",
            "--area",
            "18",
            "--seed",
            "11",
            "--order",
            "shuffled",
            "--out",
            csv.to_str().unwrap(),
            "--schedule",
            sched.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        seen.push((fs::read(&csv).unwrap(), fs::read(&sched).unwrap(), fs::read(&trace).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
    assert!(!seen[0].2.is_empty());
}

#[test]
fn sweep_is_reproducible_and_ordered() {
    let args = [
        "sweep", "--axis", "channels", "--points", "1,2", "--sensors", "40", "--area", "15", "--runs", "3", "--algo",
        "dcas,periodic",
    ];
    let a = aggsched(&args);
    let b = aggsched(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(String::from_utf8_lossy(&a.stderr).starts_with("algo,sensors,L,beta,alpha,channels,runs,mean_slots"));
    let seq = aggsched(&[&args[..], &["--sequential"]].concat());
    assert_eq!(seq.stdout, a.stdout);
}

#[test]
fn seed_env_overrides_flag() {
    let run = |env: Option<&str>, seed: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aggsched"));
        cmd.args(["simulate", "--sensors", "40", "--area", "15", "--seed", seed]);
        match env {
            Some(v) => cmd.env("AGGSCHED_SEED", v),
            None => cmd.env_remove("AGGSCHED_SEED"),
        };
        cmd.output().unwrap()
    };
    let flag = run(None, "5");
    let env = run(Some("5"), "9");
    assert_eq!(flag.stdout, env.stdout);
    assert_eq!(run(Some("nope"), "5").status.code(), Some(1));
}

#[test]
fn dump_graph_lists_arcs_and_conflicts() {
    let o = aggsched(&["dump-graph", "--topology", fixture("seven_sensor.wsn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("wsn 8 0"));
    assert_eq!(text.lines().filter(|l| l.starts_with("arc ")).count(), 8);
}
