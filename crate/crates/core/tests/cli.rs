use std::process::Command;

fn bfs3(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bfs3")).args(args).output().expect("binary runs")
}

#[test]
fn run_writes_the_exact_header_and_metadata() {
    let dir = std::env::temp_dir().join(format!("bfs3-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("trace.csv");
    let status = bfs3(&[
        "run", "--domain", "grid5", "--agent", "bfs3", "--d", "3", "--t", "5", "--C", "2", "--N", "3", "--gamma", "0.9",
        "--runs", "2", "--steps", "15", "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "run,step,state,action,reward,cum_reward,queries,cache_hit,discoveries,wall_ms");
    assert!(csv.lines().count() > 2);
    let meta = std::fs::read_to_string(out.with_extension("json")).unwrap();
    assert!(meta.contains("\"gamma\": 0.9") && meta.contains("\"seed\": 4"), "{meta}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn stdout_run_matches_itself() {
    let args = ["run", "--domain", "random:5,2,3", "--agent", "rmax", "--runs", "2", "--steps", "25", "--seed", "9"];
    let strip = |o: std::process::Output| {
        String::from_utf8(o.stdout).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>()
    };
    assert_eq!(strip(bfs3(&args)), strip(bfs3(&args)));
}

#[test]
fn sweep_reports_one_row_per_value() {
    let out = bfs3(&[
        "sweep", "--domain", "grid5", "--agent", "bfs3", "--d", "2", "--C", "1", "--runs", "2", "--steps", "10", "--param", "t",
        "--values", "2,4,8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
}

#[test]
fn bad_names_fail_with_the_options() {
    let out = bfs3(&["run", "--domain", "grid5", "--agent", "sarsa"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rmax") && err.contains("bfs3-factored"), "{err}");

    let out = bfs3(&["run", "--domain", "maze9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("paintpolish:N"));

    let out = bfs3(&["sweep", "--param", "colour", "--values", "1"]);
    assert!(!out.status.success());
}

#[test]
fn tree_dumps_a_search() {
    let out = bfs3(&["tree", "--domain", "lock:3", "--d", "3", "--t", "10", "--C", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stdout.is_empty());
}
