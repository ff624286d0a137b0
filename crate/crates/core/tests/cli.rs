use std::path::PathBuf;
use std::process::{Command, Output};

use graph_hjb::io::parse_function;
use graph_hjb::solvers::solve_linear_exit;
use graph_hjb::{BoundarySet, GraphFunction, TransitionKernel};
use serde_json::Value;

const CHAIN3: &str = r#"{"n": 3, "edges": [[0,1,1],[1,0,1],[1,2,1],[2,1,1]]}"#;
const WALK5: &str = "[[0,1,0,0,0],[0.5,0,0.5,0,0],[0,0.5,0,0.5,0],[0,0,0.5,0,0.5],[0,0,0,1,0]]";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_graph-hjb"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn eikonal_on_three_chain() {
    let ws = Workspace::new();
    ws.file("chain3.json", CHAIN3);
    let out = ws.run(&[
        "solve",
        "eikonal",
        "--graph",
        "chain3.json",
        "--boundary",
        "[0]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--form",
        "h",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(floats(&v["solution"]), vec![0.0, 1.0, 2.0]);
    assert_eq!(v["status"], "converged");

    let out = ws.run(&[
        "solve",
        "eikonal",
        "--graph",
        "chain3.json",
        "--boundary",
        "[0]",
        "--f",
        "ones",
        "--g",
        "zeros",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        floats(&stdout_json(&out)["solution"]),
        vec![0.0, -1.0, -2.0]
    );
}

#[test]
fn certify_reports_the_trapping_pair() {
    let ws = Workspace::new();
    let walk = "[[0,1,0,0],[0.5,0,0.5,0],[0,0.5,0,0.5],[0,0,1,0]]";
    let cycle = "[[0,1,0,0],[0,0,1,0],[0,1,0,0],[0,0,1,0]]";
    ws.file("cyclepair.json", &format!("[{walk}, {cycle}]"));
    let out = ws.run(&[
        "certify",
        "--family",
        "cyclepair.json",
        "--boundary",
        "[0,3]",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "infeasible");
    assert_eq!(v["bound"], "inf");
    assert_eq!(v["trapped"], serde_json::json!([1, 2]));

    ws.file("walk.json", &format!("[{walk}]"));
    let out = ws.run(&[
        "certify",
        "--family",
        "walk.json",
        "--boundary",
        "[0,3]",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let worst = floats(&v["worst_expected_exit"]);
    assert!(
        (worst[1] - 2.0).abs() < 1e-10 && (worst[2] - 2.0).abs() < 1e-10,
        "{worst:?}"
    );
}

#[test]
fn unreachable_distance_is_inf() {
    let ws = Workspace::new();
    ws.file("disconnected.json", r#"{"n": 3, "edges": [[1,0,2.0]]}"#);
    let out = ws.run(&[
        "distance",
        "--graph",
        "disconnected.json",
        "--boundary",
        "[0]",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["distance"], serde_json::json!([0.0, 0.5, "inf"]));
    let csv = ws.run(&[
        "distance",
        "--graph",
        "disconnected.json",
        "--boundary",
        "[0]",
        "--output",
        "csv",
    ]);
    assert_eq!(
        String::from_utf8_lossy(&csv.stdout),
        "index,value\n0,0\n1,0.5\n2,inf\n"
    );
}

#[test]
fn validation_errors_exit_with_two() {
    let ws = Workspace::new();
    ws.file("chain3.json", CHAIN3);
    ws.file("short.json", "[[0,1,0],[0.5,0,0.499999],[0,1,0]]");
    let out = ws.run(&[
        "solve",
        "linear",
        "--kernel",
        "short.json",
        "--boundary",
        "[0,2]",
        "--f",
        "ones",
        "--g",
        "zeros",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("short.json") && stderr(&out).contains("row 1"),
        "{}",
        stderr(&out)
    );
    let out = ws.run(&[
        "solve",
        "linear",
        "--kernel",
        "short.json",
        "--boundary",
        "[0,2]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--normalize",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let out = ws.run(&[
        "distance",
        "--graph",
        "chain3.json",
        "--boundary",
        "[0,1,2]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("proper subset"), "{}", stderr(&out));

    let out = ws.run(&[
        "solve",
        "eikonal",
        "--graph",
        "chain3.json",
        "--boundary",
        "[0]",
        "--f",
        "[1, 1]",
        "--g",
        "zeros",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("expected 3"), "{}", stderr(&out));

    let out = ws.run(&["solve", "eikonal", "--graph", "chain3.json", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solution_round_trips_bit_for_bit() {
    let ws = Workspace::new();
    ws.file("walk5.json", WALK5);
    ws.file("f.csv", "0,0\n1,0.1\n2,0.7\n3,0.3333333333333333\n4,0\n");
    let out = ws.run(&[
        "solve",
        "linear",
        "--kernel",
        "walk5.json",
        "--boundary",
        "[0,4]",
        "--f",
        "f.csv",
        "--g",
        "[0.2,0,0,0,1.1]",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let parsed = parse_function(&String::from_utf8_lossy(&out.stdout), "stdout", 5).unwrap();

    let rows: Vec<Vec<f64>> = serde_json::from_str(WALK5).unwrap();
    let kernel = TransitionKernel::from_rows(&rows, false).unwrap();
    let f = GraphFunction::new(vec![0.0, 0.1, 0.7, 0.3333333333333333, 0.0]).unwrap();
    let g = GraphFunction::new(vec![0.2, 0.0, 0.0, 0.0, 1.1]).unwrap();
    let direct =
        solve_linear_exit(&kernel, &f, &g, &BoundarySet::new(&[0, 4], 5).unwrap()).unwrap();
    assert!(parsed
        .values()
        .iter()
        .zip(&direct.solution)
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    let saved = ws.file("solution.json", &String::from_utf8_lossy(&out.stdout));
    let again = ws.run(&[
        "solve",
        "linear",
        "--kernel",
        "walk5.json",
        "--boundary",
        "[0,4]",
        "--f",
        "zeros",
        "--g",
        saved.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), again.status.code());
}

#[test]
fn simulate_is_deterministic() {
    let ws = Workspace::new();
    ws.file("walk5.json", WALK5);
    let args = [
        "simulate",
        "--kernel",
        "walk5.json",
        "--boundary",
        "[0,4]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--x0",
        "2",
        "--samples",
        "20000",
        "--seed",
        "7",
    ];
    let a = ws.run(&args);
    let b = ws.run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    let (mean, se) = (v["mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((mean - 4.0).abs() <= 4.0 * se);
    assert_eq!(v["censored"], 0);

    let censored = ws.run(&[
        "simulate",
        "--kernel",
        "walk5.json",
        "--boundary",
        "[0,4]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--x0",
        "2",
        "--samples",
        "100",
        "--max-steps",
        "2",
    ]);
    assert_eq!(censored.status.code(), Some(0));
    assert!(stderr(&censored).contains("censored"));
}

#[test]
fn simulate_with_policy_and_dynkin() {
    let ws = Workspace::new();
    let left = "[[1,0,0,0,0],[1,0,0,0,0],[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0]]";
    let right = "[[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0],[0,0,0,0,1],[0,0,0,0,1]]";
    ws.file("lr.json", &format!("[{left}, {right}]"));
    let out = ws.run(&[
        "simulate",
        "--family",
        "lr.json",
        "--policy",
        "[0,0,0,1,1]",
        "--boundary",
        "[0,4]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--x0",
        "3",
        "--samples",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["mean"], 1.0);

    ws.file("right.json", right);
    let out = ws.run(&[
        "dynkin",
        "--kernel",
        "right.json",
        "--w",
        "[3,-1,4,1,5]",
        "--boundary",
        "[4]",
        "--x0",
        "0",
        "--samples",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["mean"], 0.0);
}

#[test]
fn perron_with_operator_file() {
    let ws = Workspace::new();
    std::fs::create_dir(ws.dir.path().join("ops")).unwrap();
    ws.file("ops/chain3.json", CHAIN3);
    ws.file(
        "ops/eik.json",
        r#"{"kind": "eikonal", "graph": "chain3.json"}"#,
    );
    let out = ws.run(&[
        "solve",
        "perron",
        "--operator",
        "ops/eik.json",
        "--boundary",
        "[0]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let sol = floats(&stdout_json(&out)["solution"]);
    assert!(
        (sol[1] + 1.0).abs() < 1e-10 && (sol[2] + 2.0).abs() < 1e-10,
        "{sol:?}"
    );

    let out = ws.run(&[
        "solve",
        "perron",
        "--operator",
        r#"{"kind": "pucci-j", "lambda": 1, "Lambda": 2}"#,
        "--graph",
        "ops/chain3.json",
        "--boundary",
        "[0]",
        "--f",
        "zeros",
        "--g",
        "zeros",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("supply a start"), "{}", stderr(&out));

    let out = ws.run(&[
        "solve",
        "perron",
        "--operator",
        r#"{"kind": "pucci-j", "lambda": 1, "Lambda": 2}"#,
        "--graph",
        "ops/chain3.json",
        "--boundary",
        "[0]",
        "--f",
        "[0,-1,-1]",
        "--g",
        "zeros",
        "--start",
        "[0,-10,-10]",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn checks_from_the_command_line() {
    let ws = Workspace::new();
    ws.file("chain3.json", CHAIN3);
    ws.file("walk5.json", WALK5);
    let out = ws.run(&[
        "check",
        "gcp",
        "--operator",
        r#"{"kind": "linear"}"#,
        "--kernel",
        "walk5.json",
        "--trials",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["passed"], true);

    let out = ws.run(&[
        "check",
        "constant",
        "--operator",
        r#"{"kind": "j", "profile": "cubic"}"#,
        "--graph",
        "chain3.json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let out = ws.run(&[
        "check",
        "differences",
        "--operator",
        r#"{"kind": "hamiltonian", "hamiltonian": "peikonal", "p": 2}"#,
        "--graph",
        "chain3.json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let out = ws.run(&[
        "check",
        "convex",
        "--graph",
        "chain3.json",
        "--p",
        "1.5",
        "--trials",
        "100",
        "--output",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout)
        .starts_with("passed,trials,worst_violation\ntrue,100,"));
}

#[test]
fn bellman_and_peikonal_commands() {
    let ws = Workspace::new();
    ws.file("chain3.json", CHAIN3);
    let left = "[[1,0,0,0,0],[1,0,0,0,0],[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0]]";
    let right = "[[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0],[0,0,0,0,1],[0,0,0,0,1]]";
    ws.file("lr.json", &format!("[{left}, {right}]"));
    for method in ["value", "policy"] {
        let out = ws.run(&[
            "solve",
            "bellman",
            "--family",
            "lr.json",
            "--boundary",
            "[0,4]",
            "--f",
            "ones",
            "--g",
            "zeros",
            "--method",
            method,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert_eq!(
            floats(&stdout_json(&out)["solution"]),
            vec![0.0, 1.0, 2.0, 1.0, 0.0]
        );
    }
    let out = ws.run(&[
        "solve",
        "peikonal",
        "--graph",
        "chain3.json",
        "--p",
        "2",
        "--boundary",
        "[0]",
        "--f",
        "[0.5,0.5,0.5]",
        "--g",
        "zeros",
        "--form",
        "h",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let sol = floats(&stdout_json(&out)["solution"]);
    assert!((sol[1] - 1.0).abs() < 1e-10 && (sol[2] - 2.0).abs() < 1e-10);
}

#[test]
fn non_converged_solve_exits_with_three() {
    let ws = Workspace::new();
    ws.file("chain3.json", CHAIN3);
    let out = ws.run(&[
        "solve",
        "peikonal",
        "--graph",
        "chain3.json",
        "--p",
        "2",
        "--boundary",
        "[0]",
        "--f",
        "ones",
        "--g",
        "zeros",
        "--max-iter",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("max_iter"));
}

#[test]
fn every_subcommand_has_help() {
    let ws = Workspace::new();
    for sub in [
        vec!["distance"],
        vec!["solve", "linear"],
        vec!["solve", "bellman"],
        vec!["solve", "eikonal"],
        vec!["solve", "peikonal"],
        vec!["solve", "perron"],
        vec!["check", "gcp"],
        vec!["check", "constant"],
        vec!["check", "differences"],
        vec!["check", "convex"],
        vec!["simulate"],
        vec!["dynkin"],
        vec!["certify"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let out = ws.run(&args);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(
            text.contains("--output") && text.contains("[default: json]"),
            "{sub:?}: {text}"
        );
    }
}
