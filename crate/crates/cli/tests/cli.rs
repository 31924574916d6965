use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lbp_core::model::catalog::builtin_counterexample;
use lbp_core::oracle::solve_global_oracle;
use lbp_core::Settings;
use serde_json::Value;
use tempfile::TempDir;

fn lbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbp"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("lbp runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn write_instance(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn counterexample(dir: &Path) -> String {
    write_instance(
        dir,
        "counterexample.json",
        &builtin_counterexample().to_json_string().unwrap(),
    )
}

const INFEASIBLE: &str = r#"{"name":"empty","upper_sense":"min","lower_sense":"min","n":1,"m":1,
  "a":[1],"b":[1],"C":[[1]],"e":[1],"p":[0],"q":[1],
  "R":[[0],[0]],"S":[[1],[-1]],"t":[-1,0]}"#;

// The leader pushes x to infinity and the follower tracks it with y = x.
const UNBOUNDED: &str = r#"{"name":"runaway","upper_sense":"min","lower_sense":"min","n":1,"m":1,
  "a":[-1],"b":[0],"C":[[-1]],"e":[0],"p":[0],"q":[1],
  "R":[[1]],"S":[[-1]],"t":[0]}"#;

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn oracle_reports_the_bilevel_optimum_exactly() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let out = lbp(&["solve", "--method", "oracle", "--format", "json", &path]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["solution"]["z_upper"], 102.0);
    assert_eq!(v["solution"]["status"], "optimal");

    // Every number in the report is the in-memory value, bit for bit.
    let oracle = solve_global_oracle(&builtin_counterexample(), &Settings::default()).unwrap();
    let sol: lbp_core::model::BilevelSolution =
        serde_json::from_value(v["solution"].clone()).unwrap();
    assert_eq!(sol, oracle.solution);

    let text = stdout(&lbp(&["solve", "--method", "oracle", &path]));
    assert!(text.contains("z            102"), "{text}");
}

#[test]
fn bigm_with_small_dual_bound_is_certified_suboptimal() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let out = lbp(&[
        "solve",
        "--method",
        "bigm",
        "--md",
        "50",
        "--certify",
        "--format",
        "json",
        &path,
    ]);
    assert_eq!(code(&out), 4);
    let v = json(&out);
    assert_eq!(v["solution"]["z_upper"], 1.0);
    assert_eq!(v["certification"]["certificate"]["verdict"], "suboptimal");
    assert_eq!(v["certification"]["certificate"]["gap"], 101.0);
    assert_eq!(v["certification"]["oracle_z"], 102.0);
    assert_eq!(v["exit_code"], 4);

    let out = lbp(&[
        "solve",
        "--method",
        "bigm",
        "--md",
        "200",
        "--certify",
        "--format",
        "json",
        &path,
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["solution"]["status"], "optimal");

    // Without --certify nothing is claimed.
    let out = lbp(&[
        "solve", "--method", "bigm", "--md", "50", "--format", "json", &path,
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["solution"]["status"], "accepted_unverified");
}

#[test]
fn enumeration_csv_is_the_pattern_table() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let csv_path = dir.path().join("table.csv");
    let out = lbp(&[
        "solve",
        "--method",
        "enumerate",
        "--mp",
        "200",
        "--md",
        "200",
        "--format",
        "csv",
        "--csv",
        csv_path.to_str().unwrap(),
        &path,
    ]);
    assert_eq!(code(&out), 0);
    let expected = "\
case,u1,u2,x1,y1,lambda1,lambda2,z,status
1,0,0,,,,,,infeasible
2,0,1,2,100,0,100,102,optimal
3,1,0,1,0,1,0,1,optimal
4,1,1,1,0,Multiple,Multiple,1,multiple
";
    assert_eq!(stdout(&out), expected);
    assert_eq!(std::fs::read_to_string(csv_path).unwrap(), expected);
}

#[test]
fn catalog_names_work_in_place_of_files() {
    let out = lbp(&[
        "solve",
        "--method",
        "oracle",
        "--format",
        "json",
        "@counterexample",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["solution"]["z_upper"], 102.0);
    let out = lbp(&["catalog"]);
    assert!(stdout(&out).contains("counterexample"));
    assert_eq!(code(&lbp(&["catalog", "nothing-here"])), 64);
}

#[test]
fn per_row_vectors_and_scalars_are_accepted() {
    let out = lbp(&[
        "solve",
        "--md",
        "50,200",
        "--mp",
        "200",
        "--format",
        "json",
        "@counterexample",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["config"]["md"], serde_json::json!([50.0, 200.0]));
    assert_eq!(v["config"]["mp"], serde_json::json!([200.0, 200.0]));
    assert_eq!(
        code(&lbp(&["solve", "--md", "1,2,3", "@counterexample"])),
        64
    );
    assert_eq!(code(&lbp(&["solve", "--md", "-5", "@counterexample"])), 64);
}

#[test]
fn tune_walkthroughs() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let out = lbp(&[
        "tune",
        "--md0",
        "50",
        "--certify",
        "--format",
        "json",
        &path,
    ]);
    assert_eq!(code(&out), 4);
    let v = json(&out);
    assert_eq!(v["solution"]["z_upper"], 1.0);
    assert_eq!(v["tune"]["outcome"], "accepted");

    let trace = dir.path().join("trace.csv");
    let out = lbp(&[
        "tune",
        "--md0",
        "200",
        "--csv",
        trace.to_str().unwrap(),
        &path,
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("z            102"));
    assert_eq!(
        std::fs::read_to_string(trace).unwrap(),
        "iter,jprime,rule,MP1,MP2,MD1,MD2,z\n1,,accepted,200,200,200,200,102\n"
    );

    let out = lbp(&["tune", "--md0", "200", "--certify", &path]);
    assert_eq!(code(&out), 0);
}

#[test]
fn tune_rejects_degenerate_parameters() {
    assert_eq!(
        code(&lbp(&["tune", "--max-iter", "0", "@counterexample"])),
        64
    );
    assert_eq!(
        code(&lbp(&["tune", "--growth", "1", "@counterexample"])),
        64
    );
}

#[test]
fn tune_iteration_limit_is_a_solver_failure() {
    // MP grows once per iteration and never reaches the slack of 100 in time.
    let out = lbp(&[
        "tune",
        "--mp0",
        "1",
        "--md0",
        "200",
        "--growth",
        "1.5",
        "--max-iter",
        "3",
        "@counterexample",
    ]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
}

#[test]
fn verify_checks_follower_optimality() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let out = lbp(&[
        "verify", &path, "--x", "2", "--y", "100", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["lower_gap"], 0.0);

    let out = lbp(&["verify", &path, "--x", "2", "--y", "150"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("not follower-optimal"));
    assert_eq!(code(&lbp(&["verify", &path, "--x", "1,2", "--y", "0"])), 64);
}

#[test]
fn generated_instances_are_deterministic_and_solvable() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(
            code(&lbp(&[
                "generate",
                "--seed",
                "7",
                "--j",
                "4",
                "-o",
                p.to_str().unwrap()
            ])),
            0
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let out = lbp(&["solve", "--method", "oracle", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    let many = dir.path().join("many");
    let out = lbp(&[
        "generate",
        "--seed",
        "3",
        "--count",
        "3",
        "-o",
        many.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_dir(&many).unwrap().count(), 3);
    assert_eq!(code(&lbp(&["generate", "--count", "3"])), 64);
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let gen = dir.path().join("g.json");
    lbp(&[
        "generate",
        "--seed",
        "11",
        "--j",
        "6",
        "--sigma",
        "2",
        "-o",
        gen.to_str().unwrap(),
    ]);
    for inst in [path.as_str(), gen.to_str().unwrap()] {
        for method in ["bigm", "oracle", "enumerate"] {
            let mut args = vec!["solve", "--method", method, "--format", "json", inst];
            if method == "bigm" {
                args.push("--certify");
            }
            let first = lbp(&args);
            let second = lbp(&args);
            assert_eq!(code(&first), code(&second));
            assert_eq!(
                without_timing(json(&first)),
                without_timing(json(&second)),
                "{method} on {inst}"
            );
        }
        let args = [
            "tune",
            "--mp0",
            "1",
            "--md0",
            "1",
            "--certify",
            "--format",
            "json",
            inst,
        ];
        assert_eq!(
            without_timing(json(&lbp(&args))),
            without_timing(json(&lbp(&args)))
        );
    }
}

#[test]
fn report_file_matches_stdout_json() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let report = dir.path().join("r.json");
    let out = lbp(&[
        "solve",
        "--method",
        "enumerate",
        "--format",
        "json",
        "--report",
        report.to_str().unwrap(),
        &path,
    ]);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let v = json(&out);
    assert_eq!(file["table"], v["table"]);
    assert_eq!(file["instance"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 4);
    assert!(v["milp"]["table"].is_null());
}

#[test]
fn exit_codes_for_infeasible_and_unbounded_instances() {
    let dir = TempDir::new().unwrap();
    let infeasible = write_instance(dir.path(), "inf.json", INFEASIBLE);
    let unbounded = write_instance(dir.path(), "unb.json", UNBOUNDED);
    for method in ["bigm", "oracle", "enumerate"] {
        assert_eq!(
            code(&lbp(&["solve", "--method", method, &infeasible])),
            2,
            "{method}"
        );
        assert_eq!(
            code(&lbp(&["solve", "--method", method, &unbounded])),
            3,
            "{method}"
        );
    }
    assert_eq!(code(&lbp(&["solve", "--certify", &infeasible])), 2);
    assert_eq!(code(&lbp(&["tune", &infeasible])), 2);
    assert_eq!(code(&lbp(&["tune", &unbounded])), 3);
}

#[test]
fn usage_and_file_errors() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let garbage = write_instance(dir.path(), "bad.json", "{ not json");
    let short = write_instance(
        dir.path(),
        "short.json",
        &INFEASIBLE.replace(r#""t":[-1,0]"#, r#""t":[-1]"#),
    );
    let coupled = write_instance(
        dir.path(),
        "coupled.json",
        &UNBOUNDED.replace(r#""C":[[-1]]"#, r#""C":[[-1]],"d":[[1]]"#),
    );
    let missing = dir.path().join("missing.json");
    for method in ["bigm", "oracle", "enumerate"] {
        assert_eq!(code(&lbp(&["solve", "--method", method, &garbage])), 65);
        assert_eq!(code(&lbp(&["solve", "--method", method, &short])), 65);
        assert_eq!(code(&lbp(&["solve", "--method", method, &coupled])), 65);
        assert_eq!(
            code(&lbp(&[
                "solve",
                "--method",
                method,
                missing.to_str().unwrap()
            ])),
            65
        );
    }
    assert_eq!(code(&lbp(&["solve", "--method", "simplex", &path])), 64);
    assert_eq!(
        code(&lbp(&["solve", "--method", "oracle", "--certify", &path])),
        64
    );
    assert_eq!(
        code(&lbp(&[
            "solve", "--method", "bigm", "--format", "csv", &path
        ])),
        64
    );
    assert_eq!(code(&lbp(&["solve"])), 64);
    assert_eq!(code(&lbp(&["frobnicate"])), 64);
    assert_eq!(code(&lbp(&["--help"])), 0);
    assert_eq!(code(&lbp(&["--version"])), 0);
}

#[test]
fn bench_writes_one_row_per_instance() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let args = [
        "bench",
        "--seed",
        "5",
        "--count",
        "4",
        "--sigma",
        "2",
        "--csv",
        csv.to_str().unwrap(),
        "--format",
        "json",
    ];
    let out = lbp(&args);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("index,name,oracle_z"));
    assert_eq!(json(&lbp(&args)), v);

    let path = counterexample(dir.path());
    let out = lbp(&["bench", &path, "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("counterexample"));
}

#[test]
fn estimate_reports_constants() {
    let out = lbp(&["estimate", "@counterexample", "--solve", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let v = json(&out);
    assert_eq!(
        v["estimate"]["config"]["md"],
        serde_json::json!([10.0, 1000.0])
    );
    assert_eq!(v["milp_z"], 102.0);
    assert_eq!(
        code(&lbp(&["estimate", "@counterexample", "--kappa", "0.5"])),
        64
    );
}

fn python_with_highs() -> Option<PathBuf> {
    let ok = Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    ok.then(|| PathBuf::from("python3"))
}

#[test]
fn exported_lp_file_solves_to_the_same_value_elsewhere() {
    let dir = TempDir::new().unwrap();
    let path = counterexample(dir.path());
    let lp = dir.path().join("ce.lp");
    let out = lbp(&[
        "export-lp",
        &path,
        "--mp",
        "200",
        "--md",
        "200",
        "-o",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Maximize") && text.contains("Binary") && text.ends_with("End\n"));

    let Some(python) = python_with_highs() else {
        eprintln!("highspy not installed; skipping the external cross-check");
        return;
    };
    let script = "import sys, highspy\n\
                  h = highspy.Highs()\n\
                  h.setOptionValue('output_flag', False)\n\
                  h.readModel(sys.argv[1])\n\
                  h.run()\n\
                  print(h.getInfo().objective_function_value)\n";
    for (md, expected) in [("200", 102.0), ("50", 1.0)] {
        lbp(&[
            "export-lp",
            &path,
            "--mp",
            "200",
            "--md",
            md,
            "-o",
            lp.to_str().unwrap(),
        ]);
        let out = Command::new(&python)
            .args(["-c", script, lp.to_str().unwrap()])
            .output()
            .unwrap();
        let z: f64 = String::from_utf8(out.stdout)
            .unwrap()
            .trim()
            .parse()
            .unwrap();
        assert!((z - expected).abs() < 1e-6, "MD={md}: HiGHS gives {z}");
    }
}
