use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geohmm::io::{read_experience, read_model, write_model};

fn geohmm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geohmm"))
        .args(args)
        .current_dir(dir)
        .env_remove("GEOHMM_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = geohmm(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    geohmm(dir, args).status.code().expect("exit code")
}

fn with_truth() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["loop-model", "-o", "truth.json"]);
    let p = dir.path().join("truth.json");
    (dir, p)
}

#[test]
fn simulate_row_counts_and_seed_determinism() {
    let (dir, _) = with_truth();
    let d = dir.path();
    ok(d, &["simulate", "--model", "truth.json", "--length", "800", "--seed", "4", "-o", "a.txt"]);
    ok(d, &["simulate", "--model", "truth.json", "--length", "800", "--seed", "4", "-o", "b.txt"]);
    let file = read_experience(&d.join("a.txt")).unwrap();
    assert_eq!(file.sequence.len(), 800);
    assert_eq!(file.sequence.steps.iter().filter(|s| s.reading.is_some()).count(), 799);
    assert!(same_bytes(&d.join("a.txt"), &d.join("b.txt")));

    ok(d, &["simulate", "--model", "truth.json", "--length", "1", "--seed", "4", "-o", "one.txt"]);
    let one = read_experience(&d.join("one.txt")).unwrap();
    assert_eq!(one.sequence.len(), 1);
    assert!(one.sequence.steps[0].reading.is_none());
}

#[test]
fn seed_falls_back_to_environment() {
    let (dir, _) = with_truth();
    let d = dir.path();
    let run = |name: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_geohmm"))
            .args(["simulate", "--model", "truth.json", "--length", "50", "-o", name])
            .current_dir(d)
            .env("GEOHMM_SEED", "9")
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    run("env.txt");
    ok(d, &["simulate", "--model", "truth.json", "--length", "50", "--seed", "9", "-o", "flag.txt"]);
    assert!(same_bytes(&d.join("env.txt"), &d.join("flag.txt")));
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    fs::read(a).unwrap() == fs::read(b).unwrap()
}

#[test]
fn restarted_learning_is_reproducible_and_consistent() {
    let runs: Vec<(tempfile::TempDir, PathBuf)> = (0..2).map(|_| with_truth()).collect();
    for (dir, _) in &runs {
        let d = dir.path();
        ok(d, &["simulate", "--model", "truth.json", "--length", "200", "--seed", "1", "-o", "seq.txt"]);
        ok(d, &["learn", "--experience", "seq.txt", "--states", "16", "--restarts", "3", "--seed", "7", "-o", "m.json"]);
    }
    let (a, b) = (runs[0].0.path(), runs[1].0.path());
    for f in ["m.json", "m.report.json"] {
        assert!(same_bytes(&a.join(f), &b.join(f)), "{f} differs between runs");
    }
    assert_eq!(code(a, &["check", "--model", "m.json", "--level", "additive"]), 0);

    let out = ok(a, &["replay", "m.json.manifest.json", "--verify"]);
    assert!(out.contains("reproduced"), "{out}");
}

#[test]
fn prefix_lengths_write_one_model_each() {
    let (dir, _) = with_truth();
    let d = dir.path();
    ok(d, &["simulate", "--model", "truth.json", "--length", "120", "--seed", "1", "-o", "seq.txt"]);
    ok(d, &[
        "learn", "--experience", "seq.txt", "--states", "16", "--no-odometry", "--max-iters", "5",
        "--prefix-lengths", "60,120", "-o", "bw.json",
    ]);
    for p in ["bw.prefix60.json", "bw.prefix120.json", "bw.report.json"] {
        assert!(d.join(p).exists(), "{p} missing");
    }
}

#[test]
fn four_corner_loop_learns_its_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let readings = [
        (2, 94, 92),
        (1994, 0, 88),
        (3, -93, 86),
        (-1999, 1, 94),
        (-4, 102, 91),
        (1998, -5, 90),
        (-2, -106, 91),
        (-2003, 7, 87),
    ];
    let mut text = String::from("GEOHMM-EXPERIENCE v1\ndims 1 alphabet 1 angle degrees length units\n0\n");
    for (x, y, t) in readings {
        text.push_str(&format!("0 ; {x} {y} {t}\n"));
    }
    fs::write(d.join("loop.txt"), text).unwrap();
    let sigma = 20f64.to_radians().to_string();
    ok(d, &[
        "learn", "--experience", "loop.txt", "--states", "4", "--mode", "global", "--sigma-x", "20", "--sigma-y", "20",
        "--sigma-theta", &sigma, "-o", "m.json",
    ]);
    let m = read_model(&d.join("m.json")).unwrap();
    for i in 0..4 {
        let row = &m.transitions[i];
        let best = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(best, (i + 1) % 4, "row {i}: {row:?}");
    }
}

#[test]
fn eval_kl_of_a_model_against_itself_is_zero() {
    let (dir, _) = with_truth();
    let out = ok(dir.path(), &["eval-kl", "--truth", "truth.json", "--learned", "truth.json", "--length", "100", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["value"].as_f64(), Some(0.0));
}

#[test]
fn check_and_render_on_the_loop() {
    let (dir, truth) = with_truth();
    let d = dir.path();
    assert_eq!(code(d, &["check", "--model", "truth.json"]), 0);
    ok(d, &["render", "--model", "truth.json", "-o", "map.svg"]);
    let svg = fs::read_to_string(d.join("map.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 16);

    let mut m = read_model(&truth).unwrap();
    m.relations[0][1].mu_x += 1.0;
    write_model(&d.join("broken.json"), &m).unwrap();
    assert_eq!(code(d, &["check", "--model", "broken.json", "--level", "antisym"]), 4);
}

#[test]
fn exit_codes_distinguish_failures() {
    let (dir, _) = with_truth();
    let d = dir.path();
    fs::write(d.join("junk.json"), "{ not json").unwrap();
    assert_eq!(code(d, &["render", "--model", "junk.json", "-o", "x.svg"]), 2);
    assert_eq!(code(d, &["render", "--model", "missing.json", "-o", "x.svg"]), 2);

    // the loop model never emits symbol 3
    let text = "GEOHMM-EXPERIENCE v1\ndims 3 alphabet 4,4,4\n3 3 3\n0 2 2 ; 1 1 0\n";
    fs::write(d.join("odd.txt"), text).unwrap();
    assert_eq!(code(d, &["learn", "--experience", "odd.txt", "--initial", "truth.json", "-o", "m.json"]), 3);

    fs::write(d.join("bad.txt"), "GEOHMM-EXPERIENCE v1\ndims 2\n0\n").unwrap();
    assert_eq!(code(d, &["init", "--experience", "bad.txt", "--states", "2", "-o", "m.json"]), 2);
}

#[test]
fn manifests_record_resolved_invocations() {
    let (dir, _) = with_truth();
    let d = dir.path();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("truth.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "loop-model");
    assert_eq!(m["invocation"]["command"], "loop-model");
    assert_eq!(m["outputs"][0], "truth.json");

    ok(d, &["check", "--model", "truth.json", "--manifest", "check.json"]);
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("check.json")).unwrap()).unwrap();
    assert_eq!(c["exit_code"], 0);
    assert_eq!(c["result"]["consistent"], true);
}
