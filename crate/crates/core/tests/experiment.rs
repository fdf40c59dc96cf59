use std::fs;
use std::path::Path;

use dpsr_core::experiment::{aggregate, parse_spec, read_summary, run_experiment, SUMMARY_FILE};
use dpsr_core::trainer::Mode;
use dpsr_core::Error;

const SPEC: &str = "\
# tiny corridor matrix
env=forked_corridor
modes=per,dpsr
seeds=0..3
total_steps=400
buffer_size=64
learning_starts=32
candidates_common=16
candidates_recycle=4
recycle_every=50
eval_episodes=3
";

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn matrix_writes_one_curve_per_run_and_one_summary() {
    let spec = parse_spec(SPEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rows = run_experiment(&spec, dir.path(), 2).unwrap();
    assert_eq!(rows.len(), 6);

    let names = listing(dir.path());
    assert_eq!(names.iter().filter(|n| n.ends_with(".curve.csv")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.ends_with(".run.txt")).count(), 6);
    assert_eq!(names.iter().filter(|n| *n == SUMMARY_FILE).count(), 1);
    assert_eq!(names.len(), 13);

    let curve = fs::read_to_string(dir.path().join("dpsr_seed1.curve.csv")).unwrap();
    assert!(curve.starts_with("timestep,episode,return,mean100,epsilon\n"));
    assert!(curve.lines().count() > 1);

    let summary = read_summary(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary, rows);
    let order: Vec<(Mode, u64)> = rows.iter().map(|r| (r.mode, r.seed)).collect();
    assert_eq!(order, spec.runs());
    assert_eq!(aggregate(&summary, Mode::Dpsr).runs, 3);
}

#[test]
fn run_echo_reproduces_its_run() {
    let spec = parse_spec(SPEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&spec, dir.path(), 1).unwrap();
    let echo = fs::read_to_string(dir.path().join("per_seed2.run.txt")).unwrap();
    let single = parse_spec(&echo).unwrap();
    assert_eq!(single.runs(), vec![(Mode::Per, 2)]);
    assert_eq!(single.config, spec.config);
    assert!(echo.contains("# final_eval: "));

    let again = tempfile::tempdir().unwrap();
    run_experiment(&single, again.path(), 1).unwrap();
    assert_eq!(
        fs::read(dir.path().join("per_seed2.curve.csv")).unwrap(),
        fs::read(again.path().join("per_seed2.curve.csv")).unwrap()
    );
}

#[test]
fn reruns_are_byte_identical_regardless_of_jobs() {
    let spec = parse_spec(SPEC).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&spec, a.path(), 1).unwrap();
    run_experiment(&spec, b.path(), 3).unwrap();
    let names = listing(a.path());
    assert_eq!(names, listing(b.path()));
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn unwritable_output_is_io_error() {
    let spec = parse_spec(SPEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = run_experiment(&spec, &blocker.join("out"), 1).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}
