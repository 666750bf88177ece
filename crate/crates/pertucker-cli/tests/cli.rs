//! Command-level contracts: exit codes, byte-reproducible outputs, and
//! report shapes.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pertucker")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn pertucker")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SIM: &str = r#"{"schema_version":1,"seed":11,"patterns":{"sources":[
    {"kind":"swiss","samples":6},{"kind":"oval","samples":6},{"kind":"rectangle","samples":6}]}}"#;
const FIT: &str = r#"{"schema_version":1,"global_ranks":[3,3],"local_ranks":[2,2],
    "ortho_modes":[1,2],"max_iters":8,"seed":11}"#;

#[test]
fn simulate_is_reproducible_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM);
    let out = run_in(dir.path(), &["simulate", "--config", "sim.json", "--out-dir", "a"]);
    assert!(out.status.success());
    let out = run_in(dir.path(), &["simulate", "--config", "sim.json", "--out-dir", "b"]);
    assert!(out.status.success());
    for n in 0..3 {
        let a = std::fs::read(dir.path().join(format!("a/source_{}.pten", n))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b/source_{}.pten", n))).unwrap();
        assert_eq!(a, b, "source {} differs between identical runs", n);
        // PTEN header: magic, version 1, K=3, dims 50×50×6
        assert_eq!(&a[..6], b"PTEN\x01\x03");
    }
    assert!(dir.path().join("a/run_manifest.json").exists());

    // default config produces the three 50x50x10 sources
    let out = run_in(dir.path(), &["simulate", "--out-dir", "default"]);
    assert!(out.status.success());
    let t = pertucker::pten::read_tensor_file(dir.path().join("default/source_0.pten")).unwrap();
    assert_eq!(t.dims(), &[50, 50, 10]);
    assert!(dir.path().join("default/source_2.pten").exists());
    assert!(!dir.path().join("default/source_3.pten").exists());
}

#[test]
fn config_errors_exit_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", r#"{"schema_version":1,"bogus":3}"#);
    let out = run_in(dir.path(), &["simulate", "--config", "bad.json", "--out-dir", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "diagnostic should name the key: {}", err);

    write(dir.path(), "broken.json", "{not json");
    let out = run_in(dir.path(), &["simulate", "--config", "broken.json", "--out-dir", "x"]);
    assert_eq!(out.status.code(), Some(2));

    // missing input file names the path
    write(dir.path(), "fit.json", FIT);
    let out = run_in(
        dir.path(),
        &["fit", "--config", "fit.json", "--data", "nothere.pten", "--out-dir", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothere.pten"));

    // infeasible ranks: global 3 + local 2 > 4 in a constrained mode
    write(dir.path(), "sim.json", SIM);
    assert!(run_in(dir.path(), &["simulate", "--config", "sim.json", "--out-dir", "sim"])
        .status
        .success());
    write(
        dir.path(),
        "infeasible.json",
        r#"{"schema_version":1,"global_ranks":[49,49],"local_ranks":[2,2],"ortho_modes":[1,2],"seed":1}"#,
    );
    let out = run_in(
        dir.path(),
        &["fit", "--config", "infeasible.json", "--dataset", "sim/dataset.json", "--out-dir", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("orthogonal complement"));

    // usage error from the parser itself
    let out = run_in(dir.path(), &["fit"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // hand-crafted PTEN with a NaN payload entry
    let mut bytes = b"PTEN\x01\x01".to_vec();
    bytes.extend_from_slice(&2u64.to_le_bytes());
    bytes.extend_from_slice(&1.0f64.to_le_bytes());
    bytes.extend_from_slice(&f64::NAN.to_le_bytes());
    std::fs::write(dir.path().join("nan.pten"), bytes).unwrap();
    write(dir.path(), "fit.json", FIT);
    let out = run_in(
        dir.path(),
        &["fit", "--config", "fit.json", "--data", "nan.pten", "--out-dir", "x"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_pipeline_reports_have_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.json", SIM);
    write(dir.path(), "fit.json", FIT);
    assert!(run_in(dir.path(), &["simulate", "--config", "sim.json", "--out-dir", "sim"])
        .status
        .success());
    assert!(run_in(
        dir.path(),
        &[
            "fit", "--config", "fit.json", "--dataset", "sim/dataset.json", "--truth",
            "sim/dataset.json", "--out-dir", "fit",
        ],
    )
    .status
    .success());

    let trace = std::fs::read_to_string(dir.path().join("fit/trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("iteration,objective,global_change_1,global_change_2"));
    assert!(header.contains("local_change_3_2"));
    assert_eq!(trace.lines().count(), 1 + 8);

    let eval = std::fs::read_to_string(dir.path().join("fit/eval.csv")).unwrap();
    assert!(eval.lines().next().unwrap().contains("denoised_error"));

    let out = run_in(
        dir.path(),
        &[
            "classify", "--model", "fit/model.ptmc", "--data", "sim/source_1.pten",
            "--class-names", "swiss,oval,rectangle", "--out-dir", "cls",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("cls/classify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    // oval stack: most samples should score the oval class
    let oval_wins = csv.lines().skip(1).filter(|l| l.contains(",oval,")).count();
    assert!(oval_wins >= 4, "only {}/6 oval wins", oval_wins);

    let out = run_in(
        dir.path(),
        &[
            "monitor", "--model", "fit/model.ptmc", "--data", "sim/source_0.pten",
            "--source", "1", "--train-window", "4", "--out-dir", "mon",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("mon/monitor.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);

    let out = run_in(
        dir.path(),
        &["cluster", "--model", "fit/model.ptmc", "--clusters", "2", "--out-dir", "clu"],
    );
    assert!(out.status.success());
    let d = std::fs::read_to_string(dir.path().join("clu/distances.csv")).unwrap();
    assert_eq!(d.lines().count(), 1 + 3);
    let e = std::fs::read_to_string(dir.path().join("clu/embedding.csv")).unwrap();
    assert_eq!(e.lines().next().unwrap(), "source,x,y");
}

#[test]
fn planted_dataset_fit_recovers_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "planted.json",
        r#"{"schema_version":1,"seed":3,"planted":{"sources":5,"shared_dims":[12,12,12],
            "samples_per_source":4,"global_ranks":[2,2,2],"local_ranks":[2,2,2],"ortho_modes":[1,2]}}"#,
    );
    write(
        dir.path(),
        "fit.json",
        r#"{"schema_version":1,"global_ranks":[2,2,2],"local_ranks":[2,2,2],
            "ortho_modes":[1,2],"max_iters":200,"init":"tucker","seed":3}"#,
    );
    assert!(run_in(dir.path(), &["simulate", "--config", "planted.json", "--out-dir", "sim"])
        .status
        .success());
    let out = run_in(
        dir.path(),
        &[
            "fit", "--config", "fit.json", "--dataset", "sim/dataset.json", "--truth",
            "sim/dataset.json", "--out-dir", "fit",
        ],
    );
    assert!(out.status.success());
    let eval = std::fs::read_to_string(dir.path().join("fit/eval.csv")).unwrap();
    let row = eval.lines().nth(1).unwrap();
    let global: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert!(global <= 1e-3, "global subspace error {}", global);
}

#[test]
fn single_repeat_benches_run_quickly_and_mark_missing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = run_in(
        dir.path(),
        &["bench-table1", "--repeats", "1", "--seed", "5", "--out-dir", "t1"],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("t1/table1.csv")).unwrap();
    let global_row = csv.lines().find(|l| l.starts_with("globalTucker")).unwrap();
    // empty cells where the method has no local component
    assert!(global_row.contains(",,,"), "expected empty fields: {}", global_row);
    let local_row = csv.lines().find(|l| l.starts_with("localTucker")).unwrap();
    assert!(local_row.starts_with("localTucker,,,"));

    let out = run_in(
        dir.path(),
        &[
            "bench-table2", "--repeats", "1", "--seed", "5", "--train-sizes", "10",
            "--out-dir", "t2",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("t2/table2.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
    assert!(
        start.elapsed().as_secs() < 300,
        "single-repeat benches took {:?}",
        start.elapsed()
    );
}
