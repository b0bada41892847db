//! Command-line behavior: argument handling, exit codes, error wording,
//! and an end-to-end run against an embedded SQLite database.

use std::fs;
use std::path::Path;
use std::process::Command;

fn dwbench(args: &[&str]) -> (bool, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_dwbench"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.success(),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Small snowflake the SQLite tests can load in milliseconds. PROB_OLAP 0
/// keeps the workload to plain extractions, which SQLite can execute.
const TINY_EXTRACTION_CONFIG: &str = r#"
seed = 21

[low_level]
[[low_level.fact_table]]
NB_DIM = 2
NB_MEAS = 2
DENSITY = 0.7

[[low_level.dimension]]
NB_LEVELS = 2
NB_ATT = [2, 2]
HHLEVEL_SIZE = 3
DIM_SFACTOR = 4

[[low_level.dimension]]
NB_LEVELS = 1
NB_ATT = [2]
HHLEVEL_SIZE = 9

[workload]
NB_Q = 15
PROB_OLAP = 0.0

[output]
format = "sql"
"#;

#[test]
fn estimate_prints_the_size_table() {
    let (ok, stdout, _) = dwbench(&["estimate", "--preset", "dw1"]);
    assert!(ok);
    assert!(stdout.contains("snowflake schema from preset dw1"));
    assert!(stdout.contains("DIM2_3"));
    assert!(stdout.contains("total"));
}

#[test]
fn unknown_preset_fails_with_the_available_names() {
    let (ok, _, stderr) = dwbench(&["estimate", "--preset", "dw9"]);
    assert!(!ok);
    assert!(stderr.contains("unknown preset dw9"), "{stderr}");
    assert!(stderr.contains("dw1, dw2, dw3"), "{stderr}");
}

#[test]
fn derived_workload_parameters_fail_with_a_pointer_to_the_real_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "bad.toml", "[workload]\nPROB_EXTRACT = 0.2\n");
    let (ok, _, stderr) = dwbench(&["estimate", "--config", &config]);
    assert!(!ok);
    assert!(stderr.contains("derived parameter"), "{stderr}");
    assert!(stderr.contains("PROB_OLAP"), "{stderr}");
}

#[test]
fn invalid_parameters_list_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "invalid.toml",
        "[low_level]\n\
         [[low_level.fact_table]]\n\
         NB_DIM = 1\nNB_MEAS = 0\nDENSITY = 1.5\n\
         [[low_level.dimension]]\n\
         NB_LEVELS = 2\nNB_ATT = [1]\nHHLEVEL_SIZE = 4\n",
    );
    let (ok, _, stderr) = dwbench(&["estimate", "--config", &config]);
    assert!(!ok);
    assert!(stderr.contains("invalid parameters"), "{stderr}");
    assert!(stderr.contains("DENSITY"), "{stderr}");
    assert!(stderr.contains("NB_MEAS"), "{stderr}");
    assert!(stderr.contains("NB_ATT"), "{stderr}");
    assert!(stderr.contains("DIM_SFACTOR"), "{stderr}");
}

#[test]
fn workload_without_a_manifest_points_at_generate() {
    let tmp = tempfile::tempdir().unwrap();
    let (ok, _, stderr) = dwbench(&["workload", "--out", tmp.path().to_str().unwrap()]);
    assert!(!ok);
    assert!(stderr.contains("no manifest found"), "{stderr}");
    assert!(stderr.contains("generate the warehouse first"), "{stderr}");
}

#[test]
fn oversized_fact_tables_are_refused_with_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "big.toml",
        "[low_level]\n\
         [[low_level.fact_table]]\n\
         NB_DIM = 2\nNB_MEAS = 1\nDENSITY = 0.5\n\
         [[low_level.dimension]]\n\
         NB_LEVELS = 1\nNB_ATT = [1]\nHHLEVEL_SIZE = 100\n\
         [[low_level.dimension]]\n\
         NB_LEVELS = 1\nNB_ATT = [1]\nHHLEVEL_SIZE = 100\n",
    );
    let out = tmp.path().join("wh");
    let (ok, _, stderr) = dwbench(&[
        "generate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--max-combinations",
        "9999",
    ]);
    assert!(!ok);
    assert!(stderr.contains("10000"), "{stderr}");
    assert!(stderr.contains("raise the combination cap"), "{stderr}");
}

#[test]
fn sqlite_runs_an_extraction_workload_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_EXTRACTION_CONFIG);
    let out = tmp.path().join("wh");
    let out_s = out.to_str().unwrap();

    let (ok, stdout, stderr) = dwbench(&["generate", "--config", &config, "--out", out_s]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("format sql"), "{stdout}");
    let (ok, stdout, stderr) = dwbench(&["workload", "--out", out_s]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("queries"), "{stdout}");

    let workload = out.join("workload.sql");
    let csv = tmp.path().join("times.csv");
    let (ok, stdout, stderr) = dwbench(&[
        "execute",
        "--workload",
        workload.to_str().unwrap(),
        "--connection",
        "sqlite::memory:",
        "--warehouse",
        out_s,
        "--load",
        "--runs",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(ok, "execute failed:\n{stdout}\n{stderr}");
    assert!(stdout.contains(", 0 failed,"), "{stdout}");
    assert!(
        !stderr.contains("warning"),
        "no fingerprint warning expected: {stderr}"
    );

    let csv_text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines[0], "query_id,run_index,elapsed_ms,status");
    // 15 queries, 2 runs each, plus the header.
    assert_eq!(lines.len(), 31, "{csv_text}");
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")), "{csv_text}");
}

#[test]
fn loading_a_flat_file_warehouse_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "dat.toml",
        &TINY_EXTRACTION_CONFIG.replace("format = \"sql\"", "format = \"dat\""),
    );
    let out = tmp.path().join("wh");
    let out_s = out.to_str().unwrap();
    let (ok, _, stderr) = dwbench(&["generate", "--config", &config, "--out", out_s]);
    assert!(ok, "{stderr}");
    let (ok, _, stderr) = dwbench(&["workload", "--out", out_s]);
    assert!(ok, "{stderr}");
    let workload = out.join("workload.sql");
    let (ok, _, stderr) = dwbench(&[
        "execute",
        "--workload",
        workload.to_str().unwrap(),
        "--connection",
        "sqlite::memory:",
        "--warehouse",
        out_s,
        "--load",
    ]);
    assert!(!ok);
    assert!(stderr.contains("--format sql"), "{stderr}");
}

#[test]
fn mismatched_schema_fingerprint_warns_but_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_EXTRACTION_CONFIG);
    let other_config = write_config(
        tmp.path(),
        "other.toml",
        &TINY_EXTRACTION_CONFIG.replace("HHLEVEL_SIZE = 9", "HHLEVEL_SIZE = 7"),
    );
    let wh_a = tmp.path().join("a");
    let wh_b = tmp.path().join("b");
    for (config, dir) in [(&config, &wh_a), (&other_config, &wh_b)] {
        let (ok, _, stderr) = dwbench(&[
            "generate",
            "--config",
            config,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(ok, "{stderr}");
        let (ok, _, stderr) = dwbench(&["workload", "--out", dir.to_str().unwrap()]);
        assert!(ok, "{stderr}");
    }

    let workload_a = wh_a.join("workload.sql");
    let (ok, _, stderr) = dwbench(&[
        "execute",
        "--workload",
        workload_a.to_str().unwrap(),
        "--connection",
        "grammar:",
        "--warehouse",
        wh_b.to_str().unwrap(),
    ]);
    assert!(ok, "mismatch must warn, not fail: {stderr}");
    assert!(stderr.contains("warning"), "{stderr}");
    assert!(stderr.contains("schema"), "{stderr}");
}

#[test]
fn report_prints_gains_from_timing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = tmp.path().join("reference.csv");
    let candidate = tmp.path().join("tuned.csv");
    fs::write(
        &reference,
        "query_id,run_index,elapsed_ms,status\nQ1,1,200,ok\nQ2,1,100,ok\n",
    )
    .unwrap();
    fs::write(
        &candidate,
        "query_id,run_index,elapsed_ms,status\nQ1,1,100,ok\nQ2,1,100,ok\n",
    )
    .unwrap();

    let (ok, stdout, stderr) = dwbench(&[
        "report",
        "--reference",
        reference.to_str().unwrap(),
        "--candidate",
        candidate.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("reference"), "{stdout}");
    assert!(stdout.contains("tuned"), "{stdout}");
    // 1 - 200/300
    assert!(stdout.contains("33.3%"), "{stdout}");
    assert!(stdout.contains("gain (total time)"), "{stdout}");
    assert!(stdout.contains("gain (per-query mean)"), "{stdout}");
    // Per-query mean: (0.5 + 0.0) / 2.
    assert!(stdout.contains("25.0%"), "{stdout}");

    let (ok, stdout, _) = dwbench(&[
        "report",
        "--reference",
        reference.to_str().unwrap(),
        "--candidate",
        candidate.to_str().unwrap(),
        "--csv",
    ]);
    assert!(ok);
    assert!(stdout.starts_with("query_id,reference,tuned"), "{stdout}");
    assert!(stdout.contains("gain_total_time,"), "{stdout}");

    // Timings with errors cannot be compared.
    let dirty = tmp.path().join("dirty.csv");
    fs::write(
        &dirty,
        "query_id,run_index,elapsed_ms,status\nQ1,1,200,ok\nQ2,1,100,error: no such table\n",
    )
    .unwrap();
    let (ok, _, stderr) = dwbench(&[
        "report",
        "--reference",
        reference.to_str().unwrap(),
        "--candidate",
        dirty.to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.contains("error status"), "{stderr}");
}

#[test]
fn seed_defaults_to_zero_and_the_flag_overrides_the_file() {
    let (ok, stdout, _) = dwbench(&["estimate", "--preset", "dw3"]);
    assert!(ok);
    assert!(stdout.contains("seed 0"), "{stdout}");

    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "tiny.toml", TINY_EXTRACTION_CONFIG);
    // The config pins seed 21; the flag must override it.
    let out = tmp.path().join("wh");
    let (ok, stdout, stderr) = dwbench(&[
        "generate",
        "--config",
        &config,
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("seed 4"), "{stdout}");
    let manifest = dwbench_core::emit::read_manifest(&out).unwrap();
    assert_eq!(manifest.seed, 4);
}
