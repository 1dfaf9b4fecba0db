use std::path::Path;
use std::process::Command;

use gmclab::expcli::{read_record, Experiment, ExperimentConfig, GridSpec};

fn gmclab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmclab"))
}

fn write_config(dir: &Path, c: &ExperimentConfig) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, c.to_toml_string().unwrap()).unwrap();
    p
}

fn small_max_law() -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(Experiment::MaxLaw);
    c.n = 20_000;
    c
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_max_law());
    let out = dir.path().join("out");
    let st = gmclab().args(["max-law", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--seed", "4"]).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let rec = read_record(&out.join("record.json")).unwrap();
    assert_eq!(rec.config.seed, 4);
    assert_eq!(rec.experiment, "max-law");
    assert!(rec.passed());
    assert!(rec.metrics.contains_key("ks_distance[gamma=1.0000]"));
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("series,x,y,yerr\n"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default_for(Experiment::ZetaScaling);
    c.grid = GridSpec { n_bulk: 4, n_bdy: 8 };
    c.n = 500;
    c.options.slope_tol = 0.0;
    let cfg = write_config(dir.path(), &c);
    let st = gmclab().arg("zeta-scaling").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let rec = read_record(&dir.path().join("record.json")).unwrap();
    assert!(!rec.assertion("slope").unwrap().passed);
}

#[test]
fn mismatched_or_broken_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_max_law());
    let st = gmclab().arg("tail-fit").arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"max-law\"\ngamma = 3.0\n").unwrap();
    let st = gmclab().arg("max-law").arg("--config").arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default_for(Experiment::LocalityGap);
    c.grid = GridSpec { n_bulk: 6, n_bdy: 12 };
    c.n = 3000;
    let cfg = write_config(dir.path(), &c);
    let mut metrics = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let st = gmclab()
            .arg("locality-gap")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("GMCLAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.code() == Some(0) || st.code() == Some(1));
        metrics.push(read_record(&out.join("record.json")).unwrap().metrics);
    }
    assert_eq!(metrics[0], metrics[1]);
}

#[test]
fn print_config_round_trips() {
    let out = gmclab().args(["tail-fit", "--print-config", "--seed", "9"]).output().unwrap();
    assert!(out.status.success());
    let c = ExperimentConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let mut want = ExperimentConfig::default_for(Experiment::TailFit);
    want.seed = 9;
    assert_eq!(c, want);
}
