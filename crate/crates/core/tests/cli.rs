use hpo::cli::{cmd_benchmark, cmd_nested, cmd_report, cmd_tune, CliError, Overrides};
use hpo::exec::Level;
use hpo::objective::Archive;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn overrides(config: PathBuf, out: &Path) -> Overrides {
    Overrides { config, out: Some(out.to_path_buf()), ..Overrides::default() }
}

const TUNE_KNN: &str = r#"
seed = 5
learner = "knn"
[task]
bundled = "smooth"
[tuner]
kind = "random"
[termination]
max_evals = 20
"#;

#[test]
fn tune_writes_matching_archive_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let (summary, dir) = cmd_tune(&overrides(write_config(tmp.path(), TUNE_KNN), &out)).unwrap();
    assert_eq!(summary.evals, 20);
    assert_eq!(dir, out);
    let jsonl = fs::read_to_string(out.join("archive.jsonl")).unwrap();
    let csv = fs::read_to_string(out.join("archive.csv")).unwrap();
    assert_eq!(jsonl.lines().count(), 20);
    assert_eq!(csv.lines().count(), 21);
    let archive = Archive::read_jsonl(jsonl.as_bytes()).unwrap();
    assert_eq!(archive.len(), 20);
    assert_eq!(archive.incumbent().unwrap().score, summary.score.unwrap());
    for f in ["trace.csv", "summary.json", "timings.csv", "metadata.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = cmd_report(Some(&out), None).unwrap();
    assert!(report.starts_with("20 evaluations"), "{report}");
    assert!(out.join("report.txt").exists());
}

#[test]
fn bo_trace_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 2
[task]
synthetic = { function = "sphere", dim = 2 }
[tuner]
kind = "bo"
[termination]
max_evals = 30
"#;
    let out = tmp.path().join("out");
    cmd_tune(&overrides(write_config(tmp.path(), cfg), &out)).unwrap();
    let mut r = csv::Reader::from_path(out.join("trace.csv")).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "best").unwrap();
    let best: Vec<f64> = r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(best.len(), 30);
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn tune_is_identical_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TUNE_KNN);
    let mut files = Vec::new();
    for (workers, level) in [(1, Level::Config), (4, Level::Fold), (4, Level::Combined)] {
        let out = tmp.path().join(format!("out-{workers}-{level:?}"));
        let o = Overrides { workers: Some(workers), level: Some(level), ..overrides(cfg.clone(), &out) };
        cmd_tune(&o).unwrap();
        files.push((fs::read(out.join("archive.jsonl")).unwrap(), fs::read(out.join("summary.json")).unwrap()));
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn missing_seed_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &TUNE_KNN.replace("seed = 5", ""));
    let err = cmd_tune(&overrides(cfg.clone(), &out)).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert!(err.to_string().contains("seed"));
    assert!(!out.exists());

    let status = Command::new(env!("CARGO_BIN_EXE_hpo"))
        .args(["tune", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("seed"));
    assert!(!out.exists());

    // --seed supplies it
    let o = Overrides { seed: Some(9), ..overrides(cfg, &out) };
    assert_eq!(cmd_tune(&o).unwrap().0.seed, 9);
}

const NESTED: &str = r#"
seed = 4
learner = "knn"
[task]
bundled = "separable"
[tuner]
kind = "random"
[inner]
method = "cv"
folds = 2
[outer]
method = "cv"
folds = 3
[termination]
max_evals = 4
"#;

#[test]
fn nested_structure_and_worker_equivalence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), NESTED);
    let mut docs = Vec::new();
    for (workers, level) in [(1, Level::Config), (4, Level::Outer), (4, Level::Batch)] {
        let out = tmp.path().join(format!("n-{workers}-{level:?}"));
        let o = Overrides { workers: Some(workers), level: Some(level), ..overrides(cfg.clone(), &out) };
        let (report, _) = cmd_nested(&o).unwrap();
        assert_eq!(report.folds.len(), 3);
        for f in &report.folds {
            assert_eq!(f.evals, 4);
            assert!(f.config.is_some() && f.score.is_some() && f.error.is_none());
            let a = Archive::read_jsonl(fs::read(out.join(format!("inner_archive_{}.jsonl", f.fold))).unwrap().as_slice()).unwrap();
            // one entry per configuration and inner split
            assert_eq!(a.len(), 4);
        }
        let doc: serde_json::Value = serde_json::from_slice(&fs::read(out.join("nested.json")).unwrap()).unwrap();
        assert_eq!(doc["inner_archives"].as_array().unwrap().len(), 3);
        let text = cmd_report(Some(&out), None).unwrap();
        assert_eq!(text, fs::read_to_string(out.join("nested.txt")).unwrap());
        docs.push(fs::read(out.join("nested.json")).unwrap());
    }
    assert!(docs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn nested_needs_outer_resampling() {
    let tmp = tempfile::tempdir().unwrap();
    let text = NESTED.replace("[outer]\nmethod = \"cv\"\nfolds = 3\n", "");
    let err = cmd_nested(&overrides(write_config(tmp.path(), &text), &tmp.path().join("o"))).unwrap_err();
    assert!(err.to_string().contains("outer"), "{err}");
}

const SUITE: &str = r#"
seed = 1
replications = 4
checkpoints = [5, 10, 20]
[task]
synthetic = { function = "branin" }
[termination]
max_evals = 20
[[tuners]]
tuner = { kind = "random" }
[[tuners]]
tuner = { kind = "bo" }
"#;

#[test]
fn benchmark_writes_traces_and_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let (result, _) = cmd_benchmark(&overrides(write_config(tmp.path(), SUITE), &out)).unwrap();
    assert_eq!(result.runs.len(), 2);
    assert!(result.runs.iter().all(|r| r.len() == 4));
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    // header plus 20 points for each tuner and replication
    assert_eq!(traces.lines().count(), 1 + 2 * 4 * 20);
    let checkpoints = fs::read_to_string(out.join("checkpoints.csv")).unwrap();
    assert_eq!(checkpoints.lines().count(), 1 + 2 * 3);
    let table = fs::read_to_string(out.join("benchmark.txt")).unwrap();
    assert!(table.contains("random") && table.contains("bo"));
}

#[test]
fn benchmark_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let one = SUITE.replace("[[tuners]]\ntuner = { kind = \"bo\" }\n", "");
    let err = cmd_benchmark(&overrides(write_config(tmp.path(), &one), &tmp.path().join("x"))).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    let mismatched = SUITE.replace("tuner = { kind = \"bo\" }", "tuner = { kind = \"bo\" }\ntermination = { max_evals = 10 }");
    let err = cmd_benchmark(&overrides(write_config(tmp.path(), &mismatched), &tmp.path().join("x"))).unwrap_err();
    assert!(err.to_string().contains("mismatched budgets"), "{err}");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("benchmark") {
            let s: hpo::cli::SuiteConfig = hpo::cli::config::load(&path).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        } else {
            let c: hpo::cli::RunConfig = hpo::cli::config::load(&path).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        n += 1;
    }
    assert!(n >= 4);
}
