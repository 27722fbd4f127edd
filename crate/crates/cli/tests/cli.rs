use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use immortal_core::design_library::FigureId;

const CONFIG: &str = r#"
[scenario]
n_subjects = 2000
horizon = 4
frailty_prevalence = 0.3
award_probability = 0.5
award_delay = 0.4
base_death_hazard = 0.05
log_effect = 0.0
log_frailty_effect = 0.6931471805599453
eligibility_age = 2

[experiment]
replicates = 6
master_seed = 42
oracle_n = 5000

[[design]]
design = "ever_exposed_full"
estimator = "rate_ratio"

[[design]]
design = "time_dependent"
estimator = "discrete_hazard"

[[design]]
design = "ptdm"
estimator = "rate_ratio"
"#;

fn itbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itbias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_builtin_figure_checks_clean() {
    for f in FigureId::ALL {
        let o = itbias(&["dag", "check", f.as_str()]);
        assert_eq!(o.status.code(), Some(0), "{f}: {}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
}

#[test]
fn fig1b_is_confounding() {
    let o = itbias(&["dag", "check", "fig1b"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("classification: Confounding"));
}

#[test]
fn fig_s1_has_no_bias() {
    let o = itbias(&["dag", "check", "figS1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("classification: None"));
}

#[test]
fn missing_dag_file_is_a_data_error() {
    let o = itbias(&["dag", "check", "missing.dag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.dag"));
}

#[test]
fn unknown_builtin_is_a_usage_error() {
    let o = itbias(&["dag", "check", "fig9z"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unparsable_dag_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.dag");
    fs::write(&f, "E0 -> \n").unwrap();
    let o = itbias(&["dag", "check", path(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot parse"));
}

#[test]
fn dag_file_with_default_query() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("m.dag");
    fs::write(&f, "# M structure\nE0 -> C0\nU0 -> C0\nU0 -> D1\n[C0]\n").unwrap();
    let o = itbias(&["dag", "check", path(&f)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("classification: Selection"), "{text}");

    let o = itbias(&["dag", "check", path(&f), "--exposure", "U0", "--outcome", "D1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exposures: U0"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(itbias(&[]).status.code(), Some(1));
    assert_eq!(itbias(&["simulate", "--seed", "x"]).status.code(), Some(1));
    let o = itbias(&["experiment", "--config", "c.toml", "--format", "png"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    fs::write(&config, CONFIG).unwrap();
    let cohort = dir.path().join("cohort.csv");
    let o = itbias(&["simulate", "--config", path(&config), "--seed", "7", "--out", path(&cohort)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = fs::read(&cohort).unwrap();
    assert_eq!(fs::read_to_string(&cohort).unwrap().lines().count(), 2001);

    let o = itbias(&["simulate", "--config", path(&config), "--seed", "7", "--out", path(&cohort)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&cohort).unwrap(), first);

    let dataset = dir.path().join("dataset.csv");
    let o = itbias(&[
        "analyze",
        "--design",
        "survivor_eligibility",
        "--estimator",
        "discrete_hazard_adjusted",
        "--cohort",
        path(&cohort),
        "--horizon",
        "4",
        "--tau",
        "2",
        "--dataset-out",
        path(&dataset),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("design,estimator,log_value"));
    assert!(lines[1].starts_with("SurvivorEligibility,discrete_hazard_adjusted,"));
    assert!(fs::read_to_string(&dataset)
        .unwrap()
        .starts_with("subject,trial,t_start,t_stop,exposed,event,cr_event,weight"));
}

#[test]
fn analyze_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    fs::write(&config, CONFIG).unwrap();
    let cohort = dir.path().join("cohort.csv");
    itbias(&["simulate", "--config", path(&config), "--seed", "1", "--out", path(&cohort)]);
    let base = ["analyze", "--cohort", path(&cohort), "--horizon", "4", "--estimator", "rate_ratio"];

    let o = itbias(&[&base[..], &["--design", "nonsense"]].concat());
    assert_eq!(o.status.code(), Some(1));
    let o = itbias(&[&base[..], &["--design", "ptdm"]].concat());
    assert_eq!(o.status.code(), Some(2), "matching seed is required");
    let o = itbias(&[&base[..], &["--design", "ptdm", "--seed", "3"]].concat());
    assert_eq!(o.status.code(), Some(0));
    let o = itbias(&[&base[..], &["--design", "survivor_eligibility", "--tau", "9"]].concat());
    assert_eq!(o.status.code(), Some(2));
    let o = itbias(&["analyze", "--design", "ptdm", "--estimator", "rate_ratio", "--cohort", "nope.csv", "--horizon", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(&config, CONFIG).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = itbias(&["experiment", "--config", path(&config), "--out", path(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["report.csv", "report.svg", "provenance.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let svg = fs::read_to_string(a.join("report.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="marker""#).count(), 3);
}

#[test]
fn experiment_format_and_replicate_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("svg");
    let o = itbias(&[
        "experiment",
        "--config",
        path(&config),
        "--out",
        path(&out),
        "--replicates",
        "2",
        "--format",
        "svg",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("report.svg").exists());
    assert!(!out.join("report.csv").exists());
    let provenance = fs::read_to_string(out.join("provenance.txt")).unwrap();
    assert!(provenance.contains("replicates = 2"));
}

#[test]
fn invalid_experiment_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(&config, CONFIG.replace("oracle_n = 5000", "oracle_n = 5000\nsurprise = 1")).unwrap();
    let o = itbias(&["experiment", "--config", path(&config), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("surprise"));
}
