use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_blockcs-bench");

const SMALL: &str = "l = 8\nd = 8\nk_b = 2\nk_i = 2\nrows = 6\nstages = 12\ntrials = 30\nseed = 7\n\
                     schemes = proposed, std_omp, lte_ra, cluster_head\nsnr_db = 10\n";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn summary_goes_to_stdout_and_file_identically() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let out = dir.path().join("summary.csv");
    let stdout = run(&["--config", &conf]);
    assert!(stdout.status.success());
    let file = run(&["--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(file.status.success());
    let written = fs::read_to_string(&out).unwrap();
    assert_eq!(written, String::from_utf8(stdout.stdout).unwrap());
    let mut lines = written.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_var,sweep_value,scheme,det_prob_full,det_prob_device,ci_half,mean_iters,mean_delay,trials"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let one = run(&["--config", &conf, "--threads", "1", "--sweep", "k_b=1,2"]);
    let four = run(&["--config", &conf, "--threads", "4", "--sweep", "k_b=1,2"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let a = run(&["--config", &conf, "--seed", "8"]);
    let b = run(&["--config", &conf, "--seed", "8"]);
    let c = run(&["--config", &conf]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let trials = run(&["--config", &conf, "--trials", "5", "--schemes", "lte_ra"]);
    let text = String::from_utf8(trials.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",5"), "{text}");
}

#[test]
fn records_and_cdf_files() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let rec = dir.path().join("records.csv");
    let cdf = dir.path().join("cdf.csv");
    let out = run(&[
        "--config",
        &conf,
        "--records",
        rec.to_str().unwrap(),
        "--iteration-cdf",
        cdf.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&rec).unwrap().lines().count(), 1 + 4 * 30);
    let cdf = fs::read_to_string(&cdf).unwrap();
    let last: f64 = cdf
        .lines()
        .filter(|l| l.contains(",proposed,"))
        .last()
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((last - 1.0).abs() < 1e-9);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "l = 8\nd = 8\nunknown_key = 3\n");
    let bad_key = run(&["--config", &conf]);
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("line 3"));
    assert_eq!(run(&["--sweep", "nope=1"]).status.code(), Some(1));
    assert_eq!(run(&["--threads", "0"]).status.code(), Some(1));
    assert_eq!(run(&["--bogus-flag"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "/nonexistent/run.conf"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let out = run(&["--config", &conf, "--out", "/nonexistent/dir/summary.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(root).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let cfg = blockcs_bench::ExperimentConfig::parse(&text).unwrap();
        assert!(!cfg.points().unwrap().is_empty());
    }
}
