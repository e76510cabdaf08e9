use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use blockcs_bench::output::{write_records, write_summary};
use blockcs_bench::{iteration_cdf, run_experiment, summarize, BenchError, ExperimentConfig};

/// Monte-Carlo driver: sweeps, aggregation and CSV output.
#[derive(Debug, Parser)]
#[command(name = "blockcs-bench", version)]
struct Cli {
    /// Key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Summary CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of proposed, std_omp, lte_ra, cluster_head.
    #[arg(long)]
    schemes: Option<String>,
    /// `var=v1,v2,...` with var one of m, t, r, k, k_b, k_i, snr_db, d, l.
    #[arg(long)]
    sweep: Option<String>,
    /// full_duplex or half_duplex.
    #[arg(long)]
    mode: Option<String>,
    /// BS collision threshold, or `auto`.
    #[arg(long)]
    collision_threshold: Option<String>,
    /// Score OMP atoms by raw instead of normalized correlation.
    #[arg(long)]
    no_normalize: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-trial records (includes wall time).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Also write the iteration CDF of the proposed scheme.
    #[arg(long)]
    iteration_cdf: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("seed", cli.seed.map(|s| s.to_string())),
        ("trials", cli.trials.map(|t| t.to_string())),
        ("schemes", cli.schemes.clone()),
        ("sweep", cli.sweep.clone()),
        ("mode", cli.mode.clone()),
        ("collision_threshold", cli.collision_threshold.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if cli.no_normalize {
        cfg.normalize = false;
    }
    if cli.threads == Some(0) {
        return Err(BenchError::Config("threads must be >= 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, BenchError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), BenchError> {
    let cfg = load(cli)?;
    let records = run_experiment(&cfg, cli.threads)?;
    let rows = summarize(&records)?;
    let var = cfg.sweep.as_ref().map(|s| s.var);
    match &cli.out {
        Some(path) => {
            let mut w = create(path)?;
            write_summary(&mut w, var, &rows)?;
            w.flush()?;
        }
        None => write_summary(io::stdout().lock(), var, &rows)?,
    }
    if let Some(path) = &cli.records {
        let mut w = create(path)?;
        write_records(&mut w, &records)?;
        w.flush()?;
    }
    if let Some(path) = &cli.iteration_cdf {
        let mut w = create(path)?;
        writeln!(w, "sweep_value,scheme,iterations,cdf")?;
        for row in &rows {
            let group = records.iter().filter(|r| r.point == row.point && r.scheme == row.scheme);
            if let Ok(cdf) = iteration_cdf(group) {
                let v = row.sweep_value.map_or_else(String::new, |v| v.to_string());
                for (it, p) in cdf {
                    writeln!(w, "{v},{},{it},{p:.6}", row.scheme)?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage problems are configuration errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blockcs-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
