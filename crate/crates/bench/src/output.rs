//! CSV emission. The summary header is a stable contract:
//! `sweep_var,sweep_value,scheme,det_prob_full,det_prob_device,ci_half,mean_iters,mean_delay,trials`.

use std::io::Write;

use crate::config::SweepVar;
use crate::error::BenchError;
use crate::experiment::TrialRecord;
use crate::summary::PointSummary;

pub const SUMMARY_HEADER: &str =
    "sweep_var,sweep_value,scheme,det_prob_full,det_prob_device,ci_half,mean_iters,mean_delay,trials";

pub const RECORDS_HEADER: &str = "sweep_value,scheme,trial,active,block_detection_exact,full_pattern_exact,\
device_successes,eventual_successes,decodes,iterations_sum,delay_sum,wall_us";

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn value(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

pub fn write_summary<W: Write>(mut w: W, var: Option<SweepVar>, rows: &[PointSummary]) -> Result<(), BenchError> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    let var = var.map_or("none", SweepVar::name);
    for r in rows {
        writeln!(
            w,
            "{var},{},{},{},{},{},{},{},{}",
            value(r.sweep_value),
            r.scheme,
            num(r.det_prob_full),
            num(r.det_prob_device),
            num(r.ci_half),
            num(r.mean_iters),
            num(r.mean_delay),
            r.trials
        )?;
    }
    Ok(())
}

/// Per-trial rows; the wall-time column makes this file nondeterministic.
pub fn write_records<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<(), BenchError> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            value(r.sweep_value),
            r.scheme,
            r.trial,
            r.active,
            r.block_detection_exact,
            r.full_pattern_exact,
            r.device_successes,
            r.eventual_successes,
            r.iterations.len(),
            r.iterations.iter().map(|&i| i as u64).sum::<u64>(),
            r.delay_units.iter().map(|&u| u as u64).sum::<u64>(),
            r.wall_ns / 1000
        )?;
    }
    Ok(())
}
