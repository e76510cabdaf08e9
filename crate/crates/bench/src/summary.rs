//! Aggregation of trial records into per-point statistics.

use crate::config::Scheme;
use crate::error::BenchError;
use crate::experiment::TrialRecord;

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959963984540054;

/// Aggregates of one (sweep point, scheme) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub trials: usize,
    /// Fraction of trials with every device recovered (first attempt).
    pub det_prob_full: f64,
    /// Fraction of active devices served by the first attempt.
    pub det_prob_device: f64,
    /// Fraction of active devices served within the attempt limit.
    pub eventual_prob_device: f64,
    /// Wilson 95% half-width on `det_prob_full`.
    pub ci_half: f64,
    /// NaN when the scheme has no decoder iterations.
    pub mean_iters: f64,
    /// NaN when the scheme has no access delay.
    pub mean_delay: f64,
}

/// Wilson score interval `(low, high)` for `successes` out of `n`.
pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // The bounds touch 0 and 1 exactly at the edges; avoid rounding residue.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Groups records by (point, scheme), keeping the order of first
/// appearance.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<PointSummary>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Runtime("no trial records to summarize".into()));
    }
    let mut keys: Vec<(usize, Scheme)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.point, r.scheme)) {
            keys.push((r.point, r.scheme));
        }
    }
    Ok(keys
        .into_iter()
        .map(|(point, scheme)| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.point == point && r.scheme == scheme).collect();
            let trials = group.len();
            let full = group.iter().filter(|r| r.full_pattern_exact).count();
            let active: u64 = group.iter().map(|r| r.active as u64).sum();
            let first: u64 = group.iter().map(|r| r.device_successes as u64).sum();
            let eventual: u64 = group.iter().map(|r| r.eventual_successes as u64).sum();
            let iters: u64 = group.iter().flat_map(|r| &r.iterations).map(|&i| i as u64).sum();
            let decodes: u64 = group.iter().map(|r| r.iterations.len() as u64).sum();
            let delay: u64 = group.iter().flat_map(|r| &r.delay_units).map(|&u| u as u64).sum();
            let delayed: u64 = group.iter().map(|r| r.delay_units.len() as u64).sum();
            let (lo, hi) = wilson(full, trials, Z95);
            PointSummary {
                point,
                sweep_value: group[0].sweep_value,
                scheme,
                trials,
                det_prob_full: full as f64 / trials as f64,
                det_prob_device: ratio(first, active),
                eventual_prob_device: ratio(eventual, active),
                ci_half: (hi - lo) / 2.0,
                mean_iters: ratio(iters, decodes),
                mean_delay: ratio(delay, delayed),
            }
        })
        .collect())
}

/// Empirical CDF of decoder iteration counts as `(iterations, P[X <= it])`,
/// one point per distinct value.
pub fn iteration_cdf<'a, I>(records: I) -> Result<Vec<(u32, f64)>, BenchError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut all: Vec<u32> = records.into_iter().flat_map(|r| r.iterations.iter().copied()).collect();
    if all.is_empty() {
        return Err(BenchError::Runtime("no decodes to build an iteration CDF from".into()));
    }
    all.sort_unstable();
    let n = all.len() as f64;
    let mut cdf = Vec::new();
    for (i, &v) in all.iter().enumerate() {
        if all.get(i + 1) != Some(&v) {
            cdf.push((v, (i + 1) as f64 / n));
        }
    }
    Ok(cdf)
}
