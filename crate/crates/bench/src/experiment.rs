//! Monte-Carlo trial execution.
//!
//! Seed derivation: trial `j` of sweep point `p` uses
//! `trial_seed = derive(master, [p, j])`. The activation pattern comes from
//! `stream(trial_seed, [0])` and is shared by all schemes; scheme `s` draws
//! everything else from `stream(trial_seed, [s.label()])`. Records are
//! produced in (point, trial, scheme) order whatever the thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use blockcs::baselines::{cluster_head_trial, lte_ra_trial, standard_omp, AccessOutcome, GaussianMatrix, StopRule};
use blockcs::channel::{acquire, listeners_for, sample_channels, sigma_for_power, snr_to_sigma, DuplexMode, NoiseParams,
    HEAD_OFFSET};
use blockcs::inblock::{build_problem, modified_omp_with, slot_for, InBlockDetection, OmpOptions};
use blockcs::model::generate_pattern_reserving;
use blockcs::scalar::dot;
use blockcs::seed::{derive, stream};
use blockcs::signature::{MatrixParams, StructuredMatrix};
use blockcs::sketch::{decode_with, default_threshold, resources_for, BsDetection, DecodeOptions};
use blockcs::{ActivationPattern, Error as CoreError, ModelParams};

use crate::config::{ExperimentConfig, PointParams, Scheme};
use crate::error::BenchError;

/// Outcome of one scheme on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub trial: usize,
    /// Number of truly active devices.
    pub active: usize,
    pub block_detection_exact: bool,
    pub full_pattern_exact: bool,
    /// Devices served by the first attempt.
    pub device_successes: usize,
    /// Devices served within the attempt limit.
    pub eventual_successes: usize,
    /// Iterations of every first-round decode.
    pub iterations: Vec<u32>,
    /// Per active device; empty for schemes without an access delay.
    pub delay_units: Vec<u32>,
    /// Excluded from every deterministic output.
    pub wall_ns: u64,
}

/// Runs every sweep point, trial and scheme. `threads = None` uses the
/// global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>, BenchError> {
    cfg.validate()?;
    let points = cfg.points()?;
    let work = || -> Result<Vec<TrialRecord>, BenchError> {
        let mut out = Vec::with_capacity(points.len() * cfg.trials * cfg.schemes.len());
        for (p, (value, params)) in points.iter().enumerate() {
            let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
                .into_par_iter()
                .map(|j| run_trial(cfg, params, p, *value, j))
                .collect::<Result<_, _>>()?;
            out.extend(per_trial.into_iter().flatten());
        }
        Ok(out)
    };
    match threads {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Runtime(format!("thread pool: {e}")))?
            .install(work),
    }
}

/// All schemes of one trial.
pub fn run_trial(
    cfg: &ExperimentConfig,
    pt: &PointParams,
    point: usize,
    sweep_value: Option<f64>,
    trial: usize,
) -> Result<Vec<TrialRecord>, BenchError> {
    let trial_seed = derive(cfg.seed, &[point as u64, trial as u64]);
    let reserved = (cfg.mode == DuplexMode::HalfDuplex).then_some(HEAD_OFFSET);
    let x = generate_pattern_reserving(
        &pt.model,
        pt.k_b,
        pt.k_i,
        cfg.size_policy,
        reserved,
        &mut stream(trial_seed, &[0]),
    )
    .map_err(|e| BenchError::Config(e.to_string()))?;
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let mut rng = stream(trial_seed, &[scheme.label()]);
            let start = Instant::now();
            let mut rec = match scheme {
                Scheme::Proposed => proposed_trial(cfg, pt, &x, &mut rng)?,
                Scheme::StdOmp => std_omp_trial(cfg, pt, &x, &mut rng)?,
                Scheme::LteRa => access_record(&lte_ra_trial(x.popcount(), &cfg.ra, &mut rng)?),
                Scheme::ClusterHead => {
                    access_record(&cluster_head_trial(&x, &cfg.ra, cfg.aggregation_overhead, &mut rng)?)
                }
            };
            rec.point = point;
            rec.sweep_value = sweep_value;
            rec.scheme = scheme;
            rec.trial = trial;
            rec.wall_ns = start.elapsed().as_nanos() as u64;
            Ok(rec)
        })
        .collect()
}

fn blank(active: usize) -> TrialRecord {
    TrialRecord {
        point: 0,
        sweep_value: None,
        scheme: Scheme::Proposed,
        trial: 0,
        active,
        block_detection_exact: false,
        full_pattern_exact: false,
        device_successes: 0,
        eventual_successes: 0,
        iterations: Vec::new(),
        delay_units: Vec::new(),
        wall_ns: 0,
    }
}

fn access_record(out: &AccessOutcome) -> TrialRecord {
    let mut rec = blank(out.succeeded.len());
    rec.device_successes = out.first_attempt_successes();
    rec.eventual_successes = out.successes();
    rec.full_pattern_exact = rec.device_successes == rec.active;
    rec.block_detection_exact = rec.full_pattern_exact;
    rec.delay_units = out.delay_units.clone();
    rec
}

/// Result of one acquisition/decoding round of the proposed protocol.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub block_detection_exact: bool,
    pub full_pattern_exact: bool,
    /// Aligned with `x.active_devices()`.
    pub served: Vec<bool>,
    pub iterations: Vec<u32>,
}

/// Shared state of the proposed protocol within one trial.
pub struct Protocol<'a> {
    pub model: &'a ModelParams,
    pub matrix: &'a StructuredMatrix<f64>,
    pub noise: NoiseParams<f64>,
    pub decode: DecodeOptions<f64>,
    pub omp: OmpOptions,
    pub cfg: &'a ExperimentConfig,
}

impl Protocol<'_> {
    /// Acquisition, BS decoding, broadcast, listener decoding and slot
    /// claims for the devices active in `x`.
    pub fn round<R: Rng + ?Sized>(&self, x: &ActivationPattern, rng: &mut R) -> Result<RoundOutcome, BenchError> {
        let m = self.matrix;
        let mode = self.cfg.mode;
        let listeners = listeners_for(x, mode);
        let ch = sample_channels(self.model, m.stages(), &listeners, &self.cfg.channel, rng)?;
        let acq = acquire(m, x, &ch, &self.noise, mode, rng)?;
        let (bs, _) = decode_with(m, &acq.y_bs, &self.decode)?;
        // Devices act on the broadcast message, not on decoder internals.
        let heard = BsDetection::<f64>::from_broadcast(&bs.to_broadcast(), m.blocks())?;
        let grant = resources_for(&heard);
        let block_exact = heard.counts() == x.counts().as_slice();

        let d = m.block_size();
        let mut decodes: BTreeMap<usize, Option<InBlockDetection<f64>>> = BTreeMap::new();
        let mut full_exact = block_exact;
        let mut iterations = Vec::new();
        for &node in &listeners {
            let block = node / d;
            let det = if heard.count(block) == 0 {
                None
            } else {
                let y = acq
                    .observation(node)
                    .ok_or_else(|| BenchError::Runtime(format!("no observation for node {}", node + 1)))?;
                match build_problem(m, &ch.effective_gains(node)?, y, block, &heard) {
                    Ok(p) => Some(modified_omp_with(&p, &self.omp)?),
                    Err(CoreError::NoEffectiveMeasurements(_)) => None,
                    Err(e) => return Err(e.into()),
                }
            };
            if let Some(det) = &det {
                iterations.push(det.iterations as u32);
            }
            full_exact &= det.as_ref().is_some_and(|det| det.support == x.in_block_support(block));
            decodes.insert(node, det);
        }

        let actives = x.active_devices();
        let claims: Vec<Option<usize>> = actives
            .iter()
            .map(|&i| {
                let block = i / d;
                let listener = match mode {
                    DuplexMode::FullDuplex => i,
                    DuplexMode::HalfDuplex => block * d + HEAD_OFFSET,
                };
                decodes
                    .get(&listener)
                    .and_then(|det| det.as_ref())
                    .and_then(|det| slot_for(det, i % d, grant.slots_for(block)).ok())
            })
            .collect();
        let mut occupancy: BTreeMap<usize, usize> = BTreeMap::new();
        for slot in claims.iter().flatten() {
            *occupancy.entry(*slot).or_default() += 1;
        }
        let served = claims
            .iter()
            .map(|c| c.is_some_and(|s| occupancy[&s] == 1))
            .collect();
        Ok(RoundOutcome {
            block_detection_exact: block_exact,
            full_pattern_exact: full_exact,
            served,
            iterations,
        })
    }
}

/// Proposed scheme with retries: unserved devices transmit again in the
/// next round (same signatures, fresh channels and noise). The delay of a
/// device is the round that served it, or `max_attempts` if none did.
fn proposed_trial(
    cfg: &ExperimentConfig,
    pt: &PointParams,
    x: &ActivationPattern,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecord, BenchError> {
    let params = MatrixParams::new(pt.rows, pt.stages, x.blocks(), x.block_size(), cfg.alpha)?;
    let matrix = StructuredMatrix::sample(params, rng)?;
    let sigma = match pt.snr_db {
        None => 0.0,
        Some(snr) => snr_to_sigma(snr, &matrix, (pt.k_b * pt.k_i).max(1))?,
    };
    let noise = if sigma == 0.0 {
        NoiseParams::noiseless()
    } else {
        NoiseParams::with_sigma(sigma)?
    };
    let decode = DecodeOptions {
        collision_threshold: cfg.collision_threshold.unwrap_or_else(|| default_threshold(cfg.alpha, sigma)),
        rule: cfg.collision_rule,
    };
    let proto = Protocol {
        model: &pt.model,
        matrix: &matrix,
        noise,
        decode,
        omp: OmpOptions {
            normalize: cfg.normalize,
        },
        cfg,
    };

    let actives = x.active_devices();
    let mut rec = blank(actives.len());
    rec.delay_units = vec![cfg.ra.max_attempts; actives.len()];
    let mut served = vec![false; actives.len()];
    let mut pending: Vec<usize> = (0..actives.len()).collect();
    for round in 1..=cfg.ra.max_attempts {
        if pending.is_empty() {
            break;
        }
        let devices: Vec<usize> = pending.iter().map(|&k| actives[k]).collect();
        let sub = ActivationPattern::from_devices(x.blocks(), x.block_size(), &devices)?;
        let out = proto.round(&sub, rng)?;
        if round == 1 {
            rec.block_detection_exact = out.block_detection_exact;
            rec.full_pattern_exact = out.full_pattern_exact;
            rec.iterations = out.iterations;
            rec.device_successes = out.served.iter().filter(|&&s| s).count();
        }
        let mut still = Vec::new();
        for (&k, ok) in pending.iter().zip(out.served) {
            if ok {
                served[k] = true;
                rec.delay_units[k] = round;
            } else {
                still.push(k);
            }
        }
        pending = still;
    }
    rec.eventual_successes = served.iter().filter(|&&s| s).count();
    Ok(rec)
}

/// Residual-stopped OMP on an i.i.d. Gaussian matrix of the same `M x N`,
/// with noise set from the same SNR at per-entry signal power `K / M`.
fn std_omp_trial(
    cfg: &ExperimentConfig,
    pt: &PointParams,
    x: &ActivationPattern,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecord, BenchError> {
    let m = pt.measurements();
    let a = GaussianMatrix::<f64>::sample(m, x.devices(), rng)?;
    let mut y = a.measure(x)?;
    let sigma = match pt.snr_db {
        None => 0.0,
        Some(snr) => sigma_for_power((pt.k_b * pt.k_i).max(1) as f64 / m as f64, snr),
    };
    if sigma > 0.0 {
        for v in &mut y {
            let e: f64 = StandardNormal.sample(rng);
            *v += sigma * e;
        }
    }
    let cap = if cfg.std_omp_max_iters == 0 { m } else { cfg.std_omp_max_iters };
    let mut stop = StopRule::for_noise(sigma, m, dot(&y, &y).sqrt(), cap.min(x.devices()));
    stop.normalize = cfg.normalize;
    let out = standard_omp(&a, &y, &stop)?;

    let truth = x.active_devices();
    let mut rec = blank(truth.len());
    rec.device_successes = truth.iter().filter(|i| out.support.binary_search(i).is_ok()).count();
    rec.eventual_successes = rec.device_successes;
    rec.full_pattern_exact = out.support == truth;
    let d = x.block_size();
    let mut blocks: Vec<usize> = out.support.iter().map(|&i| i / d).collect();
    blocks.dedup();
    rec.block_detection_exact = blocks == x.block_support();
    rec.iterations = vec![out.iterations as u32];
    Ok(rec)
}
