//! Experiment configuration: a flat `key = value` text format plus CLI
//! overrides, resolved into concrete per-point parameters.

use std::fmt;
use std::str::FromStr;

use blockcs::baselines::RaParams;
use blockcs::channel::{ChannelConfig, DuplexMode};
use blockcs::signature::{rows_required, stages_required};
use blockcs::sketch::CollisionRule;
use blockcs::{ModelParams, SizePolicy};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    StdOmp,
    LteRa,
    ClusterHead,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::StdOmp, Scheme::LteRa, Scheme::ClusterHead];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::StdOmp => "std_omp",
            Scheme::LteRa => "lte_ra",
            Scheme::ClusterHead => "cluster_head",
        }
    }

    pub(crate) fn label(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown scheme `{s}` (expected proposed, std_omp, lte_ra or cluster_head)")))
    }
}

/// Variables a sweep can range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Total measurements; the stage count becomes `m / R`.
    M,
    T,
    R,
    /// Total sparsity; `K_B = K / K_I`.
    K,
    KB,
    KI,
    SnrDb,
    D,
    L,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::M => "m",
            SweepVar::T => "t",
            SweepVar::R => "r",
            SweepVar::K => "k",
            SweepVar::KB => "k_b",
            SweepVar::KI => "k_i",
            SweepVar::SnrDb => "snr_db",
            SweepVar::D => "d",
            SweepVar::L => "l",
        }
    }
}

impl FromStr for SweepVar {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        Ok(match s {
            "m" => SweepVar::M,
            "t" => SweepVar::T,
            "r" => SweepVar::R,
            "k" => SweepVar::K,
            "k_b" => SweepVar::KB,
            "k_i" => SweepVar::KI,
            "snr_db" => SweepVar::SnrDb,
            "d" => SweepVar::D,
            "l" => SweepVar::L,
            other => {
                return Err(BenchError::Config(format!(
                    "unknown sweep variable `{other}` (expected m, t, r, k, k_b, k_i, snr_db, d or l)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = BenchError;
    /// `var=v1,v2,...`
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let (var, list) = s
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("sweep `{s}` is not of the form var=v1,v2,...")))?;
        let var: SweepVar = var.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| parse_f64("sweep value", v.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(BenchError::Config("sweep needs at least one value".into()));
        }
        Ok(Sweep { var, values })
    }
}

/// How the matrix dimensions are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sizing {
    Explicit { rows: usize, stages: usize },
    /// `R = ceil((K_B - 1) / (1 - theta))`, `T = ceil(log2(L d / delta))`.
    Derived { theta: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub blocks: usize,
    pub block_size: usize,
    pub k_b: usize,
    pub k_i: usize,
    pub size_policy: SizePolicy,
    /// Explicit values override the derived ones individually.
    pub rows: Option<usize>,
    pub stages: Option<usize>,
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub mode: DuplexMode,
    pub channel: ChannelConfig,
    /// `None` uses `alpha^2 / 2 + 3 sigma alpha`.
    pub collision_threshold: Option<f64>,
    pub collision_rule: CollisionRule,
    pub normalize: bool,
    pub ra: RaParams,
    pub aggregation_overhead: u32,
    /// Iteration cap for the residual-stopped baseline; 0 means `M`.
    pub std_omp_max_iters: usize,
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            blocks: 100,
            block_size: 100,
            k_b: 4,
            k_i: 5,
            size_policy: SizePolicy::Fixed,
            rows: None,
            stages: None,
            theta: 0.75,
            delta: 0.05,
            alpha: 1.0,
            snr_db: None,
            trials: 1000,
            seed: 1,
            schemes: vec![Scheme::Proposed],
            mode: DuplexMode::FullDuplex,
            channel: ChannelConfig::default(),
            collision_threshold: None,
            collision_rule: CollisionRule::default(),
            normalize: true,
            ra: RaParams::default(),
            aggregation_overhead: 2,
            std_omp_max_iters: 0,
            sweep: None,
        }
    }
}

/// Fully resolved parameters of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointParams {
    pub model: ModelParams,
    pub k_b: usize,
    pub k_i: usize,
    pub rows: usize,
    pub stages: usize,
    pub snr_db: Option<f64>,
}

impl PointParams {
    pub fn measurements(&self) -> usize {
        self.rows * self.stages
    }
}

fn parse_f64(what: &str, v: &str) -> Result<f64, BenchError> {
    v.parse::<f64>()
        .map_err(|_| BenchError::Config(format!("{what}: `{v}` is not a number")))
}

fn parse_num<T: FromStr>(what: &str, v: &str) -> Result<T, BenchError> {
    v.parse::<T>()
        .map_err(|_| BenchError::Config(format!("{what}: `{v}` is not a valid value")))
}

fn parse_bool(what: &str, v: &str) -> Result<bool, BenchError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(BenchError::Config(format!("{what}: `{v}` is not a boolean"))),
    }
}

fn core_err(what: &str, e: blockcs::Error) -> BenchError {
    BenchError::Config(format!("{what}: {e}"))
}

fn as_count(var: SweepVar, v: f64) -> Result<usize, BenchError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(BenchError::Config(format!("sweep {}: `{v}` is not a nonnegative integer", var.name())))
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let v = value.trim();
        match key.trim() {
            "blocks" | "l" => self.blocks = parse_num(key, v)?,
            "block_size" | "d" => self.block_size = parse_num(key, v)?,
            "k_b" => self.k_b = parse_num(key, v)?,
            "k_i" => self.k_i = parse_num(key, v)?,
            "size_policy" => self.size_policy = v.parse().map_err(|e| core_err(key, e))?,
            "rows" | "r" => self.rows = Some(parse_num(key, v)?),
            "stages" | "t" => self.stages = Some(parse_num(key, v)?),
            "theta" => self.theta = parse_f64(key, v)?,
            "delta" => self.delta = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "snr_db" => {
                self.snr_db = match v {
                    "none" | "noiseless" | "inf" => None,
                    _ => Some(parse_f64(key, v)?),
                }
            }
            "trials" => self.trials = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "schemes" => {
                self.schemes = v
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<Vec<_>, _>>()?
            }
            "mode" => self.mode = v.parse().map_err(|e| core_err(key, e))?,
            "channel" => self.channel.model = v.parse().map_err(|e| core_err(key, e))?,
            "coherence" => self.channel.coherence = v.parse().map_err(|e| core_err(key, e))?,
            "floor" => self.channel.floor = parse_f64(key, v)?,
            "collision_threshold" => {
                self.collision_threshold = match v {
                    "auto" => None,
                    _ => Some(parse_f64(key, v)?),
                }
            }
            "collision_rule" => self.collision_rule = v.parse().map_err(|e| core_err(key, e))?,
            "normalize" => self.normalize = parse_bool(key, v)?,
            "preambles" => self.ra.preambles = parse_num(key, v)?,
            "max_attempts" => self.ra.max_attempts = parse_num(key, v)?,
            "backoff_slots" => self.ra.backoff_slots = parse_num(key, v)?,
            "aggregation_overhead" => self.aggregation_overhead = parse_num(key, v)?,
            "std_omp_max_iters" => self.std_omp_max_iters = parse_num(key, v)?,
            "sweep" => self.sweep = Some(v.parse()?),
            other => return Err(BenchError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| BenchError::Config(format!("line {}: {}", i + 1, e.message())))?;
        }
        Ok(cfg)
    }

    /// Sweep points as `(value, params)`; a single unnamed point without a sweep.
    pub fn points(&self) -> Result<Vec<(Option<f64>, PointParams)>, BenchError> {
        match &self.sweep {
            None => Ok(vec![(None, self.resolve(None)?)]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.resolve(Some((s.var, v)))?)))
                .collect(),
        }
    }

    /// Validates everything that does not depend on the sweep point.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(BenchError::Config("at least one scheme is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(BenchError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(th) = self.collision_threshold {
            if !(th > 0.0 && th.is_finite()) {
                return Err(BenchError::Config(format!("collision_threshold must be positive, got {th}")));
            }
        }
        self.ra.validate().map_err(|e| core_err("ra", e))?;
        let _ = self.points()?;
        Ok(())
    }

    fn resolve(&self, over: Option<(SweepVar, f64)>) -> Result<PointParams, BenchError> {
        let mut l = self.blocks;
        let mut d = self.block_size;
        let mut k_b = self.k_b;
        let mut k_i = self.k_i;
        let mut rows = self.rows;
        let mut stages = self.stages;
        let mut m_total = None;
        let mut snr_db = self.snr_db;
        if let Some((var, v)) = over {
            match var {
                SweepVar::SnrDb => snr_db = Some(v),
                SweepVar::K => {
                    let k = as_count(var, v)?;
                    if k_i == 0 || k % k_i != 0 {
                        return Err(BenchError::Config(format!("sweep k: {k} is not a multiple of k_i = {k_i}")));
                    }
                    k_b = k / k_i;
                }
                _ => {
                    let n = as_count(var, v)?;
                    match var {
                        SweepVar::M => m_total = Some(n),
                        SweepVar::T => stages = Some(n),
                        SweepVar::R => rows = Some(n),
                        SweepVar::KB => k_b = n,
                        SweepVar::KI => k_i = n,
                        SweepVar::D => d = n,
                        SweepVar::L => l = n,
                        SweepVar::K | SweepVar::SnrDb => unreachable!(),
                    }
                }
            }
        }
        let model = ModelParams::new(l, d, k_b, k_i).map_err(|e| core_err("model", e))?;
        let rows = match rows {
            Some(r) => r,
            None => rows_required(k_b, self.theta).map_err(|e| core_err("rows", e))?,
        };
        let stages = match (m_total, stages) {
            (Some(m), _) => {
                if rows == 0 || m < rows {
                    return Err(BenchError::Config(format!("m = {m} is smaller than R = {rows}")));
                }
                m / rows
            }
            (None, Some(t)) => t,
            (None, None) => stages_required(l * d, self.delta).map_err(|e| core_err("stages", e))?,
        };
        if rows == 0 || stages == 0 {
            return Err(BenchError::Config(format!("R = {rows} and T = {stages} must both be >= 1")));
        }
        Ok(PointParams {
            model,
            k_b,
            k_i,
            rows,
            stages,
            snr_db,
        })
    }
}
