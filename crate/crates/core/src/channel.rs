//! Acquisition phase: device-to-BS and device-to-listener channels,
//! transmitter-side pre-correction and receiver noise.
//!
//! Active device `i` pre-scales its signature by `1 / h_bs[i]`, so the BS
//! sees `A x + noise` exactly. A listener sees every column scaled by the
//! effective gain `g_i = h_dev[i] / h_bs[i]`. Under [`Coherence::PerStage`]
//! every device draws an independent gain for each stage (block fading per
//! stage); under [`Coherence::Static`] one gain per device is shared by all
//! stages, which makes the columns of a block collinear at every listener.
//!
//! Listener gains are a pure function of a per-listener key and the
//! `(stage, device)` pair, so no `N`-length vector is stored per listener.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ActivationPattern, ModelParams};
use crate::scalar::{Cplx, Real};
use crate::seed::{derive, hashed_complex_normal, hashed_unit_phase};
use crate::signature::StructuredMatrix;

/// Small-scale fading distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelModel {
    /// Circularly-symmetric complex normal, unit variance.
    #[default]
    Rayleigh,
    /// Unit magnitude, uniform phase.
    UnitModulus,
}

impl std::str::FromStr for ChannelModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh" => Ok(Self::Rayleigh),
            "unit_modulus" | "unit-modulus" => Ok(Self::UnitModulus),
            other => Err(Error::Parameter(format!("unknown channel model `{other}`"))),
        }
    }
}

/// How gains vary across the `T` stages of one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coherence {
    /// Independent gain per device and stage.
    #[default]
    PerStage,
    /// One gain per device for the whole signature.
    Static,
}

impl std::str::FromStr for Coherence {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_stage" | "per-stage" => Ok(Self::PerStage),
            "static" => Ok(Self::Static),
            other => Err(Error::Parameter(format!("unknown coherence `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub coherence: Coherence,
    /// Minimum `|h_bs|`; weaker draws are redrawn.
    pub floor: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Rayleigh,
            coherence: Coherence::PerStage,
            floor: 0.1,
        }
    }
}

/// Which nodes listen during acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplexMode {
    /// Every active device listens while it transmits.
    #[default]
    FullDuplex,
    /// The (silent) head of every active block listens.
    HalfDuplex,
}

impl std::str::FromStr for DuplexMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_duplex" | "full-duplex" | "full" => Ok(Self::FullDuplex),
            "half_duplex" | "half-duplex" | "half" => Ok(Self::HalfDuplex),
            other => Err(Error::Parameter(format!("unknown duplex mode `{other}`"))),
        }
    }
}

/// Offset of the cluster head inside every block in half-duplex mode.
pub const HEAD_OFFSET: usize = 0;

/// Global index of the head of `block`.
#[inline]
pub fn cluster_head(block: usize, block_size: usize) -> usize {
    block * block_size + HEAD_OFFSET
}

/// Nodes that listen for pattern `x` under `mode`, ascending.
pub fn listeners_for(x: &ActivationPattern, mode: DuplexMode) -> Vec<usize> {
    match mode {
        DuplexMode::FullDuplex => x.active_devices(),
        DuplexMode::HalfDuplex => x
            .block_support()
            .iter()
            .map(|&b| cluster_head(b, x.block_size()))
            .collect(),
    }
}

/// Per-column effective gain of a listener, looked up by `(stage, device)`.
pub trait GainSource<F: Real> {
    fn gain(&self, stage: usize, device: usize) -> Cplx<F>;
}

/// All gains equal to one: a listener that sees `A` itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitGains;

impl<F: Real> GainSource<F> for UnitGains {
    #[inline]
    fn gain(&self, _stage: usize, _device: usize) -> Cplx<F> {
        Cplx::new(F::one(), F::zero())
    }
}

/// Receiver noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams<F> {
    /// Per-component standard deviation `sigma`; zero means noiseless.
    pub sigma: F,
}

impl<F: Real> NoiseParams<F> {
    pub fn noiseless() -> Self {
        Self { sigma: F::zero() }
    }

    pub fn with_sigma(sigma: F) -> Result<Self> {
        if !(sigma >= F::zero()) || !sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma={sigma} must be finite and >= 0")));
        }
        Ok(Self { sigma })
    }

    #[inline]
    pub fn is_noiseless(&self) -> bool {
        self.sigma == F::zero()
    }
}

/// Noise standard deviation for a per-component signal power at `snr_db`.
pub fn sigma_for_power<F: Real>(signal_power: F, snr_db: f64) -> F {
    if snr_db == f64::INFINITY {
        return F::zero();
    }
    let ratio = F::lit(10f64.powf(snr_db / 10.0));
    (signal_power / ratio).sqrt()
}

/// Noise level for `snr_db` against the structured matrix.
///
/// Signal power convention: each active device puts energy `alpha^2` on each
/// of its `T` rows, superposed incoherently, spread over `M` rows, giving
/// `P = alpha^2 * T * k / M = alpha^2 * k / R`. Then `sigma^2 = P / 10^(snr/10)`.
pub fn snr_to_sigma<F: Real>(snr_db: f64, m: &StructuredMatrix<F>, expected_active: usize) -> Result<F> {
    if expected_active == 0 {
        return Err(Error::Parameter("expected_active must be >= 1".into()));
    }
    let a2 = m.alpha() * m.alpha();
    let power = a2 * F::from_count(m.stages() * expected_active) / F::from_count(m.measurements());
    Ok(sigma_for_power(power, snr_db))
}

/// Channel state of one transmission.
///
/// Every gain is a pure function of a key and `(slot, device)`, so nothing
/// of size `N` is stored. BS gains of the blocks that contain a listener
/// (the only ones the device side ever needs in bulk) are cached.
#[derive(Debug, Clone)]
pub struct ChannelRealization<F> {
    devices: usize,
    block_size: usize,
    gain_slots: usize,
    config: ChannelConfig,
    bs_key: u64,
    // Sorted listener blocks; cache[pos][slot * d + offset].
    cached_blocks: Vec<usize>,
    cache: Vec<Vec<Cplx<F>>>,
    resamples: usize,
    listeners: Vec<(usize, u64)>,
}

/// Draws the channel keys for one transmission.
pub fn sample_channels<F: Real, R: Rng + ?Sized>(
    params: &ModelParams,
    stages: usize,
    listeners: &[usize],
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<ChannelRealization<F>> {
    let floor = config.floor;
    let ceiling = match config.model {
        ChannelModel::Rayleigh => 3.0,
        ChannelModel::UnitModulus => 1.0,
    };
    if !(floor > 0.0 && floor < ceiling) {
        return Err(Error::Parameter(format!(
            "magnitude floor {floor} must lie in (0, {ceiling}) for {:?}",
            config.model
        )));
    }
    let devices = params.devices();
    if let Some(&bad) = listeners.iter().find(|&&n| n >= devices) {
        return Err(Error::IndexOutOfRange {
            what: "listener",
            index: bad + 1,
            max: devices,
        });
    }
    let gain_slots = match config.coherence {
        Coherence::PerStage => stages.max(1),
        Coherence::Static => 1,
    };
    let d = params.block_size;
    let bs_key = rng.next_u64();
    let mut sorted: Vec<usize> = listeners.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let listeners = sorted.iter().map(|&n| (n, rng.next_u64())).collect();
    let mut cached_blocks: Vec<usize> = sorted.iter().map(|&n| n / d).collect();
    cached_blocks.dedup();

    let mut resamples = 0;
    let cache = cached_blocks
        .iter()
        .map(|&block| {
            let mut cells = Vec::with_capacity(gain_slots * d);
            for slot in 0..gain_slots {
                for offset in 0..d {
                    let (h, redraws) = floored_bs_gain(config, bs_key, slot, block * d + offset);
                    resamples += redraws;
                    cells.push(Cplx::new(F::lit(h.0), F::lit(h.1)));
                }
            }
            cells
        })
        .collect();
    Ok(ChannelRealization {
        devices,
        block_size: d,
        gain_slots,
        config: *config,
        bs_key,
        cached_blocks,
        cache,
        resamples,
        listeners,
    })
}

fn hashed_gain(model: ChannelModel, cell: u64) -> (f64, f64) {
    match model {
        ChannelModel::Rayleigh => hashed_complex_normal(cell),
        ChannelModel::UnitModulus => hashed_unit_phase(cell),
    }
}

/// BS gain of `(slot, device)`: draw `a = 0, 1, ...` until one clears the
/// floor. Returns the gain and the number of rejected draws.
fn floored_bs_gain(config: &ChannelConfig, key: u64, slot: usize, device: usize) -> ((f64, f64), usize) {
    let floor2 = config.floor * config.floor;
    for attempt in 0.. {
        let (re, im) = hashed_gain(config.model, derive(key, &[slot as u64, device as u64, attempt]));
        if re * re + im * im >= floor2 {
            return ((re, im), attempt as usize);
        }
    }
    unreachable!("the floor lies strictly inside the support of the gain magnitude")
}

impl<F: Real> ChannelRealization<F> {
    #[inline]
    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// BS draws rejected for falling below the floor, among the cached
    /// (listener-block) gains.
    #[inline]
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    #[inline]
    pub fn devices(&self) -> usize {
        self.devices
    }

    /// Listening nodes, ascending.
    pub fn listeners(&self) -> impl Iterator<Item = usize> + '_ {
        self.listeners.iter().map(|&(n, _)| n)
    }

    #[inline]
    fn slot(&self, stage: usize) -> usize {
        if self.gain_slots == 1 {
            0
        } else {
            stage
        }
    }

    /// `h_bs` of `device` during `stage`.
    #[inline]
    pub fn bs_gain(&self, stage: usize, device: usize) -> Cplx<F> {
        let slot = self.slot(stage);
        let d = self.block_size;
        match self.cached_blocks.binary_search(&(device / d)) {
            Ok(pos) => self.cache[pos][slot * d + device % d],
            Err(_) => {
                let ((re, im), _) = floored_bs_gain(&self.config, self.bs_key, slot, device);
                Cplx::new(F::lit(re), F::lit(im))
            }
        }
    }

    fn key(&self, node: usize) -> Result<u64> {
        self.listeners
            .binary_search_by_key(&node, |&(n, _)| n)
            .map(|pos| self.listeners[pos].1)
            .map_err(|_| Error::UnknownListener(node))
    }

    #[inline]
    fn raw_listener_gain(&self, key: u64, stage: usize, device: usize) -> Cplx<F> {
        let (re, im) = hashed_gain(self.config.model, derive(key, &[self.slot(stage) as u64, device as u64]));
        Cplx::new(F::lit(re), F::lit(im))
    }

    /// `h_dev` from `device` to listener `node` during `stage`.
    pub fn listener_gain(&self, node: usize, stage: usize, device: usize) -> Result<Cplx<F>> {
        let key = self.key(node)?;
        Ok(self.raw_listener_gain(key, stage, device))
    }

    /// Materializes the listener's full gain table, `[slot][device]`.
    pub fn h_dev(&self, node: usize) -> Result<Vec<Vec<Cplx<F>>>> {
        let key = self.key(node)?;
        Ok((0..self.gain_slots)
            .map(|slot| (0..self.devices).map(|i| self.raw_listener_gain(key, slot, i)).collect())
            .collect())
    }

    /// Effective gains `g = h_dev / h_bs` seen by `node`.
    pub fn effective_gains(&self, node: usize) -> Result<EffectiveGains<'_, F>> {
        Ok(EffectiveGains {
            channel: self,
            key: self.key(node)?,
        })
    }
}

/// The per-column factors of `A H_D H_B^{-1}` for one listener.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveGains<'a, F> {
    channel: &'a ChannelRealization<F>,
    key: u64,
}

impl<F: Real> GainSource<F> for EffectiveGains<'_, F> {
    #[inline]
    fn gain(&self, stage: usize, device: usize) -> Cplx<F> {
        self.channel.raw_listener_gain(self.key, stage, device) / self.channel.bs_gain(stage, device)
    }
}

/// Observations of one acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult<F> {
    /// BS observation after pre-correction, length `M`.
    pub y_bs: Vec<F>,
    /// `(listener, y_D)` pairs in ascending listener order. A listener of
    /// block `l` records only the rows its block occupies: entry `t` is the
    /// observation of row `t R + q[t][l]`.
    pub y_dev: Vec<(usize, Vec<Cplx<F>>)>,
}

impl<F: Real> AcquisitionResult<F> {
    pub fn observation(&self, node: usize) -> Option<&[Cplx<F>]> {
        self.y_dev
            .binary_search_by_key(&node, |(n, _)| *n)
            .ok()
            .map(|pos| self.y_dev[pos].1.as_slice())
    }
}

/// Simulates one acquisition: the BS gets `A x + e` with real noise of
/// variance `sigma^2`; each listener gets the channel-weighted superposition
/// plus circular complex noise of total variance `sigma^2`.
pub fn acquire<F: Real, R: Rng + ?Sized>(
    m: &StructuredMatrix<F>,
    x: &ActivationPattern,
    ch: &ChannelRealization<F>,
    noise: &NoiseParams<F>,
    mode: DuplexMode,
    rng: &mut R,
) -> Result<AcquisitionResult<F>> {
    if ch.devices() != m.devices() {
        return Err(Error::Dimension {
            what: "channel realization",
            expected: m.devices(),
            actual: ch.devices(),
        });
    }
    if mode == DuplexMode::HalfDuplex {
        if let Some(&block) = x
            .block_support()
            .iter()
            .find(|&&b| x.in_block_support(b).contains(&HEAD_OFFSET))
        {
            return Err(Error::ActiveClusterHead(block + 1));
        }
    }

    let mut y_bs = m.measure(x)?;
    if !noise.is_noiseless() {
        for v in &mut y_bs {
            *v += noise.sigma * F::lit(StandardNormal.sample(rng));
        }
    }

    let d = m.block_size();
    let (r, stages) = (m.rows_per_stage(), m.stages());
    // occupants[t * R + q]: active blocks on band row q at stage t.
    let mut occupants: Vec<Vec<usize>> = vec![Vec::new(); r * stages];
    for &block in x.block_support() {
        for t in 0..stages {
            occupants[t * r + m.band_row(t, block)].push(block);
        }
    }
    let per_part = noise.sigma * F::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut y_dev = Vec::new();
    for node in listeners_for(x, mode) {
        let gains = ch.effective_gains(node)?;
        let own = node / d;
        let y = (0..stages)
            .map(|t| {
                let mut acc = Cplx::new(F::zero(), F::zero());
                for &block in &occupants[t * r + m.band_row(t, own)] {
                    let sign = m.sign(t, block);
                    for &offset in x.in_block_support(block) {
                        acc += gains.gain(t, block * d + offset) * sign;
                    }
                }
                if !noise.is_noiseless() {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    acc += Cplx::new(per_part * F::lit(re), per_part * F::lit(im));
                }
                acc
            })
            .collect();
        y_dev.push((node, y));
    }
    Ok(AcquisitionResult { y_bs, y_dev })
}
