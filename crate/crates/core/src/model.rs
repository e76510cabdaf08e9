//! Block-sparse activation model.
//!
//! `N = L * d` devices are partitioned into `L` clusters (blocks) of `d`
//! devices each. Device `i` (0-based) lives in block `i / d` at offset
//! `i % d`. Text formats and error messages use 1-based indices; everything
//! in memory is 0-based.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Dimensions and sparsity bounds of the device population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    /// Cluster count `L`.
    pub blocks: usize,
    /// Cluster size `d`.
    pub block_size: usize,
    /// Block sparsity bound `K_B`.
    pub max_active_blocks: usize,
    /// In-block sparsity bound `K_I`.
    pub max_active_per_block: usize,
}

impl ModelParams {
    pub fn new(
        blocks: usize,
        block_size: usize,
        max_active_blocks: usize,
        max_active_per_block: usize,
    ) -> Result<Self> {
        let p = Self {
            blocks,
            block_size,
            max_active_blocks,
            max_active_per_block,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.block_size == 0 {
            return Err(Error::Parameter(format!(
                "L={} and d={} must be positive",
                self.blocks, self.block_size
            )));
        }
        if self.max_active_blocks == 0 || self.max_active_blocks > self.blocks {
            return Err(Error::Parameter(format!(
                "K_B={} must lie in 1..={}",
                self.max_active_blocks, self.blocks
            )));
        }
        if self.max_active_per_block == 0 || self.max_active_per_block > self.block_size {
            return Err(Error::Parameter(format!(
                "K_I={} must lie in 1..={}",
                self.max_active_per_block, self.block_size
            )));
        }
        Ok(())
    }

    /// Device count `N = L * d`.
    #[inline]
    pub fn devices(&self) -> usize {
        self.blocks * self.block_size
    }

    /// Sparsity bound `K = K_B * K_I`.
    #[inline]
    pub fn max_active(&self) -> usize {
        self.max_active_blocks * self.max_active_per_block
    }
}

/// How many devices an active block receives when sampling a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizePolicy {
    /// Exactly `k_i_max` devices per active block.
    #[default]
    Fixed,
    /// Uniform on `1..=k_i_max`.
    Uniform,
}

impl std::str::FromStr for SizePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Parameter(format!("unknown size policy `{other}`"))),
        }
    }
}

/// Binary activation vector `x` together with its block and in-block supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    blocks: usize,
    block_size: usize,
    bits: Vec<bool>,
    block_support: Vec<usize>,
    in_block: Vec<Vec<usize>>,
}

impl ActivationPattern {
    /// All-zero pattern.
    pub fn empty(blocks: usize, block_size: usize) -> Self {
        Self {
            blocks,
            block_size,
            bits: vec![false; blocks * block_size],
            block_support: Vec::new(),
            in_block: vec![Vec::new(); blocks],
        }
    }

    /// Builds a pattern from per-block offset lists. Offsets are 0-based and
    /// are sorted and deduplicated.
    pub fn from_supports(blocks: usize, block_size: usize, in_block: Vec<Vec<usize>>) -> Result<Self> {
        if in_block.len() != blocks {
            return Err(Error::Dimension {
                what: "in-block support list",
                expected: blocks,
                actual: in_block.len(),
            });
        }
        let mut pattern = Self::empty(blocks, block_size);
        for (block, offsets) in in_block.into_iter().enumerate() {
            let sorted: BTreeSet<usize> = offsets.into_iter().collect();
            for &off in &sorted {
                if off >= block_size {
                    return Err(Error::IndexOutOfRange {
                        what: "device offset",
                        index: off + 1,
                        max: block_size,
                    });
                }
                pattern.bits[block * block_size + off] = true;
            }
            if !sorted.is_empty() {
                pattern.block_support.push(block);
            }
            pattern.in_block[block] = sorted.into_iter().collect();
        }
        Ok(pattern)
    }

    /// Builds a pattern from a length-`N` bit vector.
    pub fn from_bits(blocks: usize, block_size: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != blocks * block_size {
            return Err(Error::Dimension {
                what: "activation bits",
                expected: blocks * block_size,
                actual: bits.len(),
            });
        }
        let in_block = bits
            .chunks(block_size)
            .map(|chunk| chunk.iter().enumerate().filter(|(_, &b)| b).map(|(o, _)| o).collect())
            .collect();
        Self::from_supports(blocks, block_size, in_block)
    }

    /// Builds a pattern that activates the listed global device indices.
    pub fn from_devices(blocks: usize, block_size: usize, devices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; blocks * block_size];
        for &i in devices {
            if i >= bits.len() {
                return Err(Error::IndexOutOfRange {
                    what: "device",
                    index: i + 1,
                    max: bits.len(),
                });
            }
            bits[i] = true;
        }
        Self::from_bits(blocks, block_size, bits)
    }

    #[inline]
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    #[inline]
    pub fn devices(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Active blocks in ascending order.
    #[inline]
    pub fn block_support(&self) -> &[usize] {
        &self.block_support
    }

    /// Active offsets of `block` in ascending order.
    #[inline]
    pub fn in_block_support(&self, block: usize) -> &[usize] {
        &self.in_block[block]
    }

    /// `|S_{I,block}|`.
    #[inline]
    pub fn count(&self, block: usize) -> usize {
        self.in_block[block].len()
    }

    /// Per-block active counts.
    pub fn counts(&self) -> Vec<usize> {
        self.in_block.iter().map(Vec::len).collect()
    }

    pub fn popcount(&self) -> usize {
        self.in_block.iter().map(Vec::len).sum()
    }

    pub fn is_active(&self, device: usize) -> bool {
        self.bits[device]
    }

    /// Global indices of active devices, ascending.
    pub fn active_devices(&self) -> Vec<usize> {
        self.block_support
            .iter()
            .flat_map(|&b| self.in_block[b].iter().map(move |&o| b * self.block_size + o))
            .collect()
    }

    /// Checks the pattern against the sparsity bounds of `params`.
    pub fn respects(&self, params: &ModelParams) -> bool {
        self.blocks == params.blocks
            && self.block_size == params.block_size
            && self.block_support.len() <= params.max_active_blocks
            && self.in_block.iter().all(|s| s.len() <= params.max_active_per_block)
    }
}

/// Samples a pattern with exactly `k_b` active blocks, each holding a
/// nonempty random device subset of size at most `k_i_max`.
pub fn generate_pattern<R: Rng + ?Sized>(
    params: &ModelParams,
    k_b: usize,
    k_i_max: usize,
    policy: SizePolicy,
    rng: &mut R,
) -> Result<ActivationPattern> {
    generate_pattern_reserving(params, k_b, k_i_max, policy, None, rng)
}

/// Like [`generate_pattern`], but offset `reserved` of every block is never
/// activated (the half-duplex cluster head).
pub fn generate_pattern_reserving<R: Rng + ?Sized>(
    params: &ModelParams,
    k_b: usize,
    k_i_max: usize,
    policy: SizePolicy,
    reserved: Option<usize>,
    rng: &mut R,
) -> Result<ActivationPattern> {
    let (l, d) = (params.blocks, params.block_size);
    if k_b > l || k_b > params.max_active_blocks {
        return Err(Error::Parameter(format!(
            "k_b={k_b} exceeds L={l} or K_B={}",
            params.max_active_blocks
        )));
    }
    let candidates = d - usize::from(reserved.is_some_and(|r| r < d));
    if k_i_max > d || k_i_max > params.max_active_per_block || k_i_max > candidates {
        return Err(Error::Parameter(format!(
            "k_i_max={k_i_max} exceeds d={d}, K_I={} or the {candidates} eligible devices per block",
            params.max_active_per_block
        )));
    }
    if k_b > 0 && k_i_max == 0 {
        return Err(Error::Parameter("active blocks need k_i_max >= 1".into()));
    }

    let mut chosen = index::sample(rng, l, k_b).into_vec();
    chosen.sort_unstable();
    let mut in_block = vec![Vec::new(); l];
    for block in chosen {
        let size = match policy {
            SizePolicy::Fixed => k_i_max,
            SizePolicy::Uniform => rng.random_range(1..=k_i_max),
        };
        let picks = index::sample(rng, candidates, size).into_iter();
        in_block[block] = match reserved.filter(|&r| r < d) {
            Some(r) => picks.map(|p| if p >= r { p + 1 } else { p }).collect(),
            None => picks.collect(),
        };
    }
    ActivationPattern::from_supports(l, d, in_block)
}

/// `(block_errors, bit_errors)`: size of the symmetric difference of the
/// block supports and Hamming distance of the bit vectors.
pub fn support_distance(a: &ActivationPattern, b: &ActivationPattern) -> Result<(usize, usize)> {
    if a.blocks != b.blocks || a.block_size != b.block_size {
        return Err(Error::Dimension {
            what: "pattern",
            expected: a.devices(),
            actual: b.devices(),
        });
    }
    let sa: BTreeSet<_> = a.block_support.iter().collect();
    let sb: BTreeSet<_> = b.block_support.iter().collect();
    let block_errors = sa.symmetric_difference(&sb).count();
    let bit_errors = a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count();
    Ok((block_errors, bit_errors))
}
