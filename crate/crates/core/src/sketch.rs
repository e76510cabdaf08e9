//! Block sketching decoder run by the base station.
//!
//! For every stage `t` and block `l` the BS forms the estimate
//! `s[t][l] * y[t*R + q[t][l]] = alpha^2 |S_I,l| + interference + noise`,
//! takes the median over stages, and rounds `median / alpha^2` to a device
//! count. Stages whose estimate strays from the median by more than the
//! collision threshold are reported as collided so listeners can drop them.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signature::StructuredMatrix;

/// Which rows a block reports as collided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionRule {
    /// Stage estimate deviates from the block median by more than the threshold.
    Threshold,
    /// [`CollisionRule::Threshold`], plus every row the block shares with
    /// another detected block at the same stage.
    #[default]
    ThresholdOrShared,
}

impl std::str::FromStr for CollisionRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Self::Threshold),
            "threshold_or_shared" | "threshold-or-shared" => Ok(Self::ThresholdOrShared),
            other => Err(Error::Parameter(format!("unknown collision rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions<F> {
    pub collision_threshold: F,
    pub rule: CollisionRule,
}

impl<F: Real> DecodeOptions<F> {
    /// Threshold `alpha^2 / 2 + 3 * gamma` with `gamma = sigma * alpha`.
    pub fn for_noise(alpha: F, sigma: F) -> Self {
        Self {
            collision_threshold: default_threshold(alpha, sigma),
            rule: CollisionRule::default(),
        }
    }
}

/// Half a device-count quantum plus three noise standard deviations of the
/// stage estimate.
pub fn default_threshold<F: Real>(alpha: F, sigma: F) -> F {
    alpha * alpha / F::lit(2.0) + F::lit(3.0) * sigma * alpha
}

/// BS decision broadcast to the devices.
#[derive(Debug, Clone, PartialEq)]
pub struct BsDetection<F> {
    counts: Vec<usize>,
    block_support: Vec<usize>,
    collisions: Vec<Vec<usize>>,
    raw: Option<Vec<F>>,
}

impl<F: Real> BsDetection<F> {
    /// Builds a detection from per-block counts and collided global rows.
    pub fn from_counts(counts: Vec<usize>, collisions: Vec<Vec<usize>>) -> Result<Self> {
        if collisions.len() != counts.len() {
            return Err(Error::Dimension {
                what: "collision sets",
                expected: counts.len(),
                actual: collisions.len(),
            });
        }
        let block_support = counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(b, _)| b).collect();
        Ok(Self {
            counts,
            block_support,
            collisions,
            raw: None,
        })
    }

    #[inline]
    pub fn blocks(&self) -> usize {
        self.counts.len()
    }

    /// Estimated `|S_I,l|` for every block.
    #[inline]
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, block: usize) -> usize {
        self.counts[block]
    }

    /// Blocks with a positive estimated count, ascending.
    #[inline]
    pub fn block_support(&self) -> &[usize] {
        &self.block_support
    }

    /// `Q_l`: collided global rows of `block`, in stage order.
    #[inline]
    pub fn collisions(&self, block: usize) -> &[usize] {
        &self.collisions[block]
    }

    /// Median block estimates; absent when rebuilt from a broadcast.
    #[inline]
    pub fn raw_block_estimates(&self) -> Option<&[F]> {
        self.raw.as_deref()
    }

    /// Broadcast payload: one `l count q...` line per detected block, all
    /// indices 1-based.
    pub fn to_broadcast(&self) -> String {
        let mut out = String::new();
        for &b in &self.block_support {
            let _ = write!(out, "{} {}", b + 1, self.counts[b]);
            for &row in &self.collisions[b] {
                let _ = write!(out, " {}", row + 1);
            }
            out.push('\n');
        }
        out
    }

    /// Parses a broadcast payload for a network of `blocks` clusters.
    pub fn from_broadcast(text: &str, blocks: usize) -> Result<Self> {
        let mut counts = vec![0; blocks];
        let mut collisions = vec![Vec::new(); blocks];
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let mut fields = line.split_whitespace();
            let Some(first) = fields.next() else { continue };
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("`{s}`: {e}"),
                })
            };
            let block = parse(first)?;
            if block == 0 || block > blocks {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("block {block} outside 1..={blocks}"),
                });
            }
            let count = parse(fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "missing count".into(),
            })?)?;
            if count == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "broadcast lists only active blocks".into(),
                });
            }
            if counts[block - 1] != 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("block {block} listed twice"),
                });
            }
            counts[block - 1] = count;
            for f in fields {
                let row = parse(f)?;
                if row == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "rows are 1-based".into(),
                    });
                }
                collisions[block - 1].push(row - 1);
            }
        }
        Self::from_counts(counts, collisions)
    }
}

/// Work counters of one decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Observation entries read while forming stage estimates.
    pub values_touched: usize,
    /// Stage estimates compared against a block median.
    pub comparisons: usize,
}

/// Per-stage block estimates `s[t][l] * y[t*R + q[t][l]]`, indexed `t * L + l`.
pub fn stage_estimates<F: Real>(m: &StructuredMatrix<F>, y: &[F]) -> Result<Vec<F>> {
    check_len(m, y)?;
    let mut est = Vec::with_capacity(m.stages() * m.blocks());
    for t in 0..m.stages() {
        for l in 0..m.blocks() {
            est.push(m.sign(t, l) * y[m.global_row(t, l)]);
        }
    }
    Ok(est)
}

fn check_len<F: Real>(m: &StructuredMatrix<F>, y: &[F]) -> Result<()> {
    if y.len() != m.measurements() {
        return Err(Error::Dimension {
            what: "BS observation",
            expected: m.measurements(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Median; the mean of the two middle values for even lengths. Reorders `v`.
pub fn median<F: Real>(v: &mut [F]) -> F {
    assert!(!v.is_empty(), "median of empty slice");
    let n = v.len();
    let cmp = |a: &F, b: &F| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
    let (_, &mut upper, _) = v.select_nth_unstable_by(n / 2, cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..n / 2].iter().copied().fold(F::neg_infinity(), F::max);
        (lower + upper) / F::lit(2.0)
    }
}

/// Round half away from zero, clamped to `0..=max`.
pub fn count_from_estimate<F: Real>(estimate: F, alpha: F, max: usize) -> usize {
    let scaled = (estimate / (alpha * alpha)).round();
    if !(scaled > F::zero()) {
        0
    } else {
        scaled.to_usize().unwrap_or(max).min(max)
    }
}

/// Decodes with the threshold-only collision rule.
pub fn decode<F: Real>(m: &StructuredMatrix<F>, y: &[F], collision_threshold: F) -> Result<BsDetection<F>> {
    decode_with(
        m,
        y,
        &DecodeOptions {
            collision_threshold,
            rule: CollisionRule::Threshold,
        },
    )
    .map(|(det, _)| det)
}

/// Full decoder with explicit options; also returns work counters.
pub fn decode_with<F: Real>(
    m: &StructuredMatrix<F>,
    y: &[F],
    opts: &DecodeOptions<F>,
) -> Result<(BsDetection<F>, DecodeStats)> {
    check_len(m, y)?;
    if !(opts.collision_threshold > F::zero()) {
        return Err(Error::Parameter("collision threshold must be positive".into()));
    }
    let (stages, blocks) = (m.stages(), m.blocks());
    let est = stage_estimates(m, y)?;
    let mut stats = DecodeStats {
        values_touched: est.len(),
        comparisons: 0,
    };

    let mut raw = Vec::with_capacity(blocks);
    let mut counts = Vec::with_capacity(blocks);
    let mut column = vec![F::zero(); stages];
    for l in 0..blocks {
        for (t, slot) in column.iter_mut().enumerate() {
            *slot = est[t * blocks + l];
        }
        let med = median(&mut column);
        raw.push(med);
        counts.push(count_from_estimate(med, m.alpha(), m.block_size()));
    }

    let mut collisions = vec![Vec::new(); blocks];
    let active: Vec<usize> = (0..blocks).filter(|&l| counts[l] > 0).collect();
    for &l in &active {
        for t in 0..stages {
            stats.comparisons += 1;
            let deviates = (est[t * blocks + l] - raw[l]).abs() > opts.collision_threshold;
            let shared = opts.rule == CollisionRule::ThresholdOrShared
                && active.iter().any(|&k| k != l && m.band_row(t, k) == m.band_row(t, l));
            if deviates || shared {
                collisions[l].push(m.global_row(t, l));
            }
        }
    }

    let mut det = BsDetection::from_counts(counts, collisions)?;
    det.raw = Some(raw);
    Ok((det, stats))
}

/// Resource slots granted to one detected block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrant {
    pub block: usize,
    /// 1-based slot identifiers, consecutive.
    pub slots: Vec<usize>,
}

/// Slots for every detected block, consecutively numbered in block order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResourceGrant {
    pub grants: Vec<BlockGrant>,
}

impl ResourceGrant {
    pub fn slots_for(&self, block: usize) -> &[usize] {
        self.grants
            .binary_search_by_key(&block, |g| g.block)
            .map(|pos| self.grants[pos].slots.as_slice())
            .unwrap_or(&[])
    }

    pub fn total_slots(&self) -> usize {
        self.grants.iter().map(|g| g.slots.len()).sum()
    }
}

pub fn resources_for<F: Real>(detection: &BsDetection<F>) -> ResourceGrant {
    let mut next = 1;
    let grants = detection
        .block_support()
        .iter()
        .map(|&block| {
            let n = detection.count(block);
            let slots = (next..next + n).collect();
            next += n;
            BlockGrant { block, slots }
        })
        .collect();
    ResourceGrant { grants }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActivationPattern;
    use crate::signature::MatrixParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(r: usize, t: usize, l: usize, d: usize, q: Vec<usize>, s: Vec<f64>) -> StructuredMatrix<f64> {
        StructuredMatrix::from_parts(MatrixParams::new(r, t, l, d, 1.0).unwrap(), q, s).unwrap()
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [7.0f32]), 7.0);
    }

    #[test]
    fn rounding_is_half_away_and_clamped() {
        assert_eq!(count_from_estimate(2.5, 1.0, 10), 3);
        assert_eq!(count_from_estimate(2.49, 1.0, 10), 2);
        assert_eq!(count_from_estimate(-3.0, 1.0, 10), 0);
        assert_eq!(count_from_estimate(40.0, 1.0, 10), 10);
        assert_eq!(count_from_estimate(2.0, 0.5, 10), 8);
    }

    #[test]
    fn stage_estimate_examples() {
        // Two blocks sharing the row in stage 0, apart in stage 1.
        let m = fixed(2, 2, 2, 4, vec![0, 0, 0, 1], vec![1.0, -1.0, 1.0, 1.0]);
        let x = ActivationPattern::from_supports(2, 4, vec![vec![0, 1], vec![0, 1, 2]]).unwrap();
        let y = m.measure(&x).unwrap();
        let est = stage_estimates(&m, &y).unwrap();
        // (t=0, l=0): 2 + s00 s01 3 = 2 - 3.
        assert_eq!(est[0], -1.0);
        assert_eq!(est[1], 3.0 - 2.0);
        assert_eq!(est[2], 2.0);
        assert_eq!(est[3], 3.0);
        assert!(stage_estimates(&m, &[0.0]).is_err());
        assert!(stage_estimates(&m, &[0.0; 4]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_active_block_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alpha in [0.5, 1.0, 2.0] {
            let m = StructuredMatrix::sample(MatrixParams::new(64, 5, 6, 7, alpha).unwrap(), &mut rng).unwrap();
            for c in 1..=7 {
                let mut supports = vec![Vec::new(); 6];
                supports[4] = (0..c).collect();
                let x = ActivationPattern::from_supports(6, 7, supports).unwrap();
                let det = decode(&m, &m.measure(&x).unwrap(), alpha * alpha / 2.0).unwrap();
                assert_eq!(det.counts(), x.counts().as_slice());
                assert_eq!(det.block_support(), &[4]);
                assert!(det.collisions(4).is_empty());
            }
        }
    }

    #[test]
    fn corrupted_minority_stage_is_flagged() {
        // Blocks 0 and 1 collide only in stage 0 of 3.
        let m = fixed(2, 3, 2, 3, vec![0, 0, 0, 1, 1, 0], vec![1.0, 1.0, 1.0, -1.0, -1.0, 1.0]);
        let x = ActivationPattern::from_supports(2, 3, vec![vec![0, 1], vec![2]]).unwrap();
        let det = decode(&m, &m.measure(&x).unwrap(), 0.5).unwrap();
        assert_eq!(det.counts(), &[2, 1]);
        assert_eq!(det.collisions(0), &[0]);
        assert_eq!(det.collisions(1), &[0]);
    }

    #[test]
    fn shared_rule_flags_cancelling_collisions() {
        // Block 0 collides with blocks 1 and 2 in stage 0; their
        // contributions cancel, so only the structural rule notices.
        let m = fixed(
            3,
            3,
            3,
            2,
            vec![0, 0, 0, 0, 1, 2, 0, 1, 2],
            vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        );
        let x = ActivationPattern::from_supports(3, 2, vec![vec![0], vec![0], vec![1]]).unwrap();
        let y = m.measure(&x).unwrap();
        let thr = decode(&m, &y, 0.5).unwrap();
        assert_eq!(thr.counts(), &[1, 1, 1]);
        assert!(thr.collisions(0).is_empty());
        let (shared, stats) = decode_with(
            &m,
            &y,
            &DecodeOptions {
                collision_threshold: 0.5,
                rule: CollisionRule::ThresholdOrShared,
            },
        )
        .unwrap();
        assert_eq!(shared.collisions(0), &[0]);
        assert_eq!(stats.values_touched, 9);
    }

    #[test]
    fn threshold_must_be_positive() {
        let m = fixed(1, 1, 1, 1, vec![0], vec![1.0]);
        assert!(decode(&m, &[1.0], 0.0).is_err());
    }

    #[test]
    fn grant_examples() {
        let det = BsDetection::<f64>::from_counts(vec![0, 3, 0, 1], vec![Vec::new(); 4]).unwrap();
        let g = resources_for(&det);
        assert_eq!(g.slots_for(1), &[1, 2, 3]);
        assert_eq!(g.slots_for(3), &[4]);
        assert_eq!(g.slots_for(0), &[] as &[usize]);
        assert_eq!(g.total_slots(), 4);
        let empty = BsDetection::<f64>::from_counts(vec![0; 3], vec![Vec::new(); 3]).unwrap();
        assert!(resources_for(&empty).grants.is_empty());
    }

    #[test]
    fn broadcast_round_trip() {
        let det = BsDetection::<f64>::from_counts(vec![0, 2, 0, 5], vec![vec![], vec![3, 10], vec![], vec![]]).unwrap();
        let text = det.to_broadcast();
        assert_eq!(text, "2 2 4 11\n4 5\n");
        assert_eq!(BsDetection::<f64>::from_broadcast(&text, 4).unwrap(), det);
        assert!(BsDetection::<f64>::from_broadcast("5 1\n", 4).is_err());
        assert!(BsDetection::<f64>::from_broadcast("1 0\n", 4).is_err());
        assert!(BsDetection::<f64>::from_broadcast("1 1\n1 2\n", 4).is_err());
    }
}
