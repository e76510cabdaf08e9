//! In-block support recovery at a listener.
//!
//! A listener of block `l` keeps only the rows `U_l = D_l \ Q_l` of its
//! observation and runs orthogonal matching pursuit over the `d` columns of
//! the block for exactly as many iterations as the BS counted devices.
//! Recovered devices are ranked by offset and mapped onto the block's grant.

use crate::channel::GainSource;
use crate::error::{Error, Result};
use crate::linalg::{pinv_solve, IncrementalQr};
use crate::scalar::{cdot, cnorm_sqr, Cplx, Real};
use crate::signature::StructuredMatrix;
use crate::sketch::BsDetection;

/// Collision-filtered in-block recovery problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSideProblem<F> {
    block: usize,
    rows: Vec<usize>,
    y: Vec<Cplx<F>>,
    // columns[j][u]: column j of the block, row u of U_l.
    columns: Vec<Vec<Cplx<F>>>,
    k_target: usize,
}

impl<F: Real> DeviceSideProblem<F> {
    /// Direct construction from measured rows and block columns.
    pub fn new(
        block: usize,
        rows: Vec<usize>,
        y: Vec<Cplx<F>>,
        columns: Vec<Vec<Cplx<F>>>,
        k_target: usize,
    ) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::NoEffectiveMeasurements(block + 1));
        }
        if rows.len() != y.len() {
            return Err(Error::Dimension {
                what: "effective rows",
                expected: y.len(),
                actual: rows.len(),
            });
        }
        if columns.is_empty() {
            return Err(Error::Parameter("block has no columns".into()));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != y.len()) {
            return Err(Error::Dimension {
                what: "block column",
                expected: y.len(),
                actual: bad.len(),
            });
        }
        Ok(Self {
            block,
            rows,
            y,
            columns,
            k_target,
        })
    }

    /// Real-valued problem (zero imaginary parts).
    pub fn from_real(block: usize, y: &[F], columns: &[Vec<F>], k_target: usize) -> Result<Self> {
        let lift = |v: &[F]| v.iter().map(|&x| Cplx::new(x, F::zero())).collect::<Vec<_>>();
        Self::new(
            block,
            (0..y.len()).collect(),
            lift(y),
            columns.iter().map(|c| lift(c)).collect(),
            k_target,
        )
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    /// `U_l` as global measurement rows.
    #[inline]
    pub fn effective_rows(&self) -> &[usize] {
        &self.rows
    }

    /// `T_I = |U_l|`.
    #[inline]
    pub fn effective_count(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn y(&self) -> &[Cplx<F>] {
        &self.y
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.columns.len()
    }

    /// Column `offset` of the effective submatrix.
    #[inline]
    pub fn column(&self, offset: usize) -> &[Cplx<F>] {
        &self.columns[offset]
    }

    #[inline]
    pub fn k_target(&self) -> usize {
        self.k_target
    }

    /// Entry `(u, offset)` of the effective submatrix.
    #[inline]
    pub fn entry(&self, u: usize, offset: usize) -> Cplx<F> {
        self.columns[offset][u]
    }
}

/// Extracts listener `gains`' problem for `block` from its per-stage
/// observation `y_d` (entry `t` taken at the block's row of stage `t`) and
/// the BS broadcast.
pub fn build_problem<F: Real, G: GainSource<F>>(
    m: &StructuredMatrix<F>,
    gains: &G,
    y_d: &[Cplx<F>],
    block: usize,
    broadcast: &BsDetection<F>,
) -> Result<DeviceSideProblem<F>> {
    if y_d.len() != m.stages() {
        return Err(Error::Dimension {
            what: "listener observation",
            expected: m.stages(),
            actual: y_d.len(),
        });
    }
    if broadcast.blocks() != m.blocks() {
        return Err(Error::Dimension {
            what: "broadcast",
            expected: m.blocks(),
            actual: broadcast.blocks(),
        });
    }
    if block >= m.blocks() {
        return Err(Error::IndexOutOfRange {
            what: "block",
            index: block + 1,
            max: m.blocks(),
        });
    }
    let k_target = broadcast.count(block);
    if k_target == 0 {
        return Err(Error::BlockNotActive(block + 1));
    }
    let collided = broadcast.collisions(block);
    let kept: Vec<(usize, usize)> = (0..m.stages())
        .map(|t| (t, m.global_row(t, block)))
        .filter(|(_, row)| !collided.contains(row))
        .collect();
    if kept.is_empty() {
        return Err(Error::NoEffectiveMeasurements(block + 1));
    }
    let d = m.block_size();
    let columns = (0..d)
        .map(|j| {
            kept.iter()
                .map(|&(t, _)| gains.gain(t, block * d + j) * m.sign(t, block))
                .collect()
        })
        .collect();
    let rows: Vec<usize> = kept.iter().map(|&(_, r)| r).collect();
    let y = kept.iter().map(|&(t, _)| y_d[t]).collect();
    DeviceSideProblem::new(block, rows, y, columns, k_target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmpOptions {
    /// Score columns by correlation divided by column norm.
    pub normalize: bool,
}

impl Default for OmpOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

/// Result of one in-block decode.
#[derive(Debug, Clone, PartialEq)]
pub struct InBlockDetection<F> {
    pub block: usize,
    /// Recovered offsets, ascending; position is the rank.
    pub support: Vec<usize>,
    /// Offsets in the order they were selected.
    pub selection_order: Vec<usize>,
    /// Least-squares amplitudes, aligned with `selection_order`.
    pub coefficients: Vec<Cplx<F>>,
    pub iterations: usize,
    /// Some selected atom fell inside the span of earlier ones and the
    /// amplitudes came from the pseudo-inverse.
    pub rank_deficient: bool,
    /// The broadcast count exceeded the block size and was clamped.
    pub k_clamped: bool,
    pub residual_norm: F,
}

impl<F> InBlockDetection<F> {
    /// Rank (0-based) of `offset` among the recovered devices.
    pub fn rank_of(&self, offset: usize) -> Option<usize> {
        self.support.binary_search(&offset).ok()
    }
}

/// OMP with column normalization.
pub fn modified_omp<F: Real>(p: &DeviceSideProblem<F>) -> Result<InBlockDetection<F>> {
    modified_omp_with(p, &OmpOptions::default())
}

/// OMP limited to `min(k_target, d)` iterations. Each step picks the
/// unselected column best matched to the residual (ties go to the lowest
/// offset), then refits all selected columns by least squares.
pub fn modified_omp_with<F: Real>(p: &DeviceSideProblem<F>, opts: &OmpOptions) -> Result<InBlockDetection<F>> {
    if p.k_target == 0 {
        return Err(Error::Parameter("k_target must be >= 1".into()));
    }
    let d = p.block_size();
    let iterations = p.k_target.min(d);
    let norms: Vec<F> = p.columns.iter().map(|c| cnorm_sqr(c)).collect();

    let mut selected = vec![false; d];
    let mut order = Vec::with_capacity(iterations);
    let mut qr = IncrementalQr::new(p.y.len());
    let mut rank_deficient = false;
    let mut residual = p.y.clone();

    for _ in 0..iterations {
        let mut best: Option<(usize, F)> = None;
        for j in (0..d).filter(|&j| !selected[j]) {
            let corr = cdot(&p.columns[j], &residual).norm_sqr();
            let score = if opts.normalize {
                if norms[j] > F::zero() {
                    corr / norms[j]
                } else {
                    F::zero()
                }
            } else {
                corr
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (pick, _) = best.expect("an unselected column remains while iterations <= d");
        selected[pick] = true;
        order.push(pick);
        if !qr.push(&p.columns[pick]) {
            rank_deficient = true;
        }
        residual = qr.project_out(&p.y);
    }

    let coefficients = if rank_deficient {
        let cols: Vec<&[Cplx<F>]> = order.iter().map(|&j| p.columns[j].as_slice()).collect();
        pinv_solve(&cols, &p.y)
    } else {
        qr.solve(&p.y)
    };
    let mut support = order.clone();
    support.sort_unstable();
    Ok(InBlockDetection {
        block: p.block,
        support,
        selection_order: order,
        coefficients,
        iterations,
        rank_deficient,
        k_clamped: p.k_target > d,
        residual_norm: cnorm_sqr(&residual).sqrt(),
    })
}

/// Slot of the device at `my_offset`: the grant entry at its rank.
pub fn slot_for<F>(detection: &InBlockDetection<F>, my_offset: usize, grant: &[usize]) -> Result<usize> {
    let rank = detection.rank_of(my_offset).ok_or(Error::NotDetected(my_offset + 1))?;
    grant.get(rank).copied().ok_or(Error::Parameter(format!(
        "rank {} exceeds the {} granted slots",
        rank + 1,
        grant.len()
    )))
}
