//! Structured random signatures.
//!
//! The measurement matrix `A` has `M = R * T` rows and `N = L * d` columns.
//! It stacks `T` stages; in stage `t` every block `l` occupies exactly one
//! row `q[t][l]` of its `R`-row band, and all `d` columns of the block carry
//! the same value `s[t][l]` in `{-alpha, +alpha}`. Only `q` and `s` are
//! stored, so the footprint is `T * L` regardless of `d`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::ActivationPattern;
use crate::scalar::Real;

/// Shape and magnitude of a structured matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixParams<F> {
    /// Rows per stage `R`.
    pub rows_per_stage: usize,
    /// Stage count `T`.
    pub stages: usize,
    /// Block count `L`.
    pub blocks: usize,
    /// Block size `d`.
    pub block_size: usize,
    /// Nonzero magnitude `alpha`.
    pub alpha: F,
}

/// Smallest `R` with `1 - (K_B - 1) / R >= theta`, i.e. `R >= (K_B - 1) / (1 - theta)`.
pub fn rows_required(max_active_blocks: usize, theta: f64) -> Result<usize> {
    if !(theta > 0.5 && theta <= 1.0) {
        return Err(Error::Parameter(format!("theta={theta} must lie in (1/2, 1]")));
    }
    let interferers = max_active_blocks.saturating_sub(1) as f64;
    if interferers == 0.0 {
        return Ok(1);
    }
    if theta == 1.0 {
        return Err(Error::Parameter(
            "theta=1 admits no finite R when K_B > 1".into(),
        ));
    }
    let bound = interferers / (1.0 - theta);
    Ok(((bound - 1e-9).ceil() as usize).max(1))
}

/// `T = ceil(log2(N / delta))`.
pub fn stages_required(devices: usize, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta={delta} must lie in (0, 1)")));
    }
    let bound = (devices as f64 / delta).log2();
    Ok(((bound - 1e-9).ceil() as usize).max(1))
}

impl<F: Real> MatrixParams<F> {
    pub fn new(rows_per_stage: usize, stages: usize, blocks: usize, block_size: usize, alpha: F) -> Result<Self> {
        let p = Self {
            rows_per_stage,
            stages,
            blocks,
            block_size,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sizes `R` and `T` from the median-sketch guarantees for a target
    /// block sparsity, threshold `theta` and failure tolerance `delta`.
    pub fn sized_for(
        blocks: usize,
        block_size: usize,
        max_active_blocks: usize,
        theta: f64,
        delta: f64,
        alpha: F,
    ) -> Result<Self> {
        let r = rows_required(max_active_blocks, theta)?;
        let t = stages_required(blocks * block_size, delta)?;
        Self::new(r, t, blocks, block_size, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_per_stage == 0 || self.stages == 0 {
            return Err(Error::Parameter(format!(
                "R={} and T={} must be positive",
                self.rows_per_stage, self.stages
            )));
        }
        if self.blocks == 0 || self.block_size == 0 {
            return Err(Error::Parameter("L and d must be positive".into()));
        }
        if !(self.alpha > F::zero()) || !self.alpha.is_finite() {
            return Err(Error::Parameter(format!("alpha={} must be positive", self.alpha)));
        }
        Ok(())
    }

    /// `M = R * T`.
    #[inline]
    pub fn measurements(&self) -> usize {
        self.rows_per_stage * self.stages
    }

    /// `N = L * d`.
    #[inline]
    pub fn devices(&self) -> usize {
        self.blocks * self.block_size
    }
}

/// Sparse column: `rows[k]` holds `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn<F> {
    pub rows: Vec<usize>,
    pub values: Vec<F>,
}

/// A sample of the structured matrix distribution, stored as `(q, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix<F> {
    params: MatrixParams<F>,
    // Row within the stage band, indexed by t * L + l.
    q: Vec<u32>,
    // Signed magnitude, same indexing.
    s: Vec<F>,
}

impl<F: Real> StructuredMatrix<F> {
    /// Draws `q` uniformly on the band and `s` uniformly on `{-alpha, +alpha}`,
    /// independently for every `(t, l)`.
    pub fn sample<R: Rng + ?Sized>(params: MatrixParams<F>, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let cells = params.stages * params.blocks;
        let mut q = Vec::with_capacity(cells);
        let mut s = Vec::with_capacity(cells);
        for _ in 0..cells {
            q.push(rng.random_range(0..params.rows_per_stage) as u32);
            s.push(if rng.random::<bool>() { params.alpha } else { -params.alpha });
        }
        Ok(Self { params, q, s })
    }

    /// Builds a matrix from explicit 0-based rows and signed values, both
    /// indexed `t * L + l`.
    pub fn from_parts(params: MatrixParams<F>, q: Vec<usize>, s: Vec<F>) -> Result<Self> {
        params.validate()?;
        let cells = params.stages * params.blocks;
        for (what, len) in [("q", q.len()), ("s", s.len())] {
            if len != cells {
                return Err(Error::Dimension {
                    what,
                    expected: cells,
                    actual: len,
                });
            }
        }
        if let Some(&bad) = q.iter().find(|&&r| r >= params.rows_per_stage) {
            return Err(Error::IndexOutOfRange {
                what: "row",
                index: bad + 1,
                max: params.rows_per_stage,
            });
        }
        let tol = params.alpha * F::lit(1e-6);
        if s.iter().any(|v| (v.abs() - params.alpha).abs() > tol) {
            return Err(Error::Parameter("every sign entry must be +-alpha".into()));
        }
        Ok(Self {
            params,
            q: q.into_iter().map(|r| r as u32).collect(),
            s,
        })
    }

    #[inline]
    pub fn params(&self) -> &MatrixParams<F> {
        &self.params
    }

    #[inline]
    pub fn alpha(&self) -> F {
        self.params.alpha
    }

    #[inline]
    pub fn stages(&self) -> usize {
        self.params.stages
    }

    #[inline]
    pub fn rows_per_stage(&self) -> usize {
        self.params.rows_per_stage
    }

    #[inline]
    pub fn blocks(&self) -> usize {
        self.params.blocks
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.params.block_size
    }

    #[inline]
    pub fn measurements(&self) -> usize {
        self.params.measurements()
    }

    #[inline]
    pub fn devices(&self) -> usize {
        self.params.devices()
    }

    /// Number of stored `(q, s)` cells; always `T * L`.
    #[inline]
    pub fn stored_cells(&self) -> usize {
        self.q.len()
    }

    /// Row of block `block` within the band of `stage` (0-based).
    #[inline]
    pub fn band_row(&self, stage: usize, block: usize) -> usize {
        self.q[stage * self.params.blocks + block] as usize
    }

    /// Global measurement row `stage * R + q[stage][block]`.
    #[inline]
    pub fn global_row(&self, stage: usize, block: usize) -> usize {
        stage * self.params.rows_per_stage + self.band_row(stage, block)
    }

    /// `s[stage][block]`.
    #[inline]
    pub fn sign(&self, stage: usize, block: usize) -> F {
        self.s[stage * self.params.blocks + block]
    }

    fn check_block(&self, block: usize) -> Result<()> {
        if block >= self.params.blocks {
            return Err(Error::IndexOutOfRange {
                what: "block",
                index: block + 1,
                max: self.params.blocks,
            });
        }
        Ok(())
    }

    /// Column `device` of `A`: exactly `T` nonzeros, one per stage, in stage order.
    pub fn signature(&self, device: usize) -> Result<SparseColumn<F>> {
        if device >= self.devices() {
            return Err(Error::IndexOutOfRange {
                what: "device",
                index: device + 1,
                max: self.devices(),
            });
        }
        let block = device / self.params.block_size;
        let (rows, values) = (0..self.params.stages)
            .map(|t| (self.global_row(t, block), self.sign(t, block)))
            .unzip();
        Ok(SparseColumn { rows, values })
    }

    /// `D_l`: the `T` global rows where block `block` is nonzero, ordered by stage.
    pub fn block_rows(&self, block: usize) -> Result<Vec<usize>> {
        self.check_block(block)?;
        Ok((0..self.params.stages).map(|t| self.global_row(t, block)).collect())
    }

    /// Noiseless `A x` without forming `A`.
    pub fn measure(&self, x: &ActivationPattern) -> Result<Vec<F>> {
        if x.blocks() != self.params.blocks || x.block_size() != self.params.block_size {
            return Err(Error::Dimension {
                what: "activation pattern",
                expected: self.devices(),
                actual: x.devices(),
            });
        }
        let mut y = vec![F::zero(); self.measurements()];
        for &block in x.block_support() {
            let c = F::from_count(x.count(block));
            for t in 0..self.params.stages {
                y[self.global_row(t, block)] += self.sign(t, block) * c;
            }
        }
        Ok(y)
    }

    /// `A x` for any `x` with the given per-block active counts.
    pub fn measure_counts(&self, counts: &[usize]) -> Result<Vec<F>> {
        if counts.len() != self.params.blocks {
            return Err(Error::Dimension {
                what: "block counts",
                expected: self.params.blocks,
                actual: counts.len(),
            });
        }
        let mut y = vec![F::zero(); self.measurements()];
        for (block, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            let c = F::from_count(c);
            for t in 0..self.params.stages {
                y[self.global_row(t, block)] += self.sign(t, block) * c;
            }
        }
        Ok(y)
    }

    /// Dense `M x N` row-major expansion. Test oracle only: `O(M N)` memory.
    pub fn to_dense(&self) -> Vec<Vec<F>> {
        let mut dense = vec![vec![F::zero(); self.devices()]; self.measurements()];
        let d = self.params.block_size;
        for t in 0..self.params.stages {
            for block in 0..self.params.blocks {
                let row = &mut dense[self.global_row(t, block)];
                row[block * d..(block + 1) * d].fill(self.sign(t, block));
            }
        }
        dense
    }

    /// Text sidecar: a version line, `R T L d alpha`, then one `t l q s`
    /// line per cell with 1-based `t`, `l`, `q`.
    pub fn to_sidecar_string(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{SIDECAR_MAGIC}");
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            p.rows_per_stage, p.stages, p.blocks, p.block_size, p.alpha
        );
        for t in 0..p.stages {
            for l in 0..p.blocks {
                let _ = writeln!(out, "{} {} {} {}", t + 1, l + 1, self.band_row(t, l) + 1, self.sign(t, l));
            }
        }
        out
    }

    pub fn write_sidecar<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_sidecar_string().as_bytes())?;
        Ok(())
    }

    pub fn read_sidecar<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(Error::from(e))),
        });
        let mut next = |what: &str| -> Result<(usize, String)> {
            lines.next().unwrap_or_else(|| {
                Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                })
            })
        };

        let (line, magic) = next("version line")?;
        if magic.trim() != SIDECAR_MAGIC {
            return Err(Error::Parse {
                line,
                msg: format!("unsupported header `{}`", magic.trim()),
            });
        }
        let (line, header) = next("dimension header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: "expected `R T L d alpha`".into(),
            });
        }
        let int = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("`{s}`: {e}"),
            })
        };
        let alpha = parse_real::<F>(fields[4], line)?;
        let params = MatrixParams::new(int(fields[0])?, int(fields[1])?, int(fields[2])?, int(fields[3])?, alpha)?;

        let cells = params.stages * params.blocks;
        let mut q = vec![usize::MAX; cells];
        let mut s = vec![F::zero(); cells];
        for _ in 0..cells {
            let (line, text) = next("cell line")?;
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: "expected `t l q s`".into(),
                });
            }
            let idx = |s: &str, max: usize| -> Result<usize> {
                let v = s.parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("`{s}`: {e}"),
                })?;
                if v == 0 || v > max {
                    return Err(Error::Parse {
                        line,
                        msg: format!("index {v} outside 1..={max}"),
                    });
                }
                Ok(v - 1)
            };
            let t = idx(f[0], params.stages)?;
            let l = idx(f[1], params.blocks)?;
            let cell = t * params.blocks + l;
            if q[cell] != usize::MAX {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate cell ({}, {})", t + 1, l + 1),
                });
            }
            q[cell] = idx(f[2], params.rows_per_stage)?;
            s[cell] = parse_real::<F>(f[3], line)?;
        }
        Self::from_parts(params, q, s)
    }
}

const SIDECAR_MAGIC: &str = "blockcs-structured-matrix v1";

fn parse_real<F: Real>(s: &str, line: usize) -> Result<F> {
    let v: f64 = s.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("`{s}`: {e}"),
    })?;
    F::from_f64(v).ok_or_else(|| Error::Parse {
        line,
        msg: format!("`{s}` not representable"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn sizing_rules() {
        assert_eq!(rows_required(3, 0.75).unwrap(), 8);
        assert_eq!(rows_required(1, 0.75).unwrap(), 1);
        assert_eq!(rows_required(4, 0.75).unwrap(), 12);
        assert!(rows_required(3, 0.5).is_err());
        assert!(rows_required(3, 1.0).is_err());
        assert_eq!(stages_required(400, 0.05).unwrap(), 13);
        assert_eq!(stages_required(10_000, 0.1).unwrap(), 17);
        let p = MatrixParams::sized_for(20, 20, 3, 0.75, 0.05, 1.0f64).unwrap();
        assert_eq!((p.rows_per_stage, p.stages), (8, 13));
    }

    #[test]
    fn single_row_matrix_is_constant() {
        let p = MatrixParams::new(1, 1, 1, 3, 1.0f64).unwrap();
        let m = StructuredMatrix::sample(p, &mut rng(1)).unwrap();
        let dense = m.to_dense();
        assert_eq!(dense.len(), 1);
        assert!(dense[0].iter().all(|&v| v == dense[0][0] && v.abs() == 1.0));
    }

    #[test]
    fn two_by_four_structure() {
        let p = MatrixParams::new(2, 1, 2, 2, 1.0f64).unwrap();
        for seed in 0..20 {
            let dense = StructuredMatrix::sample(p, &mut rng(seed)).unwrap().to_dense();
            for block in 0..2 {
                let nonzero: Vec<usize> = (0..2).filter(|&r| dense[r][2 * block] != 0.0).collect();
                assert_eq!(nonzero.len(), 1);
                let r = nonzero[0];
                assert_eq!(dense[r][2 * block], dense[r][2 * block + 1]);
                assert_eq!(dense[1 - r][2 * block], 0.0);
                assert_eq!(dense[1 - r][2 * block + 1], 0.0);
            }
        }
    }

    #[test]
    fn block_rows_formula() {
        let p = MatrixParams::new(3, 2, 1, 2, 1.0f64).unwrap();
        let m = StructuredMatrix::from_parts(p, vec![1, 0], vec![1.0, -1.0]).unwrap();
        assert_eq!(m.block_rows(0).unwrap(), vec![1, 3]);
        assert!(m.block_rows(1).is_err());

        let p1 = MatrixParams::new(5, 1, 2, 2, 1.0f64).unwrap();
        let m1 = StructuredMatrix::from_parts(p1, vec![4, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(m1.block_rows(1).unwrap(), vec![2]);
    }

    #[test]
    fn signatures_within_block_coincide() {
        let p = MatrixParams::new(4, 3, 3, 4, 1.0f64).unwrap();
        let m = StructuredMatrix::sample(p, &mut rng(2)).unwrap();
        for dev in 0..12 {
            let col = m.signature(dev).unwrap();
            assert_eq!(col.rows.len(), 3);
            assert_eq!(col, m.signature((dev / 4) * 4).unwrap());
        }
        assert!(m.signature(12).is_err());
    }

    #[test]
    fn stage_agreement_between_blocks() {
        // Enumerate every (q, s) assignment of a 2-block, 1-stage, R=2 matrix.
        let p = MatrixParams::new(2, 1, 2, 1, 1.0f64).unwrap();
        for q0 in 0..2 {
            for q1 in 0..2 {
                for s0 in [-1.0, 1.0] {
                    for s1 in [-1.0, 1.0] {
                        let m = StructuredMatrix::from_parts(p, vec![q0, q1], vec![s0, s1]).unwrap();
                        let a = m.signature(0).unwrap();
                        let b = m.signature(1).unwrap();
                        assert_eq!(a == b, q0 == q1 && s0 == s1);
                    }
                }
            }
        }
    }

    #[test]
    fn measure_single_block() {
        let p = MatrixParams::new(4, 1, 3, 5, 1.0f64).unwrap();
        let m = StructuredMatrix::sample(p, &mut rng(3)).unwrap();
        let x = ActivationPattern::from_supports(3, 5, vec![vec![], vec![0, 2, 4], vec![]]).unwrap();
        let y = m.measure(&x).unwrap();
        let nz: Vec<usize> = (0..4).filter(|&r| y[r] != 0.0).collect();
        assert_eq!(nz, vec![m.band_row(0, 1)]);
        assert_eq!(y[nz[0]], 3.0 * m.sign(0, 1));
        assert!(m.measure(&ActivationPattern::empty(3, 5)).unwrap().iter().all(|&v| v == 0.0));
        assert!(m.measure(&ActivationPattern::empty(2, 5)).is_err());
    }

    #[test]
    fn rejects_malformed_parts() {
        let p = MatrixParams::new(2, 1, 2, 1, 1.0f64).unwrap();
        assert!(StructuredMatrix::from_parts(p, vec![0], vec![1.0]).is_err());
        assert!(StructuredMatrix::from_parts(p, vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(StructuredMatrix::from_parts(p, vec![0, 1], vec![1.0, 0.5]).is_err());
        assert!(MatrixParams::new(0, 1, 1, 1, 1.0f64).is_err());
        assert!(MatrixParams::new(1, 1, 1, 1, -1.0f64).is_err());
    }

    #[test]
    fn sidecar_round_trip_and_errors() {
        let p = MatrixParams::new(5, 3, 4, 7, 0.5f64).unwrap();
        let m = StructuredMatrix::sample(p, &mut rng(4)).unwrap();
        let text = m.to_sidecar_string();
        let back = StructuredMatrix::<f64>::read_sidecar(text.as_bytes()).unwrap();
        assert_eq!(back, m);

        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(StructuredMatrix::<f64>::read_sidecar(truncated.as_bytes()).is_err());
        let wrong = text.replacen("v1", "v9", 1);
        assert!(StructuredMatrix::<f64>::read_sidecar(wrong.as_bytes()).is_err());
    }
}
