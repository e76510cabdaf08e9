//! Reference schemes: centralized OMP over dense Gaussian measurements,
//! preamble-based random access, and cluster-head aggregated access.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ActivationPattern;
use crate::scalar::{dot, Real};

/// Dense `M x N` matrix with i.i.d. `N(0, 1/M)` entries, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> GaussianMatrix<F> {
    pub fn sample<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter("Gaussian matrix needs M, N >= 1".into()));
        }
        let scale = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| F::lit(scale * { let v: f64 = StandardNormal.sample(rng); v }))
            .collect();
        Ok(Self { rows, cols, data })
    }

    /// Builds from columns.
    pub fn from_columns(columns: &[Vec<F>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if rows == 0 || columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Parameter("columns must be nonempty and equally long".into()));
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data: columns.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[F] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// `A x` for a binary pattern.
    pub fn measure(&self, x: &ActivationPattern) -> Result<Vec<F>> {
        if x.devices() != self.cols {
            return Err(Error::Dimension {
                what: "activation pattern",
                expected: self.cols,
                actual: x.devices(),
            });
        }
        let mut y = vec![F::zero(); self.rows];
        for i in x.active_devices() {
            for (yi, &a) in y.iter_mut().zip(self.column(i)) {
                *yi += a;
            }
        }
        Ok(y)
    }
}

/// Residual-based stopping for [`standard_omp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule<F> {
    /// Stop once `||r|| <= tolerance`.
    pub tolerance: F,
    pub max_iterations: usize,
    /// Score columns by correlation divided by column norm.
    pub normalize: bool,
}

impl<F: Real> StopRule<F> {
    /// Tolerance matched to the expected noise energy: `sigma * sqrt(M)`,
    /// with a tiny relative floor for the noiseless case.
    pub fn for_noise(sigma: F, rows: usize, y_norm: F, max_iterations: usize) -> Self {
        let noise = sigma * F::from_count(rows).sqrt();
        Self {
            tolerance: noise.max(y_norm * F::lit(1e-9)),
            max_iterations,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutcome<F> {
    /// Selected columns, ascending.
    pub support: Vec<usize>,
    pub selection_order: Vec<usize>,
    pub iterations: usize,
    pub residual_norm: F,
    /// Selection stopped because the next atom was linearly dependent.
    pub rank_deficient: bool,
}

/// Classic OMP with residual-threshold stopping. Least squares is solved
/// through an incrementally extended Cholesky factor of the Gram matrix.
pub fn standard_omp<F: Real>(a: &GaussianMatrix<F>, y: &[F], stop: &StopRule<F>) -> Result<OmpOutcome<F>> {
    if y.len() != a.rows {
        return Err(Error::Dimension {
            what: "observation",
            expected: a.rows,
            actual: y.len(),
        });
    }
    let n = a.cols;
    let norms: Vec<F> = (0..n).map(|j| dot(a.column(j), a.column(j))).collect();
    let rhs_all: Vec<F> = (0..n).map(|j| dot(a.column(j), y)).collect();
    let limit = stop.max_iterations.min(n).min(a.rows);

    let mut selected = vec![false; n];
    let mut order: Vec<usize> = Vec::new();
    // Lower-triangular Cholesky factor of the Gram matrix, row by row.
    let mut chol: Vec<Vec<F>> = Vec::new();
    let mut residual = y.to_vec();
    let mut rank_deficient = false;

    loop {
        let rnorm = dot(&residual, &residual).sqrt();
        if rnorm <= stop.tolerance || order.len() >= limit {
            break;
        }
        let mut best: Option<(usize, F)> = None;
        for j in (0..n).filter(|&j| !selected[j]) {
            let c = dot(a.column(j), &residual);
            let score = if stop.normalize && norms[j] > F::zero() {
                c * c / norms[j]
            } else {
                c * c
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((pick, _)) = best else { break };

        // Extend the factor: solve L w = Phi^T a_pick, diagonal sqrt(|a|^2 - |w|^2).
        let col = a.column(pick);
        let cross: Vec<F> = order.iter().map(|&j| dot(a.column(j), col)).collect();
        let w = forward(&chol, &cross);
        let diag2 = norms[pick] - dot(&w, &w);
        if !(diag2 > norms[pick] * F::epsilon() * F::lit(16.0)) {
            rank_deficient = true;
            break;
        }
        let mut row = w;
        row.push(diag2.sqrt());
        chol.push(row);
        selected[pick] = true;
        order.push(pick);

        let rhs: Vec<F> = order.iter().map(|&j| rhs_all[j]).collect();
        let coef = backward(&chol, &forward(&chol, &rhs));
        residual.copy_from_slice(y);
        for (&j, &c) in order.iter().zip(&coef) {
            for (ri, &aij) in residual.iter_mut().zip(a.column(j)) {
                *ri -= aij * c;
            }
        }
    }

    let mut support = order.clone();
    support.sort_unstable();
    Ok(OmpOutcome {
        iterations: order.len(),
        support,
        selection_order: order,
        residual_norm: dot(&residual, &residual).sqrt(),
        rank_deficient,
    })
}

fn forward<F: Real>(l: &[Vec<F>], b: &[F]) -> Vec<F> {
    let mut x = Vec::with_capacity(b.len());
    for (i, row) in l.iter().enumerate() {
        let acc = b[i] - (0..i).map(|k| row[k] * x[k]).sum::<F>();
        x.push(acc / row[i]);
    }
    x
}

fn backward<F: Real>(l: &[Vec<F>], b: &[F]) -> Vec<F> {
    let n = b.len();
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let acc = b[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<F>();
        x[i] = acc / l[i][i];
    }
    x
}

/// Random-access contention parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaParams {
    /// Size of the preamble pool.
    pub preambles: usize,
    /// Attempts before a device gives up.
    pub max_attempts: u32,
    /// A collided device retries after a uniform wait in `1..=backoff_slots`.
    pub backoff_slots: u32,
}

impl Default for RaParams {
    fn default() -> Self {
        Self {
            preambles: 64,
            max_attempts: 10,
            backoff_slots: 20,
        }
    }
}

impl RaParams {
    pub fn validate(&self) -> Result<()> {
        if self.preambles == 0 || self.max_attempts == 0 || self.backoff_slots == 0 {
            return Err(Error::Parameter(
                "preambles, max_attempts and backoff_slots must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-device access outcome.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessOutcome {
    /// Succeeded within the attempt limit.
    pub succeeded: Vec<bool>,
    /// Succeeded at the very first attempt.
    pub first_attempt: Vec<bool>,
    /// Slot of the successful attempt, or of the last attempt on failure.
    pub delay_units: Vec<u32>,
}

impl AccessOutcome {
    pub fn successes(&self) -> usize {
        self.succeeded.iter().filter(|&&s| s).count()
    }

    pub fn first_attempt_successes(&self) -> usize {
        self.first_attempt.iter().filter(|&&s| s).count()
    }
}

/// Slotted preamble contention: in every slot each contending device draws a
/// preamble uniformly; a preamble drawn by exactly one device succeeds.
pub fn lte_ra_trial<R: Rng + ?Sized>(k_active: usize, p: &RaParams, rng: &mut R) -> Result<AccessOutcome> {
    p.validate()?;
    let mut out = AccessOutcome {
        succeeded: vec![false; k_active],
        first_attempt: vec![false; k_active],
        delay_units: vec![0; k_active],
    };
    let mut attempts = vec![0u32; k_active];
    let mut schedule: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    if k_active > 0 {
        schedule.insert(1, (0..k_active).collect());
    }
    let mut drawn: Vec<usize> = Vec::new();
    let mut users = vec![0u32; p.preambles];
    while let Some((slot, devices)) = schedule.pop_first() {
        drawn.clear();
        drawn.extend(devices.iter().map(|_| rng.random_range(0..p.preambles)));
        for &pre in &drawn {
            users[pre] += 1;
        }
        for (&dev, &pre) in devices.iter().zip(&drawn) {
            attempts[dev] += 1;
            if users[pre] == 1 {
                out.succeeded[dev] = true;
                out.first_attempt[dev] = attempts[dev] == 1;
                out.delay_units[dev] = slot;
            } else if attempts[dev] >= p.max_attempts {
                out.delay_units[dev] = slot;
            } else {
                let wait = rng.random_range(1..=p.backoff_slots);
                schedule.entry(slot + wait).or_default().push(dev);
            }
        }
        for &pre in &drawn {
            users[pre] = 0;
        }
    }
    Ok(out)
}

/// Cluster-head access: the head of every active block contends once on
/// behalf of its members; members inherit the head's outcome and pay
/// `aggregation_overhead` extra units. Devices are reported in the order of
/// [`ActivationPattern::active_devices`].
pub fn cluster_head_trial<R: Rng + ?Sized>(
    pattern: &ActivationPattern,
    p: &RaParams,
    aggregation_overhead: u32,
    rng: &mut R,
) -> Result<AccessOutcome> {
    let heads = lte_ra_trial(pattern.block_support().len(), p, rng)?;
    let mut out = AccessOutcome::default();
    for (h, &block) in pattern.block_support().iter().enumerate() {
        for _ in 0..pattern.count(block) {
            out.succeeded.push(heads.succeeded[h]);
            out.first_attempt.push(heads.first_attempt[h]);
            out.delay_units.push(heads.delay_units[h] + aggregation_overhead);
        }
    }
    Ok(out)
}
