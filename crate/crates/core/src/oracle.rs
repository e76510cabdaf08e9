//! Brute-force reference decoders for small instances.
//!
//! Nothing here calls into the production decoders: the block oracle works
//! on the dense expansion of the matrix and the in-block oracle solves its
//! own normal equations, so agreement with the fast paths is evidence rather
//! than a restatement.

use crate::error::{Error, Result};
use crate::inblock::DeviceSideProblem;
use crate::scalar::{Cplx, Real};
use crate::signature::StructuredMatrix;

/// Enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Largest block size `d` either oracle accepts.
    pub max_block_size: usize,
    /// Largest number of candidate supports the in-block oracle evaluates.
    pub max_support_enumeration: usize,
    /// Largest block count `L` for the block oracle.
    pub max_blocks: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_block_size: 12,
            max_support_enumeration: 10_000,
            max_blocks: 4,
        }
    }
}

/// Every count vector `c in {0..d}^L` whose realizations reproduce `y`
/// (within `tol` per entry), in lexicographic order.
pub fn exhaustive_block_decode<F: Real>(
    m: &StructuredMatrix<F>,
    y: &[F],
    tol: F,
    budget: &OracleBudget,
) -> Result<Vec<Vec<usize>>> {
    let (l, d) = (m.blocks(), m.block_size());
    if l > budget.max_blocks || d > budget.max_block_size {
        return Err(Error::BudgetExceeded(format!(
            "L={l}, d={d} exceeds L<={}, d<={}",
            budget.max_blocks, budget.max_block_size
        )));
    }
    if y.len() != m.measurements() {
        return Err(Error::Dimension {
            what: "observation",
            expected: m.measurements(),
            actual: y.len(),
        });
    }
    let dense = m.to_dense();
    let mut counts = vec![0usize; l];
    let mut found = Vec::new();
    loop {
        // Realize the counts with the first c offsets of each block.
        let mut x = vec![F::zero(); l * d];
        for (b, &c) in counts.iter().enumerate() {
            for o in 0..c {
                x[b * d + o] = F::one();
            }
        }
        let consistent = dense.iter().zip(y).all(|(row, &yr)| {
            let v: F = row.iter().zip(&x).map(|(&a, &xi)| a * xi).sum();
            (v - yr).abs() <= tol
        });
        if consistent {
            found.push(counts.clone());
        }
        // Odometer increment, last block fastest.
        let mut pos = l;
        loop {
            if pos == 0 {
                return Ok(found);
            }
            pos -= 1;
            if counts[pos] < d {
                counts[pos] += 1;
                for c in &mut counts[pos + 1..] {
                    *c = 0;
                }
                break;
            }
        }
    }
}

/// Best support found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct InBlockOracle<F> {
    pub support: Vec<usize>,
    pub residual_norm: F,
    /// Residual of the runner-up support, if there is one.
    pub runner_up_residual_norm: Option<F>,
    pub evaluated: usize,
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Size-`k` support with the smallest least-squares residual; ties go to
/// the lexicographically first support.
pub fn exhaustive_inblock_decode<F: Real>(
    p: &DeviceSideProblem<F>,
    k: usize,
    budget: &OracleBudget,
) -> Result<InBlockOracle<F>> {
    let d = p.block_size();
    let candidates = binomial(d, k);
    if d > budget.max_block_size || candidates > budget.max_support_enumeration {
        return Err(Error::BudgetExceeded(format!(
            "C({d}, {k}) = {candidates} supports, budget {} (d <= {})",
            budget.max_support_enumeration, budget.max_block_size
        )));
    }
    if k == 0 || k > d {
        return Err(Error::Parameter(format!("support size {k} outside 1..={d}")));
    }
    let mut best: Option<(Vec<usize>, F)> = None;
    let mut second: Option<F> = None;
    let mut evaluated = 0;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        evaluated += 1;
        let r = residual_norm(p, &combo);
        match &best {
            Some((_, b)) if !(r < *b) => {
                if second.is_none_or(|s| r < s) {
                    second = Some(r);
                }
            }
            _ => {
                if let Some((_, b)) = &best {
                    second = Some(*b);
                }
                best = Some((combo.clone(), r));
            }
        }
        if !next_combination(&mut combo, d) {
            break;
        }
    }
    let (support, residual_norm) = best.expect("at least one candidate");
    Ok(InBlockOracle {
        support,
        residual_norm,
        runner_up_residual_norm: second,
        evaluated,
    })
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `min_c ||y - Phi c||` via normal equations and Gauss-Jordan elimination
/// with partial pivoting; a tiny ridge keeps singular systems solvable.
fn residual_norm<F: Real>(p: &DeviceSideProblem<F>, support: &[usize]) -> F {
    let k = support.len();
    let rows = p.effective_count();
    let zero = Cplx::new(F::zero(), F::zero());
    let mut g = vec![vec![zero; k + 1]; k];
    let mut trace = F::zero();
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            let mut acc = zero;
            for u in 0..rows {
                acc += p.entry(u, ja).conj() * p.entry(u, jb);
            }
            g[a][b] = acc;
        }
        trace += g[a][a].re;
        let mut acc = zero;
        for u in 0..rows {
            acc += p.entry(u, ja).conj() * p.y()[u];
        }
        g[a][k] = acc;
    }
    let ridge = trace * F::epsilon() * F::lit(1e3) + F::min_positive_value();
    for (a, row) in g.iter_mut().enumerate() {
        row[a] += Cplx::new(ridge, F::zero());
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| g[x][col].norm().partial_cmp(&g[y][col].norm()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        g.swap(col, pivot);
        let diag = g[col][col];
        for c in col..=k {
            g[col][c] = g[col][c] / diag;
        }
        for r in 0..k {
            if r != col {
                let factor = g[r][col];
                for c in col..=k {
                    let v = g[col][c];
                    g[r][c] -= factor * v;
                }
            }
        }
    }
    let mut energy = F::zero();
    for u in 0..rows {
        let mut fit = zero;
        for (a, &ja) in support.iter().enumerate() {
            fit += p.entry(u, ja) * g[a][k];
        }
        energy += (p.y()[u] - fit).norm_sqr();
    }
    energy.sqrt()
}
