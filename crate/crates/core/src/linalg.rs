//! Small dense complex least squares for the in-block decoder.

use crate::scalar::{cdot, cnorm_sqr, Cplx, Real};

/// Orthonormal basis grown one column at a time by modified Gram-Schmidt
/// with one reorthogonalization pass.
#[derive(Debug, Clone)]
pub(crate) struct IncrementalQr<F> {
    rows: usize,
    q: Vec<Vec<Cplx<F>>>,
    // r[j] holds the first j+1 coefficients of column j.
    r: Vec<Vec<Cplx<F>>>,
}

impl<F: Real> IncrementalQr<F> {
    pub(crate) fn new(rows: usize) -> Self {
        Self {
            rows,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn rank(&self) -> usize {
        self.q.len()
    }

    /// Adds `col`; returns `false` (and leaves the basis unchanged) if it is
    /// numerically inside the current span.
    pub(crate) fn push(&mut self, col: &[Cplx<F>]) -> bool {
        debug_assert_eq!(col.len(), self.rows);
        let original = cnorm_sqr(col).sqrt();
        if self.q.len() >= self.rows || original == F::zero() {
            return false;
        }
        let mut v = col.to_vec();
        let mut coeffs = vec![Cplx::new(F::zero(), F::zero()); self.q.len() + 1];
        for _pass in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = cdot(qk, &v);
                coeffs[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= qi * c;
                }
            }
        }
        let norm = cnorm_sqr(&v).sqrt();
        if norm <= original * F::epsilon().sqrt() * F::lit(1e-3) {
            return false;
        }
        let inv = F::one() / norm;
        for vi in &mut v {
            *vi = vi.scale(inv);
        }
        *coeffs.last_mut().expect("nonempty") = Cplx::new(norm, F::zero());
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Removes the component of `y` inside the span: `y - Q Q^H y`.
    pub(crate) fn project_out(&self, y: &[Cplx<F>]) -> Vec<Cplx<F>> {
        let mut res = y.to_vec();
        for _pass in 0..2 {
            for qk in &self.q {
                let c = cdot(qk, &res);
                for (ri, qi) in res.iter_mut().zip(qk) {
                    *ri -= qi * c;
                }
            }
        }
        res
    }

    /// Least-squares coefficients of `y` on the pushed columns.
    pub(crate) fn solve(&self, y: &[Cplx<F>]) -> Vec<Cplx<F>> {
        let k = self.q.len();
        let rhs: Vec<Cplx<F>> = self.q.iter().map(|qk| cdot(qk, y)).collect();
        let mut c = vec![Cplx::new(F::zero(), F::zero()); k];
        for j in (0..k).rev() {
            let mut acc = rhs[j];
            for i in j + 1..k {
                acc -= self.r[i][j] * c[i];
            }
            c[j] = acc / self.r[j][j];
        }
        c
    }
}

/// Minimum-norm least-squares solution `Phi^+ y` via the eigendecomposition
/// of the Gram matrix (embedded as a real symmetric matrix of twice the size).
pub(crate) fn pinv_solve<F: Real>(columns: &[&[Cplx<F>]], y: &[Cplx<F>]) -> Vec<Cplx<F>> {
    let k = columns.len();
    if k == 0 {
        return Vec::new();
    }
    let n = 2 * k;
    let mut g = vec![vec![F::zero(); n]; n];
    let mut b = vec![F::zero(); n];
    for i in 0..k {
        let bi = cdot(columns[i], y);
        b[i] = bi.re;
        b[i + k] = bi.im;
        for j in 0..k {
            let gij = cdot(columns[i], columns[j]);
            g[i][j] = gij.re;
            g[i + k][j + k] = gij.re;
            g[i][j + k] = -gij.im;
            g[i + k][j] = gij.im;
        }
    }
    let (values, vectors) = symmetric_eigen(g);
    let top = values.iter().copied().fold(F::zero(), F::max);
    let tol = top * F::from_count(n) * F::epsilon() * F::lit(100.0);
    let mut sol = vec![F::zero(); n];
    for (idx, &lambda) in values.iter().enumerate() {
        if lambda <= tol {
            continue;
        }
        let proj: F = (0..n).map(|r| vectors[r][idx] * b[r]).sum::<F>() / lambda;
        for r in 0..n {
            sol[r] += vectors[r][idx] * proj;
        }
    }
    (0..k).map(|i| Cplx::new(sol[i], sol[i + k])).collect()
}

/// Cyclic Jacobi eigendecomposition. Returns eigenvalues and a matrix whose
/// columns are the eigenvectors.
pub(crate) fn symmetric_eigen<F: Real>(mut a: Vec<Vec<F>>) -> (Vec<F>, Vec<Vec<F>>) {
    let n = a.len();
    let mut v = vec![vec![F::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = F::one();
    }
    let two = F::lit(2.0);
    for _sweep in 0..100 {
        let off: F = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: F = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= diag * F::epsilon() * F::epsilon() || off == F::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == F::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}
