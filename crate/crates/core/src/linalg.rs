//! Small dense-vector helpers for ambient-space computations.
//!
//! Manifold points live in at most ℝ¹⁶ (the Sp(2) ambient), so a fixed-size
//! copyable vector avoids allocation in the finite-difference hot paths.
//! Matrix work (Gram eigenvalues, linear solves, least squares) goes through
//! nalgebra.

use nalgebra::{DMatrix, DVector};

pub const MAX_AMBIENT: usize = 16;

/// Fixed-capacity ambient vector.
#[derive(Debug, Clone, Copy)]
pub struct AmbVec {
    pub n: usize,
    a: [f64; MAX_AMBIENT],
}

impl AmbVec {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_AMBIENT);
        Self {
            n,
            a: [0.0; MAX_AMBIENT],
        }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut v = Self::zeros(s.len());
        v.a[..s.len()].copy_from_slice(s);
        v
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.a[..self.n]
    }

    pub fn dot(&self, o: &AmbVec) -> f64 {
        debug_assert_eq!(self.n, o.n);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.a[i] * o.a[i];
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> AmbVec {
        let mut r = *self;
        for i in 0..self.n {
            r.a[i] *= s;
        }
        r
    }

    pub fn add(&self, o: &AmbVec) -> AmbVec {
        debug_assert_eq!(self.n, o.n);
        let mut r = *self;
        for i in 0..self.n {
            r.a[i] += o.a[i];
        }
        r
    }

    pub fn sub(&self, o: &AmbVec) -> AmbVec {
        debug_assert_eq!(self.n, o.n);
        let mut r = *self;
        for i in 0..self.n {
            r.a[i] -= o.a[i];
        }
        r
    }

    /// self + s · o
    pub fn axpy(&self, s: f64, o: &AmbVec) -> AmbVec {
        debug_assert_eq!(self.n, o.n);
        let mut r = *self;
        for i in 0..self.n {
            r.a[i] += s * o.a[i];
        }
        r
    }
}

impl std::ops::Index<usize> for AmbVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.a[i]
    }
}

impl std::ops::IndexMut<usize> for AmbVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.a[i]
    }
}

/// Eigenvalues of a small symmetric matrix, ascending.
pub fn sym_eigenvalues(g: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = g.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Number of negative eigenvalues of a symmetric Gram matrix (the metric index).
pub fn metric_index(g: &DMatrix<f64>) -> usize {
    sym_eigenvalues(g).iter().filter(|&&l| l < 0.0).count()
}

/// Solve the square system `A x = b` by LU with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Least-squares solution of an overdetermined `A x = b` via normal equations
/// (the systems here are tiny and well conditioned).
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let at = a.transpose();
    (&at * a).lu().solve(&(at * b))
}

/// Rank of the span of `vecs` relative to a threshold on singular values.
pub fn span_rank(vecs: &[AmbVec], rel_tol: f64) -> usize {
    if vecs.is_empty() {
        return 0;
    }
    let n = vecs[0].n;
    let m = DMatrix::from_fn(vecs.len(), n, |i, j| vecs[i][j]);
    let sv = m.svd(false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Modified Gram-Schmidt returning an orthonormal basis of the span.
/// Vectors with residual norm below `drop_tol` are dropped.
pub fn orthonormalize(vecs: &[AmbVec], drop_tol: f64) -> Vec<AmbVec> {
    let mut basis: Vec<AmbVec> = Vec::with_capacity(vecs.len());
    for v in vecs {
        let mut w = *v;
        for b in &basis {
            let c = w.dot(b);
            w = w.axpy(-c, b);
        }
        // second pass for numerical orthogonality
        for b in &basis {
            let c = w.dot(b);
            w = w.axpy(-c, b);
        }
        let n = w.norm();
        if n > drop_tol {
            basis.push(w.scale(1.0 / n));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormalize_drops_dependent() {
        let v1 = AmbVec::from_slice(&[1.0, 0.0, 0.0]);
        let v2 = AmbVec::from_slice(&[1.0, 1.0, 0.0]);
        let v3 = AmbVec::from_slice(&[2.0, 1.0, 0.0]); // dependent
        let b = orthonormalize(&[v1, v2, v3], 1e-10);
        assert_eq!(b.len(), 2);
        assert!((b[0].dot(&b[1])).abs() < 1e-14);
        assert!((b[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn metric_index_counts_negatives() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -1.0, 3.0]));
        assert_eq!(metric_index(&g), 1);
    }
}
