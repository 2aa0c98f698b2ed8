//! Small dense complex linear algebra on the two-atom Hilbert space.
//!
//! The single-atom basis is `{|0>, |1>, |r>}` (indices 0, 1, 2) and the
//! two-atom basis is the lexicographic product, so `|a, b>` sits at
//! `3 * a + b` with atom 1 as the most significant digit.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
pub use num_complex::Complex64 as C64;

pub type Mat3 = SMatrix<C64, 3, 3>;
pub type Mat4 = SMatrix<C64, 4, 4>;
pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Single-atom level labels.
pub const L0: usize = 0;
pub const L1: usize = 1;
pub const LR: usize = 2;

/// Index of `|a, b>` in the two-atom product basis.
#[inline]
pub const fn pair(a: usize, b: usize) -> usize {
    3 * a + b
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Kronecker product of two 3x3 operators.
pub fn kron3(a: &Mat3, b: &Mat3) -> Mat9 {
    Mat9::from_fn(|i, j| a[(i / 3, j / 3)] * b[(i % 3, j % 3)])
}

/// Kronecker product of two 2x2 operators given as `DMatrix`.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Largest element-wise deviation of `m` from its conjugate transpose.
pub fn hermiticity_defect<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Eigenvectors are the columns of the returned matrix, each with its
/// largest-magnitude component made real and positive so that results are
/// reproducible across calls.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    // Symmetrize against round-off before handing to the solver.
    let herm = (m + m.adjoint()) * c(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v: DVector<C64> = eig.eigenvectors.column(k).into_owned();
        fix_phase(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Rotate `v` so that its largest component is real and positive.
pub fn fix_phase(v: &mut DVector<C64>) {
    let mut pivot = ZERO;
    let mut best = -1.0;
    for z in v.iter() {
        // Small slack so ties resolve to the first index.
        if z.norm() > best + 1e-12 {
            best = z.norm();
            pivot = *z;
        }
    }
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

pub fn to_dmatrix<const N: usize>(m: &SMatrix<C64, N, N>) -> DMatrix<C64> {
    DMatrix::from_fn(N, N, |i, j| m[(i, j)])
}

/// Squared norm of a 9-component state.
pub fn norm_sqr(v: &Vec9) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `<a|b>` with `a` conjugated.
pub fn inner<const N: usize>(a: &SVector<C64, N>, b: &SVector<C64, N>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Reduce an angle to `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_is_lexicographic() {
        assert_eq!(pair(L0, L0), 0);
        assert_eq!(pair(L1, LR), 5);
        assert_eq!(pair(LR, L1), 7);
        assert_eq!(pair(LR, LR), 8);
    }

    #[test]
    fn eigh_sorts_and_normalizes() {
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), c(2.0)]);
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            assert!((v.norm() - 1.0).abs() < 1e-14);
            let mv = &m * v;
            assert!((mv - v * c(val)).norm() < 1e-13);
        }
    }

    #[test]
    fn wrap_phase_range() {
        use std::f64::consts::PI;
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
