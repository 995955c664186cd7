//! Small dense linear-algebra helpers shared by the analysis modules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Singular values below this fraction of the largest one count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values of a complex matrix in descending order.
pub fn singular_values_complex(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Principal branch in `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// `sum_i conj(a_i) b_i`.
pub fn cdot(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn complexify(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Least-squares solution of `a x = b` through the pseudo-inverse.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    svd.solve(b, DEFAULT_RANK_TOL * top.max(f64::MIN_POSITIVE)).expect("u and v were computed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_matrices() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(numerical_rank(&m, DEFAULT_RANK_TOL), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), DEFAULT_RANK_TOL), 0);
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), DEFAULT_RANK_TOL), 4);
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 3), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.25), 0.25);
    }
}
