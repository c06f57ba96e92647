//! Thin wrappers over nalgebra for the dense complex work shared by modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;

/// Singular values sorted in decreasing order.
pub(crate) fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number; infinite for numerically rank-deficient input.
pub(crate) fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Determinant of a 3x3 complex block given row-major.
pub(crate) fn det3(a: &[[Complex64; 3]; 3]) -> Complex64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Signed cofactor matrix of a 3x3 block: `cof[r][c] = d det / d a[r][c]`.
pub(crate) fn cofactors3(a: &[[Complex64; 3]; 3]) -> [[Complex64; 3]; 3] {
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            let (r0, r1) = ((r + 1) % 3, (r + 2) % 3);
            let (c0, c1) = ((c + 1) % 3, (c + 2) % 3);
            // cyclic index order folds in the (-1)^(r+c) sign
            *slot = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn cofactors_match_finite_differences() {
        let a = [
            [c(1.0), c(2.0), c(-0.5)],
            [c(0.3), c(-1.2), c(0.7)],
            [c(2.2), c(0.1), c(0.9)],
        ];
        let cof = cofactors3(&a);
        let h = 1e-6;
        for r in 0..3 {
            for col in 0..3 {
                let mut up = a;
                let mut dn = a;
                up[r][col] += h;
                dn[r][col] -= h;
                let fd = (det3(&up) - det3(&dn)) / (2.0 * h);
                assert!((fd - cof[r][col]).norm() < 1e-8, "({r},{col})");
            }
        }
    }

    #[test]
    fn condition_of_singular_is_huge() {
        let m = CMatrix::from_element(3, 3, c(1.0));
        assert!(condition_number(&m) > 1e12);
        assert!((condition_number(&CMatrix::identity(4, 4)) - 1.0).abs() < 1e-12);
    }
}
