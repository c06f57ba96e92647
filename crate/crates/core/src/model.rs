//! Index structure of the cycle model and the structured matrices built on it.
//!
//! Indices are 0-based in code. Documentation, JSON and CSV follow the usual
//! 1-based convention: the cycle `C_n` has edges `(1,2), ..., (n-1,n), (1,n)`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::certify::MinorSpec;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, max_abs, CMatrix};

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex symmetric matrix.
///
/// Only the upper triangle is stored, so symmetry holds by construction:
/// `get(j, i)` reads the same slot as `get(i, j)`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<Complex64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![ZERO; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { ONE } else { ZERO })
    }

    /// Build from a function evaluated on the upper triangle `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    pub fn from_real_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_fn(n, |i, j| Complex64::new(f(i, j), 0.0))
    }

    /// Reads the upper triangle of a square matrix.
    pub fn from_dmatrix(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "SymMatrix needs a square matrix");
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "SymMatrix needs a square matrix");
        Self::from_real_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows 0..i hold n + (n-1) + ... + (n-i+1) entries
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.upper[self.slot(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self.slot(i, j);
        self.upper[s] = v;
    }

    /// Upper-triangle entries in row-major order, matching
    /// [`CycleModel::upper_positions`].
    pub fn upper(&self) -> &[Complex64] {
        &self.upper
    }

    pub fn to_dmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Real part as a dense matrix, or `None` if some imaginary part exceeds
    /// `tol` times the largest entry.
    pub fn to_real(&self, tol: f64) -> Option<DMatrix<f64>> {
        let scale = self.max_abs().max(1.0);
        if self.upper.iter().any(|z| z.im.abs() > tol * scale) {
            return None;
        }
        Some(DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).re))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Frobenius norm of the full (not packed) matrix.
    pub fn frobenius(&self) -> f64 {
        self.weighted_sq(|z| z.norm_sqr()).sqrt()
    }

    fn weighted_sq(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        let mut k = 0;
        let mut total = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                total += w * f(self.upper[k]);
                k += 1;
            }
        }
        total
    }

    /// Frobenius distance between two matrices of the same size.
    pub fn distance(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut k = 0;
        let mut total = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                total += w * (self.upper[k] - other.upper[k]).norm_sqr();
                k += 1;
            }
        }
        total.sqrt()
    }

    /// Distance, abandoned once it exceeds `cutoff` (then returns a value
    /// above `cutoff`).
    pub(crate) fn distance_below(&self, other: &SymMatrix, cutoff: f64) -> f64 {
        let limit = cutoff * cutoff;
        let mut k = 0;
        let mut total = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                total += w * (self.upper[k] - other.upper[k]).norm_sqr();
                if total > limit {
                    return total.sqrt();
                }
                k += 1;
            }
        }
        total.sqrt()
    }

    /// Real parts as dense rows, for CSV export.
    pub fn real_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).re).collect())
            .collect()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.n,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| {
                    let z = self.get(i, j);
                    if z.im == 0.0 {
                        format!("{:>9.5}", z.re)
                    } else {
                        format!("{:.5}{:+.5}i", z.re, z.im)
                    }
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let z = self.get(i, j);
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        let mut st = serializer.serialize_struct("SymMatrix", 2)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            entries: Vec<Vec<[f64; 2]>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.entries.len() != raw.n || raw.entries.iter().any(|r| r.len() != raw.n) {
            return Err(de::Error::custom(format!(
                "entries must be a dense {0}x{0} array",
                raw.n
            )));
        }
        let at = |i: usize, j: usize| {
            let [re, im] = raw.entries[i][j];
            Complex64::new(re, im)
        };
        let scale = (0..raw.n)
            .flat_map(|i| (0..raw.n).map(move |j| (i, j)))
            .fold(1.0f64, |m, (i, j)| m.max(at(i, j).norm()));
        for i in 0..raw.n {
            for j in i + 1..raw.n {
                if (at(i, j) - at(j, i)).norm() > 1e-12 * scale {
                    return Err(de::Error::custom(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix::from_fn(raw.n, at))
    }
}

/// Support of the cycle model `L_{C_n}`: the diagonal plus the `n` cycle edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleModel {
    n: usize,
    diag_positions: Vec<(usize, usize)>,
    edge_positions: Vec<(usize, usize)>,
}

impl CycleModel {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("a cycle needs n >= 3, got {n}")));
        }
        let diag_positions = (0..n).map(|i| (i, i)).collect();
        let mut edge_positions: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edge_positions.push((0, n - 1));
        Ok(Self {
            n,
            diag_positions,
            edge_positions,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag_positions(&self) -> &[(usize, usize)] {
        &self.diag_positions
    }

    pub fn edge_positions(&self) -> &[(usize, usize)] {
        &self.edge_positions
    }

    /// Diagonal positions followed by edge positions; this fixes the
    /// coordinate order of every `2n`-vector over the support.
    pub fn support(&self) -> Vec<(usize, usize)> {
        self.diag_positions
            .iter()
            .chain(&self.edge_positions)
            .copied()
            .collect()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        j == i + 1 || (i == 0 && j == self.n - 1)
    }

    pub fn is_support(&self, i: usize, j: usize) -> bool {
        i == j || self.is_edge(i, j)
    }

    /// All upper-triangle positions in row-major order.
    pub fn upper_positions(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i..self.n).map(move |j| (i, j)))
            .collect()
    }

    /// Upper-triangle positions outside the support (the coordinates of `L^perp`).
    pub fn off_support(&self) -> Vec<(usize, usize)> {
        self.upper_positions()
            .into_iter()
            .filter(|&(i, j)| !self.is_support(i, j))
            .collect()
    }

    /// Number of upper-triangle coordinates, `n(n+1)/2`.
    pub fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
}

/// Element of the group of diagonal `+-1` matrices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignDiag {
    signs: Vec<i8>,
}

impl SignDiag {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::InvalidArgument(format!("sign entries must be +-1, got {bad}")));
        }
        Ok(Self { signs })
    }

    pub fn identity(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    /// Bit `i` of `mask` set means the `i`-th sign is `-1`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            signs: (0..n)
                .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
                .collect(),
        }
    }

    /// `diag((-1)^i)` in 1-based indexing: `(-, +, -, +, ...)`.
    pub fn alternating(n: usize) -> Self {
        Self {
            signs: (0..n).map(|i| if i % 2 == 0 { -1 } else { 1 }).collect(),
        }
    }

    /// Every group element, in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = SignDiag> {
        assert!(n < 64, "sign group too large to enumerate");
        (0..1u64 << n).map(move |mask| SignDiag::from_mask(n, mask))
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    /// Group law: entrywise product.
    pub fn compose(&self, other: &SignDiag) -> SignDiag {
        assert_eq!(self.n(), other.n());
        SignDiag {
            signs: self.signs.iter().zip(&other.signs).map(|(a, b)| a * b).collect(),
        }
    }
}

impl Serialize for SignDiag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.signs.serialize(serializer)
    }
}

/// Which structured matrix [`m_matrix`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Tridiagonal `M_n(x)`.
    Path,
    /// `M_n^+(x)`: corner entries `+x`.
    Plus,
    /// `M_n^-(x)`: corner entries `-x`.
    Minus,
}

/// Cyclic shift used by [`shift_conjugate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    Plus,
    Minus,
}

/// Unit diagonal with `x` on the path edges; `Plus`/`Minus` also put `+-x`
/// in the `(1,n)` corner.
pub fn m_matrix(n: usize, x: Complex64, variant: Variant) -> Result<SymMatrix> {
    let min = if variant == Variant::Path { 1 } else { 3 };
    if n < min {
        return Err(Error::InvalidArgument(format!(
            "{variant:?} matrix needs n >= {min}, got {n}"
        )));
    }
    let mut m = SymMatrix::identity(n);
    for i in 0..n.saturating_sub(1) {
        m.set(i, i + 1, x);
    }
    match variant {
        Variant::Path => {}
        Variant::Plus => m.set(0, n - 1, x),
        Variant::Minus => m.set(0, n - 1, -x),
    }
    Ok(m)
}

/// The 0/1 matrix with ones exactly where `i + j` is even.
pub fn checkerboard(n: usize) -> Result<SymMatrix> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "checkerboard census points need even n >= 4, got {n}"
        )));
    }
    Ok(SymMatrix::from_real_fn(n, |i, j| {
        if (i + j) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }))
}

/// `D A D`.
pub fn conjugate_sign(a: &SymMatrix, d: &SignDiag) -> Result<SymMatrix> {
    a.check_dim(d.n())?;
    let s = d.signs();
    Ok(SymMatrix::from_fn(a.n(), |i, j| {
        if s[i] * s[j] == 1 {
            a.get(i, j)
        } else {
            -a.get(i, j)
        }
    }))
}

/// `N A N^{-1}` for the cyclic shift `N = N_n^+` or the twisted `N_n^-`.
///
/// Entry `(i, j)` of the result is `A(i+1, j+1)` with indices mod `n`; the
/// minus shift also negates every entry that wraps exactly one index.
pub fn shift_conjugate(a: &SymMatrix, shift: Shift) -> Result<SymMatrix> {
    let n = a.n();
    if n == 0 {
        return Ok(a.clone());
    }
    let last = n - 1;
    Ok(SymMatrix::from_fn(n, |i, j| {
        let v = a.get((i + 1) % n, (j + 1) % n);
        let flips = (i == last) as u8 + (j == last) as u8;
        if shift == Shift::Minus && flips == 1 {
            -v
        } else {
            v
        }
    }))
}

/// Keeps the support entries (diagonal and cycle edges).
pub fn project_l(a: &SymMatrix, model: &CycleModel) -> Result<SymMatrix> {
    a.check_dim(model.n())?;
    Ok(SymMatrix::from_fn(a.n(), |i, j| {
        if model.is_support(i, j) {
            a.get(i, j)
        } else {
            ZERO
        }
    }))
}

/// Keeps the entries off the support.
pub fn project_lperp(a: &SymMatrix, model: &CycleModel) -> Result<SymMatrix> {
    a.check_dim(model.n())?;
    Ok(SymMatrix::from_fn(a.n(), |i, j| {
        if model.is_support(i, j) {
            ZERO
        } else {
            a.get(i, j)
        }
    }))
}

/// Membership in `Id + L^perp`: unit diagonal and zero cycle edges.
pub fn in_affine_slice(a: &SymMatrix, model: &CycleModel, tol: f64) -> bool {
    a.n() == model.n()
        && model
            .diag_positions()
            .iter()
            .all(|&(i, j)| (a.get(i, j) - ONE).norm() <= tol)
        && model
            .edge_positions()
            .iter()
            .all(|&(i, j)| a.get(i, j).norm() <= tol)
}

/// Membership in the inverse variety `L^{-1}`.
///
/// An invertible `A` (condition number below `1/tol`) belongs iff `A^{-1}`
/// vanishes off the support, relative to its largest entry. A singular `A`
/// is judged by the supplied vanishing minors instead: every minor must be
/// at most `tol * max|A_ij|^3`.
pub fn in_l_inverse(
    a: &SymMatrix,
    model: &CycleModel,
    tol: f64,
    minors: Option<&[MinorSpec]>,
) -> Result<bool> {
    a.check_dim(model.n())?;
    let dense = a.to_dmatrix();
    if condition_number(&dense) < 1.0 / tol {
        let inv = dense
            .try_inverse()
            .ok_or_else(|| Error::ValidationFailure("inversion failed below the condition cutoff".into()))?;
        let bound = tol * max_abs(&inv);
        return Ok(model
            .off_support()
            .iter()
            .all(|&(i, j)| inv[(i, j)].norm() <= bound));
    }
    let minors = minors.ok_or(Error::NeedsMinors)?;
    let bound = tol * a.max_abs().powi(3);
    Ok(minors.iter().all(|m| m.value(a).norm() <= bound))
}
