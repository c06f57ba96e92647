//! Transversality certificates and the quartic ideal identities.
//!
//! The inverse variety `L^{-1}` is cut out by 3x3 minors. Rather than
//! transcribing a combinatorial description of which minors, they are
//! harvested: a minor is kept when it vanishes on a batch of random points
//! `K^{-1}`, `K` in `L`. At a census point the Jacobian of the harvested
//! minors together with the slice equations `x_ii = 1`, `x_edge = 0` must
//! have full rank `n(n+1)/2`; that rank is certified from its singular values.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intersect::{CensusReport, IntersectionPoint};
use crate::linalg::{cofactors3, condition_number, det3, singular_values, CMatrix};
use crate::model::{CycleModel, SymMatrix};

/// Relative tolerance for harvesting minors.
pub const HARVEST_TOL: f64 = 1e-9;
/// Random points each harvested minor must vanish on.
pub const HARVEST_SAMPLES: usize = 20;
/// Singular-value ratio below which a direction counts as rank-deficient.
pub const RANK_RATIO: f64 = 1e-8;

const MAX_RESHIFTS: usize = 10;
const SAMPLE_COND_LIMIT: f64 = 1e6;

/// A 3x3 minor `det M(I, J)`.
///
/// For a symmetric matrix `det M(I, J) = det M(J, I)`, so a minor is stored
/// once with `rows <= cols` (lexicographically). Index sets are sorted and
/// 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MinorSpec {
    rows: [usize; 3],
    cols: [usize; 3],
}

impl MinorSpec {
    pub fn new(mut rows: [usize; 3], mut cols: [usize; 3]) -> Self {
        rows.sort_unstable();
        cols.sort_unstable();
        if rows <= cols {
            Self { rows, cols }
        } else {
            Self { rows: cols, cols: rows }
        }
    }

    /// From 1-based index sets.
    pub fn one_based(rows: [usize; 3], cols: [usize; 3]) -> Self {
        Self::new(rows.map(|i| i - 1), cols.map(|j| j - 1))
    }

    pub fn rows(&self) -> [usize; 3] {
        self.rows
    }

    pub fn cols(&self) -> [usize; 3] {
        self.cols
    }

    fn block(&self, a: &SymMatrix) -> [[Complex64; 3]; 3] {
        let mut b = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (r, &i) in self.rows.iter().enumerate() {
            for (c, &j) in self.cols.iter().enumerate() {
                b[r][c] = a.get(i, j);
            }
        }
        b
    }

    pub fn value(&self, a: &SymMatrix) -> Complex64 {
        det3(&self.block(a))
    }

    /// Permanent of the entrywise absolute values: the sum of the magnitudes
    /// of the six determinant terms.
    pub fn term_scale(&self, a: &SymMatrix) -> f64 {
        let b = self.block(a).map(|row| row.map(|z| z.norm()));
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        PERMS.iter().map(|p| b[0][p[0]] * b[1][p[1]] * b[2][p[2]]).sum()
    }

    /// Gradient with respect to the `n(n+1)/2` upper-triangle coordinates in
    /// row-major order. An off-diagonal coordinate that shows up in the
    /// block at both `(i, j)` and `(j, i)` collects both contributions.
    pub fn gradient(&self, a: &SymMatrix) -> Vec<Complex64> {
        let n = a.n();
        let mut g = vec![Complex64::new(0.0, 0.0); n * (n + 1) / 2];
        let cof = cofactors3(&self.block(a));
        for (r, &i) in self.rows.iter().enumerate() {
            for (c, &j) in self.cols.iter().enumerate() {
                g[upper_index(n, i, j)] += cof[r][c];
            }
        }
        g
    }

    /// Relabel indices `i -> i + shift (mod n)`.
    pub fn rotated(&self, shift: usize, n: usize) -> Self {
        Self::new(
            self.rows.map(|i| (i + shift) % n),
            self.cols.map(|j| (j + shift) % n),
        )
    }
}

impl Serialize for MinorSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("MinorSpec", 2)?;
        st.serialize_field("rows", &self.rows.map(|i| i + 1))?;
        st.serialize_field("cols", &self.cols.map(|j| j + 1))?;
        st.end()
    }
}

/// Row-major position of `(i, j)` within the packed upper triangle.
pub(crate) fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

fn triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// A random point `K^{-1}` of the inverse variety.
///
/// `K` has independent standard normal entries on the support; if it is
/// badly conditioned the diagonal is shifted and the draw retried.
pub fn sample_inverse_point(model: &CycleModel, rng: &mut ChaCha8Rng) -> Result<SymMatrix> {
    let n = model.n();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (i, j) in model.support() {
        let v: f64 = StandardNormal.sample(rng);
        k[(i, j)] = v;
        k[(j, i)] = v;
    }
    for attempt in 0..=MAX_RESHIFTS {
        let complex = k.map(|v| Complex64::new(v, 0.0));
        if condition_number(&complex) < SAMPLE_COND_LIMIT {
            if let Some(inv) = k.clone().try_inverse() {
                return Ok(SymMatrix::from_real(&inv));
            }
        }
        if attempt < MAX_RESHIFTS {
            for i in 0..n {
                k[(i, i)] += 1.0;
            }
        }
    }
    Err(Error::SampleSingular {
        reshifts: MAX_RESHIFTS,
    })
}

/// Every 3x3 minor that vanishes (relative to its term scale) at `samples`
/// random points of `L^{-1}`. Deterministic given `seed`.
pub fn harvest_minors(n: usize, samples: usize, tol: f64, seed: u64) -> Result<Vec<MinorSpec>> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("harvesting needs n >= 4, got {n}")));
    }
    if samples < 10 {
        return Err(Error::InvalidArgument(format!(
            "harvesting needs at least 10 samples, got {samples}"
        )));
    }
    let model = CycleModel::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..samples)
        .map(|_| sample_inverse_point(&model, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let trip = triples(n);
    let mut out = Vec::new();
    for (a, rows) in trip.iter().enumerate() {
        for cols in &trip[a..] {
            let minor = MinorSpec::new(*rows, *cols);
            if points
                .iter()
                .all(|p| minor.value(p).norm() <= tol * minor.term_scale(p))
            {
                out.push(minor);
            }
        }
    }
    Ok(out)
}

/// Harvest with the default sample count, tolerance and seed 0.
pub fn default_minors(n: usize) -> Result<Vec<MinorSpec>> {
    harvest_minors(n, HARVEST_SAMPLES, HARVEST_TOL, 0)
}

/// Jacobian of the harvested minors followed by the `2n` slice constraints.
///
/// Shape `(minors.len() + 2n) x n(n+1)/2`; columns are upper-triangle
/// coordinates in row-major order. Constraint rows are the unit vectors of
/// the diagonal positions, then of the edge positions.
pub fn jacobian_at(a: &SymMatrix, minors: &[MinorSpec], model: &CycleModel) -> Result<CMatrix> {
    let n = model.n();
    if a.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.n(),
        });
    }
    let support = model.support();
    let mut jac = CMatrix::zeros(minors.len() + support.len(), model.dim());
    for (r, minor) in minors.iter().enumerate() {
        for (c, v) in minor.gradient(a).into_iter().enumerate() {
            jac[(r, c)] = v;
        }
    }
    for (k, &(i, j)) in support.iter().enumerate() {
        jac[(minors.len() + k, upper_index(n, i, j))] = Complex64::new(1.0, 0.0);
    }
    Ok(jac)
}

/// Outcome of the full-rank test at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub required_rank: usize,
    pub achieved_rank: usize,
    /// `sigma_required / sigma_1`; zero when the Jacobian has too few rows.
    pub sigma_ratio: f64,
    pub minor_count: usize,
    pub pass: bool,
}

/// Certificate for an arbitrary matrix.
pub fn certify_matrix(a: &SymMatrix, minors: &[MinorSpec], model: &CycleModel) -> Result<Certificate> {
    let jac = jacobian_at(a, minors, model)?;
    let required = model.dim();
    let sv = singular_values(&jac);
    let top = sv.first().copied().unwrap_or(0.0);
    let achieved = if top > 0.0 {
        sv.iter().filter(|&&s| s / top > RANK_RATIO).count()
    } else {
        0
    };
    let sigma_ratio = match sv.get(required - 1) {
        Some(&s) if top > 0.0 => s / top,
        _ => 0.0,
    };
    Ok(Certificate {
        required_rank: required,
        achieved_rank: achieved,
        sigma_ratio,
        minor_count: minors.len(),
        pass: achieved == required && sigma_ratio > RANK_RATIO,
    })
}

/// Certifies that a census point is a transverse (isolated, reduced)
/// intersection point. A failing certificate is a result, not an error.
pub fn rank_certificate(
    point: &IntersectionPoint,
    minors: &[MinorSpec],
    model: &CycleModel,
) -> Result<Certificate> {
    certify_matrix(&point.matrix, minors, model)
}

/// Which polynomial [`rk_values`] evaluates in expanded form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkForm {
    /// The eight-term expansion, term for term.
    Verbatim,
    /// The expansion with the two mutually cancelling terms added back once;
    /// no longer in the ideal, so the check must reject it.
    WithCancelledTerms,
}

/// Values of the quartic at one point `A` of `L^{-1}`, with `y = pi(A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkValues {
    /// `x_{2,k+1} det M({1,2,k},{1,k,k+1}) - x_{1,k} det M({2,k,k+1},{1,2,k+1})`.
    pub minor_form: Complex64,
    /// The bihomogeneous expansion `R_k(x, y)` at `y = pi(A)`.
    pub expanded: Complex64,
    /// Largest magnitude among the expansion's monomials.
    pub monomial_scale: f64,
}

/// Evaluates the quartic both ways. `k` is 1-based, `3 <= k <= n - 1`.
pub fn rk_values(a: &SymMatrix, k: usize, form: RkForm) -> Result<RkValues> {
    let n = a.n();
    if k < 3 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "the quartic needs 3 <= k <= n-1, got k = {k}, n = {n}"
        )));
    }
    let x = |i: usize, j: usize| a.get(i - 1, j - 1);
    // y reads the support coordinates of A: pi(A) restricted to L.
    let y = x;
    let k1 = k + 1;
    let first = MinorSpec::one_based([1, 2, k], [1, k, k1]).value(a);
    let second = MinorSpec::one_based([2, k, k1], [1, 2, k1]).value(a);
    let minor_form = x(2, k1) * first - x(1, k) * second;

    let mut terms = vec![
        y(1, 1) * y(k, k1) * x(2, k) * x(2, k1),
        -y(1, 1) * y(k, k) * x(2, k1) * x(2, k1),
        -y(1, 2) * y(k, k1) * x(1, k) * x(2, k1),
        y(1, 2) * y(k, k) * x(1, k1) * x(2, k1),
        -y(1, 2) * y(k1, k1) * x(1, k) * x(2, k),
        y(1, 2) * y(k, k1) * x(1, k) * x(2, k1),
        y(2, 2) * y(k1, k1) * x(1, k) * x(1, k),
        -y(2, 2) * y(k, k1) * x(1, k) * x(1, k1),
    ];
    if form == RkForm::WithCancelledTerms {
        terms.push(x(2, k1) * -x(1, k) * x(2, k) * x(1, k1));
        terms.push(x(2, k1) * x(1, k) * x(1, k) * x(2, k1));
    }
    let monomial_scale = terms.iter().fold(0.0f64, |m, t| m.max(t.norm()));
    Ok(RkValues {
        minor_form,
        expanded: terms.into_iter().sum(),
        monomial_scale,
    })
}

/// Checks the quartic identity at `samples` random points of `L^{-1}`: the
/// minor form and the expansion must both vanish, and agree, to `tol`
/// relative to the largest monomial.
pub fn rk_identity_check_with(
    n: usize,
    k: usize,
    samples: usize,
    tol: f64,
    seed: u64,
    form: RkForm,
) -> Result<bool> {
    if k < 3 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "the quartic needs 3 <= k <= n-1, got k = {k}, n = {n}"
        )));
    }
    let model = CycleModel::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let a = sample_inverse_point(&model, &mut rng)?;
        let v = rk_values(&a, k, form)?;
        let bound = tol * v.monomial_scale;
        if v.minor_form.norm() > bound
            || v.expanded.norm() > bound
            || (v.minor_form - v.expanded).norm() > bound
        {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn rk_identity_check(n: usize, k: usize, samples: usize, tol: f64, seed: u64) -> Result<bool> {
    rk_identity_check_with(n, k, samples, tol, seed, RkForm::Verbatim)
}

/// Summary of certifying a whole census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub n: usize,
    pub points_checked: usize,
    pub all_pass: bool,
    pub worst_sigma_ratio: f64,
}

/// Attaches a certificate to every point of a census, using the default
/// harvested minors for its `n`.
pub fn certify_census(report: &mut CensusReport) -> Result<CertifySummary> {
    let model = CycleModel::new(report.n)?;
    let minors = default_minors(report.n)?;
    report.points.par_iter_mut().try_for_each(|p| -> Result<()> {
        p.certificate = Some(rank_certificate(p, &minors, &model)?);
        Ok(())
    })?;
    let certs = report.points.iter().filter_map(|p| p.certificate.as_ref());
    let (all_pass, worst) = certs.fold((true, f64::INFINITY), |(ok, w), c| (ok && c.pass, w.min(c.sigma_ratio)));
    Ok(CertifySummary {
        n: report.n,
        points_checked: report.points.len(),
        all_pass,
        worst_sigma_ratio: worst,
    })
}
