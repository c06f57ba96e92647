//! The census of `L^{-1} ∩ (Id + L^perp)` and the closed-form counts.
//!
//! Candidates are built family by family (identity, normalized inverses of
//! `M^+(x)` / `M^-(x)` at the roots of the characteristic polynomials, and for
//! even `n` the checkerboard), every one conjugated by all `2^n` sign
//! diagonals. Duplicates are then removed globally, so orbit coincidences
//! (the sign `-Id`, the even-`n` pairing of `x` with `-x`) need no special
//! handling. The surviving count is compared with `(n-3) 2^(n-2) + 1`.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::certify::{default_minors, Certificate};
use crate::error::{Error, Result};
use crate::linalg::condition_number;
use crate::model::{
    checkerboard, conjugate_sign, in_affine_slice, in_l_inverse, m_matrix, CycleModel, SignDiag,
    SymMatrix, Variant, MEMBERSHIP_TOL,
};
use crate::poly::{char_poly_even_minus, char_poly_even_plus, char_poly_odd, roots};

/// Two candidates closer than this, relative to their Frobenius norm, are
/// the same point.
pub const DEDUP_TOL: f64 = 1e-8;

/// Largest `n` accepted by [`enumerate_points`]; the candidate list grows
/// like `n 2^n`.
pub const MAX_CENSUS_N: usize = 20;

const KEY_SCALE: f64 = 1e6;
const PROJECTION_SEED: u64 = 0x5eed;

/// `(n-3) 2^(n-2) + 1`.
pub fn ml_degree_formula(n: usize) -> Result<BigUint> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("ML-degree formula needs n >= 3, got {n}")));
    }
    Ok(BigUint::from(n - 3) * (BigUint::from(1u8) << (n - 2)) + 1u8)
}

/// `(n+2)/4 * C(2n, n) - 3 * 2^(2n-3)`, in exact integer arithmetic.
///
/// # Panics
/// If `(n+2) C(2n, n)` is not divisible by 4, which cannot happen for
/// `n >= 3`.
pub fn variety_degree_formula(n: usize) -> Result<BigInt> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("variety degree formula needs n >= 3, got {n}")));
    }
    let central = num_integer::binomial(BigUint::from(2 * n), BigUint::from(n));
    let (quarter, rem) = (BigUint::from(n + 2) * central).div_rem(&BigUint::from(4u8));
    assert!(rem.is_zero(), "(n+2) C(2n,n) / 4 left a remainder at n = {n}");
    let tail = BigUint::from(3u8) << (2 * n - 3);
    Ok(BigInt::from(quarter) - BigInt::from(tail))
}

/// Where a census point came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Identity,
    /// Normalized `M^+(x)^{-1}`.
    MPlus(Complex64),
    /// Normalized `M^-(x)^{-1}`.
    MMinus(Complex64),
    Checkerboard,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::MPlus(_) => "m_plus",
            Family::MMinus(_) => "m_minus",
            Family::Checkerboard => "checkerboard",
        }
    }

    pub fn root(&self) -> Option<Complex64> {
        match self {
            Family::MPlus(x) | Family::MMinus(x) => Some(*x),
            _ => None,
        }
    }
}

/// One point of the census.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionPoint {
    pub matrix: SymMatrix,
    pub family: Family,
    pub sign_pattern: SignDiag,
    pub certificate: Option<Certificate>,
}

impl Serialize for IntersectionPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("IntersectionPoint", 5)?;
        st.serialize_field("family", self.family.name())?;
        st.serialize_field("x", &self.family.root().map(|z| [z.re, z.im]))?;
        st.serialize_field("signs", &self.sign_pattern)?;
        st.serialize_field("matrix", &self.matrix)?;
        st.serialize_field("certificate", &self.certificate)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub n: usize,
    pub formula_count: u64,
    pub distinct_count: usize,
    pub min_pairwise_distance: f64,
    pub points: Vec<IntersectionPoint>,
}

impl CensusReport {
    pub fn matches_formula(&self) -> bool {
        self.distinct_count as u64 == self.formula_count
    }
}

/// A family representative before sign conjugation.
struct Seed {
    matrix: SymMatrix,
    family: Family,
}

/// `M(x)^{-1}` divided by its (constant) diagonal.
fn normalized_inverse(n: usize, x: Complex64, variant: Variant, tol: f64) -> Result<SymMatrix> {
    let m = m_matrix(n, x, variant)?.to_dmatrix();
    if condition_number(&m) > 1.0 / tol {
        return Err(Error::RootOfSingularMatrix { x: x.to_string() });
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::RootOfSingularMatrix { x: x.to_string() })?;
    let c = inv[(0, 0)];
    if c.norm() <= tol {
        return Err(Error::NormalizationDegenerate { diagonal: c.norm() });
    }
    Ok(SymMatrix::from_dmatrix(&(inv / c)))
}

fn seeds(n: usize, tol: f64) -> Result<Vec<Seed>> {
    let mut out = vec![Seed {
        matrix: SymMatrix::identity(n),
        family: Family::Identity,
    }];
    let m = (n / 2) as i64;
    let mut push_roots = |poly, variant, wrap: fn(Complex64) -> Family| -> Result<()> {
        for x in roots(&poly, tol)?.roots {
            out.push(Seed {
                matrix: normalized_inverse(n, x, variant, tol)?,
                family: wrap(x),
            });
        }
        Ok(())
    };
    if n % 2 == 1 {
        push_roots(char_poly_odd(m)?, Variant::Plus, Family::MPlus)?;
    } else {
        push_roots(char_poly_even_plus(m)?, Variant::Plus, Family::MPlus)?;
        push_roots(char_poly_even_minus(m)?, Variant::Minus, Family::MMinus)?;
        out.push(Seed {
            matrix: checkerboard(n)?,
            family: Family::Checkerboard,
        });
    }
    Ok(out)
}

/// Fixed unit vector for the sort-and-sweep dedup. A projection onto a unit
/// vector is 1-Lipschitz, so points within `d` of each other project within
/// `d` of each other.
fn projection_weights(len: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    let w: Vec<(f64, f64)> = (0..len)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = w.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
    w.into_iter().map(|(a, b)| (a / norm, b / norm)).collect()
}

fn project(a: &SymMatrix, w: &[(f64, f64)]) -> f64 {
    a.upper().iter().zip(w).map(|(z, (wr, wi))| z.re * wr + z.im * wi).sum()
}

/// Entries rounded to six decimals; the canonical output order.
fn canonical_key(a: &SymMatrix) -> Vec<(i64, i64)> {
    a.upper()
        .iter()
        .map(|z| ((z.re * KEY_SCALE).round() as i64, (z.im * KEY_SCALE).round() as i64))
        .collect()
}

fn cmp_exact(a: &SymMatrix, b: &SymMatrix) -> Ordering {
    a.upper()
        .iter()
        .zip(b.upper())
        .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Global dedup of a candidate list.
///
/// Candidates are swept in order of a fixed projection (ties by input index);
/// one is dropped when it lies within `rel_tol * norm` of an earlier
/// survivor. Returns the surviving indices in sweep order, and for every
/// dropped candidate the pair `(dropped, survivor)`. The result depends only
/// on the input, not on its hashing or on thread scheduling.
pub(crate) fn dedup_indices(mats: &[SymMatrix], rel_tol: f64) -> (Vec<usize>, Vec<(usize, usize)>) {
    let Some(first) = mats.first() else {
        return (Vec::new(), Vec::new());
    };
    let w = projection_weights(first.upper().len());
    let mut order: Vec<(f64, f64, usize)> = mats
        .iter()
        .enumerate()
        .map(|(i, m)| (project(m, &w), m.frobenius(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let window = rel_tol * order.iter().fold(0.0f64, |m, t| m.max(t.1));

    let mut kept: Vec<(f64, f64, usize)> = Vec::new();
    let mut dropped = Vec::new();
    for (proj, norm, i) in order {
        let hit = kept
            .iter()
            .rev()
            .take_while(|k| proj - k.0 <= window)
            .find(|k| {
                let cutoff = rel_tol * norm.max(k.1);
                mats[i].distance_below(&mats[k.2], cutoff) <= cutoff
            });
        match hit {
            Some(k) => dropped.push((i, k.2)),
            None => kept.push((proj, norm, i)),
        }
    }
    (kept.into_iter().map(|k| k.2).collect(), dropped)
}

/// Permutation putting matrices in canonical order: by entries rounded to
/// six decimals, ties broken at full precision.
pub(crate) fn canonical_order(mats: &[SymMatrix]) -> Vec<usize> {
    let keys: Vec<Vec<(i64, i64)>> = mats.iter().map(canonical_key).collect();
    let mut idx: Vec<usize> = (0..mats.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then_with(|| cmp_exact(&mats[a], &mats[b])));
    idx
}

fn dedup(points: Vec<IntersectionPoint>) -> Vec<IntersectionPoint> {
    let mats: Vec<SymMatrix> = points.iter().map(|p| p.matrix.clone()).collect();
    let (kept, dropped) = dedup_indices(&mats, DEDUP_TOL);
    for (gone, survivor) in dropped {
        let (a, b) = (points[gone].family.name(), points[survivor].family.name());
        if a != b {
            log::info!("census point from the {a} family coincides with one from {b}");
        }
    }
    let mut slots: Vec<Option<IntersectionPoint>> = points.into_iter().map(Some).collect();
    kept.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

/// Smallest Frobenius distance between any two points (infinite for fewer
/// than two). Uses the same projection sweep as the dedup, so it is exact.
pub fn min_pairwise_distance(points: &[SymMatrix]) -> f64 {
    let Some(first) = points.first() else {
        return f64::INFINITY;
    };
    let w = projection_weights(first.upper().len());
    let mut proj: Vec<(f64, &SymMatrix)> = points.iter().map(|p| (project(p, &w), p)).collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for (i, (pi, a)) in proj.iter().enumerate() {
        for (pj, b) in &proj[i + 1..] {
            if pj - pi >= best {
                break;
            }
            best = best.min(a.distance_below(b, best));
        }
    }
    best
}

fn validate(point: &IntersectionPoint, model: &CycleModel, minors: &[crate::certify::MinorSpec]) -> Result<()> {
    if !in_affine_slice(&point.matrix, model, MEMBERSHIP_TOL) {
        return Err(Error::ValidationFailure(format!(
            "{} point with signs {:?} is off the affine slice",
            point.family.name(),
            point.sign_pattern.signs()
        )));
    }
    if !in_l_inverse(&point.matrix, model, MEMBERSHIP_TOL, Some(minors))? {
        return Err(Error::ValidationFailure(format!(
            "{} point with signs {:?} is not in the inverse variety",
            point.family.name(),
            point.sign_pattern.signs()
        )));
    }
    Ok(())
}

/// The full census for the `n`-cycle at `S = Id`.
///
/// `tol` governs root finding and the singularity/normalization guards;
/// membership is always checked at [`MEMBERSHIP_TOL`]. Certificates are
/// left empty (see [`crate::certify::certify_census`]). The result does not
/// depend on thread scheduling.
pub fn enumerate_points(n: usize, tol: f64) -> Result<CensusReport> {
    if !(4..=MAX_CENSUS_N).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "census needs 4 <= n <= {MAX_CENSUS_N}, got {n}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let model = CycleModel::new(n)?;
    let seeds = seeds(n, tol)?;
    let signs: Vec<SignDiag> = SignDiag::all(n).collect();
    let candidates: Vec<IntersectionPoint> = seeds
        .par_iter()
        .flat_map_iter(|seed| {
            signs.iter().map(move |d| IntersectionPoint {
                matrix: conjugate_sign(&seed.matrix, d).expect("sign pattern has length n"),
                family: seed.family,
                sign_pattern: d.clone(),
                certificate: None,
            })
        })
        .collect();
    log::debug!("n = {n}: {} seeds, {} candidates", seeds.len(), candidates.len());

    let mut points = dedup(candidates);
    let minors = default_minors(n)?;
    points.par_iter().try_for_each(|p| validate(p, &model, &minors))?;

    let mats: Vec<SymMatrix> = points.iter().map(|p| p.matrix.clone()).collect();
    let mut slots: Vec<Option<IntersectionPoint>> = points.drain(..).map(Some).collect();
    let points: Vec<IntersectionPoint> = canonical_order(&mats)
        .into_iter()
        .map(|i| slots[i].take().expect("permutation"))
        .collect();

    let matrices: Vec<SymMatrix> = points.iter().map(|p| p.matrix.clone()).collect();
    let formula_count = ml_degree_formula(n)?
        .to_u64()
        .expect("formula fits in u64 for census sizes");
    Ok(CensusReport {
        n,
        formula_count,
        distinct_count: points.len(),
        min_pairwise_distance: min_pairwise_distance(&matrices),
        points,
    })
}

/// Outcome of the count comparison at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountCheck {
    pub n: usize,
    pub pass: bool,
    pub report: Result<CensusReport>,
}

/// Runs [`enumerate_points`] for each `n`; an error at one `n` is recorded
/// as a failure and the batch continues.
pub fn count_check(n_range: &[usize], tol: f64) -> Vec<CountCheck> {
    n_range
        .iter()
        .map(|&n| {
            let report = enumerate_points(n, tol);
            let pass = report.as_ref().is_ok_and(|r| r.matches_formula());
            CountCheck { n, pass, report }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{shift_conjugate, Shift};
    use crate::poly::DEFAULT_ROOT_TOL;

    #[test]
    fn formula_examples() {
        let ml: Vec<u64> = (3..=12).map(|n| ml_degree_formula(n).unwrap().to_u64().unwrap()).collect();
        assert_eq!(ml, [1, 5, 17, 49, 129, 321, 769, 1793, 4097, 9217]);
        assert!(ml_degree_formula(2).is_err());
        assert_eq!(variety_degree_formula(3).unwrap(), BigInt::from(1));
        assert_eq!(variety_degree_formula(4).unwrap(), BigInt::from(9));
        assert!(variety_degree_formula(2).is_err());
    }

    #[test]
    fn small_censuses() {
        for (n, want) in [(4, 5), (5, 17), (6, 49)] {
            let r = enumerate_points(n, DEFAULT_ROOT_TOL).unwrap();
            assert_eq!(r.distinct_count, want, "n = {n}");
            assert_eq!(r.points.len(), want);
            assert!(r.matches_formula());
            assert!(r.min_pairwise_distance > 1e-4);
        }
    }

    #[test]
    fn n4_is_identity_plus_checkerboards() {
        let r = enumerate_points(4, DEFAULT_ROOT_TOL).unwrap();
        let names: Vec<&str> = r.points.iter().map(|p| p.family.name()).collect();
        assert_eq!(names.iter().filter(|&&s| s == "identity").count(), 1);
        assert_eq!(names.iter().filter(|&&s| s == "checkerboard").count(), 4);
    }

    #[test]
    fn odd_cycles_have_only_plus_family() {
        let r = enumerate_points(7, DEFAULT_ROOT_TOL).unwrap();
        assert!(r
            .points
            .iter()
            .all(|p| matches!(p.family, Family::Identity | Family::MPlus(_))));
    }

    #[test]
    fn census_is_shift_invariant() {
        let r = enumerate_points(6, DEFAULT_ROOT_TOL).unwrap();
        for p in &r.points {
            let q = shift_conjugate(&p.matrix, Shift::Plus).unwrap();
            let hit = r.points.iter().any(|o| o.matrix.distance(&q) < 1e-8);
            assert!(hit, "shifted {} point missing", p.family.name());
        }
    }

    #[test]
    fn dedup_collapses_perturbed_copies() {
        let a = SymMatrix::identity(4);
        let b = a.map(|z| z + Complex64::new(1e-12, 0.0));
        let c = checkerboard(4).unwrap();
        let mk = |m: &SymMatrix| IntersectionPoint {
            matrix: m.clone(),
            family: Family::Identity,
            sign_pattern: SignDiag::identity(4),
            certificate: None,
        };
        let out = dedup(vec![mk(&a), mk(&c), mk(&b), mk(&a)]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn min_distance_matches_brute_force() {
        let r = enumerate_points(5, DEFAULT_ROOT_TOL).unwrap();
        let mats: Vec<SymMatrix> = r.points.iter().map(|p| p.matrix.clone()).collect();
        let mut brute = f64::INFINITY;
        for i in 0..mats.len() {
            for j in i + 1..mats.len() {
                brute = brute.min(mats[i].distance(&mats[j]));
            }
        }
        assert!((brute - r.min_pairwise_distance).abs() <= 1e-15 * brute);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(enumerate_points(3, 1e-10).is_err());
        assert!(enumerate_points(5, 0.0).is_err());
        let checks = count_check(&[3, 4], 1e-10);
        assert!(!checks[0].pass && checks[0].report.is_err());
        assert!(checks[1].pass);
    }
}
