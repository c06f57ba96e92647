//! Exact integer polynomials for the tridiagonal determinants `P_k(x)`.
//!
//! `P_k(x)` is the determinant of the `k x k` matrix with unit diagonal and
//! `x` on both off-diagonals. It obeys the continuant recurrence
//! `P_k = P_{k-1} - x^2 P_{k-2}` with `P_{-1} = 0`, `P_0 = 1`. The
//! characteristic polynomials whose roots parameterize the census points
//! are small combinations of these.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default root tolerance, relative to the coefficient scale.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

const MAX_NEWTON_STEPS: usize = 50;

/// Dense univariate polynomial with exact integer coefficients.
///
/// `coeffs[i]` is the coefficient of `x^i`. The zero polynomial is the empty
/// vector; otherwise the last stored coefficient is nonzero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    coeffs: Vec<BigInt>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_i64(&[1])
    }

    /// `c * x^k`.
    pub fn monomial(c: impl Into<BigInt>, k: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); k + 1];
        coeffs[k] = c.into();
        Self::new(coeffs)
    }

    pub fn x() -> Self {
        Self::monomial(1, 1)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Coefficient of `x^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    /// True when every odd-power coefficient vanishes.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(Zero::is_zero)
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs_f64()
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    /// `sum |c_i| |z|^i`: the magnitude scale against which a residual
    /// `|p(z)|` is judged.
    pub fn magnitude_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs_f64()
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// Division with remainder, exact whenever the divisor's leading
    /// coefficient is a unit (`+-1`). Other divisors would need rational
    /// coefficients and are rejected; use [`Polynomial::divides`] for a
    /// divisibility test over the rationals.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        let lead = divisor
            .leading()
            .ok_or_else(|| Error::InvalidArgument("division by the zero polynomial".into()))?;
        if !lead.abs().is_one() {
            return Err(Error::InvalidArgument(format!(
                "divisor leading coefficient {lead} is not a unit"
            )));
        }
        let dd = divisor.coeffs.len() - 1;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let mut quot = vec![BigInt::zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            // lead is +-1, so dividing is multiplying.
            let q = &rem[k + dd] * lead;
            if !q.is_zero() {
                for (j, d) in divisor.coeffs.iter().enumerate() {
                    rem[k + j] -= &q * d;
                }
            }
            quot[k] = q;
        }
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// Pseudo-remainder: `lc(d)^k * self mod d` computed over the integers.
    pub fn pseudo_rem(&self, divisor: &Polynomial) -> Result<Polynomial> {
        let lead = divisor
            .leading()
            .ok_or_else(|| Error::InvalidArgument("division by the zero polynomial".into()))?
            .clone();
        let dd = divisor.coeffs.len() - 1;
        let mut rem = self.clone();
        while let Some(deg) = rem.degree() {
            if deg < dd {
                break;
            }
            let top = rem.coeffs[deg].clone();
            let shift = deg - dd;
            // rem <- lead * rem - top * x^shift * divisor
            let mut next = rem.scale(&lead).coeffs;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                next[shift + j] -= &top * d;
            }
            rem = Polynomial::new(next);
        }
        Ok(rem)
    }

    /// Exact divisibility over the rationals.
    pub fn divides(&self, dividend: &Polynomial) -> Result<bool> {
        Ok(dividend.pseudo_rem(self)?.is_zero())
    }

    /// The unit `u` in `{1, -1}` with `self = u * other`, if any.
    pub fn unit_ratio(&self, other: &Polynomial) -> Option<i8> {
        if self == other {
            Some(1)
        } else if *self == -other.clone() {
            Some(-1)
        } else {
            None
        }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
            }
            first = false;
            match (i, mag.is_one()) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "x")?,
                (1, false) => write!(f, "{mag}x")?,
                (_, true) => write!(f, "x^{i}")?,
                (_, false) => write!(f, "{mag}x^{i}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

// Coefficients go out as JSON integers whenever they fit in 64 bits (always,
// for the sizes used here) and as decimal strings otherwise.
impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Coeffs<'a>(&'a [BigInt]);
        impl Serialize for Coeffs<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for c in self.0 {
                    match c.to_i64() {
                        Some(v) => seq.serialize_element(&v)?,
                        None => seq.serialize_element(&c.to_string())?,
                    }
                }
                seq.end()
            }
        }
        let mut st = serializer.serialize_struct("Polynomial", 1)?;
        st.serialize_field("coeffs", &Coeffs(&self.coeffs))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Coeff {
            Int(i64),
            Text(String),
        }
        #[derive(Deserialize)]
        struct Raw {
            coeffs: Vec<Coeff>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let coeffs = raw
            .coeffs
            .into_iter()
            .map(|c| match c {
                Coeff::Int(v) => Ok(BigInt::from(v)),
                Coeff::Text(s) => s.parse::<BigInt>().map_err(de::Error::custom),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Polynomial::new(coeffs))
    }
}

/// Simple complex roots of a polynomial, each polished and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub source: Polynomial,
    pub tolerance: f64,
}

impl Serialize for RootSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.roots.iter().map(|z| [z.re, z.im]).collect();
        let mut st = serializer.serialize_struct("RootSet", 3)?;
        st.serialize_field("roots", &pairs)?;
        st.serialize_field("source", &self.source)?;
        st.serialize_field("tolerance", &self.tolerance)?;
        st.end()
    }
}

/// `P_k`, for `k >= -1`.
pub fn p_poly(k: i64) -> Result<Polynomial> {
    if k < -1 {
        return Err(Error::InvalidArgument(format!("P_k needs k >= -1, got {k}")));
    }
    if k == -1 {
        return Ok(Polynomial::zero());
    }
    let x2 = Polynomial::monomial(1, 2);
    let (mut prev, mut cur) = (Polynomial::zero(), Polynomial::one());
    for _ in 0..k {
        let next = &cur - &(&x2 * &prev);
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

fn p(k: i64) -> Polynomial {
    p_poly(k).expect("index checked by caller")
}

fn check_m(m: i64) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need m >= 2, got {m}")));
    }
    Ok(())
}

/// `P_{m-1} + x P_{m-2}`: the root condition for the odd cycle `C_{2m+1}`.
pub fn char_poly_odd(m: i64) -> Result<Polynomial> {
    check_m(m)?;
    Ok(&p(m - 1) + &(&Polynomial::x() * &p(m - 2)))
}

/// `P_{m-1} - x^2 P_{m-3}`: roots give the `M^+` family on `C_{2m}`.
pub fn char_poly_even_plus(m: i64) -> Result<Polynomial> {
    check_m(m)?;
    Ok(&p(m - 1) - &(&Polynomial::monomial(1, 2) * &p(m - 3)))
}

/// `P_{m-2}`: roots give the `M^-` family on `C_{2m}`.
pub fn char_poly_even_minus(m: i64) -> Result<Polynomial> {
    check_m(m)?;
    Ok(p(m - 2))
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// All complex roots of `poly`.
///
/// Seeds come from the eigenvalues of the companion matrix of the monic
/// rescaling; each seed then gets up to 50 Newton steps. A root is accepted
/// when `|p(r)| <= tol * sum |c_i| |r|^i`, and the set must be separated by
/// more than `10 * tol`. Roots are returned sorted by real then imaginary part.
pub fn roots(poly: &Polynomial, tol: f64) -> Result<RootSet> {
    if poly.is_zero() {
        return Err(Error::InvalidArgument("the zero polynomial has no root set".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let deg = poly.degree().unwrap_or(0);
    let mut found = Vec::with_capacity(deg);
    if deg > 0 {
        let c = poly.coeffs_f64();
        let lead = c[deg];
        let mut companion = DMatrix::<f64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -c[i] / lead;
        }
        let dpoly = poly.derivative();
        for seed in companion.complex_eigenvalues().iter() {
            let root = polish(poly, &dpoly, *seed);
            let residual = poly.eval(root).norm();
            let bound = tol * poly.magnitude_scale(root);
            if residual > bound {
                return Err(Error::RootResidual {
                    root: root.to_string(),
                    residual,
                    bound,
                });
            }
            found.push(root);
        }
    }
    found.sort_by(cmp_complex);
    for (i, a) in found.iter().enumerate() {
        for b in &found[i + 1..] {
            if (a - b).norm() <= 10.0 * tol {
                return Err(Error::SimplicityViolation {
                    first: a.to_string(),
                    second: b.to_string(),
                    separation: 10.0 * tol,
                });
            }
        }
    }
    Ok(RootSet {
        roots: found,
        source: poly.clone(),
        tolerance: tol,
    })
}

fn polish(poly: &Polynomial, dpoly: &Polynomial, mut z: Complex64) -> Complex64 {
    for _ in 0..MAX_NEWTON_STEPS {
        let d = dpoly.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly.eval(z) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= f64::EPSILON * z.norm().max(1.0) {
            break;
        }
    }
    z
}

fn check_n(n: i64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need n >= 4, got {n}")));
    }
    Ok(())
}

/// Left and right sides of the parity factorization of
/// `x^{n-2} + (-1)^n P_{n-2}`:
/// odd `n = 2m+1`: `(P_m - x P_{m-1}) (P_{m-1} + x P_{m-2})`;
/// even `n = 2m`: `P_{m-1} (P_{m-1} - x^2 P_{m-3})`.
pub fn factorization_sides(n: i64) -> Result<(Polynomial, Polynomial)> {
    check_n(n)?;
    let sign = if n % 2 == 0 { 1 } else { -1 };
    let lhs = &Polynomial::monomial(1, (n - 2) as usize) + &p(n - 2).scale(&BigInt::from(sign));
    let x = Polynomial::x();
    let rhs = if n.is_odd() {
        let m = (n - 1) / 2;
        &(&p(m) - &(&x * &p(m - 1))) * &char_poly_odd(m)?
    } else {
        let m = n / 2;
        &p(m - 1) * &char_poly_even_plus(m)?
    };
    Ok((lhs, rhs))
}

/// The unit relating the two sides of [`factorization_sides`]:
/// `Some(u)` with `lhs = u * rhs`, or `None` if they differ by more than a sign.
/// Odd cycles give `-1`, even cycles `+1`.
pub fn factorization_unit(n: i64) -> Result<Option<i8>> {
    let (lhs, rhs) = factorization_sides(n)?;
    Ok(lhs.unit_ratio(&rhs))
}

/// Coefficient-exact check that both sides of the parity factorization
/// define the same equation (agree up to a sign).
pub fn factorization_check(n: i64) -> Result<bool> {
    Ok(factorization_unit(n)?.is_some())
}

/// Exact divisibility of `P_{2m-2}` by `P_{m-1} + x P_{m-2}`.
pub fn divisibility_check(m: i64) -> Result<bool> {
    char_poly_odd(m)?.divides(&p(2 * m - 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn poly(c: &[i64]) -> Polynomial {
        Polynomial::from_i64(c)
    }

    #[test]
    fn p_poly_small_cases() {
        assert_eq!(p_poly(-1).unwrap(), Polynomial::zero());
        assert_eq!(p_poly(0).unwrap(), poly(&[1]));
        assert_eq!(p_poly(2).unwrap(), poly(&[1, 0, -1]));
        assert_eq!(p_poly(4).unwrap(), poly(&[1, 0, -3, 0, 1]));
        assert_eq!(p_poly(5).unwrap(), poly(&[1, 0, -4, 0, 3]));
        assert!(matches!(p_poly(-2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn characteristic_polynomials() {
        assert_eq!(char_poly_odd(2).unwrap(), poly(&[1, 1]));
        assert_eq!(char_poly_odd(3).unwrap(), poly(&[1, 1, -1]));
        assert_eq!(char_poly_odd(4).unwrap(), poly(&[1, 1, -2, -1]));
        assert_eq!(char_poly_even_plus(2).unwrap(), poly(&[1]));
        assert_eq!(char_poly_even_plus(3).unwrap(), poly(&[1, 0, -2]));
        assert_eq!(char_poly_even_plus(4).unwrap(), poly(&[1, 0, -3]));
        assert_eq!(char_poly_even_minus(2).unwrap(), poly(&[1]));
        assert_eq!(char_poly_even_minus(4).unwrap(), poly(&[1, 0, -1]));
        assert_eq!(char_poly_even_minus(5).unwrap(), poly(&[1, 0, -2]));
        assert!(char_poly_odd(1).is_err());
    }

    #[test]
    fn roots_examples() {
        let r = roots(&poly(&[1, 1]), DEFAULT_ROOT_TOL).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert_abs_diff_eq!(r.roots[0].re, -1.0, epsilon = 1e-14);

        let r = roots(&poly(&[1, 0, -2]), DEFAULT_ROOT_TOL).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(r.roots[0].re, -h, epsilon = 1e-14);
        assert_abs_diff_eq!(r.roots[1].re, h, epsilon = 1e-14);
        assert!(r.roots.iter().all(|z| z.im.abs() < 1e-14));

        assert!(roots(&poly(&[1]), DEFAULT_ROOT_TOL).unwrap().roots.is_empty());
        assert!(roots(&Polynomial::zero(), DEFAULT_ROOT_TOL).is_err());
    }

    #[test]
    fn double_root_trips_simplicity_guard() {
        // (1 + x)^2
        let err = roots(&poly(&[1, 2, 1]), 1e-6).unwrap_err();
        assert!(matches!(err, Error::SimplicityViolation { .. }), "{err:?}");
    }

    #[test]
    fn complex_roots_are_found() {
        // 1 + x^2
        let r = roots(&poly(&[1, 0, 1]), DEFAULT_ROOT_TOL).unwrap();
        assert_abs_diff_eq!(r.roots[0].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.roots[1].im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn factorization_examples() {
        for n in [5, 6, 9] {
            assert!(factorization_check(n).unwrap(), "n = {n}");
        }
        assert_eq!(factorization_unit(5).unwrap(), Some(-1));
        assert_eq!(factorization_unit(6).unwrap(), Some(1));
        assert!(factorization_check(3).is_err());
    }

    #[test]
    fn divisibility_examples() {
        for m in [2, 3, 5] {
            assert!(divisibility_check(m).unwrap(), "m = {m}");
        }
        let (q, r) = p_poly(2)
            .unwrap()
            .div_rem(&char_poly_odd(2).unwrap())
            .unwrap();
        assert_eq!(q, poly(&[1, -1]));
        assert!(r.is_zero());
    }

    #[test]
    fn division_rejects_non_unit_leading() {
        assert!(poly(&[1, 0, 1]).div_rem(&poly(&[1, 2])).is_err());
        // x^2 - 1/4 is not integral but 2x + 1 still divides 4x^2 - 1 over Q
        assert!(poly(&[1, 2]).divides(&poly(&[-1, 0, 4])).unwrap());
        assert!(!poly(&[1, 2]).divides(&poly(&[1, 0, 4])).unwrap());
    }

    #[test]
    fn display_reads_naturally() {
        assert_eq!(poly(&[1, 1, -2, -1]).to_string(), "1 + x - 2x^2 - x^3");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&p_poly(4).unwrap()).unwrap();
        assert_eq!(text, r#"{"coeffs":[1,0,-3,0,1]}"#);
        let back: Polynomial = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p_poly(4).unwrap());
        let rs = roots(&poly(&[1, 1]), 1e-10).unwrap();
        let v: serde_json::Value = serde_json::to_value(&rs).unwrap();
        assert_eq!(v["roots"][0][0].as_f64().unwrap(), -1.0);
        assert_eq!(v["roots"][0][1].as_f64().unwrap(), 0.0);
    }
}
