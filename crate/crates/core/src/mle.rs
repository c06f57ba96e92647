//! Log-likelihood, the maximum likelihood estimate, and a multi-start
//! Newton oracle that counts complex critical points.
//!
//! Concentration matrices are parameterized by their `2n` support
//! coordinates `theta`, in [`CycleModel::support`] order (diagonal, then
//! edges); an edge coordinate fills both `(i, j)` and `(j, i)`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{default_minors, upper_index, MinorSpec};
use crate::error::{Error, Result};
use crate::intersect::{canonical_order, dedup_indices};
use crate::linalg::{condition_number, max_abs, CMatrix};
use crate::model::{CycleModel, SymMatrix};

pub const ARMIJO: f64 = 1e-4;
pub const BACKTRACK: f64 = 0.5;
/// Oracle solutions closer than this (relative) are one critical point.
pub const ORACLE_DEDUP_TOL: f64 = 1e-6;
/// A generic `S` is redrawn when some solution's Jacobian is worse than this.
pub const GENERIC_COND_LIMIT: f64 = 1e10;

const MIN_STEP: f64 = 1e-12;
const ORACLE_MAX_ITER: usize = 100;
const ORACLE_MIN_DAMPING: f64 = 1e-3;
const DIVERGENCE: f64 = 1e6;
const POLISH_STEPS: usize = 2;
const RESAMPLE_ATTEMPTS: u64 = 10;

fn multiplicity((i, j): (usize, usize)) -> f64 {
    if i == j {
        1.0
    } else {
        2.0
    }
}

/// `(a, b)` pairs with `E_p = sum e_a e_b^T` for the support coordinate `p`.
fn basis((i, j): (usize, usize)) -> impl Iterator<Item = (usize, usize)> {
    let second = (i != j).then_some((j, i));
    std::iter::once((i, j)).chain(second)
}

/// `G[p][q] = (Sigma E_q Sigma)_p`, so that `d(K^{-1})_p / d theta_q = -G[p][q]`.
fn response<T: ComplexField + Copy>(sigma: &DMatrix<T>, support: &[(usize, usize)]) -> DMatrix<T> {
    let m = support.len();
    DMatrix::from_fn(m, m, |p, q| {
        let (a, b) = support[p];
        basis(support[q]).fold(T::zero(), |acc, (c, d)| acc + sigma[(a, c)] * sigma[(d, b)])
    })
}

fn build<T: ComplexField + Copy>(n: usize, support: &[(usize, usize)], theta: &[T]) -> DMatrix<T> {
    let mut k = DMatrix::from_element(n, n, T::zero());
    for (&(i, j), &v) in support.iter().zip(theta) {
        k[(i, j)] = v;
        k[(j, i)] = v;
    }
    k
}

fn real_matrix(a: &SymMatrix, what: &str) -> Result<DMatrix<f64>> {
    a.to_real(0.0)
        .ok_or_else(|| Error::InvalidArgument(format!("{what} must be real")))
}

fn check_same_n(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

fn log_lik_real(k: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<f64> {
    let chol = k.clone().cholesky()?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Some(log_det - s.component_mul(k).sum())
}

/// `log det K - tr(S K)`.
pub fn log_lik(k: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    check_same_n(k, s)?;
    let k = real_matrix(k, "K")?;
    let s = real_matrix(s, "S")?;
    log_lik_real(&k, &s).ok_or(Error::NotPositiveDefinite)
}

fn gradient_at(sigma: &DMatrix<f64>, s: &DMatrix<f64>, support: &[(usize, usize)]) -> DVector<f64> {
    DVector::from_iterator(
        support.len(),
        support.iter().map(|&(i, j)| multiplicity((i, j)) * (sigma[(i, j)] - s[(i, j)])),
    )
}

/// Gradient of [`log_lik`] in the support coordinates: `(K^{-1} - S)_p`,
/// doubled for edges.
pub fn likelihood_gradient(k: &SymMatrix, s: &SymMatrix, model: &CycleModel) -> Result<Vec<f64>> {
    check_same_n(k, s)?;
    if k.n() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: k.n(),
        });
    }
    let kr = real_matrix(k, "K")?;
    let sr = real_matrix(s, "S")?;
    let sigma = kr.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    Ok(gradient_at(&sigma, &sr, &model.support()).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult {
    pub k_hat: SymMatrix,
    pub sigma_hat: SymMatrix,
    pub iterations: usize,
    pub grad_norm: f64,
    pub loglik: f64,
    /// Log-likelihood after each accepted step, starting point first.
    pub loglik_trace: Vec<f64>,
}

/// Maximizes [`log_lik`] over positive definite `K` supported on the cycle.
///
/// Damped Newton from `K = diag(S)^{-1}`: backtracking by [`BACKTRACK`]
/// until the trial `K` is positive definite and the Armijo condition holds.
/// The Armijo test gets a few ulps of slack in `loglik` so that steps taken
/// once the increase is below rounding are not rejected. Stops when the
/// gradient norm is at most `tol`.
pub fn solve_mle(s: &SymMatrix, tol: f64, max_iter: usize) -> Result<MleResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let model = CycleModel::new(s.n())?;
    let n = model.n();
    let support = model.support();
    let sr = real_matrix(s, "S")?;
    if sr.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let mut theta: Vec<f64> = support
        .iter()
        .map(|&(i, j)| if i == j { 1.0 / sr[(i, i)] } else { 0.0 })
        .collect();
    let mut k = build(n, &support, &theta);
    let mut ll = log_lik_real(&k, &sr).ok_or(Error::NotPositiveDefinite)?;
    let mut trace = vec![ll];

    for iter in 0..=max_iter {
        let sigma = k.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        let g = gradient_at(&sigma, &sr, &support);
        let grad_norm = g.norm();
        if grad_norm <= tol {
            return Ok(MleResult {
                k_hat: SymMatrix::from_real(&k),
                sigma_hat: SymMatrix::from_real(&sigma),
                iterations: iter,
                grad_norm,
                loglik: ll,
                loglik_trace: trace,
            });
        }
        if iter == max_iter {
            return Err(Error::MaxIterations {
                iterations: max_iter,
                grad_norm,
            });
        }
        // -Hessian = diag(multiplicity) * G, symmetric positive definite
        let mut neg_hess = response(&sigma, &support);
        for (p, &pos) in support.iter().enumerate() {
            neg_hess.row_mut(p).scale_mut(multiplicity(pos));
        }
        let step = match neg_hess.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => neg_hess.lu().solve(&g).unwrap_or_else(|| g.clone()),
        };
        let slope = g.dot(&step);
        let slack = 4.0 * f64::EPSILON * ll.abs().max(1.0);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let k_trial = build(n, &support, &trial);
            if let Some(ll_trial) = log_lik_real(&k_trial, &sr) {
                if ll_trial + slack >= ll + ARMIJO * t * slope {
                    theta = trial;
                    k = k_trial;
                    ll = ll_trial;
                    trace.push(ll);
                    break;
                }
            }
            t *= BACKTRACK;
            if t < MIN_STEP {
                return Err(Error::MaxIterations {
                    iterations: iter,
                    grad_norm,
                });
            }
        }
    }
    unreachable!("loop returns by the final iteration")
}

/// Which unknowns the oracle solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// The `2n` support coordinates of `K`; equations `(K^{-1})_p = S_p`.
    Concentration,
    /// The off-support coordinates of `Sigma = S + z`; equations are the
    /// harvested minors. Reaches singular critical points (checkerboards at
    /// `S = Id`) that have no finite `K`.
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub s: SymMatrix,
    pub starts: usize,
    pub seed: u64,
    pub formulation: Formulation,
    pub converged_runs: usize,
    pub distinct_critical_points: usize,
    /// `K` for the concentration formulation, `Sigma` for the covariance one.
    pub points: Vec<SymMatrix>,
    pub max_residual: f64,
    pub max_jacobian_condition: f64,
}

struct Solution {
    matrix: SymMatrix,
    residual: f64,
    condition: f64,
}

fn start_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn uniform_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Newton on `F(theta) = (K^{-1})_p - S_p` with residual backtracking.
fn concentration_run(s: &CMatrix, support: &[(usize, usize)], rng: &mut ChaCha8Rng, tol: f64) -> Option<Solution> {
    let n = s.nrows();
    let mut theta: Vec<Complex64> = support
        .iter()
        .map(|&(i, j)| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0) + uniform_complex(rng, 1.0))
        .collect();
    let residual = |theta: &[Complex64]| -> Option<(DVector<Complex64>, CMatrix)> {
        let sigma = build(n, support, theta).try_inverse()?;
        if !all_finite(&sigma) {
            return None;
        }
        let f = DVector::from_iterator(support.len(), support.iter().map(|&(i, j)| sigma[(i, j)] - s[(i, j)]));
        Some((f, sigma))
    };
    let mut polished = 0;
    for _ in 0..ORACLE_MAX_ITER {
        let (f, sigma) = residual(&theta)?;
        let fnorm = f.norm();
        let g = response(&sigma, support);
        let converged = fnorm <= tol * max_abs(&sigma).max(1.0);
        if converged && polished == POLISH_STEPS {
            return Some(Solution {
                matrix: SymMatrix::from_dmatrix(&build(n, support, &theta)),
                residual: f.iter().fold(0.0f64, |m, z| m.max(z.norm())),
                condition: condition_number(&g),
            });
        }
        // G d = F is the Newton step, since dF/dtheta = -G
        let d = g.lu().solve(&f)?;
        if converged {
            polished += 1;
            theta.iter_mut().zip(d.iter()).for_each(|(t, di)| *t += di);
            continue;
        }
        let mut lambda = 1.0;
        while lambda > ORACLE_MIN_DAMPING {
            let trial: Vec<Complex64> = theta.iter().zip(d.iter()).map(|(t, di)| t + di * lambda).collect();
            if let Some((f2, _)) = residual(&trial) {
                if f2.norm() < (1.0 - ARMIJO * lambda) * fnorm {
                    break;
                }
            }
            lambda *= 0.5;
        }
        theta.iter_mut().zip(d.iter()).for_each(|(t, di)| *t += di * lambda);
        if theta.iter().any(|t| t.norm() > DIVERGENCE) {
            return None;
        }
    }
    None
}

/// Gauss-Newton on the harvested minors over the off-support entries.
fn covariance_run(
    s: &SymMatrix,
    off: &[(usize, usize)],
    minors: &[MinorSpec],
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Option<Solution> {
    let n = s.n();
    let mut z: Vec<Complex64> = off.iter().map(|_| uniform_complex(rng, 1.5)).collect();
    let assemble = |z: &[Complex64]| {
        let mut a = s.clone();
        for (&(i, j), &v) in off.iter().zip(z) {
            a.set(i, j, s.get(i, j) + v);
        }
        a
    };
    let columns: Vec<usize> = off.iter().map(|&(i, j)| upper_index(n, i, j)).collect();
    let mut polished = 0;
    for _ in 0..ORACLE_MAX_ITER {
        let a = assemble(&z);
        let f = DVector::from_iterator(minors.len(), minors.iter().map(|m| m.value(&a)));
        let grads: Vec<Vec<Complex64>> = minors.iter().map(|m| m.gradient(&a)).collect();
        let jac = CMatrix::from_fn(minors.len(), off.len(), |r, c| grads[r][columns[c]]);
        let scale = a.max_abs().max(1.0).powi(3);
        let converged = f.norm() <= tol * scale;
        if converged && polished == POLISH_STEPS {
            let sv = crate::linalg::singular_values(&jac);
            let condition = match (sv.first(), sv.get(off.len() - 1)) {
                (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
                _ => f64::INFINITY,
            };
            return Some(Solution {
                matrix: a,
                residual: f.iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale,
                condition,
            });
        }
        let d = jac.svd(true, true).solve(&(-f), 1e-14).ok()?;
        z.iter_mut().zip(d.iter()).for_each(|(zi, di)| *zi += di);
        if converged {
            polished += 1;
        }
        if z.iter().any(|v| !v.re.is_finite() || v.norm() > DIVERGENCE) {
            return None;
        }
    }
    None
}

/// Counts complex critical points of the likelihood for data `S` by Newton
/// iteration from `starts` random complex starting points.
///
/// The concentration formulation starts from `K = Id + U`, entries of `U`
/// uniform in the complex box `[-1, 1]^2`. Runs that diverge, hit a singular
/// `K`, or do not converge in 100 steps are discarded; converged runs get two
/// extra Newton steps and are then deduplicated at [`ORACLE_DEDUP_TOL`].
/// Deterministic given `seed`, whatever the thread count.
pub fn critical_points_oracle(n: usize, s: &SymMatrix, starts: usize, seed: u64, tol: f64) -> Result<OracleReport> {
    run_oracle(n, s, starts, seed, tol, Formulation::Concentration)
}

/// The same count in the covariance formulation.
pub fn critical_points_oracle_covariance(
    n: usize,
    s: &SymMatrix,
    starts: usize,
    seed: u64,
    tol: f64,
) -> Result<OracleReport> {
    run_oracle(n, s, starts, seed, tol, Formulation::Covariance)
}

pub fn run_oracle(
    n: usize,
    s: &SymMatrix,
    starts: usize,
    seed: u64,
    tol: f64,
    formulation: Formulation,
) -> Result<OracleReport> {
    if !(4..=6).contains(&n) {
        return Err(Error::InvalidArgument(format!("the oracle supports n in 4..=6, got {n}")));
    }
    if s.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.n(),
        });
    }
    if starts == 0 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument("the oracle needs starts > 0 and tol > 0".into()));
    }
    let model = CycleModel::new(n)?;
    let support = model.support();
    let dense = s.to_dmatrix();
    let off = model.off_support();
    let minors = match formulation {
        Formulation::Covariance => default_minors(n)?,
        Formulation::Concentration => Vec::new(),
    };
    let runs: Vec<Option<Solution>> = (0..starts)
        .into_par_iter()
        .map(|run| {
            let mut rng = start_rng(seed, run);
            match formulation {
                Formulation::Concentration => concentration_run(&dense, &support, &mut rng, tol),
                Formulation::Covariance => covariance_run(s, &off, &minors, &mut rng, tol),
            }
        })
        .collect();
    let solutions: Vec<Solution> = runs.into_iter().flatten().collect();
    let converged_runs = solutions.len();
    let mats: Vec<SymMatrix> = solutions.iter().map(|s| s.matrix.clone()).collect();
    let (kept, _) = dedup_indices(&mats, ORACLE_DEDUP_TOL);
    let kept_mats: Vec<SymMatrix> = kept.iter().map(|&i| mats[i].clone()).collect();
    let order = canonical_order(&kept_mats);
    let points: Vec<SymMatrix> = order.iter().map(|&i| kept_mats[i].clone()).collect();
    let fold_max = |f: fn(&Solution) -> f64| kept.iter().map(|&i| f(&solutions[i])).fold(0.0f64, f64::max);
    Ok(OracleReport {
        n,
        s: s.clone(),
        starts,
        seed,
        formulation,
        converged_runs,
        distinct_critical_points: points.len(),
        points,
        max_residual: fold_max(|s| s.residual),
        max_jacobian_condition: fold_max(|s| s.condition),
    })
}

/// `Id + 0.3 (G + G^T) / 2` with `G` standard normal.
pub fn generic_s(n: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let s = DMatrix::<f64>::identity(n, n) + (&g + g.transpose()) * 0.15;
    SymMatrix::from_real(&s)
}

/// Random positive definite data `W W^T / n + Id / 2`, `W` standard normal.
pub fn random_covariance(n: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let s = &w * w.transpose() / n as f64 + DMatrix::<f64>::identity(n, n) * 0.5;
    SymMatrix::from_real(&s)
}

/// Default start count per `n`.
pub fn default_starts(n: usize) -> usize {
    match n {
        4 => 500,
        5 => 1000,
        _ => 4000,
    }
}

/// Runs the oracle on [`generic_s`], redrawing `S` (seeds `seed`, `seed+1`,
/// ...) while some solution has Jacobian condition above
/// [`GENERIC_COND_LIMIT`]. Gives up after ten draws and returns the last.
pub fn oracle_generic(n: usize, starts: usize, seed: u64, tol: f64, formulation: Formulation) -> Result<OracleReport> {
    let mut last = None;
    for attempt in 0..RESAMPLE_ATTEMPTS {
        let s = generic_s(n, seed.wrapping_add(attempt));
        let report = run_oracle(n, &s, starts, seed, tol, formulation)?;
        if report.max_jacobian_condition <= GENERIC_COND_LIMIT {
            return Ok(report);
        }
        log::warn!(
            "S from seed {} looks non-generic (condition {:e}); redrawing",
            seed.wrapping_add(attempt),
            report.max_jacobian_condition
        );
        last = Some(report);
    }
    Ok(last.expect("at least one attempt"))
}
