use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, Context};
use cycle_mld::certify::{certify_census, rk_identity_check};
use cycle_mld::intersect::{enumerate_points, ml_degree_formula, variety_degree_formula};
use cycle_mld::mle::{default_starts, oracle_generic, random_covariance, run_oracle, solve_mle, Formulation};
use cycle_mld::model::{m_matrix, SymMatrix, Variant};
use cycle_mld::poly::{divisibility_check, factorization_check, p_poly, roots, DEFAULT_ROOT_TOL};
use cycle_mld::Error;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use crate::{Command, Common, FormulationArg};

pub enum Failure {
    /// Bad flags, unreadable input, or arguments outside a routine's domain.
    Usage(anyhow::Error),
    /// A computation hit a mathematical failure mode.
    Math(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::NotPositiveDefinite => {
                Failure::Usage(e.into())
            }
            _ => Failure::Math(e.into()),
        }
    }
}

pub struct Outcome {
    /// Full JSON result (without the config echo).
    pub result: Map<String, Value>,
    /// Scalar rows for CSV and the stderr table.
    pub rows: Vec<Map<String, Value>>,
    pub pass: bool,
}

type Run = std::result::Result<Outcome, Failure>;

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("results are JSON objects"),
    }
}

/// Top-level fields that are not arrays or objects.
fn scalars(m: &Map<String, Value>) -> Map<String, Value> {
    m.iter()
        .filter(|(_, v)| !v.is_array() && !v.is_object())
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn single(result: Map<String, Value>, pass: bool) -> Outcome {
    Outcome {
        rows: vec![scalars(&result)],
        result,
        pass,
    }
}

fn multi(rows: Vec<Map<String, Value>>, mut result: Map<String, Value>) -> Outcome {
    let pass = rows.iter().all(|r| r.get("pass") == Some(&Value::Bool(true)));
    result.insert("all_pass".into(), Value::Bool(pass));
    result.insert("rows".into(), Value::Array(rows.iter().cloned().map(Value::Object).collect()));
    Outcome { result, rows, pass }
}

/// Exact integers as JSON numbers when they fit, decimal strings otherwise.
fn big_json<T: ToPrimitive + ToString>(v: &T) -> Value {
    match v.to_i64() {
        Some(x) => json!(x),
        None => json!(v.to_string()),
    }
}

fn read_matrix(path: &Path) -> std::result::Result<SymMatrix, Failure> {
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Usage)?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {} as a symmetric matrix", path.display()))
        .map_err(Failure::Usage)
}

fn row(check: &str, n: usize, pass: bool, detail: String) -> Map<String, Value> {
    object(json!({"check": check, "n": n, "pass": pass, "detail": detail}))
}

pub fn run(command: &Command, _common: &Common) -> Run {
    match command {
        Command::Formula { n } => {
            let v = ml_degree_formula(*n)?;
            Ok(single(object(json!({"n": n, "ml_degree": big_json(&v)})), true))
        }
        Command::Degree { n } => {
            let v = variety_degree_formula(*n)?;
            Ok(single(object(json!({"n": n, "variety_degree": big_json(&v)})), true))
        }
        Command::Enumerate { n, tol } => {
            let report = enumerate_points(*n, *tol)?;
            let pass = report.matches_formula();
            let result = object(serde_json::to_value(&report).map_err(|e| Failure::Math(e.into()))?);
            Ok(single(result, pass))
        }
        Command::Certify { n, tol } => {
            let mut report = enumerate_points(*n, *tol)?;
            let summary = certify_census(&mut report)?;
            let mut result = object(serde_json::to_value(&summary).map_err(|e| Failure::Math(e.into()))?);
            result.insert(
                "points".into(),
                serde_json::to_value(&report.points).map_err(|e| Failure::Math(e.into()))?,
            );
            Ok(single(result, summary.all_pass))
        }
        Command::Identities { max_n, seed } => identities(*max_n, *seed),
        Command::Mle {
            s_file,
            n,
            seed,
            tol,
            max_iter,
        } => {
            let s = match (s_file, n) {
                (Some(path), _) => read_matrix(path)?,
                (None, Some(n)) => random_covariance(*n, *seed),
                (None, None) => return Err(Failure::Usage(anyhow!("mle needs --s FILE or --n N"))),
            };
            let fit = solve_mle(&s, *tol, *max_iter)?;
            let mut result = object(serde_json::to_value(&fit).map_err(|e| Failure::Math(e.into()))?);
            result.insert("n".into(), json!(s.n()));
            result.insert("s".into(), serde_json::to_value(&s).map_err(|e| Failure::Math(e.into()))?);
            Ok(single(result, true))
        }
        Command::Oracle {
            n,
            starts,
            seed,
            s_file,
            formulation,
            tol,
        } => {
            let formulation = match formulation {
                FormulationArg::Concentration => Formulation::Concentration,
                FormulationArg::Covariance => Formulation::Covariance,
            };
            let starts = starts.unwrap_or_else(|| default_starts(*n));
            let report = match s_file {
                Some(path) => run_oracle(*n, &read_matrix(path)?, starts, *seed, *tol, formulation)?,
                None => oracle_generic(*n, starts, *seed, *tol, formulation)?,
            };
            let expected = ml_degree_formula(*n)?.to_u64().unwrap_or(u64::MAX);
            let count = report.distinct_critical_points as u64;
            if count > expected {
                log::error!("oracle found {count} critical points, more than the ML-degree {expected}");
            }
            let mut result = object(serde_json::to_value(&report).map_err(|e| Failure::Math(e.into()))?);
            result.insert("ml_degree".into(), json!(expected));
            Ok(single(result, count == expected))
        }
        Command::All {
            n_range,
            certify_max,
            seed,
        } => {
            let (lo, hi) = parse_range(n_range).map_err(Failure::Usage)?;
            all(lo, hi, *certify_max, *seed)
        }
    }
}

/// `A..B` or `A..=B`, both inclusive.
pub fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("range must look like A..B, got {s:?}"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo: usize = a.trim().parse().with_context(|| format!("bad range start in {s:?}"))?;
    let hi: usize = b.trim().parse().with_context(|| format!("bad range end in {s:?}"))?;
    if lo > hi {
        return Err(anyhow!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

fn identity_rows(max_n: usize, seed: u64) -> std::result::Result<Vec<Map<String, Value>>, Failure> {
    if max_n < 5 {
        return Err(Failure::Usage(anyhow!("identities needs --max-n >= 5, got {max_n}")));
    }
    let mut rows = Vec::new();
    for n in 4..=max_n {
        let unit = cycle_mld::poly::factorization_unit(n as i64)?;
        rows.push(row(
            "factorization",
            n,
            factorization_check(n as i64)?,
            format!("unit {}", unit.map_or("none".to_string(), |u| u.to_string())),
        ));
    }
    for m in 2..=max_n {
        rows.push(row("divisibility", m, divisibility_check(m as i64)?, format!("m = {m}")));
    }
    for n in 4..=max_n {
        let ok = roots(&p_poly(n as i64 - 3)?, DEFAULT_ROOT_TOL);
        let detail = match &ok {
            Ok(r) => format!("{} simple roots", r.roots.len()),
            Err(e) => e.to_string(),
        };
        rows.push(row("simple_roots", n, ok.is_ok(), detail));
    }
    for n in 5..=max_n {
        let mut bad = Vec::new();
        for k in 3..n {
            if !rk_identity_check(n, k, 50, 1e-9, seed.wrapping_add((100 * n + k) as u64))? {
                bad.push(k);
            }
        }
        let detail = if bad.is_empty() {
            format!("k = 3..{}", n - 1)
        } else {
            format!("fails at k = {bad:?}")
        };
        rows.push(row("quartic_identity", n, bad.is_empty(), detail));
    }
    Ok(rows)
}

fn identities(max_n: usize, seed: u64) -> Run {
    let rows = identity_rows(max_n, seed)?;
    Ok(multi(rows, object(json!({"max_n": max_n}))))
}

/// The whole pipeline. Per-check errors are recorded as failed rows.
fn all(lo: usize, hi: usize, certify_max: usize, seed: u64) -> Run {
    if lo < 4 {
        return Err(Failure::Usage(anyhow!("the census range must start at n >= 4")));
    }
    let mut rows = Vec::new();
    let endpoints = ml_degree_formula(3)?.to_u64() == Some(1) && variety_degree_formula(3)? == 1.into();
    rows.push(row("formula_endpoints", 3, endpoints, "ml_degree(3) = variety_degree(3) = 1".into()));

    for n in lo..=hi {
        match enumerate_points(n, DEFAULT_ROOT_TOL) {
            Ok(mut report) => {
                rows.push(row(
                    "census_count",
                    n,
                    report.matches_formula() && report.min_pairwise_distance > 1e-4,
                    format!(
                        "{} of {}, min separation {:.3e}",
                        report.distinct_count, report.formula_count, report.min_pairwise_distance
                    ),
                ));
                if n <= certify_max {
                    let r = certify_census(&mut report).map(|s| {
                        row(
                            "transversality",
                            n,
                            s.all_pass,
                            format!("{} points, worst sigma ratio {:.3e}", s.points_checked, s.worst_sigma_ratio),
                        )
                    });
                    rows.push(r.unwrap_or_else(|e| row("transversality", n, false, e.to_string())));
                }
            }
            Err(e) => rows.push(row("census_count", n, false, e.to_string())),
        }
    }

    rows.extend(identity_rows(20, seed)?);

    for n in [4usize, 5] {
        let expected = ml_degree_formula(n)?.to_u64().unwrap_or(u64::MAX);
        let r = oracle_generic(n, default_starts(n), seed, 1e-12, Formulation::Concentration).map(|rep| {
            row(
                "oracle_count",
                n,
                rep.distinct_critical_points as u64 == expected,
                format!("{} of {}", rep.distinct_critical_points, expected),
            )
        });
        rows.push(r.unwrap_or_else(|e| row("oracle_count", n, false, e.to_string())));
    }

    for n in 4..=10 {
        let k0 = m_matrix(n, Complex64::new(0.2, 0.0), Variant::Plus)?;
        let s = SymMatrix::from_dmatrix(&k0.to_dmatrix().try_inverse().expect("M(0.2) is invertible"));
        let r = solve_mle(&s, 1e-12, 100).map(|fit| {
            let rel = fit.k_hat.distance(&k0) / k0.frobenius();
            row("mle_round_trip", n, rel <= 1e-8, format!("relative error {rel:.2e}"))
        });
        rows.push(r.unwrap_or_else(|e| row("mle_round_trip", n, false, e.to_string())));
    }

    Ok(multi(rows, object(json!({"n_range": [lo, hi], "certify_max": certify_max}))))
}
