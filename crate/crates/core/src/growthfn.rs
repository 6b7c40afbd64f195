//! Growth functions and their numerical calculus.
//!
//! A growth function is a positive, non-decreasing modulus `ω` on `(0, ∞)`
//! with `ω(t) → 0` as `t → 0⁺`. This module builds the catalog moduli,
//! evaluates the integrated modulus `W(t) = ∫₀ᵗ ω(s) ds/s`, estimates the
//! constants of the tail (Dini-type) condition
//! `t ∫ₜ^∞ ω(s) ds/s² ≤ C_ω ω(t)` and of the two-sided condition
//! `W(t) + t ∫ₜ^∞ ω(s) ds/s² ≤ C₀ ω(t)`, and measures the dilation indices.
//!
//! All improper integrals are evaluated in the variable `u = log s`, one
//! adaptively refined Gauss–Legendre panel per dyadic shell. The remaining tail beyond
//! the last shell is capped by geometric extrapolation from the ratio of the
//! last two shells; an integral is declared divergent when the extrapolated
//! value fails to settle within [`MAX_DOUBLINGS`] shells.
//!
//! Every "sup over t" is a max over a finite log grid plus seeded random
//! points, so reported constants are lower bounds of the true suprema.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{gl16, integrate_adaptive};
use crate::scalar::Real;

/// Shell budget for divergence detection.
pub const MAX_DOUBLINGS: usize = 60;

/// Relative Cauchy tolerance used by the condition scans.
pub const SCAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrowthError {
    #[error("unknown growth function `{0}`")]
    UnknownName(String),
    #[error("growth function `{name}`: parameter {param} = {value} {reason}")]
    BadParameter {
        name: String,
        param: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("growth function `{name}` expects {expected} parameter(s), got {got}")]
    ParameterCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("integral diverges at t = {t}: no Cauchy convergence within {doublings} dyadic doublings")]
    Divergent { t: f64, doublings: usize },
}

type Modulus<T> = dyn Fn(T) -> T + Send + Sync;

/// A growth function: an analytic callback plus its catalog identity.
#[derive(Clone)]
pub struct GrowthFunction<T: Real> {
    label: String,
    params: Vec<f64>,
    eval: Arc<Modulus<T>>,
}

impl<T: Real> fmt::Debug for GrowthFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthFunction")
            .field("label", &self.label)
            .field("params", &self.params)
            .finish()
    }
}

/// Names accepted by [`GrowthFunction::catalog`], with their parameter lists.
pub const CATALOG: &[(&str, &str)] = &[
    ("power", "alpha in (0,1): t^alpha"),
    (
        "power-logplus",
        "alpha in (0,1), theta real: t^alpha (A + log+ t)^theta, A = max(1, -theta/alpha)",
    ),
    (
        "power-loginv",
        "alpha in (0,1), theta real: t^alpha (A + log+ 1/t)^theta, A = max(1, theta/alpha)",
    ),
    ("min-powers", "alpha, beta in (0,1): min(t^alpha, t^beta)"),
    ("max-powers", "alpha, beta in (0,1): max(t^alpha, t^beta)"),
    (
        "example6",
        "alpha, beta in (0,1): t^alpha for t <= 1, 1 + (log t)^beta for t > 1",
    ),
    ("linear", "no parameters: t (fails the tail condition)"),
    ("constant", "no parameters: 1 (BMO normalization; not vanishing at 0)"),
];

fn unit_interval(name: &str, param: &'static str, v: f64) -> Result<f64, GrowthError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(GrowthError::BadParameter {
            name: name.to_string(),
            param,
            value: v,
            reason: "must lie in (0, 1)",
        })
    }
}

fn finite(name: &str, param: &'static str, v: f64) -> Result<f64, GrowthError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GrowthError::BadParameter {
            name: name.to_string(),
            param,
            value: v,
            reason: "must be finite",
        })
    }
}

fn log_plus<T: Real>(t: T) -> T {
    if t > T::one() {
        t.ln()
    } else {
        T::zero()
    }
}

impl<T: Real> GrowthFunction<T> {
    /// Wraps an arbitrary modulus. The caller is responsible for monotonicity.
    pub fn custom(label: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            params: Vec::new(),
            eval: Arc::new(f),
        }
    }

    /// Builds a catalog growth function by name (see [`CATALOG`]).
    pub fn catalog(name: &str, params: &[f64]) -> Result<Self, GrowthError> {
        let want = |expected: usize| {
            if params.len() == expected {
                Ok(())
            } else {
                Err(GrowthError::ParameterCount {
                    name: name.to_string(),
                    expected,
                    got: params.len(),
                })
            }
        };
        let eval: Arc<Modulus<T>> = match name {
            "power" => {
                want(1)?;
                let a = T::lit(unit_interval(name, "alpha", params[0])?);
                Arc::new(move |t: T| t.powf(a))
            }
            "power-logplus" => {
                want(2)?;
                let a = unit_interval(name, "alpha", params[0])?;
                let th = finite(name, "theta", params[1])?;
                let big_a = T::lit(1f64.max(-th / a));
                let (a, th) = (T::lit(a), T::lit(th));
                Arc::new(move |t: T| t.powf(a) * (big_a + log_plus(t)).powf(th))
            }
            "power-loginv" => {
                want(2)?;
                let a = unit_interval(name, "alpha", params[0])?;
                let th = finite(name, "theta", params[1])?;
                let big_a = T::lit(1f64.max(th / a));
                let (a, th) = (T::lit(a), T::lit(th));
                Arc::new(move |t: T| t.powf(a) * (big_a + log_plus(t.recip())).powf(th))
            }
            "min-powers" | "max-powers" => {
                want(2)?;
                let a = T::lit(unit_interval(name, "alpha", params[0])?);
                let b = T::lit(unit_interval(name, "beta", params[1])?);
                if name == "min-powers" {
                    Arc::new(move |t: T| t.powf(a).min(t.powf(b)))
                } else {
                    Arc::new(move |t: T| t.powf(a).max(t.powf(b)))
                }
            }
            "example6" => {
                want(2)?;
                let a = T::lit(unit_interval(name, "alpha", params[0])?);
                let b = T::lit(unit_interval(name, "beta", params[1])?);
                Arc::new(move |t: T| {
                    if t <= T::one() {
                        t.powf(a)
                    } else {
                        T::one() + t.ln().powf(b)
                    }
                })
            }
            "linear" => {
                want(0)?;
                Arc::new(|t: T| t)
            }
            "constant" => {
                want(0)?;
                Arc::new(|_t: T| T::one())
            }
            other => return Err(GrowthError::UnknownName(other.to_string())),
        };
        Ok(Self {
            label: catalog_label(name, params),
            params: params.to_vec(),
            eval,
        })
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        (self.eval)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// `c·ω`, used to check scale invariance of the dilation indices.
    pub fn scaled(&self, c: T) -> Self {
        let inner = self.eval.clone();
        Self {
            label: format!("{}*{}", c, self.label),
            params: self.params.clone(),
            eval: Arc::new(move |t| c * inner(t)),
        }
    }

    /// The integrated modulus `W` as a growth function in its own right.
    /// Evaluation failures (divergence) surface as NaN.
    pub fn integrated(&self) -> Self {
        let inner = self.clone();
        Self {
            label: format!("W[{}]", self.label),
            params: self.params.clone(),
            eval: Arc::new(move |t| w_transform(&inner, t, T::lit(SCAN_TOL)).unwrap_or(T::nan())),
        }
    }
}

fn catalog_label(name: &str, params: &[f64]) -> String {
    if params.is_empty() {
        name.to_string()
    } else {
        let ps: Vec<String> = params.iter().map(|p| format!("{p}")).collect();
        format!("{name}({})", ps.join(","))
    }
}

/// Sums dyadic shells `shell(0), shell(1), …` (non-negative), extrapolating
/// the remainder geometrically from the ratio of the last two shells.
///
/// Converged when two consecutive extrapolated values agree to `tol` and the
/// extrapolated remainder is itself below `tol` of the total. When
/// the shell budget runs out first, the series is still accepted if the
/// extrapolation has settled (an exactly geometric tail over the whole
/// budget), or if the shells are strictly contracting and the remainder is
/// below [`SLOW_REMAINDER`] of the total (log-modified powers near the
/// borderline); otherwise it is reported as divergent.
fn shell_series<T: Real>(
    t: T,
    tol: T,
    mut shell: impl FnMut(usize) -> T,
) -> Result<T, GrowthError> {
    let tol = tol.max(T::epsilon() * T::lit(16.0));
    let divergent = || GrowthError::Divergent {
        t: t.as_f64(),
        doublings: MAX_DOUBLINGS,
    };
    let mut partial = T::zero();
    let mut prev_shell = T::nan();
    let mut prev_estimate = T::nan();
    let mut remainder = T::infinity();
    let mut ratio = T::infinity();
    let mut settled = false;
    for k in 0..MAX_DOUBLINGS {
        let c = shell(k);
        if !c.is_finite() {
            return Err(divergent());
        }
        partial = partial + c;
        let estimate = if k == 0 {
            T::nan()
        } else if c == T::zero() {
            remainder = T::zero();
            partial
        } else {
            ratio = c / prev_shell;
            if ratio < T::one() {
                remainder = c * ratio / (T::one() - ratio);
                partial + remainder
            } else {
                remainder = T::infinity();
                T::infinity()
            }
        };
        settled = estimate.is_finite()
            && prev_estimate.is_finite()
            && (estimate - prev_estimate).abs() <= tol * estimate.abs();
        // Exactly geometric shells agree with their extrapolation at once, so
        // the remainder itself must also be small: a change of regime further
        // out (a breakpoint of ω) is otherwise never seen.
        if settled && remainder <= tol * estimate {
            return Ok(estimate);
        }
        prev_shell = c;
        prev_estimate = estimate;
    }
    let total = partial + remainder;
    if ratio < T::one() && settled
        || ratio < T::lit(1.0 - 1e-3) && remainder <= T::lit(SLOW_REMAINDER) * total
    {
        Ok(total)
    } else {
        Err(divergent())
    }
}

/// Largest extrapolated remainder (relative) accepted after the full shell
/// budget.
pub const SLOW_REMAINDER: f64 = 1e-6;

/// One shell, integrated to a hundredth of the series tolerance.
fn shell_integral<T: Real>(lo: T, hi: T, tol: T, f: impl FnMut(T) -> T) -> T {
    let rel = (tol * T::lit(1e-2)).max(T::epsilon() * T::lit(4.0));
    integrate_adaptive(gl16(), lo, hi, rel, T::zero(), f)
}

/// `W(t) = ∫₀ᵗ ω(s) ds/s`.
///
/// Divergence here is exactly the failure of the integrability condition at
/// the origin.
pub fn w_transform<T: Real>(omega: &GrowthFunction<T>, t: T, tol: T) -> Result<T, GrowthError> {
    let ln2 = T::LN_2();
    let top = t.ln();
    shell_series(t, tol, |k| {
        let hi = top - ln2 * T::from_count(k);
        let lo = hi - ln2;
        shell_integral(lo, hi, tol, |u| omega.eval(u.exp()))
    })
}

fn sorted_order<T: Real>(points: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// `W` at every point (any order): one series at the smallest point, then
/// cumulative integration between consecutive sorted points.
pub fn w_transform_many<T: Real>(
    omega: &GrowthFunction<T>,
    points: &[T],
    tol: T,
) -> Result<Vec<T>, GrowthError> {
    let mut out = vec![T::zero(); points.len()];
    let mut prev: Option<(T, T)> = None;
    for i in sorted_order(points) {
        let t = points[i];
        let w = match prev {
            None => w_transform(omega, t, tol)?,
            Some((tp, wp)) => wp + shell_integral(tp.ln(), t.ln(), tol, |u| omega.eval(u.exp())),
        };
        out[i] = w;
        prev = Some((t, w));
    }
    Ok(out)
}

/// [`tail_integral`] at every point (any order): one series at the largest
/// point, then cumulative integration downwards.
pub fn tail_integral_many<T: Real>(
    omega: &GrowthFunction<T>,
    points: &[T],
    tol: T,
) -> Result<Vec<T>, GrowthError> {
    let mut out = vec![T::zero(); points.len()];
    // prev = (t, ∫ₜ^∞ ω(s) ds/s²)
    let mut prev: Option<(T, T)> = None;
    for i in sorted_order(points).into_iter().rev() {
        let t = points[i];
        let tail = match prev {
            None => tail_integral(omega, t, tol)? / t,
            Some((tp, sp)) => {
                sp + shell_integral(t.ln(), tp.ln(), tol, |u| omega.eval(u.exp()) * (-u).exp())
            }
        };
        out[i] = t * tail;
        prev = Some((t, tail));
    }
    Ok(out)
}

/// `t ∫ₜ^∞ ω(s) ds/s²`.
pub fn tail_integral<T: Real>(omega: &GrowthFunction<T>, t: T, tol: T) -> Result<T, GrowthError> {
    let ln2 = T::LN_2();
    let bottom = t.ln();
    // Integrate ω(e^u) e^{-(u - log t)} du so that the factor t is absorbed.
    shell_series(t, tol, |k| {
        let lo = bottom + ln2 * T::from_count(k);
        let hi = lo + ln2;
        shell_integral(lo, hi, tol, |u| omega.eval(u.exp()) * (bottom - u).exp())
    })
}

/// `∫_{u₀}^∞ g(u) du` for a non-negative `g`, by unit-`log 2` shells with the
/// same extrapolation and divergence rules as the growth-function integrals.
pub fn upper_log_integral<T: Real>(
    u0: T,
    tol: T,
    g: impl Fn(T) -> T,
) -> Result<T, GrowthError> {
    let ln2 = T::LN_2();
    shell_series(u0.exp(), tol, |k| {
        let lo = u0 + ln2 * T::from_count(k);
        shell_integral(lo, lo + ln2, tol, &g)
    })
}

/// Which growth condition a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Tail condition, constant `C_ω`.
    Tail,
    /// Two-sided condition, constant `C₀`.
    Main,
    /// `W(t) ≤ C'_ω ω(t)`.
    Integrated,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Tail => "tail",
            Condition::Main => "main",
            Condition::Integrated => "integrated",
        })
    }
}

/// Outcome of a condition scan. `constant` is a lower bound of the best
/// constant (a max over the scan grid); it is `+∞` when unsatisfied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub label: String,
    pub condition: Condition,
    pub satisfied: bool,
    pub constant: f64,
    pub witness_t: f64,
    pub grid: String,
}

impl ConditionReport {
    pub const CSV_HEADER: &'static str = "label,condition,satisfied,constant,witness_t";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.label, self.condition, self.satisfied, self.constant, self.witness_t
        )
    }
}

/// Scan grid for sup-type functionals: log-spaced points in
/// `[2^lo_exp, 2^hi_exp]` plus seeded log-uniform random points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub lo_exp: i32,
    pub hi_exp: i32,
    pub log_points: usize,
    pub random_points: usize,
    pub seed: u64,
    /// Series tolerance of every integral in the scan. Loosen it for moduli
    /// that are themselves computed numerically (such as `W`).
    pub tol: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            lo_exp: -20,
            hi_exp: 20,
            log_points: 4096,
            random_points: 4096,
            seed: 0x6f6d_6567_61,
            tol: SCAN_TOL,
        }
    }
}

impl ScanGrid {
    pub fn coarse(points: usize) -> Self {
        Self {
            log_points: points,
            random_points: points,
            ..Self::default()
        }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    pub fn points<T: Real>(&self) -> Vec<T> {
        let lo = self.lo_exp as f64;
        let hi = self.hi_exp as f64;
        let n = self.log_points.max(2);
        let mut pts: Vec<f64> = (0..n)
            .map(|i| 2f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        pts.extend((0..self.random_points).map(|_| 2f64.powf(rng.gen_range(lo..hi))));
        pts.into_iter().map(T::lit).collect()
    }

    fn describe(&self) -> String {
        format!(
            "log2 t in [{}, {}]: {} log points + {} random (seed {}), tol {:e}",
            self.lo_exp, self.hi_exp, self.log_points, self.random_points, self.seed, self.tol
        )
    }
}

/// `(max, argmax)` of `values` over `points`, ties broken by the smaller
/// `t`; a NaN value is returned as the max.
fn scan_max<T: Real>(points: &[T], values: Result<Vec<T>, GrowthError>) -> Result<(T, T), GrowthError> {
    let vals = values?;
    let mut best = (T::neg_infinity(), T::nan());
    for (&t, v) in points.iter().zip(vals) {
        if v > best.0 || (v == best.0 && t < best.1) || v.is_nan() {
            best = (v, t);
            if v.is_nan() {
                break;
            }
        }
    }
    Ok(best)
}

fn ratios<T: Real>(
    omega: &GrowthFunction<T>,
    points: &[T],
    values: Result<Vec<T>, GrowthError>,
) -> Result<Vec<T>, GrowthError> {
    Ok(values?
        .into_iter()
        .zip(points)
        .map(|(v, &t)| v / omega.eval(t))
        .collect())
}

/// Detects unbounded growth of a ratio at either end of the grid: the
/// increments over the last two blocks of four octaves do not shrink.
fn blows_up<T: Real>(grid: &ScanGrid, ratio: &impl Fn(T) -> Result<T, GrowthError>) -> bool {
    let probe = |e: i32| ratio(T::lit(2f64.powi(e))).map(|v| v.as_f64());
    let ends = [
        (grid.hi_exp - 8, grid.hi_exp - 4, grid.hi_exp),
        (grid.lo_exp + 8, grid.lo_exp + 4, grid.lo_exp),
    ];
    ends.iter().any(|&(a, b, c)| match (probe(a), probe(b), probe(c)) {
        (Ok(ra), Ok(rb), Ok(rc)) => {
            let d1 = rb - ra;
            let d2 = rc - rb;
            d2 > 0.01 * rc.abs() && d2 >= 0.9 * d1
        }
        _ => true,
    })
}

fn unsatisfied(label: &str, condition: Condition, witness: f64, grid: &ScanGrid) -> ConditionReport {
    ConditionReport {
        label: label.to_string(),
        condition,
        satisfied: false,
        constant: f64::INFINITY,
        witness_t: witness,
        grid: grid.describe(),
    }
}

/// Estimates `C_ω` of the tail condition.
pub fn check_condition_b<T: Real>(omega: &GrowthFunction<T>, grid: &ScanGrid) -> ConditionReport {
    let tol = T::lit(grid.tol);
    let ratio = |t: T| tail_integral(omega, t, tol).map(|v| v / omega.eval(t));
    let pts = grid.points::<T>();
    let values = ratios(omega, &pts, tail_integral_many(omega, &pts, tol));
    match scan_max(&pts, values) {
        Err(GrowthError::Divergent { t, .. }) => {
            unsatisfied(omega.label(), Condition::Tail, t, grid)
        }
        Err(_) => unsatisfied(omega.label(), Condition::Tail, f64::NAN, grid),
        Ok((c, w)) => {
            let finite = c.is_finite();
            let satisfied = finite && !blows_up(grid, &ratio);
            ConditionReport {
                label: omega.label().to_string(),
                condition: Condition::Tail,
                satisfied,
                constant: if satisfied { c.as_f64() } else { f64::INFINITY },
                witness_t: w.as_f64(),
                grid: grid.describe(),
            }
        }
    }
}

/// Result of the two-sided condition scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainConditionReport {
    /// `C₀` for `W + tail ≤ C₀ ω`.
    pub main: ConditionReport,
    /// `C'_ω` for `W ≤ C'_ω ω`.
    pub integrated: ConditionReport,
    /// `C_ω` for the tail part alone.
    pub tail: ConditionReport,
    /// Names of the failing summands (`"integrated"`, `"tail"`).
    pub failed: Vec<String>,
}

/// Estimates `C₀` of the two-sided condition, together with `C'_ω`.
pub fn check_condition_main<T: Real>(
    omega: &GrowthFunction<T>,
    grid: &ScanGrid,
) -> MainConditionReport {
    let tol = T::lit(grid.tol);
    let pts = grid.points::<T>();
    let tail = check_condition_b(omega, grid);

    let w_ratio = |t: T| w_transform(omega, t, tol).map(|v| v / omega.eval(t));
    let w_values = w_transform_many(omega, &pts, tol);
    let integrated = match scan_max(&pts, ratios(omega, &pts, w_values.clone())) {
        Err(GrowthError::Divergent { t, .. }) => {
            unsatisfied(omega.label(), Condition::Integrated, t, grid)
        }
        Err(_) => unsatisfied(omega.label(), Condition::Integrated, f64::NAN, grid),
        Ok((c, w)) => {
            let satisfied = c.is_finite() && !blows_up(grid, &w_ratio);
            ConditionReport {
                label: omega.label().to_string(),
                condition: Condition::Integrated,
                satisfied,
                constant: if satisfied { c.as_f64() } else { f64::INFINITY },
                witness_t: w.as_f64(),
                grid: grid.describe(),
            }
        }
    };

    let mut failed = Vec::new();
    if !integrated.satisfied {
        failed.push("integrated".to_string());
    }
    if !tail.satisfied {
        failed.push("tail".to_string());
    }

    let main = if failed.is_empty() {
        let both = w_values.and_then(|w| {
            let tl = tail_integral_many(omega, &pts, tol)?;
            Ok(w.into_iter().zip(tl).map(|(a, b)| a + b).collect())
        });
        match scan_max(&pts, ratios(omega, &pts, both)) {
            Ok((c, w)) => ConditionReport {
                label: omega.label().to_string(),
                condition: Condition::Main,
                satisfied: c.is_finite(),
                constant: c.as_f64(),
                witness_t: w.as_f64(),
                grid: grid.describe(),
            },
            Err(_) => unsatisfied(omega.label(), Condition::Main, f64::NAN, grid),
        }
    } else {
        let witness = if integrated.satisfied {
            tail.witness_t
        } else {
            integrated.witness_t
        };
        unsatisfied(omega.label(), Condition::Main, witness, grid)
    };

    MainConditionReport {
        main,
        integrated,
        tail,
        failed,
    }
}

/// Lower and upper dilation indices `(i_ω, I_ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationIndices {
    pub lower: f64,
    pub upper: f64,
}

/// Estimates the dilation indices from `h_ω(t) = sup_s ω(st)/ω(s)`, with `s`
/// on a log grid over `[2^-30, 2^30]` and `t` on log grids in `(0,1)` and
/// `(1,∞)`.
pub fn dilation_indices<T: Real>(omega: &GrowthFunction<T>) -> DilationIndices {
    const S_STEPS_PER_OCTAVE: i32 = 10;
    const T_STEPS_PER_OCTAVE: i32 = 4;
    const SPAN: i32 = 30;
    let s_grid: Vec<T> = (-SPAN * S_STEPS_PER_OCTAVE..=SPAN * S_STEPS_PER_OCTAVE)
        .map(|j| T::lit(2f64.powf(j as f64 / S_STEPS_PER_OCTAVE as f64)))
        .collect();
    let omega_s: Vec<T> = s_grid.iter().map(|&s| omega.eval(s)).collect();
    let h = |t: T| -> T {
        let mut best = T::neg_infinity();
        for (&s, &ws) in s_grid.iter().zip(&omega_s) {
            let r = omega.eval(s * t) / ws;
            if r > best {
                best = r;
            }
        }
        best
    };
    let exps: Vec<i32> = (1..=SPAN * T_STEPS_PER_OCTAVE).collect();
    let lower = exps
        .par_iter()
        .map(|&j| {
            let t = T::lit(2f64.powf(-(j as f64) / T_STEPS_PER_OCTAVE as f64));
            (h(t).ln() / t.ln()).as_f64()
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let upper = exps
        .par_iter()
        .map(|&j| {
            let t = T::lit(2f64.powf(j as f64 / T_STEPS_PER_OCTAVE as f64));
            (h(t).ln() / t.ln()).as_f64()
        })
        .reduce(|| f64::INFINITY, f64::min);
    DilationIndices { lower, upper }
}

/// Spot checks of the consequences of the tail condition with constant `C_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiReport {
    /// max over pairs `t₁ ≤ t₂` of `(ω(t₂)/t₂) / (C_b ω(t₁)/t₁)`.
    pub quasi_decreasing_ratio: f64,
    /// max over `t` of `ω(2t) / (2 C_b ω(t))`.
    pub doubling_ratio: f64,
    /// `(ω(2^60)/2^60) / ω(1)`: should be tiny.
    pub limit_ratio: f64,
    pub quasi_decreasing_ok: bool,
    pub doubling_ok: bool,
    pub limit_ok: bool,
    pub passed: bool,
}

/// Checks quasi-monotonicity of `ω(t)/t`, doubling, and `ω(t)/t → 0`.
pub fn quasi_properties_report<T: Real>(
    omega: &GrowthFunction<T>,
    c_b: f64,
    pairs: usize,
    seed: u64,
) -> QuasiReport {
    const SLACK: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cb = T::lit(c_b);
    let mut quasi = f64::NEG_INFINITY;
    let mut doubling = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let a = T::lit(2f64.powf(rng.gen_range(-20.0..20.0)));
        let b = T::lit(2f64.powf(rng.gen_range(-20.0..20.0)));
        let (t1, t2) = if a <= b { (a, b) } else { (b, a) };
        let q = (omega.eval(t2) / t2) / (cb * omega.eval(t1) / t1);
        quasi = quasi.max(q.as_f64());
        let d = omega.eval(a + a) / (T::lit(2.0) * cb * omega.eval(a));
        doubling = doubling.max(d.as_f64());
    }
    // ω(t)/t along t = 2^k must decrease to zero.
    let at = |k: i32| {
        let t = T::lit(2f64.powi(k));
        (omega.eval(t) / t).as_f64()
    };
    let limit_ratio = at(60) / at(0);
    let limit_ok = limit_ratio < 1e-6;
    let quasi_decreasing_ok = quasi <= 1.0 + SLACK;
    let doubling_ok = doubling <= 1.0 + SLACK;
    QuasiReport {
        quasi_decreasing_ratio: quasi,
        doubling_ratio: doubling,
        limit_ratio,
        quasi_decreasing_ok,
        doubling_ok,
        limit_ok,
        passed: quasi_decreasing_ok && doubling_ok && limit_ok,
    }
}

/// Closed form of `W` for the `example6` modulus.
pub fn example6_w_closed_form(alpha: f64, beta: f64, t: f64) -> f64 {
    if t <= 1.0 {
        t.powf(alpha) / alpha
    } else {
        let l = t.ln();
        1.0 / alpha + l.powf(beta + 1.0) / (beta + 1.0) + l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn power(a: f64) -> GrowthFunction<f64> {
        GrowthFunction::catalog("power", &[a]).unwrap()
    }

    #[test]
    fn catalog_values() {
        assert_relative_eq!(power(0.5).eval(4.0), 2.0, epsilon = 1e-15);
        let e6 = GrowthFunction::<f64>::catalog("example6", &[0.5, 0.5]).unwrap();
        assert_relative_eq!(e6.eval(std::f64::consts::E), 2.0, epsilon = 1e-15);
        let mp = GrowthFunction::<f64>::catalog("min-powers", &[0.25, 0.75]).unwrap();
        assert_relative_eq!(mp.eval(0.0625), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn catalog_rejects_bad_input() {
        assert!(matches!(
            GrowthFunction::<f64>::catalog("nope", &[]),
            Err(GrowthError::UnknownName(_))
        ));
        assert!(matches!(
            GrowthFunction::<f64>::catalog("power", &[1.5]),
            Err(GrowthError::BadParameter { .. })
        ));
        assert!(matches!(
            GrowthFunction::<f64>::catalog("example6", &[0.5]),
            Err(GrowthError::ParameterCount { .. })
        ));
    }

    #[test]
    fn w_transform_closed_forms() {
        assert_relative_eq!(
            w_transform(&power(0.5), 1.0, 1e-12).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        let t = 1024.0_f64;
        assert_relative_eq!(
            w_transform(&power(0.9), t, 1e-12).unwrap(),
            t.powf(0.9) / 0.9,
            max_relative = 1e-11
        );
        let e6 = GrowthFunction::<f64>::catalog("example6", &[0.5, 0.5]).unwrap();
        assert_relative_eq!(
            w_transform(&e6, std::f64::consts::E, 1e-12).unwrap(),
            11.0 / 3.0,
            max_relative = 1e-10
        );
        // Slowly contracting shells.
        assert_relative_eq!(
            w_transform(&power(0.1), 1e-3, 1e-12).unwrap(),
            1e-3f64.powf(0.1) / 0.1,
            max_relative = 1e-9
        );
    }

    #[test]
    fn tail_sees_the_breakpoint() {
        // t ∫ₜ^∞ ω(s) ds/s² for t < 1: the power part up to 1, then
        // ∫₁^∞ (1 + (log s)^β) ds/s² = 1 + Γ(1+β).
        let e6 = GrowthFunction::<f64>::catalog("example6", &[0.5, 0.5]).unwrap();
        let gamma_three_halves = 0.886_226_925_452_758;
        for t in [1e-2f64, 1e-3, 1e-5] {
            let exact = t * (2.0 * (t.powf(-0.5) - 1.0) + 1.0 + gamma_three_halves);
            assert_relative_eq!(tail_integral(&e6, t, 1e-12).unwrap(), exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn cumulative_transforms_match_pointwise() {
        let e6 = GrowthFunction::<f64>::catalog("example6", &[0.5, 0.5]).unwrap();
        let pts = [7.5, 0.001, 1.0, 3e4, 0.2, 1.0];
        let w = w_transform_many(&e6, &pts, 1e-12).unwrap();
        let tl = tail_integral_many(&e6, &pts, 1e-12).unwrap();
        for (i, &t) in pts.iter().enumerate() {
            assert_relative_eq!(w[i], w_transform(&e6, t, 1e-12).unwrap(), max_relative = 1e-10);
            assert_relative_eq!(tl[i], tail_integral(&e6, t, 1e-12).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn w_transform_detects_divergence_at_origin() {
        let one = GrowthFunction::<f64>::catalog("constant", &[]).unwrap();
        assert!(matches!(
            w_transform(&one, 1.0, 1e-12),
            Err(GrowthError::Divergent { .. })
        ));
    }

    #[test]
    fn tail_condition_for_power() {
        let r = check_condition_b(&power(0.5), &ScanGrid::coarse(256));
        assert!(r.satisfied);
        assert_relative_eq!(r.constant, 2.0, max_relative = 0.02);
        assert!(r.constant >= 1.0);
    }

    #[test]
    fn tail_condition_fails_for_linear() {
        let lin = GrowthFunction::<f64>::catalog("linear", &[]).unwrap();
        let r = check_condition_b(&lin, &ScanGrid::coarse(64));
        assert!(!r.satisfied);
        assert!(r.constant.is_infinite());
    }

    #[test]
    fn main_condition_power_and_example6() {
        let r = check_condition_main(&power(0.5), &ScanGrid::coarse(256));
        assert!(r.main.satisfied);
        assert_relative_eq!(r.main.constant, 4.0, max_relative = 0.02);
        assert_relative_eq!(r.integrated.constant, 2.0, max_relative = 0.02);

        let e6 = GrowthFunction::<f64>::catalog("example6", &[0.5, 0.5]).unwrap();
        let r = check_condition_main(&e6, &ScanGrid::coarse(256));
        assert!(r.tail.satisfied);
        assert!(!r.main.satisfied);
        assert_eq!(r.failed, vec!["integrated".to_string()]);
    }

    #[test]
    fn main_condition_power_logplus() {
        let w = GrowthFunction::<f64>::catalog("power-logplus", &[0.5, 1.0]).unwrap();
        let r = check_condition_main(&w, &ScanGrid::coarse(256));
        assert!(r.main.satisfied, "{r:?}");
        assert!(r.main.constant.is_finite());
    }

    #[test]
    fn dilation_indices_examples() {
        let d = dilation_indices(&power(0.5));
        assert!((d.lower - 0.5).abs() < 0.01 && (d.upper - 0.5).abs() < 0.01);
        let mp = GrowthFunction::<f64>::catalog("max-powers", &[0.25, 0.75]).unwrap();
        let d = dilation_indices(&mp);
        assert!((d.lower - 0.25).abs() < 0.01, "{d:?}");
        assert!((d.upper - 0.75).abs() < 0.01, "{d:?}");
        // min(t, 1): h(t) = 1 for t < 1 and h(t) = t for t > 1.
        let plateau = GrowthFunction::<f64>::custom("min(t,1)", |t| t.min(1.0));
        let d = dilation_indices(&plateau);
        assert!(d.lower.abs() < 1e-12, "{d:?}");
        assert!((d.upper - 1.0).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn quasi_properties() {
        let r = quasi_properties_report(&power(0.5), 2.0, 10_000, 7);
        assert!(r.passed);
        assert!(r.quasi_decreasing_ratio <= 1.0);
        let lin = GrowthFunction::<f64>::catalog("linear", &[]).unwrap();
        let r = quasi_properties_report(&lin, 1.0, 10_000, 7);
        assert!(r.doubling_ok && r.quasi_decreasing_ok);
        assert!(!r.limit_ok && !r.passed);
    }

    #[test]
    fn generic_over_f32() {
        let w = GrowthFunction::<f32>::catalog("power", &[0.5]).unwrap();
        let v = w_transform(&w, 1.0_f32, 1e-6).unwrap();
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn csv_row_format() {
        let r = check_condition_b(&power(0.5), &ScanGrid::coarse(16));
        let row = r.csv_row();
        assert!(row.starts_with("power(0.5),tail,true,"));
        assert_eq!(row.split(',').count(), 5);
    }
}
