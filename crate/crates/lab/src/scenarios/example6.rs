//! `f(x) = log₊|x|` against the growth function `ω(t) = t^α` (`t ≤ 1`),
//! `1 + (log t)^β` (`t > 1`): `f` has bounded mean oscillation relative to
//! `ω` although its Hölder quotients diverge, so the two-sided growth
//! condition cannot be dropped.

use halfspace::growthfn::{
    check_condition_b, check_condition_main, example6_w_closed_form, w_transform, ScanGrid,
};
use halfspace::quadrature::gl32;
use halfspace::GrowthFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Overrides;
use crate::config::Inputs;
use crate::report::{num, Check, Plot, ScenarioReport, Series, Table, Verdict};
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Example6Spec {
    pub alpha: f64,
    pub beta: f64,
    /// Random intervals in the sup estimate (doubled for the stability check).
    pub samples: usize,
    /// Decimal exponent range of the sampled lengths and positions.
    pub scales: [f64; 2],
    /// Points `x₁ = e^{10k}`, `k = 1..=k_max`, of the Hölder quotient.
    pub k_max: u32,
    /// Cap of the sampled sup.
    pub sup_cap: f64,
    /// Allowed relative change of the sup when the sample doubles.
    pub stability: f64,
    #[serde(flatten)]
    pub over: Overrides,
}

impl Default for Example6Spec {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            samples: 1000,
            scales: [-3.0, 3.0],
            k_max: 4,
            sup_cap: 10.0,
            stability: 0.05,
            over: Overrides::default(),
        }
    }
}

/// Tolerance of brute force against closed form.
pub const H_TOL: f64 = 1e-6;
/// Relative tolerance of the numerical `W` against its closed form.
pub const W_TOL: f64 = 1e-8;

fn log_plus_abs(x: f64) -> f64 {
    let a = x.abs();
    if a > 1.0 {
        a.ln()
    } else {
        0.0
    }
}

/// Splits `[a, b]` at the given interior points, then splits every piece
/// that stays away from the origin geometrically (ratio ≤ 2) so that `log`
/// is resolved at every scale.
fn pieces(a: f64, b: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo >= 0.0 || hi <= 0.0 {
            let (p, q) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
            if p > 0.0 && q / p > 2.0 {
                let steps = (q / p).log2().ceil() as usize;
                let r = (q / p).powf(1.0 / steps as f64);
                let sign = if lo >= 0.0 { 1.0 } else { -1.0 };
                let mut nodes: Vec<f64> = (0..=steps).map(|k| sign * p * r.powi(k as i32)).collect();
                *nodes.last_mut().unwrap() = sign * q;
                nodes[0] = sign * p;
                nodes.sort_by(f64::total_cmp);
                out.extend(nodes.windows(2).map(|v| (v[0], v[1])));
                continue;
            }
        }
        out.push((lo, hi));
    }
    out
}

/// `H(a,b) = (b−a)^{−2} ∫_a^b ∫_a^b |log₊|x| − log₊|y|| dy dx` by iterated
/// Gauss–Legendre on pieces where the integrand is smooth.
pub fn h_bruteforce(a: f64, b: f64) -> f64 {
    let rule = gl32();
    let outer = pieces(a, b, &[0.0, 1.0, -1.0, a.abs(), -a.abs(), b.abs(), -b.abs()]);
    let inner = |x: f64| -> f64 {
        let lx = log_plus_abs(x);
        pieces(a, b, &[x, -x, 1.0, -1.0])
            .into_iter()
            .map(|(p, q)| rule.integrate(p, q, |y| (lx - log_plus_abs(y)).abs()))
            .sum()
    };
    let total: f64 = outer
        .into_iter()
        .map(|(p, q)| rule.integrate(p, q, &inner))
        .sum();
    total / ((b - a) * (b - a))
}

/// `G(λ) = 1 + 2λ − 2λ(λ+1) log(1 + 1/λ)`, continued by `G(0) = 1`; a power
/// series in `1/λ` avoids the cancellation for large `λ`.
pub fn g_closed(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    if lambda >= 10.0 {
        let u = 1.0 / lambda;
        let mut term = u;
        let mut acc = 0.0;
        for m in 1..60 {
            let mf = m as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * 2.0 * term / ((mf + 1.0) * (mf + 2.0));
            term *= u;
        }
        return acc;
    }
    1.0 + 2.0 * lambda - 2.0 * lambda * (lambda + 1.0) * (1.0 / lambda).ln_1p()
}

/// `G̃(λ) = (λ log λ − λ + 1) / (λ − 1)^{1+α}` on `(1, 2]`.
pub fn g_tilde(lambda: f64, alpha: f64) -> f64 {
    let d = lambda - 1.0;
    let num = if d < 0.1 {
        // (1+d)log(1+d) − d = Σ_{m≥2} (−d)^m / (m(m−1)).
        let mut acc = 0.0;
        let mut p = d * d;
        for m in 2..40 {
            let mf = m as f64;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * p / (mf * (mf - 1.0));
            p *= d;
        }
        acc
    } else {
        lambda * lambda.ln() - lambda + 1.0
    };
    num / d.powf(1.0 + alpha)
}

/// Hölder quotient `|f(x₁) − f(1)| / ω(x₁ − 1)`.
pub fn holder_quotient(omega: &GrowthFunction, x1: f64) -> f64 {
    (log_plus_abs(x1) - log_plus_abs(1.0)).abs() / omega.eval(x1 - 1.0)
}

fn sample_intervals(n: usize, scales: [f64; 2], seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = 10f64.powf(rng.gen_range(scales[0]..scales[1]));
            let pos = 10f64.powf(rng.gen_range(scales[0]..scales[1]));
            let a = match rng.gen_range(0..3) {
                0 => pos,
                1 => -pos,
                _ => pos - len / 2.0,
            };
            (a, a + len)
        })
        .collect()
}

fn structured_intervals(scales: [f64; 2]) -> Vec<(f64, f64)> {
    let (lo, hi) = ((scales[0] * 4.0).round() as i32, (scales[1] * 4.0).round() as i32);
    (lo..=hi)
        .flat_map(|j| {
            let len = 10f64.powf(j as f64 / 4.0);
            [-len / 2.0, 0.0, 1.0, 1.0 - len / 2.0, -1.0 - len]
                .into_iter()
                .map(move |a| (a, a + len))
        })
        .collect()
}

struct SupResult {
    value: f64,
    witness: (f64, f64),
    count: usize,
}

fn sup_ratio(omega: &GrowthFunction, intervals: &[(f64, f64)]) -> SupResult {
    let vals: Vec<f64> = intervals
        .par_iter()
        .map(|&(a, b)| h_bruteforce(a, b) / omega.eval(b - a))
        .collect();
    let mut best = (f64::NEG_INFINITY, (f64::NAN, f64::NAN));
    for (v, &ab) in vals.iter().zip(intervals) {
        if !(*v <= best.0) {
            best = (*v, ab);
        }
    }
    SupResult {
        value: best.0,
        witness: best.1,
        count: intervals.len(),
    }
}

fn row(section: &str, key: &str, value: f64, reference: f64, bound: f64, verdict: &str) -> Vec<String> {
    vec![
        section.into(),
        key.into(),
        num(value),
        num(reference),
        num(bound),
        verdict.into(),
    ]
}

pub fn run(name: &str, spec: &Example6Spec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let (alpha, beta) = (spec.alpha, spec.beta);
    let omega = GrowthFunction::catalog("example6", &[alpha, beta])?;
    let mut rep = ScenarioReport::new(name, "example6");

    // (i)+(ii) Brute force against the closed form.
    let mut h_table = Table::new(
        "H",
        &["case", "a", "b", "lambda", "bruteforce", "closed_form", "abs_error", "verdict"],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed ^ 0xe6);
    let mut case_one: Vec<(f64, f64)> = vec![(1.0, 2.0), (2.0, 5.0), (1.0, 1.5)];
    for _ in 0..10 {
        let a = 10f64.powf(rng.gen_range(0.0..2.0));
        let b = a + 10f64.powf(rng.gen_range(-2.0..2.0));
        case_one.push((a, b));
    }
    let mut worst: f64 = 0.0;
    for &(a, b) in &case_one {
        let lam = a / (b - a);
        let (h, g) = (h_bruteforce(a, b), g_closed(lam));
        let err = (h - g).abs();
        worst = worst.max(err);
        let v = Verdict::from_bool(err <= H_TOL);
        h_table.push(vec![
            "I".into(),
            num(a),
            num(b),
            num(lam),
            num(h),
            num(g),
            num(err),
            v.as_str().into(),
        ]);
    }
    rep.checks.push(Check::at_most("case-I closed form", worst, H_TOL));
    let h0 = h_bruteforce(-0.5, 0.5);
    h_table.push(vec![
        "III".into(),
        num(-0.5),
        num(0.5),
        String::new(),
        num(h0),
        num(0.0),
        num(h0.abs()),
        Verdict::from_bool(h0 == 0.0).as_str().into(),
    ]);
    rep.checks.push(Check::new("H(-1/2,1/2) = 0", Verdict::from_bool(h0 == 0.0), h0, 0.0));
    rep.metrics.insert("H(1,2)".into(), h_bruteforce(1.0, 2.0));
    rep.metrics.insert("G(1)".into(), g_closed(1.0));

    let mut ratios = Table::new("ratios", &["section", "key", "value", "reference", "bound", "verdict"]);

    // (iii) Sampled sup of H/ω and its stability.
    let structured = structured_intervals(spec.scales);
    let mut base = structured.clone();
    base.extend(sample_intervals(spec.samples, spec.scales, inputs.seed));
    let mut doubled = structured;
    doubled.extend(sample_intervals(2 * spec.samples, spec.scales, inputs.seed));
    let s1 = sup_ratio(&omega, &base);
    let s2 = sup_ratio(&omega, &doubled);
    let change = halfspace::seminorms::relative_change(s1.value, s2.value);
    for (key, s) in [("sup", &s1), ("sup-doubled", &s2)] {
        let ok = s.value <= spec.sup_cap;
        ratios.push(row("sample", key, s.value, s.count as f64, spec.sup_cap, Verdict::from_bool(ok).as_str()));
        ratios.push(row("sample", &format!("{key}-witness"), s.witness.0, s.witness.1, f64::NAN, ""));
    }
    ratios.push(row(
        "sample",
        "relative-change",
        change,
        f64::NAN,
        spec.stability,
        Verdict::from_bool(change <= spec.stability).as_str(),
    ));
    rep.checks.push(
        Check::at_most("sup H/omega", s1.value.max(s2.value), spec.sup_cap)
            .with_detail(format!("witness ({}, {})", s2.witness.0, s2.witness.1)),
    );
    rep.checks.push(Check::at_most("sup stability", change, spec.stability));
    rep.metrics.insert("sup".into(), s1.value);
    rep.metrics.insert("sup_doubled".into(), s2.value);

    // (iv) Divergence of the Hölder quotient.
    let seq: Vec<(f64, f64)> = (1..=spec.k_max)
        .map(|k| {
            let l = 10.0 * k as f64;
            (l, holder_quotient(&omega, l.exp()))
        })
        .collect();
    for &(l, q) in &seq {
        let approx = l / (1.0 + l.powf(beta));
        ratios.push(row("holder", &format!("x1=e^{l}"), q, approx, f64::NAN, ""));
    }
    let increasing = seq.windows(2).all(|w| w[1].1 > w[0].1);
    let last = seq.last().map(|s| s.1).unwrap_or(f64::NAN);
    rep.checks.push(Check::new(
        "holder quotient increasing",
        Verdict::from_bool(increasing),
        last,
        f64::NAN,
    ));
    rep.checks.push(Check::new("holder quotient exceeds 3", Verdict::from_bool(last > 3.0), last, 3.0));
    rep.metrics.insert("holder_last".into(), last);

    // (v) W against its closed form.
    let mut w_worst: f64 = 0.0;
    for j in -40..=40 {
        let t = 2f64.powf(j as f64 / 2.0);
        let numeric = w_transform(&omega, t, 1e-13).unwrap_or(f64::NAN);
        let exact = example6_w_closed_form(alpha, beta, t);
        let rel = (numeric - exact).abs() / exact;
        w_worst = w_worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
        ratios.push(row("w-transform", &num(t), numeric, exact, W_TOL, Verdict::from_bool(rel <= W_TOL).as_str()));
    }
    rep.checks.push(Check::at_most("W closed form", w_worst, W_TOL));

    // (vi) Boundedness of G, λ^α G and G̃.
    let lams: Vec<f64> = (-24..=24).map(|j| 10f64.powf(j as f64 / 4.0)).collect();
    let g_vals: Vec<f64> = lams.iter().map(|&l| g_closed(l)).collect();
    let weighted: Vec<f64> = lams.iter().zip(&g_vals).map(|(l, g)| l.powf(alpha) * g).collect();
    let g_max = g_vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let w_max = weighted.iter().fold(0.0f64, |a, &b| a.max(b));
    // Decay at infinity: the largest tail value is reached before λ = 10³.
    let tail_ok = weighted[36..].iter().all(|&v| v <= weighted[36]) && g_vals[36..].windows(2).all(|w| w[1] <= w[0]);
    let gt_vals: Vec<(f64, f64)> = (0..=40)
        .map(|j| {
            let lam = 1.0 + 10f64.powf(-(j as f64) / 5.0);
            (lam, g_tilde(lam, alpha))
        })
        .collect();
    let gt_max = gt_vals.iter().fold(0.0f64, |a, &(_, v)| a.max(v));
    let bounded = g_max.is_finite() && w_max.is_finite() && gt_max.is_finite() && tail_ok;
    ratios.push(row("bounded", "max G", g_max, f64::NAN, f64::NAN, ""));
    ratios.push(row("bounded", "max lambda^alpha G", w_max, f64::NAN, f64::NAN, ""));
    ratios.push(row("bounded", "max G-tilde on (1,2]", gt_max, f64::NAN, f64::NAN, ""));
    rep.checks.push(Check::new("G, lambda^alpha G, G-tilde bounded", Verdict::from_bool(bounded), w_max.max(g_max).max(gt_max), f64::NAN));

    // Growth conditions of ω.
    let grid = ScanGrid::default();
    let tail = check_condition_b(&omega, &grid);
    let integrable = w_transform(&omega, 1.0, 1e-12).is_ok();
    let main = check_condition_main(&omega, &grid);
    ratios.push(row("condition", "tail", tail.constant, f64::NAN, f64::NAN, &tail.satisfied.to_string()));
    ratios.push(row("condition", "integrable-at-0", f64::NAN, f64::NAN, f64::NAN, &integrable.to_string()));
    ratios.push(row("condition", "main", main.main.constant, f64::NAN, f64::NAN, &main.main.satisfied.to_string()));
    rep.checks.push(Check::new(
        "conditions: tail and integrability hold, main fails",
        Verdict::from_bool(tail.satisfied && integrable && !main.main.satisfied),
        tail.constant,
        f64::NAN,
    ));

    for c in &rep.checks {
        ratios.push(row("check", &c.name, c.value, f64::NAN, c.bound, c.verdict.as_str()));
    }
    rep.tables.push(h_table);
    rep.tables.push(ratios);

    rep.plots.push(Plot {
        name: "G".into(),
        title: "G and lambda^alpha G".into(),
        x_label: "lambda".into(),
        y_label: "value".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "G".into(),
                points: lams.iter().copied().zip(g_vals.iter().copied()).collect(),
            },
            Series {
                label: "lambda^alpha G".into(),
                points: lams.iter().copied().zip(weighted.iter().copied()).collect(),
            },
        ],
    });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_branches_join_smoothly() {
        let direct = |l: f64| 1.0 + 2.0 * l - 2.0 * l * (l + 1.0) * (1.0 / l).ln_1p();
        assert!((g_closed(10.0) - direct(10.0)).abs() < 1e-12);
        let direct_t = |l: f64| (l * l.ln() - l + 1.0) / (l - 1.0).powf(1.5);
        assert!((g_tilde(1.0999, 0.5) - direct_t(1.0999)).abs() < 1e-12);
    }

    #[test]
    fn pieces_cover_the_interval() {
        let p = pieces(-3.0, 700.0, &[0.0, 1.0, -1.0, 5.0]);
        assert_eq!(p.first().unwrap().0, -3.0);
        assert_eq!(p.last().unwrap().1, 700.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }
}
