//! Equivalence of the solution seminorms: the `q`-square, `exp`-square,
//! `∞` and Hölder seminorms of one solution, their pairwise ratios, their
//! stability under sweep doubling, and the one-sided inequalities with
//! explicit constant expressions.

use halfspace::extension::SquareQuadrature;
use halfspace::growthfn::{check_condition_main, ScanGrid};
use halfspace::seminorms::{
    holder_seminorm, log_lattice, relative_change, star2_exp, star2_inf, star2_q, HolderOptions,
    MeanRule, PairDomain,
};
use halfspace::{CubeSweep, Extender, GrowthFunction, PoissonKernel};
use serde::{Deserialize, Serialize};

use super::{ratio, Overrides, Solution};
use crate::config::{Inputs, Named};
use crate::report::{num, Check, Plot, ScenarioReport, Series, Table, Verdict};
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivalenceSpec {
    /// Catalog data whose extensions are measured (the top-level datum when
    /// empty).
    pub data: Vec<Named>,
    pub qs: Vec<f64>,
    /// Cap on every pairwise ratio and the unspecified constant `C` of the
    /// one-sided inequalities.
    pub cap: f64,
    /// Allowed relative change under sweep doubling.
    pub stability: f64,
    /// Random half-space pairs of the Hölder seminorm.
    pub holder_pairs: usize,
    #[serde(flatten)]
    pub over: Overrides,
}

impl Default for EquivalenceSpec {
    fn default() -> Self {
        Self {
            data: ["cos", "sin2", "sqrt-abs", "signed-sqrt", "lorentzian"]
                .iter()
                .map(|n| Named::new(n, &[]))
                .collect(),
            qs: vec![1.0, 2.0, 4.0],
            cap: 50.0,
            stability: 0.10,
            holder_pairs: 4096,
            over: Overrides::default(),
        }
    }
}

/// The measured seminorms of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Seminorms {
    /// `(label, value)` in the order `q…, exp, inf, holder`.
    pub values: Vec<(String, f64)>,
    /// Hölder seminorm with respect to the integrated growth function.
    pub holder_w: f64,
}

impl Seminorms {
    pub fn get(&self, label: &str) -> f64 {
        self.values
            .iter()
            .find(|(l, _)| l == label)
            .map(|v| v.1)
            .unwrap_or(f64::NAN)
    }
}

/// Sampling resolution; `refine = true` doubles every budget.
fn measure(
    u: &Solution,
    omega: &GrowthFunction,
    w: &GrowthFunction,
    qs: &[f64],
    sweep: &CubeSweep,
    holder_pairs: usize,
    seed: u64,
    refine: bool,
) -> Seminorms {
    let dim = 1;
    let g = |x: &[f64], t: f64| u.grad_sq(x, t);
    let quad = SquareQuadrature::default();
    let rule = MeanRule::default();
    let sweep = if refine { sweep.doubled() } else { sweep.clone() };
    let mut values: Vec<(String, f64)> = qs
        .iter()
        .map(|&q| (format!("q={q}"), star2_q(&g, omega, q, &sweep, &rule, &quad).value))
        .collect();
    values.push(("exp".into(), star2_exp(&g, omega, &sweep, &rule, &quad).value));
    let step = if refine { 0.125 } else { 0.25 };
    let reach = (10.0 / step) as i32;
    let points: Vec<Vec<f64>> = (-reach..=reach).map(|k| vec![k as f64 * step]).collect();
    let heights = log_lattice(-20, 10, if refine { 16 } else { 8 });
    values.push(("inf".into(), star2_inf(&g, omega, &points, &heights).value));
    let m = u.components();
    let uv = |x: &[f64], out: &mut [f64]| u.value(&x[..dim], x[dim], out);
    let opts = HolderOptions {
        domain: PairDomain::HalfSpace,
        random_pairs: if refine { 2 * holder_pairs } else { holder_pairs },
        base_step: if refine { 2 } else { 4 },
        seed,
        ..HolderOptions::default()
    };
    values.push(("holder".into(), holder_seminorm(&uv, dim + 1, m, omega, &opts).value));
    let opts_w = HolderOptions {
        random_pairs: opts.random_pairs / 4,
        ..opts
    };
    let holder_w = holder_seminorm(&uv, dim + 1, m, w, &opts_w).value;
    Seminorms { values, holder_w }
}

pub fn run(name: &str, spec: &EquivalenceSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let mut rep = ScenarioReport::new(name, "equivalence");
    let omega = inputs.growth.growth()?;
    let w = omega.integrated();
    let cond = check_condition_main(&omega, &ScanGrid::default());
    let c_omega = cond.tail.constant;
    let c_prime = cond.integrated.constant;
    rep.checks.push(
        Check::new(
            "precondition",
            if cond.main.satisfied { Verdict::Pass } else { Verdict::Flag },
            cond.main.constant,
            f64::NAN,
        )
        .with_detail(format!("failing parts: {:?}", cond.failed)),
    );
    rep.metrics.insert("C_omega".into(), c_omega);
    rep.metrics.insert("C_omega_prime".into(), c_prime);

    let system = inputs.system.build()?;
    if system.n() != 2 {
        return Err(LabError::Unsupported {
            scenario: name.into(),
            reason: "the equivalence table is set up for n = 2".into(),
        });
    }
    let kernel = PoissonKernel::new(system)?;
    let ext = Extender::new(&kernel)?;
    let data = if spec.data.is_empty() {
        vec![inputs.datum.clone()]
    } else {
        spec.data.clone()
    };
    let sweep = inputs.sweep.build(1, inputs.seed);

    let mut values = Table::new("values", &["datum", "quantity", "value", "value_doubled", "relative_change", "verdict"]);
    let mut ratios = Table::new("ratios", &["datum", "numerator", "denominator", "ratio", "verdict"]);
    let mut ineq = Table::new("inequalities", &["datum", "item", "lhs", "constant", "rhs", "verdict"]);
    let mut ratio_series = Vec::new();
    let c = spec.cap;

    for d in &data {
        let u = Solution::pick(inputs, &ext, d)?;
        let label = u.label();
        let base = measure(&u, &omega, &w, &spec.qs, &sweep, spec.holder_pairs, inputs.seed, false);
        let fine = measure(&u, &omega, &w, &spec.qs, &sweep, spec.holder_pairs, inputs.seed, true);
        let degenerate = base.values.iter().all(|(_, v)| *v == 0.0);

        let mut stable = true;
        let mut worst_change: f64 = 0.0;
        for ((q, a), (_, b)) in base.values.iter().zip(&fine.values) {
            let rc = relative_change(*a, *b);
            let ok = rc <= spec.stability;
            stable &= ok;
            worst_change = worst_change.max(rc);
            values.push(vec![label.clone(), q.clone(), num(*a), num(*b), num(rc), Verdict::from_bool(ok).as_str().into()]);
        }
        values.push(vec![
            label.clone(),
            "holder-W".into(),
            num(base.holder_w),
            num(fine.holder_w),
            num(relative_change(base.holder_w, fine.holder_w)),
            String::new(),
        ]);

        let mut in_range = true;
        let mut extreme: f64 = 1.0;
        let mut series = Vec::new();
        for (i, (la, a)) in fine.values.iter().enumerate() {
            for (j, (lb, b)) in fine.values.iter().enumerate() {
                if i == j {
                    continue;
                }
                let r = ratio(*a, *b);
                let ok = degenerate || (r >= 1.0 / c && r <= c);
                in_range &= ok;
                if r > 0.0 {
                    extreme = extreme.max(r);
                }
                ratios.push(vec![label.clone(), la.clone(), lb.clone(), num(r), verdict(ok, degenerate).as_str().into()]);
                if j == 0 {
                    series.push((i as f64, r));
                }
            }
        }
        ratio_series.push(Series {
            label: label.clone(),
            points: series,
        });
        rep.checks.push(Check::new(format!("{label}: ratios within cap"), verdict(in_range, degenerate), extreme, c));
        rep.checks.push(Check::new(format!("{label}: stable under doubling"), verdict(stable, degenerate), worst_change, spec.stability));

        // One-sided inequalities, evaluated on the refined measurements.
        let inf = fine.get("inf");
        let hol = fine.get("holder");
        let exp = fine.get("exp");
        let mut items: Vec<(String, f64, f64, f64)> = vec![("(c) inf <= C holder".into(), inf, c, hol)];
        for &q in &spec.qs {
            items.push((format!("(d) inf <= C C_omega q={q}"), inf, c * c_omega, fine.get(&format!("q={q}"))));
        }
        if let Some(q2) = spec.qs.iter().position(|&q| q == 2.0) {
            items.push(("(e) exp <= C C_omega^2 q=2".into(), exp, c * c_omega * c_omega, fine.values[q2].1));
        }
        items.push(("(f) holder_W <= C_omega(2+C_omega) inf".into(), fine.holder_w, c_omega * (2.0 + c_omega), inf));
        items.push(("(g) exp <= C_omega'^(1/2) inf".into(), exp, c_prime.sqrt(), inf));
        for (item, lhs, k, rhs) in items {
            let ok = lhs <= k * rhs || (lhs == 0.0 && rhs == 0.0);
            ineq.push(vec![label.clone(), item.clone(), num(lhs), num(k), num(rhs), verdict(ok, degenerate).as_str().into()]);
            rep.checks.push(Check::new(format!("{label}: {item}"), verdict(ok, degenerate), lhs, k * rhs));
        }
        for (q, v) in &fine.values {
            rep.metrics.insert(format!("{label}/{q}"), *v);
        }
        rep.metrics.insert(format!("{label}/holder-W"), fine.holder_w);
    }
    rep.tables.push(values);
    rep.tables.push(ratios);
    rep.tables.push(ineq);
    rep.tables.push(Table::of_checks("checks", &rep.checks));
    rep.plots.push(Plot {
        name: "ratios".into(),
        title: "seminorm / first q-seminorm".into(),
        x_label: "seminorm index".into(),
        y_label: "ratio".into(),
        log_x: false,
        log_y: true,
        series: ratio_series,
    });
    Ok(rep)
}

fn verdict(ok: bool, degenerate: bool) -> Verdict {
    if degenerate && ok {
        Verdict::Degenerate
    } else {
        Verdict::from_bool(ok)
    }
}
