//! The two Dirichlet problems: solve by Poisson extension and measure both
//! directions of the two-sided seminorm estimates, plus nontangential traces.

use halfspace::extension::{trace_probe, SquareQuadrature, EXTEND_TOL};
use halfspace::growthfn::{check_condition_b, w_transform, ScanGrid};
use halfspace::seminorms::{
    holder_seminorm, morrey_campanato, star2_exp, star2_q, HolderOptions, MeanRule, PairDomain,
};
use halfspace::{Extender, Method, PoissonKernel};
use serde::{Deserialize, Serialize};

use super::{ratio, real_datum, Overrides, Solution};
use crate::config::Inputs;
use crate::report::{num, Check, Plot, ScenarioReport, Series, Table, Verdict};
use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirichletVariant {
    Holder,
    Morrey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirichletSpec {
    pub variant: DirichletVariant,
    /// Exponent of the boundary Morrey–Campanato seminorm.
    pub p: f64,
    /// Exponent of the solution seminorm.
    pub q: f64,
    /// Boundary pairs of the Hölder seminorm of `f`.
    pub boundary_pairs: usize,
    /// Random half-space pairs of the Hölder seminorm of `u`.
    pub solution_pairs: usize,
    /// Dyadic exponent range of separations and base points of `u` pairs.
    pub solution_exponents: [i32; 2],
    pub trace_tol: f64,
    /// Probe heights `2^{−k}`, `k = 1..=trace_depth`.
    pub trace_depth: u32,
    /// Cap on the measured constants in either direction.
    pub cap: f64,
    #[serde(flatten)]
    pub over: Overrides,
}

impl Default for DirichletSpec {
    fn default() -> Self {
        Self {
            variant: DirichletVariant::Holder,
            p: 1.0,
            q: 2.0,
            boundary_pairs: 4096,
            solution_pairs: 1024,
            solution_exponents: [-8, 8],
            trace_tol: 1e-3,
            trace_depth: 30,
            cap: 100.0,
            over: Overrides::default(),
        }
    }
}

/// Boundary points of the trace probes.
const TRACE_POINTS: [f64; 5] = [-2.0, -0.5, 0.0, 0.7, 3.0];

pub fn run(name: &str, spec: &DirichletSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let mut rep = ScenarioReport::new(name, "dirichlet");
    let omega = inputs.growth.growth()?;
    let grid = ScanGrid::default();
    let tail = check_condition_b(&omega, &grid);
    let integrable = w_transform(&omega, 1.0, 1e-12).is_ok();
    let pre_ok = tail.satisfied && (spec.variant == DirichletVariant::Holder || integrable);
    rep.checks.push(
        Check::new("precondition", Verdict::from_bool(pre_ok), tail.constant, f64::NAN)
            .with_detail(format!("tail satisfied: {}, integrable at 0: {integrable}", tail.satisfied)),
    );
    if !pre_ok {
        rep.tables.push(Table::of_checks("checks", &rep.checks));
        return Ok(rep);
    }
    let c_omega = tail.constant;
    rep.metrics.insert("C_omega".into(), c_omega);

    let system = inputs.system.build()?;
    let n = system.n();
    let dim = n - 1;
    let kernel = PoissonKernel::new(system)?;
    let ext = Extender::new(&kernel)?;
    let datum = inputs.datum.datum(dim)?;
    let m2 = 2 * datum.m();
    let f = real_datum(&datum);
    let u = Solution::Extended {
        ext: &ext,
        datum: datum.clone(),
    };
    let mut values = Table::new("values", &["quantity", "value"]);

    let (boundary, solution, constant_shape) = match spec.variant {
        DirichletVariant::Holder => {
            let fb = holder_seminorm(
                &f,
                dim,
                m2,
                &omega,
                &HolderOptions {
                    random_pairs: spec.boundary_pairs,
                    seed: inputs.seed,
                    ..HolderOptions::default()
                },
            );
            let opts = HolderOptions {
                domain: PairDomain::HalfSpace,
                sep_exponents: (spec.solution_exponents[0], spec.solution_exponents[1]),
                base_exponents: (spec.solution_exponents[0], spec.solution_exponents[1]),
                base_step: 4,
                random_pairs: spec.solution_pairs,
                seed: inputs.seed,
            };
            let uv = |x: &[f64], out: &mut [f64]| u.value(&x[..dim], x[dim], out);
            let ub = holder_seminorm(&uv, n, m2, &omega, &opts);
            values.push(vec!["boundary holder".into(), num(fb.value)]);
            values.push(vec!["solution holder".into(), num(ub.value)]);
            (fb.value, ub.value, c_omega * (1.0 + c_omega))
        }
        DirichletVariant::Morrey => {
            let sweep = inputs.sweep.build(dim, inputs.seed);
            let fb = morrey_campanato(&f, m2, &omega, spec.p, &sweep, &MeanRule::default());
            let g = |x: &[f64], t: f64| u.grad_sq(x, t);
            let quad = SquareQuadrature::default();
            let rule = MeanRule::gl16();
            let uq = star2_q(&g, &omega, spec.q, &sweep, &rule, &quad);
            let ue = star2_exp(&g, &omega, &sweep, &rule, &quad);
            values.push(vec![format!("boundary morrey p={}", spec.p), num(fb.value)]);
            values.push(vec![format!("solution square q={}", spec.q), num(uq.value)]);
            values.push(vec!["solution square exp".into(), num(ue.value)]);
            let exp_up = ratio(ue.value, fb.value);
            let exp_down = ratio(fb.value, ue.value);
            let exp_ok = exp_up <= spec.cap && exp_down <= spec.cap;
            rep.checks.push(Check::new(
                "exp constants finite",
                degenerate_or(exp_ok, fb.value, ue.value),
                exp_up.max(exp_down),
                spec.cap,
            ));
            rep.metrics.insert("upper_exp".into(), exp_up);
            (fb.value, uq.value, c_omega.powi(4))
        }
    };
    let upper = ratio(solution, boundary);
    let lower = ratio(boundary, solution);
    values.push(vec!["upper constant (solution/boundary)".into(), num(upper)]);
    values.push(vec!["lower constant (boundary/solution)".into(), num(lower)]);
    values.push(vec!["constant expression from the growth constants".into(), num(constant_shape)]);
    values.push(vec!["upper / constant expression".into(), num(upper / constant_shape)]);
    rep.metrics.insert("boundary".into(), boundary);
    rep.metrics.insert("solution".into(), solution);
    rep.metrics.insert("upper".into(), upper);
    rep.metrics.insert("lower".into(), lower);
    let ok = upper <= spec.cap && lower <= spec.cap && upper.is_finite() && lower.is_finite();
    rep.checks.push(Check::new(
        "two-sided constants finite",
        degenerate_or(ok, boundary, solution),
        upper.max(lower),
        spec.cap,
    ));

    // Nontangential traces along the cone of aperture 1.
    let heights: Vec<f64> = (1..=spec.trace_depth).map(|k| 2f64.powi(-(k as i32))).collect();
    let mut traces = Table::new("traces", &["x", "height", "error", "passed"]);
    let mut plot_series = Vec::new();
    let mut all_pass = true;
    for &x0 in &TRACE_POINTS {
        let mut x = vec![0.0; dim];
        x[0] = x0;
        let b = datum.eval(&x);
        let value = |p: &[f64], t: f64| ext.value_at(&datum, p, t, EXTEND_TOL, Method::Auto);
        let tr = trace_probe(value, &b, &x, 1.0, &heights, spec.trace_tol)?;
        all_pass &= tr.passed;
        for (t, e) in tr.heights.iter().zip(&tr.errors) {
            traces.push(vec![num(x0), num(*t), num(*e), tr.passed.to_string()]);
        }
        plot_series.push(Series {
            label: format!("x = {x0}"),
            points: tr.heights.iter().copied().zip(tr.errors.iter().copied()).collect(),
        });
    }
    rep.checks.push(Check::new("trace probes", Verdict::from_bool(all_pass), f64::NAN, spec.trace_tol));
    rep.plots.push(Plot {
        name: "traces".into(),
        title: "nontangential trace error".into(),
        x_label: "t".into(),
        y_label: "|u - f|".into(),
        log_x: true,
        log_y: true,
        series: plot_series,
    });
    rep.tables.push(values);
    rep.tables.push(traces);
    rep.tables.push(Table::of_checks("checks", &rep.checks));
    Ok(rep)
}

/// `PASS-degenerate` when both sides vanish.
fn degenerate_or(ok: bool, a: f64, b: f64) -> Verdict {
    if a == 0.0 && b == 0.0 {
        Verdict::Degenerate
    } else {
        Verdict::from_bool(ok)
    }
}
