//! John–Nirenberg demonstrations: the BMO pair family of a lattice function
//! and the conical square-function family of a solution.

use std::collections::HashMap;
use std::sync::Mutex;

use halfspace::dyadic::{
    jn_profile, level_fraction, orlicz_conclusions, stopping_decomposition, BmoFamily,
    ConicalFamily, DyadicCube, JnProfile, Member, PairFamily,
};
use halfspace::extension::SquareQuadrature;
use halfspace::growthfn::{check_condition_b, ScanGrid};
use halfspace::seminorms::{star2_q, MeanRule};
use halfspace::{DyadicGrid, Extender, GrowthFunction, LatticeField, PoissonKernel};
use serde::{Deserialize, Serialize};

use super::{Overrides, Solution};
use crate::config::{Inputs, Named};
use crate::report::{num, Check, Plot, ScenarioReport, Series, Table, Verdict};
use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JnVariant {
    Bmo,
    Conical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JnSpec {
    pub variant: JnVariant,
    /// BMO catalog function (bmo variant).
    pub function: Named,
    /// Defaults: `1/e` (bmo), `1/2` (conical).
    pub alpha: Option<f64>,
    pub q: f64,
    /// Levels `t = k m_α / 2`, `k = 1..=t_points`.
    pub t_points: usize,
    /// Deepest probed level. Defaults: 10 (bmo), 6 (conical).
    pub max_level: Option<u32>,
    /// Lattice depth of the conical family (default 8 in one variable,
    /// 4 in two).
    pub depth: Option<u32>,
    /// Root cube `origin + [0, side)^d` of the conical family.
    pub root_origin: f64,
    pub root_side: f64,
    #[serde(flatten)]
    pub over: Overrides,
}

impl Default for JnSpec {
    fn default() -> Self {
        Self {
            variant: JnVariant::Bmo,
            function: Named::new("log-inv", &[]),
            alpha: None,
            q: 2.0,
            t_points: 20,
            max_level: None,
            depth: None,
            root_origin: -0.5,
            root_side: 1.0,
            over: Overrides::default(),
        }
    }
}

/// BMO functions on the unit root, for `jn` with `variant = "bmo"`.
pub const BMO_CATALOG: &[(&str, &str)] = &[
    ("log-inv", "log(1/x) on [0,1), exact cell means"),
    ("log-dist", "c log(1/|x - x0|), params c, x0; exact cell means"),
    ("indicator-half", "1 on [0,1/2), 0 elsewhere"),
    ("constant", "c (default 1)"),
    ("log-dist-2d", "log(1/|x - (1/2,1/2)|) on [0,1)^2, cell-center values"),
];

/// `∫ −log|x − c| dx = −((x−c) log|x−c| − (x−c))`.
fn neg_log_antiderivative(x: f64, c: f64) -> f64 {
    let y = x - c;
    if y == 0.0 {
        0.0
    } else {
        -(y * y.abs().ln() - y)
    }
}

pub fn bmo_field(f: &Named) -> Result<LatticeField, LabError> {
    let p = |i: usize, d: f64| f.params.get(i).copied().unwrap_or(d);
    let unit1 = DyadicGrid::unit(1)?;
    let log_dist = |c: f64, x0: f64| {
        LatticeField::from_cell_means(unit1.clone(), move |b| {
            let (a, bb) = b[0];
            c * (neg_log_antiderivative(bb, x0) - neg_log_antiderivative(a, x0)) / (bb - a)
        })
    };
    Ok(match f.name.as_str() {
        "log-inv" => log_dist(1.0, 0.0),
        "log-dist" => log_dist(p(0, 1.0), p(1, 0.0)),
        "indicator-half" => LatticeField::from_centers(unit1.clone(), |x| (x[0] < 0.5) as u8 as f64),
        "constant" => {
            let c = p(0, 1.0);
            LatticeField::from_centers(unit1.clone(), move |_| c)
        }
        "log-dist-2d" => LatticeField::from_centers(DyadicGrid::unit(2)?, |x| {
            let r = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            -r.ln()
        }),
        other => {
            return Err(LabError::Unsupported {
                scenario: "jn".into(),
                reason: format!("unknown BMO function `{other}`"),
            })
        }
    })
}

type Pair = (Vec<f64>, Vec<f64>);

/// Evaluates each cube of a family once.
pub struct Memo<'a, F: ?Sized> {
    inner: &'a F,
    cache: Mutex<HashMap<DyadicCube, std::sync::Arc<Pair>>>,
}

impl<'a, F: PairFamily<f64> + ?Sized> Memo<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn pair(&self, q: &DyadicCube) -> std::sync::Arc<Pair> {
        if let Some(p) = self.cache.lock().unwrap().get(q) {
            return p.clone();
        }
        let p = std::sync::Arc::new((self.inner.g(q), self.inner.h(q)));
        self.cache.lock().unwrap().insert(q.clone(), p.clone());
        p
    }
}

impl<F: PairFamily<f64> + ?Sized> PairFamily<f64> for Memo<'_, F> {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn grid(&self) -> &DyadicGrid {
        self.inner.grid()
    }

    fn g(&self, q: &DyadicCube) -> Vec<f64> {
        self.pair(q).0.clone()
    }

    fn h(&self, q: &DyadicCube) -> Vec<f64> {
        self.pair(q).1.clone()
    }
}

fn levels(m_alpha: f64, count: usize) -> Vec<f64> {
    let step = if m_alpha > 0.0 { m_alpha / 2.0 } else { 0.5 };
    (1..=count).map(|k| k as f64 * step).collect()
}

fn xi_table(prof: &JnProfile<f64>, n_bound: Option<(f64, f64)>) -> Table {
    let mut t = Table::new("xi", &["t", "xi", "bound", "bound_N", "verdict"]);
    for r in &prof.rows {
        let bn = n_bound.map(|(alpha, n)| (-(1.0 / alpha).ln() * r.t / n).exp() / alpha);
        let ok = r.xi <= r.bound && bn.map_or(true, |b| r.xi <= b);
        t.push(vec![
            num(r.t),
            num(r.xi),
            num(r.bound),
            bn.map(num).unwrap_or_default(),
            Verdict::from_bool(ok).as_str().into(),
        ]);
    }
    t
}

fn xi_plot(prof: &JnProfile<f64>) -> Plot {
    Plot {
        name: "xi".into(),
        title: "level-set profile".into(),
        x_label: "t".into(),
        y_label: "Xi(t)".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                label: "measured".into(),
                points: prof.rows.iter().map(|r| (r.t, r.xi)).collect(),
            },
            Series {
                label: "bound".into(),
                points: prof.rows.iter().map(|r| (r.t, r.bound)).collect(),
            },
        ],
    }
}

pub fn run(name: &str, spec: &JnSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    match spec.variant {
        JnVariant::Bmo => run_bmo(name, spec, inputs),
        JnVariant::Conical => run_conical(name, spec, inputs),
    }
}

fn run_bmo(name: &str, spec: &JnSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let mut rep = ScenarioReport::new(name, "jn");
    let field = bmo_field(&spec.function)?;
    let fam = BmoFamily::new(field);
    let memo = Memo::new(&fam);
    let alpha = spec.alpha.unwrap_or((-1.0f64).exp());
    let level = spec.max_level.unwrap_or(10);
    let probe = jn_profile(&memo, alpha, &[], level, inputs.seed);
    let ts = levels(probe.m_alpha, spec.t_points);
    let prof = jn_profile(&memo, alpha, &ts, level, inputs.seed);
    let degenerate = prof.m_alpha == 0.0 && prof.rows.iter().all(|r| r.xi == 0.0);
    let v = |ok: bool| if ok && degenerate { Verdict::Degenerate } else { Verdict::from_bool(ok) };

    rep.checks.push(Check::new("pair family conditions", v(prof.check.holds()), prof.check.order_violations as f64 + prof.check.chain_violations as f64, 0.0));
    let worst = prof.rows.iter().map(|r| r.xi - r.bound).fold(f64::NEG_INFINITY, f64::max);
    rep.checks.push(Check::new("exponential level-set bound", v(prof.holds), worst, 0.0));
    let bmo = fam.bmo_norm(level);
    rep.metrics.insert("bmo_norm".into(), bmo);
    rep.metrics.insert("m_alpha".into(), prof.m_alpha);
    let orl = orlicz_conclusions(&memo, &prof, spec.q, level);
    rep.checks.push(Check::new("Lq and expL conclusions", v(orl.holds), orl.exp, orl.exp_bound));
    if (alpha - (-1.0f64).exp()).abs() < 1e-12 {
        let tb = fam.threshold_bound(level);
        rep.checks.push(Check::new("m_alpha <= 2^d e |f|_BMO", v(prof.m_alpha <= tb), prof.m_alpha, tb));
        let eb = fam.exp_bound(level);
        rep.checks.push(Check::new("expL <= (1+e) e 2^d |f|_BMO", v(orl.exp <= eb), orl.exp, eb));
    }
    rep.metrics.insert("lq".into(), orl.lq);
    rep.metrics.insert("exp".into(), orl.exp);

    // Stopping cubes of {G_root > m_α} at density 1/2, as interval lists.
    let root = DyadicCube::root(fam.field.grid.dim());
    let g_root = memo.g(&root);
    let cells = fam.field.grid.cells_of(&root);
    let mut mask = vec![false; fam.field.grid.cell_count()];
    for (c, g) in cells.iter().zip(&g_root) {
        mask[*c] = *g > prof.m_alpha;
    }
    let mut stop = Table::new("stopping", &["level", "lower", "upper"]);
    if let Ok(cubes) = stopping_decomposition(&fam.field.grid, &mask, 0.5) {
        for q in cubes {
            let b = q.bounds(&fam.field.grid);
            let lo: Vec<String> = b.iter().map(|p| num(p.0)).collect();
            let hi: Vec<String> = b.iter().map(|p| num(p.1)).collect();
            stop.push(vec![q.level.to_string(), lo.join(" "), hi.join(" ")]);
        }
    }
    rep.tables.push(xi_table(&prof, None));
    rep.tables.push(stop);
    rep.tables.push(Table::of_checks("checks", &rep.checks));
    rep.plots.push(xi_plot(&prof));
    Ok(rep)
}

/// `sup_ℓ ω(cℓ)/ω(ℓ)` over `ℓ ∈ [2^{−30}, 2^{30}]`.
fn dilation_sup(omega: &GrowthFunction, c: f64) -> f64 {
    (-300..=300)
        .map(|j| {
            let l = 2f64.powf(j as f64 / 10.0);
            omega.eval(c * l) / omega.eval(l)
        })
        .fold(0.0, f64::max)
}

fn run_conical(name: &str, spec: &JnSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let mut rep = ScenarioReport::new(name, "jn");
    let omega = inputs.growth.growth()?;
    let tail = check_condition_b(&omega, &ScanGrid::default());
    let c_omega = tail.constant;
    rep.checks.push(Check::new("precondition", Verdict::from_bool(tail.satisfied), c_omega, f64::NAN));

    let system = inputs.system.build()?;
    let dim = system.n() - 1;
    let kernel = PoissonKernel::new(system)?;
    let ext = Extender::new(&kernel)?;
    let u = Solution::pick(inputs, &ext, &inputs.datum)?;
    let raw = |x: &[f64], t: f64| u.grad_sq(x, t);
    let quad = SquareQuadrature::default();
    let sweep = inputs.sweep.build(dim, inputs.seed);
    let norm = star2_q(&raw, &omega, 2.0, &sweep, &MeanRule::default(), &quad).value;
    let degenerate = norm == 0.0;
    let scale = if degenerate { 1.0 } else { 1.0 / (norm * norm) };
    rep.metrics.insert("star2".into(), norm);

    let depth = spec.depth.unwrap_or(if dim == 1 { 8 } else { 4 });
    let grid = DyadicGrid::new(vec![spec.root_origin; dim], spec.root_side, depth)?;
    let fam = ConicalFamily::new(grid, |x: &[f64], t: f64| scale * u.grad_sq(x, t), omega.clone(), quad);
    let memo = Memo::new(&fam);
    let kappa = fam.kappa();
    let level = spec.max_level.unwrap_or(6).min(depth);
    let alpha = spec.alpha.unwrap_or(0.5);

    // Chebyshev: mean_Q H_Q² ≤ |B_κ| (2κ+1)^d h², h = sup ω((2κ+1)ℓ)/ω(ℓ).
    let ball = if dim == 1 { 2.0 * kappa } else { std::f64::consts::PI * kappa * kappa };
    let h = dilation_sup(&omega, 2.0 * kappa + 1.0);
    let k_sq = ball * (2.0 * kappa + 1.0).powi(dim as i32) * h * h;
    let c0 = k_sq / (c_omega * c_omega);
    let n_level = (2.0 * c0).sqrt() * c_omega;
    rep.metrics.insert("C0".into(), c0);
    rep.metrics.insert("N".into(), n_level);
    let v = |ok: bool| if ok && degenerate { Verdict::Degenerate } else { Verdict::from_bool(ok) };

    let cubes = memo.grid().cubes_to(level);
    let mean_sq = cubes
        .iter()
        .map(|q| {
            let hq = memo.h(q);
            hq.iter().map(|x| x * x).sum::<f64>() / hq.len() as f64
        })
        .fold(0.0, f64::max);
    rep.checks.push(Check::new("mean H^2 <= C0 C_omega^2", v(mean_sq <= k_sq), mean_sq, k_sq));
    let frac = level_fraction(&memo, Member::H, n_level, level);
    rep.checks.push(Check::new("hypothesis fraction at N", v(frac <= alpha), frac, alpha));

    let probe = jn_profile(&memo, alpha, &[], level, inputs.seed);
    let ts = levels(probe.m_alpha, spec.t_points);
    let prof = jn_profile(&memo, alpha, &ts, level, inputs.seed);
    rep.metrics.insert("m_alpha".into(), prof.m_alpha);
    rep.checks.push(Check::new("m_alpha <= N", v(prof.m_alpha <= n_level), prof.m_alpha, n_level));
    rep.checks.push(Check::new("pair family conditions", v(prof.check.holds()), (prof.check.order_violations + prof.check.chain_violations) as f64, 0.0));
    let worst = prof.rows.iter().map(|r| r.xi - r.bound).fold(f64::NEG_INFINITY, f64::max);
    rep.checks.push(Check::new("exponential level-set bound", v(prof.holds), worst, 0.0));
    let with_n = prof
        .rows
        .iter()
        .all(|r| r.xi <= (-(1.0 / alpha).ln() * r.t / n_level).exp() / alpha);
    rep.checks.push(Check::new("level-set bound with N", v(with_n), f64::NAN, f64::NAN));
    let orl = orlicz_conclusions(&memo, &prof, spec.q, level);
    rep.checks.push(Check::new("Lq conclusion", v(orl.lq <= orl.lq_bound), orl.lq, orl.lq_bound));
    rep.checks.push(Check::new("expL conclusion", v(orl.exp <= orl.exp_bound), orl.exp, orl.exp_bound));
    rep.metrics.insert("lq".into(), orl.lq);
    rep.metrics.insert("exp".into(), orl.exp);

    rep.tables.push(xi_table(&prof, Some((alpha, n_level))));
    rep.tables.push(Table::of_checks("checks", &rep.checks));
    rep.plots.push(xi_plot(&prof));
    Ok(rep)
}
