//! Acceptance suite. One line per criterion, sub-checks indented below it;
//! exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use halfspace::dyadic::{stopping_decomposition, DyadicCube, DyadicGrid};
use halfspace::elliptic::lame_admissible;
use halfspace::extension::{conical_square, SquareQuadrature, EXTEND_TOL};
use halfspace::growthfn::{
    check_condition_b, check_condition_main, dilation_indices, w_transform, ScanGrid,
};
use halfspace::poisson::{
    laplacian_kernel, normalization_defect, spectral_symbol, GridSpec, KernelGrid,
};
use halfspace::seminorms::{
    holder_seminorm, luxemburg_norm, morrey_campanato, oscillation_table, star2_q, CubeSweep,
    HolderOptions, MeanRule,
};
use halfspace::{BoundaryDatum, EllipticSystem, Extender, GrowthFunction, Method, PoissonKernel};
use halfspace_lab::{Config, Inputs, ScenarioReport};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default)]
struct Outcome {
    lines: Vec<(bool, String)>,
}

impl Outcome {
    fn check(&mut self, label: &str, ok: bool, detail: impl Into<String>) {
        self.lines.push((ok, format!("{label}: {}", detail.into())));
    }

    /// Every check of a scenario report, under a prefix.
    fn scenario(&mut self, rep: &ScenarioReport) {
        for c in &rep.checks {
            self.check(
                &format!("{} / {}", rep.name, c.name),
                c.verdict.is_pass(),
                format!("{} (value {:.4e}, bound {:.4e})", c.verdict.as_str(), c.value, c.bound),
            );
        }
    }

    fn passed(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|l| l.0)
    }
}

fn run_scenario(toml_text: &str) -> ScenarioReport {
    let cfg = Config::from_toml(toml_text).expect("scenario config");
    let inputs = Inputs::from_config(&cfg);
    let s = &cfg.scenarios[0];
    s.run(&s.name(), &inputs).expect("scenario run")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn kernel_exactness(o: &mut Outcome) {
    let systems = [EllipticSystem::laplacian(2).unwrap(), EllipticSystem::laplacian(3).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let sys = &systems[i % 2];
        let xi: Vec<f64> = (0..sys.n() - 1).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t = rng.gen_range(0.01..3.0);
        let p = spectral_symbol(sys, &xi, t).unwrap();
        let exact = (-t * xi.iter().map(|v| v * v).sum::<f64>().sqrt()).exp();
        worst = worst.max((p[(0, 0)] - exact).norm() / exact);
    }
    o.check("Laplacian symbol vs exp(-t|xi|), 1000 points", worst <= 1e-10, format!("max rel {worst:.2e}"));

    let lap = PoissonKernel::new(EllipticSystem::laplacian(2).unwrap()).unwrap();
    let grid = KernelGrid::compute(&lap, 1.0, GridSpec { h: 1.0 / 16.0, size: 1 << 16 }).unwrap();
    let mut worst: f64 = 0.0;
    for idx in grid.central_half() {
        let exact = laplacian_kernel(2, &grid.coords(idx)).unwrap();
        worst = worst.max((grid.at(idx)[(0, 0)].re - exact).abs());
    }
    o.check("kernel grid vs closed form (n=2)", worst <= 1e-6, format!("max abs {worst:.2e}"));
    let d2 = normalization_defect(&grid, &lap).unwrap();
    o.check("normalization defect n=2", d2 <= 1e-6, format!("{d2:.2e}"));

    let (lame3, _) = EllipticSystem::lame(3, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
    let k3 = PoissonKernel::new(lame3).unwrap();
    let g3 = KernelGrid::compute(&k3, 1.0, GridSpec { h: 1.0 / 8.0, size: 256 }).unwrap();
    let d3 = normalization_defect(&g3, &k3).unwrap();
    o.check("normalization defect n=3 Lame", d3 <= 1e-4, format!("{d3:.2e}"));
}

fn ellipticity_oracle(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut sign_mismatch = 0;
    let mut sign_checked = 0;
    for i in 0..20 {
        let n = 2 + i % 2;
        let mu = Complex64::new(rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..1.0));
        let lambda = Complex64::new(rng.gen_range(-4.0..3.0), rng.gen_range(-1.0..1.0));
        let (sys, _) = EllipticSystem::lame(n, mu, lambda).unwrap();
        let measured = sys.ellipticity_constant(2000, true);
        let expected = mu.re.min((mu * 2.0 + lambda).re);
        worst = worst.max((measured - expected).abs());
        if (mu * 2.0 + lambda).re.abs() > 0.05 {
            sign_checked += 1;
            if (measured > 0.0) != lame_admissible(mu, lambda) {
                sign_mismatch += 1;
            }
        }
    }
    o.check("constant vs min(Re mu, Re(2mu+lambda)), 20 pairs", worst <= 1e-2, format!("max abs {worst:.2e}"));
    o.check(
        "sign vs admissibility",
        sign_mismatch == 0,
        format!("{sign_mismatch} mismatches in {sign_checked} pairs"),
    );
}

fn growth_constants(o: &mut Outcome) {
    for alpha in [0.25, 0.5, 0.75] {
        let w = GrowthFunction::catalog("power", &[alpha]).unwrap();
        let c = check_condition_b(&w, &ScanGrid::default()).constant;
        let want = 1.0 / (1.0 - alpha);
        o.check(&format!("C_omega, alpha={alpha}"), rel(c, want) <= 0.02, format!("{c:.6} vs {want:.6}"));
        let mut w_err: f64 = 0.0;
        for k in -12..=12 {
            let t = 2f64.powf(k as f64 + 0.3);
            let v = w_transform(&w, t, 1e-12).unwrap();
            w_err = w_err.max(rel(v, t.powf(alpha) / alpha));
        }
        o.check(&format!("W = t^a/a, alpha={alpha}"), w_err <= 1e-8, format!("max rel {w_err:.2e}"));
        let idx = dilation_indices(&w);
        let ok = (idx.lower - alpha).abs() <= 0.01 && (idx.upper - alpha).abs() <= 0.01;
        o.check(&format!("dilation indices, alpha={alpha}"), ok, format!("({:.4}, {:.4})", idx.lower, idx.upper));
    }
    let e6 = GrowthFunction::catalog("example6", &[0.5, 0.5]).unwrap();
    let rep = check_condition_main(&e6, &ScanGrid::default());
    let integrable = w_transform(&e6, 1.0, 1e-12).is_ok();
    o.check("example6: (a) integrable at 0", integrable, format!("{integrable}"));
    o.check(
        "example6: (b) tail condition",
        rep.tail.satisfied,
        format!("satisfied {}, C = {:.5}", rep.tail.satisfied, rep.tail.constant),
    );
    o.check(
        "example6: (main) not satisfied",
        !rep.main.satisfied,
        format!("satisfied {}, failing {:?}", rep.main.satisfied, rep.failed),
    );
}

fn example6_reproduction(o: &mut Outcome) {
    let rep = run_scenario("seed = 7\n[[scenarios]]\nkind = \"example6\"\n");
    o.scenario(&rep);
    for name in ["case-I closed form", "H(-1/2,1/2) = 0", "sup H/omega", "sup stability", "holder quotient increasing", "holder quotient exceeds 3"] {
        o.check(&format!("check present: {name}"), rep.check(name).is_some(), "");
    }
}

/// Cubes whose mask density exceeds `beta` with every ancestor at or below
/// it, by scanning the whole tree.
fn exhaustive_stopping(grid: &DyadicGrid<f64>, mask: &[bool], beta: f64) -> Vec<DyadicCube> {
    let density = |q: &DyadicCube| {
        let c = grid.cells_of(q);
        c.iter().filter(|&&i| mask[i]).count() as f64 / c.len() as f64
    };
    let mut out: Vec<DyadicCube> = grid
        .cubes_to(grid.depth)
        .into_iter()
        .filter(|q| {
            let mut p = q.parent();
            while let Some(a) = p {
                if density(&a) > beta {
                    return false;
                }
                p = a.parent();
            }
            density(q) > beta
        })
        .collect();
    out.sort();
    out
}

fn john_nirenberg(o: &mut Outcome) {
    let rep = run_scenario(
        "seed = 7\n[[scenarios]]\nkind = \"jn\"\nvariant = \"bmo\"\nfunction = { name = \"log-inv\" }\n",
    );
    o.scenario(&rep);
    let rows = rep.table("xi").map(|t| t.rows.len()).unwrap_or(0);
    o.check("level grid has 20 points", rows == 20, format!("{rows} rows"));
    o.check(
        "expL constant (1+e) e 2^(n-1) checked",
        rep.check("expL <= (1+e) e 2^d |f|_BMO").is_some(),
        "",
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for trial in 0..50 {
        let dim = 1 + trial % 2;
        let depth = if dim == 1 { 9 } else { 5 };
        let grid = DyadicGrid::new(vec![0.0; dim], 1.0, depth).unwrap();
        let p: f64 = rng.gen_range(0.05..0.5);
        let mask: Vec<bool> = (0..grid.cell_count()).map(|_| rng.gen::<f64>() < p).collect();
        let root = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
        let beta = rng.gen_range(root..0.99);
        let fast = stopping_decomposition(&grid, &mask, beta).unwrap();
        if fast != exhaustive_stopping(&grid, &mask, beta) {
            mismatches += 1;
        }
    }
    o.check("stopping cubes vs exhaustive tree, 50 masks", mismatches == 0, format!("{mismatches} mismatches"));
}

fn fatou(o: &mut Outcome) {
    let lap = run_scenario(
        "seed = 7\n[[scenarios]]\nkind = \"fatou\"\nname = \"fatou-laplacian\"\ndatum = { name = \"cos\" }\n",
    );
    let lame = run_scenario(
        "seed = 7\n[[scenarios]]\nkind = \"fatou\"\nname = \"fatou-lame\"\n\
         system = { kind = \"lame\", n = 2, mu = [1.0, 0.0], lambda = [1.0, 0.0] }\n\
         datum = { name = \"lame-cos\" }\n",
    );
    for (rep, slice_tol) in [(&lap, 1e-5), (&lame, 1e-4)] {
        let sym = rep.metric("symbol_residual");
        let slice = rep.metric("slice_residual");
        o.check(&format!("{}: symbol semigroup", rep.name), sym <= 1e-10, format!("{sym:.2e}"));
        o.check(&format!("{}: slice reconstruction", rep.name), slice <= slice_tol, format!("{slice:.2e} (tol {slice_tol:.0e})"));
    }
}

fn equivalence(o: &mut Outcome) {
    let rep = run_scenario("seed = 7\n[[scenarios]]\nkind = \"equivalence\"\n");
    o.scenario(&rep);
    let data = rep
        .checks
        .iter()
        .filter(|c| c.name.ends_with("ratios within cap"))
        .count();
    o.check("five harmonic extensions", data == 5, format!("{data}"));
}

fn closed_forms(o: &mut Outcome) {
    let mut worst: f64 = 0.0;
    for c in [0.1, 1.0, 3.0, 250.0] {
        let w = vec![0.25; 4];
        worst = worst.max((luxemburg_norm(&[c; 4], &w) - c / 2f64.ln()).abs());
    }
    o.check("luxemburg(c) = c/log 2", worst <= 1e-8, format!("max abs {worst:.2e}"));

    let g = |_x: &[f64], _t: f64| 1.0;
    let linear = GrowthFunction::catalog("linear", &[]).unwrap();
    let sweep = CubeSweep::centered(1, 16.0, 0, 6);
    let quad = SquareQuadrature::default();
    let s = star2_q(&g, &linear, 2.0, &sweep, &MeanRule::gl16(), &quad).value;
    o.check("star2_q(x1, t, q=2) = 1/sqrt 2", (s - 0.5f64.sqrt()).abs() <= 1e-6, format!("{s:.12}"));

    let mut worst: f64 = 0.0;
    for ell in [0.1, 1.0, 7.5] {
        let a = conical_square(|_y: &[f64], _s: f64| 1.0, &[0.3], 1.0, ell, &quad);
        worst = worst.max((a - ell).abs());
    }
    o.check("conical square of x1 = l", worst <= 1e-6, format!("max abs {worst:.2e}"));

    let k = PoissonKernel::new(EllipticSystem::laplacian(2).unwrap()).unwrap();
    let ext = Extender::new(&k).unwrap();
    let cos = BoundaryDatum::catalog("cos", 1, &[]).unwrap();
    let v = ext.value_at(&cos, &[0.0], 1.0, EXTEND_TOL, Method::Auto).unwrap()[0].re;
    o.check("extend(cos)(0,1) = 1/e", (v - (-1.0f64).exp()).abs() <= 1e-6, format!("{v:.12}"));
}

const HOLDER_DATA: [&str; 5] = ["cos", "sin2", "sqrt-abs", "signed-sqrt", "lorentzian"];

fn seminorm_lemmas(o: &mut Outcome) {
    let omega = GrowthFunction::catalog("power", &[0.5]).unwrap();
    let c_omega = check_condition_b(&omega, &ScanGrid::default()).constant;
    let sweep = CubeSweep::centered(1, 256.0, 0, 14).with_seed(9);
    let rule = MeanRule::default();
    for name in HOLDER_DATA {
        let datum = BoundaryDatum::catalog(name, 1, &[]).unwrap();
        let f = |x: &[f64], out: &mut [f64]| out[0] = datum.eval(x)[0].re;

        // osc_p(f; r) is a running max over cubes of side at most r.
        let sup_by_side = |p: f64| {
            let mut rows: Vec<(f64, f64)> = oscillation_table(&f, 1, p, &sweep, &rule)
                .into_iter()
                .map(|(q, v)| (q.side, v))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut out: Vec<(f64, f64)> = Vec::new();
            let mut best: f64 = 0.0;
            for (s, v) in rows {
                best = best.max(v);
                match out.last_mut() {
                    Some(last) if last.0 == s => last.1 = best,
                    _ => out.push((s, best)),
                }
            }
            out
        };
        let (o1, o2) = (sup_by_side(1.0), sup_by_side(2.0));
        let worst = o1
            .iter()
            .zip(&o2)
            .filter(|(a, _)| a.1 > 0.0)
            .map(|(a, b)| (b.1 / a.1).max(a.1 / b.1))
            .fold(1.0, f64::max);
        o.check(&format!("{name}: osc_2 / osc_1"), worst <= 5.0, format!("{worst:.4}"));

        let morrey = morrey_campanato(&f, 1, &omega, 1.0, &sweep, &rule).value;
        let holder = holder_seminorm(&f, 1, 1, &omega, &HolderOptions::default()).value;
        let bound = c_omega * holder;
        o.check(
            &format!("{name}: Morrey <= C_omega [f]"),
            morrey <= bound,
            format!("{morrey:.5} <= {bound:.5}"),
        );
    }
    for (name, params) in [("power", vec![0.5]), ("power", vec![0.25]), ("min-powers", vec![0.3, 0.7])] {
        let w = GrowthFunction::catalog(name, &params).unwrap();
        let c = check_condition_b(&w, &ScanGrid::default()).constant;
        let rep = check_condition_b(&w.integrated(), &ScanGrid::coarse(48).with_tol(1e-8));
        let cap = 1.05 * (1.0 + c * c);
        o.check(
            &format!("W of {}: tail condition", w.label()),
            rep.satisfied && rep.constant <= cap,
            format!("{:.5} <= {cap:.5}", rep.constant),
        );
    }
}

type Criterion = fn(&mut Outcome);

fn main() -> ExitCode {
    let criteria: [(&str, &str, Option<f64>, Criterion); 9] = [
        ("C1", "kernel exactness", Some(30.0), kernel_exactness),
        ("C2", "ellipticity oracle", Some(60.0), ellipticity_oracle),
        ("C3", "growth constants", Some(10.0), growth_constants),
        ("C4", "example 6 reproduction", Some(120.0), example6_reproduction),
        ("C5", "John-Nirenberg", Some(60.0), john_nirenberg),
        ("C6", "Fatou / semigroup", Some(60.0), fatou),
        ("C7", "equivalence table", Some(600.0), equivalence),
        ("C8", "closed-form micro-values", None, closed_forms),
        ("C9", "seminorm lemmas", None, seminorm_lemmas),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let mut out = Outcome::default();
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut out)));
        let secs = start.elapsed().as_secs_f64();
        if let Err(e) = result {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            out.check("panicked", false, msg);
        }
        if let Some(b) = budget {
            out.check("runtime", secs <= b, format!("{secs:.1} s of {b:.0} s"));
        }
        let ok = out.passed();
        if !ok {
            failed += 1;
        }
        println!("[{}] {id} {name} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" });
        for (pass, line) in &out.lines {
            println!("       {} {line}", if *pass { "ok  " } else { "FAIL" });
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
