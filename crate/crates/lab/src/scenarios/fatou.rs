//! Reconstruction: `u(·, s+t) = P_t ∗ u(·, s)`, checked on the symbol
//! (`P̂_s P̂_t = P̂_{s+t}`) and on sampled periodic slices.

use halfspace::poisson::semigroup_residual;
use halfspace::{Extender, Method, PoissonKernel};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Overrides;
use crate::config::Inputs;
use crate::report::{num, Check, ScenarioReport, Table, Verdict};
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FatouSpec {
    /// Height of the sampled slice.
    pub s: f64,
    /// Height of the re-extension.
    pub t: f64,
    /// Lattice points per period.
    pub lattice: usize,
    pub probes: usize,
    /// Random tangential frequencies of the symbol test.
    pub frequencies: usize,
    pub symbol_tol: f64,
    /// Slice tolerance; defaults to 1e-5 for scalar and 1e-4 for vector
    /// systems.
    pub slice_tol: Option<f64>,
    #[serde(flatten)]
    pub over: Overrides,
}

impl Default for FatouSpec {
    fn default() -> Self {
        Self {
            s: 0.5,
            t: 0.75,
            lattice: 256,
            probes: 17,
            frequencies: 100,
            symbol_tol: 1e-10,
            slice_tol: None,
            over: Overrides::default(),
        }
    }
}

/// Tolerance of the periodic slice samples.
const SAMPLE_TOL: f64 = 1e-12;

pub fn run(name: &str, spec: &FatouSpec, inputs: &Inputs) -> Result<ScenarioReport, LabError> {
    let system = inputs.system.build()?;
    let dim = system.n() - 1;
    let m = system.m();
    let mut rep = ScenarioReport::new(name, "fatou");
    let mut table = Table::new("residuals", &["test", "x", "reconstructed", "reference", "residual"]);

    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed ^ 0xfa70);
    let xis: Vec<Vec<f64>> = (0..spec.frequencies)
        .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();
    let sym = semigroup_residual(&system, &xis, spec.s, spec.t)?;
    table.push(vec!["symbol".into(), String::new(), String::new(), String::new(), num(sym)]);
    rep.checks.push(Check::at_most("symbol semigroup", sym, spec.symbol_tol));
    rep.metrics.insert("symbol_residual".into(), sym);

    let datum = inputs.datum.datum(dim)?;
    let period = datum.period().ok_or_else(|| LabError::Unsupported {
        scenario: name.into(),
        reason: format!("the slice test needs a periodic one-variable datum, `{}` is not", datum.label()),
    })?;
    let kernel = PoissonKernel::new(system)?;
    let ext = Extender::new(&kernel)?;
    let n = spec.lattice.max(2);
    let h = period / n as f64;
    let ys: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let slice: Vec<Vec<Complex64>> = ys
        .par_iter()
        .map(|&y| ext.value_at(&datum, &[y], spec.s, SAMPLE_TOL, Method::Periodic))
        .collect::<Result<_, _>>()?;
    let reference_method = if datum.modes().is_some() {
        Method::Spectral
    } else {
        Method::Periodic
    };
    let probes: Vec<f64> = (0..spec.probes)
        .map(|k| period * (k as f64 + 0.37) / spec.probes as f64 - period / 2.0)
        .collect();
    let rows: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = probes
        .par_iter()
        .map(|&x| -> Result<_, LabError> {
            let mut acc = vec![Complex64::new(0.0, 0.0); m];
            for (y, v) in ys.iter().zip(&slice) {
                let k = &kernel.periodic_kernel(x - y, spec.t, period, false)?[0];
                for a in 0..m {
                    for b in 0..m {
                        acc[a] += k[(a, b)] * v[b] * h;
                    }
                }
            }
            let reference = ext.value_at(&datum, &[x], spec.s + spec.t, SAMPLE_TOL, reference_method)?;
            Ok((x, acc, reference))
        })
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for (x, got, want) in &rows {
        let r = got
            .iter()
            .zip(want)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
        table.push(vec![
            "slice".into(),
            num(*x),
            num(got[0].re),
            num(want[0].re),
            num(r),
        ]);
    }
    let tol = spec.slice_tol.unwrap_or(if m == 1 { 1e-5 } else { 1e-4 });
    let constant = datum.label().starts_with("constant");
    let verdict = match (worst <= tol, constant) {
        (true, true) => Verdict::Degenerate,
        (ok, _) => Verdict::from_bool(ok),
    };
    rep.checks.push(Check::new("slice reconstruction", verdict, worst, tol));
    rep.metrics.insert("slice_residual".into(), worst);
    rep.tables.push(table);
    rep.tables.push(Table::of_checks("checks", &rep.checks));
    Ok(rep)
}
