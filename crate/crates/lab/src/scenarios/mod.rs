//! The scenario catalog and shared plumbing.

use halfspace::extension::{rows_norm_sq, EXTEND_TOL, GRADIENT_TOL};
use halfspace::{BoundaryDatum, Extender, Harmonic, Method, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::config::{Inputs, Named, SweepSpec};
use crate::report::ScenarioReport;
use crate::LabError;

pub mod dirichlet;
pub mod equivalence;
pub mod example6;
pub mod fatou;
pub mod jn;

pub use dirichlet::{DirichletSpec, DirichletVariant};
pub use equivalence::EquivalenceSpec;
pub use example6::Example6Spec;
pub use fatou::FatouSpec;
pub use jn::{JnSpec, JnVariant};

/// Per-scenario replacements of the top-level inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub name: Option<String>,
    pub system: Option<SystemSpec>,
    pub growth: Option<Named>,
    pub datum: Option<Named>,
    pub sweep: Option<SweepSpec>,
}

impl Overrides {
    pub fn apply(&self, base: &Inputs) -> Inputs {
        base.with_overrides(&self.system, &self.growth, &self.datum, &self.sweep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Dirichlet(DirichletSpec),
    Equivalence(EquivalenceSpec),
    Fatou(FatouSpec),
    Example6(Example6Spec),
    Jn(JnSpec),
}

/// Scenario kinds with a one-line description, for `lab list-catalog`.
pub const SCENARIO_KINDS: &[(&str, &str)] = &[
    ("dirichlet", "holder|morrey: solve by extension, measure both directions of the two-sided estimate, probe traces"),
    ("equivalence", "ratio table of the solution seminorms and the one-sided inequalities between them"),
    ("fatou", "semigroup residual of the symbol and reconstruction of u(., s+t) from the slice u(., s)"),
    ("example6", "log+|x| against the logarithmic growth function: mean oscillations, closed forms, divergence of the Hoelder quotient"),
    ("jn", "bmo|conical: level sets of a pair family against the exponential John-Nirenberg bound"),
];

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Dirichlet(_) => "dirichlet",
            Scenario::Equivalence(_) => "equivalence",
            Scenario::Fatou(_) => "fatou",
            Scenario::Example6(_) => "example6",
            Scenario::Jn(_) => "jn",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Scenario::Dirichlet(s) => &s.over,
            Scenario::Equivalence(s) => &s.over,
            Scenario::Fatou(s) => &s.over,
            Scenario::Example6(s) => &s.over,
            Scenario::Jn(s) => &s.over,
        }
    }

    /// Output file prefix.
    pub fn name(&self) -> String {
        self.overrides()
            .name
            .clone()
            .unwrap_or_else(|| self.kind().to_string())
    }

    pub fn run(&self, name: &str, base: &Inputs) -> Result<ScenarioReport, LabError> {
        let inputs = self.overrides().apply(base);
        match self {
            Scenario::Dirichlet(s) => dirichlet::run(name, s, &inputs),
            Scenario::Equivalence(s) => equivalence::run(name, s, &inputs),
            Scenario::Fatou(s) => fatou::run(name, s, &inputs),
            Scenario::Example6(s) => example6::run(name, s, &inputs),
            Scenario::Jn(s) => jn::run(name, s, &inputs),
        }
    }
}

/// A solution `u` on `ℝⁿ₊` seen through real components: either a closed
/// form or the Poisson extension of a catalog datum.
pub enum Solution<'a> {
    Closed(Harmonic),
    Extended {
        ext: &'a Extender<'a>,
        datum: BoundaryDatum,
    },
}

impl<'a> Solution<'a> {
    /// The closed form when the system is the planar Laplacian and the datum
    /// has one, otherwise the extension.
    pub fn pick(inputs: &Inputs, ext: &'a Extender<'a>, datum: &Named) -> Result<Self, LabError> {
        if inputs.is_planar_laplacian() && datum.params.is_empty() {
            if let Some(h) = Harmonic::from_name(&datum.name) {
                return Ok(Solution::Closed(h));
            }
        }
        Ok(Solution::Extended {
            ext,
            datum: datum.datum(inputs.n() - 1)?,
        })
    }

    /// Number of real components of `u`.
    pub fn components(&self) -> usize {
        match self {
            Solution::Closed(_) => 1,
            Solution::Extended { datum, .. } => 2 * datum.m(),
        }
    }

    /// `u(x′, t)` into `out`; NaN when the extension fails.
    pub fn value(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Solution::Closed(h) => out[0] = h.value(x[0], t),
            Solution::Extended { ext, datum } => {
                match ext.value_at(datum, x, t, EXTEND_TOL, Method::Auto) {
                    Ok(v) => split_complex(&v, out),
                    Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
                }
            }
        }
    }

    /// `|∇u(x′, t)|²`; NaN when the extension fails.
    pub fn grad_sq(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Solution::Closed(h) => h.gradient_norm_sq(x[0], t),
            Solution::Extended { ext, datum } => ext
                .gradient_at(datum, x, t, GRADIENT_TOL, Method::Auto)
                .map(|r| rows_norm_sq(&r))
                .unwrap_or(f64::NAN),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Solution::Closed(h) => h.name().to_string(),
            Solution::Extended { datum, .. } => datum.label().to_string(),
        }
    }
}

/// Interleaves `(Re, Im)` of each component.
pub fn split_complex(v: &[num_complex::Complex64], out: &mut [f64]) {
    for (k, z) in v.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

/// Boundary datum as a real field with interleaved `(Re, Im)` components.
pub fn real_datum(f: &BoundaryDatum) -> impl Fn(&[f64], &mut [f64]) + Sync + '_ {
    move |x, out| split_complex(&f.eval(x), out)
}

/// `value / reference` with `0/0 = 0`.
pub fn ratio(value: f64, reference: f64) -> f64 {
    if value == 0.0 && reference == 0.0 {
        0.0
    } else {
        value / reference
    }
}
