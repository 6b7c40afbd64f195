//! Gauss–Legendre rules and composite panel integration.
//!
//! Nodes and weights are always computed in `f64` (Newton iteration on the
//! three-term recurrence) and converted on use, so `f32` callers still get
//! correctly rounded rules.

use std::sync::OnceLock;

use crate::scalar::{pairwise_sum, Real};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule. Panics for `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped<T: Real>(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * T::lit(x), half * T::lit(w)))
    }

    /// Single-panel integral of `f` over `[a, b]`.
    pub fn integrate<T: Real>(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        let terms: Vec<T> = self.mapped(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn integrate_composite<T: Real>(
        &self,
        a: T,
        b: T,
        panels: usize,
        mut f: impl FnMut(T) -> T,
    ) -> T {
        let panels = panels.max(1);
        let h = (b - a) / T::from_count(panels);
        let parts: Vec<T> = (0..panels)
            .map(|k| {
                let lo = a + h * T::from_count(k);
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &mut f)
            })
            .collect();
        pairwise_sum(&parts)
    }

    /// Composite rule over consecutive breakpoints (must be sorted).
    pub fn integrate_pieces<T: Real>(
        &self,
        breaks: &[T],
        panels_per_piece: usize,
        mut f: impl FnMut(T) -> T,
    ) -> T {
        let parts: Vec<T> = breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.integrate_composite(w[0], w[1], panels_per_piece, &mut f))
            .collect();
        pairwise_sum(&parts)
    }
}

/// Adaptive bisection driven by a fixed rule: a panel is accepted when its
/// value agrees with the sum over its two halves to within
/// `max(rel_tol·|value|, abs_tol)`. Handles endpoint singularities and
/// interior kinks at the cost of extra panels. Refinement stops at depth 40
/// or after [`MAX_PANELS`] bisections in total, whichever comes first, so an
/// integrand that is noisy at the tolerance level costs bounded work.
pub fn integrate_adaptive<T: Real>(
    rule: &GaussLegendre,
    a: T,
    b: T,
    rel_tol: T,
    abs_tol: T,
    mut f: impl FnMut(T) -> T,
) -> T {
    const MAX_DEPTH: u32 = 40;
    let whole = rule.integrate(a, b, &mut f);
    let mut budget = MAX_PANELS;
    adaptive_step(rule, a, b, whole, rel_tol, abs_tol, MAX_DEPTH, &mut budget, &mut f)
}

/// Bisection budget of [`integrate_adaptive`].
pub const MAX_PANELS: usize = 4096;

#[allow(clippy::too_many_arguments)]
fn adaptive_step<T: Real>(
    rule: &GaussLegendre,
    a: T,
    b: T,
    whole: T,
    rel_tol: T,
    abs_tol: T,
    depth: u32,
    budget: &mut usize,
    f: &mut impl FnMut(T) -> T,
) -> T {
    *budget = budget.saturating_sub(1);
    let m = (a + b) * T::lit(0.5);
    let left = rule.integrate(a, m, &mut *f);
    let right = rule.integrate(m, b, &mut *f);
    let refined = left + right;
    if !refined.is_finite() {
        return refined;
    }
    if depth == 0 || *budget == 0 || (refined - whole).abs() <= (rel_tol * refined.abs()).max(abs_tol) {
        return refined;
    }
    adaptive_step(rule, a, m, left, rel_tol, abs_tol, depth - 1, budget, f)
        + adaptive_step(rule, m, b, right, rel_tol, abs_tol, depth - 1, budget, f)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached 8-point rule.
pub fn gl8() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(8))
}

/// Cached 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(16))
}

/// Cached 32-point rule (the panel rule of the log-variable integrals).
pub fn gl32() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(32))
}

/// Tensor-product Gauss nodes on the cube `corner + [0, side)^d`, with
/// weights normalized to sum to one (cube means).
pub fn cube_mean_nodes<T: Real>(
    rule: &GaussLegendre,
    corner: &[T],
    side: T,
) -> (Vec<Vec<T>>, Vec<T>) {
    let d = corner.len();
    let m = rule.len();
    let count = m.pow(d as u32);
    let mut pts = Vec::with_capacity(count);
    let mut wts = Vec::with_capacity(count);
    let mut idx = vec![0usize; d];
    for _ in 0..count {
        let mut p = Vec::with_capacity(d);
        let mut w = T::one();
        for (axis, &i) in idx.iter().enumerate() {
            let x = T::lit(0.5 * (rule.nodes[i] + 1.0));
            p.push(corner[axis] + side * x);
            w = w * T::lit(0.5 * rule.weights[i]);
        }
        pts.push(p);
        wts.push(w);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16, 32, 64] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(8);
        for deg in 0..16 {
            let got = r.integrate(0.0_f64, 1.0, |x| x.powi(deg));
            assert_relative_eq!(got, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_integrates_exponential() {
        let got = gl32().integrate_composite(0.0_f64, 10.0, 4, |x| (-x).exp());
        assert_relative_eq!(got, 1.0 - (-10.0_f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let got = integrate_adaptive(gl16(), 0.0_f64, 1.0, 1e-13, 0.0, |x| x.sqrt());
        assert_relative_eq!(got, 2.0 / 3.0, max_relative = 1e-12);
        let kink = integrate_adaptive(gl16(), -1.0_f64, 2.0, 1e-13, 0.0, |x| x.abs());
        assert_relative_eq!(kink, 2.5, max_relative = 1e-12);
    }

    #[test]
    fn f32_rule_is_usable() {
        let got = gl16().integrate(0.0_f32, std::f32::consts::PI, |x| x.sin());
        assert!((got - 2.0).abs() < 1e-5);
    }

    #[test]
    fn cube_nodes_give_means() {
        let (pts, w) = cube_mean_nodes(gl8(), &[1.0_f64, -2.0], 0.5);
        assert_eq!(pts.len(), 64);
        let mean_x: f64 = pts.iter().zip(&w).map(|(p, w)| p[0] * w).sum();
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        assert_relative_eq!(mean_x, 1.25, epsilon = 1e-14);
    }
}
