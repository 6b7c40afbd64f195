//! Constant-coefficient second-order systems `L = ∂_j(a_{jk}^{αβ} ∂_k)` in
//! `ℝⁿ`, acting on `ℂ^M`-valued functions.
//!
//! The last coordinate is the normal direction `t` of the upper half-space.
//! Coefficients are stored verbatim; no symmetrization is ever applied.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    #[error("dimension n = {0} must be at least 2")]
    Dimension(usize),
    #[error("system size M must be at least 1")]
    SystemSize,
    #[error("coefficient tensor has {got} entries, expected n²M² = {expected}")]
    Shape { expected: usize, got: usize },
    #[error("coefficient a[{j}][{k}][{alpha}][{beta}] is not finite")]
    NonFinite {
        j: usize,
        k: usize,
        alpha: usize,
        beta: usize,
    },
}

/// A constant-coefficient `M×M` system in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSystem {
    n: usize,
    m: usize,
    label: String,
    /// Row-major in `(j, k, α, β)`, all indices zero-based.
    coeff: Vec<Complex64>,
}

impl EllipticSystem {
    pub fn new(
        label: impl Into<String>,
        n: usize,
        m: usize,
        coeff: Vec<Complex64>,
    ) -> Result<Self, EllipticError> {
        if n < 2 {
            return Err(EllipticError::Dimension(n));
        }
        if m == 0 {
            return Err(EllipticError::SystemSize);
        }
        let expected = n * n * m * m;
        if coeff.len() != expected {
            return Err(EllipticError::Shape {
                expected,
                got: coeff.len(),
            });
        }
        if let Some(pos) = coeff.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            let beta = pos % m;
            let alpha = (pos / m) % m;
            let k = (pos / (m * m)) % n;
            let j = pos / (m * m * n);
            return Err(EllipticError::NonFinite { j, k, alpha, beta });
        }
        Ok(Self {
            n,
            m,
            label: label.into(),
            coeff,
        })
    }

    /// Builds the tensor from `a(j, k, α, β)` with zero-based indices.
    pub fn from_fn(
        label: impl Into<String>,
        n: usize,
        m: usize,
        a: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> Result<Self, EllipticError> {
        let mut coeff = Vec::with_capacity(n * n * m * m);
        for j in 0..n {
            for k in 0..n {
                for alpha in 0..m {
                    for beta in 0..m {
                        coeff.push(a(j, k, alpha, beta));
                    }
                }
            }
        }
        Self::new(label, n, m, coeff)
    }

    /// The Laplacian, `a_{jk} = δ_{jk}`, `M = 1`.
    pub fn laplacian(n: usize) -> Result<Self, EllipticError> {
        Self::from_fn(format!("laplacian-n{n}"), n, 1, |j, k, _, _| {
            Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Scalar operator `div A ∇` for an `n×n` complex matrix `A` (row-major).
    pub fn scalar_div(n: usize, a: &[Complex64]) -> Result<Self, EllipticError> {
        if a.len() != n * n {
            return Err(EllipticError::Shape {
                expected: n * n,
                got: a.len(),
            });
        }
        Self::from_fn(format!("scalar-divA-n{n}"), n, 1, |j, k, _, _| a[j * n + k])
    }

    /// Lamé system `μΔ + (λ+μ)∇div` with the placement
    /// `a_{jk}^{αβ} = μ δ_{jk} δ_{αβ} + (λ+μ) δ_{jα} δ_{kβ}`, `M = n`.
    /// Also returns the closed-form admissibility flag.
    pub fn lame(n: usize, mu: Complex64, lambda: Complex64) -> Result<(Self, bool), EllipticError> {
        let sys = Self::from_fn(format!("lame-n{n}(mu={mu},lambda={lambda})"), n, n, |j, k, a, b| {
            let mut v = Complex64::new(0.0, 0.0);
            if j == k && a == b {
                v += mu;
            }
            if j == a && k == b {
                v += lambda + mu;
            }
            v
        })?;
        Ok((sys, lame_admissible(mu, lambda)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn coeff(&self, j: usize, k: usize, alpha: usize, beta: usize) -> Complex64 {
        self.coeff[((j * self.n + k) * self.m + alpha) * self.m + beta]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeff
    }

    /// True when every coefficient is real.
    pub fn is_real(&self) -> bool {
        self.coeff.iter().all(|c| c.im == 0.0)
    }

    /// `S(ξ) = Σ_{jk} a_{jk} ξ_j ξ_k` for a full frequency `ξ ∈ ℝⁿ`; plane
    /// waves `e^{ix·ξ}ζ` are null solutions iff `S(ξ)ζ = 0`.
    pub fn symbol(&self, xi: &[f64]) -> DMatrix<Complex64> {
        assert_eq!(xi.len(), self.n, "frequency dimension");
        let m = self.m;
        let mut s = DMatrix::zeros(m, m);
        for j in 0..self.n {
            for k in 0..self.n {
                let w = xi[j] * xi[k];
                if w == 0.0 {
                    continue;
                }
                for a in 0..m {
                    for b in 0..m {
                        s[(a, b)] += self.coeff(j, k, a, b) * w;
                    }
                }
            }
        }
        s
    }

    /// Legendre–Hadamard form `Re[a_{jk}^{αβ} ξ_j ξ_k ζ̄_α ζ_β]`.
    pub fn lh_form(&self, xi: &[f64], zeta: &[Complex64]) -> f64 {
        let s = self.symbol(xi);
        let z = DVector::from_column_slice(zeta);
        (z.adjoint() * s * z)[(0, 0)].re
    }

    /// `min_{|ζ|=1} Re ζ^H S(ξ) ζ`, the smallest eigenvalue of the Hermitian
    /// part of the symbol.
    pub fn lh_min_over_zeta(&self, xi: &[f64]) -> f64 {
        let s = self.symbol(xi);
        let h = (&s + s.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    /// Estimates the Legendre–Hadamard constant
    /// `κ₀ = min_{ξ ∈ S^{n-1}, ζ ∈ S(ℂ^M)} Re[a ξξ ζ̄ζ]`.
    ///
    /// `ξ` is sampled quasi-randomly on the sphere (Halton sequence through
    /// Box–Muller); the minimum over `ζ` is exact for each `ξ`. With `refine`,
    /// the best samples are polished by coordinate descent. The result is an
    /// upper bound of the true constant up to refinement accuracy, and its sign
    /// carries the verdict.
    pub fn ellipticity_constant(&self, samples: usize, refine: bool) -> f64 {
        let n = self.n;
        let samples = samples.max(1);
        let values: Vec<(f64, usize)> = (0..samples)
            .into_par_iter()
            .map(|i| (self.lh_min_over_zeta(&sphere_point(n, i + 1)), i))
            .collect();
        // Keep a handful of the lowest starts, in deterministic order.
        let mut sorted = values;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let starts: Vec<usize> = sorted.iter().take(8).map(|&(_, i)| i).collect();
        let mut best = sorted[0].0;
        if refine {
            let polished: Vec<f64> = starts
                .par_iter()
                .map(|&i| self.refine_from(sphere_point(n, i + 1)))
                .collect();
            for v in polished {
                best = best.min(v);
            }
        }
        best
    }

    fn refine_from(&self, mut xi: Vec<f64>) -> f64 {
        const ITERATIONS: usize = 50;
        let mut value = self.lh_min_over_zeta(&xi);
        let mut step = 0.05;
        for _ in 0..ITERATIONS {
            let mut improved = false;
            for axis in 0..self.n {
                for sign in [1.0, -1.0] {
                    let mut trial = xi.clone();
                    trial[axis] += sign * step;
                    normalize(&mut trial);
                    let v = self.lh_min_over_zeta(&trial);
                    if v < value {
                        value = v;
                        xi = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        value
    }

    /// Splits the symbol along `ξ = (ξ′, τ)`.
    pub fn symbol_pencil(&self, xi_t: &[f64]) -> SymbolPencil {
        let n = self.n;
        let m = self.m;
        assert_eq!(xi_t.len(), n - 1, "tangential frequency dimension");
        let last = n - 1;
        let mut a0 = DMatrix::zeros(m, m);
        let mut a1 = DMatrix::zeros(m, m);
        let mut a2 = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                a2[(a, b)] = self.coeff(last, last, a, b);
                let mut s1 = Complex64::new(0.0, 0.0);
                for j in 0..last {
                    s1 += (self.coeff(j, last, a, b) + self.coeff(last, j, a, b)) * xi_t[j];
                }
                a1[(a, b)] = s1;
                let mut s0 = Complex64::new(0.0, 0.0);
                for j in 0..last {
                    for k in 0..last {
                        s0 += self.coeff(j, k, a, b) * (xi_t[j] * xi_t[k]);
                    }
                }
                a0[(a, b)] = s0;
            }
        }
        SymbolPencil { a0, a1, a2 }
    }
}

/// Closed-form admissibility of the Lamé moduli: `Re μ > 0` and `Re(2μ+λ) > 0`.
pub fn lame_admissible(mu: Complex64, lambda: Complex64) -> bool {
    mu.re > 0.0 && (mu * 2.0 + lambda).re > 0.0
}

/// The symbol `A₂τ² + A₁τ + A₀` at a fixed tangential frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPencil {
    pub a0: DMatrix<Complex64>,
    pub a1: DMatrix<Complex64>,
    pub a2: DMatrix<Complex64>,
}

impl SymbolPencil {
    pub fn eval(&self, tau: Complex64) -> DMatrix<Complex64> {
        &self.a2 * (tau * tau) + &self.a1 * tau + &self.a0
    }

    /// 2-norm condition number of `A₂` (infinite when singular).
    pub fn a2_condition(&self) -> f64 {
        let sv = self.a2.clone().singular_values();
        let lo = sv.min();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            sv.max() / lo
        }
    }
}

/// Configuration-level description of a system.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSpec {
    Laplacian {
        n: usize,
    },
    Lame {
        n: usize,
        mu: [f64; 2],
        lambda: [f64; 2],
    },
    #[serde(rename = "scalar-divA")]
    ScalarDivA {
        n: usize,
        /// Row-major `[re, im]` pairs.
        a: Vec<[f64; 2]>,
    },
    Tensor {
        n: usize,
        m: usize,
        /// `[re, im]` pairs in `(j, k, α, β)` row-major order.
        coeff: Vec<[f64; 2]>,
    },
}

impl SystemSpec {
    pub fn build(&self) -> Result<EllipticSystem, EllipticError> {
        let c = |p: &[f64; 2]| Complex64::new(p[0], p[1]);
        match self {
            SystemSpec::Laplacian { n } => EllipticSystem::laplacian(*n),
            SystemSpec::Lame { n, mu, lambda } => {
                EllipticSystem::lame(*n, c(mu), c(lambda)).map(|(s, _)| s)
            }
            SystemSpec::ScalarDivA { n, a } => {
                let a: Vec<Complex64> = a.iter().map(c).collect();
                EllipticSystem::scalar_div(*n, &a)
            }
            SystemSpec::Tensor { n, m, coeff } => EllipticSystem::new(
                format!("tensor-n{n}-m{m}"),
                *n,
                *m,
                coeff.iter().map(c).collect(),
            ),
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `i` in base `b`.
pub(crate) fn halton(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let bf = b as f64;
    while i > 0 {
        f /= bf;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// The `i`-th quasi-random point on `S^{d-1}`.
pub(crate) fn sphere_point(d: usize, i: usize) -> Vec<f64> {
    if d == 2 {
        let th = 2.0 * std::f64::consts::PI * halton(i as u64, 2);
        return vec![th.cos(), th.sin()];
    }
    let mut v = Vec::with_capacity(d + 1);
    let pairs = d.div_ceil(2);
    for p in 0..pairs {
        let u1 = halton(i as u64, PRIMES[2 * p]).max(1e-300);
        let u2 = halton(i as u64, PRIMES[2 * p + 1]);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        v.push(r * th.cos());
        v.push(r * th.sin());
    }
    v.truncate(d);
    normalize(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_tensors() {
        let mut coeff = vec![c(1.0, 0.0); 4];
        coeff[2] = c(f64::NAN, 0.0);
        assert!(matches!(
            EllipticSystem::new("bad", 2, 1, coeff),
            Err(EllipticError::NonFinite { j: 1, k: 0, .. })
        ));
        assert!(matches!(
            EllipticSystem::new("short", 2, 1, vec![c(1.0, 0.0); 3]),
            Err(EllipticError::Shape { .. })
        ));
    }

    #[test]
    fn lame_flags() {
        assert!(EllipticSystem::lame(2, c(1.0, 0.0), c(1.0, 0.0)).unwrap().1);
        assert!(!EllipticSystem::lame(2, c(1.0, 0.0), c(-2.5, 0.0)).unwrap().1);
        assert!(EllipticSystem::lame(2, c(1.0, 1.0), c(-1.0, 0.0)).unwrap().1);
    }

    #[test]
    fn ellipticity_of_laplacian_and_lame() {
        let lap = EllipticSystem::laplacian(3).unwrap();
        assert!((lap.ellipticity_constant(2000, true) - 1.0).abs() < 1e-3);
        let (lame, _) = EllipticSystem::lame(3, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((lame.ellipticity_constant(2000, true) - 1.0).abs() < 1e-2);
        let (lame, _) = EllipticSystem::lame(2, c(1.0, 0.0), c(-1.5, 0.0)).unwrap();
        assert!((lame.ellipticity_constant(2000, true) - 0.5).abs() < 1e-2);
    }

    #[test]
    fn scalar_div_with_skew_part() {
        let a = [c(1.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(1.0, 0.0)];
        let s = EllipticSystem::scalar_div(2, &a).unwrap();
        assert!((s.ellipticity_constant(1000, true) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pencil_of_lame() {
        let (lame, _) = EllipticSystem::lame(2, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let p = lame.symbol_pencil(&[1.0]);
        let m = |r: [[f64; 2]; 2]| DMatrix::from_fn(2, 2, |i, j| c(r[i][j], 0.0));
        assert_eq!(p.a2, m([[1.0, 0.0], [0.0, 3.0]]));
        assert_eq!(p.a1, m([[0.0, 2.0], [2.0, 0.0]]));
        assert_eq!(p.a0, m([[3.0, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn pencil_reassembles_symbol() {
        let (lame, _) = EllipticSystem::lame(3, c(1.0, 0.3), c(0.5, -0.2)).unwrap();
        let xi = [0.3, -1.2, 0.7];
        let p = lame.symbol_pencil(&xi[..2]);
        let diff = p.eval(c(xi[2], 0.0)) - lame.symbol(&xi);
        assert!(diff.norm() < 1e-14);
    }

    #[test]
    fn sphere_points_are_unit() {
        for d in 2..6 {
            for i in 1..50 {
                let p = sphere_point(d, i);
                let r: f64 = p.iter().map(|x| x * x).sum();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_roundtrip() {
        let spec: SystemSpec =
            serde_json::from_str(r#"{"kind":"lame","n":2,"mu":[1,0],"lambda":[1,0]}"#).unwrap();
        assert_eq!(spec.build().unwrap().m(), 2);
    }
}
