//! Closed-form harmonic extensions in the upper half-plane, used as oracles
//! and as cheap inputs to the seminorm estimators.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

/// A harmonic function `u(x, t)` on `ℝ²₊` together with its boundary datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    Constant,
    /// `u = x`.
    Linear,
    /// `u = e^{−t} cos x`.
    ExpCos,
    /// `u = e^{−2t} sin(2x)/2`.
    ExpSin2,
    /// Extension of `|x|^{1/2}`.
    SqrtAbs,
    /// Extension of `sign(x)|x|^{1/2}`.
    SignedSqrt,
    /// Extension of `1/(1+x²)`.
    Lorentzian,
}

/// Harmonic catalog members with their boundary-datum names in
/// [`crate::extension::BoundaryDatum::catalog`].
pub const HARMONIC_CATALOG: &[(Harmonic, &str)] = &[
    (Harmonic::Constant, "constant"),
    (Harmonic::Linear, "linear"),
    (Harmonic::ExpCos, "cos"),
    (Harmonic::ExpSin2, "sin2"),
    (Harmonic::SqrtAbs, "sqrt-abs"),
    (Harmonic::SignedSqrt, "signed-sqrt"),
    (Harmonic::Lorentzian, "lorentzian"),
];

impl Harmonic {
    pub fn from_name(name: &str) -> Option<Self> {
        HARMONIC_CATALOG
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(h, _)| *h)
    }

    pub fn name(self) -> &'static str {
        HARMONIC_CATALOG
            .iter()
            .find(|(h, _)| *h == self)
            .map(|(_, n)| *n)
            .unwrap_or("?")
    }

    /// Boundary value `f(x) = u(x, 0)`.
    pub fn boundary(self, x: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Linear => x,
            Self::ExpCos => x.cos(),
            Self::ExpSin2 => (2.0 * x).sin() / 2.0,
            Self::SqrtAbs => x.abs().sqrt(),
            Self::SignedSqrt => x.signum() * x.abs().sqrt(),
            Self::Lorentzian => 1.0 / (1.0 + x * x),
        }
    }

    pub fn value(self, x: f64, t: f64) -> f64 {
        let w = Complex64::new(t, -x);
        match self {
            Self::Constant => 1.0,
            Self::Linear => x,
            Self::ExpCos => (-t).exp() * x.cos(),
            Self::ExpSin2 => (-2.0 * t).exp() * (2.0 * x).sin() / 2.0,
            Self::SqrtAbs => w.sqrt().re / FRAC_1_SQRT_2,
            Self::SignedSqrt => -w.sqrt().im / FRAC_1_SQRT_2,
            Self::Lorentzian => {
                let s = 1.0 + t;
                s / (x * x + s * s)
            }
        }
    }

    /// `(∂_x u, ∂_t u)`.
    pub fn gradient(self, x: f64, t: f64) -> [f64; 2] {
        let w = Complex64::new(t, -x);
        match self {
            Self::Constant => [0.0, 0.0],
            Self::Linear => [1.0, 0.0],
            Self::ExpCos => {
                let e = (-t).exp();
                [-e * x.sin(), -e * x.cos()]
            }
            Self::ExpSin2 => {
                let e = (-2.0 * t).exp();
                [e * (2.0 * x).cos(), -e * (2.0 * x).sin()]
            }
            Self::SqrtAbs => {
                // u = Re G(w), w = t − ix, G' = w^{−1/2}/(2c).
                let d = 0.5 / w.sqrt() / FRAC_1_SQRT_2;
                [d.im, d.re]
            }
            Self::SignedSqrt => {
                let d = 0.5 / w.sqrt() / FRAC_1_SQRT_2;
                [d.re, -d.im]
            }
            Self::Lorentzian => {
                let s = 1.0 + t;
                let den = x * x + s * s;
                [-2.0 * x * s / (den * den), (x * x - s * s) / (den * den)]
            }
        }
    }

    /// `|∇u|²`.
    pub fn gradient_norm_sq(self, x: f64, t: f64) -> f64 {
        let [a, b] = self.gradient(x, t);
        a * a + b * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_attained() {
        for &(h, _) in HARMONIC_CATALOG {
            for x in [-3.0, -0.4, 0.0, 0.7, 5.0] {
                assert!((h.value(x, 1e-12) - h.boundary(x)).abs() < 1e-5, "{h:?} {x}");
            }
        }
    }

    #[test]
    fn gradients_match_differences_and_laplacian_vanishes() {
        let e = 1e-4;
        for &(h, _) in HARMONIC_CATALOG {
            for (x, t) in [(0.3, 0.5), (-2.0, 1.5), (4.0, 0.1)] {
                let g = h.gradient(x, t);
                let gx = (h.value(x + e, t) - h.value(x - e, t)) / (2.0 * e);
                let gt = (h.value(x, t + e) - h.value(x, t - e)) / (2.0 * e);
                assert!((g[0] - gx).abs() < 1e-6 && (g[1] - gt).abs() < 1e-6, "{h:?}");
                let lap = h.value(x + e, t) + h.value(x - e, t) + h.value(x, t + e)
                    + h.value(x, t - e)
                    - 4.0 * h.value(x, t);
                assert!((lap / (e * e)).abs() < 1e-3, "{h:?}");
            }
        }
    }
}
