//! Poisson kernels of the upper half-space `ℝⁿ₊ = {(x′, t) : t > 0}`.
//!
//! For a strongly elliptic system the Fourier symbol in `x′` of the kernel
//! solves `A₂v″ + iA₁v′ − A₀v = 0` with `v(0) = I` and `v` bounded as
//! `t → ∞`. Writing `w = v′/i` turns this into `y′ = iCy` with the companion
//! matrix `C = [[0, I], [−A₂⁻¹A₀, −A₂⁻¹A₁]]`. The decaying solutions span the
//! invariant subspace of eigenvalues `Im τ > 0`, found by an ordered complex
//! Schur factorization `CU = UT`; then `P̂(ξ′, t) = U₁₁ e^{itT} U₁₁⁻¹`.
//!
//! Homogeneity gives `P̂(ξ′, t) = P̂(ξ′/|ξ′|, t|ξ′|)`, so factorizations are
//! done on unit directions only.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::elliptic::{EllipticError, EllipticSystem};

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance for eigenvalues too close to the real axis.
pub const IM_SPLIT_TOL: f64 = 1e-8;
/// Largest accepted condition number of `U₁₁`.
pub const COND_CAP: f64 = 1e12;
/// Largest accepted symbol norm on the rim of a frequency lattice.
pub const RIM_CAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error(transparent)]
    System(#[from] EllipticError),
    #[error("system `{label}` is not Legendre-Hadamard elliptic (estimated constant {kappa})")]
    NotElliptic { label: String, kappa: f64 },
    #[error("A2 is numerically singular (condition number {cond:e})")]
    SingularLeading { cond: f64 },
    #[error("pencil root with |Im tau| <= {tol:e}|xi'| at xi' = {xi:?}")]
    RealRoot { xi: Vec<f64>, tol: f64 },
    #[error("found {stable} decaying modes at xi' = {xi:?}, expected {expected}")]
    StableCount {
        xi: Vec<f64>,
        stable: usize,
        expected: usize,
    },
    #[error("boundary block of the stable basis is ill-conditioned (cond {cond:e}) at xi' = {xi:?}")]
    IllConditioned { xi: Vec<f64>, cond: f64 },
    #[error("dimension n = {0} is not supported here")]
    UnsupportedDimension(usize),
    #[error("symbol on the lattice rim is {rim:e} > {cap:e}: frequency extent too small for t = {t}")]
    Rim { rim: f64, cap: f64, t: f64 },
}

/// Ordered Schur data of the decaying subspace on one unit direction.
#[derive(Debug, Clone)]
pub struct StableBasis {
    pub u11: CMat,
    pub u11_inv: CMat,
    /// Upper triangular; its diagonal holds the roots `τ` with `Im τ > 0`.
    pub t: CMat,
    pub cond: f64,
}

impl StableBasis {
    /// Factorizes the pencil at `xi` (any nonzero frequency; not normalized).
    pub fn compute(system: &EllipticSystem, xi: &[f64]) -> Result<Self, PoissonError> {
        let m = system.m();
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pencil = system.symbol_pencil(xi);
        let a2_lu = pencil.a2.clone().lu();
        let a2_inv = a2_lu.try_inverse().ok_or(PoissonError::SingularLeading {
            cond: f64::INFINITY,
        })?;
        let cond_a2 = pencil.a2_condition();
        if cond_a2 > COND_CAP {
            return Err(PoissonError::SingularLeading { cond: cond_a2 });
        }
        let mut c = CMat::zeros(2 * m, 2 * m);
        let b0 = -(&a2_inv * &pencil.a0);
        let b1 = -(&a2_inv * &pencil.a1);
        for i in 0..m {
            c[(i, m + i)] = Complex64::new(1.0, 0.0);
            for j in 0..m {
                c[(m + i, j)] = b0[(i, j)];
                c[(m + i, m + j)] = b1[(i, j)];
            }
        }
        let (mut q, mut t) = Schur::new(c).unpack();
        for i in 0..2 * m {
            if t[(i, i)].im.abs() <= IM_SPLIT_TOL * norm {
                return Err(PoissonError::RealRoot {
                    xi: xi.to_vec(),
                    tol: IM_SPLIT_TOL,
                });
            }
        }
        reorder_upper_first(&mut q, &mut t);
        let stable = (0..2 * m).filter(|&i| t[(i, i)].im > 0.0).count();
        if stable != m {
            return Err(PoissonError::StableCount {
                xi: xi.to_vec(),
                stable,
                expected: m,
            });
        }
        let u11 = q.view((0, 0), (m, m)).into_owned();
        let sv = u11.clone().singular_values();
        let cond = if sv.min() == 0.0 {
            f64::INFINITY
        } else {
            sv.max() / sv.min()
        };
        if !(cond <= COND_CAP) {
            return Err(PoissonError::IllConditioned {
                xi: xi.to_vec(),
                cond,
            });
        }
        let u11_inv = u11.clone().lu().try_inverse().ok_or(PoissonError::IllConditioned {
            xi: xi.to_vec(),
            cond: f64::INFINITY,
        })?;
        let t_block = t.view((0, 0), (m, m)).into_owned();
        Ok(Self {
            u11,
            u11_inv,
            t: t_block,
            cond,
        })
    }

    /// Decaying roots `τ`.
    pub fn roots(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// `U₁₁ e^{isT} U₁₁⁻¹`.
    pub fn propagate(&self, s: f64) -> CMat {
        let e = (&self.t * Complex64::new(0.0, s)).exp();
        &self.u11 * e * &self.u11_inv
    }

    /// `d/ds` of [`propagate`](Self::propagate): `U₁₁ iT e^{isT} U₁₁⁻¹`.
    pub fn propagate_ds(&self, s: f64) -> CMat {
        let e = (&self.t * Complex64::new(0.0, s)).exp();
        &self.u11 * (&self.t * I) * e * &self.u11_inv
    }
}

/// Reorders a complex Schur form so that eigenvalues with positive imaginary
/// part come first, by adjacent Givens swaps.
fn reorder_upper_first(q: &mut CMat, t: &mut CMat) {
    let size = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..size.saturating_sub(1) {
            if t[(k, k)].im < 0.0 && t[(k + 1, k + 1)].im > 0.0 {
                swap_adjacent(q, t, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let size = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let c = t[(k + 1, k + 1)];
    // Eigenvector of the 2×2 block for the eigenvalue c.
    let x1 = b;
    let x2 = c - a;
    let r = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    let (g1, g2) = (x1 / r, x2 / r);
    // G = [[g1, -conj(g2)], [g2, conj(g1)]], unitary with first column x/|x|.
    for col in 0..size {
        let p = t[(k, col)];
        let s = t[(k + 1, col)];
        t[(k, col)] = g1.conj() * p + g2.conj() * s;
        t[(k + 1, col)] = -g2 * p + g1 * s;
    }
    for row in 0..size {
        let p = t[(row, k)];
        let s = t[(row, k + 1)];
        t[(row, k)] = p * g1 + s * g2;
        t[(row, k + 1)] = -p * g2.conj() + s * g1.conj();
        let p = q[(row, k)];
        let s = q[(row, k + 1)];
        q[(row, k)] = p * g1 + s * g2;
        q[(row, k + 1)] = -p * g2.conj() + s * g1.conj();
    }
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
}

/// `P̂(ξ′, t)` by a fresh ordered Schur factorization at `ξ′`. `P̂(0, t) = I`.
pub fn spectral_symbol(system: &EllipticSystem, xi: &[f64], t: f64) -> Result<CMat, PoissonError> {
    let m = system.m();
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || t == 0.0 {
        return Ok(CMat::identity(m, m));
    }
    let dir: Vec<f64> = xi.iter().map(|x| x / norm).collect();
    let basis = StableBasis::compute(system, &dir)?;
    Ok(basis.propagate(t * norm))
}

/// `max ‖P̂(ξ′,s)P̂(ξ′,t) − P̂(ξ′,s+t)‖₂` over the given frequencies, each
/// side from its own factorization.
pub fn semigroup_residual(
    system: &EllipticSystem,
    xis: &[Vec<f64>],
    s: f64,
    t: f64,
) -> Result<f64, PoissonError> {
    let residuals: Result<Vec<f64>, PoissonError> = xis
        .par_iter()
        .map(|xi| {
            let ps = spectral_symbol(system, xi, s)?;
            let pt = spectral_symbol(system, xi, t)?;
            let pst = spectral_symbol(system, xi, s + t)?;
            Ok(spectral_norm(&(ps * pt - pst)))
        })
        .collect();
    Ok(residuals?.into_iter().fold(0.0, f64::max))
}

pub(crate) fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// `Γ(n/2)/π^{n/2} (1+|x′|²)^{−n/2}`, the Laplacian kernel at height 1.
pub fn laplacian_kernel(n: usize, x: &[f64]) -> Result<f64, PoissonError> {
    if !(2..=3).contains(&n) || x.len() != n - 1 {
        return Err(PoissonError::UnsupportedDimension(n));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(laplacian_constant(n) * (1.0 + r2).powf(-(n as f64) / 2.0))
}

fn laplacian_constant(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    libm::tgamma(h) / std::f64::consts::PI.powf(h)
}

/// How kernel values are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    ClosedForm,
    Spectral,
}

/// The Poisson kernel of a system, with diagnostics caches.
#[derive(Debug, Clone)]
pub struct PoissonKernel {
    system: EllipticSystem,
    mode: KernelMode,
    /// Factorizations on `+e₁` and `−e₁` (n = 2 only).
    line: Option<[StableBasis; 2]>,
    pub normalization_defect: Option<f64>,
    pub decay_constant: Option<f64>,
}

/// Sample count used by [`PoissonKernel::new`] to certify ellipticity.
pub const ELLIPTICITY_SAMPLES: usize = 20_000;

impl PoissonKernel {
    /// Builds the kernel after checking ellipticity. The Laplacian uses the
    /// closed form; every other system goes through the spectral route.
    pub fn new(system: EllipticSystem) -> Result<Self, PoissonError> {
        let is_laplacian = {
            let n = system.n();
            system.m() == 1
                && (0..n).all(|j| {
                    (0..n).all(|k| {
                        system.coeff(j, k, 0, 0) == Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0)
                    })
                })
        };
        let mode = if is_laplacian && system.n() <= 3 {
            KernelMode::ClosedForm
        } else {
            KernelMode::Spectral
        };
        Self::with_mode(system, mode)
    }

    /// Forces the spectral route (also for the Laplacian).
    pub fn spectral(system: EllipticSystem) -> Result<Self, PoissonError> {
        Self::with_mode(system, KernelMode::Spectral)
    }

    fn with_mode(system: EllipticSystem, mode: KernelMode) -> Result<Self, PoissonError> {
        let kappa = system.ellipticity_constant(ELLIPTICITY_SAMPLES, true);
        if !(kappa > 0.0) {
            return Err(PoissonError::NotElliptic {
                label: system.label().to_string(),
                kappa,
            });
        }
        let line = if system.n() == 2 {
            Some([
                StableBasis::compute(&system, &[1.0])?,
                StableBasis::compute(&system, &[-1.0])?,
            ])
        } else {
            None
        };
        Ok(Self {
            system,
            mode,
            line,
            normalization_defect: None,
            decay_constant: None,
        })
    }

    pub fn system(&self) -> &EllipticSystem {
        &self.system
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    /// `P̂(ξ′, t)`.
    pub fn symbol(&self, xi: &[f64], t: f64) -> Result<CMat, PoissonError> {
        let m = self.m();
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || t == 0.0 {
            return Ok(CMat::identity(m, m));
        }
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) => Ok(CMat::identity(m, m) * Complex64::from((-t * norm).exp())),
            (KernelMode::Spectral, Some(line)) => {
                let b = if xi[0] > 0.0 { &line[0] } else { &line[1] };
                Ok(b.propagate(t * norm))
            }
            (KernelMode::Spectral, None) => spectral_symbol(&self.system, xi, t),
        }
    }

    /// `∂_t P̂(ξ′, t)`.
    pub fn symbol_dt(&self, xi: &[f64], t: f64) -> Result<CMat, PoissonError> {
        let m = self.m();
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(CMat::zeros(m, m));
        }
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) => {
                Ok(CMat::identity(m, m) * Complex64::from(-norm * (-t * norm).exp()))
            }
            (KernelMode::Spectral, Some(line)) => {
                let b = if xi[0] > 0.0 { &line[0] } else { &line[1] };
                Ok(b.propagate_ds(t * norm) * Complex64::from(norm))
            }
            (KernelMode::Spectral, None) => {
                let dir: Vec<f64> = xi.iter().map(|x| x / norm).collect();
                let b = StableBasis::compute(&self.system, &dir)?;
                Ok(b.propagate_ds(t * norm) * Complex64::from(norm))
            }
        }
    }

    /// Pointwise kernel `K(x′, t) = t^{1−n} P(x′/t)`.
    ///
    /// Closed form for the Laplacian (n = 2, 3). For spectral kernels in
    /// n = 2 the Fourier integral is done exactly:
    /// `K = (1/2π)[U₊ i(tT₊ + x)⁻¹ U₊⁻¹ + U₋ i(tT₋ − x)⁻¹ U₋⁻¹]`.
    pub fn kernel_at(&self, x: &[f64], t: f64) -> Result<CMat, PoissonError> {
        let n = self.n();
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let v = laplacian_constant(n) * t * (t * t + r2).powf(-(n as f64) / 2.0);
                Ok(CMat::from_element(1, 1, Complex64::from(v)))
            }
            (KernelMode::Spectral, Some([plus, minus])) => {
                let x = x[0];
                let rp = resolvent(&plus.t, t, x);
                let rm = resolvent(&minus.t, t, -x);
                let k = &plus.u11 * rp * &plus.u11_inv + &minus.u11 * rm * &minus.u11_inv;
                Ok(k * (I / (2.0 * std::f64::consts::PI)))
            }
            _ => Err(PoissonError::UnsupportedDimension(n)),
        }
    }

    /// `(∂_{x₁} K, …, ∂_{x_{n−1}} K, ∂_t K)` at `(x′, t)`.
    pub fn kernel_gradient_at(&self, x: &[f64], t: f64) -> Result<Vec<CMat>, PoissonError> {
        let n = self.n();
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = laplacian_constant(n);
                let nf = n as f64;
                let q = t * t + r2;
                let base = q.powf(-nf / 2.0);
                let dbase = -nf * q.powf(-nf / 2.0 - 1.0);
                let mut out: Vec<CMat> = x
                    .iter()
                    .map(|&xi| CMat::from_element(1, 1, Complex64::from(c * t * dbase * xi)))
                    .collect();
                out.push(CMat::from_element(
                    1,
                    1,
                    Complex64::from(c * (base + t * t * dbase)),
                ));
                Ok(out)
            }
            (KernelMode::Spectral, Some([plus, minus])) => {
                let x = x[0];
                let rp = resolvent(&plus.t, t, x);
                let rm = resolvent(&minus.t, t, -x);
                let rp2 = &rp * &rp;
                let rm2 = &rm * &rm;
                let scale = Complex64::from(1.0 / (2.0 * std::f64::consts::PI));
                // d/dx of i(tT + x)⁻¹ is −i(tT + x)⁻², and of i(tT − x)⁻¹ is +i(tT − x)⁻².
                let dx = (&plus.u11 * &rp2 * &plus.u11_inv * (-I)
                    + &minus.u11 * &rm2 * &minus.u11_inv * I)
                    * scale;
                let dt = (&plus.u11 * (&plus.t * &rp2) * &plus.u11_inv * (-I)
                    + &minus.u11 * (&minus.t * &rm2) * &minus.u11_inv * (-I))
                    * scale;
                Ok(vec![dx, dt])
            }
            _ => Err(PoissonError::UnsupportedDimension(n)),
        }
    }

    /// Principal-value first moments `m_i = p.v.∫ z_i P(z) dz`, so that
    /// `P_t ∗ (x_i g) = (x_i I − t m_i) g`. Zero for the Laplacian; for n = 2
    /// spectral kernels `m = −(U₊T₊U₊⁻¹ − U₋T₋U₋⁻¹)/2` (the symmetric
    /// derivative of `P̂` at the origin times `i`).
    pub fn first_moments(&self) -> Result<Vec<CMat>, PoissonError> {
        let m = self.m();
        let dim = self.n() - 1;
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) => Ok(vec![CMat::zeros(m, m); dim]),
            (KernelMode::Spectral, Some([plus, minus])) => {
                let ap = &plus.u11 * &plus.t * &plus.u11_inv;
                let am = &minus.u11 * &minus.t * &minus.u11_inv;
                Ok(vec![(ap - am) * Complex64::from(-0.5)])
            }
            _ => Err(PoissonError::UnsupportedDimension(self.n())),
        }
    }

    /// Periodization `Σ_k K(x + kp, t)` (n = 2) and, with `grad`, its `x` and
    /// `t` derivatives. Uses `Σ_k (A + kp)⁻¹ = (π/p) cot(πA/p)` on the
    /// resolvent form of the kernel, with the matrix cotangent evaluated
    /// through `e^{2iB}`.
    pub fn periodic_kernel(
        &self,
        x: f64,
        t: f64,
        period: f64,
        grad: bool,
    ) -> Result<Vec<CMat>, PoissonError> {
        let pi = std::f64::consts::PI;
        match (self.mode, &self.line) {
            (KernelMode::ClosedForm, _) if self.n() == 2 => {
                let w = 2.0 * pi / period;
                let (sh, ch) = ((w * t).sinh(), (w * t).cosh());
                let den = ch - (w * x).cos();
                let k = sh / (period * den);
                let mut out = vec![CMat::from_element(1, 1, Complex64::from(k))];
                if grad {
                    let dx = -sh * w * (w * x).sin() / (period * den * den);
                    let dt = w * (ch * den - sh * sh) / (period * den * den);
                    out.push(CMat::from_element(1, 1, Complex64::from(dx)));
                    out.push(CMat::from_element(1, 1, Complex64::from(dt)));
                }
                Ok(out)
            }
            (KernelMode::Spectral, Some([plus, minus])) => {
                let m = self.m();
                let id = CMat::identity(m, m);
                let scale = Complex64::from(1.0 / (2.0 * period));
                // Returns (cot(πA/p), d/da cot(πA/p) = −(π/p)(I + cot²)).
                let cot = |tb: &CMat, sign: f64| -> (CMat, CMat) {
                    let a = tb * Complex64::from(t) + &id * Complex64::from(sign * x);
                    let e = (&a * Complex64::new(0.0, 2.0 * pi / period)).exp();
                    let inv = (&e - &id).lu().try_inverse().expect("cotangent pole");
                    let c = (&e + &id) * inv * I;
                    let d = (&id + &c * &c) * Complex64::from(-pi / period);
                    (c, d)
                };
                let (cp, dp) = cot(&plus.t, 1.0);
                let (cm, dm) = cot(&minus.t, -1.0);
                let side = |b: &StableBasis, mtx: &CMat| &b.u11 * mtx * &b.u11_inv;
                let k = (side(plus, &cp) + side(minus, &cm)) * I * scale;
                let mut out = vec![k];
                if grad {
                    let dx = (side(plus, &dp) - side(minus, &dm)) * I * scale;
                    let dt = (side(plus, &(&plus.t * &dp)) + side(minus, &(&minus.t * &dm)))
                        * I
                        * scale;
                    out.push(dx);
                    out.push(dt);
                }
                Ok(out)
            }
            _ => Err(PoissonError::UnsupportedDimension(self.n())),
        }
    }

    /// Whether [`kernel_at`](Self::kernel_at) is available.
    pub fn has_pointwise_kernel(&self) -> bool {
        self.mode == KernelMode::ClosedForm || self.line.is_some()
    }

    /// Constant `C` with `‖K(x′,1)‖ ≤ C(1+|x′|²)^{−n/2}`; exact for the
    /// Laplacian, measured otherwise.
    pub fn decay_bound(&self) -> f64 {
        if let Some(c) = self.decay_constant {
            return c;
        }
        match self.mode {
            KernelMode::ClosedForm => laplacian_constant(self.n()),
            KernelMode::Spectral => measure_decay(self).map(|d| d.constant).unwrap_or(f64::NAN),
        }
    }
}

/// `(tT + xI)⁻¹`.
fn resolvent(t_block: &CMat, t: f64, x: f64) -> CMat {
    let m = t_block.nrows();
    let a = t_block * Complex64::from(t) + CMat::identity(m, m) * Complex64::from(x);
    a.lu().try_inverse().expect("spectrum of tT lies off the real axis")
}

/// Uniform lattice for sampled kernels: `size` points per axis, step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub h: f64,
    pub size: usize,
}

/// Spatial samples of `K(·, t)` on the centered lattice `x = (j − size/2)h`.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub dim: usize,
    pub m: usize,
    pub t: f64,
    pub spec: GridSpec,
    /// One array per matrix entry `(α, β)` (row-major), each of length
    /// `size^dim`, lattice in row-major order.
    pub entries: Vec<Vec<Complex64>>,
    /// Largest `‖P̂‖` on the frequency rim; bounds the aliasing error.
    pub rim: f64,
}

impl KernelGrid {
    /// Inverse DFT of `ξ′ ↦ P̂(ξ′, t)` on the lattice dual to `spec`.
    pub fn compute(kernel: &PoissonKernel, t: f64, spec: GridSpec) -> Result<Self, PoissonError> {
        let dim = kernel.n() - 1;
        if !(1..=2).contains(&dim) {
            return Err(PoissonError::UnsupportedDimension(kernel.n()));
        }
        let m = kernel.m();
        let size = spec.size;
        let total = size.pow(dim as u32);
        let dxi = 2.0 * std::f64::consts::PI / (size as f64 * spec.h);
        let wrap = |k: usize| -> f64 {
            if k < size / 2 {
                k as f64
            } else {
                k as f64 - size as f64
            }
        };
        let freq = |idx: usize| -> Vec<f64> {
            if dim == 1 {
                vec![wrap(idx) * dxi]
            } else {
                vec![wrap(idx / size) * dxi, wrap(idx % size) * dxi]
            }
        };
        let symbols: Result<Vec<CMat>, PoissonError> = (0..total)
            .into_par_iter()
            .map(|idx| kernel.symbol(&freq(idx), t))
            .collect();
        let symbols = symbols?;
        let on_rim = |idx: usize| -> bool {
            if dim == 1 {
                idx == size / 2
            } else {
                idx / size == size / 2 || idx % size == size / 2
            }
        };
        let rim = (0..total)
            .filter(|&i| on_rim(i))
            .map(|i| spectral_norm(&symbols[i]))
            .fold(0.0, f64::max);
        if rim > RIM_CAP {
            return Err(PoissonError::Rim {
                rim,
                cap: RIM_CAP,
                t,
            });
        }
        let norm = 1.0 / (size as f64 * spec.h).powi(dim as i32);
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(size);
        let mut entries = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                let mut buf: Vec<Complex64> = symbols.iter().map(|s| s[(a, b)]).collect();
                if dim == 1 {
                    fft.process(&mut buf);
                } else {
                    for row in buf.chunks_mut(size) {
                        fft.process(row);
                    }
                    let mut col = vec![Complex64::new(0.0, 0.0); size];
                    for c in 0..size {
                        for r in 0..size {
                            col[r] = buf[r * size + c];
                        }
                        fft.process(&mut col);
                        for r in 0..size {
                            buf[r * size + c] = col[r];
                        }
                    }
                }
                // Shift to centered order and normalize.
                let mut out = vec![Complex64::new(0.0, 0.0); total];
                let half = size / 2;
                for (idx, v) in buf.into_iter().enumerate() {
                    let target = if dim == 1 {
                        (idx + half) % size
                    } else {
                        let r = (idx / size + half) % size;
                        let c = (idx % size + half) % size;
                        r * size + c
                    };
                    out[target] = v * norm;
                }
                entries.push(out);
            }
        }
        Ok(Self {
            dim,
            m,
            t,
            spec,
            entries,
            rim,
        })
    }

    pub fn len(&self) -> usize {
        self.spec.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of lattice point `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let size = self.spec.size;
        let c = |j: usize| (j as f64 - (size / 2) as f64) * self.spec.h;
        if self.dim == 1 {
            vec![c(idx)]
        } else {
            vec![c(idx / size), c(idx % size)]
        }
    }

    pub fn at(&self, idx: usize) -> CMat {
        CMat::from_fn(self.m, self.m, |a, b| self.entries[a * self.m + b][idx])
    }

    /// Lattice quadrature of `∫ K(x′, t) dx′`.
    pub fn integral(&self) -> CMat {
        let w = self.spec.h.powi(self.dim as i32);
        CMat::from_fn(self.m, self.m, |a, b| {
            self.entries[a * self.m + b].iter().sum::<Complex64>() * w
        })
    }

    /// Indices whose coordinates all lie in the central half of the lattice.
    pub fn central_half(&self) -> Vec<usize> {
        let size = self.spec.size;
        let ok = |j: usize| j >= size / 4 && j < 3 * size / 4;
        (0..self.len())
            .filter(|&i| {
                if self.dim == 1 {
                    ok(i)
                } else {
                    ok(i / size) && ok(i % size)
                }
            })
            .collect()
    }
}

/// Least-squares decay fit of `log‖K(x′,1)‖` against `log(1+|x′|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// `max ‖K(x′,1)‖ (1+|x′|²)^{n/2}` over the fit samples.
    pub constant: f64,
}

/// Fits on radii log-spaced in `[2, 256]` along the first axis and the diagonal.
pub fn measure_decay(kernel: &PoissonKernel) -> Result<DecayFit, PoissonError> {
    let n = kernel.n();
    let dim = n - 1;
    if !kernel.has_pointwise_kernel() {
        return Err(PoissonError::UnsupportedDimension(n));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut constant: f64 = 0.0;
    let dirs: Vec<Vec<f64>> = if dim == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![vec![1.0, 0.0], vec![s, s]]
    };
    for dir in &dirs {
        for i in 0..=64 {
            let r = 2f64 * 128f64.powf(i as f64 / 64.0);
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            let k = spectral_norm(&kernel.kernel_at(&x, 1.0)?);
            let lx = (1.0 + r * r).ln();
            xs.push(lx);
            ys.push(k.ln());
            constant = constant.max(k * (1.0 + r * r).powf(n as f64 / 2.0));
        }
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    // Near the origin the norm is largest; include the profile there too.
    for i in 0..=64 {
        let r = 2.0 * i as f64 / 64.0;
        let mut x = vec![0.0; dim];
        x[0] = r;
        let k = spectral_norm(&kernel.kernel_at(&x, 1.0)?);
        constant = constant.max(k * (1.0 + r * r).powf(n as f64 / 2.0));
    }
    Ok(DecayFit {
        exponent: sxy / sxx,
        constant,
    })
}

/// `max(|∫K(·,t) − I|, max_i ‖P̂(εe_i, t) − I‖)` with `ε = 10⁻⁹`: the lattice
/// integral checks the spatial samples, the second term checks that the
/// symbol is continuous at the origin, where it is defined to be `I`.
pub fn normalization_defect(grid: &KernelGrid, kernel: &PoissonKernel) -> Result<f64, PoissonError> {
    let m = grid.m;
    let lattice = spectral_norm(&(grid.integral() - CMat::identity(m, m)));
    let mut cont: f64 = 0.0;
    for axis in 0..grid.dim {
        for sign in [1.0, -1.0] {
            let mut xi = vec![0.0; grid.dim];
            xi[axis] = sign * 1e-9;
            let p = kernel.symbol(&xi, grid.t)?;
            cont = cont.max(spectral_norm(&(p - CMat::identity(m, m))));
        }
    }
    Ok(lattice.max(cont))
}

/// Centered-difference residual of `L` applied to each kernel column on the
/// window `[−1, 1] × [t_lo, t_hi]` (n = 2), with spatial step `h`.
///
/// The kernel layers come from [`KernelGrid`] with `size` lattice points;
/// the periodized kernel is itself a null solution, so only the
/// discretization error `O(h²)` remains.
pub fn pde_residual(
    kernel: &PoissonKernel,
    h: f64,
    size: usize,
    t_lo: f64,
    t_hi: f64,
) -> Result<f64, PoissonError> {
    if kernel.n() != 2 {
        return Err(PoissonError::UnsupportedDimension(kernel.n()));
    }
    let m = kernel.m();
    let layers = ((t_hi - t_lo) / h).round() as usize;
    let spec = GridSpec { h, size };
    let ts: Vec<f64> = (0..layers + 3).map(|i| t_lo + (i as f64 - 1.0) * h).collect();
    let half_width = (1.0 / h).round() as usize;
    let center = size / 2;
    let window: Vec<Result<Vec<CMat>, PoissonError>> = ts
        .par_iter()
        .map(|&t| {
            let g = KernelGrid::compute(kernel, t, spec)?;
            Ok((center - half_width - 1..=center + half_width + 1)
                .map(|j| g.at(j))
                .collect())
        })
        .collect();
    let window: Vec<Vec<CMat>> = window.into_iter().collect::<Result<_, _>>()?;
    let sys = kernel.system();
    let h2 = h * h;
    let mut worst: f64 = 0.0;
    for ti in 1..=layers + 1 {
        for xi in 1..=2 * half_width + 1 {
            let k = |dt: isize, dx: isize| -> &CMat {
                &window[(ti as isize + dt) as usize][(xi as isize + dx) as usize]
            };
            let dxx = (k(0, 1) - k(0, 0) * Complex64::from(2.0) + k(0, -1)) / Complex64::from(h2);
            let dtt = (k(1, 0) - k(0, 0) * Complex64::from(2.0) + k(-1, 0)) / Complex64::from(h2);
            let dxt = (k(1, 1) - k(1, -1) - k(-1, 1) + k(-1, -1)) / Complex64::from(4.0 * h2);
            let second = |j: usize, l: usize| -> &CMat {
                match (j, l) {
                    (0, 0) => &dxx,
                    (1, 1) => &dtt,
                    _ => &dxt,
                }
            };
            for beta in 0..m {
                for alpha in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..2 {
                        for l in 0..2 {
                            let d = second(j, l);
                            for g in 0..m {
                                acc += sys.coeff(j, l, alpha, g) * d[(g, beta)];
                            }
                        }
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Summary produced by [`kernel_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiagnostics {
    pub label: String,
    pub mode: KernelMode,
    /// `(t, defect)` pairs.
    pub normalization_defect: Vec<(f64, f64)>,
    pub decay_exponent: Option<f64>,
    pub decay_constant: Option<f64>,
    /// Finite-difference residual of `L K` on `[−1,1]×[0.5,1.5]`, `h = 2⁻⁸`.
    pub pde_residual: Option<f64>,
}

/// Normalization per height, decay fit, and the PDE residual (n = 2).
pub fn kernel_diagnostics(
    kernel: &mut PoissonKernel,
    t_list: &[f64],
) -> Result<KernelDiagnostics, PoissonError> {
    let n = kernel.n();
    let mut defects = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let spec = if n == 2 {
            GridSpec {
                h: (t / 16.0).min(1.0 / 16.0),
                size: 1 << 16,
            }
        } else {
            GridSpec {
                h: (t / 8.0).min(1.0 / 8.0),
                size: 256,
            }
        };
        let grid = KernelGrid::compute(kernel, t, spec)?;
        defects.push((t, normalization_defect(&grid, kernel)?));
    }
    let fit = if kernel.has_pointwise_kernel() {
        Some(measure_decay(kernel)?)
    } else {
        None
    };
    let residual = if n == 2 {
        Some(pde_residual(kernel, 1.0 / 256.0, 1 << 14, 0.5, 1.5)?)
    } else {
        None
    };
    kernel.normalization_defect = defects.iter().map(|d| d.1).reduce(f64::max);
    if let Some(f) = fit {
        kernel.decay_constant = Some(f.constant);
    }
    Ok(KernelDiagnostics {
        label: kernel.system().label().to_string(),
        mode: kernel.mode(),
        normalization_defect: defects,
        decay_exponent: fit.map(|f| f.exponent),
        decay_constant: fit.map(|f| f.constant),
        pde_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn lame2() -> EllipticSystem {
        EllipticSystem::lame(2, c(1.0), c(1.0)).unwrap().0
    }

    #[test]
    fn laplacian_closed_form_values() {
        assert_relative_eq!(
            laplacian_kernel(2, &[0.0]).unwrap(),
            1.0 / std::f64::consts::PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            laplacian_kernel(3, &[1.0, 1.0]).unwrap(),
            3f64.powf(-1.5) / (2.0 * std::f64::consts::PI),
            max_relative = 1e-14
        );
        assert!(laplacian_kernel(4, &[0.0; 3]).is_err());
    }

    #[test]
    fn spectral_laplacian_matches_exponential() {
        let lap = EllipticSystem::laplacian(2).unwrap();
        let p = spectral_symbol(&lap, &[3.0], 0.5).unwrap();
        assert_relative_eq!(p[(0, 0)].re, (-1.5f64).exp(), max_relative = 1e-12);
        assert!(p[(0, 0)].im.abs() < 1e-13);
    }

    #[test]
    fn symbol_at_zero_height_is_identity() {
        let p = spectral_symbol(&lame2(), &[0.7], 0.0).unwrap();
        assert_eq!(p, CMat::identity(2, 2));
    }

    #[test]
    fn lame_stable_roots_are_double() {
        let b = StableBasis::compute(&lame2(), &[1.0]).unwrap();
        for r in b.roots() {
            assert!((r - I).norm() < 1e-6, "{r}");
        }
    }

    #[test]
    fn lame_symbol_solves_the_ode() {
        // A₂v″ + iA₁v′ − A₀v = 0 by central differences of P̂(ξ, ·).
        let sys = lame2();
        let xi = 1.3;
        let pencil = sys.symbol_pencil(&[xi]);
        let t = 0.8;
        let h = 1e-3;
        let p = |s: f64| spectral_symbol(&sys, &[xi], s).unwrap();
        let d2 = (p(t + h) - p(t) * c(2.0) + p(t - h)) / c(h * h);
        let d1 = (p(t + h) - p(t - h)) / c(2.0 * h);
        let r = &pencil.a2 * d2 + &pencil.a1 * d1 * I - &pencil.a0 * p(t);
        assert!(spectral_norm(&r) < 1e-5, "{}", spectral_norm(&r));
        assert!(spectral_norm(&p(1.0)) < 1.0);
    }

    #[test]
    fn semigroup_holds() {
        let lap = EllipticSystem::laplacian(2).unwrap();
        let xis: Vec<Vec<f64>> = (1..20).map(|k| vec![k as f64 * 0.37 - 3.0]).collect();
        assert!(semigroup_residual(&lap, &xis, 0.3, 0.9).unwrap() < 1e-12);
        assert!(semigroup_residual(&lame2(), &xis, 0.7, 0.7).unwrap() < 1e-10);
        assert!(semigroup_residual(&lame2(), &xis, 0.0, 0.7).unwrap() == 0.0);
    }

    #[test]
    fn resolvent_kernel_matches_closed_form() {
        let lap = EllipticSystem::laplacian(2).unwrap();
        let spectral = PoissonKernel::spectral(lap.clone()).unwrap();
        let closed = PoissonKernel::new(lap).unwrap();
        assert_eq!(closed.mode(), KernelMode::ClosedForm);
        for &(x, t) in &[(0.0, 1.0), (0.3, 0.2), (-5.0, 2.0)] {
            let a = spectral.kernel_at(&[x], t).unwrap()[(0, 0)];
            let b = closed.kernel_at(&[x], t).unwrap()[(0, 0)].re;
            assert_relative_eq!(a.re, b, max_relative = 1e-12);
            assert!(a.im.abs() < 1e-14);
            let ga = spectral.kernel_gradient_at(&[x], t).unwrap();
            let gb = closed.kernel_gradient_at(&[x], t).unwrap();
            for (u, v) in ga.iter().zip(&gb) {
                assert!((u[(0, 0)] - v[(0, 0)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_grid_matches_closed_form() {
        let k = PoissonKernel::new(EllipticSystem::laplacian(2).unwrap()).unwrap();
        let g = KernelGrid::compute(&k, 1.0, GridSpec { h: 1.0 / 16.0, size: 1 << 16 }).unwrap();
        let mut worst: f64 = 0.0;
        for idx in g.central_half() {
            let x = g.coords(idx);
            let exact = laplacian_kernel(2, &x).unwrap();
            worst = worst.max((g.at(idx)[(0, 0)].re - exact).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn kernel_grid_rejects_coarse_lattice() {
        let k = PoissonKernel::new(EllipticSystem::laplacian(2).unwrap()).unwrap();
        let r = KernelGrid::compute(&k, 0.01, GridSpec { h: 0.5, size: 64 });
        assert!(matches!(r, Err(PoissonError::Rim { .. })));
    }

    #[test]
    fn periodic_kernel_matches_lattice_sum() {
        let lap = EllipticSystem::laplacian(2).unwrap();
        let p = 2.0 * std::f64::consts::PI;
        for kernel in [
            PoissonKernel::new(lap.clone()).unwrap(),
            PoissonKernel::spectral(lap.clone()).unwrap(),
            PoissonKernel::new(lame2()).unwrap(),
        ] {
            let (x, t) = (0.7, 0.4);
            let per = kernel.periodic_kernel(x, t, p, true).unwrap();
            let mut direct = kernel.kernel_at(&[x], t).unwrap();
            let mut ddx = kernel.kernel_gradient_at(&[x], t).unwrap();
            for k in 1..200_000 {
                let kf = k as f64 * p;
                direct += kernel.kernel_at(&[x + kf], t).unwrap() + kernel.kernel_at(&[x - kf], t).unwrap();
                let gp = kernel.kernel_gradient_at(&[x + kf], t).unwrap();
                let gm = kernel.kernel_gradient_at(&[x - kf], t).unwrap();
                for j in 0..2 {
                    ddx[j] += &gp[j] + &gm[j];
                }
            }
            assert!(spectral_norm(&(&per[0] - direct)) < 1e-6);
            assert!(spectral_norm(&(&per[1] - &ddx[0])) < 1e-6);
            assert!(spectral_norm(&(&per[2] - &ddx[1])) < 1e-6);
        }
    }

    #[test]
    fn first_moment_matches_quadrature() {
        let k = PoissonKernel::new(lame2()).unwrap();
        let m = &k.first_moments().unwrap()[0];
        // Symmetric truncation of ∫ z P(z) dz.
        let rule = crate::quadrature::gl32();
        let mut acc = CMat::zeros(2, 2);
        let mut lo = 0.0;
        for j in 0..40 {
            let hi = 2f64.powi(j - 4);
            for (z, w) in rule.mapped(lo, hi) {
                let sym = k.kernel_at(&[z], 1.0).unwrap() - k.kernel_at(&[-z], 1.0).unwrap();
                acc += sym * Complex64::from(w * z);
            }
            lo = hi;
        }
        assert!(spectral_norm(&(&acc - m)) < 1e-5, "{m} vs {acc}");
    }

    #[test]
    fn not_elliptic_is_rejected() {
        let (bad, ok) = EllipticSystem::lame(2, c(1.0), c(-2.5)).unwrap();
        assert!(!ok);
        assert!(matches!(
            PoissonKernel::new(bad),
            Err(PoissonError::NotElliptic { .. })
        ));
    }
}
