//! Numerical laboratory for Dirichlet problems in the upper half-space
//! `ℝⁿ₊ = {(x′, t) : x′ ∈ ℝ^{n−1}, t > 0}` with generalized Hölder and
//! Morrey–Campanato boundary data.
//!
//! - [`growthfn`]: growth functions, their integral conditions, the
//!   `W`-transform and dilation indices.
//! - [`elliptic`]: constant-coefficient second-order systems and the
//!   Legendre–Hadamard constant.
//! - [`poisson`]: Poisson kernels via the stable invariant subspace of the
//!   symbol pencil.
//! - [`extension`]: `u = P_t ∗ f`, its gradient, square functions and traces.
//! - [`seminorms`]: oscillation, Hölder, Morrey–Campanato, Luxemburg and the
//!   solution seminorms.
//! - [`dyadic`]: dyadic trees, stopping cubes and the John–Nirenberg engine.
//! - [`harmonic`]: closed-form harmonic extensions used as oracles.
//!
//! The real-valued calculus is generic over [`scalar::Real`] (`f32`, `f64`);
//! the aliases below fix `f64`.

pub mod dyadic;
pub mod elliptic;
pub mod extension;
pub mod growthfn;
pub mod harmonic;
pub mod poisson;
pub mod quadrature;
pub mod scalar;
pub mod seminorms;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use elliptic::{EllipticSystem, SystemSpec};
pub use extension::{BoundaryDatum, Extender, Method};
pub use harmonic::Harmonic;
pub use poisson::PoissonKernel;
pub use scalar::Real;

pub type GrowthFunction = growthfn::GrowthFunction<f64>;
pub type CubeSweep = seminorms::CubeSweep<f64>;
pub type Cube = seminorms::Cube<f64>;
pub type DyadicGrid = dyadic::DyadicGrid<f64>;
pub type LatticeField = dyadic::LatticeField<f64>;
pub type SquareQuadrature = extension::SquareQuadrature<f64>;
