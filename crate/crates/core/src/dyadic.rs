//! Half-open dyadic trees over a root cube `Q₀`, lattice data, the localized
//! dyadic maximal function, stopping-time cubes, and a John–Nirenberg engine
//! for pair families `(G_Q, H_Q)`.
//!
//! Data live on the finest lattice of `Q₀` (depth `D`, `2^{D·d}` cells) and
//! all measures are cell counts, so every level-set statement is exact for
//! lattice-piecewise-constant data.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extension::{conical_square, SquareQuadrature};
use crate::growthfn::GrowthFunction;
use crate::scalar::Real;
use crate::seminorms::luxemburg_norm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DyadicError {
    #[error("point {0:?} lies outside the root cube")]
    OutsideRoot(Vec<f64>),
    #[error("density of F in the root is {density}, not below beta = {beta}")]
    Density { density: f64, beta: f64 },
    #[error("beta = {0} must lie in (0, 1)")]
    Beta(f64),
    #[error("lattice data has {got} cells, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("stopping cube {0:?} violates the stopping inequalities")]
    Stopping(DyadicCube),
    #[error("dimension {0} is not supported (1 or 2)")]
    Dimension(usize),
}

/// Root cube `origin + [0, side)^dim` with a finest lattice of depth `depth`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicGrid<T> {
    pub origin: Vec<T>,
    pub side: T,
    pub depth: u32,
}

/// Dyadic subcube of the root: level `k` and integer coordinates in `0..2^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DyadicCube {
    pub level: u32,
    pub coords: Vec<u64>,
}

impl DyadicCube {
    pub fn root(dim: usize) -> Self {
        Self {
            level: 0,
            coords: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The `2^d` children, in lattice order.
    pub fn children(&self) -> Vec<DyadicCube> {
        let d = self.dim();
        (0..1u64 << d)
            .map(|bits| DyadicCube {
                level: self.level + 1,
                coords: (0..d)
                    .map(|a| 2 * self.coords[a] + ((bits >> a) & 1))
                    .collect(),
            })
            .collect()
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube {
            level: self.level - 1,
            coords: self.coords.iter().map(|c| c / 2).collect(),
        })
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level
            && other
                .coords
                .iter()
                .zip(&self.coords)
                .all(|(&o, &s)| o >> (other.level - self.level) == s)
    }

    /// All cubes of `level` inside `self`.
    pub fn descendants(&self, level: u32) -> Vec<DyadicCube> {
        let d = self.dim();
        let shift = level.saturating_sub(self.level);
        let per = 1u64 << shift;
        let total = per.pow(d as u32);
        (0..total)
            .map(|mut j| DyadicCube {
                level,
                coords: (0..d)
                    .map(|a| {
                        let i = j % per;
                        j /= per;
                        (self.coords[a] << shift) + i
                    })
                    .collect(),
            })
            .collect()
    }

    /// Half-open interval bounds `[lo, hi)` per axis in `grid` coordinates.
    pub fn bounds<T: Real>(&self, grid: &DyadicGrid<T>) -> Vec<(T, T)> {
        let s = grid.side / T::from_count(1usize << self.level);
        self.coords
            .iter()
            .zip(&grid.origin)
            .map(|(&c, &o)| {
                let lo = o + s * T::from_count(c as usize);
                (lo, lo + s)
            })
            .collect()
    }
}

impl<T: Real> DyadicGrid<T> {
    pub fn new(origin: Vec<T>, side: T, depth: u32) -> Result<Self, DyadicError> {
        if !(1..=2).contains(&origin.len()) {
            return Err(DyadicError::Dimension(origin.len()));
        }
        Ok(Self {
            origin,
            side,
            depth,
        })
    }

    /// `[0,1)` with `2^14` cells, or `[0,1)²` with `2^7` cells per axis.
    pub fn unit(dim: usize) -> Result<Self, DyadicError> {
        Self::new(vec![T::zero(); dim], T::one(), if dim == 1 { 14 } else { 7 })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn cells_per_axis(&self) -> u64 {
        1 << self.depth
    }

    pub fn cell_count(&self) -> usize {
        (self.cells_per_axis() as usize).pow(self.dim() as u32)
    }

    pub fn cell_side(&self) -> T {
        self.side / T::from_count(self.cells_per_axis() as usize)
    }

    pub fn side_of(&self, q: &DyadicCube) -> T {
        self.side / T::from_count(1usize << q.level)
    }

    /// Linear index of the finest cell with lattice coordinates `c`.
    pub fn cell_index(&self, c: &[u64]) -> usize {
        let n = self.cells_per_axis();
        c.iter().rev().fold(0u64, |acc, &v| acc * n + v) as usize
    }

    /// Finest cell containing `x` (half-open convention).
    pub fn locate(&self, x: &[T]) -> Result<DyadicCube, DyadicError> {
        let n = self.cells_per_axis();
        let h = self.cell_side();
        let mut coords = Vec::with_capacity(self.dim());
        for (a, &v) in x.iter().enumerate() {
            let r = (v - self.origin[a]) / h;
            if !(r >= T::zero()) || r >= T::from_count(n as usize) {
                return Err(DyadicError::OutsideRoot(x.iter().map(|v| v.as_f64()).collect()));
            }
            coords.push(r.floor().to_u64().unwrap_or(0).min(n - 1));
        }
        Ok(DyadicCube {
            level: self.depth,
            coords,
        })
    }

    /// Finest-cell linear indices inside `q`, in `q`'s local lattice order.
    pub fn cells_of(&self, q: &DyadicCube) -> Vec<usize> {
        q.descendants(self.depth)
            .iter()
            .map(|c| self.cell_index(&c.coords))
            .collect()
    }

    /// Center of each finest cell, by linear index.
    pub fn cell_center(&self, index: usize) -> Vec<T> {
        let n = self.cells_per_axis() as usize;
        let h = self.cell_side();
        let mut j = index;
        (0..self.dim())
            .map(|a| {
                let i = j % n;
                j /= n;
                self.origin[a] + h * (T::from_count(i) + T::lit(0.5))
            })
            .collect()
    }

    /// Every cube of levels `0..=max_level`, coarse to fine.
    pub fn cubes_to(&self, max_level: u32) -> Vec<DyadicCube> {
        let root = DyadicCube::root(self.dim());
        (0..=max_level.min(self.depth))
            .flat_map(|k| root.descendants(k))
            .collect()
    }
}

/// Values on the finest lattice of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeField<T> {
    pub grid: DyadicGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> LatticeField<T> {
    pub fn new(grid: DyadicGrid<T>, values: Vec<T>) -> Result<Self, DyadicError> {
        if values.len() != grid.cell_count() {
            return Err(DyadicError::Shape {
                got: values.len(),
                expected: grid.cell_count(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_centers(grid: DyadicGrid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.cell_count())
            .map(|i| f(&grid.cell_center(i)))
            .collect();
        Self { grid, values }
    }

    /// Uses `mean(lo, hi)`, the exact mean of the datum over each cell, given
    /// per-axis bounds.
    pub fn from_cell_means(grid: DyadicGrid<T>, mean: impl Fn(&[(T, T)]) -> T) -> Self {
        let n = grid.cells_per_axis();
        let d = grid.dim();
        let values = (0..grid.cell_count())
            .map(|i| {
                let mut j = i as u64;
                let coords = (0..d)
                    .map(|_| {
                        let c = j % n;
                        j /= n;
                        c
                    })
                    .collect();
                let cell = DyadicCube {
                    level: grid.depth,
                    coords,
                };
                mean(&cell.bounds(&grid))
            })
            .collect();
        Self { grid, values }
    }

    pub fn mean_over(&self, q: &DyadicCube) -> T {
        let cells = self.grid.cells_of(q);
        let s: T = cells.iter().map(|&i| self.values[i]).sum();
        s / T::from_count(cells.len())
    }

    /// Largest ancestor mean of `|f|` for the finest cell containing `x`:
    /// `M^d_{Q₀} f(x)`.
    pub fn dyadic_maximal(&self, x: &[T]) -> Result<T, DyadicError> {
        let mut cube = self.grid.locate(x)?;
        let mut best = T::neg_infinity();
        loop {
            let cells = self.grid.cells_of(&cube);
            let m = cells.iter().map(|&i| self.values[i].abs()).sum::<T>()
                / T::from_count(cells.len());
            best = best.max(m);
            match cube.parent() {
                Some(p) => cube = p,
                None => return Ok(best),
            }
        }
    }
}

/// `M^d_Q g` at every finest cell of `Q`, for `g` given in `Q`'s local cell
/// order (`values.len() = 2^{(D−k)d}`).
pub fn local_maximal<T: Real>(values: &[T], dim: usize) -> Vec<T> {
    // Mean pyramid bottom-up in local coordinates, then max top-down.
    let n_total = values.len();
    let levels = {
        let mut l = 0usize;
        while (1usize << (l * dim)) < n_total {
            l += 1;
        }
        l
    };
    let mut pyramid: Vec<Vec<T>> = vec![values.iter().map(|v| v.abs()).collect()];
    for l in (0..levels).rev() {
        let prev = pyramid.last().expect("non-empty");
        let per = 1usize << l;
        let fine = per * 2;
        let mut cur = vec![T::zero(); per.pow(dim as u32)];
        for (fi, &v) in prev.iter().enumerate() {
            let (cx, cy) = if dim == 1 {
                (fi / 2, 0)
            } else {
                ((fi % fine) / 2, (fi / fine) / 2)
            };
            cur[cy * per + cx] = cur[cy * per + cx] + v;
        }
        let k = T::from_count(1usize << dim);
        cur.iter_mut().for_each(|v| *v = *v / k);
        pyramid.push(cur);
    }
    pyramid.reverse();
    let mut best = pyramid[0].clone();
    for l in 1..pyramid.len() {
        let per = 1usize << l;
        let coarse = per / 2;
        let mut next = pyramid[l].clone();
        for (fi, v) in next.iter_mut().enumerate() {
            let ci = if dim == 1 {
                fi / 2
            } else {
                ((fi / per) / 2) * coarse + (fi % per) / 2
            };
            *v = v.max(best[ci]);
        }
        best = next;
    }
    best
}

/// Maximal dyadic cubes with `|F ∩ Q| / |Q| > β`, found top-down.
///
/// Each returned cube satisfies `β < |F∩Q_j|/|Q_j| ≤ 2^d β`; a violation is
/// reported as [`DyadicError::Stopping`].
pub fn stopping_decomposition<T: Real>(
    grid: &DyadicGrid<T>,
    mask: &[bool],
    beta: f64,
) -> Result<Vec<DyadicCube>, DyadicError> {
    if mask.len() != grid.cell_count() {
        return Err(DyadicError::Shape {
            got: mask.len(),
            expected: grid.cell_count(),
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DyadicError::Beta(beta));
    }
    let density = |q: &DyadicCube| {
        let cells = grid.cells_of(q);
        cells.iter().filter(|&&i| mask[i]).count() as f64 / cells.len() as f64
    };
    let root = DyadicCube::root(grid.dim());
    let d0 = density(&root);
    if d0 >= beta {
        return Err(DyadicError::Density { density: d0, beta });
    }
    let bound = beta * (1u64 << grid.dim()) as f64;
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        if q.level == grid.depth {
            continue;
        }
        for c in q.children() {
            let dc = density(&c);
            if dc > beta {
                if dc > bound {
                    return Err(DyadicError::Stopping(c));
                }
                out.push(c);
            } else {
                stack.push(c);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pair of nonnegative lattice functions `(G_Q, H_Q)` indexed by dyadic cubes,
/// evaluated on the finest cells of `Q` in local order.
pub trait PairFamily<T: Real>: Sync {
    fn label(&self) -> String;
    fn grid(&self) -> &DyadicGrid<T>;
    fn g(&self, q: &DyadicCube) -> Vec<T>;
    fn h(&self, q: &DyadicCube) -> Vec<T>;
}

/// Pointwise checks of `G_Q ≤ H_Q` and of the chain condition
/// `G_Q(x) ≤ G_{Q′}(x) + H_Q(y)` for `x ∈ Q′`, `y` in the parent of `Q′`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub order_checks: usize,
    pub order_violations: usize,
    pub chain_checks: usize,
    pub chain_violations: usize,
}

impl FamilyCheck {
    pub fn holds(&self) -> bool {
        self.order_violations == 0 && self.chain_violations == 0
    }
}

/// One row of the level-set profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiRow<T> {
    pub t: T,
    pub xi: T,
    pub bound: T,
}

/// Output of [`jn_profile`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JnProfile<T> {
    pub alpha: T,
    pub m_alpha: T,
    pub m_witness: Option<DyadicCube>,
    pub rows: Vec<XiRow<T>>,
    pub holds: bool,
    pub check: FamilyCheck,
    pub probed: usize,
}

struct Evaluated<T> {
    cube: DyadicCube,
    g: Vec<T>,
    h: Vec<T>,
}

fn evaluate_family<T: Real, F: PairFamily<T> + ?Sized>(
    family: &F,
    max_level: u32,
) -> Vec<Evaluated<T>> {
    family
        .grid()
        .cubes_to(max_level)
        .into_par_iter()
        .map(|cube| {
            let g = family.g(&cube);
            let h = family.h(&cube);
            Evaluated { cube, g, h }
        })
        .collect()
}

/// `inf{λ ≥ 0 : #{H > λ} ≤ α·N}` by sorting.
pub fn alpha_threshold<T: Real>(h: &[T], alpha: T) -> T {
    let mut s = h.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let k = (alpha * T::from_count(s.len())).floor().to_usize().unwrap_or(0);
    if k >= s.len() {
        T::zero()
    } else {
        s[k].max(T::zero())
    }
}

fn family_check<T: Real>(evaluated: &[Evaluated<T>], grid: &DyadicGrid<T>, seed: u64) -> FamilyCheck {
    let slack = T::lit(1e-9);
    let mut order_checks = 0;
    let mut order_violations = 0;
    for e in evaluated {
        for (g, h) in e.g.iter().zip(&e.h) {
            order_checks += 1;
            if *g > *h + slack * (T::one() + h.abs()) {
                order_violations += 1;
            }
        }
    }
    let index: HashMap<&DyadicCube, usize> =
        evaluated.iter().enumerate().map(|(i, e)| (&e.cube, i)).collect();
    let max_level = evaluated.iter().map(|e| e.cube.level).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain_checks = 0;
    let mut chain_violations = 0;
    if max_level >= 1 {
        for _ in 0..4096 {
            let qi = rng.gen_range(0..evaluated.len());
            let q = &evaluated[qi];
            if q.cube.level >= max_level {
                continue;
            }
            let sub_level = rng.gen_range(q.cube.level + 1..=max_level);
            let subs = q.cube.descendants(sub_level);
            let qp = &subs[rng.gen_range(0..subs.len())];
            let parent = qp.parent().expect("level ≥ 1");
            let (Some(&ip), Some(_)) = (index.get(qp), index.get(&parent)) else {
                continue;
            };
            // Local positions of finest cells of Q′ and of its parent inside Q.
            let q_cells = grid.cells_of(&q.cube);
            let pos: HashMap<usize, usize> =
                q_cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
            let qp_cells = grid.cells_of(qp);
            let par_cells = grid.cells_of(&parent);
            let xk = rng.gen_range(0..qp_cells.len());
            let yk = rng.gen_range(0..par_cells.len());
            let x_in_q = pos[&qp_cells[xk]];
            let y_in_q = pos[&par_cells[yk]];
            let lhs = q.g[x_in_q];
            let rhs = evaluated[ip].g[xk] + q.h[y_in_q];
            chain_checks += 1;
            if lhs > rhs + slack * (T::one() + rhs.abs()) {
                chain_violations += 1;
            }
        }
    }
    FamilyCheck {
        order_checks,
        order_violations,
        chain_checks,
        chain_violations,
    }
}

/// Measures `m_α = max_Q inf{λ : |{H_Q > λ}| ≤ α|Q|}` and
/// `Ξ(t) = max_Q |{G_Q > t}|/|Q|` over cubes of levels `0..=max_level`, and
/// checks `Ξ(t) ≤ α^{−1} exp(−log(α^{−1}) t / m_α)` on `ts`.
pub fn jn_profile<T: Real, F: PairFamily<T> + ?Sized>(
    family: &F,
    alpha: T,
    ts: &[T],
    max_level: u32,
    seed: u64,
) -> JnProfile<T> {
    let evaluated = evaluate_family(family, max_level);
    jn_from_evaluated(&evaluated, family.grid(), alpha, ts, seed)
}

fn jn_from_evaluated<T: Real>(
    evaluated: &[Evaluated<T>],
    grid: &DyadicGrid<T>,
    alpha: T,
    ts: &[T],
    seed: u64,
) -> JnProfile<T> {
    let mut m_alpha = T::zero();
    let mut m_witness = None;
    for e in evaluated {
        let m = alpha_threshold(&e.h, alpha);
        if m > m_alpha || m_witness.is_none() {
            m_alpha = m_alpha.max(m);
            m_witness = Some(e.cube.clone());
        }
    }
    let sorted: Vec<Vec<T>> = evaluated
        .iter()
        .map(|e| {
            let mut g = e.g.clone();
            g.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            g
        })
        .collect();
    let log_inv = -alpha.ln();
    let rows: Vec<XiRow<T>> = ts
        .iter()
        .map(|&t| {
            let xi = sorted
                .iter()
                .map(|g| {
                    let above = g.len() - g.partition_point(|v| *v <= t);
                    T::from_count(above) / T::from_count(g.len())
                })
                .fold(T::zero(), T::max);
            let bound = if m_alpha > T::zero() {
                (-log_inv * t / m_alpha).exp() / alpha
            } else {
                T::zero()
            };
            XiRow { t, xi, bound }
        })
        .collect();
    let holds = rows.iter().all(|r| r.xi <= r.bound);
    JnProfile {
        alpha,
        m_alpha,
        m_witness,
        rows,
        holds,
        check: family_check(evaluated, grid, seed),
        probed: evaluated.len(),
    }
}

/// Integrability conclusions drawn from a level-set profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrliczReport<T> {
    pub q: T,
    /// `max_Q (mean_Q G_Q^q)^{1/q}`.
    pub lq: T,
    /// `Γ(q+1)^{1/q} α^{−1/q} m_α / log(α^{−1})`.
    pub lq_bound: T,
    /// `max_Q ‖G_Q‖_{exp L, Q}`.
    pub exp: T,
    /// `(1 + α^{−1}) m_α / log(α^{−1})`.
    pub exp_bound: T,
    pub holds: bool,
}

/// Evaluates the `L^q` and `exp L` conclusions on the probed cubes.
pub fn orlicz_conclusions<T: Real, F: PairFamily<T> + ?Sized>(
    family: &F,
    profile: &JnProfile<T>,
    q: T,
    max_level: u32,
) -> OrliczReport<T> {
    let cubes = family.grid().cubes_to(max_level);
    let per: Vec<(T, T)> = cubes
        .par_iter()
        .map(|c| {
            let g = family.g(c);
            let n = T::from_count(g.len());
            let lq = (g.iter().map(|v| v.powf(q)).sum::<T>() / n).powf(T::one() / q);
            let w = vec![T::one() / n; g.len()];
            (lq, luxemburg_norm(&g, &w))
        })
        .collect();
    let lq = per.iter().map(|p| p.0).fold(T::zero(), T::max);
    let exp = per.iter().map(|p| p.1).fold(T::zero(), T::max);
    let alpha = profile.alpha;
    let log_inv = -alpha.ln();
    let gamma = T::lit(libm::tgamma(q.as_f64() + 1.0));
    let lq_bound = gamma.powf(T::one() / q) * alpha.powf(-T::one() / q) * profile.m_alpha / log_inv;
    let exp_bound = (T::one() + T::one() / alpha) * profile.m_alpha / log_inv;
    OrliczReport {
        q,
        lq,
        lq_bound,
        exp,
        exp_bound,
        holds: lq <= lq_bound && exp <= exp_bound,
    }
}

/// `G_Q = |f − f_Q|`, `H_Q = 2^d M^d_Q(|f − f_Q|)`.
pub struct BmoFamily<T> {
    pub field: LatticeField<T>,
}

impl<T: Real> BmoFamily<T> {
    pub fn new(field: LatticeField<T>) -> Self {
        Self { field }
    }

    /// `max_Q mean_Q |f − f_Q|` over levels `0..=max_level`: the dyadic BMO
    /// seminorm seen by the probe.
    pub fn bmo_norm(&self, max_level: u32) -> T {
        self.field
            .grid
            .cubes_to(max_level)
            .par_iter()
            .map(|q| {
                let g = self.g(q);
                g.iter().copied().sum::<T>() / T::from_count(g.len())
            })
            .reduce(T::zero, T::max)
    }

    /// Upper bound `2^d e ‖f‖_BMO` for `m_α` at `α = e^{−1}`, from the weak
    /// type (1,1) of the dyadic maximal function.
    pub fn threshold_bound(&self, max_level: u32) -> T {
        T::from_count(1 << self.field.grid.dim()) * T::E() * self.bmo_norm(max_level)
    }

    /// `(1 + e) e 2^d ‖f‖_BMO`, the resulting `exp L` bound.
    pub fn exp_bound(&self, max_level: u32) -> T {
        (T::one() + T::E()) * self.threshold_bound(max_level)
    }
}

impl<T: Real> PairFamily<T> for BmoFamily<T> {
    fn label(&self) -> String {
        "bmo".into()
    }

    fn grid(&self) -> &DyadicGrid<T> {
        &self.field.grid
    }

    fn g(&self, q: &DyadicCube) -> Vec<T> {
        let cells = self.field.grid.cells_of(q);
        let n = T::from_count(cells.len());
        let mean = cells.iter().map(|&i| self.field.values[i]).sum::<T>() / n;
        cells
            .iter()
            .map(|&i| (self.field.values[i] - mean).abs())
            .collect()
    }

    fn h(&self, q: &DyadicCube) -> Vec<T> {
        let d = self.field.grid.dim();
        let k = T::from_count(1 << d);
        local_maximal(&self.g(q), d).into_iter().map(|v| v * k).collect()
    }
}

type GradSq<'a, T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync + 'a>;

/// `G_Q = φ(ℓ(Q))^{−1} A(x′; ℓ(Q), 1)`, `H_Q = φ(ℓ(Q))^{−1} A(x′; ℓ(Q), 1 + 2√d)`,
/// with `A` the conical square function of `|∇u|²`, sampled at cell centers.
pub struct ConicalFamily<'a, T: Real> {
    grid: DyadicGrid<T>,
    grad_sq: GradSq<'a, T>,
    phi: GrowthFunction<T>,
    quad: SquareQuadrature<T>,
}

impl<'a, T: Real> ConicalFamily<'a, T> {
    pub fn new(
        grid: DyadicGrid<T>,
        grad_sq: impl Fn(&[T], T) -> T + Send + Sync + 'a,
        phi: GrowthFunction<T>,
        quad: SquareQuadrature<T>,
    ) -> Self {
        Self {
            grid,
            grad_sq: Arc::new(grad_sq),
            phi,
            quad,
        }
    }

    /// Wide aperture `1 + 2√d`.
    pub fn kappa(&self) -> T {
        T::one() + T::lit(2.0) * T::from_count(self.grid.dim()).sqrt()
    }

    fn sample(&self, q: &DyadicCube, kappa: T) -> Vec<T> {
        let ell = self.grid.side_of(q);
        let w = self.phi.eval(ell);
        let g = &self.grad_sq;
        self.grid
            .cells_of(q)
            .into_iter()
            .map(|i| {
                let x = self.grid.cell_center(i);
                conical_square(|y: &[T], s: T| g(y, s), &x, kappa, ell, &self.quad) / w
            })
            .collect()
    }
}

impl<T: Real> PairFamily<T> for ConicalFamily<'_, T> {
    fn label(&self) -> String {
        format!("conical/{}", self.phi.label())
    }

    fn grid(&self) -> &DyadicGrid<T> {
        &self.grid
    }

    fn g(&self, q: &DyadicCube) -> Vec<T> {
        self.sample(q, T::one())
    }

    fn h(&self, q: &DyadicCube) -> Vec<T> {
        self.sample(q, self.kappa())
    }
}

/// Which member of a pair family to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Member {
    G,
    H,
}

/// `max_Q |{X_Q > N}| / |Q|` for `X = G` or `H`: the level-set hypothesis
/// of the John–Nirenberg lemma at height `N`.
pub fn level_fraction<T: Real, F: PairFamily<T> + ?Sized>(
    family: &F,
    member: Member,
    n: T,
    max_level: u32,
) -> T {
    family
        .grid()
        .cubes_to(max_level)
        .par_iter()
        .map(|c| {
            let v = match member {
                Member::G => family.g(c),
                Member::H => family.h(c),
            };
            T::from_count(v.iter().filter(|x| **x > n).count()) / T::from_count(v.len())
        })
        .reduce(T::zero, T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit1() -> DyadicGrid<f64> {
        DyadicGrid::unit(1).unwrap()
    }

    #[test]
    fn children_partition_and_parent_inverts() {
        let q = DyadicCube {
            level: 3,
            coords: vec![5, 2],
        };
        let kids = q.children();
        assert_eq!(kids.len(), 4);
        for k in &kids {
            assert_eq!(k.parent().as_ref(), Some(&q));
            assert!(q.contains(k));
        }
        let g = DyadicGrid::<f64>::new(vec![0.0, 0.0], 1.0, 6).unwrap();
        let mut all: Vec<usize> = kids.iter().flat_map(|k| g.cells_of(k)).collect();
        all.sort();
        let mut parent = g.cells_of(&q);
        parent.sort();
        assert_eq!(all, parent);
    }

    #[test]
    fn maximal_function_examples() {
        let g = unit1();
        let f = LatticeField::from_centers(g, |x| if x[0] < 0.25 { 1.0 } else { 0.0 });
        assert_eq!(f.dyadic_maximal(&[0.1]).unwrap(), 1.0);
        assert_eq!(f.dyadic_maximal(&[0.8]).unwrap(), 0.25);
        assert!(f.dyadic_maximal(&[1.0]).is_err());
    }

    #[test]
    fn local_maximal_matches_ancestor_scan() {
        let g = DyadicGrid::<f64>::new(vec![0.0, 0.0], 1.0, 4).unwrap();
        let f = LatticeField::from_centers(g.clone(), |x| (7.0 * x[0]).sin() * x[1] - 0.2);
        let root = DyadicCube::root(2);
        let local = local_maximal(&f.values, 2);
        // The root's local order coincides with the global linear order.
        for (i, v) in local.iter().enumerate() {
            let direct = f.dyadic_maximal(&g.cell_center(i)).unwrap();
            assert!((v - direct).abs() < 1e-14);
        }
        assert_eq!(g.cells_of(&root), (0..256).collect::<Vec<_>>());
    }

    #[test]
    fn stopping_examples() {
        let g = DyadicGrid::<f64>::new(vec![0.0], 1.0, 6).unwrap();
        let mask: Vec<bool> = (0..64).map(|i| i < 32).collect();
        let cubes = stopping_decomposition(&g, &mask, 0.6).unwrap();
        assert_eq!(cubes, vec![DyadicCube { level: 1, coords: vec![0] }]);
        assert!(stopping_decomposition(&g, &vec![false; 64], 0.5).unwrap().is_empty());
        let mask: Vec<bool> = (0..64).map(|i| i < 24).collect();
        let cubes = stopping_decomposition(&g, &mask, 0.9).unwrap();
        assert_eq!(
            cubes,
            vec![
                DyadicCube { level: 2, coords: vec![0] },
                DyadicCube { level: 3, coords: vec![2] },
            ]
        );
    }

    #[test]
    fn constant_threshold_family() {
        let g = DyadicGrid::<f64>::new(vec![0.0], 1.0, 8).unwrap();
        let f = LatticeField::from_centers(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        let fam = BmoFamily::new(f);
        let root = DyadicCube::root(1);
        let g0 = fam.g(&root);
        assert!(g0.iter().all(|v| (*v - 0.5).abs() < 1e-15));
        assert_eq!(alpha_threshold(&[2.0; 10], 0.3), 2.0);
    }
}
