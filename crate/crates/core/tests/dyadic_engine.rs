use halfspace::dyadic::{
    alpha_threshold, jn_profile, orlicz_conclusions, stopping_decomposition, BmoFamily, DyadicCube,
    DyadicGrid, LatticeField, PairFamily,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact cell mean of `log(1/x)` over `[a, b]`.
fn log_inv_mean(a: f64, b: f64) -> f64 {
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    1.0 - (xlogx(b) - xlogx(a)) / (b - a)
}

fn log_inv_field() -> LatticeField<f64> {
    LatticeField::from_cell_means(DyadicGrid::unit(1).unwrap(), |b| log_inv_mean(b[0].0, b[0].1))
}

/// Every cube whose density exceeds beta while all its ancestors stay at or
/// below beta, by scanning the whole tree.
fn exhaustive_stopping(grid: &DyadicGrid<f64>, mask: &[bool], beta: f64) -> Vec<DyadicCube> {
    let density = |q: &DyadicCube| {
        let c = grid.cells_of(q);
        c.iter().filter(|&&i| mask[i]).count() as f64 / c.len() as f64
    };
    let mut out: Vec<DyadicCube> = grid
        .cubes_to(grid.depth)
        .into_iter()
        .filter(|q| {
            if density(q) <= beta {
                return false;
            }
            let mut p = q.parent();
            while let Some(a) = p {
                if density(&a) > beta {
                    return false;
                }
                p = a.parent();
            }
            true
        })
        .collect();
    out.sort();
    out
}

#[test]
fn stopping_cubes_match_exhaustive_scan_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let dim = if trial % 2 == 0 { 1 } else { 2 };
        let depth = if dim == 1 { 8 } else { 4 };
        let grid = DyadicGrid::new(vec![0.0; dim], 1.0, depth).unwrap();
        let p: f64 = rng.gen_range(0.05..0.4);
        let mask: Vec<bool> = (0..grid.cell_count()).map(|_| rng.gen::<f64>() < p).collect();
        let density = mask.iter().filter(|b| **b).count() as f64 / mask.len() as f64;
        let beta = rng.gen_range((density + 0.01).min(0.95)..0.99);
        let fast = stopping_decomposition(&grid, &mask, beta).unwrap();
        assert_eq!(fast, exhaustive_stopping(&grid, &mask, beta), "trial {trial}");
        // Union of stopping cubes is the superlevel set of the maximal function.
        let field = LatticeField::new(grid.clone(), mask.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let mut covered = vec![false; mask.len()];
        for q in &fast {
            for c in grid.cells_of(q) {
                assert!(!covered[c], "stopping cubes overlap");
                covered[c] = true;
            }
        }
        for (i, &cov) in covered.iter().enumerate() {
            let m = field.dyadic_maximal(&grid.cell_center(i)).unwrap();
            assert_eq!(cov, m > beta);
        }
    }
}

#[test]
fn stopping_rejects_dense_root() {
    let grid = DyadicGrid::new(vec![0.0], 1.0, 4).unwrap();
    assert!(stopping_decomposition(&grid, &[true; 16], 0.5).is_err());
}

#[test]
fn john_nirenberg_for_logarithm() {
    let fam = BmoFamily::new(log_inv_field());
    let alpha = (-1.0f64).exp();
    let probe = jn_profile(&fam, alpha, &[1.0], 10, 1);
    let ts: Vec<f64> = (1..=20).map(|k| k as f64 * probe.m_alpha / 2.0).collect();
    let prof = jn_profile(&fam, alpha, &ts, 10, 1);
    assert!(prof.check.holds(), "{:?}", prof.check);
    assert!(prof.holds, "{:?}", prof.rows);
    assert!(prof.m_alpha <= fam.threshold_bound(10));
    let orl = orlicz_conclusions(&fam, &prof, 2.0, 10);
    assert!(orl.holds, "{orl:?}");
    assert!(orl.exp <= fam.exp_bound(10));
}

#[test]
fn constant_families_are_degenerate() {
    let grid = DyadicGrid::new(vec![0.0], 1.0, 6).unwrap();
    let fam = BmoFamily::new(LatticeField::from_centers(grid, |_| 3.0));
    let prof = jn_profile(&fam, 0.5, &[0.1, 1.0], 6, 0);
    assert_eq!(prof.m_alpha, 0.0);
    assert!(prof.rows.iter().all(|r| r.xi == 0.0));
    assert!(prof.holds);
}

#[test]
fn half_indicator_oscillation_level_set() {
    let grid = DyadicGrid::new(vec![0.0], 1.0, 10).unwrap();
    let fam = BmoFamily::new(LatticeField::from_centers(grid, |x| (x[0] < 0.5) as u8 as f64));
    let g = fam.g(&DyadicCube::root(1));
    assert_eq!(g.iter().filter(|v| **v > 0.4).count(), g.len());
}

#[test]
fn maximal_function_of_constant() {
    let f = LatticeField::from_centers(DyadicGrid::unit(2).unwrap(), |_| 2.5);
    assert_eq!(f.dyadic_maximal(&[0.3, 0.9]).unwrap(), 2.5);
}

proptest! {
    #[test]
    fn maximal_function_sits_between_cell_value_and_largest_mean(
        vals in proptest::collection::vec(-5.0f64..5.0, 64),
        cell in 0usize..64,
    ) {
        let grid = DyadicGrid::new(vec![0.0], 1.0, 6).unwrap();
        let f = LatticeField::new(grid.clone(), vals.clone()).unwrap();
        let m = f.dyadic_maximal(&grid.cell_center(cell)).unwrap();
        prop_assert!(m >= vals[cell].abs() - 1e-12);
        prop_assert!(m <= vals.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1e-12);
    }

    #[test]
    fn alpha_threshold_is_the_smallest_admissible_level(
        vals in proptest::collection::vec(0.0f64..10.0, 1..50),
        alpha in 0.05f64..0.95,
    ) {
        let lam = alpha_threshold(&vals, alpha);
        let allowed = (alpha * vals.len() as f64).floor() as usize;
        prop_assert!(vals.iter().filter(|v| **v > lam).count() <= allowed);
        let below = lam - 1e-9;
        if lam > 0.0 {
            prop_assert!(vals.iter().filter(|v| **v > below).count() > allowed);
        }
    }
}
