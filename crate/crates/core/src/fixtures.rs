//! The reference scenario: `d = 1`, `L = 8`, `N = 512`, `n = 2` and the
//! three-atom measure
//!
//! ```text
//! omega =  0 : [[1, 0], [0, 0]]
//! omega =  1 : [[0.5, 0.25], [0.25, 0.5]]
//! omega = -2 : 0.5 I
//! ```
//!
//! plus deterministic generators for bump families used by the checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid_calculus::{GridSpec, TestFunction};
use crate::operator_algebra::OperatorValue;
use crate::spectral_measure::SpectralMeasure;

pub const ENSEMBLE_SIZE: usize = 20_000;
pub const SEED: u64 = 42;

pub fn grid() -> GridSpec {
    GridSpec::new(1, 8.0, 512).expect("fixture grid is valid")
}

pub fn measure() -> SpectralMeasure {
    SpectralMeasure::new(
        1,
        2,
        vec![
            (vec![0.0], OperatorValue::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap()),
            (vec![1.0], OperatorValue::from_real_rows(&[&[0.5, 0.25], &[0.25, 0.5]]).unwrap()),
            (vec![-2.0], OperatorValue::diagonal(&[0.5, 0.5]).unwrap()),
        ],
    )
    .expect("fixture measure is valid")
}

/// `G_j = S_j diag(1, 0)`: the companion factors for the cross-correlated pair.
pub fn companion_mask() -> OperatorValue {
    OperatorValue::diagonal(&[1.0, 0.0]).unwrap()
}

/// `count` unit-mass bumps with radii drawn from `radii` and centers from
/// `[-center_bound, center_bound]`, reproducible from `seed`.
pub fn random_bumps(
    grid: &GridSpec,
    count: usize,
    seed: u64,
    radii: (f64, f64),
    center_bound: f64,
) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let radius = rng.random_range(radii.0..=radii.1);
            let center: Vec<f64> = (0..grid.dim())
                .map(|_| rng.random_range(-center_bound..=center_bound))
                .collect();
            TestFunction::make_bump(&center, radius, grid).expect("fixture bump fits the grid")
        })
        .collect()
}

/// Grid-aligned shifts `k h` with `|k h| <= bound`, reproducible from `seed`.
pub fn random_shifts(grid: &GridSpec, count: usize, seed: u64, bound: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = grid.spacing();
    let max_cells = (bound / h).floor() as i64;
    (0..count)
        .map(|_| {
            (0..grid.dim())
                .map(|_| rng.random_range(-max_cells..=max_cells) as f64 * h)
                .collect()
        })
        .collect()
}

/// Narrow bumps whose transforms stay well away from zero at `|omega| <= 2`.
pub fn narrow_bumps(grid: &GridSpec, count: usize, seed: u64) -> Vec<TestFunction> {
    random_bumps(grid, count, seed, (0.12, 0.25), 1.0)
}

/// Pairs drawn from [`narrow_bumps`], including a few self pairs.
pub fn probe_pairs(grid: &GridSpec, count: usize, seed: u64) -> Vec<(TestFunction, TestFunction)> {
    let bumps = narrow_bumps(grid, count + 1, seed);
    (0..count)
        .map(|i| {
            if i % 3 == 0 {
                (bumps[i].clone(), bumps[i].clone())
            } else {
                (bumps[i].clone(), bumps[i + 1].clone())
            }
        })
        .collect()
}

/// One narrow bump and translates of it. The Fourier rows at the fixture
/// atoms form a well-conditioned generalized Vandermonde system.
pub fn time_domain_probes(grid: &GridSpec, count: usize) -> Vec<TestFunction> {
    let base = TestFunction::make_bump(&vec![0.0; grid.dim()], 0.2, grid).expect("fits");
    let h = grid.spacing();
    // Steps of 5h = 0.15625 spread the phases exp(-2 pi i omega x) over the circle.
    (0..count)
        .map(|i| {
            let mut shift = vec![0.0; grid.dim()];
            shift[0] = (5 * i) as f64 * h;
            base.translate(&shift).expect("fits")
        })
        .collect()
}
