//! Test functions sampled on a uniform grid over `[-L, L)^d`.
//!
//! Grid point `i` on each axis sits at `x_i = -L + i*h` with `h = 2L/N`, so the
//! origin is index `N/2` and reflection `x -> -x` maps index `i` to `N - i`.
//! A [`TestFunction`] may only be nonzero on the interior box of indices
//! `1..=N-1`, so reflection and aligned translation act as exact index
//! permutations.
//!
//! Fourier transforms use the convention
//! `(F phi)(t) = integral phi(x) exp(-2 pi i <x, t>) dx`, evaluated by direct
//! quadrature `h^d * sum phi(x) exp(-2 pi i <x, t>)` at arbitrary real `t`.
//! With this convention `F(phi * psi) = F(phi) F(psi)` carries no `2 pi`
//! factors, and it holds exactly for the discrete sums as well.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform grid over `[-L, L)^d` with `N` points per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(r.dim, r.half_width, r.points_per_axis)
    }
}

impl GridSpec {
    /// Largest number of grid points any grid (including tensor products) may hold.
    pub const MAX_POINTS: usize = 1 << 22;
    pub const MAX_DIM: usize = 4;

    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dim == 0 || dim > Self::MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} outside 1..={}",
                Self::MAX_DIM
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} must be positive"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be even and >= 8"
            )));
        }
        let points = checked_pow(points_per_axis, dim);
        if points > Self::MAX_POINTS {
            return Err(Error::MemoryGuard {
                points,
                limit: Self::MAX_POINTS,
            });
        }
        Ok(Self {
            dim,
            half_width,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// `h^d`, the quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points, `N^d`.
    pub fn len(&self) -> usize {
        checked_pow(self.points_per_axis, self.dim)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along one axis; `i` may lie outside `0..N`.
    pub fn coord(&self, i: i64) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let n = self.points_per_axis;
        let mut idx = vec![0; self.dim];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    /// Flat index of a multi-index, or `None` when any component falls outside `0..N`.
    pub fn flatten(&self, idx: &[i64]) -> Option<usize> {
        let n = self.points_per_axis as i64;
        let mut flat = 0usize;
        for &i in idx {
            if i < 0 || i >= n {
                return None;
            }
            flat = flat * n as usize + i as usize;
        }
        Some(flat)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .into_iter()
            .map(|i| self.coord(i as i64))
            .collect()
    }

    /// Converts a displacement to whole cells per axis, failing for off-grid shifts.
    pub fn shift_to_cells(&self, shift: &[f64]) -> Result<Vec<i64>> {
        if shift.len() != self.dim {
            return Err(Error::GridMismatch(format!(
                "shift has {} components, grid has dimension {}",
                shift.len(),
                self.dim
            )));
        }
        let h = self.spacing();
        shift
            .iter()
            .map(|&s| {
                let cells = s / h;
                let rounded = cells.round();
                if !cells.is_finite() || (cells - rounded).abs() > 1e-9 * rounded.abs().max(1.0) {
                    Err(Error::MisalignedShift {
                        shift: shift.to_vec(),
                        spacing: h,
                    })
                } else {
                    Ok(rounded as i64)
                }
            })
            .collect()
    }

    /// Grid on `R^{2d}` with the same half width and resolution.
    pub fn product(&self) -> Result<GridSpec> {
        GridSpec::new(2 * self.dim, self.half_width, self.points_per_axis)
    }

    fn is_interior(&self, idx: &[i64]) -> bool {
        let n = self.points_per_axis as i64;
        idx.iter().all(|&i| i >= 1 && i < n)
    }
}

fn checked_pow(base: usize, exp: usize) -> usize {
    (0..exp).fold(1usize, |acc, _| acc.saturating_mul(base))
}

/// A compactly supported function sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    grid: GridSpec,
    samples: Vec<C64>,
    support_radius: f64,
}

impl TestFunction {
    /// Wraps raw samples. Nonzero samples must lie on interior indices `1..=N-1`.
    pub fn from_samples(grid: GridSpec, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        let mut radius: f64 = 0.0;
        for (flat, v) in samples.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite sample at index {flat}"
                )));
            }
            if *v != C64::new(0.0, 0.0) {
                let idx: Vec<i64> = grid.unflatten(flat).into_iter().map(|i| i as i64).collect();
                if !grid.is_interior(&idx) {
                    return Err(Error::SupportExceedsGrid(format!(
                        "nonzero sample on the grid boundary at index {idx:?}"
                    )));
                }
                let r2: f64 = idx.iter().map(|&i| grid.coord(i).powi(2)).sum();
                radius = radius.max(r2.sqrt());
            }
        }
        Ok(Self {
            grid,
            samples,
            support_radius: radius,
        })
    }

    pub fn zero(grid: GridSpec) -> Self {
        let len = grid.len();
        Self {
            grid,
            samples: vec![C64::new(0.0, 0.0); len],
            support_radius: 0.0,
        }
    }

    /// Samples `x -> exp(-1 / (1 - |x - c|^2 / r^2))` inside the ball and 0 outside,
    /// scaled so that its Riemann sum is exactly one.
    pub fn make_bump(center: &[f64], radius: f64, grid: &GridSpec) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "bump center has {} components, grid has dimension {}",
                center.len(),
                grid.dim()
            )));
        }
        let h = grid.spacing();
        if !(radius.is_finite() && radius > 2.0 * h) {
            return Err(Error::InvalidArgument(format!(
                "bump radius {radius} must exceed twice the spacing {h}"
            )));
        }
        let limit = grid.half_width() - h;
        if center
            .iter()
            .any(|&c| !c.is_finite() || c.abs() + radius > limit + 1e-12)
        {
            return Err(Error::SupportExceedsGrid(format!(
                "ball of radius {radius} at {center:?} leaves [-{limit}, {limit}]"
            )));
        }
        let mut samples = vec![C64::new(0.0, 0.0); grid.len()];
        for (flat, s) in samples.iter_mut().enumerate() {
            let x = grid.point(flat);
            let r2: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, ci)| (xi - ci).powi(2))
                .sum::<f64>()
                / (radius * radius);
            if r2 < 1.0 {
                s.re = (-1.0 / (1.0 - r2)).exp();
            }
        }
        let mass: f64 = samples.iter().map(|s| s.re).sum::<f64>() * grid.cell_volume();
        if mass <= 0.0 {
            return Err(Error::InvalidArgument(
                "bump has no grid points inside its support".into(),
            ));
        }
        for s in &mut samples {
            s.re /= mass;
        }
        Self::from_samples(grid.clone(), samples)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// Radius of the smallest origin-centered ball containing every nonzero sample.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| *s == C64::new(0.0, 0.0))
    }

    /// Nonzero samples in increasing flat-index order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != C64::new(0.0, 0.0))
            .map(|(i, v)| (i, *v))
    }

    fn same_grid(&self, other: &TestFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `(tau_x phi)(y) = phi(y - x)` for a grid-aligned `x`, as an exact index shift.
    pub fn translate(&self, shift: &[f64]) -> Result<TestFunction> {
        let cells = self.grid.shift_to_cells(shift)?;
        self.translate_cells(&cells)
    }

    pub fn translate_cells(&self, cells: &[i64]) -> Result<TestFunction> {
        if cells.len() != self.grid.dim() {
            return Err(Error::GridMismatch("shift dimension".into()));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.samples.len()];
        for (flat, v) in self.nonzeros() {
            let idx: Vec<i64> = self
                .grid
                .unflatten(flat)
                .into_iter()
                .zip(cells)
                .map(|(i, c)| i as i64 + c)
                .collect();
            if !self.grid.is_interior(&idx) {
                return Err(Error::SupportExceedsGrid(format!(
                    "translation by {cells:?} cells moves support off the grid"
                )));
            }
            out[self.grid.flatten(&idx).expect("interior index")] = v;
        }
        TestFunction::from_samples(self.grid.clone(), out)
    }

    fn reflected(&self, conjugate: bool) -> TestFunction {
        let n = self.grid.points_per_axis() as i64;
        let mut out = vec![C64::new(0.0, 0.0); self.samples.len()];
        for (flat, v) in self.nonzeros() {
            let idx: Vec<i64> = self
                .grid
                .unflatten(flat)
                .into_iter()
                .map(|i| n - i as i64)
                .collect();
            let target = self.grid.flatten(&idx).expect("interior index reflects inside");
            out[target] = if conjugate { v.conj() } else { v };
        }
        TestFunction {
            grid: self.grid.clone(),
            samples: out,
            support_radius: self.support_radius,
        }
    }

    /// `phi~(x) = conj(phi(-x))`.
    pub fn involute(&self) -> TestFunction {
        self.reflected(true)
    }

    /// `phi^(x) = phi(-x)`.
    pub fn reflect(&self) -> TestFunction {
        self.reflected(false)
    }

    fn check_convolution_support(&self, other: &TestFunction) -> Result<()> {
        self.same_grid(other)?;
        let limit = self.grid.half_width() - self.grid.spacing();
        if self.support_radius + other.support_radius > limit + 1e-12 {
            return Err(Error::SupportExceedsGrid(format!(
                "support radii {} + {} exceed {}",
                self.support_radius, other.support_radius, limit
            )));
        }
        Ok(())
    }

    /// `(phi * psi)(x) = h^d sum_y phi(y) psi(x - y)` by direct double sum over
    /// the nonzero samples. Terms for each output point are accumulated in
    /// increasing index order of `phi`, so shifting both factors reproduces the
    /// same floating-point sum.
    pub fn convolve(&self, other: &TestFunction) -> Result<TestFunction> {
        self.check_convolution_support(other)?;
        let grid = &self.grid;
        let half = (grid.points_per_axis() / 2) as i64;
        let rhs: Vec<(Vec<i64>, C64)> = other
            .nonzeros()
            .map(|(f, v)| (grid.unflatten(f).into_iter().map(|i| i as i64).collect(), v))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); self.samples.len()];
        let mut idx = vec![0i64; grid.dim()];
        for (flat, a) in self.nonzeros() {
            let i = grid.unflatten(flat);
            for (j, b) in &rhs {
                for axis in 0..grid.dim() {
                    idx[axis] = i[axis] as i64 + j[axis] - half;
                }
                let k = grid.flatten(&idx).ok_or_else(|| {
                    Error::SupportExceedsGrid("convolution support leaves the grid".into())
                })?;
                out[k] += a * b;
            }
        }
        let w = grid.cell_volume();
        for v in &mut out {
            *v *= w;
        }
        TestFunction::from_samples(grid.clone(), out)
    }

    /// Same as [`convolve`](Self::convolve), computed with a DFT on a grid
    /// zero-padded to `2N` per axis so no circular wrap-around occurs.
    pub fn convolve_fft(&self, other: &TestFunction) -> Result<TestFunction> {
        self.check_convolution_support(other)?;
        let grid = &self.grid;
        let n = grid.points_per_axis();
        let padded = 2 * n;
        let dim = grid.dim();
        let total = checked_pow(padded, dim);
        if total > GridSpec::MAX_POINTS * 4 {
            return Err(Error::MemoryGuard {
                points: total,
                limit: GridSpec::MAX_POINTS * 4,
            });
        }
        let embed = |f: &TestFunction| {
            let mut buf = vec![C64::new(0.0, 0.0); total];
            for (flat, v) in f.nonzeros() {
                let p = grid
                    .unflatten(flat)
                    .into_iter()
                    .fold(0usize, |acc, i| acc * padded + i);
                buf[p] = v;
            }
            buf
        };
        let mut a = embed(self);
        let mut b = embed(other);
        let mut planner = FftPlanner::new();
        fft_nd(&mut a, padded, dim, &mut planner, false);
        fft_nd(&mut b, padded, dim, &mut planner, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft_nd(&mut a, padded, dim, &mut planner, true);
        let scale = grid.cell_volume() / total as f64;
        let half = n / 2;
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        let mut result_nonzero = false;
        for (flat, o) in out.iter_mut().enumerate() {
            let p = grid
                .unflatten(flat)
                .into_iter()
                .fold(0usize, |acc, k| acc * padded + k + half);
            *o = a[p] * scale;
            result_nonzero |= *o != C64::new(0.0, 0.0);
        }
        // The DFT leaves roundoff noise where the exact result vanishes; zero
        // everything outside the Minkowski sum of the two supports.
        if result_nonzero {
            let reach = self.support_radius + other.support_radius + 1e-9;
            for (flat, o) in out.iter_mut().enumerate() {
                let r2: f64 = grid.point(flat).iter().map(|x| x * x).sum();
                if r2.sqrt() > reach {
                    *o = C64::new(0.0, 0.0);
                }
            }
        }
        TestFunction::from_samples(grid.clone(), out)
    }

    /// `h^d * sum phi(x) exp(-2 pi i <x, t>)` at a single frequency.
    pub fn fourier_at(&self, t: &[f64]) -> C64 {
        debug_assert_eq!(t.len(), self.grid.dim());
        let mut acc = C64::new(0.0, 0.0);
        for (flat, v) in self.nonzeros() {
            let x = self.grid.point(flat);
            let phase: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() * (-2.0 * PI);
            acc += v * C64::from_polar(1.0, phase);
        }
        acc * self.grid.cell_volume()
    }

    pub fn fourier(&self, frequencies: &[Vec<f64>]) -> Result<FreqSamples> {
        let mut values = Vec::with_capacity(frequencies.len());
        for t in frequencies {
            if t.len() != self.grid.dim() {
                return Err(Error::GridMismatch(format!(
                    "frequency {t:?} has wrong dimension for grid of dimension {}",
                    self.grid.dim()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite frequency {t:?}")));
            }
            values.push(self.fourier_at(t));
        }
        Ok(FreqSamples {
            frequencies: frequencies.to_vec(),
            values,
        })
    }

    /// `(phi (x) psi)(x, y) = phi(x) psi(y)` on the `2d`-dimensional product grid.
    pub fn tensor(&self, other: &TestFunction) -> Result<TestFunction> {
        self.same_grid(other)?;
        let product = self.grid.product()?;
        let len = self.grid.len();
        let mut out = vec![C64::new(0.0, 0.0); product.len()];
        for (i, a) in self.nonzeros() {
            for (j, b) in other.nonzeros() {
                out[i * len + j] = a * b;
            }
        }
        TestFunction::from_samples(product, out)
    }

    /// Riemann sum `h^d * sum samples`.
    pub fn integral(&self) -> C64 {
        self.samples.iter().sum::<C64>() * self.grid.cell_volume()
    }

    pub fn add(&self, other: &TestFunction) -> Result<TestFunction> {
        self.same_grid(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        TestFunction::from_samples(self.grid.clone(), samples)
    }

    pub fn scale(&self, c: C64) -> TestFunction {
        let samples: Vec<C64> = self.samples.iter().map(|a| a * c).collect();
        TestFunction::from_samples(self.grid.clone(), samples)
            .expect("scaling preserves support and finiteness")
    }

    /// `max |phi - psi|` over the grid.
    pub fn max_abs_diff(&self, other: &TestFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// First moment `h^d sum x_1 phi(x)` along the first axis.
    pub fn first_moment(&self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (flat, v) in self.nonzeros() {
            acc += v * self.grid.point(flat)[0];
        }
        acc * self.grid.cell_volume()
    }

    /// Center of `|phi|^2` along the first axis; zero for the zero function.
    pub fn energy_center(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (flat, v) in self.nonzeros() {
            let w = v.norm_sqr();
            num += w * self.grid.point(flat)[0];
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Fourier values at a list of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqSamples {
    pub frequencies: Vec<Vec<f64>>,
    pub values: Vec<C64>,
}

fn fft_nd(
    buf: &mut [C64],
    n: usize,
    dim: usize,
    planner: &mut FftPlanner<f64>,
    inverse: bool,
) {
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let total = buf.len();
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = checked_pow(n, dim - 1 - axis);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, l) in line.iter_mut().enumerate() {
                    *l = buf[base + k * stride];
                }
                fft.process(&mut line);
                for (k, l) in line.iter().enumerate() {
                    buf[base + k * stride] = *l;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1, 8.0, 512).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(GridSpec::new(0, 1.0, 16).is_err());
        assert!(GridSpec::new(1, 1.0, 7).is_err());
        assert!(GridSpec::new(1, 1.0, 10).is_ok());
        assert!(GridSpec::new(1, -1.0, 16).is_err());
        assert!(matches!(
            GridSpec::new(4, 8.0, 512),
            Err(Error::MemoryGuard { .. })
        ));
        let g = GridSpec::new(2, 8.0, 64).unwrap();
        assert_eq!(g.spacing() * 64.0, 16.0);
    }

    #[test]
    fn bump_has_unit_integral() {
        let b = TestFunction::make_bump(&[0.0], 1.0, &grid()).unwrap();
        assert!((b.integral() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn bump_is_even() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        let n = g.points_per_axis();
        for i in 1..n {
            assert_eq!(b.samples()[i], b.samples()[n - i]);
        }
    }

    #[test]
    fn shifted_bump_is_index_shift() {
        let g = grid();
        let b0 = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        let b2 = TestFunction::make_bump(&[2.0], 1.0, &g).unwrap();
        let cells = (2.0 / g.spacing()) as usize;
        for i in 0..g.len() - cells {
            assert!((b2.samples()[i + cells] - b0.samples()[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn bump_precondition_errors() {
        let g = grid();
        assert!(matches!(
            TestFunction::make_bump(&[7.5], 1.0, &g),
            Err(Error::SupportExceedsGrid(_))
        ));
        assert!(TestFunction::make_bump(&[0.0], g.spacing(), &g).is_err());
    }

    #[test]
    fn translate_errors() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        assert!(matches!(
            b.translate(&[0.3 * g.spacing()]),
            Err(Error::MisalignedShift { .. })
        ));
        assert!(matches!(
            b.translate(&[7.5]),
            Err(Error::SupportExceedsGrid(_))
        ));
    }

    #[test]
    fn translate_identity_and_inverse() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.3], 0.7, &g).unwrap();
        assert_eq!(b.translate(&[0.0]).unwrap(), b);
        let x = 37.0 * g.spacing();
        assert_eq!(b.translate(&[x]).unwrap().translate(&[-x]).unwrap(), b);
    }

    #[test]
    fn involution_cases() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        assert_eq!(b.involute(), b);
        let skew = TestFunction::make_bump(&[0.4], 0.5, &g)
            .unwrap()
            .add(&TestFunction::make_bump(&[-1.1], 0.3, &g).unwrap().scale(c(0.2, 0.7)))
            .unwrap();
        assert_eq!(skew.involute().involute(), skew);
        // i * (odd bump) is fixed by the involution.
        let odd = TestFunction::make_bump(&[1.0], 0.5, &g)
            .unwrap()
            .add(&TestFunction::make_bump(&[-1.0], 0.5, &g).unwrap().scale(c(-1.0, 0.0)))
            .unwrap()
            .scale(c(0.0, 1.0));
        assert_eq!(odd.involute().max_abs_diff(&odd).unwrap(), 0.0);
        // reflect without conjugation flips the sign of i * odd.
        assert!(odd.reflect().add(&odd).unwrap().is_zero());
    }

    #[test]
    fn convolution_commutes_and_matches_fft() {
        let g = grid();
        let a = TestFunction::make_bump(&[0.5], 0.8, &g).unwrap();
        let b = TestFunction::make_bump(&[-1.0], 0.6, &g)
            .unwrap()
            .scale(c(0.3, -1.2));
        let ab = a.convolve(&b).unwrap();
        let ba = b.convolve(&a).unwrap();
        assert!(ab.max_abs_diff(&ba).unwrap() < 1e-12);
        let fft = a.convolve_fft(&b).unwrap();
        assert!(ab.max_abs_diff(&fft).unwrap() < 1e-10);
    }

    #[test]
    fn convolution_support_guard() {
        let g = grid();
        let a = TestFunction::make_bump(&[4.0], 2.0, &g).unwrap();
        assert!(matches!(a.convolve(&a), Err(Error::SupportExceedsGrid(_))));
    }

    #[test]
    fn convolution_invariance_under_joint_translation() {
        let g = grid();
        let phi = TestFunction::make_bump(&[0.5], 0.8, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.2], 0.5, &g)
            .unwrap()
            .scale(c(0.0, 2.0));
        let base = phi.convolve(&psi.involute()).unwrap();
        for k in [-40i64, -3, 1, 17, 64] {
            let x = [k as f64 * g.spacing()];
            let lhs = phi
                .translate(&x)
                .unwrap()
                .convolve(&psi.translate(&x).unwrap().involute())
                .unwrap();
            assert_eq!(lhs, base);
        }
    }

    /// Brute-force `sum_i sum_j` convolution independent of the index bookkeeping above.
    fn direct_convolution_at(phi: &TestFunction, psi: &TestFunction, x: f64) -> C64 {
        let g = phi.grid();
        let h = g.spacing();
        let mut acc = c(0.0, 0.0);
        for i in 0..g.len() {
            let y = g.coord(i as i64);
            let j = ((x - y + g.half_width()) / h).round() as i64;
            if j >= 0 && (j as usize) < g.len() {
                acc += phi.samples()[i] * psi.samples()[j as usize];
            }
        }
        acc * h
    }

    #[test]
    fn mollified_convolution_converges() {
        let g = grid();
        let phi = TestFunction::make_bump(&[0.3], 1.5, &g).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.5, 0.25, 0.125] {
            let m = TestFunction::make_bump(&[0.0], eps, &g).unwrap();
            let conv = phi.convolve(&m).unwrap();
            for k in [200usize, 256, 265, 300] {
                let oracle = direct_convolution_at(&phi, &m, g.coord(k as i64));
                assert!((oracle - conv.samples()[k]).norm() < 1e-12);
            }
            let err = conv.max_abs_diff(&phi).unwrap();
            assert!(err < last, "error {err} did not decrease from {last}");
            last = err;
        }
    }

    #[test]
    fn fourier_at_zero_is_integral() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.7], 0.9, &g)
            .unwrap()
            .scale(c(1.5, -0.5));
        assert!((b.fourier_at(&[0.0]) - b.integral()).norm() < 1e-14);
    }

    fn direct_fourier(phi: &TestFunction, t: f64) -> C64 {
        let g = phi.grid();
        (0..g.len())
            .map(|i| {
                let x = g.coord(i as i64);
                phi.samples()[i] * C64::from_polar(1.0, -2.0 * PI * x * t)
            })
            .sum::<C64>()
            * g.spacing()
    }

    #[test]
    fn shift_and_convolution_identities() {
        let g = grid();
        let phi = TestFunction::make_bump(&[0.2], 0.6, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.5], 0.4, &g)
            .unwrap()
            .scale(c(0.5, 0.5));
        let x = 13.0 * g.spacing();
        let shifted = phi.translate(&[x]).unwrap();
        let conv = phi.convolve(&psi).unwrap();
        for t in [-3.7, -1.0, 0.0, 0.4, 2.0, 4.0] {
            let expect = C64::from_polar(1.0, -2.0 * PI * x * t) * direct_fourier(&phi, t);
            assert!((shifted.fourier_at(&[t]) - expect).norm() < 1e-10);
            let prod = direct_fourier(&phi, t) * direct_fourier(&psi, t);
            assert!((conv.fourier_at(&[t]) - prod).norm() < 1e-8);
        }
    }

    #[test]
    fn fourier_quadrature_matches_fine_grid() {
        let coarse = grid();
        let fine = GridSpec::new(1, 8.0, 4096).unwrap();
        let a = TestFunction::make_bump(&[0.0], 2.0, &coarse).unwrap();
        let b = TestFunction::make_bump(&[0.0], 2.0, &fine).unwrap();
        // Normalization uses each grid's own Riemann sum; compare the
        // transforms relative to their zero-frequency values.
        for t in [0.5, 1.0, 2.5, 4.0] {
            let diff = a.fourier_at(&[t]) / a.fourier_at(&[0.0])
                - b.fourier_at(&[t]) / b.fourier_at(&[0.0]);
            assert!(diff.norm() < 1e-8, "t={t}: {diff}");
        }
    }

    #[test]
    fn fourier_rejects_wrong_dimension() {
        let g = grid();
        let b = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        assert!(b.fourier(&[vec![0.0, 1.0]]).is_err());
        let fs = b.fourier(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(fs.values.len(), 2);
    }

    #[test]
    fn tensor_products() {
        let g = GridSpec::new(1, 4.0, 64).unwrap();
        let phi = TestFunction::make_bump(&[0.5], 1.0, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.5], 0.7, &g)
            .unwrap()
            .scale(c(0.0, 1.0));
        let t = phi.tensor(&psi).unwrap();
        assert_eq!(t.grid().dim(), 2);
        for (i, j) in [(30usize, 25usize), (33, 20), (40, 28), (0, 0), (36, 22)] {
            assert_eq!(t.samples()[i * 64 + j], phi.samples()[i] * psi.samples()[j]);
        }
        assert!((t.integral() - phi.integral() * psi.integral()).norm() < 1e-12);
        assert!(phi.tensor(&TestFunction::zero(g.clone())).unwrap().is_zero());

        let g2 = GridSpec::new(2, 8.0, 512).unwrap();
        let b2 = TestFunction::make_bump(&[0.0, 0.0], 1.0, &g2).unwrap();
        assert!(matches!(b2.tensor(&b2), Err(Error::MemoryGuard { .. })));
    }

    #[test]
    fn two_dimensional_operations() {
        let g = GridSpec::new(2, 4.0, 64).unwrap();
        let phi = TestFunction::make_bump(&[0.5, -0.25], 0.8, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.3, 0.1], 0.6, &g).unwrap();
        assert!((phi.integral() - c(1.0, 0.0)).norm() < 1e-12);
        let conv = phi.convolve(&psi).unwrap();
        let fft = phi.convolve_fft(&psi).unwrap();
        assert!(conv.max_abs_diff(&fft).unwrap() < 1e-10);
        let t = [0.7, -0.4];
        assert!((conv.fourier_at(&t) - phi.fourier_at(&t) * psi.fourier_at(&t)).norm() < 1e-10);
        let x = [3.0 * g.spacing(), -5.0 * g.spacing()];
        let lhs = phi
            .translate(&x)
            .unwrap()
            .convolve(&psi.translate(&x).unwrap().involute())
            .unwrap();
        assert_eq!(lhs, phi.convolve(&psi.involute()).unwrap());
    }

    #[test]
    fn integral_linearity_and_translation() {
        let g = grid();
        let phi = TestFunction::make_bump(&[0.5], 0.8, &g).unwrap();
        let psi = TestFunction::make_bump(&[-1.0], 0.3, &g).unwrap().scale(c(0.0, 3.0));
        let sum = phi.add(&psi).unwrap();
        assert!((sum.integral() - phi.integral() - psi.integral()).norm() < 1e-14);
        let moved = phi.translate(&[64.0 * g.spacing()]).unwrap();
        assert_eq!(moved.integral(), phi.integral());
    }
}
