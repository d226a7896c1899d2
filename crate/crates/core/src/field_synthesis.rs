//! Monte Carlo realization of a gramian orthogonally scattered (gos) measure
//! over an atomic spectral measure, and of the field it generates.
//!
//! Each atom `j` carries `xi({omega_j})_m = S_j Z_{j,m}` with `S_j = F_j^{1/2}`
//! and `Z_{j,m}` standard complex Gaussian (`E[Z Z^*] = I`). The noise for a
//! given `(seed, atom, sample)` is drawn from a ChaCha stream keyed by the
//! atom and positioned by the sample index, so ensembles do not depend on how
//! the samples are scheduled across threads.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_calculus::{GridSpec, TestFunction, C64};
use crate::operator_algebra::{OperatorValue, PsdMatrix};
use crate::spectral_measure::{AtomSet, SpectralMeasure};

pub const MIN_ENSEMBLE_SIZE: usize = 100;

/// Words reserved per sample in an atom's stream.
const SAMPLE_STRIDE_BITS: u32 = 32;

/// `n` standard complex normals for `(seed, atom, sample)`.
pub fn standard_complex_normal(seed: u64, atom: usize, sample: usize, n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(atom as u64);
    rng.set_word_pos((sample as u128) << SAMPLE_STRIDE_BITS);
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect()
}

/// `M` samples of a `C^n`-valued random variable, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    dim_h: usize,
    ensemble_size: usize,
    data: Vec<C64>,
}

impl FieldEnsemble {
    pub fn zeros(dim_h: usize, ensemble_size: usize) -> Self {
        Self {
            dim_h,
            ensemble_size,
            data: vec![C64::new(0.0, 0.0); dim_h * ensemble_size],
        }
    }

    pub fn from_samples(dim_h: usize, samples: Vec<Vec<C64>>) -> Result<Self> {
        if samples.iter().any(|s| s.len() != dim_h) {
            return Err(Error::SizeMismatch(format!("samples must have length {dim_h}")));
        }
        Ok(Self {
            dim_h,
            ensemble_size: samples.len(),
            data: samples.into_iter().flatten().collect(),
        })
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn sample(&self, m: usize) -> &[C64] {
        &self.data[m * self.dim_h..(m + 1) * self.dim_h]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.dim_h)
    }

    fn check_compatible(&self, other: &FieldEnsemble) -> Result<()> {
        if self.dim_h != other.dim_h || self.ensemble_size != other.ensemble_size {
            return Err(Error::SizeMismatch(format!(
                "ensembles {}x{} and {}x{}",
                self.ensemble_size, self.dim_h, other.ensemble_size, other.dim_h
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &FieldEnsemble) -> Result<FieldEnsemble> {
        self.check_compatible(other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..*self
        })
    }

    pub fn add_scaled(&mut self, other: &FieldEnsemble, c: C64) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> FieldEnsemble {
        Self {
            data: self.data.iter().map(|a| a * c).collect(),
            ..*self
        }
    }

    /// Applies `a` to every sample.
    pub fn left_mul(&self, a: &OperatorValue) -> Result<FieldEnsemble> {
        if a.dim() != self.dim_h {
            return Err(Error::SizeMismatch(format!(
                "operator of size {} on ensemble of dimension {}",
                a.dim(),
                self.dim_h
            )));
        }
        let n = self.dim_h;
        let m = a.matrix();
        let mut data = vec![C64::new(0.0, 0.0); self.data.len()];
        data.par_chunks_mut(n)
            .zip(self.data.par_chunks(n))
            .for_each(|(out, x)| {
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..n {
                        acc += m[(i, k)] * x[k];
                    }
                    out[i] = acc;
                }
            });
        Ok(Self { data, ..*self })
    }

    pub fn mean(&self) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.dim_h];
        for s in self.samples() {
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.ensemble_size as f64).collect()
    }

    /// Zero-mean check: `|mean| <= 5 sqrt(expected_trace / M)`, where
    /// `expected_trace` is the analytic `E|X|^2`.
    pub fn mean_check(&self, expected_trace: f64) -> MeanCheck {
        let mean_norm = self.mean().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let bound = 5.0 * (expected_trace.max(0.0) / self.ensemble_size as f64).sqrt();
        MeanCheck {
            mean_norm,
            bound,
            pass: mean_norm <= bound,
        }
    }

    /// `(1/M) sum_m |X_m|^2`.
    pub fn mean_square_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.ensemble_size as f64
    }

    /// Largest per-sample Euclidean distance.
    pub fn max_sample_distance(&self, other: &FieldEnsemble) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .samples()
            .zip(other.samples())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// One row per sample, columns `re_0,im_0,re_1,im_1,…` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim_h)
            .flat_map(|k| [format!("re_{k}"), format!("im_{k}")])
            .collect();
        writeln!(w, "sample,{}", header.join(","))?;
        for (m, s) in self.samples().enumerate() {
            let cols: Vec<String> = s
                .iter()
                .flat_map(|v| [format!("{:.16e}", v.re), format!("{:.16e}", v.im)])
                .collect();
            writeln!(w, "{m},{}", cols.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCheck {
    pub mean_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `(1/M) sum_m X_m Y_m^*`.
pub fn empirical_gramian(x: &FieldEnsemble, y: &FieldEnsemble) -> Result<OperatorValue> {
    x.check_compatible(y)?;
    let n = x.dim_h;
    let mut g = nalgebra::DMatrix::<C64>::zeros(n, n);
    for (a, b) in x.samples().zip(y.samples()) {
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += a[i] * b[j].conj();
            }
        }
    }
    OperatorValue::new(g / C64::new(x.ensemble_size as f64, 0.0))
}

/// Empirical cross second moment `(1/M) sum_m <X_m, Y_m>` computed sample by
/// sample, the scalar counterpart of [`empirical_gramian`].
pub fn empirical_inner(x: &FieldEnsemble, y: &FieldEnsemble) -> Result<C64> {
    x.check_compatible(y)?;
    let total: C64 = x
        .samples()
        .zip(y.samples())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v.conj()).sum::<C64>())
        .sum();
    Ok(total / x.ensemble_size as f64)
}

fn combine(values: &[FieldEnsemble], coefficients: &[C64], dim_h: usize, m: usize) -> FieldEnsemble {
    let mut data = vec![C64::new(0.0, 0.0); dim_h * m];
    data.par_chunks_mut(dim_h).enumerate().for_each(|(s, out)| {
        for (v, c) in values.iter().zip(coefficients) {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v.sample(s)) {
                *o += c * x;
            }
        }
    });
    FieldEnsemble {
        dim_h,
        ensemble_size: m,
        data,
    }
}

/// Anything that maps a test function to an ensemble of field values.
pub trait FieldSource: Sync {
    fn evaluate(&self, phi: &TestFunction) -> Result<FieldEnsemble>;
}

impl FieldSource for GosMeasure {
    fn evaluate(&self, phi: &TestFunction) -> Result<FieldEnsemble> {
        self.evaluate_field(phi)
    }
}

impl FieldSource for CompanionField {
    fn evaluate(&self, phi: &TestFunction) -> Result<FieldEnsemble> {
        self.evaluate_field(phi)
    }
}

/// Seeded Monte Carlo realization of the gos measure of a [`SpectralMeasure`].
#[derive(Debug, Clone)]
pub struct GosMeasure {
    measure: SpectralMeasure,
    factors: Vec<PsdMatrix>,
    ensemble_size: usize,
    seed: u64,
    noise: Vec<FieldEnsemble>,
    atom_values: Vec<FieldEnsemble>,
}

impl GosMeasure {
    pub fn new(measure: SpectralMeasure, ensemble_size: usize, seed: u64) -> Result<Self> {
        if ensemble_size < MIN_ENSEMBLE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "ensemble size {ensemble_size} below {MIN_ENSEMBLE_SIZE}"
            )));
        }
        let n = measure.dim_h();
        let factors: Vec<PsdMatrix> = measure.atoms().iter().map(|a| a.weight.sqrt()).collect();
        let noise: Vec<FieldEnsemble> = (0..measure.len())
            .map(|j| {
                let data: Vec<C64> = (0..ensemble_size)
                    .into_par_iter()
                    .flat_map_iter(|m| standard_complex_normal(seed, j, m, n))
                    .collect();
                FieldEnsemble {
                    dim_h: n,
                    ensemble_size,
                    data,
                }
            })
            .collect();
        let atom_values = noise
            .iter()
            .zip(&factors)
            .map(|(z, s)| z.left_mul(s.as_operator()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            measure,
            factors,
            ensemble_size,
            seed,
            noise,
            atom_values,
        })
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn factors(&self) -> &[PsdMatrix] {
        &self.factors
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim_h(&self) -> usize {
        self.measure.dim_h()
    }

    pub fn noise(&self, atom: usize) -> &FieldEnsemble {
        &self.noise[atom]
    }

    /// `xi({omega_j})` for a single atom.
    pub fn atom_value(&self, atom: usize) -> &FieldEnsemble {
        &self.atom_values[atom]
    }

    /// `[xi(A), xi(B)] = sum_{j in A ∩ B} S_j S_j^*` from the factors.
    pub fn analytic_gramian(&self, a: &AtomSet, b: &AtomSet) -> Result<OperatorValue> {
        a.check_within(self.measure.len())?;
        b.check_within(self.measure.len())?;
        Ok(a.intersection(b).iter().fold(OperatorValue::zeros(self.dim_h()), |acc, j| {
            let s = self.factors[j].as_operator();
            &acc + &(s * &s.adjoint())
        }))
    }

    /// `xi(A)_m = sum_{j in A} S_j Z_{j,m}`.
    pub fn xi_of_set(&self, set: &AtomSet) -> Result<FieldEnsemble> {
        set.check_within(self.measure.len())?;
        let c: Vec<C64> = (0..self.measure.len())
            .map(|j| C64::new(if set.contains(j) { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Ok(combine(&self.atom_values, &c, self.dim_h(), self.ensemble_size))
    }

    /// `U_phi = sum_j (F phi)(omega_j) xi({omega_j})`.
    pub fn evaluate_field(&self, phi: &TestFunction) -> Result<FieldEnsemble> {
        let c = self.measure.fourier_at_atoms(phi)?;
        Ok(self.combine_atoms(&c))
    }

    /// `sum_j c_j xi({omega_j})` per sample.
    pub fn combine_atoms(&self, coefficients: &[C64]) -> FieldEnsemble {
        combine(&self.atom_values, coefficients, self.dim_h(), self.ensemble_size)
    }

    /// A second field on the same noise with factors `G_j` in place of `S_j`.
    pub fn companion(&self, factors: Vec<OperatorValue>) -> Result<CompanionField> {
        if factors.len() != self.measure.len() {
            return Err(Error::SizeMismatch(format!(
                "{} companion factors for {} atoms",
                factors.len(),
                self.measure.len()
            )));
        }
        let values = self
            .noise
            .iter()
            .zip(&factors)
            .map(|(z, g)| z.left_mul(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompanionField {
            measure: self.measure.clone(),
            factors,
            values,
        })
    }

    /// The classical field `F(y) = sum_j exp(-2 pi i <omega_j, y>) xi({omega_j})`.
    pub fn classical_field(&self, grid: GridSpec) -> Result<SynthesizedField<'_>> {
        if grid.dim() != self.measure.dim_space() {
            return Err(Error::GridMismatch(format!(
                "grid dimension {} vs measure dimension {}",
                grid.dim(),
                self.measure.dim_space()
            )));
        }
        Ok(SynthesizedField { gos: self, grid })
    }
}

/// A field `V_phi = sum_j (F phi)(omega_j) G_j Z_j` sharing noise with a [`GosMeasure`].
#[derive(Debug, Clone)]
pub struct CompanionField {
    measure: SpectralMeasure,
    factors: Vec<OperatorValue>,
    values: Vec<FieldEnsemble>,
}

impl CompanionField {
    pub fn factors(&self) -> &[OperatorValue] {
        &self.factors
    }

    pub fn xi_of_set(&self, set: &AtomSet) -> Result<FieldEnsemble> {
        set.check_within(self.measure.len())?;
        let c: Vec<C64> = (0..self.measure.len())
            .map(|j| C64::new(if set.contains(j) { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let first = &self.values[0];
        Ok(combine(&self.values, &c, first.dim_h, first.ensemble_size))
    }

    pub fn evaluate_field(&self, phi: &TestFunction) -> Result<FieldEnsemble> {
        let c = self.measure.fourier_at_atoms(phi)?;
        let first = &self.values[0];
        Ok(combine(&self.values, &c, first.dim_h, first.ensemble_size))
    }
}

/// A classical `C^n`-valued random field sampled at grid multi-indices.
/// Indices may fall outside `0..N` for fields defined everywhere.
pub trait ClassicalField: Sync {
    fn grid(&self) -> &GridSpec;
    fn ensemble_at(&self, index: &[i64]) -> Result<FieldEnsemble>;
}

/// Classical field built from the atoms of a [`GosMeasure`].
#[derive(Debug, Clone)]
pub struct SynthesizedField<'a> {
    gos: &'a GosMeasure,
    grid: GridSpec,
}

impl SynthesizedField<'_> {
    fn phases(&self, y: &[f64]) -> Vec<C64> {
        self.gos
            .measure
            .atoms()
            .iter()
            .map(|a| {
                let dot: f64 = a.frequency.iter().zip(y).map(|(w, x)| w * x).sum();
                C64::from_polar(1.0, -2.0 * PI * dot)
            })
            .collect()
    }

    pub fn value_at(&self, y: &[f64]) -> FieldEnsemble {
        self.gos.combine_atoms(&self.phases(y))
    }

    /// `[F(y), F(u)] = sum_j exp(-2 pi i <omega_j, y - u>) F_j`.
    pub fn pointwise_covariance(&self, y: &[f64], u: &[f64]) -> OperatorValue {
        let diff: Vec<f64> = y.iter().zip(u).map(|(a, b)| a - b).collect();
        self.gos.measure.combine(&self.phases(&diff))
    }

    /// `Gamma_{U_F}(phi, psi) = h^{2d} sum_y sum_u phi(y) conj(psi(u)) [F(y), F(u)]`,
    /// a direct double Riemann sum over the pointwise covariance.
    pub fn distribution_covariance(&self, phi: &TestFunction, psi: &TestFunction) -> Result<OperatorValue> {
        for f in [phi, psi] {
            if f.grid() != &self.grid {
                return Err(Error::GridMismatch("test function grid differs from field grid".into()));
            }
        }
        let w = self.grid.cell_volume().powi(2);
        let right: Vec<(Vec<f64>, C64)> = psi
            .nonzeros()
            .map(|(f, v)| (self.grid.point(f), v.conj()))
            .collect();
        let mut acc = OperatorValue::zeros(self.gos.dim_h());
        for (fy, a) in phi.nonzeros() {
            let y = self.grid.point(fy);
            for (u, b) in &right {
                acc = &acc + &self.pointwise_covariance(&y, u).scale(a * b);
            }
        }
        Ok(acc.scale(C64::new(w, 0.0)))
    }
}

impl ClassicalField for SynthesizedField<'_> {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn ensemble_at(&self, index: &[i64]) -> Result<FieldEnsemble> {
        let y: Vec<f64> = index.iter().map(|&i| self.grid.coord(i)).collect();
        Ok(self.value_at(&y))
    }
}

/// Field given by explicit ensembles at every grid point (flat index order).
#[derive(Debug, Clone)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<FieldEnsemble>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<FieldEnsemble>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} ensembles for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(first) = values.first() {
            for v in &values {
                first.check_compatible(v)?;
            }
        }
        Ok(Self { grid, values })
    }
}

impl ClassicalField for SampledField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn ensemble_at(&self, index: &[i64]) -> Result<FieldEnsemble> {
        self.grid
            .flatten(index)
            .map(|f| self.values[f].clone())
            .ok_or_else(|| Error::GridMismatch(format!("index {index:?} outside sampled field")))
    }
}

/// `(tau_x F)(y) = F(y - x)` for a shift of whole cells.
pub struct ShiftedField<'a> {
    inner: &'a dyn ClassicalField,
    cells: Vec<i64>,
}

impl<'a> ShiftedField<'a> {
    pub fn new(inner: &'a dyn ClassicalField, shift: &[f64]) -> Result<Self> {
        let cells = inner.grid().shift_to_cells(shift)?;
        Ok(Self { inner, cells })
    }
}

impl ClassicalField for ShiftedField<'_> {
    fn grid(&self) -> &GridSpec {
        self.inner.grid()
    }

    fn ensemble_at(&self, index: &[i64]) -> Result<FieldEnsemble> {
        let moved: Vec<i64> = index.iter().zip(&self.cells).map(|(i, c)| i - c).collect();
        self.inner.ensemble_at(&moved)
    }
}

/// `U_F(phi) = h^d sum_y phi(y) F(y)`, per sample.
pub fn embed_classical_field(field: &dyn ClassicalField, phi: &TestFunction) -> Result<FieldEnsemble> {
    let grid = field.grid();
    if phi.grid() != grid {
        return Err(Error::GridMismatch("test function grid differs from field grid".into()));
    }
    let w = grid.cell_volume();
    let mut acc: Option<FieldEnsemble> = None;
    for (flat, v) in phi.nonzeros() {
        let idx: Vec<i64> = grid.unflatten(flat).into_iter().map(|i| i as i64).collect();
        let value = field.ensemble_at(&idx)?;
        let acc = acc.get_or_insert_with(|| FieldEnsemble::zeros(value.dim_h, value.ensemble_size));
        acc.add_scaled(&value, v * w)?;
    }
    match acc {
        Some(a) => Ok(a),
        None => {
            let probe = field.ensemble_at(&vec![(grid.points_per_axis() / 2) as i64; grid.dim()])?;
            Ok(FieldEnsemble::zeros(probe.dim_h, probe.ensemble_size))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifierReport {
    pub widths: Vec<f64>,
    /// `||Gamma(tau_x phi, tau_x psi) - Gamma(phi, psi)||_F / ||target||_F` per width.
    pub stationarity_differences: Vec<f64>,
    /// `||Gamma(phi_eps^{y0}, phi_eps^{u0}) - [F(y0), F(u0)]||_F / ||target||_F` per width.
    pub relative_errors: Vec<f64>,
    pub target: OperatorValue,
    pub classical_stationarity_difference: f64,
    pub final_tolerance: f64,
    pub stationarity_tolerance: f64,
    pub monotone: bool,
    pub pass: bool,
}

pub const MOLLIFIER_FINAL_TOL: f64 = 0.05;
pub const MOLLIFIER_STATIONARITY_TOL: f64 = 1e-10;

/// Recovers the pointwise covariance `[F(y0), F(u0)]` from the distribution
/// covariance of mollifiers centered at `y0`, `u0`, and checks that shifting
/// both mollifiers by `x` leaves it unchanged.
pub fn mollifier_limit_check(
    field: &SynthesizedField<'_>,
    shift: &[f64],
    y0: &[f64],
    u0: &[f64],
    widths: &[f64],
) -> Result<MollifierReport> {
    let grid = &field.grid;
    let h = grid.spacing();
    if widths.is_empty() {
        return Err(Error::InvalidArgument("no mollifier widths".into()));
    }
    if let Some(w) = widths.iter().find(|&&w| w < 4.0 * h - 1e-12) {
        return Err(Error::InvalidArgument(format!("width {w} below 4h = {}", 4.0 * h)));
    }
    if widths.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument("widths must be strictly decreasing".into()));
    }
    grid.shift_to_cells(shift)?;
    let target = field.pointwise_covariance(y0, u0);
    let moved_y: Vec<f64> = y0.iter().zip(shift).map(|(a, b)| a + b).collect();
    let moved_u: Vec<f64> = u0.iter().zip(shift).map(|(a, b)| a + b).collect();
    let scale = target.frobenius_norm().max(f64::MIN_POSITIVE);
    let classical_stationarity_difference =
        field.pointwise_covariance(&moved_y, &moved_u).distance(&target) / scale;

    let mut stationarity_differences = Vec::with_capacity(widths.len());
    let mut relative_errors = Vec::with_capacity(widths.len());
    for &eps in widths {
        let phi = TestFunction::make_bump(y0, eps, grid)?;
        let psi = TestFunction::make_bump(u0, eps, grid)?;
        let base = field.distribution_covariance(&phi, &psi)?;
        let moved = field.distribution_covariance(&phi.translate(shift)?, &psi.translate(shift)?)?;
        stationarity_differences.push(moved.distance(&base) / scale);
        relative_errors.push(base.distance(&target) / scale);
    }
    let monotone = relative_errors.windows(2).all(|p| p[1] < p[0]);
    let last = *relative_errors.last().expect("nonempty");
    let stationary = stationarity_differences
        .iter()
        .chain(std::iter::once(&classical_stationarity_difference))
        .all(|d| *d <= MOLLIFIER_STATIONARITY_TOL);
    Ok(MollifierReport {
        widths: widths.to_vec(),
        stationarity_differences,
        relative_errors,
        target,
        classical_stationarity_difference,
        final_tolerance: MOLLIFIER_FINAL_TOL,
        stationarity_tolerance: MOLLIFIER_STATIONARITY_TOL,
        monotone,
        pass: monotone && stationary && last <= MOLLIFIER_FINAL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn small_gos(seed: u64) -> GosMeasure {
        GosMeasure::new(fixtures::measure(), 2_000, seed).unwrap()
    }

    #[test]
    fn noise_is_reproducible_and_distinct() {
        let a = standard_complex_normal(42, 1, 17, 2);
        assert_eq!(a, standard_complex_normal(42, 1, 17, 2));
        assert_ne!(a, standard_complex_normal(42, 2, 17, 2));
        assert_ne!(a, standard_complex_normal(42, 1, 18, 2));
        assert_ne!(a, standard_complex_normal(43, 1, 17, 2));
    }

    #[test]
    fn ensemble_matches_direct_noise() {
        let gos = small_gos(9);
        assert_eq!(gos.noise(2).sample(123), &standard_complex_normal(9, 2, 123, 2)[..]);
    }

    #[test]
    fn rejects_small_ensembles() {
        assert!(GosMeasure::new(fixtures::measure(), 99, 1).is_err());
    }

    #[test]
    fn analytic_gramian_of_singletons_is_weight() {
        let gos = small_gos(1);
        let f = gos.measure().clone();
        for j in 0..3 {
            let s = AtomSet::singleton(j);
            assert!(gos.analytic_gramian(&s, &s).unwrap().distance(f.weight(j)) < 1e-12);
        }
    }

    #[test]
    fn xi_of_empty_set_is_zero_and_additive() {
        let gos = small_gos(3);
        let zero = gos.xi_of_set(&AtomSet::empty()).unwrap();
        assert_eq!(zero, FieldEnsemble::zeros(2, 2_000));
        let a: AtomSet = [0, 2].into_iter().collect();
        let b = AtomSet::singleton(1);
        let sum = gos.xi_of_set(&a).unwrap().add(&gos.xi_of_set(&b).unwrap()).unwrap();
        let joint = gos.xi_of_set(&a.union(&b)).unwrap();
        assert!(sum.max_sample_distance(&joint).unwrap() < 1e-14);
        assert!(matches!(
            gos.xi_of_set(&AtomSet::singleton(3)),
            Err(Error::UnknownAtom { .. })
        ));
    }

    #[test]
    fn single_atom_field_is_integral_times_noise() {
        let m = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]).unwrap();
        let gos = GosMeasure::new(m, 200, 5).unwrap();
        let g = fixtures::grid();
        let phi = TestFunction::make_bump(&[0.3], 0.5, &g).unwrap().scale(C64::new(2.0, 1.0));
        let u = gos.evaluate_field(&phi).unwrap();
        let expect = gos.noise(0).scale(phi.fourier_at(&[0.0]));
        assert!(u.max_sample_distance(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn field_is_linear() {
        let gos = small_gos(4);
        let g = fixtures::grid();
        let phi = TestFunction::make_bump(&[0.3], 0.2, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.4], 0.15, &g).unwrap().scale(C64::new(0.0, 2.0));
        let lhs = gos.evaluate_field(&phi.add(&psi).unwrap()).unwrap();
        let rhs = gos
            .evaluate_field(&phi)
            .unwrap()
            .add(&gos.evaluate_field(&psi).unwrap())
            .unwrap();
        assert!(lhs.max_sample_distance(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn empirical_gramian_basics() {
        let gos = small_gos(5);
        let x = gos.xi_of_set(&AtomSet::all(3)).unwrap();
        let g = empirical_gramian(&x, &x).unwrap();
        assert!(g.min_eigenvalue() >= -1e-12);
        assert!((g.trace().re - x.mean_square_norm()).abs() < 1e-12);
        let zero = FieldEnsemble::zeros(2, 2_000);
        assert_eq!(empirical_gramian(&x, &zero).unwrap().frobenius_norm(), 0.0);
        let other = FieldEnsemble::zeros(2, 100);
        assert!(matches!(empirical_gramian(&x, &other), Err(Error::SizeMismatch(_))));
        assert!((empirical_inner(&x, &x).unwrap().re - g.trace().re).abs() < 1e-12);
    }

    #[test]
    fn ensembles_pass_mean_check() {
        let gos = small_gos(6);
        let f = gos.measure().clone();
        for set in AtomSet::power_set(3).into_iter().skip(1) {
            let x = gos.xi_of_set(&set).unwrap();
            let tr = f.mass_of(&set).unwrap().trace().re;
            assert!(x.mean_check(tr).pass);
        }
    }

    #[test]
    fn constant_classical_field() {
        let g = GridSpec::new(1, 2.0, 16).unwrap();
        let noise = FieldEnsemble::from_samples(
            2,
            (0..10).map(|m| standard_complex_normal(1, 0, m, 2)).collect(),
        )
        .unwrap();
        let field = SampledField::new(g.clone(), vec![noise.clone(); g.len()]).unwrap();
        let phi = TestFunction::make_bump(&[0.0], 0.9, &g).unwrap().scale(C64::new(1.0, 1.0));
        let u = embed_classical_field(&field, &phi).unwrap();
        assert!(u.max_sample_distance(&noise.scale(phi.integral())).unwrap() < 1e-14);
    }

    #[test]
    fn embedded_field_matches_spectral_field() {
        let gos = small_gos(7);
        let g = fixtures::grid();
        let field = gos.classical_field(g.clone()).unwrap();
        for phi in fixtures::narrow_bumps(&g, 3, 8) {
            let a = embed_classical_field(&field, &phi).unwrap();
            let b = gos.evaluate_field(&phi).unwrap();
            assert!(a.max_sample_distance(&b).unwrap() < 1e-6);
        }
    }

    #[test]
    fn translation_coherence() {
        let gos = small_gos(8);
        let g = fixtures::grid();
        let field = gos.classical_field(g.clone()).unwrap();
        let x = [24.0 * g.spacing()];
        let shifted = ShiftedField::new(&field, &x).unwrap();
        let phi = TestFunction::make_bump(&[0.2], 0.3, &g).unwrap();
        let lhs = embed_classical_field(&shifted, &phi).unwrap();
        let rhs = embed_classical_field(&field, &phi.translate(&[-x[0]]).unwrap()).unwrap();
        assert!(lhs.max_sample_distance(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn mollifier_single_atom_is_exact() {
        let m = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]).unwrap();
        let gos = GosMeasure::new(m, 100, 1).unwrap();
        let field = gos.classical_field(fixtures::grid()).unwrap();
        let r = mollifier_limit_check(&field, &[1.0], &[0.5], &[-0.25], &[0.5, 0.25, 0.125]).unwrap();
        for e in &r.relative_errors {
            assert!(*e < 1e-12);
        }
    }

    #[test]
    fn mollifier_zero_shift_has_no_difference() {
        let gos = small_gos(2);
        let field = gos.classical_field(fixtures::grid()).unwrap();
        let r = mollifier_limit_check(&field, &[0.0], &[0.5], &[-0.25], &[0.5, 0.25]).unwrap();
        assert!(r.stationarity_differences.iter().all(|d| *d == 0.0));
        assert!(r.monotone);
    }

    #[test]
    fn mollifier_argument_checks() {
        let gos = small_gos(2);
        let field = gos.classical_field(fixtures::grid()).unwrap();
        assert!(mollifier_limit_check(&field, &[1.0], &[0.5], &[0.0], &[0.1]).is_err());
        assert!(mollifier_limit_check(&field, &[1.0], &[0.5], &[0.0], &[0.25, 0.5]).is_err());
        assert!(mollifier_limit_check(&field, &[0.01], &[0.5], &[0.0], &[0.25]).is_err());
    }

    #[test]
    fn csv_layout() {
        let x = FieldEnsemble::from_samples(2, vec![vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)]]).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample,re_0,im_0,re_1,im_1");
        assert_eq!(
            lines[1],
            "0,1.0000000000000000e0,-2.0000000000000000e0,5.0000000000000000e-1,0.0000000000000000e0"
        );
    }
}
