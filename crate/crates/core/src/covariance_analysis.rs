//! Covariances of distribution fields built on a spectral measure, extraction
//! of the spectral distribution from a covariance oracle, and the inverse
//! problem of fitting a spectral measure to covariance data.
//!
//! With `chi = phi * psi~`, the covariance factors through the spectral
//! distribution: `Gamma(phi, psi) = K(chi)`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_stationarity::CovarianceOracle;
use crate::error::{Error, Result};
use crate::field_synthesis::{empirical_gramian, empirical_inner, FieldSource};
use crate::grid_calculus::{GridSpec, TestFunction, C64};
use crate::operator_algebra::{psd_check, psd_project, MatrixJson, OperatorValue};
use crate::spectral_measure::{ScalarMeasure, SpectralMeasure};

/// `Gamma(phi, psi) = K(phi * psi~)`.
pub fn gamma_analytic(measure: &SpectralMeasure, phi: &TestFunction, psi: &TestFunction) -> Result<OperatorValue> {
    measure.k_of(&phi.convolve(&psi.involute())?)
}

/// `sqrt(tr Gamma(phi, phi) tr Gamma(psi, psi))`, the natural size of the
/// Monte Carlo error of an empirical `Gamma(phi, psi)`.
pub fn statistical_scale(measure: &SpectralMeasure, phi: &TestFunction, psi: &TestFunction) -> Result<f64> {
    let nu = measure.trace_measure();
    let a = nu.l2_inner_values(&measure.fourier_at_atoms(phi)?, &measure.fourier_at_atoms(phi)?).re;
    let b = nu.l2_inner_values(&measure.fourier_at_atoms(psi)?, &measure.fourier_at_atoms(psi)?).re;
    Ok((a * b).sqrt())
}

/// `[U_phi, V_psi] = sum_j (F phi)(omega_j) conj((F psi)(omega_j)) S_j G_j^*`.
pub fn cross_covariance_analytic(
    measure: &SpectralMeasure,
    s: &[OperatorValue],
    g: &[OperatorValue],
    phi: &TestFunction,
    psi: &TestFunction,
) -> Result<OperatorValue> {
    let j = measure.len();
    if s.len() != j || g.len() != j {
        return Err(Error::SizeMismatch(format!(
            "{} and {} factors for {j} atoms",
            s.len(),
            g.len()
        )));
    }
    let n = measure.dim_h();
    if s.iter().chain(g).any(|m| m.dim() != n) {
        return Err(Error::SizeMismatch(format!("factors must be {n}x{n}")));
    }
    let fp = measure.fourier_at_atoms(phi)?;
    let fq = measure.fourier_at_atoms(psi)?;
    Ok((0..j).fold(OperatorValue::zeros(n), |acc, k| {
        &acc + &(&s[k] * &g[k].adjoint()).scale(fp[k] * fq[k].conj())
    }))
}

/// Exact covariance of the field with spectral measure `F`.
#[derive(Debug, Clone)]
pub struct AnalyticCovariance {
    pub measure: SpectralMeasure,
}

impl CovarianceOracle<TestFunction> for AnalyticCovariance {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        gamma_analytic(&self.measure, a, b)
    }
}

/// Exact cross covariance of two fields sharing one gos base.
#[derive(Debug, Clone)]
pub struct CrossCovariance {
    pub measure: SpectralMeasure,
    pub s: Vec<OperatorValue>,
    pub g: Vec<OperatorValue>,
}

impl CovarianceOracle<TestFunction> for CrossCovariance {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        cross_covariance_analytic(&self.measure, &self.s, &self.g, a, b)
    }
}

/// Sample cross gramian `(1/M) sum_m U_phi,m V_psi,m^*` of two synthesized fields.
pub struct EmpiricalCovariance<'a> {
    pub u: &'a dyn FieldSource,
    pub v: &'a dyn FieldSource,
}

impl<'a> EmpiricalCovariance<'a> {
    pub fn new(u: &'a dyn FieldSource, v: &'a dyn FieldSource) -> Self {
        Self { u, v }
    }

    pub fn auto(u: &'a dyn FieldSource) -> Self {
        Self { u, v: u }
    }

    pub fn scalar(&self, a: &TestFunction, b: &TestFunction) -> Result<C64> {
        empirical_inner(&self.u.evaluate(a)?, &self.v.evaluate(b)?)
    }
}

impl CovarianceOracle<TestFunction> for EmpiricalCovariance<'_> {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        empirical_gramian(&self.u.evaluate(a)?, &self.v.evaluate(b)?)
    }

    fn scale(&self, a: &TestFunction, b: &TestFunction) -> Result<f64> {
        let ua = self.u.evaluate(a)?.mean_square_norm();
        let vb = self.v.evaluate(b)?.mean_square_norm();
        Ok((ua * vb).sqrt().max(f64::MIN_POSITIVE))
    }
}

/// `Gamma(phi, psi) = (∫ x_1 phi)(conj ∫ x_1 psi) I`: not translation invariant.
#[derive(Debug, Clone, Copy)]
pub struct MomentOracle {
    pub dim_h: usize,
}

impl CovarianceOracle<TestFunction> for MomentOracle {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        Ok(OperatorValue::identity(self.dim_h).scale(a.first_moment() * b.first_moment().conj()))
    }
}

/// `V(theta) K(phi * psi~) V(theta)^*` with `V` a rotation in the first two
/// coordinates by the energy center of `phi`. Traces are translation
/// invariant, operators are not.
#[derive(Debug, Clone)]
pub struct RotatingOracle {
    pub measure: SpectralMeasure,
}

impl RotatingOracle {
    fn rotation(&self, theta: f64) -> Result<OperatorValue> {
        let n = self.measure.dim_h();
        if n < 2 {
            return Err(Error::InvalidArgument("rotation needs dim_h >= 2".into()));
        }
        let mut m = DMatrix::<C64>::identity(n, n);
        let (s, c) = theta.sin_cos();
        m[(0, 0)] = C64::new(c, 0.0);
        m[(0, 1)] = C64::new(-s, 0.0);
        m[(1, 0)] = C64::new(s, 0.0);
        m[(1, 1)] = C64::new(c, 0.0);
        OperatorValue::new(m)
    }
}

impl CovarianceOracle<TestFunction> for RotatingOracle {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        let v = self.rotation(a.energy_center())?;
        Ok(gamma_analytic(&self.measure, a, b)?.congruence(&v))
    }
}

/// `K(chi) = diag(∫chi, -∫chi, 0, …)`: a covariance candidate that is not
/// positive definite.
#[derive(Debug, Clone, Copy)]
pub struct IndefiniteOracle {
    pub dim_h: usize,
}

impl CovarianceOracle<TestFunction> for IndefiniteOracle {
    fn gamma(&self, a: &TestFunction, b: &TestFunction) -> Result<OperatorValue> {
        let mass = a.convolve(&b.involute())?.integral();
        let mut d = vec![0.0; self.dim_h];
        d[0] = 1.0;
        if self.dim_h > 1 {
            d[1] = -1.0;
        }
        Ok(OperatorValue::diagonal(&d)?.scale(mass))
    }
}

/// Values of `K` on probes `chi = phi * psi~`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDistributionEstimate {
    pub probes: Vec<TestFunction>,
    pub values: Vec<OperatorValue>,
    /// Normalization per probe (1 for exact oracles).
    pub scales: Vec<f64>,
    /// Whether the probe came from a pair `(phi, phi)`.
    pub self_probe: Vec<bool>,
    /// Largest disagreement between representatives of one probe.
    pub consistency_deviation: f64,
    pub tolerance: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDistributionSummary {
    pub probes: usize,
    pub consistency_deviation: f64,
    pub tolerance: f64,
    pub valid: bool,
}

impl SpectralDistributionEstimate {
    pub fn summary(&self) -> SpectralDistributionSummary {
        SpectralDistributionSummary {
            probes: self.probes.len(),
            consistency_deviation: self.consistency_deviation,
            tolerance: self.tolerance,
            valid: self.valid,
        }
    }
}

/// Builds `K` on the probes of the generator pairs. Each pair and its joint
/// translates share one probe; their covariances must coincide.
pub fn extract_spectral_distribution<O>(
    oracle: &O,
    generator_pairs: &[(TestFunction, TestFunction)],
    shifts: &[Vec<f64>],
    tolerance: f64,
) -> Result<SpectralDistributionEstimate>
where
    O: CovarianceOracle<TestFunction> + ?Sized,
{
    let mut est = SpectralDistributionEstimate {
        probes: Vec::new(),
        values: Vec::new(),
        scales: Vec::new(),
        self_probe: Vec::new(),
        consistency_deviation: 0.0,
        tolerance,
        valid: true,
    };
    for (phi, psi) in generator_pairs {
        let probe = phi.convolve(&psi.involute())?;
        let value = oracle.gamma(phi, psi)?;
        let scale = oracle.scale(phi, psi)?;
        let mut worst: f64 = 0.0;
        for x in shifts {
            let (a, b) = (phi.translate(x)?, psi.translate(x)?);
            worst = worst.max(oracle.gamma(&a, &b)?.distance(&value) / scale);
        }
        let is_self = phi == psi;
        if let Some(k) = est.probes.iter().position(|p| *p == probe) {
            let s = est.scales[k].max(scale);
            worst = worst.max(est.values[k].distance(&value) / s);
            est.self_probe[k] |= is_self;
        } else {
            est.probes.push(probe);
            est.values.push(value);
            est.scales.push(scale);
            est.self_probe.push(is_self);
        }
        est.consistency_deviation = est.consistency_deviation.max(worst);
    }
    est.valid = est.consistency_deviation <= tolerance;
    Ok(est)
}

/// Scalar counterpart `k(chi)` of a [`SpectralDistributionEstimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarDistributionEstimate {
    pub probes: Vec<TestFunction>,
    pub values: Vec<C64>,
}

impl ScalarDistributionEstimate {
    /// `k = F nu` evaluated on the probes.
    pub fn from_measure(nu: &ScalarMeasure, probes: &[TestFunction]) -> Self {
        Self {
            probes: probes.to_vec(),
            values: probes.iter().map(|p| nu.k_of(p)).collect(),
        }
    }

    /// Scalar covariances `gamma(phi, psi)` of the generator pairs; repeated
    /// probes keep their first value.
    pub fn from_pairs<G>(gamma: G, pairs: &[(TestFunction, TestFunction)]) -> Result<Self>
    where
        G: Fn(&TestFunction, &TestFunction) -> Result<C64>,
    {
        let mut out = Self {
            probes: Vec::new(),
            values: Vec::new(),
        };
        for (phi, psi) in pairs {
            let probe = phi.convolve(&psi.involute())?;
            if !out.probes.contains(&probe) {
                out.values.push(gamma(phi, psi)?);
                out.probes.push(probe);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLinkReport {
    pub checked: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `max |tr K(chi) - k(chi)| / scale(chi)` over shared probes.
pub fn verify_trace_link(
    k_op: &SpectralDistributionEstimate,
    k_scalar: &ScalarDistributionEstimate,
    tolerance: f64,
) -> Result<TraceLinkReport> {
    if k_op.probes != k_scalar.probes {
        return Err(Error::InvalidArgument("operator and scalar estimates use different probes".into()));
    }
    let max_deviation = k_op
        .values
        .iter()
        .zip(&k_scalar.values)
        .zip(&k_op.scales)
        .map(|((k, s), scale)| (k.trace() - s).norm() / scale)
        .fold(0.0, f64::max);
    Ok(TraceLinkReport {
        checked: k_op.probes.len(),
        max_deviation,
        tolerance,
        pass: max_deviation <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveDefinitenessReport {
    pub checked: usize,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Smallest eigenvalue of `K(phi * phi~) / scale` over the self probes.
pub fn verify_positive_definiteness(
    k_op: &SpectralDistributionEstimate,
    tolerance: f64,
) -> Result<PositiveDefinitenessReport> {
    let mut checked = 0;
    let mut min_eigenvalue = f64::INFINITY;
    for ((v, s), is_self) in k_op.values.iter().zip(&k_op.scales).zip(&k_op.self_probe) {
        if *is_self {
            checked += 1;
            min_eigenvalue = min_eigenvalue.min(psd_check(v).min_eigenvalue / s);
        }
    }
    if checked == 0 {
        return Err(Error::InvalidArgument("no probes of the form phi * phi~".into()));
    }
    Ok(PositiveDefinitenessReport {
        checked,
        min_eigenvalue,
        tolerance,
        pass: min_eigenvalue >= -tolerance,
    })
}

/// `max ||Gamma(psi, phi) - Gamma(phi, psi)^*||_F / scale`.
pub fn hermitian_symmetry_deviation<O>(oracle: &O, pairs: &[(TestFunction, TestFunction)]) -> Result<f64>
where
    O: CovarianceOracle<TestFunction> + ?Sized,
{
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        let d = oracle.gamma(b, a)?.distance(&oracle.gamma(a, b)?.adjoint());
        worst = worst.max(d / oracle.scale(a, b)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical { ensemble_size: usize, seed: u64 },
}

impl Provenance {
    /// Statistical tolerance `5 / sqrt(M)`, zero for analytic data.
    pub fn tolerance(&self) -> f64 {
        match self {
            Provenance::Analytic => 0.0,
            Provenance::Empirical { ensemble_size, .. } => 5.0 / (*ensemble_size as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEntry {
    pub phi: TestFunction,
    pub psi: TestFunction,
    pub value: OperatorValue,
}

/// Covariance values on a list of test-function pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub grid: GridSpec,
    pub entries: Vec<CovarianceEntry>,
    pub provenance: Provenance,
}

/// Sparse samples `[[flat_index, re, im], …]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseFunction(pub Vec<(usize, f64, f64)>);

impl SparseFunction {
    pub fn from_function(f: &TestFunction) -> Self {
        Self(f.nonzeros().map(|(i, v)| (i, v.re, v.im)).collect())
    }

    pub fn to_function(&self, grid: &GridSpec) -> Result<TestFunction> {
        let mut samples = vec![C64::new(0.0, 0.0); grid.len()];
        for &(i, re, im) in &self.0 {
            let slot = samples
                .get_mut(i)
                .ok_or_else(|| Error::GridMismatch(format!("sample index {i} outside grid")))?;
            *slot = C64::new(re, im);
        }
        TestFunction::from_samples(grid.clone(), samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryJson {
    pub phi: SparseFunction,
    pub psi: SparseFunction,
    pub value: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJson {
    pub grid: GridSpec,
    pub provenance: Provenance,
    pub entries: Vec<EntryJson>,
}

impl CovarianceTable {
    /// Evaluates the oracle on every pair, in parallel when allowed.
    pub fn from_oracle<O>(
        oracle: &O,
        pairs: &[(TestFunction, TestFunction)],
        provenance: Provenance,
    ) -> Result<Self>
    where
        O: CovarianceOracle<TestFunction> + ?Sized,
    {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidArgument("no pairs for covariance table".into()))?;
        let grid = first.0.grid().clone();
        let eval = |(phi, psi): &(TestFunction, TestFunction)| -> Result<CovarianceEntry> {
            if phi.grid() != &grid || psi.grid() != &grid {
                return Err(Error::GridMismatch("table pairs must share one grid".into()));
            }
            Ok(CovarianceEntry {
                phi: phi.clone(),
                psi: psi.clone(),
                value: oracle.gamma(phi, psi)?,
            })
        };
        let entries = if oracle.parallel_safe() {
            pairs.par_iter().map(eval).collect::<Result<Vec<_>>>()?
        } else {
            pairs.iter().map(eval).collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            grid,
            entries,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| CovarianceEntry {
                    value: e.value.scale(C64::new(c, 0.0)),
                    ..e.clone()
                })
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> TableJson {
        TableJson {
            grid: self.grid.clone(),
            provenance: self.provenance.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryJson {
                    phi: SparseFunction::from_function(&e.phi),
                    psi: SparseFunction::from_function(&e.psi),
                    value: MatrixJson::from(&e.value),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &TableJson) -> Result<Self> {
        let entries = json
            .entries
            .iter()
            .map(|e| {
                Ok(CovarianceEntry {
                    phi: e.phi.to_function(&json.grid)?,
                    psi: e.psi.to_function(&json.grid)?,
                    value: OperatorValue::try_from(&e.value)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dims: Vec<usize> = entries.iter().map(|e| e.value.dim()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::SizeMismatch("table values have different sizes".into()));
        }
        Ok(Self {
            grid: json.grid.clone(),
            entries,
            provenance: json.provenance.clone(),
        })
    }

    /// Columns `pair,row,col,re,im`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "pair,row,col,re,im")?;
        for (p, e) in self.entries.iter().enumerate() {
            let m = e.value.matrix();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    writeln!(w, "{p},{r},{c},{:.16e},{:.16e}", m[(r, c)].re, m[(r, c)].im)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub measure: SpectralMeasure,
    /// `sqrt(sum_p ||Gamma_p - sum_j a_pj F_j||_F^2)` at the returned weights.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

fn objective(design: &DMatrix<C64>, targets: &[OperatorValue], weights: &[OperatorValue]) -> f64 {
    targets
        .iter()
        .enumerate()
        .map(|(p, t)| {
            let model = weights
                .iter()
                .enumerate()
                .fold(OperatorValue::zeros(t.dim()), |acc, (j, w)| &acc + &w.scale(design[(p, j)]));
            t.distance(&model).powi(2)
        })
        .sum()
}

/// Least-squares PSD weights at fixed frequencies for
/// `Gamma(phi, psi) ≈ sum_j (F phi)(omega_j) conj((F psi)(omega_j)) F_j`.
///
/// Starts from the entrywise unconstrained solution projected onto the PSD
/// cone, then cycles over atoms. For one atom with the others fixed the
/// objective is `|a_j|^2 ||F_j - X_j||_F^2 + const`, so the exact constrained
/// update is the PSD projection of `X_j`.
pub fn fit_spectral_measure(
    table: &CovarianceTable,
    candidate_frequencies: &[Vec<f64>],
    options: FitOptions,
) -> Result<FitResult> {
    let p = table.len();
    let jn = candidate_frequencies.len();
    if jn == 0 {
        return Err(Error::InvalidArgument("no candidate frequencies".into()));
    }
    if p < jn {
        return Err(Error::Underdetermined {
            equations: p,
            unknowns: jn,
        });
    }
    let d = table.grid.dim();
    if let Some(w) = candidate_frequencies.iter().find(|w| w.len() != d) {
        return Err(Error::InvalidArgument(format!("frequency {w:?} is not in R^{d}")));
    }
    let n = table.entries[0].value.dim();
    let design = DMatrix::<C64>::from_fn(p, jn, |r, j| {
        let e = &table.entries[r];
        let w = &candidate_frequencies[j];
        e.phi.fourier_at(w) * e.psi.fourier_at(w).conj()
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.rank(smax * 1e-12);
    if smax == 0.0 || rank < jn {
        return Err(Error::Underdetermined {
            equations: rank,
            unknowns: jn,
        });
    }
    let targets: Vec<OperatorValue> = table.entries.iter().map(|e| e.value.clone()).collect();
    let rhs = DMatrix::<C64>::from_fn(p, n * n, |r, k| targets[r].matrix()[(k / n, k % n)]);
    let solved = svd
        .solve(&rhs, smax * 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut weights = (0..jn)
        .map(|j| {
            let m = OperatorValue::new(DMatrix::from_fn(n, n, |r, c| solved[(j, r * n + c)]))?;
            Ok(psd_project(&m).into_operator())
        })
        .collect::<Result<Vec<_>>>()?;

    let column_norms: Vec<f64> = (0..jn)
        .map(|j| design.column(j).iter().map(|a| a.norm_sqr()).sum())
        .collect();
    let mut current = objective(&design, &targets, &weights);
    let mut iterations = 0;
    let mut converged = current == 0.0;
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        for j in 0..jn {
            let mut x = OperatorValue::zeros(n);
            for (r, t) in targets.iter().enumerate() {
                let mut resid = t.clone();
                for (k, w) in weights.iter().enumerate() {
                    if k != j {
                        resid = &resid - &w.scale(design[(r, k)]);
                    }
                }
                x = &x + &resid.scale(design[(r, j)].conj());
            }
            let x = x.scale(C64::new(1.0 / column_norms[j], 0.0));
            weights[j] = psd_project(&x).into_operator();
        }
        let next = objective(&design, &targets, &weights);
        let change = (current - next).abs() / current.max(f64::MIN_POSITIVE);
        current = next;
        converged = change < options.relative_tolerance || current == 0.0;
    }
    let atoms = candidate_frequencies.iter().cloned().zip(weights).collect();
    Ok(FitResult {
        measure: SpectralMeasure::new(d, n, atoms)?,
        residual: current.sqrt(),
        iterations,
        converged,
    })
}
