//! The gramian-preserving map `U_phi -> (F phi) I` from the time domain of
//! the field into `L^2(F)`, and recovery of the gos measure from field
//! values through it.
//!
//! The map is never stored. It is exercised on finitely many generators:
//! gramians are compared across routes, and `xi(beta)` is pulled back as a
//! combination `sum_i c_i U_{phi_i}` whose Fourier rows reproduce the
//! indicator of `beta` at the atoms.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance_analysis::{gamma_analytic, statistical_scale};
use crate::error::{Error, Result};
use crate::field_synthesis::{empirical_gramian, empirical_inner, FieldEnsemble, GosMeasure};
use crate::grid_calculus::{TestFunction, C64};
use crate::operator_algebra::OperatorValue;
use crate::spectral_measure::{AtomSet, SpectralMeasure};

pub const ANALYTIC_TOL: f64 = 1e-8;
pub const CONDITION_LIMIT: f64 = 1e8;
pub const SPAN_TOL: f64 = 1e-6;

/// `5 / sqrt(M)`.
pub fn statistical_tolerance(ensemble_size: usize) -> f64 {
    5.0 / (ensemble_size as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryReport {
    pub pairs_checked: usize,
    /// Largest disagreement between the analytic routes.
    pub max_gramian_deviation: f64,
    /// Largest `||empirical - analytic|| / scale`.
    pub max_empirical_deviation: f64,
    pub analytic_tolerance: f64,
    pub empirical_tolerance: f64,
    pub pass: bool,
}

impl IsometryReport {
    fn new(pairs: usize, analytic: f64, empirical: f64, m: usize) -> Self {
        let empirical_tolerance = statistical_tolerance(m);
        Self {
            pairs_checked: pairs,
            max_gramian_deviation: analytic,
            max_empirical_deviation: empirical,
            analytic_tolerance: ANALYTIC_TOL,
            empirical_tolerance,
            pass: analytic <= ANALYTIC_TOL && empirical <= empirical_tolerance,
        }
    }
}

fn check_same_measure(measure: &SpectralMeasure, gos: &GosMeasure) -> Result<()> {
    if gos.measure() != measure {
        return Err(Error::InvalidArgument("gos measure was built on a different spectral measure".into()));
    }
    Ok(())
}

/// `sum_j c_j d_j^* S_j S_j^*`: the gramian of two combinations of atom values.
fn factor_gramian(gos: &GosMeasure, c: &[C64], d: &[C64]) -> OperatorValue {
    gos.factors()
        .iter()
        .zip(c.iter().zip(d))
        .fold(OperatorValue::zeros(gos.dim_h()), |acc, (s, (a, b))| {
            let s = s.as_operator();
            &acc + &(s * &s.adjoint()).scale(a * b.conj())
        })
}

/// Compares `K(phi * psi~)`, `∫ F phi conj(F psi) dF` and the gramian of
/// the factor representation pairwise, then the empirical gramian of the
/// synthesized `U_phi, U_psi` against them.
pub fn verify_isometry(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    pairs: &[(TestFunction, TestFunction)],
) -> Result<IsometryReport> {
    check_same_measure(measure, gos)?;
    let rows = pairs
        .par_iter()
        .map(|(phi, psi)| -> Result<(f64, f64)> {
            let fp = measure.fourier_at_atoms(phi)?;
            let fq = measure.fourier_at_atoms(psi)?;
            let conv = gamma_analytic(measure, phi, psi)?;
            let l2 = measure.l2_gramian_values(&fp, &fq)?;
            let factor = factor_gramian(gos, &fp, &fq);
            let analytic = conv.distance(&l2).max(l2.distance(&factor)).max(factor.distance(&conv));
            let emp = empirical_gramian(&gos.evaluate_field(phi)?, &gos.evaluate_field(psi)?)?;
            let scale = statistical_scale(measure, phi, psi)?.max(f64::MIN_POSITIVE);
            Ok((analytic, emp.distance(&l2) / scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let a = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let e = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(IsometryReport::new(pairs.len(), a, e, gos.ensemble_size()))
}

/// Scalar version over `nu = tr F`: `<U_phi, U_psi> = ∫ F phi conj(F psi) dnu`.
pub fn verify_isometry_scalar(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    pairs: &[(TestFunction, TestFunction)],
) -> Result<IsometryReport> {
    check_same_measure(measure, gos)?;
    let nu = measure.trace_measure();
    let rows = pairs
        .par_iter()
        .map(|(phi, psi)| -> Result<(f64, f64)> {
            let fp = measure.fourier_at_atoms(phi)?;
            let fq = measure.fourier_at_atoms(psi)?;
            let probe = phi.convolve(&psi.involute())?;
            let via_k = nu.k_of(&probe);
            let via_l2 = nu.l2_inner_values(&fp, &fq);
            let via_trace = gamma_analytic(measure, phi, psi)?.trace();
            let analytic = (via_k - via_l2).norm().max((via_l2 - via_trace).norm());
            let emp = empirical_inner(&gos.evaluate_field(phi)?, &gos.evaluate_field(psi)?)?;
            let scale = statistical_scale(measure, phi, psi)?.max(f64::MIN_POSITIVE);
            Ok((analytic, (emp - via_l2).norm() / scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let a = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let e = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(IsometryReport::new(pairs.len(), a, e, gos.ensemble_size()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModularityReport {
    pub pairs_checked: usize,
    /// `||[a f I, a g I]_{L^2(F)} - a [f I, g I] a^*||_F`, largest over pairs.
    pub analytic_deviation: f64,
    /// `||[a U_phi, a U_psi]_emp - a [U_phi, U_psi]_emp a^*||_F`.
    pub empirical_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Left multiplication by `a` on both sides of the map.
pub fn verify_modularity(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    pairs: &[(TestFunction, TestFunction)],
    a: &OperatorValue,
) -> Result<ModularityReport> {
    check_same_measure(measure, gos)?;
    let mut analytic: f64 = 0.0;
    let mut empirical: f64 = 0.0;
    for (phi, psi) in pairs {
        let fp = measure.fourier_at_atoms(phi)?;
        let fq = measure.fourier_at_atoms(psi)?;
        let lhs = gos
            .factors()
            .iter()
            .zip(fp.iter().zip(&fq))
            .fold(OperatorValue::zeros(gos.dim_h()), |acc, (s, (f, g))| {
                let as_ = a * s.as_operator();
                &acc + &(&as_ * &as_.adjoint()).scale(f * g.conj())
            });
        let rhs = measure.l2_gramian_values(&fp, &fq)?.congruence(a);
        analytic = analytic.max(lhs.distance(&rhs));

        let u = gos.evaluate_field(phi)?;
        let v = gos.evaluate_field(psi)?;
        let moved = empirical_gramian(&u.left_mul(a)?, &v.left_mul(a)?)?;
        let base = empirical_gramian(&u, &v)?.congruence(a);
        empirical = empirical.max(moved.distance(&base));
    }
    Ok(ModularityReport {
        pairs_checked: pairs.len(),
        analytic_deviation: analytic,
        empirical_deviation: empirical,
        tolerance: ANALYTIC_TOL,
        pass: analytic <= ANALYTIC_TOL && empirical <= ANALYTIC_TOL,
    })
}

/// `E_ij = (F phi_i)(omega_j)` and its condition number.
fn evaluation_matrix(measure: &SpectralMeasure, probes: &[TestFunction]) -> Result<(DMatrix<C64>, f64)> {
    let p = probes.len();
    let j = measure.len();
    if p < j {
        return Err(Error::Underdetermined {
            equations: p,
            unknowns: j,
        });
    }
    let rows = probes
        .iter()
        .map(|phi| measure.fourier_at_atoms(phi))
        .collect::<Result<Vec<_>>>()?;
    let e = DMatrix::from_fn(p, j, |r, c| rows[r][c]);
    let sv = e.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned { condition });
    }
    Ok((e, condition))
}

/// Minimum-norm `c` with `E^T c = target`.
fn pullback(e: &DMatrix<C64>, target: &[C64]) -> Result<Vec<C64>> {
    let et = e.transpose();
    let b = DMatrix::from_column_slice(target.len(), 1, target);
    let c = et
        .svd(true, true)
        .solve(&b, 0.0)
        .map_err(|err| Error::InvalidArgument(err.to_string()))?;
    Ok(c.iter().copied().collect())
}

fn indicator(set: &AtomSet, count: usize) -> Vec<C64> {
    (0..count)
        .map(|j| C64::new(if set.contains(j) { 1.0 } else { 0.0 }, 0.0))
        .collect()
}

fn combine_fields(fields: &[FieldEnsemble], c: &[C64], dim_h: usize, m: usize) -> Result<FieldEnsemble> {
    let mut acc = FieldEnsemble::zeros(dim_h, m);
    for (f, ci) in fields.iter().zip(c) {
        acc.add_scaled(f, *ci)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub set: AtomSet,
    pub coefficients: Vec<[f64; 2]>,
    pub condition: f64,
    /// `||E^T c - chi_beta||`.
    pub coefficient_residual: f64,
    /// Largest per-sample distance to `xi_of_set(beta)`.
    pub max_sample_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub reconstructed: FieldEnsemble,
}

/// Pulls `chi_beta I` back through the probe family and compares
/// `sum_i c_i U_{phi_i}` with `xi(beta)` sample by sample.
pub fn reconstruct_xi(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    probes: &[TestFunction],
    set: &AtomSet,
) -> Result<ReconstructionReport> {
    check_same_measure(measure, gos)?;
    set.check_within(measure.len())?;
    let (e, condition) = evaluation_matrix(measure, probes)?;
    let target = indicator(set, measure.len());
    let c = pullback(&e, &target)?;
    let coefficient_residual = (0..measure.len())
        .map(|j| {
            let v: C64 = (0..probes.len()).map(|i| e[(i, j)] * c[i]).sum();
            (v - target[j]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    let fields = probes
        .iter()
        .map(|phi| gos.evaluate_field(phi))
        .collect::<Result<Vec<_>>>()?;
    let reconstructed = combine_fields(&fields, &c, gos.dim_h(), gos.ensemble_size())?;
    let max_sample_deviation = reconstructed.max_sample_distance(&gos.xi_of_set(set)?)?;
    Ok(ReconstructionReport {
        set: set.clone(),
        coefficients: c.iter().map(|z| [z.re, z.im]).collect(),
        condition,
        coefficient_residual,
        max_sample_deviation,
        tolerance: SPAN_TOL,
        pass: max_sample_deviation <= SPAN_TOL,
        reconstructed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramianReconstructionReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// For every pair of atom subsets, `sum_{i,k} c_i conj(c'_k) Gamma(phi_i, phi_k)`
/// must equal `F(beta_1 ∩ beta_2)`, with `Gamma` from the convolution route.
pub fn verify_reconstructed_gramian(
    measure: &SpectralMeasure,
    probes: &[TestFunction],
    sets: &[AtomSet],
) -> Result<GramianReconstructionReport> {
    let (e, _) = evaluation_matrix(measure, probes)?;
    let p = probes.len();
    let mut gamma = vec![vec![OperatorValue::zeros(measure.dim_h()); p]; p];
    for i in 0..p {
        for k in 0..p {
            gamma[i][k] = gamma_analytic(measure, &probes[i], &probes[k])?;
        }
    }
    let coeffs = sets
        .iter()
        .map(|s| {
            s.check_within(measure.len())?;
            pullback(&e, &indicator(s, measure.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for (a, ca) in sets.iter().zip(&coeffs) {
        for (b, cb) in sets.iter().zip(&coeffs) {
            let mut g = OperatorValue::zeros(measure.dim_h());
            for i in 0..p {
                for k in 0..p {
                    g = &g + &gamma[i][k].scale(ca[i] * cb[k].conj());
                }
            }
            worst = worst.max(g.distance(&measure.mass_of(&a.intersection(b))?));
        }
    }
    Ok(GramianReconstructionReport {
        max_deviation: worst,
        tolerance: SPAN_TOL,
        pass: worst <= SPAN_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    /// Per atom: `||E^T c_j - e_j||`, the analytic residual of `xi({omega_j})`
    /// against the span of the probe fields.
    pub residuals: Vec<f64>,
    /// Per atom: largest per-sample distance of the pulled-back ensemble.
    pub sample_residuals: Vec<f64>,
    /// Largest per-sample distance of `U_phi` from `sum_j (F phi)(omega_j) xi_j`.
    pub forward_residual: f64,
    pub condition: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Both inclusions between the span of the probe fields and the span of
/// the atom values.
pub fn verify_time_domain(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    probes: &[TestFunction],
) -> Result<SpanReport> {
    check_same_measure(measure, gos)?;
    let (_, condition) = evaluation_matrix(measure, probes)?;
    let mut residuals = Vec::with_capacity(measure.len());
    let mut sample_residuals = Vec::with_capacity(measure.len());
    for j in 0..measure.len() {
        let r = reconstruct_xi(measure, gos, probes, &AtomSet::singleton(j))?;
        residuals.push(r.coefficient_residual);
        sample_residuals.push(r.max_sample_deviation);
    }
    let mut forward_residual: f64 = 0.0;
    for phi in probes {
        let u = gos.evaluate_field(phi)?;
        let c = measure.fourier_at_atoms(phi)?;
        let atoms: Vec<FieldEnsemble> = (0..measure.len()).map(|j| gos.atom_value(j).clone()).collect();
        let direct = combine_fields(&atoms, &c, gos.dim_h(), gos.ensemble_size())?;
        forward_residual = forward_residual.max(u.max_sample_distance(&direct)?);
    }
    let pass = residuals
        .iter()
        .chain(&sample_residuals)
        .chain(std::iter::once(&forward_residual))
        .all(|r| *r <= SPAN_TOL);
    Ok(SpanReport {
        residuals,
        sample_residuals,
        forward_residual,
        condition,
        tolerance: SPAN_TOL,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEntry {
    pub set: AtomSet,
    /// `tr F(beta) = nu(beta)`.
    pub trace: f64,
    /// `tr [xi(beta), xi(beta)]` from the factors.
    pub analytic_norm: f64,
    /// `||F(beta) - [xi(beta), xi(beta)]||_F` from the factors.
    pub gramian_deviation: f64,
    /// `(1/M) sum_m ||xi(beta)_m||^2`.
    pub empirical_norm: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormMeasureReport {
    pub entries: Vec<NormEntry>,
    pub pass: bool,
}

/// `nu(beta) = ||xi(beta)||^2` and `F(beta) = [xi(beta), xi(beta)]`. The
/// empirical norm must lie within `5 tr F(beta) / sqrt(M)` of `tr F(beta)`.
pub fn verify_norm_measure(
    measure: &SpectralMeasure,
    gos: &GosMeasure,
    sets: &[AtomSet],
) -> Result<NormMeasureReport> {
    check_same_measure(measure, gos)?;
    let tol = statistical_tolerance(gos.ensemble_size());
    let entries = sets
        .iter()
        .map(|set| {
            let mass = measure.mass_of(set)?;
            let g = gos.analytic_gramian(set, set)?;
            let trace = mass.trace().re;
            let analytic_norm = g.trace().re;
            let gramian_deviation = g.distance(&mass);
            let empirical_norm = gos.xi_of_set(set)?.mean_square_norm();
            let tolerance = tol * trace;
            let pass = (analytic_norm - trace).abs() <= 1e-12 * trace.max(1.0)
                && gramian_deviation <= 1e-10
                && (empirical_norm - trace).abs() <= tolerance;
            Ok(NormEntry {
                set: set.clone(),
                trace,
                analytic_norm,
                gramian_deviation,
                empirical_norm,
                tolerance,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|e| e.pass);
    Ok(NormMeasureReport { entries, pass })
}
