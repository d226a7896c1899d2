//! Semigroup actions on index sets and invariance checks of covariance
//! oracles under them.
//!
//! A check evaluates an oracle on a finite witness family: every actor is
//! applied to every index pair and the largest deviation is reported along
//! with the `(actor, pair)` attaining it.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_calculus::{TestFunction, C64};
use crate::operator_algebra::OperatorValue;
use crate::spectral_measure::AtomSet;

/// Covariance `Gamma(a, b)` on an index set `I`.
pub trait CovarianceOracle<I>: Sync {
    fn gamma(&self, a: &I, b: &I) -> Result<OperatorValue>;

    /// Normalization for deviations at `(a, b)`. Exact oracles use 1;
    /// Monte Carlo oracles return the scale of their statistical error.
    fn scale(&self, _a: &I, _b: &I) -> Result<f64> {
        Ok(1.0)
    }

    /// Whether `gamma` may be called concurrently.
    fn parallel_safe(&self) -> bool {
        true
    }
}

impl<I, F> CovarianceOracle<I> for F
where
    F: Fn(&I, &I) -> Result<OperatorValue> + Sync,
{
    fn gamma(&self, a: &I, b: &I) -> Result<OperatorValue> {
        self(a, b)
    }
}

/// `s ⊙ λ`.
pub trait Action<S, I>: Sync {
    fn act(&self, s: &S, index: &I) -> Result<I>;
}

/// `(tau_x phi)(y) = phi(y - x)` for grid-aligned `x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TranslationAction;

impl Action<Vec<f64>, TestFunction> for TranslationAction {
    fn act(&self, s: &Vec<f64>, index: &TestFunction) -> Result<TestFunction> {
        index.translate(s).map_err(|e| Error::OracleDomain(format!("translate by {s:?}: {e}")))
    }
}

/// Actors and index pairs of a witness family.
#[derive(Debug, Clone)]
pub struct ActionSample<S, I> {
    pub actors: Vec<S>,
    pub pairs: Vec<(I, I)>,
}

impl<S, I> ActionSample<S, I> {
    pub fn new(actors: Vec<S>, pairs: Vec<(I, I)>) -> Result<Self> {
        if actors.is_empty() || pairs.is_empty() {
            return Err(Error::InvalidArgument("action sample needs actors and pairs".into()));
        }
        Ok(Self { actors, pairs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityMode {
    Operator,
    Scalar,
    Scalarly,
    Intersection,
    ConvolutionDependence,
}

/// Indices into the sample that attain the maximum deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub actor: usize,
    pub pair: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub mode: StationarityMode,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub checked: usize,
    pub notes: Vec<String>,
}

pub const CONTINUITY_NOTE: &str =
    "continuity of the covariance on the semigroup is not certifiable from finite samples";

impl StationarityReport {
    fn from_deviations(
        mode: StationarityMode,
        deviations: &[(Witness, f64)],
        tolerance: f64,
        notes: Vec<String>,
    ) -> Self {
        let mut worst: Option<(Witness, f64)> = None;
        for &(w, d) in deviations {
            // NaN counts as the worst possible deviation.
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if worst.is_none_or(|(_, m)| d > m) {
                worst = Some((w, d));
            }
        }
        let max_deviation = worst.map_or(0.0, |(_, d)| d);
        Self {
            mode,
            max_deviation,
            tolerance,
            pass: max_deviation <= tolerance,
            witness: worst.map(|(w, _)| w),
            checked: deviations.len(),
            notes,
        }
    }
}

/// Evaluates `f(actor, pair)` over the sample grid, in parallel when the
/// oracle allows it. The output order is fixed.
fn over_sample<S, I, T, F>(
    sample: &ActionSample<S, I>,
    parallel: bool,
    f: F,
) -> Result<Vec<(Witness, T)>>
where
    S: Sync,
    I: Sync,
    T: Send,
    F: Fn(&S, &(I, I)) -> Result<T> + Sync,
{
    let jobs: Vec<Witness> = (0..sample.actors.len())
        .flat_map(|actor| (0..sample.pairs.len()).map(move |pair| Witness { actor, pair }))
        .collect();
    let run = |w: &Witness| f(&sample.actors[w.actor], &sample.pairs[w.pair]).map(|t| (*w, t));
    if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    }
}

fn acted_pair<S, I, A: Action<S, I>>(action: &A, s: &S, pair: &(I, I)) -> Result<(I, I)> {
    Ok((action.act(s, &pair.0)?, action.act(s, &pair.1)?))
}

/// `max ||Gamma(s⊙a, s⊙b) - Gamma(a, b)||_F / scale(a, b)`.
pub fn check_operator_stationarity<S, I, O, A>(
    oracle: &O,
    action: &A,
    sample: &ActionSample<S, I>,
    tolerance: f64,
) -> Result<StationarityReport>
where
    S: Sync,
    I: Sync,
    O: CovarianceOracle<I> + ?Sized,
    A: Action<S, I>,
{
    let deviations = over_sample(sample, oracle.parallel_safe(), |s, pair| {
        let (a, b) = acted_pair(action, s, pair)?;
        let moved = oracle.gamma(&a, &b)?;
        let base = oracle.gamma(&pair.0, &pair.1)?;
        Ok(moved.distance(&base) / oracle.scale(&pair.0, &pair.1)?)
    })?;
    Ok(StationarityReport::from_deviations(
        StationarityMode::Operator,
        &deviations,
        tolerance,
        vec![CONTINUITY_NOTE.into()],
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarMode {
    /// `gamma = tr Gamma`.
    Scalar,
    /// One scalar covariance `x^* Gamma x` per vector `x`.
    Scalarly(Vec<Vec<C64>>),
}

/// Canonical basis of `C^n` followed by `extra` random unit vectors.
pub fn scalarly_vectors(n: usize, extra: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra {
        let v: Vec<C64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            })
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|z| z / norm).collect());
    }
    out
}

/// Scalar (`|tr ΔGamma|`) or scalarly (`max_x |x^* ΔGamma x|`) invariance.
pub fn check_scalar_stationarity<S, I, O, A>(
    oracle: &O,
    mode: &ScalarMode,
    action: &A,
    sample: &ActionSample<S, I>,
    tolerance: f64,
) -> Result<StationarityReport>
where
    S: Sync,
    I: Sync,
    O: CovarianceOracle<I> + ?Sized,
    A: Action<S, I>,
{
    let deviations = over_sample(sample, oracle.parallel_safe(), |s, pair| {
        let (a, b) = acted_pair(action, s, pair)?;
        let diff = &oracle.gamma(&a, &b)? - &oracle.gamma(&pair.0, &pair.1)?;
        let scale = oracle.scale(&pair.0, &pair.1)?;
        let d = match mode {
            ScalarMode::Scalar => diff.trace().norm(),
            ScalarMode::Scalarly(vectors) => {
                let mut worst: f64 = 0.0;
                for x in vectors {
                    if x.len() != diff.dim() {
                        return Err(Error::SizeMismatch(format!(
                            "vector of length {} for operators of size {}",
                            x.len(),
                            diff.dim()
                        )));
                    }
                    worst = worst.max(diff.quadratic_form(x).norm());
                }
                worst
            }
        };
        Ok(d / scale)
    })?;
    let mode = match mode {
        ScalarMode::Scalar => StationarityMode::Scalar,
        ScalarMode::Scalarly(_) => StationarityMode::Scalarly,
    };
    Ok(StationarityReport::from_deviations(
        mode,
        &deviations,
        tolerance,
        vec![CONTINUITY_NOTE.into()],
    ))
}

/// Bimeasure `tau(A, B)` on atom subsets.
pub trait BimeasureOracle: Sync {
    fn tau(&self, a: &AtomSet, b: &AtomSet) -> Result<OperatorValue>;
}

impl<F> BimeasureOracle for F
where
    F: Fn(&AtomSet, &AtomSet) -> Result<OperatorValue> + Sync,
{
    fn tau(&self, a: &AtomSet, b: &AtomSet) -> Result<OperatorValue> {
        self(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub report: StationarityReport,
    /// Fitted `zeta({omega_j})`; atoms never met by an intersection get zero.
    pub zeta: Vec<OperatorValue>,
    /// `tau(A, B)` for pairs with `A ∩ B = ∅`, which must vanish.
    pub max_disjoint_norm: f64,
}

/// Fits an additive `zeta` with `tau(A, B) ≈ sum_{j in A ∩ B} zeta_j` by
/// least squares over all pairs, then reports the largest residual.
pub fn check_intersection_stationarity<B: BimeasureOracle + ?Sized>(
    oracle: &B,
    atom_count: usize,
    set_pairs: &[(AtomSet, AtomSet)],
    tolerance: f64,
) -> Result<IntersectionReport> {
    if set_pairs.is_empty() {
        return Err(Error::InvalidArgument("no set pairs".into()));
    }
    let values = set_pairs
        .iter()
        .map(|(a, b)| {
            a.check_within(atom_count)?;
            b.check_within(atom_count)?;
            oracle.tau(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = values[0].dim();
    let p = set_pairs.len();
    let design = DMatrix::<C64>::from_fn(p, atom_count, |r, j| {
        let (a, b) = &set_pairs[r];
        C64::new(if a.contains(j) && b.contains(j) { 1.0 } else { 0.0 }, 0.0)
    });
    let rhs = DMatrix::<C64>::from_fn(p, n * n, |r, k| values[r].matrix()[(k / n, k % n)]);
    let zeta_flat = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let zeta = (0..atom_count)
        .map(|j| OperatorValue::new(DMatrix::from_fn(n, n, |r, c| zeta_flat[(j, r * n + c)])))
        .collect::<Result<Vec<_>>>()?;
    let mut deviations = Vec::with_capacity(p);
    let mut max_disjoint_norm: f64 = 0.0;
    for (r, ((a, b), tau)) in set_pairs.iter().zip(&values).enumerate() {
        let inter = a.intersection(b);
        if inter.is_empty() {
            max_disjoint_norm = max_disjoint_norm.max(tau.frobenius_norm());
        }
        let predicted = inter
            .iter()
            .fold(OperatorValue::zeros(n), |acc, j| &acc + &zeta[j]);
        deviations.push((Witness { actor: 0, pair: r }, tau.distance(&predicted)));
    }
    let report = StationarityReport::from_deviations(
        StationarityMode::Intersection,
        &deviations,
        tolerance,
        Vec::new(),
    );
    Ok(IntersectionReport {
        report,
        zeta,
        max_disjoint_norm,
    })
}

/// `max ||tau(A, B) - tau(B, A)^*||_F` over the pairs.
pub fn adjoint_symmetry_deviation<B: BimeasureOracle + ?Sized>(
    oracle: &B,
    set_pairs: &[(AtomSet, AtomSet)],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in set_pairs {
        worst = worst.max(oracle.tau(a, b)?.distance(&oracle.tau(b, a)?.adjoint()));
    }
    Ok(worst)
}

/// All pairs of atom subsets.
pub fn all_set_pairs(atom_count: usize) -> Vec<(AtomSet, AtomSet)> {
    let sets = AtomSet::power_set(atom_count);
    sets.iter()
        .flat_map(|a| sets.iter().map(move |b| (a.clone(), b.clone())))
        .collect()
}

/// `{(tau_x phi, tau_x psi)}` over the shifts, all sharing `phi * psi~`.
pub fn translation_family(
    phi: &TestFunction,
    psi: &TestFunction,
    shifts: &[Vec<f64>],
) -> Result<Vec<(TestFunction, TestFunction)>> {
    shifts
        .iter()
        .map(|x| Ok((phi.translate(x)?, psi.translate(x)?)))
        .collect()
}

/// Within each family, the largest `||Gamma(p) - Gamma(q)||_F / scale`
/// over all member pairs `p, q`. The witness is `(family, member)`.
pub fn check_convolution_dependence<O>(
    oracle: &O,
    families: &[Vec<(TestFunction, TestFunction)>],
    tolerance: f64,
) -> Result<StationarityReport>
where
    O: CovarianceOracle<TestFunction> + ?Sized,
{
    let mut notes = vec![CONTINUITY_NOTE.to_string()];
    let mut deviations = Vec::new();
    for (k, family) in families.iter().enumerate() {
        if let Some((phi, psi)) = family.first() {
            let probe = phi.convolve(&psi.involute())?;
            for (a, b) in &family[1..] {
                if a.convolve(&b.involute())? != probe {
                    notes.push(format!("family {k} does not share a single convolution probe"));
                    break;
                }
            }
        }
        let values = family
            .iter()
            .map(|(a, b)| Ok((oracle.gamma(a, b)?, oracle.scale(a, b)?)))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let d = values[i].0.distance(&values[j].0) / values[i].1.max(values[j].1);
                deviations.push((Witness { actor: k, pair: j }, d));
            }
        }
        if values.len() == 1 {
            deviations.push((Witness { actor: k, pair: 0 }, 0.0));
        }
    }
    Ok(StationarityReport::from_deviations(
        StationarityMode::ConvolutionDependence,
        &deviations,
        tolerance,
        notes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid_calculus::GridSpec;
    use crate::spectral_measure::SpectralMeasure;

    fn fixture_sample(g: &GridSpec) -> ActionSample<Vec<f64>, TestFunction> {
        let h = g.spacing();
        let shifts = vec![vec![1.0], vec![-1.0], vec![2.5], vec![-2.5], vec![7.0 * h]];
        ActionSample::new(shifts, fixtures::probe_pairs(g, 6, 11)).unwrap()
    }

    fn analytic(m: &SpectralMeasure) -> impl Fn(&TestFunction, &TestFunction) -> Result<OperatorValue> + Sync + '_ {
        move |a: &TestFunction, b: &TestFunction| m.k_of(&a.convolve(&b.involute())?)
    }

    /// Brute-force quadrature of `sum_j F phi conj(F psi) F_j` with an
    /// explicit loop over grid points.
    fn quadrature_gamma(m: &SpectralMeasure, a: &TestFunction, b: &TestFunction) -> OperatorValue {
        let g = a.grid();
        let ft = |f: &TestFunction, w: f64| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for (i, v) in f.samples().iter().enumerate() {
                let x = g.coord(i as i64);
                acc += v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * x * w);
            }
            acc * g.spacing()
        };
        let c: Vec<C64> = m
            .atoms()
            .iter()
            .map(|at| ft(a, at.frequency[0]) * ft(b, at.frequency[0]).conj())
            .collect();
        m.combine(&c)
    }

    #[test]
    fn fixture_is_operator_stationary() {
        let g = fixtures::grid();
        let m = fixtures::measure();
        let sample = fixture_sample(&g);
        let r = check_operator_stationarity(&analytic(&m), &TranslationAction, &sample, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.checked, 30);
        // Direct quadrature of the shifted pair agrees with the unshifted one.
        let (a, b) = &sample.pairs[1];
        let base = quadrature_gamma(&m, a, b);
        let moved = quadrature_gamma(&m, &a.translate(&[1.0]).unwrap(), &b.translate(&[1.0]).unwrap());
        assert!(base.distance(&moved) < 1e-10);
    }

    #[test]
    fn constant_oracle_has_zero_deviation() {
        let g = fixtures::grid();
        let m = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]).unwrap();
        let r = check_operator_stationarity(&analytic(&m), &TranslationAction, &fixture_sample(&g), 0.0).unwrap();
        assert!(r.max_deviation <= 1e-15);
    }

    #[test]
    fn moment_oracle_is_not_stationary() {
        let g = fixtures::grid();
        let oracle = |a: &TestFunction, b: &TestFunction| -> Result<OperatorValue> {
            Ok(OperatorValue::identity(2).scale(a.first_moment() * b.first_moment().conj()))
        };
        let r = check_operator_stationarity(&oracle, &TranslationAction, &fixture_sample(&g), 1e-10).unwrap();
        assert!(!r.pass);
        assert!(r.max_deviation > 0.1);
        assert!(r.witness.is_some());
    }

    #[test]
    fn scalar_modes_pass_on_fixture() {
        let g = fixtures::grid();
        let m = fixtures::measure();
        let sample = fixture_sample(&g);
        let oracle = analytic(&m);
        let s = check_scalar_stationarity(&oracle, &ScalarMode::Scalar, &TranslationAction, &sample, 1e-10).unwrap();
        assert!(s.pass);
        let vs = ScalarMode::Scalarly(scalarly_vectors(2, 2, 3));
        let t = check_scalar_stationarity(&oracle, &vs, &TranslationAction, &sample, 1e-10).unwrap();
        assert!(t.pass);
        assert_eq!(t.mode, StationarityMode::Scalarly);
    }

    #[test]
    fn scalarly_vectors_are_unit() {
        let v = scalarly_vectors(3, 2, 1);
        assert_eq!(v.len(), 5);
        for x in &v {
            assert!((x.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert_eq!(v, scalarly_vectors(3, 2, 1));
    }

    #[test]
    fn out_of_grid_action_is_domain_error() {
        let g = fixtures::grid();
        let m = fixtures::measure();
        let sample = ActionSample::new(vec![vec![15.0]], fixtures::probe_pairs(&g, 2, 1)).unwrap();
        assert!(matches!(
            check_operator_stationarity(&analytic(&m), &TranslationAction, &sample, 1.0),
            Err(Error::OracleDomain(_))
        ));
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(ActionSample::<Vec<f64>, TestFunction>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn intersection_fit_recovers_measure() {
        let m = fixtures::measure();
        let tau = |a: &AtomSet, b: &AtomSet| m.mass_of(&a.intersection(b));
        let r = check_intersection_stationarity(&tau, 3, &all_set_pairs(3), 1e-10).unwrap();
        assert!(r.report.pass);
        assert_eq!(r.max_disjoint_norm, 0.0);
        for j in 0..3 {
            assert!(r.zeta[j].distance(m.weight(j)) < 1e-12);
        }
        assert!(adjoint_symmetry_deviation(&tau, &all_set_pairs(3)).unwrap() < 1e-15);
    }

    #[test]
    fn product_bimeasure_fails_intersection_check() {
        let m = fixtures::measure();
        let tau = |a: &AtomSet, b: &AtomSet| Ok(&m.mass_of(a)? * &m.mass_of(b)?);
        let r = check_intersection_stationarity(&tau, 3, &all_set_pairs(3), 1e-6).unwrap();
        assert!(!r.report.pass);
        assert!(r.max_disjoint_norm > 0.1);
    }

    #[test]
    fn convolution_dependence() {
        let g = fixtures::grid();
        let m = fixtures::measure();
        let shifts = fixtures::random_shifts(&g, 5, 2, 2.0);
        let pairs = fixtures::probe_pairs(&g, 4, 5);
        let families: Vec<_> = pairs
            .iter()
            .map(|(a, b)| translation_family(a, b, &shifts).unwrap())
            .collect();
        let r = check_convolution_dependence(&analytic(&m), &families, 1e-10).unwrap();
        assert!(r.pass);
        assert_eq!(r.notes.len(), 1);

        let single = vec![vec![pairs[0].clone()]];
        let r = check_convolution_dependence(&analytic(&m), &single, 0.0).unwrap();
        assert_eq!(r.max_deviation, 0.0);

        let moment = |a: &TestFunction, b: &TestFunction| -> Result<OperatorValue> {
            Ok(OperatorValue::identity(2).scale(a.first_moment() * b.first_moment().conj()))
        };
        assert!(!check_convolution_dependence(&moment, &families, 1e-10).unwrap().pass);
    }
}
