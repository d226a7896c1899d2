//! Finite atomic matrix-valued spectral measures `F = sum_j F_j delta_{omega_j}`.
//!
//! The spectral distribution is the Fourier transform of the measure, acting
//! on a test function as `K(phi) = sum_j (F phi)(omega_j) F_j`. Atomic measures
//! are automatically tempered, so every integral here is a finite sum.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_calculus::{TestFunction, C64};
use crate::operator_algebra::{psd_check, MatrixJson, OperatorValue, PsdMatrix, PSD_CLIP_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub frequency: Vec<f64>,
    pub weight: PsdMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMeasure {
    dim_space: usize,
    dim_h: usize,
    atoms: Vec<Atom>,
}

/// A set of atom indices: the atomic stand-in for a bounded Borel set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomSet(BTreeSet<usize>);

impl AtomSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(count: usize) -> Self {
        Self((0..count).collect())
    }

    pub fn singleton(j: usize) -> Self {
        Self(std::iter::once(j).collect())
    }

    pub fn intersection(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn union(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.union(&other.0).copied().collect())
    }

    pub fn is_disjoint(&self, other: &AtomSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// All `2^count` subsets, ordered by bitmask.
    pub fn power_set(count: usize) -> Vec<AtomSet> {
        (0u64..(1u64 << count))
            .map(|mask| AtomSet((0..count).filter(|j| mask >> j & 1 == 1).collect()))
            .collect()
    }

    pub fn check_within(&self, count: usize) -> Result<()> {
        match self.0.iter().find(|&&j| j >= count) {
            Some(&index) => Err(Error::UnknownAtom { index, count }),
            None => Ok(()),
        }
    }
}

impl FromIterator<usize> for AtomSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        AtomSet(iter.into_iter().collect())
    }
}

impl SpectralMeasure {
    pub fn new(dim_space: usize, dim_h: usize, atoms: Vec<(Vec<f64>, OperatorValue)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("a measure needs at least one atom".into()));
        }
        let mut out = Vec::with_capacity(atoms.len());
        for (j, (frequency, weight)) in atoms.into_iter().enumerate() {
            if frequency.len() != dim_space || frequency.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {j}: frequency {frequency:?} is not a finite point of R^{dim_space}"
                )));
            }
            if weight.dim() != dim_h {
                return Err(Error::InvalidMeasure(format!(
                    "atom {j}: weight is {0}x{0}, expected {dim_h}x{dim_h}",
                    weight.dim()
                )));
            }
            if !weight.is_hermitian() {
                return Err(Error::NonHermitian {
                    residual: weight.anti_hermitian_residual(),
                });
            }
            let check = psd_check(&weight);
            if check.min_eigenvalue < -PSD_CLIP_TOL {
                return Err(Error::IndefiniteAtom {
                    atom: j,
                    eigenvalue: check.min_eigenvalue,
                });
            }
            if out.iter().any(|a: &Atom| a.frequency == frequency) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {j}: frequency {frequency:?} repeats an earlier atom"
                )));
            }
            out.push(Atom {
                frequency,
                weight: PsdMatrix::new(weight)?,
            });
        }
        Ok(Self {
            dim_space,
            dim_h,
            atoms: out,
        })
    }

    pub fn dim_space(&self) -> usize {
        self.dim_space
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self, j: usize) -> &OperatorValue {
        self.atoms[j].weight.as_operator()
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.frequency.clone()).collect()
    }

    /// `F(beta) = sum_{j in beta} F_j`.
    pub fn mass_of(&self, set: &AtomSet) -> Result<OperatorValue> {
        set.check_within(self.len())?;
        Ok(set
            .iter()
            .fold(OperatorValue::zeros(self.dim_h), |acc, j| &acc + self.weight(j)))
    }

    pub fn total_mass(&self) -> OperatorValue {
        self.mass_of(&AtomSet::all(self.len())).expect("all atoms are valid")
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {c} must be nonnegative")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| (a.frequency.clone(), a.weight.as_operator().scale(C64::new(c, 0.0))))
            .collect();
        Self::new(self.dim_space, self.dim_h, atoms)
    }

    pub fn validate(&self) -> ValidationReport {
        let total = self.total_mass();
        let min_eigenvalue = self
            .atoms
            .iter()
            .map(|a| a.weight.as_operator().min_eigenvalue())
            .fold(f64::INFINITY, f64::min);
        ValidationReport {
            valid: true,
            atom_count: self.len(),
            min_atom_eigenvalue: min_eigenvalue,
            total_trace: total.trace().re,
            total_mass: total,
            temperedness: "auto-satisfied: finite atomic".into(),
            summability: "not numerically testable for atomic measures; boundedness only".into(),
        }
    }

    pub fn trace_measure(&self) -> ScalarMeasure {
        ScalarMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| (a.frequency.clone(), a.weight.as_operator().trace().re))
                .collect(),
        }
    }

    fn check_function(&self, phi: &TestFunction) -> Result<()> {
        if phi.grid().dim() != self.dim_space {
            return Err(Error::GridMismatch(format!(
                "test function lives on R^{}, measure on R^{}",
                phi.grid().dim(),
                self.dim_space
            )));
        }
        Ok(())
    }

    /// `(F phi)(omega_j)` for every atom.
    pub fn fourier_at_atoms(&self, phi: &TestFunction) -> Result<Vec<C64>> {
        self.check_function(phi)?;
        Ok(self.atoms.iter().map(|a| phi.fourier_at(&a.frequency)).collect())
    }

    /// `K(phi) = sum_j (F phi)(omega_j) F_j`.
    pub fn k_of(&self, phi: &TestFunction) -> Result<OperatorValue> {
        let values = self.fourier_at_atoms(phi)?;
        Ok(self.combine(&values))
    }

    /// `sum_j c_j F_j`.
    pub fn combine(&self, coefficients: &[C64]) -> OperatorValue {
        self.atoms
            .iter()
            .zip(coefficients)
            .fold(OperatorValue::zeros(self.dim_h), |acc, (a, c)| {
                &acc + &a.weight.as_operator().scale(*c)
            })
    }

    /// `[f I, g I]_{L^2(F)} = sum_j f(omega_j) conj(g(omega_j)) F_j`.
    pub fn l2_gramian<Fa, Fb>(&self, f: Fa, g: Fb) -> OperatorValue
    where
        Fa: Fn(&[f64]) -> C64,
        Fb: Fn(&[f64]) -> C64,
    {
        let c: Vec<C64> = self
            .atoms
            .iter()
            .map(|a| f(&a.frequency) * g(&a.frequency).conj())
            .collect();
        self.combine(&c)
    }

    /// Same as [`l2_gramian`](Self::l2_gramian) with the symbols already
    /// evaluated at the atoms.
    pub fn l2_gramian_values(&self, f: &[C64], g: &[C64]) -> Result<OperatorValue> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(Error::SizeMismatch(format!(
                "symbol values {}/{} for {} atoms",
                f.len(),
                g.len(),
                self.len()
            )));
        }
        let c: Vec<C64> = f.iter().zip(g).map(|(a, b)| a * b.conj()).collect();
        Ok(self.combine(&c))
    }

    /// `max ||K(phi~) - K(phi)^*||_F` over the test set.
    pub fn selfadjointness_check(&self, test_set: &[TestFunction]) -> Result<SelfAdjointnessReport> {
        if test_set.is_empty() {
            return Err(Error::InvalidArgument("empty test set".into()));
        }
        let mut max_deviation: f64 = 0.0;
        for phi in test_set {
            let lhs = self.k_of(&phi.involute())?;
            let rhs = self.k_of(phi)?.adjoint();
            max_deviation = max_deviation.max(lhs.distance(&rhs));
        }
        Ok(SelfAdjointnessReport {
            checked: test_set.len(),
            max_deviation,
            tolerance: SELFADJOINT_TOL,
            pass: max_deviation <= SELFADJOINT_TOL,
        })
    }

    /// Windowed form of `integral (K * phi * phi~)(x) dx`: evaluates
    /// `K(phi * phi~ * w)` where `w = b * b~` is a unit-mass window whose
    /// Fourier transform `|F b|^2` is nonnegative.
    pub fn positivity_integral_check(
        &self,
        phi: &TestFunction,
        window_radius: f64,
    ) -> Result<PositivityReport> {
        self.check_function(phi)?;
        let grid = phi.grid();
        let origin = vec![0.0; grid.dim()];
        let b = TestFunction::make_bump(&origin, window_radius, grid)?;
        let w = b.convolve(&b.involute())?;
        let w = w.scale(C64::new(1.0, 0.0) / w.integral());
        let probe = phi.convolve(&phi.involute())?.convolve(&w)?;
        let value = self.k_of(&probe)?;
        let min_eigenvalue = psd_check(&value).min_eigenvalue;
        Ok(PositivityReport {
            min_eigenvalue,
            tolerance: POSITIVITY_TOL,
            pass: min_eigenvalue >= -POSITIVITY_TOL,
            value,
        })
    }

    /// Largest window radius that still fits `phi * phi~ * w` on the grid, capped at `cap`.
    pub fn window_radius_for(phi: &TestFunction, cap: f64) -> f64 {
        let g = phi.grid();
        let room = g.half_width() - g.spacing() - 2.0 * phi.support_radius();
        (0.45 * room).min(cap)
    }
}

pub const SELFADJOINT_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub atom_count: usize,
    pub min_atom_eigenvalue: f64,
    pub total_mass: OperatorValue,
    pub total_trace: f64,
    pub temperedness: String,
    pub summability: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfAdjointnessReport {
    pub checked: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub value: OperatorValue,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Nonnegative scalar measure, e.g. the trace `nu = tr F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
}

impl ScalarMeasure {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if let Some((f, m)) = atoms.iter().find(|(_, m)| m.is_nan() || *m < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "negative mass {m} at {f:?}"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|(_, m)| *m).collect()
    }

    /// `k(phi) = sum_j (F phi)(omega_j) nu_j`.
    pub fn k_of(&self, phi: &TestFunction) -> C64 {
        self.atoms
            .iter()
            .map(|(f, m)| phi.fourier_at(f) * *m)
            .sum()
    }

    /// `sum_j f(omega_j) conj(g(omega_j)) nu_j` from values at the atoms.
    pub fn l2_inner_values(&self, f: &[C64], g: &[C64]) -> C64 {
        self.atoms
            .iter()
            .zip(f.iter().zip(g))
            .map(|((_, m), (a, b))| a * b.conj() * *m)
            .sum()
    }
}

/// JSON form of a measure:
/// `{"d":…, "n":…, "atoms":[{"omega":[…], "weight_re":[[…]], "weight_im":[[…]]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub d: usize,
    pub n: usize,
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub omega: Vec<f64>,
    pub weight_re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_im: Option<Vec<Vec<f64>>>,
}

impl MeasureConfig {
    pub fn build(&self) -> Result<SpectralMeasure> {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(j, a)| {
                OperatorValue::from_parts(&a.weight_re, a.weight_im.as_deref())
                    .map(|w| (a.omega.clone(), w))
                    .map_err(|e| Error::InvalidMeasure(format!("atom {j}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralMeasure::new(self.d, self.n, atoms)
    }
}

impl From<&SpectralMeasure> for MeasureConfig {
    fn from(m: &SpectralMeasure) -> Self {
        MeasureConfig {
            d: m.dim_space,
            n: m.dim_h,
            atoms: m
                .atoms
                .iter()
                .map(|a| {
                    let json = MatrixJson::from(a.weight.as_operator());
                    let has_im = json.im.iter().flatten().any(|v| *v != 0.0);
                    AtomConfig {
                        omega: a.frequency.clone(),
                        weight_re: json.re,
                        weight_im: has_im.then_some(json.im),
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid_calculus::GridSpec;

    fn grid() -> GridSpec {
        fixtures::grid()
    }

    #[test]
    fn fixture_validates() {
        let f = fixtures::measure();
        let r = f.validate();
        assert!(r.valid);
        assert_eq!(r.atom_count, 3);
        assert!((r.total_trace - 3.0).abs() < 1e-15);
        let single = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]);
        assert!(single.is_ok());
    }

    #[test]
    fn indefinite_atom_rejected() {
        let err = SpectralMeasure::new(
            1,
            2,
            vec![(vec![0.0], OperatorValue::diagonal(&[1.0, -0.1]).unwrap())],
        )
        .unwrap_err();
        match err {
            Error::IndefiniteAtom { atom, eigenvalue } => {
                assert_eq!(atom, 0);
                assert!((eigenvalue + 0.1).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_frequencies_rejected() {
        let i = OperatorValue::identity(2);
        assert!(SpectralMeasure::new(1, 2, vec![(vec![1.0], i.clone()), (vec![1.0], i)]).is_err());
        assert!(SpectralMeasure::new(1, 2, vec![]).is_err());
    }

    #[test]
    fn trace_measure_masses() {
        let f = fixtures::measure();
        let nu = f.trace_measure();
        for (m, e) in nu.masses().iter().zip([1.0, 1.0, 1.0]) {
            assert!((m - e).abs() < 1e-15);
        }
        let freqs: Vec<f64> = nu.atoms.iter().map(|(f, _)| f[0]).collect();
        assert_eq!(freqs, vec![0.0, 1.0, -2.0]);
        let doubled = f.scaled(2.0).unwrap().trace_measure();
        for (a, b) in doubled.masses().iter().zip(nu.masses()) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        let z = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::zeros(2))]).unwrap();
        assert_eq!(z.trace_measure().masses(), vec![0.0]);
    }

    #[test]
    fn k_of_single_atom_is_integral() {
        let g = grid();
        let m = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]).unwrap();
        let phi = TestFunction::make_bump(&[0.4], 0.7, &g).unwrap().scale(C64::new(2.0, -1.0));
        let k = m.k_of(&phi).unwrap();
        assert!(k.distance(&OperatorValue::identity(2).scale(phi.integral())) < 1e-14);
    }

    #[test]
    fn k_of_fixture_matches_direct_fourier() {
        let g = grid();
        let f = fixtures::measure();
        let phi = TestFunction::make_bump(&[0.0], 1.0, &g).unwrap();
        let h = g.spacing();
        let direct = |t: f64| -> C64 {
            (0..g.len())
                .map(|i| {
                    let x = g.coord(i as i64);
                    phi.samples()[i] * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * x * t)
                })
                .sum::<C64>()
                * h
        };
        let mut expect = OperatorValue::zeros(2);
        for (j, w) in [0.0, 1.0, -2.0].iter().enumerate() {
            expect = &expect + &f.weight(j).scale(direct(*w));
        }
        assert!(f.k_of(&phi).unwrap().distance(&expect) < 1e-13);
    }

    #[test]
    fn k_of_is_linear() {
        let g = grid();
        let f = fixtures::measure();
        let a = TestFunction::make_bump(&[0.3], 0.4, &g).unwrap();
        let b = TestFunction::make_bump(&[-0.6], 0.25, &g).unwrap();
        let c = C64::new(0.3, 1.1);
        let lhs = f.k_of(&a.add(&b.scale(c)).unwrap()).unwrap();
        let rhs = &f.k_of(&a).unwrap() + &f.k_of(&b).unwrap().scale(c);
        assert!(lhs.distance(&rhs) < 1e-14);
    }

    #[test]
    fn positive_definite_on_autocorrelations() {
        let g = grid();
        let f = fixtures::measure();
        for phi in fixtures::random_bumps(&g, 5, 11, (0.2, 0.8), 2.0) {
            let k = f.k_of(&phi.convolve(&phi.involute()).unwrap()).unwrap();
            assert!(psd_check(&k).min_eigenvalue >= -1e-10);
        }
    }

    #[test]
    fn l2_gramian_cases() {
        let g = grid();
        let f = fixtures::measure();
        let one = f.l2_gramian(|_| C64::new(1.0, 0.0), |_| C64::new(1.0, 0.0));
        assert!(one.distance(&f.total_mass()) < 1e-15);
        let ind = |w: f64| move |t: &[f64]| C64::new(if t[0] == w { 1.0 } else { 0.0 }, 0.0);
        let disjoint = f.l2_gramian(ind(0.0), ind(1.0));
        assert_eq!(disjoint.frobenius_norm(), 0.0);
        let phi = TestFunction::make_bump(&[0.5], 0.3, &g).unwrap();
        let psi = TestFunction::make_bump(&[-0.25], 0.2, &g).unwrap().scale(C64::new(0.0, 1.0));
        let lhs = f.l2_gramian(|t| phi.fourier_at(t), |t| psi.fourier_at(t));
        let rhs = f.k_of(&phi.convolve(&psi.involute()).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-8);
    }

    #[test]
    fn trace_commutes_with_k() {
        let g = grid();
        let f = fixtures::measure();
        let nu = f.trace_measure();
        for phi in fixtures::random_bumps(&g, 4, 3, (0.2, 1.0), 2.0) {
            let lhs = f.k_of(&phi).unwrap().trace();
            assert!((lhs - nu.k_of(&phi)).norm() < 1e-14);
        }
    }

    #[test]
    fn selfadjointness() {
        let g = grid();
        let real = SpectralMeasure::new(
            1,
            2,
            vec![(vec![0.0], OperatorValue::from_real_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap())],
        )
        .unwrap();
        let set = fixtures::random_bumps(&g, 4, 5, (0.2, 1.0), 2.0);
        assert!(real.selfadjointness_check(&set).unwrap().max_deviation <= 1e-12);
        let skewed: Vec<_> = set.iter().map(|p| p.scale(C64::new(0.2, 0.9))).collect();
        let report = fixtures::measure().selfadjointness_check(&skewed).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(real.selfadjointness_check(&[]).is_err());
    }

    #[test]
    fn positivity_integral() {
        let g = grid();
        let single = SpectralMeasure::new(1, 2, vec![(vec![0.0], OperatorValue::identity(2))]).unwrap();
        let phi = TestFunction::make_bump(&[0.5], 0.6, &g).unwrap().scale(C64::new(0.0, 1.5));
        let r = single.positivity_integral_check(&phi, 2.0).unwrap();
        let expect = OperatorValue::identity(2).scale(C64::new(phi.integral().norm_sqr(), 0.0));
        assert!(r.value.distance(&expect) < 1e-12);
        let r = fixtures::measure().positivity_integral_check(&phi, 2.0).unwrap();
        assert!(r.pass, "{r:?}");
        let zero = TestFunction::zero(g.clone());
        let r = fixtures::measure().positivity_integral_check(&zero, 2.0).unwrap();
        assert_eq!(r.value.frobenius_norm(), 0.0);
        let wide = TestFunction::make_bump(&[0.0], 3.0, &g).unwrap();
        assert!(fixtures::measure().positivity_integral_check(&wide, 2.0).is_err());
    }

    #[test]
    fn config_round_trip() {
        let f = fixtures::measure();
        let json = serde_json::to_string(&MeasureConfig::from(&f)).unwrap();
        let back: MeasureConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), f);
    }

    #[test]
    fn atom_sets() {
        let a: AtomSet = [0, 1].into_iter().collect();
        let b: AtomSet = [1, 2].into_iter().collect();
        assert_eq!(a.intersection(&b), AtomSet::singleton(1));
        assert_eq!(a.union(&b), AtomSet::all(3));
        assert_eq!(AtomSet::power_set(3).len(), 8);
        assert!(matches!(
            AtomSet::singleton(5).check_within(3),
            Err(Error::UnknownAtom { index: 5, count: 3 })
        ));
    }
}
