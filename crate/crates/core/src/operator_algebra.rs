//! Small complex matrices standing in for trace-class operators on `H = C^n`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_calculus::C64;

pub type CMatrix = DMatrix<C64>;

/// Hermiticity tolerance, relative to the max-norm of the matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues down to this are treated as roundoff and clipped to zero.
pub const PSD_CLIP_TOL: f64 = 1e-10;
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorValue(CMatrix);

impl OperatorValue {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::SizeMismatch(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 || m.nrows() > MAX_DIM {
            return Err(Error::SizeMismatch(format!(
                "operator dimension {} outside 1..={MAX_DIM}",
                m.nrows()
            )));
        }
        if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("non-finite operator entry".into()));
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch("rows must form a square matrix".into()));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = re.len();
        if re.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch("real part is not square".into()));
        }
        if let Some(im) = im {
            if im.len() != n || im.iter().any(|r| r.len() != n) {
                return Err(Error::SizeMismatch(
                    "imaginary part does not match real part".into(),
                ));
            }
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
        }))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Frobenius norm of `(A - A*)/2`.
    pub fn anti_hermitian_residual(&self) -> f64 {
        ((&self.0 - self.0.adjoint()) * C64::new(0.5, 0.0))
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.max_norm();
        let dev = (&self.0 - self.0.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        dev <= HERMITIAN_TOL * scale
    }

    /// `a * self * a^*`.
    pub fn congruence(&self, a: &OperatorValue) -> Self {
        Self(&a.0 * &self.0 * a.0.adjoint())
    }

    /// `x^* A x`.
    pub fn quadratic_form(&self, x: &[C64]) -> C64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += x[i].conj() * self.0[(i, j)] * x[j];
            }
        }
        acc
    }

    pub fn distance(&self, other: &OperatorValue) -> f64 {
        (self - other).frobenius_norm()
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let eig = SymmetricEigen::new(self.hermitian_part().0);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigen().0[0]
    }
}

impl Add for &OperatorValue {
    type Output = OperatorValue;
    fn add(self, rhs: &OperatorValue) -> OperatorValue {
        OperatorValue(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorValue {
    type Output = OperatorValue;
    fn sub(self, rhs: &OperatorValue) -> OperatorValue {
        OperatorValue(&self.0 - &rhs.0)
    }
}

impl Mul for &OperatorValue {
    type Output = OperatorValue;
    fn mul(self, rhs: &OperatorValue) -> OperatorValue {
        OperatorValue(&self.0 * &rhs.0)
    }
}

/// Serialized form `{"re": [[..]], "im": [[..]]}`, rows first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&OperatorValue> for MatrixJson {
    fn from(a: &OperatorValue) -> Self {
        let n = a.dim();
        let rows = |f: fn(&C64) -> f64| {
            (0..n)
                .map(|i| (0..n).map(|j| f(&a.0[(i, j)])).collect())
                .collect()
        };
        MatrixJson {
            re: rows(|v| v.re),
            im: rows(|v| v.im),
        }
    }
}

impl TryFrom<&MatrixJson> for OperatorValue {
    type Error = Error;
    fn try_from(m: &MatrixJson) -> Result<Self> {
        OperatorValue::from_parts(&m.re, Some(&m.im))
    }
}

impl Serialize for OperatorValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        OperatorValue::try_from(&m).map_err(serde::de::Error::custom)
    }
}

/// A Hermitian positive semidefinite operator (up to the crate tolerances).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PsdMatrix(OperatorValue);

impl PsdMatrix {
    pub fn new(a: OperatorValue) -> Result<Self> {
        if !a.is_hermitian() {
            return Err(Error::NonHermitian {
                residual: a.anti_hermitian_residual(),
            });
        }
        let min = a.min_eigenvalue();
        if min < -PSD_CLIP_TOL {
            return Err(Error::IndefiniteAtom {
                atom: 0,
                eigenvalue: min,
            });
        }
        Ok(Self(a))
    }

    pub fn as_operator(&self) -> &OperatorValue {
        &self.0
    }

    pub fn into_operator(self) -> OperatorValue {
        self.0
    }

    /// Principal square root: `S` Hermitian PSD with `S S^* = A`.
    pub fn sqrt(&self) -> PsdMatrix {
        let (values, vectors) = self.0.hermitian_eigen();
        PsdMatrix(rebuild(&values, &vectors, |v| v.max(0.0).sqrt()))
    }
}

fn rebuild(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> OperatorValue {
    let n = values.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        if w == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += v * v.adjoint() * C64::new(w, 0.0);
    }
    // Force exact Hermitian symmetry.
    OperatorValue((&out + out.adjoint()) * C64::new(0.5, 0.0))
}

pub fn trace(a: &OperatorValue) -> C64 {
    a.trace()
}

/// Principal square root with eigenvalues below zero clipped. Fails for
/// non-Hermitian input.
pub fn psd_sqrt(a: &OperatorValue) -> Result<PsdMatrix> {
    if !a.is_hermitian() {
        return Err(Error::NonHermitian {
            residual: a.anti_hermitian_residual(),
        });
    }
    let (values, vectors) = a.hermitian_eigen();
    Ok(PsdMatrix(rebuild(&values, &vectors, |v| v.max(0.0).sqrt())))
}

/// Nearest PSD matrix in Frobenius norm: Hermitian part with negative
/// eigenvalues set to zero.
pub fn psd_project(a: &OperatorValue) -> PsdMatrix {
    let (values, vectors) = a.hermitian_eigen();
    if values[0] >= 0.0 {
        return PsdMatrix(a.hermitian_part());
    }
    PsdMatrix(rebuild(&values, &vectors, |v| v.max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub anti_hermitian_residual: f64,
}

/// Smallest eigenvalue of the Hermitian part and the size of the
/// anti-Hermitian remainder.
pub fn psd_check(a: &OperatorValue) -> PsdCheck {
    let min_eigenvalue = a.min_eigenvalue();
    PsdCheck {
        is_psd: min_eigenvalue >= -PSD_CLIP_TOL && a.is_hermitian(),
        min_eigenvalue,
        anti_hermitian_residual: a.anti_hermitian_residual(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f2() -> OperatorValue {
        OperatorValue::from_real_rows(&[&[0.5, 0.25], &[0.25, 0.5]]).unwrap()
    }

    #[test]
    fn traces() {
        assert_eq!(trace(&OperatorValue::identity(2)), C64::new(2.0, 0.0));
        assert_eq!(trace(&OperatorValue::zeros(2)), C64::new(0.0, 0.0));
        assert_eq!(trace(&f2()), C64::new(1.0, 0.0));
    }

    #[test]
    fn sqrt_cases() {
        let d = OperatorValue::diagonal(&[4.0, 9.0]).unwrap();
        let s = psd_sqrt(&d).unwrap();
        assert!(s.as_operator().distance(&OperatorValue::diagonal(&[2.0, 3.0]).unwrap()) < 1e-14);
        let i = psd_sqrt(&OperatorValue::identity(3)).unwrap();
        assert!(i.as_operator().distance(&OperatorValue::identity(3)) < 1e-14);
        let s = psd_sqrt(&f2()).unwrap();
        let back = s.as_operator() * &s.as_operator().adjoint();
        assert!(back.distance(&f2()) < 1e-12);
        // Oracle: eigenvalues of F2 are 0.75 and 0.25 with eigenvectors (1,1)/sqrt2, (1,-1)/sqrt2.
        let (a, b) = (0.75f64.sqrt(), 0.25f64.sqrt());
        let oracle =
            OperatorValue::from_real_rows(&[&[(a + b) / 2.0, (a - b) / 2.0], &[(a - b) / 2.0, (a + b) / 2.0]])
                .unwrap();
        assert!(s.as_operator().distance(&oracle) < 1e-12);
    }

    #[test]
    fn sqrt_rejects_non_hermitian() {
        let a = OperatorValue::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&a), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn psd_check_cases() {
        let c = psd_check(&OperatorValue::identity(2));
        assert!(c.is_psd);
        assert!((c.min_eigenvalue - 1.0).abs() < 1e-14);
        let c = psd_check(&OperatorValue::diagonal(&[1.0, -1.0]).unwrap());
        assert!(!c.is_psd);
        assert!((c.min_eigenvalue + 1.0).abs() < 1e-14);
        let c = psd_check(&OperatorValue::identity(2).scale(C64::new(0.5, 0.0)));
        assert!(c.is_psd);
        assert!((c.min_eigenvalue - 0.5).abs() < 1e-14);
    }

    #[test]
    fn complex_hermitian_sqrt() {
        let a = OperatorValue::from_parts(
            &[vec![2.0, 0.5], vec![0.5, 1.0]],
            Some(&[vec![0.0, 0.7], vec![-0.7, 0.0]]),
        )
        .unwrap();
        let s = PsdMatrix::new(a.clone()).unwrap().sqrt();
        assert!((s.as_operator() * s.as_operator()).distance(&a) < 1e-12);
        assert!(s.as_operator().is_hermitian());
    }

    #[test]
    fn projection_clips_negative_eigenvalues() {
        let p = psd_project(&OperatorValue::diagonal(&[2.0, -3.0]).unwrap());
        assert!(p.as_operator().distance(&OperatorValue::diagonal(&[2.0, 0.0]).unwrap()) < 1e-14);
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = OperatorValue> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |v| {
            OperatorValue::new(CMatrix::from_fn(n, n, |i, j| {
                let (re, im) = v[i * n + j];
                C64::new(re, im)
            }))
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn sqrt_squares_back(a in arb_matrix(3)) {
            let psd = &a * &a.adjoint();
            let s = psd_sqrt(&psd).unwrap();
            prop_assert!(psd_check(s.as_operator()).is_psd);
            let back = s.as_operator() * &s.as_operator().adjoint();
            prop_assert!(back.distance(&psd) <= 1e-10 * psd.frobenius_norm().max(1.0));
        }

        #[test]
        fn trace_is_linear(a in arb_matrix(2), b in arb_matrix(2), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let (x, y) = (C64::new(x, 0.0), C64::new(y, 0.0));
            let lhs = trace(&(&a.scale(x) + &b.scale(y)));
            let rhs = x * trace(&a) + y * trace(&b);
            prop_assert!((lhs - rhs).norm() <= 1e-12);
        }

        #[test]
        fn symmetrized_is_hermitian(a in arb_matrix(3)) {
            let c = psd_check(&(&a + &a.adjoint()));
            prop_assert_eq!(c.anti_hermitian_residual, 0.0);
        }
    }
}
