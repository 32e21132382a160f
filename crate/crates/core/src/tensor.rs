//! Flat parameter vectors and the handful of dense operations the rest of the
//! crate is built on.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in parameter space: every weight and bias of a network, flattened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Wraps `values`, rejecting NaN and infinities.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Wraps without the finiteness scan. Callers guarantee finite input.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.len(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        axpy_combine(&[1.0, -1.0], &[self, other])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        axpy_combine(&[1.0, 1.0], &[self, other])
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|v| alpha * v).collect())
    }

    /// `self += alpha * x`
    pub fn axpy_in_place(&mut self, alpha: f64, x: &Self) -> Result<()> {
        x.check_len(self.len())?;
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * xi;
        }
        Ok(())
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

/// Returns `Σ coeffs[i] · points[i]`.
///
/// All points must share one length and `coeffs.len() == points.len() >= 1`.
pub fn axpy_combine(coeffs: &[f64], points: &[&ParamVector]) -> Result<ParamVector> {
    if coeffs.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: coeffs.len(),
        });
    }
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("axpy_combine needs at least one point"))?;
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for (&c, p) in coeffs.iter().zip(points) {
        p.check_len(dim)?;
        for (o, v) in out.iter_mut().zip(&p.0) {
            *o += c * v;
        }
    }
    Ok(ParamVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_combination() {
        let w = pv(&[1.5, -2.0, 3.25]);
        assert_eq!(axpy_combine(&[1.0], &[&w]).unwrap(), w);
    }

    #[test]
    fn midpoint() {
        let out = axpy_combine(&[0.5, 0.5], &[&pv(&[0.0, 2.0]), &pv(&[2.0, 0.0])]).unwrap();
        assert_eq!(out, pv(&[1.0, 1.0]));
    }

    #[test]
    fn affine_extrapolation() {
        // 2*(1,1) - (1,0) = (1,2)
        let out = axpy_combine(&[2.0, -1.0], &[&pv(&[1.0, 1.0]), &pv(&[1.0, 0.0])]).unwrap();
        assert_eq!(out, pv(&[1.0, 2.0]));
    }

    #[test]
    fn mismatch_names_both_lengths() {
        let err = axpy_combine(&[1.0, 1.0], &[&pv(&[1.0, 2.0]), &pv(&[1.0])]).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, found } => {
                assert_eq!((expected, found), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(axpy_combine(&[], &[]).is_err());
        assert!(axpy_combine(&[1.0, 2.0], &[&pv(&[1.0])]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            ParamVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn inputs_unmodified() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[3.0, 4.0]);
        let _ = axpy_combine(&[2.0, 3.0], &[&a, &b]).unwrap();
        assert_eq!(a, pv(&[1.0, 2.0]));
        assert_eq!(b, pv(&[3.0, 4.0]));
    }

    proptest! {
        #[test]
        fn combine_is_linear_in_coefficients(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 4), 3),
        ) {
            let points: Vec<ParamVector> = pts.into_iter().map(|p| pv(&p)).collect();
            let refs: Vec<&ParamVector> = points.iter().collect();
            let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = axpy_combine(&mixed, &refs).unwrap();
            let ca = axpy_combine(&a, &refs).unwrap();
            let cb = axpy_combine(&b, &refs).unwrap();
            let rhs = axpy_combine(&[alpha, beta], &[&ca, &cb]).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - rhs[i]).abs() < 1e-12 * (1.0 + lhs[i].abs()));
            }
        }
    }
}
