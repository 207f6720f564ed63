//! Analytic baselines and error metrics.

use crate::error::{Error, Result};
use crate::km_fields::{FieldSample, Material};
use crate::scalar::Scalar;

/// Finite-width correction shared by the tension and shear formulas.
fn finite_width_factor<T: Scalar>(a: T, b: T) -> Result<T> {
    if !(a >= T::zero()) || !(b > T::zero()) {
        return Err(Error::InvalidInput(format!("need 0 <= a and b > 0, got a={a}, b={b}")));
    }
    if a >= b {
        return Err(Error::InvalidInput(format!("crack half-length {a} must be below half-width {b}")));
    }
    let r = a / b;
    let r2 = r * r;
    let poly = T::one() - T::lit(0.025) * r2 + T::lit(0.06) * r2 * r2;
    let sec = T::one() / (T::PI() * a / (T::lit(2.0) * b)).cos();
    Ok(poly * sec.sqrt())
}

/// Mode I SIF of a center crack of half-length `a` in a plate of half-width `b`.
pub fn tada_sif_tension<T: Scalar>(sigma: T, a: T, b: T) -> Result<T> {
    Ok(sigma * (T::PI() * a).sqrt() * finite_width_factor(a, b)?)
}

/// Mode II counterpart under remote shear `tau`.
pub fn tada_sif_shear<T: Scalar>(tau: T, a: T, b: T) -> Result<T> {
    Ok(tau * (T::PI() * a).sqrt() * finite_width_factor(a, b)?)
}

/// Leading-order near-tip field in the tip frame at polar `(r, theta)`.
/// The gradient is left empty.
pub fn williams_closed_form<T: Scalar>(k_i: T, k_ii: T, r: T, theta: T, mat: &Material<T>) -> Result<FieldSample<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    let half = theta * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let (s3, c3) = (theta * T::lit(1.5)).sin_cos();
    let two = T::lit(2.0);
    let one = T::one();
    let a = one / (two * T::PI() * r).sqrt();
    let bq = (r / (two * T::PI())).sqrt() / (two * mat.mu());
    let k = mat.kappa();

    let sxx = k_i * a * c * (one - s * s3) - k_ii * a * s * (two + c * c3);
    let syy = k_i * a * c * (one + s * s3) + k_ii * a * s * c * c3;
    let sxy = k_i * a * c * s * c3 + k_ii * a * c * (one - s * s3);
    let ux = k_i * bq * c * (k - one + two * s * s) + k_ii * bq * s * (k + one + two * c * c);
    let uy = k_i * bq * s * (k + one - two * c * c) - k_ii * bq * c * (k - one - two * s * s);
    Ok(FieldSample {
        sxx,
        syy,
        sxy,
        ux,
        uy,
        grad_u: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    /// `|p - r| / |r|` per pair.
    pub relative_errors: Vec<T>,
    /// Coefficient of determination; `None` for fewer than two pairs.
    pub r_squared: Option<T>,
    /// Root of the summed squared relative errors.
    pub global_error: T,
}

impl<T: Scalar> MetricReport<T> {
    pub fn max_relative_error(&self) -> T {
        self.relative_errors.iter().fold(T::zero(), |a, &e| a.max(e))
    }

    pub fn mean_relative_error(&self) -> T {
        let n = T::from_usize(self.relative_errors.len()).unwrap_or(T::one());
        self.relative_errors.iter().copied().sum::<T>() / n
    }
}

/// Relative errors use the reference value as denominator.
pub fn metrics<T: Scalar>(predicted: &[T], reference: &[T]) -> Result<MetricReport<T>> {
    if predicted.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: reference.len(),
            got: predicted.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rel = Vec::with_capacity(reference.len());
    for (&p, &r) in predicted.iter().zip(reference) {
        if r.is_zero() {
            return Err(Error::InvalidInput("reference value is zero".into()));
        }
        rel.push(((p - r) / r).abs());
    }
    let global_error = rel.iter().map(|&e| e * e).sum::<T>().sqrt();
    let r_squared = if reference.len() >= 2 {
        let n = T::from_usize(reference.len()).unwrap();
        let mean = reference.iter().copied().sum::<T>() / n;
        let ss_tot: T = reference.iter().map(|&r| (r - mean) * (r - mean)).sum();
        if !(ss_tot > T::zero()) {
            return Err(Error::InvalidInput("reference values have zero variance".into()));
        }
        let ss_res: T = predicted.iter().zip(reference).map(|(&p, &r)| (p - r) * (p - r)).sum();
        Some(T::one() - ss_res / ss_tot)
    } else {
        None
    };
    Ok(MetricReport {
        relative_errors: rel,
        r_squared,
        global_error,
    })
}
