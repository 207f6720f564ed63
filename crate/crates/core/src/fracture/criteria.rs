//! Growth onset check, kinked-tip SIF map and kink-angle criteria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km_fields::Material;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthStatus {
    NoGrowth,
    Onset,
    Growth,
}

/// Classify by `(K_I/K_Ic)^2 + (K_II/K_IIc)^2` against one.
pub fn check_growth<T: Scalar>(k_i: T, k_ii: T, k_ic: T, k_iic: T) -> Result<GrowthStatus> {
    if !(k_ic > T::zero() && k_iic > T::zero()) {
        return Err(Error::InvalidInput("critical SIFs must be positive".into()));
    }
    let a = k_i / k_ic;
    let b = k_ii / k_iic;
    let ratio = a * a + b * b;
    let tol = T::lit(1e-9);
    Ok(if (ratio - T::one()).abs() <= tol {
        GrowthStatus::Onset
    } else if ratio < T::one() {
        GrowthStatus::NoGrowth
    } else {
        GrowthStatus::Growth
    })
}

/// First-order SIFs at the tip of a short kink at angle `theta`.
pub fn cr_map<T: Scalar>(k_i: T, k_ii: T, theta: T) -> (T, T) {
    let (s, c) = (theta * T::lit(0.5)).sin_cos();
    let three = T::lit(3.0);
    let c2 = c * c;
    (
        c2 * c * k_i - three * s * c2 * k_ii,
        s * c2 * k_i + c * (T::one() - three * s * s) * k_ii,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Mts,
    Merr,
    Pls,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Mts, Criterion::Merr, Criterion::Pls];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Mts => "mts",
            Criterion::Merr => "merr",
            Criterion::Pls => "pls",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mts" => Ok(Criterion::Mts),
            "merr" => Ok(Criterion::Merr),
            "pls" => Ok(Criterion::Pls),
            other => Err(Error::InvalidInput(format!("unknown criterion '{other}' (mts, merr or pls)"))),
        }
    }
}

fn check_nonzero<T: Scalar>(k_i: T, k_ii: T) -> Result<()> {
    if k_i.is_zero() && k_ii.is_zero() {
        return Err(Error::ZeroSifs);
    }
    if !(k_i.is_finite() && k_ii.is_finite()) {
        return Err(Error::NonFinite("stress intensity factors".into()));
    }
    Ok(())
}

/// Closed-form maximum tangential stress angle; the kink opposes the sign
/// of `K_II`.
pub fn mts_angle<T: Scalar>(k_i: T, k_ii: T) -> Result<T> {
    check_nonzero(k_i, k_ii)?;
    if k_ii.is_zero() {
        return Ok(T::zero());
    }
    let (a2, b2) = (k_i * k_i, k_ii * k_ii);
    let num = T::lit(3.0) * b2 + (a2 * a2 + T::lit(8.0) * a2 * b2).sqrt();
    let cos = (num / (a2 + T::lit(9.0) * b2)).min(T::one()).max(-T::one());
    Ok(-k_ii.signum() * cos.acos())
}

const SEARCH_LIMIT_DEG: f64 = 80.0;
const GRID_STEP_DEG: f64 = 0.05;

/// Grid search plus golden-section refinement of `score` (maximized) over
/// `|theta| <= 80 deg`, restricted to `K_I'(theta) > 0`.
fn search<T: Scalar>(k_i: T, k_ii: T, score: impl Fn(T, T) -> T) -> Result<T> {
    let lim = T::lit(SEARCH_LIMIT_DEG.to_radians());
    let step = T::lit(GRID_STEP_DEG.to_radians());
    let n = (2.0 * SEARCH_LIMIT_DEG / GRID_STEP_DEG).round() as usize;
    let eval = |t: T| {
        let (a, b) = cr_map(k_i, k_ii, t);
        (a > T::zero()).then(|| score(a, b))
    };
    let mut best: Option<(usize, T)> = None;
    for k in 0..=n {
        let t = -lim + step * T::from_usize(k).unwrap();
        if let Some(v) = eval(t) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
    }
    let (k, _) = best.ok_or(Error::EmptyAdmissibleSet)?;
    let centre = -lim + step * T::from_usize(k).unwrap();
    let (mut lo, mut hi) = ((centre - step).max(-lim), (centre + step).min(lim));
    let g = T::lit(0.618_033_988_749_894_9);
    let val = |t: T| eval(t).unwrap_or(T::neg_infinity());
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (val(x1), val(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = val(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = val(x1);
        }
    }
    let t = (lo + hi) * T::lit(0.5);
    Ok(if val(t) >= val(centre) { t } else { centre })
}

/// Angle maximizing the kinked-tip energy release rate.
pub fn merr_angle<T: Scalar>(k_i: T, k_ii: T, mat: &Material<T>) -> Result<T> {
    check_nonzero(k_i, k_ii)?;
    let e = mat.effective_modulus();
    search(k_i, k_ii, |a, b| (a * a + b * b) / e)
}

/// Angle at which the kinked-tip `K_II'` vanishes, among tensile kinks.
pub fn pls_angle<T: Scalar>(k_i: T, k_ii: T) -> Result<T> {
    check_nonzero(k_i, k_ii)?;
    search(k_i, k_ii, |_, b| -b.abs())
}

pub fn kink_angle<T: Scalar>(criterion: Criterion, k_i: T, k_ii: T, mat: &Material<T>) -> Result<T> {
    match criterion {
        Criterion::Mts => mts_angle(k_i, k_ii),
        Criterion::Merr => merr_angle(k_i, k_ii, mat),
        Criterion::Pls => pls_angle(k_i, k_ii),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::km_fields::Regime;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn steel() -> Material<f64> {
        Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap()
    }

    #[test]
    fn growth_gate() {
        assert_eq!(check_growth(2.0, 0.0, 2.0, 1.0).unwrap(), GrowthStatus::Onset);
        assert_eq!(check_growth(0.0, 0.0, 2.0, 1.0).unwrap(), GrowthStatus::NoGrowth);
        assert_eq!(check_growth(3.0, 4.0, 5.0, 5.0).unwrap(), GrowthStatus::Onset);
        assert_eq!(check_growth(3.0, 4.1, 5.0, 5.0).unwrap(), GrowthStatus::Growth);
        assert!(check_growth(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cr_map_fixtures() {
        assert_eq!(cr_map(1.3, -0.4, 0.0), (1.3, -0.4));
        let (a, b): (f64, f64) = cr_map(1.0, 0.0, PI / 3.0);
        assert!((a - 0.649_519_052_838_329).abs() < 1e-12);
        assert!((b - 0.375).abs() < 1e-12);
    }

    #[test]
    fn mts_fixtures() {
        assert_eq!(mts_angle(1.0, 0.0).unwrap(), 0.0);
        let t: f64 = mts_angle(0.0, 1.0).unwrap();
        assert!((t + (1.0f64 / 3.0).acos()).abs() < 1e-14);
        assert!((t.to_degrees() + 70.528_779).abs() < 1e-5);
        let t: f64 = mts_angle(1.0, 1.0).unwrap();
        assert!((t + 0.6f64.acos()).abs() < 1e-14);
        assert_eq!(mts_angle(0.0, 0.0), Err(Error::ZeroSifs));
    }

    #[test]
    fn searched_criteria_fixtures() {
        let m = steel();
        assert!(merr_angle(1.0, 0.0, &m).unwrap().abs() < 1e-6);
        assert!(pls_angle(1.0f64, 0.0).unwrap().abs() < 1e-6);
        let p: f64 = pls_angle(0.0, 1.0).unwrap();
        assert!((p.abs() - (1.0f64 / 3.0).acos()).abs() < 0.01f64.to_radians());
        assert_eq!(pls_angle(0.0, 0.0), Err(Error::ZeroSifs));
    }

    proptest! {
        #[test]
        fn criteria_agree(mix in -1.0f64..1.0, scale in 0.1f64..10.0) {
            let m = steel();
            let (k1, k2) = (scale, scale * mix);
            let t = mts_angle(k1, k2).unwrap().to_degrees();
            let p = pls_angle(k1, k2).unwrap().to_degrees();
            let e = merr_angle(k1, k2, &m).unwrap().to_degrees();
            prop_assert!((t - p).abs() < 0.5, "mts {} pls {}", t, p);
            prop_assert!((t - e).abs() < 3.0, "mts {} merr {}", t, e);
        }

        #[test]
        fn mirror_and_scale_symmetry(mix in -2.0f64..2.0, c in 0.1f64..10.0) {
            let m = steel();
            let a = pls_angle(1.0, mix).unwrap();
            prop_assert!((pls_angle(1.0, -mix).unwrap() + a).abs() < 1e-9);
            let e = merr_angle(1.0, mix, &m).unwrap();
            prop_assert!((merr_angle(c, c * mix, &m).unwrap() - e).abs() < 1e-6);
        }

        #[test]
        fn cr_map_odd_in_mode_one(theta in -1.5f64..1.5, k in 0.1f64..5.0) {
            let (_, p) = cr_map(k, 0.0, theta);
            let (_, q) = cr_map(k, 0.0, -theta);
            prop_assert!((p + q).abs() < 1e-14);
        }

        #[test]
        fn cr_map_matches_stress_rotation(theta in -1.4f64..1.4, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
            // leading-order kink SIFs are the hoop and shear stresses rotated
            // onto the kink direction, times sqrt(2 pi r)
            let m = steel();
            let f = crate::reference::williams_closed_form(k1, k2, 1.0, theta, &m).unwrap();
            let (s, c) = theta.sin_cos();
            let s_tt = f.sxx * s * s + f.syy * c * c - 2.0 * f.sxy * s * c;
            let s_rt = (f.syy - f.sxx) * s * c + f.sxy * (c * c - s * s);
            let scale = (2.0 * PI).sqrt();
            let (a, b) = cr_map(k1, k2, theta);
            prop_assert!((a - s_tt * scale).abs() < 1e-12 * (1.0 + a.abs()));
            prop_assert!((b - s_rt * scale).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }
}
