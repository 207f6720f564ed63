//! Stress and displacement fields from Kolosov–Muskhelishvili potentials.
//!
//! Conventions: `sxx = Re(2 phi' - conj(z) phi'' - psi')`,
//! `syy = Re(2 phi' + conj(z) phi'' + psi')`, `sxy = Im(conj(z) phi'' + psi')`,
//! and `2 mu (ux + i uy) = kappa phi - z conj(phi') - conj(psi)`.
//!
//! A Williams tip enrichment contributes the leading `sqrt` term of the
//! crack-tip expansion, rotated onto the crack tangent and translated to the
//! tip. Its square root is evaluated on a slit plane whose cut direction is
//! configurable, so each subdomain can pick the branch that is continuous over
//! its own interior.

use std::ops::{Add, AddAssign};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holonet::{HoloNetwork, Jet};
use crate::scalar::{cx, expi, is_finite_c, wrap_angle, Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PlaneStress,
    PlaneStrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material<T> {
    pub young_modulus: T,
    pub poisson: T,
    pub regime: Regime,
}

impl<T: Scalar> Material<T> {
    pub fn new(young_modulus: T, poisson: T, regime: Regime) -> Result<Self> {
        if !(young_modulus > T::zero()) || !young_modulus.is_finite() {
            return Err(Error::InvalidInput(format!(
                "young_modulus must be positive, got {young_modulus}"
            )));
        }
        if !(poisson > T::zero() && poisson < T::lit(0.5)) {
            return Err(Error::InvalidInput(format!(
                "poisson must lie in (0, 0.5), got {poisson}"
            )));
        }
        Ok(Self {
            young_modulus,
            poisson,
            regime,
        })
    }

    /// Shear modulus.
    pub fn mu(&self) -> T {
        self.young_modulus / (T::lit(2.0) * (T::one() + self.poisson))
    }

    /// Kolosov constant.
    pub fn kappa(&self) -> T {
        let nu = self.poisson;
        match self.regime {
            Regime::PlaneStress => (T::lit(3.0) - nu) / (T::one() + nu),
            Regime::PlaneStrain => T::lit(3.0) - T::lit(4.0) * nu,
        }
    }

    /// Effective modulus `E'` used in energy release rates.
    pub fn effective_modulus(&self) -> T {
        match self.regime {
            Regime::PlaneStress => self.young_modulus,
            Regime::PlaneStrain => self.young_modulus / (T::one() - self.poisson * self.poisson),
        }
    }

    /// In-plane Lamé constant, `mu (3 - kappa) / (kappa - 1)` for both regimes.
    pub fn in_plane_lambda(&self) -> T {
        let k = self.kappa();
        self.mu() * (T::lit(3.0) - k) / (k - T::one())
    }

    pub fn stress_from_strain(&self, eps: [[T; 2]; 2]) -> [[T; 2]; 2] {
        let mu2 = T::lit(2.0) * self.mu();
        let tr = self.in_plane_lambda() * (eps[0][0] + eps[1][1]);
        [
            [mu2 * eps[0][0] + tr, mu2 * eps[0][1]],
            [mu2 * eps[1][0], mu2 * eps[1][1] + tr],
        ]
    }

    pub fn strain_from_stress(&self, s: [[T; 2]; 2]) -> [[T; 2]; 2] {
        let k = self.kappa();
        let m8 = T::lit(8.0) * self.mu();
        let exx = ((k + T::one()) * s[0][0] - (T::lit(3.0) - k) * s[1][1]) / m8;
        let eyy = ((k + T::one()) * s[1][1] - (T::lit(3.0) - k) * s[0][0]) / m8;
        let exy = s[0][1] / (T::lit(2.0) * self.mu());
        [[exx, exy], [exy, eyy]]
    }
}

/// `phi, phi', phi'', psi, psi'` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials<T> {
    pub phi: C<T>,
    pub phi1: C<T>,
    pub phi2: C<T>,
    pub psi: C<T>,
    pub psi1: C<T>,
}

impl<T: Scalar> Potentials<T> {
    pub fn zero() -> Self {
        Self {
            phi: C::zero(),
            phi1: C::zero(),
            phi2: C::zero(),
            psi: C::zero(),
            psi1: C::zero(),
        }
    }

    pub fn scale(self, s: T) -> Self {
        Self {
            phi: self.phi * s,
            phi1: self.phi1 * s,
            phi2: self.phi2 * s,
            psi: self.psi * s,
            psi1: self.psi1 * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.phi, self.phi1, self.phi2, self.psi, self.psi1]
            .iter()
            .all(|&v| is_finite_c(v))
    }
}

impl<T: Scalar> Add for Potentials<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            phi: self.phi + o.phi,
            phi1: self.phi1 + o.phi1,
            phi2: self.phi2 + o.phi2,
            psi: self.psi + o.psi,
            psi1: self.psi1 + o.psi1,
        }
    }
}

impl<T: Scalar> AddAssign for Potentials<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Rotate by `alpha` and translate by `eta`: given local potentials evaluated
/// at `w = e^{-i alpha}(z - eta)`, return the global potentials at `z`.
pub fn transform_potentials<T: Scalar>(local: &Potentials<T>, alpha: T, eta: C<T>) -> Potentials<T> {
    let r = expi(alpha);
    let rc = r.conj();
    let eb = eta.conj();
    Potentials {
        phi: r * local.phi,
        phi1: local.phi1,
        phi2: rc * local.phi2,
        psi: rc * local.psi - eb * local.phi1,
        psi1: rc * rc * local.psi1 - eb * rc * local.phi2,
    }
}

/// Leading-order Williams enrichment attached to one crack tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipEnrichment<T> {
    pub tip: C<T>,
    /// Crack tangent at the tip, pointing in the direction of growth. The
    /// crack faces lie along local angle `+-pi`.
    pub angle: T,
    /// Complex SIF `K_I - i K_II`.
    pub k: C<T>,
    /// Direction of the square-root branch cut relative to `angle`; `pi`
    /// puts it along the crack behind the tip (principal branch).
    pub cut: T,
    /// Points closer than this to the tip are rejected.
    pub exclusion_radius: T,
}

/// Coefficients `(a, b)` with `q = a K + b conj(K)` for each enrichment
/// output channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsBasis<T> {
    pub phi: (C<T>, C<T>),
    pub phi1: (C<T>, C<T>),
    pub phi2: (C<T>, C<T>),
    pub psi: (C<T>, C<T>),
    pub psi1: (C<T>, C<T>),
}

impl<T: Scalar> WilliamsBasis<T> {
    pub fn apply(&self, k: C<T>) -> Potentials<T> {
        let kc = k.conj();
        let f = |(a, b): (C<T>, C<T>)| a * k + b * kc;
        Potentials {
            phi: f(self.phi),
            phi1: f(self.phi1),
            phi2: f(self.phi2),
            psi: f(self.psi),
            psi1: f(self.psi1),
        }
    }

    /// Accumulated `dL/dRe K + i dL/dIm K` for potential adjoints `adj`.
    pub fn k_adjoint(&self, adj: &Potentials<T>) -> C<T> {
        let f = |(a, b): (C<T>, C<T>), g: C<T>| g * a.conj() + g.conj() * b;
        f(self.phi, adj.phi)
            + f(self.phi1, adj.phi1)
            + f(self.phi2, adj.phi2)
            + f(self.psi, adj.psi)
            + f(self.psi1, adj.psi1)
    }
}

impl<T: Scalar> TipEnrichment<T> {
    /// Enrichment with the principal branch (cut along the crack).
    pub fn new(tip: C<T>, angle: T, k: C<T>) -> Self {
        Self {
            tip,
            angle,
            k,
            cut: T::PI(),
            exclusion_radius: T::zero(),
        }
    }

    pub fn with_cut(mut self, cut: T) -> Self {
        self.cut = cut;
        self
    }

    pub fn with_exclusion(mut self, radius: T) -> Self {
        self.exclusion_radius = radius;
        self
    }

    /// `K = K_I - i K_II`.
    pub fn from_sifs(tip: C<T>, angle: T, k_i: T, k_ii: T) -> Self {
        Self::new(tip, angle, cx(k_i, -k_ii))
    }

    pub fn k_i(&self) -> T {
        self.k.re
    }

    pub fn k_ii(&self) -> T {
        -self.k.im
    }

    /// Local polar angle of `z` on this enrichment's branch.
    pub fn local_angle(&self, z: C<T>) -> Result<(T, T)> {
        let w = (z - self.tip) * expi(-self.angle);
        let r = w.norm();
        if !(r > self.exclusion_radius) || r.is_zero() {
            return Err(Error::SingularEvaluation {
                x: z.re.to_f64_lossy(),
                y: z.im.to_f64_lossy(),
                reason: "inside tip exclusion radius",
            });
        }
        let raw = w.im.atan2(w.re);
        let cut = wrap_angle(self.cut);
        if wrap_angle(raw - cut).abs() < T::lit(1e-12) {
            return Err(Error::SingularEvaluation {
                x: z.re.to_f64_lossy(),
                y: z.im.to_f64_lossy(),
                reason: "on branch cut",
            });
        }
        let two_pi = T::PI() + T::PI();
        // keep the branch continuous through local angle 0 (ahead of the tip)
        let theta = if cut > T::zero() && raw >= cut {
            raw - two_pi
        } else if cut < T::zero() && raw <= cut {
            raw + two_pi
        } else {
            raw
        };
        Ok((r, theta))
    }

    pub fn basis(&self, z: C<T>) -> Result<WilliamsBasis<T>> {
        let (r, theta) = self.local_angle(z)?;
        let half = T::lit(0.5);
        let s = expi(theta * half) * r.sqrt(); // sqrt(w)
        let inv_s = s.inv();
        let inv_s3 = inv_s * inv_s * inv_s;
        let c = T::one() / (T::lit(2.0) * T::PI()).sqrt();
        let e = expi(self.angle);
        let ec = e.conj();
        let ec2 = ec * ec;
        let pb = self.tip.conj();
        let zero = C::zero();
        let quarter = T::lit(0.25);
        Ok(WilliamsBasis {
            phi: (e * s * c, zero),
            phi1: (inv_s * (c * half), zero),
            phi2: (-(ec * inv_s3) * (c * quarter), zero),
            psi: (-(ec * s * half + pb * inv_s * half) * c, ec * s * c),
            psi1: (
                (-(ec2 * inv_s) * quarter + pb * ec * inv_s3 * quarter) * c,
                ec2 * inv_s * (c * half),
            ),
        })
    }
}

/// Enrichment potentials and derivatives at `z`.
pub fn williams_potentials<T: Scalar>(e: &TipEnrichment<T>, z: C<T>) -> Result<Potentials<T>> {
    Ok(e.basis(z)?.apply(e.k))
}

/// Input/output scaling wrapped around the networks:
/// `phi_n(z) = value * N(z / length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetScaling<T> {
    pub length: T,
    pub value: T,
}

impl<T: Scalar> NetScaling<T> {
    pub fn unit() -> Self {
        Self {
            length: T::one(),
            value: T::one(),
        }
    }

    #[inline]
    pub fn input(&self, z: C<T>) -> C<T> {
        z / self.length
    }

    /// Physical potentials from raw network jets.
    #[inline]
    pub fn potentials(&self, phi: &Jet<T>, psi: &Jet<T>) -> Potentials<T> {
        let v = self.value;
        let vl = v / self.length;
        let vl2 = vl / self.length;
        Potentials {
            phi: phi.value * v,
            phi1: phi.d1 * vl,
            phi2: phi.d2 * vl2,
            psi: psi.value * v,
            psi1: psi.d1 * vl,
        }
    }
}

/// Solution representation on one subdomain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct PotentialModel<T> {
    pub phi_net: HoloNetwork<T>,
    pub psi_net: HoloNetwork<T>,
    pub enrichments: Vec<TipEnrichment<T>>,
    pub subdomain: usize,
    pub scaling: NetScaling<T>,
}

impl<T: Scalar> PotentialModel<T> {
    /// Composite potentials: network part plus every enrichment.
    pub fn potentials(&self, z: C<T>) -> Result<Potentials<T>> {
        let zeta = self.scaling.input(z);
        let phi = self.phi_net.forward_with_z_derivatives(zeta)?;
        let psi = self.psi_net.forward_with_z_derivatives(zeta)?;
        let mut p = self.scaling.potentials(&phi, &psi);
        for e in &self.enrichments {
            p += williams_potentials(e, z)?;
        }
        Ok(p)
    }

    pub fn same_architecture(&self, other: &Self) -> bool {
        self.phi_net.widths() == other.phi_net.widths()
            && self.psi_net.widths() == other.psi_net.widths()
            && self.enrichments.len() == other.enrichments.len()
    }
}

/// Stresses, displacements and optionally the displacement gradient
/// (`grad_u[i][j] = du_i / dx_j`) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<T> {
    pub sxx: T,
    pub syy: T,
    pub sxy: T,
    pub ux: T,
    pub uy: T,
    pub grad_u: Option<[[T; 2]; 2]>,
}

impl<T: Scalar> FieldSample<T> {
    pub fn zero() -> Self {
        Self {
            sxx: T::zero(),
            syy: T::zero(),
            sxy: T::zero(),
            ux: T::zero(),
            uy: T::zero(),
            grad_u: Some([[T::zero(); 2]; 2]),
        }
    }

    pub fn stress(&self) -> [[T; 2]; 2] {
        [[self.sxx, self.sxy], [self.sxy, self.syy]]
    }

    /// Traction `sigma . n`.
    pub fn traction(&self, n: C<T>) -> [T; 2] {
        [
            self.sxx * n.re + self.sxy * n.im,
            self.sxy * n.re + self.syy * n.im,
        ]
    }

    pub fn is_finite(&self) -> bool {
        let g = self.grad_u.unwrap_or([[T::zero(); 2]; 2]);
        [self.sxx, self.syy, self.sxy, self.ux, self.uy, g[0][0], g[0][1], g[1][0], g[1][1]]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Evaluate from potentials at `z`.
    pub fn from_potentials(p: &Potentials<T>, z: C<T>, mat: &Material<T>) -> Self {
        let zb = z.conj();
        let two = T::lit(2.0);
        let a = zb * p.phi2 + p.psi1;
        let base = p.phi1.re * two;
        let mu2 = two * mat.mu();
        let kappa = mat.kappa();
        let d = (p.phi * kappa - z * p.phi1.conj() - p.psi.conj()) / mu2;
        Self {
            sxx: base - a.re,
            syy: base + a.re,
            sxy: a.im,
            ux: d.re,
            uy: d.im,
            grad_u: Some(gradient_from_potentials(p, z, mat)),
        }
    }
}

/// Exact displacement gradient from `phi', phi'', psi'`.
pub fn gradient_from_potentials<T: Scalar>(p: &Potentials<T>, z: C<T>, mat: &Material<T>) -> [[T; 2]; 2] {
    let mu2 = T::lit(2.0) * mat.mu();
    let kappa = mat.kappa();
    let k1 = p.phi1 * kappa - p.phi1.conj();
    let rest = z * p.phi2.conj() + p.psi1.conj();
    let dx = (k1 - rest) / mu2;
    let dy = (k1 + rest) * cx(T::zero(), T::one()) / mu2;
    [[dx.re, dy.re], [dx.im, dy.im]]
}

/// Fields of a composite model at `z`.
pub fn evaluate_fields<T: Scalar>(m: &PotentialModel<T>, mat: &Material<T>, z: C<T>) -> Result<FieldSample<T>> {
    let p = m.potentials(z)?;
    let f = FieldSample::from_potentials(&p, z, mat);
    if !f.is_finite() {
        return Err(Error::NonFiniteField {
            x: z.re.to_f64_lossy(),
            y: z.im.to_f64_lossy(),
        });
    }
    Ok(f)
}

pub fn displacement_gradient<T: Scalar>(
    m: &PotentialModel<T>,
    mat: &Material<T>,
    z: C<T>,
) -> Result<[[T; 2]; 2]> {
    let p = m.potentials(z)?;
    Ok(gradient_from_potentials(&p, z, mat))
}

/// Rotate a symmetric 2x2 tensor into a frame whose x-axis is at `angle`.
pub fn rotate_into_frame<T: Scalar>(t: [[T; 2]; 2], angle: T) -> [[T; 2]; 2] {
    let (s, c) = angle.sin_cos();
    // R t R^T with R = [[c, s], [-s, c]]
    let r = [[c, s], [-s, c]];
    let mut out = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = T::zero();
            for k in 0..2 {
                for l in 0..2 {
                    acc = acc + r[i][k] * t[k][l] * r[j][l];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonet::{init_network, InitConfig};
    use std::f64::consts::PI;

    fn steel() -> Material<f64> {
        Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap()
    }

    /// Textbook near-tip fields, written out independently of the potentials.
    fn closed_form(k1: f64, k2: f64, r: f64, th: f64, mat: &Material<f64>) -> [f64; 5] {
        let (c, s) = ((th / 2.0).cos(), (th / 2.0).sin());
        let (c3, s3) = ((1.5 * th).cos(), (1.5 * th).sin());
        let a = 1.0 / (2.0 * PI * r).sqrt();
        let b = (r / (2.0 * PI)).sqrt() / (2.0 * mat.mu());
        let k = mat.kappa();
        [
            k1 * a * c * (1.0 - s * s3) - k2 * a * s * (2.0 + c * c3),
            k1 * a * c * (1.0 + s * s3) + k2 * a * s * c * c3,
            k1 * a * c * s * c3 + k2 * a * c * (1.0 - s * s3),
            k1 * b * c * (k - 1.0 + 2.0 * s * s) + k2 * b * s * (k + 1.0 + 2.0 * c * c),
            k1 * b * s * (k + 1.0 - 2.0 * c * c) - k2 * b * c * (k - 1.0 - 2.0 * s * s),
        ]
    }

    fn bare_model(enrichments: Vec<TipEnrichment<f64>>) -> PotentialModel<f64> {
        PotentialModel {
            phi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
            psi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
            enrichments,
            subdomain: 0,
            scaling: NetScaling::unit(),
        }
    }

    fn random_model(seed: u64) -> PotentialModel<f64> {
        let w = [1, 8, 8, 1];
        let probe: Vec<_> = (0..32)
            .map(|k| C::new((k as f64 * 0.7).cos(), (k as f64 * 0.3).sin()))
            .collect();
        let phi = init_network(&w, &InitConfig::with_defaults(&w, probe.clone(), seed)).unwrap();
        let psi = init_network(&w, &InitConfig::with_defaults(&w, probe, seed + 1)).unwrap();
        PotentialModel {
            phi_net: phi,
            psi_net: psi,
            enrichments: vec![TipEnrichment::from_sifs(C::new(-0.5, 0.1), 0.3, 1.3, -0.4)],
            subdomain: 0,
            scaling: NetScaling { length: 2.0, value: 3.0 },
        }
    }

    #[test]
    fn material_constants() {
        let m = steel();
        assert!((m.kappa() - 1.8).abs() < 1e-15);
        assert!((m.effective_modulus() - 230_769.230_769_230_8).abs() < 1e-6);
        assert!((m.mu() - 210_000.0 / 2.6).abs() < 1e-9);
        let ps: Material<f64> = Material::new(210_000.0, 0.3, Regime::PlaneStress).unwrap();
        assert!((ps.kappa() - 2.7 / 1.3).abs() < 1e-15);
        assert_eq!(ps.effective_modulus(), 210_000.0);
        assert!(Material::new(-1.0, 0.3, Regime::PlaneStrain).is_err());
        assert!(Material::new(1.0, 0.5, Regime::PlaneStrain).is_err());
    }

    #[test]
    fn zero_amplitude_enrichment_vanishes() {
        let e = TipEnrichment::new(C::new(0.2, 0.1), 0.4, C::new(0.0, 0.0));
        let p = williams_potentials(&e, C::new(1.0, 0.5)).unwrap();
        assert_eq!(p, Potentials::zero());
    }

    #[test]
    fn enrichment_matches_textbook_fields_both_modes() {
        let mat = steel();
        for &(k1, k2) in &[(1.0, 0.0), (0.0, 1.0), (2.0, -0.7)] {
            let e = TipEnrichment::from_sifs(C::new(0.0, 0.0), 0.0, k1, k2);
            let m = bare_model(vec![e]);
            for &r in &[1e-3, 0.05, 0.4, 1.0] {
                for k in 0..24 {
                    let th = -PI + (k as f64 + 0.5) * 2.0 * PI / 24.0;
                    let z = C::from_polar(r, th);
                    let f = evaluate_fields(&m, &mat, z).unwrap();
                    let want = closed_form(k1, k2, r, th, &mat);
                    let got = [f.sxx, f.syy, f.sxy, f.ux, f.uy];
                    let ss = want[..3].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    let us = want[3..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    for i in 0..5 {
                        let scale = if i < 3 { ss } else { us };
                        assert!((got[i] - want[i]).abs() <= 1e-10 * scale, "{i} {r} {th}");
                    }
                }
            }
        }
    }

    #[test]
    fn enrichment_equals_transformed_local_potentials() {
        let e = TipEnrichment::new(C::new(0.7, -0.3), 0.9, C::new(1.4, -0.6));
        let z = C::new(1.1, 0.4);
        let w = (z - e.tip) * expi(-e.angle);
        let c = 1.0 / (2.0 * PI).sqrt();
        let s = w.sqrt();
        let k = e.k;
        let kk = k.conj() - k / 2.0;
        let local = Potentials {
            phi: k * s * c,
            phi1: k * c / (s * 2.0),
            phi2: -k * c / (s * s * s * 4.0),
            psi: kk * s * c,
            psi1: kk * c / (s * 2.0),
        };
        let a = transform_potentials(&local, e.angle, e.tip);
        let b = williams_potentials(&e, z).unwrap();
        for (x, y) in [(a.phi, b.phi), (a.phi1, b.phi1), (a.phi2, b.phi2), (a.psi, b.psi), (a.psi1, b.psi1)] {
            assert!((x - y).norm() < 1e-13 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn singular_points_are_rejected() {
        let e = TipEnrichment::new(C::new(0.0, 0.0), 0.0, C::new(1.0, 0.0)).with_exclusion(1e-3);
        assert!(matches!(
            williams_potentials(&e, C::new(5e-4, 0.0)),
            Err(Error::SingularEvaluation { .. })
        ));
        assert!(matches!(
            williams_potentials(&e, C::new(-0.5, 0.0)),
            Err(Error::SingularEvaluation { .. })
        ));
        assert!(williams_potentials(&e, C::new(-0.5, 1e-9)).is_ok());
    }

    #[test]
    fn side_branches_pick_face_limits() {
        let mat = steel();
        let k = C::new(1.0, -0.5);
        let tip = C::new(0.3, -0.2);
        let a = 0.4;
        let upper = bare_model(vec![TipEnrichment::new(tip, a, k).with_cut(-PI / 2.0)]);
        let lower = bare_model(vec![TipEnrichment::new(tip, a, k).with_cut(PI / 2.0)]);
        let principal = bare_model(vec![TipEnrichment::new(tip, a, k)]);
        let behind = tip - expi(a) * 0.5;
        let eps = expi(a + PI / 2.0) * 1e-9;
        let fu = evaluate_fields(&upper, &mat, behind).unwrap();
        let fp = evaluate_fields(&principal, &mat, behind + eps).unwrap();
        let fl = evaluate_fields(&lower, &mat, behind).unwrap();
        let fpl = evaluate_fields(&principal, &mat, behind - eps).unwrap();
        assert!((fu.ux - fp.ux).abs() < 1e-6 * fp.uy.abs());
        assert!((fl.uy - fpl.uy).abs() < 1e-6 * fpl.uy.abs());
        // faces open: displacement jumps across the crack
        assert!((fu.uy - fl.uy).abs() > 1e-7);
        // ahead of the tip the two sides agree
        let ahead = tip + expi(a) * 0.5;
        let au = evaluate_fields(&upper, &mat, ahead).unwrap();
        let al = evaluate_fields(&lower, &mat, ahead).unwrap();
        assert!((au.ux - al.ux).abs() < 1e-15 && (au.uy - al.uy).abs() < 1e-15);
        assert!((au.syy - al.syy).abs() < 1e-12);
    }

    #[test]
    fn faces_are_traction_free() {
        let mat = steel();
        let e = TipEnrichment::from_sifs(C::new(0.0, 0.0), 0.0, 1.0, 0.8);
        let m = bare_model(vec![e]);
        for th in [PI - 1e-6, -PI + 1e-6] {
            let f = evaluate_fields(&m, &mat, C::from_polar(0.3, th)).unwrap();
            assert!(f.syy.abs() < 1e-5 && f.sxy.abs() < 1e-5, "{f:?}");
        }
    }

    #[test]
    fn transform_identity_and_translation() {
        let local = Potentials {
            phi: C::new(0.1, 0.2),
            phi1: C::new(-0.3, 0.4),
            phi2: C::new(0.5, 0.6),
            psi: C::new(0.7, -0.8),
            psi1: C::new(0.9, 1.0),
        };
        assert_eq!(transform_potentials(&local, 0.0, C::new(0.0, 0.0)), local);

        // translated tip enrichment reproduces the untranslated fields at z - eta
        let mat = steel();
        let k = C::new(1.2, 0.3);
        let eta = C::new(0.8, -0.6);
        let m0 = bare_model(vec![TipEnrichment::new(C::new(0.0, 0.0), 0.0, k)]);
        let m1 = bare_model(vec![TipEnrichment::new(eta, 0.0, k)]);
        let z = C::new(0.3, 0.45);
        let a = evaluate_fields(&m0, &mat, z).unwrap();
        let b = evaluate_fields(&m1, &mat, z + eta).unwrap();
        assert!((a.sxx - b.sxx).abs() < 1e-12 && (a.syy - b.syy).abs() < 1e-12 && (a.sxy - b.sxy).abs() < 1e-12);
        assert!((a.ux - b.ux).abs() < 1e-16 && (a.uy - b.uy).abs() < 1e-16);
    }

    fn tension_potentials(sigma: f64, z: C<f64>) -> Potentials<f64> {
        // uniaxial tension along y
        Potentials {
            phi: z * (sigma / 4.0),
            phi1: C::new(sigma / 4.0, 0.0),
            phi2: C::new(0.0, 0.0),
            psi: z * (sigma / 2.0),
            psi1: C::new(sigma / 2.0, 0.0),
        }
    }

    #[test]
    fn uniaxial_tension_and_rotation() {
        let mat = steel();
        let z = C::new(0.7, -1.3);
        let f = FieldSample::from_potentials(&tension_potentials(1.0, z), z, &mat);
        assert!(f.sxx.abs() < 1e-15 && (f.syy - 1.0).abs() < 1e-15 && f.sxy.abs() < 1e-15);

        // rotate the potentials by 90 degrees: tension now along x
        let w = z * expi(-PI / 2.0);
        let g = transform_potentials(&tension_potentials(1.0, w), PI / 2.0, C::new(0.0, 0.0));
        let fr = FieldSample::from_potentials(&g, z, &mat);
        assert!((fr.sxx - 1.0).abs() < 1e-12 && fr.syy.abs() < 1e-12 && fr.sxy.abs() < 1e-12);

        // general angle: compare with tensor rotation of the local stress
        let alpha = 0.6;
        let w = z * expi(-alpha);
        let g = transform_potentials(&tension_potentials(1.0, w), alpha, C::new(0.0, 0.0));
        let fr = FieldSample::from_potentials(&g, z, &mat);
        let local = rotate_into_frame(fr.stress(), alpha);
        assert!(local[0][0].abs() < 1e-10 && (local[1][1] - 1.0).abs() < 1e-10 && local[0][1].abs() < 1e-10);
    }

    #[test]
    fn tension_gradient_matches_hooke_inversion() {
        let mat = steel();
        let z = C::new(0.2, 0.5);
        let p = tension_potentials(1.0, z);
        let g = gradient_from_potentials(&p, z, &mat);
        let mu = mat.mu();
        let k = mat.kappa();
        assert!((g[1][1] - (k + 1.0) / (8.0 * mu)).abs() < 1e-18 + 1e-12 * g[1][1].abs());
        assert!((g[0][0] - (k - 3.0) / (8.0 * mu)).abs() < 1e-12 * g[0][0].abs());
        let eps = mat.strain_from_stress([[0.0, 0.0], [0.0, 1.0]]);
        assert!((eps[1][1] - g[1][1]).abs() < 1e-12 * eps[1][1]);
    }

    #[test]
    fn gradient_matches_finite_differences_and_hooke() {
        let mat = steel();
        let m = random_model(4);
        for &(x, y) in &[(0.4, 0.3), (-1.2, 0.8), (0.9, -0.7)] {
            let z = C::new(x, y);
            let f = evaluate_fields(&m, &mat, z).unwrap();
            let g = f.grad_u.unwrap();
            let h = 1e-6;
            let fx = |d: C<f64>| evaluate_fields(&m, &mat, z + d).unwrap();
            let (px, mx) = (fx(C::new(h, 0.0)), fx(C::new(-h, 0.0)));
            let (py, my) = (fx(C::new(0.0, h)), fx(C::new(0.0, -h)));
            let fd = [
                [(px.ux - mx.ux) / (2.0 * h), (py.ux - my.ux) / (2.0 * h)],
                [(px.uy - mx.uy) / (2.0 * h), (py.uy - my.uy) / (2.0 * h)],
            ];
            let scale = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fd[i][j] - g[i][j]).abs() < 1e-6 * scale, "{i}{j}");
                }
            }
            let eps = [[g[0][0], 0.5 * (g[0][1] + g[1][0])], [0.5 * (g[0][1] + g[1][0]), g[1][1]]];
            let s = mat.stress_from_strain(eps);
            let sm = f.sxx.abs().max(f.syy.abs()).max(f.sxy.abs());
            assert!((s[0][0] - f.sxx).abs() < 1e-6 * sm);
            assert!((s[1][1] - f.syy).abs() < 1e-6 * sm);
            assert!((s[0][1] - f.sxy).abs() < 1e-6 * sm);
        }
    }

    #[test]
    fn constant_shift_leaves_gradient_unchanged() {
        let mat = steel();
        let z = C::new(0.3, 0.2);
        let p = tension_potentials(2.0, z);
        let mut q = p;
        q.phi += C::new(5.0, -3.0);
        assert_eq!(gradient_from_potentials(&p, z, &mat), gradient_from_potentials(&q, z, &mat));
    }

    #[test]
    fn random_model_is_in_equilibrium() {
        let mat = steel();
        let m = random_model(8);
        let h = 1e-4;
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                let z = C::new(0.2 + 0.25 * i as f64, 0.3 + 0.2 * j as f64);
                let f = |d: C<f64>| evaluate_fields(&m, &mat, z + d).unwrap();
                let (px, mx, py, my) = (f(C::new(h, 0.0)), f(C::new(-h, 0.0)), f(C::new(0.0, h)), f(C::new(0.0, -h)));
                let scale = f(C::new(0.0, 0.0));
                let s = scale.sxx.abs().max(scale.syy.abs()).max(scale.sxy.abs());
                let rx = (px.sxx - mx.sxx) / (2.0 * h) + (py.sxy - my.sxy) / (2.0 * h);
                let ry = (px.sxy - mx.sxy) / (2.0 * h) + (py.syy - my.syy) / (2.0 * h);
                worst = worst.max(rx.abs().max(ry.abs()) / s);
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn k_adjoint_matches_finite_differences() {
        let e = TipEnrichment::new(C::new(0.4, -0.1), 0.7, C::new(1.1, 0.6));
        let z = C::new(-0.2, 0.9);
        let basis = e.basis(z).unwrap();
        let adj = Potentials {
            phi: C::new(0.3, -0.2),
            phi1: C::new(0.1, 0.5),
            phi2: C::new(-0.4, 0.2),
            psi: C::new(0.6, 0.1),
            psi1: C::new(-0.2, -0.3),
        };
        let loss = |k: C<f64>| {
            let p = basis.apply(k);
            [(p.phi, adj.phi), (p.phi1, adj.phi1), (p.phi2, adj.phi2), (p.psi, adj.psi), (p.psi1, adj.psi1)]
                .iter()
                .map(|(q, g)| q.re * g.re + q.im * g.im)
                .sum::<f64>()
        };
        let g = basis.k_adjoint(&adj);
        let h = 1e-6;
        let dre = (loss(e.k + h) - loss(e.k - h)) / (2.0 * h);
        let dim = (loss(e.k + C::new(0.0, h)) - loss(e.k - C::new(0.0, h))) / (2.0 * h);
        assert!((dre - g.re).abs() < 1e-8 && (dim - g.im).abs() < 1e-8);
    }
}
