//! Auxiliary near-tip fields and contour integrals around a tip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km_fields::{rotate_into_frame, FieldSample, Material};
use crate::scalar::{Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    I,
    II,
}

/// Unit-SIF auxiliary state in the tip frame at polar `(r, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryState<T> {
    pub u: [T; 2],
    pub stress: [[T; 2]; 2],
    /// `du_i / dx_1` in the tip frame.
    pub du_dx1: [T; 2],
}

/// Auxiliary displacement and stress for a unit SIF of `mode`.
pub fn auxiliary_fields<T: Scalar>(mode: Mode, r: T, theta: T, mat: &Material<T>) -> Result<AuxiliaryState<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidInput(format!("auxiliary field radius must be positive, got {r}")));
    }
    let q = T::lit(0.25);
    let (s1, c1) = (theta * T::lit(0.5)).sin_cos();
    let (s3, c3) = (theta * T::lit(1.5)).sin_cos();
    let (s5, c5) = (theta * T::lit(2.5)).sin_cos();
    let (st, ct) = theta.sin_cos();
    let k = mat.kappa();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let half = T::lit(0.5);
    let inv = T::one() / (two * T::PI() * r).sqrt();
    let ud = T::one() / (T::lit(4.0) * mat.mu());

    // angular stress functions and displacement brackets with their
    // theta-derivatives
    let (g, f, fp) = match mode {
        Mode::I => (
            [q * (three * c1 + c5), q * (T::lit(5.0) * c1 - c5), q * (s5 - s1)],
            [(two * k - T::one()) * c1 - c3, (two * k + T::one()) * s1 - s3],
            [
                -(two * k - T::one()) * s1 * half + T::lit(1.5) * s3,
                (two * k + T::one()) * c1 * half - T::lit(1.5) * c3,
            ],
        ),
        Mode::II => (
            [-q * (T::lit(7.0) * s1 + s5), q * (s5 - s1), q * (three * c1 + c5)],
            [(two * k + three) * s1 + s3, -((two * k - three) * c1 + c3)],
            [
                (two * k + three) * c1 * half + T::lit(1.5) * c3,
                (two * k - three) * s1 * half + T::lit(1.5) * s3,
            ],
        ),
    };
    let sq = r * inv;
    // d/dx1 = cos(theta) d/dr - sin(theta)/r d/dtheta applied to sqrt(r) f(theta)
    let du = |fi: T, fpi: T| ud * inv * (ct * fi * half - st * fpi);
    Ok(AuxiliaryState {
        u: [ud * sq * f[0], ud * sq * f[1]],
        stress: [[inv * g[0], inv * g[2]], [inv * g[2], inv * g[1]]],
        du_dx1: [du(f[0], fp[0]), du(f[1], fp[1])],
    })
}

/// Field evaluated on the contour; must carry the displacement gradient.
pub trait FieldEvaluator<T: Scalar> {
    fn sample(&self, z: C<T>) -> Result<FieldSample<T>>;
}

impl<T: Scalar, F: Fn(C<T>) -> Result<FieldSample<T>>> FieldEvaluator<T> for F {
    fn sample(&self, z: C<T>) -> Result<FieldSample<T>> {
        self(z)
    }
}

struct ContourNode<T> {
    theta: T,
    /// Stress and displacement gradient in the tip frame.
    stress: [[T; 2]; 2],
    grad: [[T; 2]; 2],
}

fn contour_nodes<T: Scalar, F: FieldEvaluator<T> + ?Sized>(
    field: &F,
    tip: C<T>,
    tip_angle: T,
    radius: T,
    n_quad: usize,
) -> Result<(Vec<ContourNode<T>>, T)> {
    if n_quad < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 quadrature nodes, got {n_quad}")));
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidInput(format!("contour radius must be positive, got {radius}")));
    }
    let n = T::from_usize(n_quad).unwrap();
    let two_pi = T::lit(2.0) * T::PI();
    let mut out = Vec::with_capacity(n_quad);
    // midpoint nodes: the nearest sits pi/n off the faces, never on them
    for k in 0..n_quad {
        let theta = -T::PI() + (T::from_usize(k).unwrap() + T::lit(0.5)) * two_pi / n;
        let z = tip + C::from_polar(radius, tip_angle + theta);
        let f = field.sample(z)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteField {
                x: z.re.to_f64_lossy(),
                y: z.im.to_f64_lossy(),
            });
        }
        let g = f
            .grad_u
            .ok_or_else(|| Error::InvalidInput("contour integration needs displacement gradients".into()))?;
        out.push(ContourNode {
            theta,
            stress: rotate_into_frame(f.stress(), tip_angle),
            grad: rotate_into_frame(g, tip_angle),
        });
    }
    let w = two_pi * radius / n;
    Ok((out, w))
}

/// Interaction integral with the unit auxiliary field of `mode`, on a circle
/// of `radius` around `tip` in the frame whose x-axis is `tip_angle`.
pub fn interaction_integral<T: Scalar, F: FieldEvaluator<T> + ?Sized>(
    field: &F,
    mat: &Material<T>,
    tip: C<T>,
    tip_angle: T,
    radius: T,
    n_quad: usize,
    mode: Mode,
) -> Result<T> {
    let (nodes, w) = contour_nodes(field, tip, tip_angle, radius, n_quad)?;
    let mut acc = T::zero();
    for node in &nodes {
        let aux = auxiliary_fields(mode, radius, node.theta, mat)?;
        let eps_aux = mat.strain_from_stress(aux.stress);
        let (s, c) = node.theta.sin_cos();
        let nrm = [c, s];
        let sig = node.stress;
        let mut mutual = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                mutual = mutual + sig[i][j] * eps_aux[i][j];
            }
        }
        let mut term = mutual * nrm[0];
        for i in 0..2 {
            for j in 0..2 {
                term = term - sig[i][j] * aux.du_dx1[i] * nrm[j] - aux.stress[i][j] * node.grad[i][0] * nrm[j];
            }
        }
        acc = acc + term * w;
    }
    Ok(acc)
}

/// J-integral on the same contour.
pub fn j_integral<T: Scalar, F: FieldEvaluator<T> + ?Sized>(
    field: &F,
    tip: C<T>,
    tip_angle: T,
    radius: T,
    n_quad: usize,
) -> Result<T> {
    let (nodes, w) = contour_nodes(field, tip, tip_angle, radius, n_quad)?;
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for node in &nodes {
        let (s, c) = node.theta.sin_cos();
        let nrm = [c, s];
        let (sig, g) = (node.stress, node.grad);
        let mut energy = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                energy = energy + sig[i][j] * (g[i][j] + g[j][i]) * half;
            }
        }
        let mut term = energy * half * nrm[0];
        for i in 0..2 {
            for j in 0..2 {
                term = term - sig[i][j] * g[i][0] * nrm[j];
            }
        }
        acc = acc + term * w;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SifEstimate<T> {
    pub k_i: T,
    pub k_ii: T,
    pub radius_ratio: T,
    /// Contour radius actually used, in length units.
    pub radius: T,
    pub n_quad: usize,
    pub j: Option<T>,
}

impl<T: Scalar> SifEstimate<T> {
    /// Energy release rate implied by the SIFs.
    pub fn energy_release_rate(&self, mat: &Material<T>) -> T {
        (self.k_i * self.k_i + self.k_ii * self.k_ii) / mat.effective_modulus()
    }
}

/// `K = (E'/2) I` for both modes, plus the J cross-check.
pub fn extract_sifs<T: Scalar, F: FieldEvaluator<T> + ?Sized>(
    field: &F,
    mat: &Material<T>,
    tip: C<T>,
    tip_angle: T,
    radius: T,
    n_quad: usize,
    radius_ratio: T,
) -> Result<SifEstimate<T>> {
    let half_e = mat.effective_modulus() * T::lit(0.5);
    let k_i = half_e * interaction_integral(field, mat, tip, tip_angle, radius, n_quad, Mode::I)?;
    let k_ii = half_e * interaction_integral(field, mat, tip, tip_angle, radius, n_quad, Mode::II)?;
    let j = j_integral(field, tip, tip_angle, radius, n_quad)?;
    Ok(SifEstimate {
        k_i,
        k_ii,
        radius_ratio,
        radius,
        n_quad,
        j: Some(j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonet::HoloNetwork;
    use crate::km_fields::{evaluate_fields, NetScaling, PotentialModel, Regime, TipEnrichment};
    use crate::reference::williams_closed_form;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn steel() -> Material<f64> {
        Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap()
    }

    fn tip_model(tip: C<f64>, angle: f64, k1: f64, k2: f64) -> PotentialModel<f64> {
        PotentialModel {
            phi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
            psi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
            enrichments: vec![TipEnrichment::from_sifs(tip, angle, k1, k2)],
            subdomain: 0,
            scaling: NetScaling::unit(),
        }
    }

    #[test]
    fn auxiliary_matches_closed_form() {
        let m = steel();
        for &(mode, k1, k2) in &[(Mode::I, 1.0, 0.0), (Mode::II, 0.0, 1.0)] {
            for k in 0..24 {
                let th = -PI + (k as f64 + 0.5) * PI / 12.0;
                let r = 0.37;
                let a = auxiliary_fields(mode, r, th, &m).unwrap();
                let b = williams_closed_form(k1, k2, r, th, &m).unwrap();
                assert!((a.stress[0][0] - b.sxx).abs() < 1e-12);
                assert!((a.stress[1][1] - b.syy).abs() < 1e-12);
                assert!((a.stress[0][1] - b.sxy).abs() < 1e-12);
                let us = b.ux.abs().max(b.uy.abs());
                assert!((a.u[0] - b.ux).abs() < 1e-12 * us, "{mode:?} {th} ux {} {}", a.u[0], b.ux);
                assert!((a.u[1] - b.uy).abs() < 1e-12 * us, "{mode:?} {th} uy {} {}", a.u[1], b.uy);
            }
        }
    }

    #[test]
    fn auxiliary_fixtures() {
        let m = steel();
        let a = auxiliary_fields(Mode::I, 0.5, 0.0, &m).unwrap();
        let s = 1.0 / (PI).sqrt();
        assert!((a.stress[0][0] - s).abs() < 1e-14 && (a.stress[1][1] - s).abs() < 1e-14);
        assert_eq!(a.stress[0][1], 0.0);
        assert_eq!(auxiliary_fields(Mode::II, 0.5, 0.0, &m).unwrap().u[0], 0.0);
        assert!(auxiliary_fields(Mode::I, 0.0, 0.0, &m).is_err());
    }

    #[test]
    fn auxiliary_gradient_matches_differences() {
        let m = steel();
        let h = 1e-6;
        for mode in [Mode::I, Mode::II] {
            for &(x, y) in &[(0.3, 0.2), (-0.4, 0.1), (0.1, -0.5), (-0.2, -0.3)] {
                let at = |x: f64, y: f64| {
                    let z = C::new(x, y);
                    auxiliary_fields(mode, z.norm(), z.arg(), &m).unwrap().u
                };
                let (p, q) = (at(x + h, y), at(x - h, y));
                let a = auxiliary_fields(mode, (x * x + y * y).sqrt(), y.atan2(x), &m).unwrap();
                for i in 0..2 {
                    let fd = (p[i] - q[i]) / (2.0 * h);
                    assert!((fd - a.du_dx1[i]).abs() < 1e-7 * fd.abs().max(1e-5), "{mode:?} {i} fd {fd} got {}", a.du_dx1[i]);
                }
            }
        }
    }

    #[test]
    fn exact_field_oracle() {
        let m = steel();
        let (k1, k2) = (2.0, 1.0);
        let tip = C::new(0.5, -0.25);
        let angle = 0.3;
        let model = tip_model(tip, angle, k1, k2);
        let field = |z: C<f64>| evaluate_fields(&model, &m, z);
        let a = 1.0;
        let mut ks = Vec::new();
        for ratio in [0.2, 0.4, 0.8] {
            let e = extract_sifs(&field, &m, tip, angle, ratio * a, 256, ratio).unwrap();
            assert!((e.k_i - k1).abs() / k1 < 1e-3, "{}", e.k_i);
            assert!((e.k_ii - k2).abs() / k2 < 1e-3, "{}", e.k_ii);
            let jk = e.energy_release_rate(&m);
            assert!((e.j.unwrap() - jk).abs() / jk < 1e-2);
            ks.push((e.k_i, e.k_ii));
        }
        let spread = |v: Vec<f64>| {
            let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
            (hi - lo) / hi.abs()
        };
        assert!(spread(ks.iter().map(|k| k.0).collect()) < 5e-3);
        assert!(spread(ks.iter().map(|k| k.1).collect()) < 5e-3);
    }

    #[test]
    fn zero_field_gives_zero() {
        let m = steel();
        let field = |_: C<f64>| Ok(FieldSample::zero());
        let i = interaction_integral(&field, &m, C::new(0.0, 0.0), 0.0, 1.0, 64, Mode::I).unwrap();
        assert_eq!(i, 0.0);
        let no_grad = |_: C<f64>| {
            let mut f = FieldSample::zero();
            f.grad_u = None;
            Ok(f)
        };
        assert!(interaction_integral(&no_grad, &m, C::new(0.0, 0.0), 0.0, 1.0, 64, Mode::I).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn frame_equivariance(alpha in -PI..PI, k1 in 0.5f64..3.0, k2 in -2.0f64..2.0) {
            let m = steel();
            let base = 0.2;
            let rot = C::from_polar(1.0, alpha);
            let tip = C::new(0.4, 0.1);
            let m0 = tip_model(tip, base, k1, k2);
            let m1 = tip_model(tip * rot, base + alpha, k1, k2);
            let f0 = |z: C<f64>| evaluate_fields(&m0, &m, z);
            let f1 = |z: C<f64>| evaluate_fields(&m1, &m, z);
            let a = extract_sifs(&f0, &m, tip, base, 0.5, 256, 0.5).unwrap();
            let b = extract_sifs(&f1, &m, tip * rot, base + alpha, 0.5, 256, 0.5).unwrap();
            let scale = k1.abs().max(k2.abs());
            prop_assert!((a.k_i - b.k_i).abs() < 5e-3 * scale);
            prop_assert!((a.k_ii - b.k_ii).abs() < 5e-3 * scale);
        }
    }
}
