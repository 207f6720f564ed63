//! SIF extraction on exact near-tip fields built from enrichment-only models.

use kminn::fracture::{extract_sifs, j_integral, kink_angle, Criterion};
use kminn::holonet::HoloNetwork;
use kminn::km_fields::{evaluate_fields, Material, NetScaling, PotentialModel, Regime, TipEnrichment};
use kminn::C;
use proptest::prelude::*;

fn tip_model(tip: C<f64>, angle: f64, k1: f64, k2: f64) -> PotentialModel<f64> {
    PotentialModel {
        phi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
        psi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
        enrichments: vec![TipEnrichment::from_sifs(tip, angle, k1, k2)],
        subdomain: 0,
        scaling: NetScaling::unit(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extraction_recovers_prescribed_sifs(
        k1 in -3.0f64..3.0,
        k2 in -3.0f64..3.0,
        x in -2.0f64..2.0,
        y in -2.0f64..2.0,
        angle in -3.0f64..3.0,
        r in 0.05f64..2.0,
        nu in 0.0f64..0.45,
        stress in any::<bool>(),
    ) {
        prop_assume!(k1.abs() + k2.abs() > 1e-2);
        let regime = if stress { Regime::PlaneStress } else { Regime::PlaneStrain };
        let m = Material::new(1000.0, nu, regime).unwrap();
        let tip = C::new(x, y);
        let model = tip_model(tip, angle, k1, k2);
        let field = |z: C<f64>| evaluate_fields(&model, &m, z);
        let s = extract_sifs(&field, &m, tip, angle, r, 256, 0.5).unwrap();
        let scale = k1.abs().max(k2.abs());
        prop_assert!((s.k_i - k1).abs() < 1e-6 * scale, "{} vs {}", s.k_i, k1);
        prop_assert!((s.k_ii - k2).abs() < 1e-6 * scale, "{} vs {}", s.k_ii, k2);
        let j = j_integral(&field, tip, angle, r, 256).unwrap();
        let g = (k1 * k1 + k2 * k2) / m.effective_modulus();
        prop_assert!((j - g).abs() < 1e-3 * g);
    }

    #[test]
    fn kink_follows_the_sign_of_mode_two(k1 in 0.1f64..3.0, k2 in 0.01f64..3.0) {
        let m = Material::new(1000.0, 0.3, Regime::PlaneStrain).unwrap();
        for c in Criterion::ALL {
            prop_assert!(kink_angle(c, k1, k2, &m).unwrap() < 0.0);
            prop_assert!(kink_angle(c, k1, -k2, &m).unwrap() > 0.0);
        }
    }
}

#[test]
fn t_stress_and_rigid_motion_are_ignored() {
    // a uniform stress parallel to the crack keeps the faces traction free,
    // so adding it (plus a rigid motion) must leave the SIFs unchanged
    let m = Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap();
    let (tip, angle) = (C::new(0.7, -0.4), 0.6);
    let b = tip_model(tip, angle, 0.8, -0.2);
    let (t, omega) = (0.35, 2e-4);
    let nu = m.poisson;
    let exx = (1.0 - nu * nu) / m.young_modulus * t;
    let eyy = -nu * (1.0 + nu) / m.young_modulus * t;
    let (s, c) = angle.sin_cos();
    let field = |z: C<f64>| {
        let f = evaluate_fields(&b, &m, z)?;
        let w = (z - tip) * C::from_polar(1.0, -angle);
        // uniform field in the tip frame, rotated back to global axes
        let ul = C::new(exx * w.re - omega * w.im + 1e-3, eyy * w.im + omega * w.re);
        let u = ul * C::from_polar(1.0, angle);
        let gl = [[exx, -omega], [omega, eyy]];
        let r = [[c, -s], [s, c]];
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        g[i][j] += r[i][k] * gl[k][l] * r[j][l];
                    }
                }
            }
        }
        let fg = f.grad_u.unwrap();
        Ok(kminn::km_fields::FieldSample {
            sxx: f.sxx + t * c * c,
            syy: f.syy + t * s * s,
            sxy: f.sxy + t * s * c,
            ux: f.ux + u.re,
            uy: f.uy + u.im,
            grad_u: Some([[fg[0][0] + g[0][0], fg[0][1] + g[0][1]], [fg[1][0] + g[1][0], fg[1][1] + g[1][1]]]),
        })
    };
    // T times a half-angle auxiliary term is not periodic in theta, so the
    // midpoint rule drops to second order here instead of being exact
    for r in [0.1, 0.5, 1.5] {
        let err = |n| {
            let e = extract_sifs(&field, &m, tip, angle, r, n, 0.5).unwrap();
            (e.k_i - 0.8).abs().max((e.k_ii + 0.2).abs())
        };
        let (coarse, fine) = (err(256), err(1024));
        assert!(coarse < 1e-3, "r {r}: {coarse}");
        assert!(fine < coarse / 12.0, "r {r}: {coarse} -> {fine}");
    }
}
