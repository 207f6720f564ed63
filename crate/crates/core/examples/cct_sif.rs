//! Center-cracked plate under tension: train once, then print the SIFs over
//! a range of contour radii next to the handbook value.
//!
//! `cargo run --release --example cct_sif -- [adam_epochs] [lbfgs_iters]`

use kminn::fracture::tip_sifs;
use kminn::geometry::{decompose, sample_boundaries, CrackGeometry, DomainSpec, EdgeLoads};
use kminn::km_fields::{Material, Regime};
use kminn::reference::tada_sif_tension;
use kminn::training::{compute_reference_scales, init_models, train_mixed, LossProblem, NetworkSpec, TrainSchedule};
use kminn::C;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>());
    let adam = args.next().transpose()?.unwrap_or(2500);
    let lbfgs = args.next().transpose()?.unwrap_or(2500);

    let dom = DomainSpec::new(4.0, 6.0)?;
    let crack = CrackGeometry::straight_center(C::new(0.0, 0.0), 1.5, 0.0);
    let dec = decompose(&dom, &crack)?;
    let mat = Material::new(210_000.0, 0.3, Regime::PlaneStrain)?;
    let (train, test) = sample_boundaries(&dec, &EdgeLoads::uniaxial_tension(1.0), 1000, 100, 0)?;
    let scales = compute_reference_scales(&train, &mat, &dom)?;
    let models = init_models(&dec, &train, &NetworkSpec::default(), &scales, 0)?;
    let p = LossProblem::new(&train, &models, scales, mat, 1.0)?;
    let q = LossProblem::new(&test, &models, scales, mat, 1.0)?;

    let out = train_mixed(&models, &p, Some(&q), adam, lbfgs, &TrainSchedule::default())?;
    println!("final loss {:.3e} after {} evaluations", out.final_report.total, out.evaluations);
    println!("reference K_I = {:.4}", tada_sif_tension(1.0, 1.5, 4.0)?);
    for r in [0.2, 0.3, 0.4, 0.5, 0.6, 0.8] {
        let s = tip_sifs(&out.models, &dec, &mat, r, 256)?;
        let ks: Vec<String> = s.iter().map(|e| format!("({:.4}, {:.4})", e.k_i, e.k_ii)).collect();
        println!("r/a {r}: {}", ks.join("  "));
    }
    Ok(())
}
