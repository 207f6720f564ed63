use super::*;
use crate::geometry::{decompose, sample_boundaries, CrackGeometry, Edge, EdgeLoads};
use crate::holonet::HoloNetwork;
use crate::km_fields::Regime;
use proptest::prelude::*;

fn steel() -> Material<f64> {
    Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap()
}

fn linear(w: C<f64>, b: C<f64>) -> HoloNetwork<f64> {
    HoloNetwork::from_layers(vec![(vec![w], vec![b])], &[1, 1]).unwrap()
}

fn c(re: f64, im: f64) -> C<f64> {
    C::new(re, im)
}

/// Traction-loaded rectangle `[-b, b] x [-h, h]` sampled symmetrically, with
/// a single subdomain owning every point.
fn uniform_plate(sigma: f64, n_per_edge: usize) -> CollocationSet<f64> {
    let (b, h) = (2.0, 3.0);
    let edges = [
        (Edge::Bottom, c(0.0, -1.0), c(-b, -h), c(b, -h), 2.0 * b),
        (Edge::Right, c(1.0, 0.0), c(b, -h), c(b, h), 2.0 * h),
        (Edge::Top, c(0.0, 1.0), c(b, h), c(-b, h), 2.0 * b),
        (Edge::Left, c(-1.0, 0.0), c(-b, h), c(-b, -h), 2.0 * h),
    ];
    let total = 4.0 * (b + h);
    let mut points = Vec::new();
    let mut segments = Vec::new();
    for (k, &(edge, n, a, e, len)) in edges.iter().enumerate() {
        for i in 0..n_per_edge {
            let t = (i as f64 + 0.5) / n_per_edge as f64;
            let traction = if n.im != 0.0 { [0.0, sigma * n.im] } else { [0.0, 0.0] };
            points.push(CollocationPoint {
                z: a + (e - a) * t,
                normal: n,
                kind: ConditionKind::Neumann,
                target: traction,
                segment: k,
                owners: [0, 0],
                outer: true,
            });
        }
        segments.push(SegmentInfo {
            kind: SegmentKind::Outer(edge),
            condition: ConditionKind::Neumann,
            length: len,
            weight: len / total,
            count: n_per_edge,
        });
    }
    CollocationSet { points, segments }
}

fn uniform_model(sigma: f64, value: f64) -> PotentialModel<f64> {
    PotentialModel {
        phi_net: linear(c(sigma / (4.0 * value), 0.0), c(0.0, 0.0)),
        psi_net: linear(c(sigma / (2.0 * value), 0.0), c(0.0, 0.0)),
        enrichments: vec![],
        subdomain: 0,
        scaling: NetScaling { length: 1.0, value },
    }
}

fn uniform_problem(sigma: f64, models: &[PotentialModel<f64>]) -> LossProblem<f64> {
    let colloc = uniform_plate(sigma, 8);
    let dom = DomainSpec::new(2.0, 3.0).unwrap();
    let scales = compute_reference_scales(&colloc, &steel(), &dom).unwrap();
    LossProblem::new(&colloc, models, scales, steel(), 1.0).unwrap()
}

#[test]
fn exact_solution_has_vanishing_loss() {
    let models = vec![uniform_model(5.0, 1.0)];
    let prob = uniform_problem(5.0, &models);
    let (r, _) = assemble_loss(&models, &prob, false).unwrap();
    assert!(r.total < 1e-20, "{}", r.total);
    assert!(r.gauge() < 1e-20);
}

#[test]
fn reference_scales_fixture() {
    let colloc = uniform_plate(2.0, 8);
    let dom = DomainSpec::new(2.0, 3.0).unwrap();
    let mat = steel();
    let s = compute_reference_scales(&colloc, &mat, &dom).unwrap();
    // half the Neumann points carry |t| = 2, the other half zero
    assert!((s.sigma_ref - 2.0 / 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(s.l_ref, 6.0);
    assert!((s.u_ref - s.sigma_ref * 6.0 / mat.effective_modulus()).abs() < 1e-20);
    assert_eq!(
        compute_reference_scales(&uniform_plate(0.0, 4), &mat, &dom),
        Err(Error::ZeroLoading)
    );
}

#[test]
fn report_reassembles_bitwise() {
    let mut models = vec![uniform_model(1.0, 1.0)];
    models[0].psi_net = linear(c(0.3, 0.1), c(0.01, -0.02));
    let prob = uniform_problem(1.0, &models);
    let (r, _) = assemble_loss(&models, &prob, false).unwrap();
    let mut sum = 0.0;
    for s in &r.segments {
        sum += s.weight * (s.l_u + s.l_t + s.l_i);
    }
    assert_eq!(sum.to_bits(), r.total.to_bits());
    assert_eq!(r.segments.len(), 5);
    assert!(r.segments[4].kind.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loss_is_invariant_to_load_scale(s in 1e-3f64..1e3, w in -1.0f64..1.0, bias in -1.0f64..1.0) {
        let perturb = |m: &mut PotentialModel<f64>| {
            m.psi_net = linear(c(0.5 + 0.2 * w, 0.1), c(bias, 0.0));
        };
        let mut m1 = vec![uniform_model(1.0, 1.0)];
        perturb(&mut m1[0]);
        let mut m2 = vec![uniform_model(s, s)];
        perturb(&mut m2[0]);
        let l1 = assemble_loss(&m1, &uniform_problem(1.0, &m1), false).unwrap().0.total;
        let l2 = assemble_loss(&m2, &uniform_problem(s, &m2), false).unwrap().0.total;
        prop_assert!((l1 - l2).abs() <= 1e-9 * l1.max(1e-300), "{} vs {}", l1, l2);
    }
}

fn cct(n_train: usize) -> (Decomposition<f64>, CollocationSet<f64>, CollocationSet<f64>) {
    let dom = DomainSpec::new(4.0, 6.0).unwrap();
    let crack = CrackGeometry::straight_center(c(0.0, 0.0), 1.0, 0.0);
    let dec = decompose(&dom, &crack).unwrap();
    let (tr, te) = sample_boundaries(&dec, &EdgeLoads::uniaxial_tension(1.0), n_train, n_train / 4, 7).unwrap();
    (dec, tr, te)
}

fn cct_setup(n_train: usize, hidden: Vec<usize>) -> (Vec<PotentialModel<f64>>, LossProblem<f64>, LossProblem<f64>) {
    let (dec, tr, te) = cct(n_train);
    let mat = steel();
    let scales = compute_reference_scales(&tr, &mat, &dec.domain).unwrap();
    let net = NetworkSpec {
        hidden,
        ..NetworkSpec::default()
    };
    let models = init_models(&dec, &tr, &net, &scales, 3).unwrap();
    let p = LossProblem::new(&tr, &models, scales, mat, 1.0).unwrap();
    let q = LossProblem::new(&te, &models, scales, mat, 1.0).unwrap();
    (models, p, q)
}

#[test]
fn gradient_matches_central_differences() {
    let (mut models, prob, _) = cct_setup(120, vec![6, 6]);
    let mut x = pack_params(&models);
    // move the amplitudes off zero so their adjoint is exercised off-origin
    let n = x.len();
    for (k, v) in x[n - 8..].iter_mut().enumerate() {
        *v = 0.3 * (k as f64 + 1.0).sin();
    }
    unpack_params(&mut models, &x).unwrap();
    let (_, g) = assemble_loss(&models, &prob, true).unwrap();
    let g = g.unwrap();
    let stride = (n / 20).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).take(16).collect();
    idx.extend(n - 4..n);
    for i in idx {
        // fourth-order stencil: the loss is O(1e3) here, so a small step
        // would drown in roundoff
        let h = 1e-3 * x[i].abs().max(1.0);
        let f = |d: f64| {
            let mut xs = x.clone();
            xs[i] += d;
            let mut m = models.clone();
            unpack_params(&mut m, &xs).unwrap();
            assemble_loss(&m, &prob, false).unwrap().0.total
        };
        let fd = (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
        let err = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-8);
        assert!(err < 1e-5, "param {i}: analytic {} fd {fd} rel {err}", g[i]);
    }
}

#[test]
fn pack_unpack_roundtrip() {
    let (mut models, _, _) = cct_setup(80, vec![4]);
    let x = pack_params(&models);
    assert_eq!(x.len(), num_params(&models));
    let orig = models.clone();
    unpack_params(&mut models, &x).unwrap();
    assert_eq!(models, orig);
    assert!(unpack_params(&mut models, &x[1..]).is_err());
}

#[test]
fn interface_loss_grows_with_mismatch() {
    let (dec, tr, _) = cct(160);
    let mat = steel();
    let scales = compute_reference_scales(&tr, &mat, &dec.domain).unwrap();
    let base = init_models(&dec, &tr, &NetworkSpec::default(), &scales, 1).unwrap();
    let prob = LossProblem::new(&tr, &base, scales, mat, 1.0).unwrap();
    let shifted = |t: f64| {
        let mut m = base.clone();
        // a constant added to psi in one subdomain shifts its displacement only
        let mut net = m[1].psi_net.clone();
        let last = net.layers_mut().last_mut().unwrap();
        last.bias_mut()[0] += c(t, 0.5 * t);
        m[1].psi_net = net;
        let r = assemble_loss(&m, &prob, false).unwrap().0;
        r.segments.iter().map(|s| s.l_i * s.weight).sum::<f64>()
    };
    let mut prev = shifted(0.0);
    for k in 1..6 {
        let cur = shifted(0.05 * k as f64);
        assert!(cur > prev, "step {k}: {cur} <= {prev}");
        prev = cur;
    }
}

#[test]
fn zero_budget_leaves_models_unchanged() {
    let (models, p, q) = cct_setup(80, vec![4]);
    let out = train_mixed(&models, &p, Some(&q), 0, 0, &TrainSchedule::default()).unwrap();
    assert_eq!(out.models, models);
    assert!(out.history.is_empty());
    assert_eq!(out.lbfgs_stop, None);
}

#[test]
fn short_training_reduces_loss() {
    let (models, p, q) = cct_setup(200, vec![6, 6]);
    let start = assemble_loss(&models, &p, false).unwrap().0.total;
    let sched = TrainSchedule {
        record_timing: false,
        ..TrainSchedule::default()
    };
    let out = train_mixed(&models, &p, Some(&q), 40, 40, &sched).unwrap();
    assert!(out.final_report.total < 0.5 * start, "{} vs {start}", out.final_report.total);
    assert!(out.history.iter().all(|h| h.wall_ms.is_none()));
    assert!(out.history[0].test_loss.is_some());
    assert!(out.history[1].test_loss.is_none());
}

#[test]
fn warm_start_moves_enrichments() {
    let (dec, tr, _) = cct(80);
    let mat = steel();
    let scales = compute_reference_scales(&tr, &mat, &dec.domain).unwrap();
    let models = init_models(&dec, &tr, &NetworkSpec::default(), &scales, 1).unwrap();
    let crack = dec.crack.extend(&dec.domain, 1, 0.2, 0.1).unwrap();
    let dec2 = decompose(&dec.domain, &crack).unwrap();
    let ks = vec![c(1.0, -0.2), c(2.0, 0.3)];
    let warm = warm_start(&models, &ks, &dec2).unwrap();
    for (sub, m) in warm.iter().enumerate() {
        assert_eq!(m.phi_net, models[sub].phi_net);
        for (e, t) in m.enrichments.iter().zip(&dec2.tips) {
            assert_eq!(e.tip, t.position);
            assert_eq!(e.cut, t.cuts[sub]);
        }
        assert_eq!(m.enrichments[1].k, ks[1]);
    }
    assert!(warm_start(&models, &ks[..1], &dec2).is_err());
}

#[test]
fn schedule_validation() {
    let mut s = TrainSchedule::default();
    assert!(s.validate().is_ok());
    assert_eq!(s.counts(true), (500, 500));
    s.adam_lr = 0.0;
    assert!(s.validate().is_err());
}
