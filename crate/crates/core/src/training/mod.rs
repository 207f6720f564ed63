//! Normalized boundary loss, mixed Adam/L-BFGS training and warm starts.
//!
//! Trainable parameters are packed per subdomain as
//! `[phi net, psi net, (Re K, Im K) per tip]`, with each `K` divided by the
//! model's amplitude scale `value / sqrt(length)` so that all entries are of
//! order one.

pub mod optim;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CollocationPoint, CollocationSet, ConditionKind, Decomposition, DomainSpec, SegmentInfo, SegmentKind};
use crate::holonet::{init_network, InitConfig, JetAdjoint};
use crate::km_fields::{Material, NetScaling, Potentials, PotentialModel, TipEnrichment, WilliamsBasis};
use crate::scalar::{cx, Scalar, C};

pub use optim::{Adam, Lbfgs, LbfgsConfig, LbfgsStop};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScales<T> {
    pub sigma_ref: T,
    pub l_ref: T,
    pub u_ref: T,
}

/// `sigma_ref` is the RMS traction magnitude over all Neumann points (crack
/// faces included), `L_ref = max(2b, 2h)` and `u_ref = sigma_ref L_ref / E'`.
pub fn compute_reference_scales<T: Scalar>(
    colloc: &CollocationSet<T>,
    mat: &Material<T>,
    dom: &DomainSpec<T>,
) -> Result<ReferenceScales<T>> {
    let mut sum = T::zero();
    let mut n = 0usize;
    for p in colloc.points.iter().filter(|p| p.kind == ConditionKind::Neumann) {
        sum = sum + p.target[0] * p.target[0] + p.target[1] * p.target[1];
        n += 1;
    }
    if n == 0 || sum.is_zero() {
        return Err(Error::ZeroLoading);
    }
    let sigma_ref = (sum / T::from_usize(n).unwrap()).sqrt();
    let l_ref = T::lit(2.0) * dom.half_width.max(dom.half_height);
    Ok(ReferenceScales {
        sigma_ref,
        l_ref,
        u_ref: sigma_ref * l_ref / mat.effective_modulus(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub adam_epochs: usize,
    pub lbfgs_iters: usize,
    pub adam_lr: f64,
    pub tl_adam_epochs: usize,
    pub tl_lbfgs_iters: usize,
    pub clip_norm: f64,
    pub lbfgs_history: usize,
    pub seed: u64,
    /// Test loss cadence in epochs.
    pub test_every: usize,
    pub record_timing: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            adam_epochs: 2500,
            lbfgs_iters: 2500,
            adam_lr: 1e-2,
            tl_adam_epochs: 500,
            tl_lbfgs_iters: 500,
            clip_norm: 1.0,
            lbfgs_history: 20,
            seed: 0,
            test_every: 10,
            record_timing: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam_lr > 0.0) || !self.adam_lr.is_finite() {
            return Err(Error::InvalidInput(format!("adam_lr must be positive, got {}", self.adam_lr)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidInput(format!("clip_norm must be positive, got {}", self.clip_norm)));
        }
        if self.lbfgs_history == 0 {
            return Err(Error::InvalidInput("lbfgs_history must be at least 1".into()));
        }
        if self.test_every == 0 {
            return Err(Error::InvalidInput("test_every must be at least 1".into()));
        }
        Ok(())
    }

    /// `(adam, lbfgs)` counts for a cold start or a warm-started step.
    pub fn counts(&self, warm: bool) -> (usize, usize) {
        if warm {
            (self.tl_adam_epochs, self.tl_lbfgs_iters)
        } else {
            (self.adam_epochs, self.lbfgs_iters)
        }
    }
}

/// Components of one loss segment. The gauge penalty is reported as a final
/// pseudo-segment with `kind = None`, weight 1 and its value in `l_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLoss<T> {
    pub kind: Option<SegmentKind>,
    pub weight: T,
    pub l_u: T,
    pub l_t: T,
    pub l_i: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport<T> {
    pub total: T,
    pub segments: Vec<SegmentLoss<T>>,
    pub epoch: usize,
    pub wall_ms: Option<f64>,
}

impl<T: Scalar> LossReport<T> {
    /// Weighted sum of the components, in assembly order.
    pub fn reassemble(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.weight * (s.l_u + s.l_t + s.l_i))
    }

    pub fn gauge(&self) -> T {
        self.segments.last().filter(|s| s.kind.is_none()).map_or(T::zero(), |s| s.l_u)
    }
}

#[derive(Debug, Clone)]
struct EvalPoint<T> {
    z: C<T>,
    zeta: C<T>,
    basis: Vec<WilliamsBasis<T>>,
}

#[derive(Debug, Clone, Copy)]
struct GaugeTerm<T> {
    sub: usize,
    eval: usize,
    x: T,
    y: T,
}

/// Collocation data prepared for repeated loss evaluation: per-subdomain
/// evaluation points with their enrichment bases precomputed.
#[derive(Debug, Clone)]
pub struct LossProblem<T> {
    points: Vec<CollocationPoint<T>>,
    segments: Vec<SegmentInfo<T>>,
    evals: Vec<Vec<EvalPoint<T>>>,
    slots: Vec<[usize; 2]>,
    gauge: Vec<GaugeTerm<T>>,
    gauge_r2: T,
    pub gauge_weight: T,
    pub scales: ReferenceScales<T>,
    pub material: Material<T>,
    geometry: Vec<Vec<(C<T>, T, T)>>,
}

fn enrichment_geometry<T: Scalar>(m: &PotentialModel<T>) -> Vec<(C<T>, T, T)> {
    m.enrichments.iter().map(|e| (e.tip, e.angle, e.cut)).collect()
}

impl<T: Scalar> LossProblem<T> {
    pub fn new(
        colloc: &CollocationSet<T>,
        models: &[PotentialModel<T>],
        scales: ReferenceScales<T>,
        material: Material<T>,
        gauge_weight: T,
    ) -> Result<Self> {
        if colloc.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut evals: Vec<Vec<EvalPoint<T>>> = vec![Vec::new(); models.len()];
        let mut slots = Vec::with_capacity(colloc.len());
        for p in &colloc.points {
            let mut slot = [usize::MAX; 2];
            for (k, &owner) in p.owner_ids().iter().enumerate() {
                let m = models.get(owner).ok_or_else(|| {
                    Error::ShapeMismatch {
                        expected: owner + 1,
                        got: models.len(),
                    }
                })?;
                let basis = m.enrichments.iter().map(|e| e.basis(p.z)).collect::<Result<Vec<_>>>()?;
                slot[k] = evals[owner].len();
                evals[owner].push(EvalPoint {
                    z: p.z,
                    zeta: m.scaling.input(p.z),
                    basis,
                });
            }
            slots.push(slot);
        }

        let outer: Vec<(usize, usize, C<T>)> = colloc
            .points
            .iter()
            .zip(&slots)
            .filter(|(p, _)| p.outer)
            .map(|(p, s)| (p.owners[0], s[0], p.z))
            .collect();
        let mut gauge = Vec::with_capacity(outer.len());
        let mut gauge_r2 = T::one();
        if !outer.is_empty() {
            let n = T::from_usize(outer.len()).unwrap();
            let centroid = outer.iter().fold(C::new(T::zero(), T::zero()), |a, o| a + o.2) / n;
            let mut r2 = T::zero();
            for &(sub, eval, z) in &outer {
                let d = (z - centroid) / scales.l_ref;
                r2 = r2 + d.norm_sqr();
                gauge.push(GaugeTerm { sub, eval, x: d.re, y: d.im });
            }
            gauge_r2 = r2 / n;
        }

        Ok(Self {
            points: colloc.points.clone(),
            segments: colloc.segments.clone(),
            evals,
            slots,
            gauge,
            gauge_r2,
            gauge_weight,
            scales,
            material,
            geometry: models.iter().map(enrichment_geometry).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_models(&self, models: &[PotentialModel<T>]) -> Result<()> {
        if models.len() != self.evals.len() {
            return Err(Error::ShapeMismatch {
                expected: self.evals.len(),
                got: models.len(),
            });
        }
        for (m, g) in models.iter().zip(&self.geometry) {
            if enrichment_geometry(m) != *g {
                return Err(Error::ArchitectureMismatch(
                    "enrichment geometry differs from the one the loss was prepared for".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Normalized `[sxx, syy, sxy, ux, uy]`.
type Fields<T> = [T; 5];

fn fields_of<T: Scalar>(p: &Potentials<T>, z: C<T>, mat: &Material<T>, s: &ReferenceScales<T>) -> Fields<T> {
    let two = T::lit(2.0);
    let a = z.conj() * p.phi2 + p.psi1;
    let base = p.phi1.re * two;
    let d = (p.phi * mat.kappa() - z * p.phi1.conj() - p.psi.conj()) / (two * mat.mu());
    let (is, iu) = (T::one() / s.sigma_ref, T::one() / s.u_ref);
    [(base - a.re) * is, (base + a.re) * is, a.im * is, d.re * iu, d.im * iu]
}

/// Potential adjoints from adjoints of the normalized fields.
fn potential_adjoint<T: Scalar>(g: &Fields<T>, z: C<T>, mat: &Material<T>, s: &ReferenceScales<T>) -> Potentials<T> {
    let two = T::lit(2.0);
    let (gxx, gyy, gxy) = (g[0] / s.sigma_ref, g[1] / s.sigma_ref, g[2] / s.sigma_ref);
    let gd = cx(g[3], g[4]) / s.u_ref;
    let i = cx(T::zero(), T::one());
    let mu2 = two * mat.mu();
    Potentials {
        phi: gd * (mat.kappa() / mu2),
        phi1: cx(two * (gxx + gyy), T::zero()) - gd.conj() * z / mu2,
        phi2: z * (gyy - gxx) + i * z * gxy,
        psi: -gd.conj() / mu2,
        psi1: cx(gyy - gxx, gxy),
    }
}

fn traction<T: Scalar>(f: &Fields<T>, n: C<T>) -> [T; 2] {
    [f[0] * n.re + f[2] * n.im, f[2] * n.re + f[1] * n.im]
}

/// Add `dL/dt` to the stress adjoint at normal `n`.
fn traction_adjoint<T: Scalar>(g: &mut Fields<T>, dt: [T; 2], n: C<T>) {
    g[0] = g[0] + dt[0] * n.re;
    g[2] = g[2] + dt[0] * n.im + dt[1] * n.re;
    g[1] = g[1] + dt[1] * n.im;
}

fn amplitude_scale<T: Scalar>(s: &NetScaling<T>) -> T {
    s.value / s.length.sqrt()
}

pub fn num_params<T: Scalar>(models: &[PotentialModel<T>]) -> usize {
    models
        .iter()
        .map(|m| m.phi_net.num_real_params() + m.psi_net.num_real_params() + 2 * m.enrichments.len())
        .sum()
}

pub fn pack_params<T: Scalar>(models: &[PotentialModel<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(num_params(models));
    for m in models {
        out.extend(m.phi_net.params());
        out.extend(m.psi_net.params());
        let ks = amplitude_scale(&m.scaling);
        for e in &m.enrichments {
            out.push(e.k.re / ks);
            out.push(e.k.im / ks);
        }
    }
    out
}

pub fn unpack_params<T: Scalar>(models: &mut [PotentialModel<T>], flat: &[T]) -> Result<()> {
    let n = num_params(models);
    if flat.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: flat.len(),
        });
    }
    let mut o = 0;
    for m in models.iter_mut() {
        let (a, b) = (m.phi_net.num_real_params(), m.psi_net.num_real_params());
        m.phi_net.set_params(&flat[o..o + a])?;
        o += a;
        m.psi_net.set_params(&flat[o..o + b])?;
        o += b;
        let ks = amplitude_scale(&m.scaling);
        for e in m.enrichments.iter_mut() {
            if !(flat[o].is_finite() && flat[o + 1].is_finite()) {
                return Err(Error::NonFinite("enrichment amplitude".into()));
            }
            e.k = cx(flat[o] * ks, flat[o + 1] * ks);
            o += 2;
        }
    }
    Ok(())
}

/// Loss and, when requested, its gradient in [`pack_params`] order.
pub fn assemble_loss<T: Scalar>(
    models: &[PotentialModel<T>],
    prob: &LossProblem<T>,
    want_grad: bool,
) -> Result<(LossReport<T>, Option<Vec<T>>)> {
    prob.check_models(models)?;
    let mat = &prob.material;
    let sc = &prob.scales;

    // forward
    let mut fields: Vec<Vec<Fields<T>>> = Vec::with_capacity(models.len());
    for (m, evals) in models.iter().zip(&prob.evals) {
        let mut out = Vec::with_capacity(evals.len());
        for e in evals {
            let phi = m.phi_net.forward_with_z_derivatives(e.zeta)?;
            let psi = m.psi_net.forward_with_z_derivatives(e.zeta)?;
            let mut p = m.scaling.potentials(&phi, &psi);
            for (b, en) in e.basis.iter().zip(&m.enrichments) {
                p += b.apply(en.k);
            }
            let f = fields_of(&p, e.z, mat, sc);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteField {
                    x: e.z.re.to_f64_lossy(),
                    y: e.z.im.to_f64_lossy(),
                });
            }
            out.push(f);
        }
        fields.push(out);
    }

    // residuals
    let zero = T::zero();
    let two = T::lit(2.0);
    let mut grads: Vec<Vec<Fields<T>>> = fields.iter().map(|f| vec![[zero; 5]; f.len()]).collect();
    let mut seg_loss: Vec<SegmentLoss<T>> = prob
        .segments
        .iter()
        .map(|s| SegmentLoss {
            kind: Some(s.kind),
            weight: s.weight,
            l_u: zero,
            l_t: zero,
            l_i: zero,
        })
        .collect();
    for (p, slot) in prob.points.iter().zip(&prob.slots) {
        let info = &prob.segments[p.segment];
        let inv_n = T::one() / T::from_usize(info.count).unwrap();
        let c = two * info.weight * inv_n;
        let sl = &mut seg_loss[p.segment];
        let o = p.owners[0];
        match p.kind {
            ConditionKind::Neumann => {
                let t = traction(&fields[o][slot[0]], p.normal);
                let r = [t[0] - p.target[0] / sc.sigma_ref, t[1] - p.target[1] / sc.sigma_ref];
                sl.l_t = sl.l_t + (r[0] * r[0] + r[1] * r[1]) * inv_n;
                traction_adjoint(&mut grads[o][slot[0]], [c * r[0], c * r[1]], p.normal);
            }
            ConditionKind::Dirichlet => {
                let f = &fields[o][slot[0]];
                let r = [f[3] - p.target[0] / sc.u_ref, f[4] - p.target[1] / sc.u_ref];
                sl.l_u = sl.l_u + (r[0] * r[0] + r[1] * r[1]) * inv_n;
                let g = &mut grads[o][slot[0]];
                g[3] = g[3] + c * r[0];
                g[4] = g[4] + c * r[1];
            }
            ConditionKind::Interface => {
                let o2 = p.owners[1];
                let (fa, fb) = (&fields[o][slot[0]], &fields[o2][slot[1]]);
                let ju = [fa[3] - fb[3], fa[4] - fb[4]];
                let (ta, tb) = (traction(fa, p.normal), traction(fb, p.normal));
                let jt = [ta[0] - tb[0], ta[1] - tb[1]];
                sl.l_i = sl.l_i + (ju[0] * ju[0] + ju[1] * ju[1] + jt[0] * jt[0] + jt[1] * jt[1]) * inv_n;
                let ga = &mut grads[o][slot[0]];
                ga[3] = ga[3] + c * ju[0];
                ga[4] = ga[4] + c * ju[1];
                traction_adjoint(ga, [c * jt[0], c * jt[1]], p.normal);
                let gb = &mut grads[o2][slot[1]];
                gb[3] = gb[3] - c * ju[0];
                gb[4] = gb[4] - c * ju[1];
                traction_adjoint(gb, [-c * jt[0], -c * jt[1]], p.normal);
            }
        }
    }

    // rigid-body gauge over the outer boundary of all subdomains
    let mut gauge = zero;
    if !prob.gauge.is_empty() && prob.gauge_weight > zero {
        let n = T::from_usize(prob.gauge.len()).unwrap();
        let (mut mx, mut my, mut rot) = (zero, zero, zero);
        for g in &prob.gauge {
            let f = &fields[g.sub][g.eval];
            mx = mx + f[3];
            my = my + f[4];
            rot = rot + g.x * f[4] - g.y * f[3];
        }
        mx = mx / n;
        my = my / n;
        let omega = rot / n / prob.gauge_r2;
        gauge = mx * mx + my * my + omega * omega;
        let w = prob.gauge_weight;
        for g in &prob.gauge {
            let gr = &mut grads[g.sub][g.eval];
            gr[3] = gr[3] + w * two * (mx - omega * g.y / prob.gauge_r2) / n;
            gr[4] = gr[4] + w * two * (my + omega * g.x / prob.gauge_r2) / n;
        }
    }
    seg_loss.push(SegmentLoss {
        kind: None,
        weight: prob.gauge_weight,
        l_u: gauge,
        l_t: zero,
        l_i: zero,
    });

    let mut report = LossReport {
        total: zero,
        segments: seg_loss,
        epoch: 0,
        wall_ms: None,
    };
    report.total = report.reassemble();
    if !report.total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    if !want_grad {
        return Ok((report, None));
    }

    // backward
    let mut grad = vec![zero; num_params(models)];
    let mut off = 0;
    for ((m, evals), g) in models.iter().zip(&prob.evals).zip(&grads) {
        let v = m.scaling.value;
        let vl = v / m.scaling.length;
        let vl2 = vl / m.scaling.length;
        let mut phi_batch = Vec::with_capacity(evals.len());
        let mut psi_batch = Vec::with_capacity(evals.len());
        let mut kadj = vec![C::new(zero, zero); m.enrichments.len()];
        for (e, ge) in evals.iter().zip(g) {
            let pa = potential_adjoint(ge, e.z, mat, sc);
            phi_batch.push((
                e.zeta,
                JetAdjoint {
                    value: pa.phi * v,
                    d1: pa.phi1 * vl,
                    d2: pa.phi2 * vl2,
                },
            ));
            psi_batch.push((
                e.zeta,
                JetAdjoint {
                    value: pa.psi * v,
                    d1: pa.psi1 * vl,
                    d2: C::new(zero, zero),
                },
            ));
            for (ka, b) in kadj.iter_mut().zip(&e.basis) {
                *ka = *ka + b.k_adjoint(&pa);
            }
        }
        let (a, b) = (m.phi_net.num_real_params(), m.psi_net.num_real_params());
        m.phi_net.accumulate_gradients(&phi_batch, &mut grad[off..off + a])?;
        off += a;
        m.psi_net.accumulate_gradients(&psi_batch, &mut grad[off..off + b])?;
        off += b;
        let ks = amplitude_scale(&m.scaling);
        for ka in kadj {
            grad[off] = ka.re * ks;
            grad[off + 1] = ka.im * ks;
            off += 2;
        }
    }
    Ok((report, Some(grad)))
}

/// Network architecture and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Hidden layer widths; input and output widths are 1.
    pub hidden: Vec<usize>,
    pub beta: f64,
    /// Pre-stabilized layers; defaults to all hidden layers but the last.
    pub prestab_layers: Option<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10, 10],
            beta: 1.0,
            prestab_layers: None,
        }
    }
}

impl NetworkSpec {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![1];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

fn derived_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1))
}

/// Enrichments for subdomain `sub` of a decomposition, with amplitudes `ks`.
pub fn enrichments_for<T: Scalar>(dec: &Decomposition<T>, sub: usize, ks: &[C<T>]) -> Vec<TipEnrichment<T>> {
    let eps = dec.crack.exclusion_radius();
    dec.tips
        .iter()
        .zip(ks)
        .map(|(t, &k)| TipEnrichment::new(t.position, t.angle, k).with_cut(t.cuts[sub]).with_exclusion(eps))
        .collect()
}

/// Fresh models for both subdomains: networks initialized on the scaled
/// collocation points each subdomain owns, amplitudes zero.
pub fn init_models<T: Scalar>(
    dec: &Decomposition<T>,
    colloc: &CollocationSet<T>,
    net: &NetworkSpec,
    scales: &ReferenceScales<T>,
    seed: u64,
) -> Result<Vec<PotentialModel<T>>> {
    let widths = net.widths();
    let length = dec.domain.half_width.max(dec.domain.half_height);
    let scaling = NetScaling {
        length,
        value: scales.sigma_ref * length,
    };
    let zero_k = vec![C::new(T::zero(), T::zero()); dec.tips.len()];
    let mut out = Vec::with_capacity(2);
    for sub in 0..2 {
        let probe: Vec<C<T>> = colloc
            .points
            .iter()
            .filter(|p| p.owner_ids().contains(&sub))
            .map(|p| scaling.input(p.z))
            .collect();
        let cfg = |k: u64| {
            let mut c = InitConfig::with_defaults(&widths, probe.clone(), derived_seed(seed, k));
            c.beta = T::lit(net.beta);
            if let Some(m) = net.prestab_layers {
                c.gaussian_prestab_layers = m;
            }
            c
        };
        let phi_net = init_network(&widths, &cfg(2 * sub as u64))?;
        let psi_net = init_network(&widths, &cfg(2 * sub as u64 + 1))?;
        out.push(PotentialModel {
            phi_net,
            psi_net,
            enrichments: enrichments_for(dec, sub, &zero_k),
            subdomain: sub,
            scaling,
        });
    }
    Ok(out)
}

/// Copy all network weights and seed every tip amplitude with `mapped_k`
/// (one per tip of the new decomposition), moving enrichments to the new
/// tips.
pub fn warm_start<T: Scalar>(
    prev: &[PotentialModel<T>],
    mapped_k: &[C<T>],
    dec: &Decomposition<T>,
) -> Result<Vec<PotentialModel<T>>> {
    if mapped_k.len() != dec.tips.len() {
        return Err(Error::ArchitectureMismatch(format!(
            "{} seeded amplitudes for {} tips",
            mapped_k.len(),
            dec.tips.len()
        )));
    }
    if prev.len() != 2 {
        return Err(Error::ArchitectureMismatch(format!("expected 2 subdomain models, got {}", prev.len())));
    }
    prev.iter()
        .enumerate()
        .map(|(sub, m)| {
            if m.enrichments.len() != dec.tips.len() {
                return Err(Error::ArchitectureMismatch(format!(
                    "model has {} enrichments, geometry has {} tips",
                    m.enrichments.len(),
                    dec.tips.len()
                )));
            }
            Ok(PotentialModel {
                phi_net: m.phi_net.clone(),
                psi_net: m.psi_net.clone(),
                enrichments: enrichments_for(dec, sub, mapped_k),
                subdomain: sub,
                scaling: m.scaling,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Adam,
    Lbfgs,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Adam => "adam",
            Stage::Lbfgs => "lbfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub models: Vec<PotentialModel<T>>,
    pub history: Vec<EpochRecord>,
    pub final_report: LossReport<T>,
    pub lbfgs_stop: Option<LbfgsStop>,
    pub evaluations: usize,
}

/// `adam_epochs` full-batch Adam steps followed by up to `lbfgs_iters` L-BFGS
/// iterations. The test set is only observed, never used for control flow.
pub fn train_mixed<T: Scalar>(
    models: &[PotentialModel<T>],
    train: &LossProblem<T>,
    test: Option<&LossProblem<T>>,
    adam_epochs: usize,
    lbfgs_iters: usize,
    sched: &TrainSchedule,
) -> Result<TrainOutcome<T>> {
    sched.validate()?;
    let start = Instant::now();
    let clock = |rec: bool| rec.then(|| start.elapsed().as_secs_f64() * 1e3);
    let mut work = models.to_vec();
    let mut x = pack_params(&work);
    let mut history = Vec::with_capacity(adam_epochs + lbfgs_iters);
    let mut evaluations = 0usize;

    let objective = |x: &[T], work: &mut Vec<PotentialModel<T>>| -> Result<(T, Vec<T>)> {
        unpack_params(work, x)?;
        let (r, g) = assemble_loss(work, train, true)?;
        Ok((r.total, g.unwrap_or_default()))
    };
    let test_loss = |work: &[PotentialModel<T>], epoch: usize, last: bool| -> Result<Option<f64>> {
        match test {
            Some(tp) if epoch.is_multiple_of(sched.test_every) || last => {
                Ok(Some(assemble_loss(work, tp, false)?.0.total.to_f64_lossy()))
            }
            _ => Ok(None),
        }
    };

    let mut adam = Adam::new(x.len(), T::lit(sched.adam_lr), Some(T::lit(sched.clip_norm)));
    for epoch in 0..adam_epochs {
        let (f, g) = objective(&x, &mut work).map_err(|e| Error::Divergence(format!("adam epoch {epoch}: {e}")))?;
        evaluations += 1;
        let tl = test_loss(&work, epoch, false)?;
        history.push(EpochRecord {
            stage: Stage::Adam,
            epoch,
            train_loss: f.to_f64_lossy(),
            test_loss: tl,
            wall_ms: clock(sched.record_timing),
        });
        adam.step(&mut x, &g);
    }

    let (mut f, mut g) = objective(&x, &mut work).map_err(|e| Error::Divergence(format!("after adam: {e}")))?;
    evaluations += 1;
    let mut stop = None;
    if lbfgs_iters > 0 {
        let mut lb = Lbfgs::new(LbfgsConfig {
            history: sched.lbfgs_history,
            ..LbfgsConfig::default()
        });
        let mut scratch = work.clone();
        let mut obj = |x: &[T]| objective(x, &mut scratch);
        for it in 0..lbfgs_iters {
            let s = lb.step(&mut obj, &mut x, &mut f, &mut g);
            unpack_params(&mut work, &x)?;
            let tl = test_loss(&work, it, it + 1 == lbfgs_iters || s.is_some())?;
            history.push(EpochRecord {
                stage: Stage::Lbfgs,
                epoch: it,
                train_loss: f.to_f64_lossy(),
                test_loss: tl,
                wall_ms: clock(sched.record_timing),
            });
            if s.is_some() {
                stop = s;
                break;
            }
        }
        evaluations += lb.evals;
        stop = stop.or(Some(LbfgsStop::MaxIter));
    }
    unpack_params(&mut work, &x)?;
    let (mut final_report, _) = assemble_loss(&work, train, false)?;
    final_report.epoch = adam_epochs + history.iter().filter(|h| h.stage == Stage::Lbfgs).count();
    final_report.wall_ms = clock(sched.record_timing);
    Ok(TrainOutcome {
        models: work,
        history,
        final_report,
        lbfgs_stop: stop,
        evaluations,
    })
}

#[cfg(test)]
mod tests;
