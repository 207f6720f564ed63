//! SIF extraction from trained models and the crack-growth loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::criteria::{check_growth, cr_map, kink_angle, Criterion, GrowthStatus};
use super::integrals::{extract_sifs, SifEstimate};
use crate::error::{Error, Result};
use crate::geometry::{decompose, sample_boundaries, CrackGeometry, CrackKind, Decomposition, DomainSpec, EdgeLoads};
use crate::km_fields::{evaluate_fields, FieldSample, Material, PotentialModel};
use crate::scalar::{Scalar, C};
use crate::training::{
    compute_reference_scales, init_models, train_mixed, warm_start, EpochRecord, LossProblem, NetworkSpec,
    TrainSchedule,
};

/// Fields of a decomposed model: each point is evaluated by the subdomain
/// that contains it.
pub struct ModelField<'a, T> {
    pub models: &'a [PotentialModel<T>],
    pub dec: &'a Decomposition<T>,
    pub material: &'a Material<T>,
}

impl<'a, T: Scalar> ModelField<'a, T> {
    pub fn new(models: &'a [PotentialModel<T>], dec: &'a Decomposition<T>, material: &'a Material<T>) -> Self {
        Self { models, dec, material }
    }

    pub fn sample(&self, z: C<T>) -> Result<FieldSample<T>> {
        let side = self.dec.side_of(z);
        let m = self.models.get(side).ok_or(Error::ShapeMismatch {
            expected: side + 1,
            got: self.models.len(),
        })?;
        evaluate_fields(m, self.material, z)
    }
}

impl<T: Scalar> super::integrals::FieldEvaluator<T> for ModelField<'_, T> {
    fn sample(&self, z: C<T>) -> Result<FieldSample<T>> {
        ModelField::sample(self, z)
    }
}

/// Reference crack size for `r/a`: half the length of a center crack, the
/// full length of an edge crack.
pub fn crack_size<T: Scalar>(crack: &CrackGeometry<T>) -> T {
    match crack.kind {
        CrackKind::Center => crack.length() * T::lit(0.5),
        CrackKind::Edge => crack.length(),
    }
}

/// Fraction of the clearance a contour may use.
const CONTOUR_CLEARANCE: f64 = 0.8;

/// Contour radius `r/a * a` around tip `tip_index`, shrunk to 0.8 of the
/// clearance to the outer boundary and the other tips when it would not fit.
pub fn contour_radius<T: Scalar>(dec: &Decomposition<T>, tip_index: usize, r_over_a: T) -> Result<T> {
    if !(r_over_a > T::zero()) {
        return Err(Error::InvalidInput(format!("r/a must be positive, got {r_over_a}")));
    }
    let tip = dec
        .tips
        .get(tip_index)
        .ok_or_else(|| Error::InvalidInput(format!("no crack tip with index {tip_index}")))?;
    let mut clearance = dec.domain.distance_to_boundary(tip.position);
    for (k, other) in dec.tips.iter().enumerate() {
        if k != tip_index {
            clearance = clearance.min((other.position - tip.position).norm());
        }
    }
    if let Some(mouth) = (dec.crack.kind == CrackKind::Edge).then(|| dec.crack.vertices[0]) {
        clearance = clearance.min((mouth - tip.position).norm());
    }
    let wanted = r_over_a * crack_size(&dec.crack);
    let r = wanted.min(clearance * T::lit(CONTOUR_CLEARANCE));
    if !(r > dec.crack.exclusion_radius()) {
        return Err(Error::ContourIntersection {
            x: tip.position.re.to_f64_lossy(),
            y: tip.position.im.to_f64_lossy(),
            radius: wanted.to_f64_lossy(),
        });
    }
    Ok(r)
}

/// SIFs at every tip of a trained model.
pub fn tip_sifs<T: Scalar>(
    models: &[PotentialModel<T>],
    dec: &Decomposition<T>,
    mat: &Material<T>,
    r_over_a: T,
    n_quad: usize,
) -> Result<Vec<SifEstimate<T>>> {
    let field = ModelField::new(models, dec, mat);
    (0..dec.tips.len())
        .map(|k| {
            let r = contour_radius(dec, k, r_over_a)?;
            let t = &dec.tips[k];
            extract_sifs(&field, mat, t.position, t.angle, r, n_quad, r_over_a)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct GrowthConfig<T> {
    pub domain: DomainSpec<T>,
    pub crack: CrackGeometry<T>,
    pub loads: EdgeLoads<T>,
    pub material: Material<T>,
    pub network: NetworkSpec,
    pub schedule: TrainSchedule,
    pub n_train: usize,
    pub n_test: usize,
    pub criterion: Criterion,
    pub da: T,
    /// Step budget; zero still trains and records step 1.
    pub n_steps: usize,
    pub r_over_a: T,
    pub n_quad: usize,
    pub enforce_gate: bool,
    pub k_ic: T,
    pub k_iic: T,
    /// Warm-start each step from the previous one; otherwise every step is a
    /// cold start with the full schedule.
    pub tl_enabled: bool,
    pub gauge_weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct TipStep<T> {
    pub position: C<T>,
    pub angle: T,
    pub sif: SifEstimate<T>,
    pub theta: T,
    pub status: GrowthStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct GrowthStep<T> {
    /// One-based.
    pub step: usize,
    pub crack: CrackGeometry<T>,
    pub tips: Vec<TipStep<T>>,
    pub criterion: Criterion,
    pub warm: bool,
    pub train_loss: T,
    pub test_loss: Option<T>,
    pub wall_ms: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct GrowthTrace<T> {
    pub steps: Vec<GrowthStep<T>>,
    /// Why the loop ended early, if it did.
    pub stopped: Option<String>,
}

impl<T: Scalar> GrowthTrace<T> {
    /// Path of tip `k` over all steps.
    pub fn tip_path(&self, k: usize) -> Vec<C<T>> {
        self.steps.iter().filter_map(|s| s.tips.get(k).map(|t| t.position)).collect()
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.steps.iter().map(|s| s.wall_ms).sum()
    }
}

/// Resumable state between growth steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct GrowthCheckpoint<T> {
    pub crack: CrackGeometry<T>,
    pub models: Option<Vec<PotentialModel<T>>>,
    pub trace: GrowthTrace<T>,
    pub finished: bool,
}

pub struct GrowthRunner<T> {
    pub cfg: GrowthConfig<T>,
    state: GrowthCheckpoint<T>,
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed.wrapping_add(step as u64)
}

impl<T: Scalar> GrowthRunner<T> {
    pub fn new(cfg: GrowthConfig<T>) -> Result<Self> {
        cfg.schedule.validate()?;
        cfg.crack.validate(&cfg.domain)?;
        if !(cfg.da > T::zero()) {
            return Err(Error::InvalidInput(format!("crack increment must be positive, got {}", cfg.da)));
        }
        let state = GrowthCheckpoint {
            crack: cfg.crack.clone(),
            models: None,
            trace: GrowthTrace {
                steps: Vec::new(),
                stopped: None,
            },
            finished: false,
        };
        Ok(Self { cfg, state })
    }

    pub fn resume(cfg: GrowthConfig<T>, checkpoint: GrowthCheckpoint<T>) -> Result<Self> {
        let mut r = Self::new(cfg)?;
        r.state = checkpoint;
        Ok(r)
    }

    /// Copy of this run continuing under another criterion. The kink angles
    /// of the latest step are recomputed so that the next increment already
    /// follows `criterion`; earlier steps are shared history.
    pub fn fork_with_criterion(&self, criterion: Criterion) -> Result<Self> {
        let mut cfg = self.cfg.clone();
        cfg.criterion = criterion;
        let mut state = self.state.clone();
        if let Some(last) = state.trace.steps.last_mut() {
            last.criterion = criterion;
            for t in last.tips.iter_mut() {
                t.theta = kink_angle(criterion, t.sif.k_i, t.sif.k_ii, &cfg.material)?;
            }
        }
        Ok(Self { cfg, state })
    }

    pub fn checkpoint(&self) -> &GrowthCheckpoint<T> {
        &self.state
    }

    pub fn trace(&self) -> &GrowthTrace<T> {
        &self.state.trace
    }

    pub fn into_trace(self) -> GrowthTrace<T> {
        self.state.trace
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    fn budget(&self) -> usize {
        self.cfg.n_steps.max(1)
    }

    fn finish(&mut self, reason: Option<String>) {
        self.state.finished = true;
        if self.state.trace.stopped.is_none() {
            self.state.trace.stopped = reason;
        }
    }

    /// Advance the crack by the previous step's kink angles, or return
    /// `None` when it cannot grow any further.
    fn grown_crack(&self) -> Result<Option<CrackGeometry<T>>> {
        let Some(last) = self.state.trace.steps.last() else {
            return Ok(Some(self.state.crack.clone()));
        };
        let mut crack = self.state.crack.clone();
        for (k, t) in last.tips.iter().enumerate() {
            if self.cfg.enforce_gate && t.status == GrowthStatus::NoGrowth {
                continue;
            }
            crack = match crack.extend(&self.cfg.domain, k, t.theta, self.cfg.da) {
                Ok(c) => c,
                Err(Error::Geometry(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
        }
        Ok(Some(crack))
    }

    /// Run one step of the loop. Returns `false` once the loop is over.
    pub fn step(&mut self) -> Result<bool> {
        if self.state.finished {
            return Ok(false);
        }
        let index = self.state.trace.steps.len() + 1;
        if index > self.budget() {
            self.finish(None);
            return Ok(false);
        }
        if self.cfg.enforce_gate
            && self
                .state
                .trace
                .steps
                .last()
                .is_some_and(|s| s.tips.iter().all(|t| t.status == GrowthStatus::NoGrowth))
        {
            self.finish(Some("growth criterion not met at any tip".into()));
            return Ok(false);
        }
        let Some(crack) = self.grown_crack()? else {
            self.finish(Some("crack increment would leave the plate".into()));
            return Ok(false);
        };
        match self.run_step(index, crack) {
            Ok(()) => {}
            Err(e) => {
                self.finish(Some(format!("step {index}: {e}")));
                return Err(e);
            }
        }
        let near_edge = {
            let c = &self.state.crack;
            c.tips().iter().any(|t| self.cfg.domain.distance_to_boundary(t.position) < self.cfg.da)
        };
        if near_edge {
            self.finish(Some("crack tip within one increment of the boundary".into()));
            return Ok(false);
        }
        Ok(true)
    }

    fn run_step(&mut self, index: usize, crack: CrackGeometry<T>) -> Result<()> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let dec = decompose(&cfg.domain, &crack)?;
        let seed = step_seed(cfg.schedule.seed, index - 1);
        let (train, test) = sample_boundaries(&dec, &cfg.loads, cfg.n_train, cfg.n_test, seed)?;
        let scales = compute_reference_scales(&train, &cfg.material, &cfg.domain)?;

        let prev = self.state.trace.steps.last();
        let warm = cfg.tl_enabled && self.state.models.is_some() && prev.is_some();
        let models = match (&self.state.models, prev) {
            (Some(m), Some(p)) if warm => {
                let seeded: Vec<C<T>> = p
                    .tips
                    .iter()
                    .map(|t| {
                        let (a, b) = cr_map(t.sif.k_i, t.sif.k_ii, t.theta);
                        C::new(a, -b)
                    })
                    .collect();
                warm_start(m, &seeded, &dec)?
            }
            _ => init_models(&dec, &train, &cfg.network, &scales, seed)?,
        };
        let p = LossProblem::new(&train, &models, scales, cfg.material, cfg.gauge_weight)?;
        let q = if test.is_empty() {
            None
        } else {
            Some(LossProblem::new(&test, &models, scales, cfg.material, cfg.gauge_weight)?)
        };
        let (na, nl) = cfg.schedule.counts(warm);
        let out = train_mixed(&models, &p, q.as_ref(), na, nl, &cfg.schedule)?;
        let test_loss = match &q {
            Some(q) => Some(crate::training::assemble_loss(&out.models, q, false)?.0.total),
            None => None,
        };

        let sifs = tip_sifs(&out.models, &dec, &cfg.material, cfg.r_over_a, cfg.n_quad)?;
        let mut tips = Vec::with_capacity(sifs.len());
        for (t, sif) in dec.tips.iter().zip(sifs) {
            let theta = kink_angle(cfg.criterion, sif.k_i, sif.k_ii, &cfg.material)?;
            tips.push(TipStep {
                position: t.position,
                angle: t.angle,
                sif,
                theta,
                status: check_growth(sif.k_i, sif.k_ii, cfg.k_ic, cfg.k_iic)?,
            });
        }
        self.state.trace.steps.push(GrowthStep {
            step: index,
            crack: crack.clone(),
            tips,
            criterion: cfg.criterion,
            warm,
            train_loss: out.final_report.total,
            test_loss,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            history: out.history,
        });
        self.state.crack = crack;
        self.state.models = Some(out.models);
        Ok(())
    }

    /// Step until done, calling `on_step` after every completed step. A
    /// failing step ends the loop and returns the partial trace with the
    /// reason recorded in `stopped`.
    pub fn run(mut self, mut on_step: impl FnMut(&GrowthCheckpoint<T>)) -> GrowthTrace<T> {
        loop {
            match self.step() {
                Ok(true) => on_step(&self.state),
                Ok(false) => {
                    on_step(&self.state);
                    break;
                }
                Err(_) => break,
            }
        }
        self.state.trace
    }
}

/// Run the whole loop; see [`GrowthRunner::run`].
pub fn run_growth<T: Scalar>(cfg: GrowthConfig<T>) -> Result<GrowthTrace<T>> {
    Ok(GrowthRunner::new(cfg)?.run(|_| {}))
}

/// Symmetric Hausdorff distance between two polylines, using their vertices
/// against the other's segments.
pub fn hausdorff<T: Scalar>(a: &[C<T>], b: &[C<T>]) -> T {
    fn to_polyline<T: Scalar>(p: C<T>, line: &[C<T>]) -> T {
        if line.len() == 1 {
            return (p - line[0]).norm();
        }
        line.windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let l2 = d.norm_sqr();
                let t = if l2 > T::zero() {
                    (((p - w[0]) * d.conj()).re / l2).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                };
                (p - (w[0] + d * t)).norm()
            })
            .fold(T::infinity(), |m, v| m.min(v))
    }
    if a.is_empty() || b.is_empty() {
        return T::infinity();
    }
    let one = |x: &[C<T>], y: &[C<T>]| x.iter().map(|&p| to_polyline(p, y)).fold(T::zero(), |m, v| m.max(v));
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::decompose;
    use crate::holonet::HoloNetwork;
    use crate::km_fields::{NetScaling, Regime, TipEnrichment};

    fn steel() -> Material<f64> {
        Material::new(210_000.0, 0.3, Regime::PlaneStrain).unwrap()
    }

    #[test]
    fn hausdorff_fixtures() {
        let a = [C::new(0.0f64, 0.0), C::new(1.0, 0.0)];
        let b = [C::new(0.0, 0.1), C::new(1.0, 0.1)];
        assert!((hausdorff(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(hausdorff(&a, &a), 0.0);
        let c = [C::new(0.0, 0.0), C::new(2.0, 0.0)];
        assert!((hausdorff(&a, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radius_is_clamped_near_the_boundary() {
        let dom = DomainSpec::new(4.0, 6.0).unwrap();
        let crack = CrackGeometry::straight_edge(C::new(-4.0f64, 0.0), 6.0, 0.0);
        let dec = decompose(&dom, &crack).unwrap();
        let r = contour_radius(&dec, 0, 0.4).unwrap();
        assert!((r - 0.8 * 2.0).abs() < 1e-12);
        let crack = CrackGeometry::straight_center(C::new(0.0, 0.0), 1.5, 0.0);
        let dec = decompose(&dom, &crack).unwrap();
        assert!((contour_radius(&dec, 1, 0.4).unwrap() - 0.6).abs() < 1e-12);
        assert!(contour_radius(&dec, 1, 0.0).is_err());
    }

    #[test]
    fn decomposed_exact_field_recovers_sifs() {
        // every subdomain carries the same exact near-tip field, each with its
        // own branch cut; extraction must not see the cut
        let mat = steel();
        let dom = DomainSpec::new(4.0, 6.0).unwrap();
        let crack = CrackGeometry::straight_edge(C::new(-4.0, 0.0), 3.0, 0.0);
        let dec = decompose(&dom, &crack).unwrap();
        let t = &dec.tips[0];
        let models: Vec<_> = (0..2)
            .map(|sub| PotentialModel {
                phi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
                psi_net: HoloNetwork::zeros(&[1, 1]).unwrap(),
                enrichments: vec![TipEnrichment::from_sifs(t.position, t.angle, 1.2, -0.7).with_cut(t.cuts[sub])],
                subdomain: sub,
                scaling: NetScaling::unit(),
            })
            .collect();
        let s = tip_sifs(&models, &dec, &mat, 0.4, 256).unwrap();
        assert!((s[0].k_i - 1.2).abs() < 1e-3 * 1.2, "{}", s[0].k_i);
        assert!((s[0].k_ii + 0.7).abs() < 1e-3 * 0.7, "{}", s[0].k_ii);
    }
}
