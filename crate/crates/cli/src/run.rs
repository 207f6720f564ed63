//! SIF and growth runs with their artifacts.

use std::path::{Path, PathBuf};

use kminn::fracture::{
    tip_sifs, Criterion, GrowthCheckpoint, GrowthConfig, GrowthRunner, GrowthTrace, ModelField, SifEstimate,
};
use kminn::geometry::{decompose, Decomposition};
use kminn::km_fields::PotentialModel;
use kminn::C;
use serde::Serialize;

use crate::config::{CaseConfig, CaseMode};
use crate::output::{self, num, CheckpointFile, CsvSink, CHECKPOINT_VERSION};
use crate::CliError;

/// Command-line overrides applied on top of a case file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_tl: bool,
}

impl Overrides {
    pub fn apply(&self, case: &mut CaseConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            case.sampling.seed = s;
            case.training.seed = 0;
        }
        if let Some(o) = &self.out {
            case.output.directory = o.clone();
        }
        if self.no_tl {
            case.fracture.tl_enabled = false;
        }
        case.validate()
    }
}

#[derive(Serialize)]
struct Status<'a> {
    ok: bool,
    config_hash: &'a str,
    error: Option<String>,
}

/// Records whether the run completed; partial artifacts sit next to it.
fn write_status(dir: &Path, hash: &str, err: Option<&CliError>) -> Result<(), CliError> {
    let s = Status {
        ok: err.is_none(),
        config_hash: hash,
        error: err.map(|e| e.to_string()),
    };
    std::fs::write(dir.join("status.json"), serde_json::to_vec_pretty(&s)?)?;
    Ok(())
}

fn with_status<R>(dir: &Path, hash: &str, f: impl FnOnce() -> Result<R, CliError>) -> Result<R, CliError> {
    let r = f();
    write_status(dir, hash, r.as_ref().err())?;
    r
}

/// A trained static solution.
pub struct Trained {
    pub models: Vec<PotentialModel<f64>>,
    pub dec: Decomposition<f64>,
    pub checkpoint: GrowthCheckpoint<f64>,
}

impl Trained {
    pub fn sifs(&self, cfg: &GrowthConfig<f64>, r_over_a: f64) -> Result<Vec<SifEstimate<f64>>, CliError> {
        Ok(tip_sifs(&self.models, &self.dec, &cfg.material, r_over_a, cfg.n_quad)?)
    }

    fn from_checkpoint(cfg: &GrowthConfig<f64>, state: GrowthCheckpoint<f64>) -> Result<Self, CliError> {
        let models = state
            .models
            .clone()
            .ok_or_else(|| CliError::Config("checkpoint holds no trained models".into()))?;
        let dec = decompose(&cfg.domain, &state.crack)?;
        Ok(Self {
            models,
            dec,
            checkpoint: state,
        })
    }
}

/// Train the case's initial crack once.
pub fn train_static(cfg: &GrowthConfig<f64>) -> Result<Trained, CliError> {
    let mut runner = GrowthRunner::new(GrowthConfig {
        n_steps: 1,
        ..cfg.clone()
    })?;
    runner.step()?;
    Trained::from_checkpoint(cfg, runner.checkpoint().clone())
}

fn point_segment(p: C<f64>, a: C<f64>, b: C<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        ((p - a).re * d.re + (p - a).im * d.im) / len2
    } else {
        0.0
    };
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Fields on a regular `nx x ny` grid over the plate, skipping points
/// within one grid spacing of the crack and two of its tips.
pub fn write_field_grid(path: &Path, hash: &str, cfg: &GrowthConfig<f64>, t: &Trained, grid: [usize; 2]) -> Result<usize, CliError> {
    let (b, h) = (cfg.domain.half_width, cfg.domain.half_height);
    let [nx, ny] = grid;
    let (dx, dy) = (2.0 * b / (nx - 1) as f64, 2.0 * h / (ny - 1) as f64);
    let eps = dx.max(dy);
    let verts = &t.dec.crack.vertices;
    let tips: Vec<C<f64>> = t.dec.tips.iter().map(|t| t.position).collect();
    let field = ModelField::new(&t.models, &t.dec, &cfg.material);
    let mut w = CsvSink::create(path, hash, &["x", "y", "sxx", "syy", "sxy", "ux", "uy"])?;
    let mut written = 0;
    for j in 0..ny {
        for i in 0..nx {
            let z = C::new(-b + dx * i as f64, -h + dy * j as f64);
            let near_crack = verts.windows(2).any(|s| point_segment(z, s[0], s[1]) < eps);
            let near_tip = tips.iter().any(|&p| (z - p).norm() < 2.0 * eps);
            if near_crack || near_tip {
                continue;
            }
            let Ok(f) = field.sample(z) else { continue };
            w.row([z.re, z.im, f.sxx, f.syy, f.sxy, f.ux, f.uy].map(num))?;
            written += 1;
        }
    }
    w.finish()?;
    Ok(written)
}

fn sweep(cfg: &GrowthConfig<f64>, t: &Trained, radii: &[f64]) -> Result<Vec<(usize, SifEstimate<f64>)>, CliError> {
    let mut rows = Vec::new();
    for &r in radii {
        for (k, s) in t.sifs(cfg, r)?.into_iter().enumerate() {
            rows.push((k, s));
        }
    }
    Ok(rows)
}

fn checkpoint_file(case: &CaseConfig, cfg: &GrowthConfig<f64>, state: &GrowthCheckpoint<f64>) -> CheckpointFile {
    CheckpointFile {
        version: CHECKPOINT_VERSION,
        config_hash: case.hash(),
        criterion: cfg.criterion,
        tl_enabled: cfg.tl_enabled,
        next_seed: cfg.schedule.seed.wrapping_add(state.trace.steps.len() as u64),
        state: state.clone(),
    }
}

/// Summary of a SIF run: per-tip estimates at the case's `r/a`.
#[derive(Debug, Clone)]
pub struct SifReport {
    pub sifs: Vec<SifEstimate<f64>>,
    pub reference: Option<(f64, f64)>,
    pub train_loss: f64,
    pub dir: PathBuf,
}

pub fn run_sif_case(case: &CaseConfig) -> Result<SifReport, CliError> {
    if case.mode != CaseMode::Sif {
        return Err(CliError::Config("mode: `sif` runs need mode = \"sif\"".into()));
    }
    let dir = output::ensure_dir(&case.output.directory)?;
    let hash = case.hash();
    with_status(&dir, &hash, || {
        let cfg = case.growth_config()?;
        let timing = cfg.schedule.record_timing;
        let t = train_static(&cfg)?;
        let step = &t.checkpoint.trace.steps[0];
        output::write_loss_history(&dir.join("loss_history.csv"), &hash, 1, &step.history, timing)?;
        checkpoint_file(case, &cfg, &t.checkpoint).save(&dir.join("checkpoint.json"))?;
        output::write_geometry(&dir.join("geometry.csv"), &hash, &t.dec)?;

        let rows = sweep(&cfg, &t, &case.fracture.sweep)?;
        output::write_sweep(&dir.join("sif_sweep.csv"), &hash, &rows, cfg.material.effective_modulus())?;
        write_field_grid(&dir.join("field_grid.csv"), &hash, &cfg, &t, case.output.grid)?;

        let sifs = t.sifs(&cfg, cfg.r_over_a)?;
        let reference = case.reference_sifs()?;
        if let Some((ri, rii)) = reference {
            write_metrics(&dir.join("metrics.csv"), &hash, &sifs, (ri, rii))?;
        }
        Ok(SifReport {
            sifs,
            reference,
            train_loss: step.train_loss,
            dir: dir.clone(),
        })
    })
}

fn rel(p: f64, r: f64) -> String {
    if r == 0.0 {
        String::new()
    } else {
        num(((p - r) / r).abs())
    }
}

fn write_metrics(path: &Path, hash: &str, sifs: &[SifEstimate<f64>], (ri, rii): (f64, f64)) -> Result<(), CliError> {
    let mut w = CsvSink::create(
        path,
        hash,
        &["tip", "r_over_a", "k_i", "k_ii", "k_i_ref", "k_ii_ref", "rel_err_k_i", "rel_err_k_ii", "global_error"],
    )?;
    for (k, s) in sifs.iter().enumerate() {
        let global = ((s.k_i - ri).powi(2) + (s.k_ii - rii).powi(2)).sqrt() / ri.hypot(rii);
        w.row([
            k.to_string(),
            num(s.radius_ratio),
            num(s.k_i),
            num(s.k_ii),
            num(ri),
            num(rii),
            rel(s.k_i, ri),
            rel(s.k_ii, rii),
            num(global),
        ])?;
    }
    w.finish()
}

/// Radius sweep only; reuses a checkpoint's models when one is given.
pub fn run_sweep_radius(case: &CaseConfig, resume: Option<&Path>) -> Result<Vec<(usize, SifEstimate<f64>)>, CliError> {
    let dir = output::ensure_dir(&case.output.directory)?;
    let hash = case.hash();
    with_status(&dir, &hash, || {
        let cfg = case.growth_config()?;
        let t = match resume {
            Some(p) => Trained::from_checkpoint(&cfg, CheckpointFile::load(p)?.state)?,
            None => train_static(&cfg)?,
        };
        let rows = sweep(&cfg, &t, &case.fracture.sweep)?;
        output::write_sweep(&dir.join("sif_sweep.csv"), &hash, &rows, cfg.material.effective_modulus())?;
        Ok(rows)
    })
}

/// Per-criterion growth result.
#[derive(Debug, Clone)]
pub struct CriterionRun {
    pub criterion: Criterion,
    pub tl_enabled: bool,
    pub trace: GrowthTrace<f64>,
    pub error: Option<String>,
}

fn run_label(c: Criterion, tl: bool) -> String {
    if tl {
        c.name().to_owned()
    } else {
        format!("{}_cold", c.name())
    }
}

/// Step a runner to the end, writing the per-step loss CSV and checkpoint
/// after every completed step.
fn drive(case: &CaseConfig, dir: &Path, mut runner: GrowthRunner<f64>) -> CriterionRun {
    let hash = case.hash();
    let label = run_label(runner.cfg.criterion, runner.cfg.tl_enabled);
    let timing = runner.cfg.schedule.record_timing;
    let save = |r: &GrowthRunner<f64>| -> Result<(), CliError> {
        let Some(last) = r.trace().steps.last() else { return Ok(()) };
        let k = last.step;
        output::write_loss_history(&dir.join(format!("loss_{label}_step{k:03}.csv")), &hash, k, &last.history, timing)?;
        checkpoint_file(case, &r.cfg, r.checkpoint()).save(&dir.join(format!("checkpoint_{label}_step{k:03}.json")))?;
        checkpoint_file(case, &r.cfg, r.checkpoint()).save(&dir.join(format!("checkpoint_{label}.json")))
    };
    let mut error = None;
    if let Err(e) = save(&runner) {
        error = Some(e.to_string());
    }
    while error.is_none() {
        match runner.step() {
            Ok(more) => {
                if let Err(e) = save(&runner) {
                    error = Some(e.to_string());
                }
                if !more {
                    break;
                }
            }
            Err(e) => error = Some(e.to_string()),
        }
    }
    CriterionRun {
        criterion: runner.cfg.criterion,
        tl_enabled: runner.cfg.tl_enabled,
        trace: runner.into_trace(),
        error,
    }
}

fn write_growth_outputs(case: &CaseConfig, dir: &Path, runs: &[CriterionRun], trace_name: &str) -> Result<(), CliError> {
    let hash = case.hash();
    let timing = case.training.record_timing;
    let traces: Vec<&GrowthTrace<f64>> = runs.iter().map(|r| &r.trace).collect();
    output::write_trace(&dir.join(trace_name), &hash, &traces, timing)?;
    let initial = case.crack_geometry()?.vertices;
    for r in runs {
        let name = format!("path_{}.csv", run_label(r.criterion, r.tl_enabled));
        output::write_path(&dir.join(name), &hash, &r.trace, &initial)?;
    }
    write_timing(&dir.join("timing.csv"), &hash, runs, timing)
}

fn write_timing(path: &Path, hash: &str, runs: &[CriterionRun], timing: bool) -> Result<(), CliError> {
    let mut w = CsvSink::create(
        path,
        hash,
        &[
            "criterion",
            "tl_enabled",
            "steps",
            "total_wall_ms",
            "mean_step_wall_ms",
            "wall_ratio_to_cold",
            "final_train_loss",
            "stopped",
        ],
    )?;
    let cold = |c: Criterion| {
        runs.iter()
            .find(|r| r.criterion == c && !r.tl_enabled)
            .map(|r| r.trace.total_wall_ms())
    };
    for r in runs {
        let n = r.trace.steps.len();
        let total = r.trace.total_wall_ms();
        let ratio = match cold(r.criterion) {
            Some(c) if r.tl_enabled && c > 0.0 => Some(total / c),
            _ => None,
        };
        let stopped = r.error.clone().or_else(|| r.trace.stopped.clone()).unwrap_or_default();
        w.row([
            r.criterion.name().to_owned(),
            r.tl_enabled.to_string(),
            n.to_string(),
            output::wall(Some(total), timing),
            output::wall((n > 0).then(|| total / n as f64), timing),
            output::wall(ratio, timing),
            output::opt(r.trace.steps.last().map(|s| s.train_loss)),
            stopped,
        ])?;
    }
    w.finish()
}

fn first_error(runs: &[CriterionRun]) -> Result<(), CliError> {
    match runs.iter().find_map(|r| r.error.as_ref()) {
        Some(e) => Err(CliError::Growth(e.clone())),
        None => Ok(()),
    }
}

/// Growth under each requested criterion. Step 1 is trained once and
/// shared; each criterion continues from its own kink angles. With
/// `resume`, only the checkpoint's criterion is continued.
pub fn run_growth_case(case: &CaseConfig, criteria: &[Criterion], resume: Option<&Path>) -> Result<Vec<CriterionRun>, CliError> {
    if case.mode != CaseMode::Growth {
        return Err(CliError::Config("mode: `grow` runs need mode = \"growth\"".into()));
    }
    let dir = output::ensure_dir(&case.output.directory)?;
    let hash = case.hash();
    with_status(&dir, &hash, || {
        let cfg = case.growth_config()?;
        let runs = match resume {
            Some(p) => {
                let file = CheckpointFile::load(p)?;
                if file.config_hash != hash {
                    return Err(CliError::Config(format!(
                        "{}: checkpoint was written for config {} but this case hashes to {hash}",
                        p.display(),
                        file.config_hash
                    )));
                }
                let cfg = GrowthConfig {
                    criterion: file.criterion,
                    tl_enabled: file.tl_enabled,
                    ..cfg
                };
                vec![drive(case, &dir, GrowthRunner::resume(cfg, file.state)?)]
            }
            None => {
                let criteria = if criteria.is_empty() { &[cfg.criterion][..] } else { criteria };
                let mut first = GrowthRunner::new(GrowthConfig {
                    criterion: criteria[0],
                    ..cfg
                })?;
                first.step()?;
                let mut runs = Vec::new();
                for &c in criteria {
                    runs.push(drive(case, &dir, first.fork_with_criterion(c)?));
                }
                runs
            }
        };
        write_growth_outputs(case, &dir, &runs, "growth_trace.csv")?;
        first_error(&runs)?;
        Ok(runs)
    })
}

/// The same growth run with and without warm starts. Both share the cold
/// first step; the comparison covers every step.
pub fn run_compare_tl(case: &CaseConfig, criterion: Option<Criterion>) -> Result<[CriterionRun; 2], CliError> {
    if case.mode != CaseMode::Growth {
        return Err(CliError::Config("mode: `compare-tl` runs need mode = \"growth\"".into()));
    }
    let dir = output::ensure_dir(&case.output.directory)?;
    let hash = case.hash();
    with_status(&dir, &hash, || {
        let cfg = case.growth_config()?;
        let criterion = criterion.unwrap_or(cfg.criterion);
        let mut first = GrowthRunner::new(GrowthConfig {
            criterion,
            tl_enabled: true,
            ..cfg.clone()
        })?;
        first.step()?;
        let cold_cfg = GrowthConfig {
            criterion,
            tl_enabled: false,
            ..cfg
        };
        let cold = GrowthRunner::resume(cold_cfg, first.checkpoint().clone())?;
        let warm = drive(case, &dir, first);
        let cold = drive(case, &dir, cold);
        let runs = [warm, cold];
        write_growth_outputs(case, &dir, &runs, "growth_trace.csv")?;
        first_error(&runs)?;
        Ok(runs)
    })
}
