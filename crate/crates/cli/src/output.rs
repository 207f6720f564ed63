//! CSV artifacts. Every file starts with a `# config_hash=` comment line
//! followed by the header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kminn::fracture::{GrowthCheckpoint, GrowthStep, GrowthTrace, SifEstimate};
use kminn::geometry::{Decomposition, SegmentKind};
use kminn::training::EpochRecord;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub struct CsvSink {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: &Path, hash: &str, header: &[&str]) -> Result<Self, CliError> {
        let mut file = BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
        writeln!(file, "# config_hash={hash}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Wall-clock values are blanked when timing is off so that repeated runs
/// produce identical files.
pub fn wall(v: Option<f64>, timing: bool) -> String {
    if timing {
        opt(v)
    } else {
        String::new()
    }
}

/// Read a CSV written by [`CsvSink`], skipping the hash line.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let header = rd.headers()?.iter().map(str::to_owned).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

pub const LOSS_HEADER: [&str; 6] = ["step", "stage", "epoch", "train_loss", "test_loss", "wall_ms"];

pub fn write_loss_history(
    path: &Path,
    hash: &str,
    step: usize,
    history: &[EpochRecord],
    timing: bool,
) -> Result<(), CliError> {
    let mut w = CsvSink::create(path, hash, &LOSS_HEADER)?;
    for r in history {
        w.row([
            step.to_string(),
            r.stage.as_str().to_owned(),
            r.epoch.to_string(),
            num(r.train_loss),
            opt(r.test_loss),
            wall(r.wall_ms, timing),
        ])?;
    }
    w.finish()
}

pub const SWEEP_HEADER: [&str; 8] = ["tip", "r_over_a", "radius", "n_quad", "k_i", "k_ii", "j", "j_from_k"];

pub fn write_sweep(path: &Path, hash: &str, rows: &[(usize, SifEstimate<f64>)], e_eff: f64) -> Result<(), CliError> {
    let mut w = CsvSink::create(path, hash, &SWEEP_HEADER)?;
    for (tip, s) in rows {
        w.row([
            tip.to_string(),
            num(s.radius_ratio),
            num(s.radius),
            s.n_quad.to_string(),
            num(s.k_i),
            num(s.k_ii),
            opt(s.j),
            num((s.k_i * s.k_i + s.k_ii * s.k_ii) / e_eff),
        ])?;
    }
    w.finish()
}

pub const TRACE_HEADER: [&str; 13] = [
    "step",
    "tip",
    "tip_x",
    "tip_y",
    "theta_deg",
    "k_i",
    "k_ii",
    "criterion",
    "status",
    "warm",
    "train_loss_final",
    "test_loss_final",
    "wall_ms",
];

fn status_name(s: kminn::fracture::GrowthStatus) -> &'static str {
    match s {
        kminn::fracture::GrowthStatus::NoGrowth => "no_growth",
        kminn::fracture::GrowthStatus::Onset => "onset",
        kminn::fracture::GrowthStatus::Growth => "growth",
    }
}

pub fn trace_rows(s: &GrowthStep<f64>, timing: bool) -> Vec<Vec<String>> {
    s.tips
        .iter()
        .enumerate()
        .map(|(k, t)| {
            vec![
                s.step.to_string(),
                k.to_string(),
                num(t.position.re),
                num(t.position.im),
                num(t.theta.to_degrees()),
                num(t.sif.k_i),
                num(t.sif.k_ii),
                s.criterion.name().to_owned(),
                status_name(t.status).to_owned(),
                s.warm.to_string(),
                num(s.train_loss),
                opt(s.test_loss),
                wall(Some(s.wall_ms), timing),
            ]
        })
        .collect()
}

pub fn write_trace(path: &Path, hash: &str, traces: &[&GrowthTrace<f64>], timing: bool) -> Result<(), CliError> {
    let mut w = CsvSink::create(path, hash, &TRACE_HEADER)?;
    for t in traces {
        for s in &t.steps {
            for r in trace_rows(s, timing) {
                w.row(r)?;
            }
        }
    }
    w.finish()
}

/// Crack polylines after the last step: one row per vertex.
pub fn write_path(path: &Path, hash: &str, trace: &GrowthTrace<f64>, initial: &[kminn::C<f64>]) -> Result<(), CliError> {
    let mut w = CsvSink::create(path, hash, &["vertex", "x", "y"])?;
    let verts = trace.steps.last().map(|s| s.crack.vertices.as_slice()).unwrap_or(initial);
    for (k, v) in verts.iter().enumerate() {
        w.row([k.to_string(), num(v.re), num(v.im)])?;
    }
    w.finish()
}

fn segment_name(k: SegmentKind) -> String {
    match k {
        SegmentKind::Outer(e) => format!("outer_{}", format!("{e:?}").to_lowercase()),
        SegmentKind::CrackFace => "crack_face".into(),
        SegmentKind::Interface => "interface".into(),
    }
}

/// Decomposition polylines: outer edges, crack faces, interface and spine.
pub fn write_geometry(path: &Path, hash: &str, dec: &Decomposition<f64>) -> Result<(), CliError> {
    let mut w = CsvSink::create(path, hash, &["polyline", "kind", "owner", "x", "y"])?;
    for (k, s) in dec.segments.iter().enumerate() {
        for p in &s.polyline {
            w.row([k.to_string(), segment_name(s.kind), s.owner.to_string(), num(p.re), num(p.im)])?;
        }
    }
    let id = dec.segments.len().to_string();
    for p in &dec.spine {
        w.row([id.clone(), "spine".into(), String::new(), num(p.re), num(p.im)])?;
    }
    w.finish()
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk checkpoint. Models carry their layer widths, parameters and
/// enrichment tips; `next_seed` is the sampling seed of the step that
/// follows, the only random state the loop carries between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub version: u32,
    pub config_hash: String,
    pub criterion: kminn::fracture::Criterion,
    pub tl_enabled: bool,
    pub next_seed: u64,
    pub state: GrowthCheckpoint<f64>,
}

impl CheckpointFile {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let c: CheckpointFile = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: bad checkpoint: {e}", path.display())))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(CliError::Config(format!(
                "{}: checkpoint version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                c.version
            )));
        }
        Ok(c)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
