//! Case files: TOML with a schema version, validated field by field.

use std::path::{Path, PathBuf};

use kminn::fracture::{Criterion, GrowthConfig};
use kminn::geometry::{CrackGeometry, CrackKind, DomainSpec, EdgeCondition, EdgeLoads};
use kminn::km_fields::{Material, Regime};
use kminn::training::{NetworkSpec, TrainSchedule};
use kminn::C;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMode {
    Sif,
    Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub half_width: f64,
    pub half_height: f64,
}

/// Either an explicit polyline or a straight crack described by its centre
/// (center cracks) or mouth (edge cracks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackConfig {
    pub kind: CrackKind,
    #[serde(default)]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub half_length: Option<f64>,
    #[serde(default)]
    pub mouth: Option<[f64; 2]>,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub young_modulus: f64,
    pub poisson: f64,
    pub regime: Regime,
}

/// Unlisted edges are traction free.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    pub bottom: Option<EdgeCondition<f64>>,
    pub right: Option<EdgeCondition<f64>>,
    pub top: Option<EdgeCondition<f64>>,
    pub left: Option<EdgeCondition<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FractureConfig {
    pub criterion: Criterion,
    pub da: f64,
    pub n_steps: usize,
    pub r_over_a: f64,
    pub n_quad: usize,
    pub enforce_gate: bool,
    pub tl_enabled: bool,
    pub k_ic: f64,
    pub k_iic: f64,
    /// Radii for the SIF sweep output.
    pub sweep: Vec<f64>,
}

impl Default for FractureConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Mts,
            da: 0.1,
            n_steps: 50,
            r_over_a: 0.4,
            n_quad: 256,
            enforce_gate: false,
            tl_enabled: true,
            k_ic: 50.0,
            k_iic: 50.0,
            sweep: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

/// Reference SIFs for the metrics output: an analytic formula, fixed values
/// or both components given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default)]
    pub analytic: Option<Analytic>,
    #[serde(default)]
    pub load: Option<f64>,
    #[serde(default)]
    pub k_i: Option<f64>,
    #[serde(default)]
    pub k_ii: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analytic {
    TadaTension,
    TadaShear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Field grid resolution `[nx, ny]`.
    pub grid: [usize; 2],
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            grid: [200, 300],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub schema_version: u32,
    pub name: String,
    pub mode: CaseMode,
    pub geometry: GeometryConfig,
    pub crack: CrackConfig,
    pub material: MaterialConfig,
    #[serde(default)]
    pub loads: LoadsConfig,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub training: TrainSchedule,
    #[serde(default = "default_gauge")]
    pub gauge_weight: f64,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub fracture: FractureConfig,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_gauge() -> f64 {
    1.0
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{name}: {msg}"))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must be positive, got {v}")))
    }
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: CaseConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        positive("geometry.half_width", self.geometry.half_width)?;
        positive("geometry.half_height", self.geometry.half_height)?;
        positive("material.young_modulus", self.material.young_modulus)?;
        let nu = self.material.poisson;
        if !(0.0..0.5).contains(&nu) {
            return Err(field("material.poisson", format!("must lie in [0, 0.5), got {nu}")));
        }
        if self.network.hidden.is_empty() || self.network.hidden.contains(&0) {
            return Err(field("network.hidden", "needs at least one non-empty hidden layer"));
        }
        positive("network.beta", self.network.beta)?;
        positive("training.adam_lr", self.training.adam_lr)?;
        positive("training.clip_norm", self.training.clip_norm)?;
        if self.training.lbfgs_history == 0 {
            return Err(field("training.lbfgs_history", "must be at least 1"));
        }
        if self.training.test_every == 0 {
            return Err(field("training.test_every", "must be at least 1"));
        }
        if self.training.seed != 0 && self.training.seed != self.sampling.seed {
            return Err(field("training.seed", "conflicts with sampling.seed; set the seed under [sampling]"));
        }
        if self.gauge_weight.is_nan() || self.gauge_weight < 0.0 {
            return Err(field("gauge_weight", "must be non-negative"));
        }
        if self.sampling.n_train == 0 {
            return Err(field("sampling.n_train", "must be positive"));
        }
        let f = &self.fracture;
        positive("fracture.da", f.da)?;
        if !(f.r_over_a > 0.0 && f.r_over_a <= 1.0) {
            return Err(field("fracture.r_over_a", format!("must lie in (0, 1], got {}", f.r_over_a)));
        }
        if f.n_quad < 4 {
            return Err(field("fracture.n_quad", "must be at least 4"));
        }
        positive("fracture.k_ic", f.k_ic)?;
        positive("fracture.k_iic", f.k_iic)?;
        if let Some(bad) = f.sweep.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(field("fracture.sweep", format!("radius ratio {bad} outside (0, 1]")));
        }
        if self.output.grid.iter().any(|&n| n < 2) {
            return Err(field("output.grid", "needs at least 2 points per direction"));
        }
        let dom = self.domain()?;
        self.crack_geometry()?
            .validate(&dom)
            .map_err(|e| field("crack", e))?;
        if let Some(r) = &self.reference {
            if r.analytic.is_none() && r.k_i.is_none() && r.k_ii.is_none() {
                return Err(field("reference", "needs `analytic` or explicit `k_i`/`k_ii`"));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec<f64>, CliError> {
        DomainSpec::new(self.geometry.half_width, self.geometry.half_height).map_err(|e| field("geometry", e))
    }

    pub fn material(&self) -> Result<Material<f64>, CliError> {
        Material::new(self.material.young_modulus, self.material.poisson, self.material.regime)
            .map_err(|e| field("material", e))
    }

    pub fn crack_geometry(&self) -> Result<CrackGeometry<f64>, CliError> {
        let c = &self.crack;
        let angle = c.angle_deg.to_radians();
        if let Some(v) = &c.vertices {
            return Ok(CrackGeometry {
                vertices: v.iter().map(|p| C::new(p[0], p[1])).collect(),
                kind: c.kind,
            });
        }
        match c.kind {
            CrackKind::Center => {
                let ctr = c.center.unwrap_or([0.0, 0.0]);
                let a = c.half_length.ok_or_else(|| field("crack.half_length", "required for a center crack"))?;
                positive("crack.half_length", a)?;
                Ok(CrackGeometry::straight_center(C::new(ctr[0], ctr[1]), a, angle))
            }
            CrackKind::Edge => {
                let m = c.mouth.ok_or_else(|| field("crack.mouth", "required for an edge crack"))?;
                let l = c.length.ok_or_else(|| field("crack.length", "required for an edge crack"))?;
                positive("crack.length", l)?;
                Ok(CrackGeometry::straight_edge(C::new(m[0], m[1]), l, angle))
            }
        }
    }

    pub fn loads(&self) -> EdgeLoads<f64> {
        let free = EdgeCondition::Traction([0.0; 2]);
        let l = &self.loads;
        EdgeLoads {
            bottom: l.bottom.unwrap_or(free),
            right: l.right.unwrap_or(free),
            top: l.top.unwrap_or(free),
            left: l.left.unwrap_or(free),
        }
    }

    pub fn growth_config(&self) -> Result<GrowthConfig<f64>, CliError> {
        let f = &self.fracture;
        Ok(GrowthConfig {
            domain: self.domain()?,
            crack: self.crack_geometry()?,
            loads: self.loads(),
            material: self.material()?,
            network: self.network.clone(),
            schedule: TrainSchedule {
                seed: self.sampling.seed,
                ..self.training.clone()
            },
            n_train: self.sampling.n_train,
            n_test: self.sampling.n_test,
            criterion: f.criterion,
            da: f.da,
            n_steps: f.n_steps,
            r_over_a: f.r_over_a,
            n_quad: f.n_quad,
            enforce_gate: f.enforce_gate,
            k_ic: f.k_ic,
            k_iic: f.k_iic,
            tl_enabled: f.tl_enabled,
            gauge_weight: self.gauge_weight,
        })
    }

    /// Reference `(K_I, K_II)` per tip for the metrics output.
    pub fn reference_sifs(&self) -> Result<Option<(f64, f64)>, CliError> {
        let Some(r) = &self.reference else {
            return Ok(None);
        };
        let crack = self.crack_geometry()?;
        let a = kminn::fracture::crack_size(&crack);
        let b = self.geometry.half_width;
        let load = r.load.unwrap_or(1.0);
        let analytic = match r.analytic {
            Some(Analytic::TadaTension) => Some((kminn::reference::tada_sif_tension(load, a, b), true)),
            Some(Analytic::TadaShear) => Some((kminn::reference::tada_sif_shear(load, a, b), false)),
            None => None,
        };
        let (mut k1, mut k2) = (0.0, 0.0);
        if let Some((k, mode_one)) = analytic {
            let k = k.map_err(|e| field("reference", e))?;
            if mode_one {
                k1 = k;
            } else {
                k2 = k;
            }
        }
        Ok(Some((r.k_i.unwrap_or(k1), r.k_ii.unwrap_or(k2))))
    }

    /// Short stable digest of the effective configuration. The output
    /// directory is left out so a run can be resumed elsewhere.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
