//! Run configuration: a single self-describing TOML file; command-line flags
//! only override. Validation failures name the offending field path.

use std::path::Path;

use diracopt_core::geometry::{FactorForm, SpinStructure, SurfaceKind};
use diracopt_core::variation::{default_p_schedule, MinimizeParams, WeightRule};
use serde::{Deserialize, Serialize};

/// Error carrying the config field path, mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: String,
    pub lattice: Option<[[f64; 2]; 2]>,
    pub spin_structure: Option<[f64; 2]>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            kind: "sphere".into(),
            lattice: None,
            spin_structure: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    /// Sphere: cutoff degree (max |μ|); torus: max |μ| in 1/length.
    pub cutoff: f64,
    pub grid_resolution: u32,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            cutoff: 6.0,
            grid_resolution: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub k: usize,
    pub p_schedule: Vec<f64>,
    /// Restrict the run to colatitude profiles and use the sector solver
    /// (sphere only).
    pub axisymmetric: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            k: 2,
            p_schedule: default_p_schedule(),
            axisymmetric: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub theta: f64,
    pub el_tol: f64,
    pub val_tol: f64,
    pub max_iters: usize,
    pub delta_schedule: Vec<f64>,
    pub radii: Vec<f64>,
    pub zero_tol: f64,
    pub weight_rule: WeightRule,
    pub cluster_tol: f64,
    pub plateau_tol: f64,
    pub concentration_persist: usize,
    pub subrange_start: Option<usize>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let p = MinimizeParams::default();
        OptimizerConfig {
            theta: p.theta,
            el_tol: p.el_tol,
            val_tol: p.val_tol,
            max_iters: p.max_iters,
            delta_schedule: p.delta_schedule,
            radii: p.radii,
            zero_tol: p.zero_tol,
            weight_rule: p.weight_rule,
            cluster_tol: p.cluster_tol,
            plateau_tol: p.plateau_tol,
            concentration_persist: p.concentration_persist,
            subrange_start: None,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub run_id: Option<String>,
    pub checkpoint_every: usize,
    pub eigenvectors: bool,
    pub export_basis: bool,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "runs".into(),
            run_id: None,
            checkpoint_every: 25,
            eigenvectors: false,
            export_basis: false,
            formats: vec!["text".into(), "json".into()],
        }
    }
}

fn default_init() -> FactorForm {
    FactorForm::Constant { value: 1.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub surface: SurfaceConfig,
    pub basis: BasisConfig,
    pub problem: ProblemConfig,
    pub optimizer: OptimizerConfig,
    pub init: FactorForm,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: 1,
            surface: SurfaceConfig::default(),
            basis: BasisConfig::default(),
            problem: ProblemConfig::default(),
            optimizer: OptimizerConfig::default(),
            init: default_init(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| err("config", e.to_string()))?;
        Ok(cfg)
    }

    pub fn surface_kind(&self) -> Result<SurfaceKind, ConfigError> {
        match self.surface.kind.as_str() {
            "sphere" => Ok(SurfaceKind::RoundSphere),
            "torus" => Ok(SurfaceKind::FlatTorus),
            other => Err(err(
                "surface.kind",
                format!("expected \"sphere\" or \"torus\", got {other:?}"),
            )),
        }
    }

    pub fn spin_structure(&self) -> Result<SpinStructure, ConfigError> {
        let shifts = self
            .surface
            .spin_structure
            .ok_or_else(|| err("surface.spin_structure", "required for the torus"))?;
        SpinStructure::new(shifts[0], shifts[1])
            .map_err(|e| err("surface.spin_structure", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != 1 {
            return Err(err(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        let kind = self.surface_kind()?;
        if kind == SurfaceKind::FlatTorus {
            if self.surface.lattice.is_none() {
                return Err(err("surface.lattice", "required for the torus"));
            }
            self.spin_structure()?;
            if self.problem.axisymmetric {
                return Err(err(
                    "problem.axisymmetric",
                    "the sector solver applies to the sphere only",
                ));
            }
        }
        if self.basis.cutoff <= 0.0 {
            return Err(err("basis.cutoff", "must be positive"));
        }
        if kind == SurfaceKind::RoundSphere && self.basis.cutoff.fract() != 0.0 {
            return Err(err(
                "basis.cutoff",
                "sphere cutoff is a whole eigenvalue degree",
            ));
        }
        if self.basis.grid_resolution == 0 {
            return Err(err("basis.grid_resolution", "must be positive"));
        }
        if self.problem.k == 0 {
            return Err(err("problem.k", "eigenvalue index starts at 1"));
        }
        if self.problem.p_schedule.is_empty()
            || self.problem.p_schedule.iter().any(|&p| p < 2.0)
            || !self.problem.p_schedule.windows(2).all(|w| w[1] < w[0])
        {
            return Err(err(
                "problem.p_schedule",
                "must strictly decrease towards the critical exponent 2",
            ));
        }
        for (name, value) in [
            ("optimizer.theta", self.optimizer.theta),
            ("optimizer.el_tol", self.optimizer.el_tol),
            ("optimizer.val_tol", self.optimizer.val_tol),
            ("optimizer.zero_tol", self.optimizer.zero_tol),
            ("optimizer.cluster_tol", self.optimizer.cluster_tol),
            ("optimizer.plateau_tol", self.optimizer.plateau_tol),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(err(name, "must be positive"));
            }
        }
        if self.optimizer.theta > 1.0 {
            return Err(err("optimizer.theta", "damping must lie in (0, 1]"));
        }
        if self.optimizer.delta_schedule.is_empty()
            || self.optimizer.delta_schedule.iter().any(|&d| d <= 0.0)
            || !self
                .optimizer
                .delta_schedule
                .windows(2)
                .all(|w| w[1] < w[0])
        {
            return Err(err(
                "optimizer.delta_schedule",
                "floors must be positive and strictly decreasing",
            ));
        }
        if self.optimizer.radii.iter().any(|&r| r <= 0.0) {
            return Err(err("optimizer.radii", "radii must be positive"));
        }
        if self.output.checkpoint_every == 0 {
            return Err(err("output.checkpoint_every", "must be positive"));
        }
        Ok(())
    }

    pub fn minimize_params(&self) -> MinimizeParams {
        MinimizeParams {
            theta: self.optimizer.theta,
            el_tol: self.optimizer.el_tol,
            val_tol: self.optimizer.val_tol,
            max_iters: self.optimizer.max_iters,
            delta_schedule: self.optimizer.delta_schedule.clone(),
            radii: self.optimizer.radii.clone(),
            zero_tol: self.optimizer.zero_tol,
            weight_rule: self.optimizer.weight_rule,
            cluster_tol: self.optimizer.cluster_tol,
            plateau_tol: self.optimizer.plateau_tol,
            concentration_persist: self.optimizer.concentration_persist,
            subrange_start: self.optimizer.subrange_start,
            ..MinimizeParams::default()
        }
    }

    /// Derived run id: explicit setting or surface/k/seed fingerprint.
    pub fn run_id(&self) -> String {
        self.output.run_id.clone().unwrap_or_else(|| {
            format!(
                "{}-k{}-seed{}",
                self.surface.kind, self.problem.k, self.optimizer.seed
            )
        })
    }

    /// Output root: DIRACOPT_OUT overrides the configured directory.
    pub fn output_root(&self) -> std::path::PathBuf {
        std::env::var("DIRACOPT_OUT")
            .map(std::path::PathBuf::from)
            .unwrap_or_else(|_| std::path::PathBuf::from(&self.output.directory))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn roundtrip_is_exact() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        let again = toml::to_string_pretty(&back).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn negative_cutoff_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.basis.cutoff = -3.0;
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.field, "basis.cutoff");
    }

    #[test]
    fn torus_requires_lattice() {
        let mut cfg = RunConfig::default();
        cfg.surface.kind = "torus".into();
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.field, "surface.lattice");
    }
}
