//! Experiment configuration: a single TOML file describing the geometry,
//! the lattice, the potential suite, the probe set, and optional tolerance
//! overrides. Loading returns the parsed config together with a hash of the
//! raw file bytes for report provenance.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cgo::AxialCutoff;
use crate::error::{CgoError, Result};
use crate::fields::{PotentialSpec, ScalarSpec};
use crate::geometry::CrossSection;
use crate::solver::SolveParams;
use crate::tol;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SectionConfig {
    Disk {
        radius: f64,
        segments: usize,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h_plane: f64,
    pub h_axial: f64,
    pub half_length: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub theta0: [f64; 2],
    pub eps: f64,
    pub xi: Vec<[f64; 3]>,
    /// Number of random frames exercised by the frame stage.
    #[serde(default = "default_frames")]
    pub frames: usize,
}

fn default_frames() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    #[serde(default = "default_plateau")]
    pub plateau: f64,
    #[serde(default = "default_support")]
    pub support: f64,
}

fn default_plateau() -> f64 {
    1.0
}

fn default_support() -> f64 {
    2.0
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self {
            plateau: default_plateau(),
            support: default_support(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    pub a1: PotentialSpec,
    pub a2: PotentialSpec,
    pub q1: ScalarSpec,
    pub q2: ScalarSpec,
    /// Gradient perturbation used for the null-recovery and gauge stages.
    pub gauge: PotentialSpec,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    /// Explicit measured segment indices. When absent the set is generated
    /// from the probe sweep: all shadowed segments plus `margin` neighbors
    /// on each side.
    #[serde(default)]
    pub measured: Option<Vec<usize>>,
    #[serde(default = "default_margin")]
    pub margin: usize,
}

fn default_margin() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Worker threads for per-frequency stages; 0 defers to the
    /// `CGO_WAVEGUIDE_JOBS` environment variable, then to 1.
    #[serde(default)]
    pub jobs: usize,
}

/// Optional overrides for the pinned check tolerances. Anything left unset
/// uses the library default.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub frame_orthonormality: Option<f64>,
    pub mollifier_mass: Option<f64>,
    pub mollify_grad_slope_max: Option<f64>,
    pub dbar_order_min: Option<f64>,
    pub phase_decay_slope_max: Option<f64>,
    pub phase_sup_spread_max: Option<f64>,
    pub fourier_identity_rel: Option<f64>,
    pub fourier_refine_factor: Option<f64>,
    pub remainder_decay_slope_max: Option<f64>,
    pub pde_residual_c: Option<f64>,
    pub fit_drift_max: Option<f64>,
    pub carleman_q_factor: Option<f64>,
    pub recovery_signal_rel: Option<f64>,
    pub recovery_null_rel: Option<f64>,
    pub gauge_refine_ratio_max: Option<f64>,
    pub same_nodes: Option<f64>,
    pub conjugate_symmetry: Option<f64>,
    pub solver_rel_residual: Option<f64>,
}

/// Concrete tolerances after applying overrides.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub frame_orthonormality: f64,
    pub mollifier_mass: f64,
    pub mollify_grad_slope_max: f64,
    pub dbar_order_min: f64,
    pub phase_decay_slope_max: f64,
    pub phase_sup_spread_max: f64,
    pub fourier_identity_rel: f64,
    pub fourier_refine_factor: f64,
    pub remainder_decay_slope_max: f64,
    pub pde_residual_c: f64,
    pub fit_drift_max: f64,
    pub carleman_q_factor: f64,
    pub recovery_signal_rel: f64,
    pub recovery_null_rel: f64,
    pub gauge_refine_ratio_max: f64,
    pub same_nodes: f64,
    pub conjugate_symmetry: f64,
    pub solver_rel_residual: f64,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        Tolerances {
            frame_orthonormality: self.frame_orthonormality.unwrap_or(tol::FRAME_ORTHONORMALITY),
            mollifier_mass: self.mollifier_mass.unwrap_or(tol::MOLLIFIER_MASS),
            mollify_grad_slope_max: self
                .mollify_grad_slope_max
                .unwrap_or(tol::MOLLIFY_GRAD_SLOPE_MAX),
            dbar_order_min: self.dbar_order_min.unwrap_or(tol::DBAR_ORDER_MIN),
            phase_decay_slope_max: self
                .phase_decay_slope_max
                .unwrap_or(tol::PHASE_DECAY_SLOPE_MAX),
            phase_sup_spread_max: self
                .phase_sup_spread_max
                .unwrap_or(tol::PHASE_SUP_SPREAD_MAX),
            fourier_identity_rel: self
                .fourier_identity_rel
                .unwrap_or(tol::FOURIER_IDENTITY_REL),
            fourier_refine_factor: self
                .fourier_refine_factor
                .unwrap_or(tol::FOURIER_REFINE_FACTOR),
            remainder_decay_slope_max: self
                .remainder_decay_slope_max
                .unwrap_or(tol::REMAINDER_DECAY_SLOPE_MAX),
            pde_residual_c: self.pde_residual_c.unwrap_or(tol::PDE_RESIDUAL_C),
            fit_drift_max: self.fit_drift_max.unwrap_or(tol::FIT_DRIFT_MAX),
            carleman_q_factor: self.carleman_q_factor.unwrap_or(tol::CARLEMAN_Q_FACTOR),
            recovery_signal_rel: self.recovery_signal_rel.unwrap_or(tol::RECOVERY_SIGNAL_REL),
            recovery_null_rel: self.recovery_null_rel.unwrap_or(tol::RECOVERY_NULL_REL),
            gauge_refine_ratio_max: self
                .gauge_refine_ratio_max
                .unwrap_or(tol::GAUGE_REFINE_RATIO_MAX),
            same_nodes: self.same_nodes.unwrap_or(tol::SAME_NODES),
            conjugate_symmetry: self.conjugate_symmetry.unwrap_or(tol::CONJUGATE_SYMMETRY),
            solver_rel_residual: self.solver_rel_residual.unwrap_or(tol::SOLVER_REL_RESIDUAL),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub section: SectionConfig,
    pub grid: GridConfig,
    /// Mollification / frequency scales, ascending.
    pub ladder: Vec<f64>,
    pub probe: ProbeConfig,
    #[serde(default)]
    pub cutoff: CutoffConfig,
    pub potentials: PotentialsConfig,
    #[serde(default)]
    pub partial: PartialConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

impl ExperimentConfig {
    /// Parses and validates a config file; the second return value is the
    /// SHA-256 of the raw bytes, hex-encoded.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)
            .map_err(|e| CgoError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CgoError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| CgoError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        let hash = hex_digest(&bytes);
        Ok((cfg, hash))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.section {
            SectionConfig::Disk { radius, segments } => {
                if !(*radius > 0.0) {
                    return Err(CgoError::Config("section.radius must be positive".into()));
                }
                if *segments < 8 {
                    return Err(CgoError::Config(
                        "section.segments must be at least 8".into(),
                    ));
                }
            }
            SectionConfig::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(CgoError::Config(
                        "section.vertices needs at least 3 points".into(),
                    ));
                }
            }
        }
        if !(self.grid.h_plane > 0.0) || !(self.grid.h_axial > 0.0) {
            return Err(CgoError::Config("grid spacings must be positive".into()));
        }
        if !(self.grid.half_length > 0.0) {
            return Err(CgoError::Config("grid.half_length must be positive".into()));
        }
        if self.ladder.is_empty() {
            return Err(CgoError::Config("ladder must not be empty".into()));
        }
        for w in self.ladder.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CgoError::Config("ladder must be strictly ascending".into()));
            }
        }
        if self.ladder.iter().any(|&r| !(r > 0.0)) {
            return Err(CgoError::Config("ladder scales must be positive".into()));
        }
        if self.probe.xi.is_empty() {
            return Err(CgoError::Config("probe.xi must not be empty".into()));
        }
        for xi in &self.probe.xi {
            if xi[2] == 0.0 {
                return Err(CgoError::Config(format!(
                    "probe frequency [{}, {}, {}] has zero axial component",
                    xi[0], xi[1], xi[2]
                )));
            }
        }
        if !(self.probe.eps > 0.0) {
            return Err(CgoError::Config("probe.eps must be positive".into()));
        }
        if !(self.cutoff.plateau > 0.0) || !(self.cutoff.support > self.cutoff.plateau) {
            return Err(CgoError::Config(
                "cutoff needs 0 < plateau < support".into(),
            ));
        }
        Ok(())
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        match &self.section {
            SectionConfig::Disk { radius, segments } => CrossSection::disk(*radius, *segments),
            SectionConfig::Polygon { vertices } => CrossSection::from_polygon(vertices.clone()),
        }
    }

    pub fn axial_cutoff(&self) -> AxialCutoff {
        AxialCutoff {
            plateau: self.cutoff.plateau,
            support: self.cutoff.support,
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            rel_tol: self.tolerances.resolve().solver_rel_residual,
            ..SolveParams::default()
        }
    }

    /// Worker count after applying the environment fallback.
    pub fn jobs(&self) -> usize {
        resolve_jobs(self.run.jobs)
    }
}

/// Environment variable consulted when no explicit job count is given.
pub const JOBS_ENV: &str = "CGO_WAVEGUIDE_JOBS";

pub fn resolve_jobs(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(1)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
    }
    s
}
