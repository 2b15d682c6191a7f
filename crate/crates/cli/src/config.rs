//! Experiment configuration: JSON schema and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use robinlab::checks::default_t_grid;
use robinlab::measures::{Kernel, MeasurePairSpec, PositionedAtom, PositionedPair};
use robinlab::mesh::MeshSpec;
use serde::{Deserialize, Serialize};

/// Dense experiments factor `n × n` matrices; beyond this the run would take
/// far longer than a desk-scale study should.
pub const MAX_DENSE_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sandwich,
    Eigen,
    Capacity,
    Closability,
    Convergence,
    Gamma,
}

impl Experiment {
    fn is_dense(self) -> bool {
        !matches!(self, Experiment::Capacity | Experiment::Closability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    #[serde(default)]
    pub density: f64,
    #[serde(default)]
    pub atoms: Vec<PositionedAtom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    #[serde(default = "zero_kernel")]
    pub kernel: Kernel,
    #[serde(default)]
    pub pairs: Vec<PositionedPair>,
}

fn zero_kernel() -> Kernel {
    Kernel::Zero
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig { density: 0.0, atoms: Vec::new() }
    }
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig { kernel: Kernel::Zero, pairs: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Ones,
    Zero,
    Random { seed: u64 },
}

/// Reference operator for the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitChoice {
    /// Zero on the whole boundary; needs measures charging every boundary node.
    Dirichlet,
    /// Zero on the boundary nodes charged by `κ + θ̂`, free elsewhere.
    ChargedNodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: MeshSpec,
    #[serde(default)]
    pub kappa: KappaConfig,
    #[serde(default)]
    pub theta: ThetaConfig,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_scalings")]
    pub scalings: Vec<f64>,
    #[serde(default = "default_lam")]
    pub lam: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_forcing")]
    pub forcing: Forcing,
    /// Boundary arc positions whose capacity is studied.
    #[serde(default = "default_points")]
    pub points: Vec<f64>,
    #[serde(default = "default_limit")]
    pub limit: LimitChoice,
    /// Number of eigenvalues tabulated by the eigen experiment.
    #[serde(default = "default_eigen_count")]
    pub eigen_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_scalings() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1000.0]
}
fn default_lam() -> f64 {
    1.0
}
fn default_levels() -> usize {
    5
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_forcing() -> Forcing {
    Forcing::Ones
}
fn default_points() -> Vec<f64> {
    vec![0.0]
}
fn default_limit() -> LimitChoice {
    LimitChoice::Dirichlet
}
fn default_eigen_count() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path to the offending field, empty for whole-document errors.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        err(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn nonneg(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(err(path, format!("must be finite and nonnegative, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(err(path, format!("must be finite and positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn measures(&self) -> MeasurePairSpec {
        MeasurePairSpec {
            kappa_density: self.kappa.density,
            kappa_atoms: self.kappa.atoms.clone(),
            kernel: self.theta.kernel,
            pairs: self.theta.pairs.clone(),
        }
    }

    pub fn theta_is_zero(&self) -> bool {
        self.theta.kernel.is_zero() && self.theta.pairs.iter().all(|p| p.weight == 0.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n_nodes = match self.domain {
            MeshSpec::Interval { n_cells, length } => {
                if n_cells < 2 {
                    return Err(err("domain.interval.n_cells", format!("need at least 2 cells, got {n_cells}")));
                }
                positive("domain.interval.length", length)?;
                n_cells + 1
            }
            MeshSpec::Rectangle { nx, ny, lx, ly } => {
                if nx < 2 {
                    return Err(err("domain.rectangle.nx", format!("need at least 2 cells, got {nx}")));
                }
                if ny < 2 {
                    return Err(err("domain.rectangle.ny", format!("need at least 2 cells, got {ny}")));
                }
                positive("domain.rectangle.lx", lx)?;
                positive("domain.rectangle.ly", ly)?;
                (nx + 1) * (ny + 1)
            }
        };
        if self.experiment.is_dense() && n_nodes > MAX_DENSE_NODES {
            return Err(err(
                "domain",
                format!("{n_nodes} nodes exceeds the dense-solver limit of {MAX_DENSE_NODES} for this experiment"),
            ));
        }
        let position = |path: String, p: f64| -> Result<(), ConfigError> {
            match self.domain {
                MeshSpec::Interval { length, .. } if !(0.0..=length).contains(&p) => {
                    Err(err(path, format!("must lie in [0, {length}], got {p}")))
                }
                _ if !p.is_finite() => Err(err(path, format!("must be finite, got {p}"))),
                _ => Ok(()),
            }
        };

        nonneg("kappa.density", self.kappa.density)?;
        for (i, a) in self.kappa.atoms.iter().enumerate() {
            position(format!("kappa.atoms[{i}].position"), a.position)?;
            nonneg(&format!("kappa.atoms[{i}].weight"), a.weight)?;
        }
        self.theta.kernel.validate().map_err(|e| err("theta.kernel", e.to_string()))?;
        for (i, p) in self.theta.pairs.iter().enumerate() {
            position(format!("theta.pairs[{i}].a"), p.a)?;
            position(format!("theta.pairs[{i}].b"), p.b)?;
            nonneg(&format!("theta.pairs[{i}].weight"), p.weight)?;
        }

        positive("tolerance", self.tolerance)?;
        match self.experiment {
            Experiment::Sandwich => {
                if self.t_grid.is_empty() {
                    return Err(err("t_grid", "must not be empty"));
                }
                for (i, &t) in self.t_grid.iter().enumerate() {
                    nonneg(&format!("t_grid[{i}]"), t)?;
                }
            }
            Experiment::Eigen => {
                if self.eigen_count == 0 {
                    return Err(err("eigen_count", "must be at least 1"));
                }
            }
            Experiment::Capacity => {
                if self.levels < 2 {
                    return Err(err("levels", format!("a refinement study needs at least 2 levels, got {}", self.levels)));
                }
                if self.points.is_empty() {
                    return Err(err("points", "must not be empty"));
                }
                for (i, &p) in self.points.iter().enumerate() {
                    position(format!("points[{i}]"), p)?;
                }
            }
            Experiment::Closability => {
                if self.levels < 2 {
                    return Err(err("levels", format!("the probe needs at least 2 levels, got {}", self.levels)));
                }
            }
            Experiment::Convergence => {
                if self.scalings.is_empty() {
                    return Err(err("scalings", "must not be empty"));
                }
                for (i, &c) in self.scalings.iter().enumerate() {
                    nonneg(&format!("scalings[{i}]"), c)?;
                }
                positive("lam", self.lam)?;
            }
            Experiment::Gamma => positive("lam", self.lam)?,
        }
        // fine levels of a refinement study quadruple the node count each time in 2D
        if matches!(self.experiment, Experiment::Capacity | Experiment::Closability) {
            let growth = if matches!(self.domain, MeshSpec::Rectangle { .. }) { 4usize } else { 2 };
            let finest = (1..self.levels).try_fold(n_nodes, |n, _| n.checked_mul(growth));
            if finest.is_none_or(|n| n > 4_000_000) {
                return Err(err("levels", "finest refinement level would exceed 4 million nodes"));
            }
        }
        Ok(())
    }
}
