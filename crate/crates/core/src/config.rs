//! Experiment configuration.
//!
//! Configs are TOML files whose keys mirror [`ExperimentConfig`]. Every
//! section is optional; omitted values fall back to the desk-scale defaults
//! documented on each field. A minimal file:
//!
//! ```toml
//! final_time = 1.0
//! lambda_weight = 100.0
//!
//! [networks.source]
//! widths = [20, 20, 20]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{linspace, Coefficients, Edge, SpaceTimeGrid, SpatialMesh};
use crate::losses::BoundaryDerivative;
use crate::synth::SourceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            x: [0.0, 1.0],
            y: [0.0, 1.0],
        }
    }
}

/// Hidden-layer widths of one network; inputs `(x, y, t)` and the scalar
/// output are implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            widths: vec![20, 20, 20],
            activation: Activation::Tanh,
        }
    }
}

impl NetworkSpec {
    /// Full layer chain `[3, hidden.., 1]`.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.widths.len() + 2);
        w.push(3);
        w.extend_from_slice(&self.widths);
        w.push(1);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Networks {
    pub excitation: NetworkSpec,
    pub source: NetworkSpec,
    pub emission: NetworkSpec,
}

/// Collocation counts per epoch. `n_sb` is the total over all four edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationCounts {
    pub n_int: usize,
    pub n_sb: usize,
    pub n_tb: usize,
    pub n_d: usize,
}

impl Default for CollocationCounts {
    fn default() -> Self {
        Self {
            n_int: 500,
            n_sb: 2000,
            n_tb: 500,
            n_d: 500,
        }
    }
}

/// Epoch counts for excitation (`k1`) and inversion (`k2`) training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Epochs {
    pub k1: usize,
    pub k2: usize,
}

impl Default for Epochs {
    fn default() -> Self {
        Self {
            k1: 20_000,
            k2: 10_000,
        }
    }
}

/// Optional per-network initial learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RateOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emission: Option<f64>,
}

/// Step decay: `rate(e) = initial_rate · decay_factor^⌊e / decay_interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub initial_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: usize,
    #[serde(default)]
    pub overrides: RateOverrides,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            initial_rate: 1e-3,
            decay_factor: 0.1,
            decay_interval: 20_000,
            overrides: RateOverrides::default(),
        }
    }
}

/// Resolution of the base finite-difference grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 33,
            ny: 33,
            nt: 65,
        }
    }
}

fn default_final_time() -> f64 {
    1.0
}
fn default_k_time_mesh() -> usize {
    8
}
fn default_noise() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    100.0
}
fn default_gamma() -> Vec<Edge> {
    Edge::ALL.to_vec()
}
fn default_eps_floor() -> f64 {
    1e-3
}
fn default_refinement() -> usize {
    2
}
fn default_test_mesh() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: Domain,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    #[serde(default)]
    pub coefficients: Coefficients,
    /// Edges making up the measurement set Γ. Defaults to the full boundary.
    #[serde(default = "default_gamma")]
    pub gamma_spec: Vec<Edge>,
    /// Number of intervals of the semi-discrete source time mesh.
    #[serde(default = "default_k_time_mesh")]
    pub k_time_mesh: usize,
    #[serde(default = "default_noise")]
    pub noise_delta: f64,
    #[serde(default)]
    pub networks: Networks,
    #[serde(default = "default_lambda")]
    pub lambda_weight: f64,
    /// Derivative of the Robin residual used by the `sb1`/`sb3` terms.
    #[serde(default)]
    pub boundary_derivative: BoundaryDerivative,
    #[serde(default)]
    pub collocation: CollocationCounts,
    #[serde(default)]
    pub epochs: Epochs,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    /// Ground-truth fluorophore source.
    #[serde(default)]
    pub source: SourceKind,
    /// Division floor for source recovery, relative to `max |u_e|`.
    #[serde(default = "default_eps_floor")]
    pub eps_floor: f64,
    /// Refinement factor of the data-generation grid over `grid`.
    #[serde(default = "default_refinement")]
    pub data_refinement: usize,
    /// Points per axis of the evaluation lattice over `Ω × [0, T]`.
    #[serde(default = "default_test_mesh")]
    pub test_mesh: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: Domain::default(),
            final_time: default_final_time(),
            coefficients: Coefficients::default(),
            gamma_spec: default_gamma(),
            k_time_mesh: default_k_time_mesh(),
            noise_delta: default_noise(),
            networks: Networks::default(),
            lambda_weight: default_lambda(),
            boundary_derivative: BoundaryDerivative::default(),
            collocation: CollocationCounts::default(),
            epochs: Epochs::default(),
            schedule: ScheduleSpec::default(),
            rng_seed: 0,
            grid: GridSpec::default(),
            source: SourceKind::default(),
            eps_floor: default_eps_floor(),
            data_refinement: default_refinement(),
            test_mesh: default_test_mesh(),
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{field} must be positive, got {v}")))
    }
}

fn nonneg(field: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{field} must be nonnegative, got {v}")))
    }
}

fn at_least(field: &'static str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(field, format!("{field} must be at least {min}, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.x[1] > d.x[0]) || !(d.y[1] > d.y[0]) {
            return Err(Error::config("domain", "domain bounds must be increasing"));
        }
        positive("final_time", self.final_time)?;
        let c = &self.coefficients;
        positive("c", c.c)?;
        positive("kappa", c.kappa)?;
        positive("mu_a", c.mu_a)?;
        positive("beta", c.beta)?;
        if self.gamma_spec.is_empty() {
            return Err(Error::config("gamma_spec", "gamma_spec must name at least one edge"));
        }
        at_least("k_time_mesh", self.k_time_mesh, 1)?;
        nonneg("noise_delta", self.noise_delta)?;
        nonneg("lambda_weight", self.lambda_weight)?;
        for (field, net) in [
            ("networks.excitation", &self.networks.excitation),
            ("networks.source", &self.networks.source),
            ("networks.emission", &self.networks.emission),
        ] {
            if net.widths.is_empty() || net.widths.contains(&0) {
                return Err(Error::config(field, "hidden widths must be nonempty and positive"));
            }
        }
        let n = &self.collocation;
        at_least("n_int", n.n_int, 1)?;
        at_least("n_sb", n.n_sb, 1)?;
        at_least("n_tb", n.n_tb, 1)?;
        at_least("n_d", n.n_d, 1)?;
        let s = &self.schedule;
        positive("initial_rate", s.initial_rate)?;
        if !(s.decay_factor > 0.0 && s.decay_factor <= 1.0) {
            return Err(Error::config("decay_factor", "decay_factor must lie in (0, 1]"));
        }
        at_least("decay_interval", s.decay_interval, 1)?;
        for r in [s.overrides.excitation, s.overrides.source, s.overrides.emission]
            .into_iter()
            .flatten()
        {
            positive("overrides", r)?;
        }
        at_least("nx", self.grid.nx, 3)?;
        at_least("ny", self.grid.ny, 3)?;
        at_least("nt", self.grid.nt, 2)?;
        positive("eps_floor", self.eps_floor)?;
        at_least("data_refinement", self.data_refinement, 1)?;
        at_least("test_mesh", self.test_mesh, 2)?;
        if let SourceKind::Constant { value } = self.source {
            if !value.is_finite() {
                return Err(Error::config("source", "constant source must be finite"));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<SpatialMesh> {
        SpatialMesh::new(self.grid.nx, self.grid.ny, self.domain.x, self.domain.y)
    }

    /// Base finite-difference grid (stability checks, oracles).
    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.mesh()?, self.grid.nt, self.final_time, &self.gamma_spec)
    }

    /// Grid on which synthetic measurements are generated.
    pub fn data_grid(&self) -> Result<SpaceTimeGrid> {
        self.grid()?.refined(self.data_refinement)
    }

    /// Uniform semi-discrete time mesh `t_0 = 0 < … < t_K = T`.
    pub fn time_mesh(&self) -> Vec<f64> {
        linspace(0.0, self.final_time, self.k_time_mesh + 1)
    }
}

/// Reads and validates a TOML experiment config.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}
