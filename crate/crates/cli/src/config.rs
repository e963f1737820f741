//! Run configuration: a single TOML document.
//!
//! ```toml
//! seed = 7
//! scheme = "shot_continuous"
//! beta = 0.0
//!
//! [model]
//! x0 = 1.0
//! horizon = 1.0
//! coefficient = { kind = "linear" }
//!
//! [levy]
//! drift = 0.05
//! sigma = 0.2
//! measure = { kind = "compound_poisson", rate = 1.0, jumps = { kind = "constant", value = 0.1 } }
//!
//! [functional]
//! kind = "linear"
//! alpha = 1.0
//! payoff = { kind = "identity" }
//! map = { components = [{ kind = "marginal", time = 1.0 }] }
//!
//! [schedule]
//! m = 2
//! k_max = 8
//! strategy = { kind = "theta_matched" }
//!
//! [plan]
//! delta = 0.02
//! ```
//!
//! Optional sections `[levels]`, `[clt]`, `[tune]` and `[rho]` configure the
//! corresponding commands. Unknown keys anywhere are rejected.

use std::fmt::Write as _;
use std::path::Path;

use levymlmc::engine::ScheduleSpec;
use levymlmc::{FunctionalSpec, LevyTriplet, OracleMethod, Scheme, SdeModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn default_scheme() -> Scheme {
    Scheme::ShotContinuous
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Relative cost of one coarse concatenation.
    #[serde(default)]
    pub beta: f64,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub model: SdeModel,
    pub levy: LevyTriplet,
    pub functional: FunctionalSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub levels: LevelsSection,
    #[serde(default)]
    pub clt: CltSection,
    #[serde(default)]
    pub tune: TuneSection,
    #[serde(default)]
    pub rho: RhoSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    pub n_pilot: u64,
}

impl Default for LevelsSection {
    fn default() -> Self {
        Self { n_pilot: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltSection {
    pub deltas: Vec<f64>,
    pub replications: usize,
    /// Known `E[F(X)]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    /// Accuracy of a reference run used when `reference` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_delta: Option<f64>,
    /// Known `ρ²` to compare the residual variance against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_sq: Option<f64>,
    /// Oracle used for `ρ²` when `rho_sq` is absent (settings from `[rho]`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleMethod>,
}

impl Default for CltSection {
    fn default() -> Self {
        Self {
            deltas: vec![0.08, 0.04, 0.02],
            replications: 200,
            reference: None,
            reference_delta: None,
            rho_sq: None,
            oracle: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    pub m_min: u32,
    pub m_max: u32,
    pub betas: Vec<f64>,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            m_min: 2,
            m_max: 10,
            betas: vec![0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RhoSection {
    pub methods: Vec<OracleMethod>,
    pub n_paths: u64,
    pub eps_sim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_sim: Option<f64>,
    /// Coarse level of the pair used by `level_empirical`.
    pub level: usize,
    /// Scheme for `level_empirical`; defaults to the run's scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_scheme: Option<Scheme>,
}

impl Default for RhoSection {
    fn default() -> Self {
        Self {
            methods: vec![
                OracleMethod::LimitSde,
                OracleMethod::PhiFormula,
                OracleMethod::LevelEmpirical,
            ],
            n_paths: 100_000,
            eps_sim: 1.0 / 1024.0,
            h_sim: None,
            level: 7,
            level_scheme: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration is always serialisable")
    }

    /// SHA-256 of the emitted configuration without the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let digest = Sha256::digest(canonical.emit().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
