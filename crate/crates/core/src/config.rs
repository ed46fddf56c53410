//! Run configuration: TOML with `[params]`, `[grid]`, `[initial]`,
//! `[coupling]`, `[contact]` and `[regularization]` blocks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solver::{ContactPolicy, CouplingConfig, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub nz: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot cadence in steps.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Container height bound; estimated from the initial energy when absent.
    #[serde(default)]
    pub container_height: Option<f64>,
}

fn default_snapshot_every() -> usize {
    1
}

/// Named initial profiles. `eta0 = amplitude * cos(2 pi mode x / L)` shaped
/// bumps; the initial fluid velocity is the divergence-free lift of `eta1`
/// plus an optional interior swirl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    /// "rest" | "bump" | "squeeze"
    pub profile: String,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_mode")]
    pub mode: usize,
    /// Amplitude of the initial beam velocity (mean free by construction).
    #[serde(default)]
    pub velocity_amplitude: f64,
    /// Amplitude of an extra solenoidal swirl inside the film.
    #[serde(default)]
    pub swirl_amplitude: f64,
}

fn default_mode() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig {
    /// Absolute halt tolerance on `min h`; when absent it defaults to
    /// `1e-6 * initial min height`.
    #[serde(default)]
    pub eps_c: Option<f64>,
    #[serde(default = "default_policy")]
    pub policy: ContactPolicy,
}

fn default_policy() -> ContactPolicy {
    ContactPolicy::Halt
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            eps_c: None,
            policy: ContactPolicy::Halt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// The lifting layer sits at this fraction of the initial minimum height.
    #[serde(default = "default_lambda_fraction")]
    pub lambda_fraction: f64,
}

fn default_true() -> bool {
    true
}

fn default_lambda_fraction() -> f64 {
    0.5
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig {
            enabled: true,
            lambda_fraction: 0.5,
        }
    }
}

fn default_coupling() -> CouplingConfig {
    CouplingConfig::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: Params,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.grid.nx < 8 || self.grid.nz < 4 {
            return Err(Error::Config("grid too small".into()));
        }
        if self.grid.dt <= 0.0 || self.grid.t_end <= 0.0 {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        if self.grid.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        match self.initial.profile.as_str() {
            "rest" | "bump" | "squeeze" => {}
            other => {
                return Err(Error::Config(format!("unknown initial profile '{other}'")));
            }
        }
        if !(0.0 < self.regularization.lambda_fraction
            && self.regularization.lambda_fraction < 1.0)
        {
            return Err(Error::Config("lambda_fraction must lie in (0, 1)".into()));
        }
        if let Some(eps) = self.contact.eps_c {
            if eps < 0.0 {
                return Err(Error::Config("eps_c must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
