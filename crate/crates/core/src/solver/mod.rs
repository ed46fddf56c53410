//! Time integration of the coupled fluid-film / beam system on the mapped
//! reference rectangle `(0, L) x (0, 1)`, `y = h(x, t) z`.

pub mod beam;
pub mod coupling;
pub mod fluid;
pub mod init;
pub mod run;

pub use beam::{beam_energies, beam_step, BeamState, BeamStepReport};
pub use coupling::{coupled_step, detect_contact, CouplingConfig, SimState, StepReport};
pub use fluid::{fluid_step, traction_on_beam, FluidState, FluidStepReport, MacGrid, Metric};
pub use init::{regularize_initial_data, validate_initial_data, InitialData};
pub use run::{run, RunOutcome, Sample, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Fluid density (mass per area).
    pub rho_f: f64,
    /// Beam density (mass per length).
    pub rho_s: f64,
    /// Fluid viscosity.
    pub mu: f64,
    /// Bending stiffness; must be positive.
    pub alpha: f64,
    /// Tension coefficient.
    pub beta: f64,
    /// Structural damping; the parameter swept towards zero.
    pub gamma: f64,
    /// Period.
    pub length: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if self.rho_f <= 0.0 || self.rho_s <= 0.0 || self.mu <= 0.0 {
            return Err(Error::invalid("densities and viscosity must be positive"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::invalid("bending stiffness must be positive"));
        }
        if self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::invalid("tension and damping must be nonnegative"));
        }
        if self.length <= 0.0 {
            return Err(Error::invalid("period must be positive"));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

/// Contact handling policy at `min h <= eps_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPolicy {
    /// Stop the run and record the event (default).
    Halt,
    /// Record the event and stop stepping the fluid.
    FlagAndStopFluid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    /// Argmin node of the interface height.
    pub node: usize,
    pub min_height: f64,
    pub policy: ContactPolicy,
}
