//! Full runs: stepping loop, per-step invariant enforcement, snapshots,
//! contact handling.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::HeightTrajectory;
use crate::grid::Grid1;

use super::coupling::{coupled_step_hinted, detect_contact, SimState};
use super::fluid::{FluidState, FluidTols};
use super::init::{assemble_initial_data, regularize_initial_data, InitialData};
use super::{BeamState, ContactEvent, ContactPolicy};

/// One stored snapshot of a run, with the dissipation integrals accumulated
/// up to its time.
#[derive(Debug, Clone)]
pub struct Sample {
    pub time: f64,
    pub beam: BeamState,
    pub fluid: FluidState,
    pub cum_dissipation_fluid: f64,
    pub cum_dissipation_beam: f64,
    pub min_height: f64,
}

/// Aggregated per-step extrema over a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub steps: usize,
    pub max_abs_mean_eta_dot: f64,
    pub max_div_residual: f64,
    pub max_kinematic_mismatch: f64,
    pub max_coupling_iters: usize,
    pub max_cfl: f64,
    pub min_height: f64,
    pub clamped_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: RunConfig,
    pub config_hash: String,
    pub lambda: f64,
    pub container_height: f64,
    /// Energy of the (possibly smoothed) data the run started from.
    pub initial_energy: f64,
    /// Energy of the raw, unsmoothed data.
    pub raw_energy: f64,
    pub samples: Vec<Sample>,
    pub events: Vec<ContactEvent>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn beam_grid(&self) -> Grid1 {
        Grid1::new(self.config.grid.nx, self.config.params.length)
    }

    pub fn height_trajectory(&self) -> Result<HeightTrajectory> {
        HeightTrajectory::new(
            self.beam_grid(),
            self.container_height,
            self.samples.iter().map(|s| s.time).collect(),
            self.samples.iter().map(|s| s.beam.height()).collect(),
        )
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    /// The halting contact event, if any.
    pub contact: Option<ContactEvent>,
}

/// Advance a prepared state to `t_end`, recording snapshots. Used by both
/// fresh runs and resumes.
pub fn run_loop(
    config: &RunConfig,
    data: &InitialData,
    raw_energy: f64,
    start: SimState,
    start_diss: (f64, f64),
    tols: &FluidTols,
) -> Result<RunOutcome> {
    let dt_config = config.grid.dt;
    let t_end = config.grid.t_end;
    let eps_c = config
        .contact
        .eps_c
        .unwrap_or(1e-6 * data.sim.beam.min_height());
    let policy = config.contact.policy;

    let mut sim = start;
    let (mut cum_f, mut cum_b) = start_diss;
    let mut stats = StepStats {
        min_height: sim.beam.min_height(),
        ..Default::default()
    };
    let mut samples = vec![Sample {
        time: sim.time(),
        beam: sim.beam.clone(),
        fluid: sim.fluid.clone(),
        cum_dissipation_fluid: cum_f,
        cum_dissipation_beam: cum_b,
        min_height: sim.beam.min_height(),
    }];
    let mut events = Vec::new();
    let mut contact_halt = None;
    let mut fluid_frozen = false;

    let dx = config.params.length / config.grid.nx as f64;
    let dz = 1.0 / config.grid.nz as f64;

    let mut step = 0usize;
    let mut prev_eta_dot: Option<Vec<f64>> = None;
    while sim.time() < t_end - 1e-12 {
        // Contact guard before entering the fluid solve.
        if let Some(event) = detect_contact(&sim.beam, eps_c, policy) {
            events.push(event);
            match policy {
                ContactPolicy::Halt => {
                    contact_halt = Some(event);
                    break;
                }
                ContactPolicy::FlagAndStopFluid => {
                    fluid_frozen = true;
                }
            }
        }

        // Advective time-step clamp with a safety factor of one half.
        let speed = sim.fluid.max_speed();
        let mut dt = dt_config.min(t_end - sim.time());
        if speed > 0.0 {
            let dt_cfl = 0.5 * dx.min(sim.beam.min_height() * dz) / speed;
            if dt_cfl < dt {
                dt = dt_cfl;
                stats.clamped_steps += 1;
            }
        }

        let report = if fluid_frozen {
            // Contact was flagged: keep stepping the free beam only.
            let zero = vec![0.0; config.grid.nx];
            let (beam, beam_report) = super::beam_step(&sim.beam, &zero, dt, &config.params)?;
            let mut fluid = sim.fluid.clone();
            fluid.time = beam.time;
            sim = SimState { beam, fluid };
            super::StepReport {
                dissipation_beam: beam_report.dissipation,
                beam: beam_report,
                ..Default::default()
            }
        } else {
            // Linear extrapolation of the interface velocity as the seed.
            let hint: Option<Vec<f64>> = prev_eta_dot.as_ref().map(|prev| {
                sim.beam
                    .eta_dot
                    .iter()
                    .zip(prev)
                    .map(|(c, p)| 2.0 * c - p)
                    .collect()
            });
            prev_eta_dot = Some(sim.beam.eta_dot.clone());
            let (next, report) = coupled_step_hinted(
                &sim,
                dt,
                &config.params,
                &config.coupling,
                tols,
                None,
                hint.as_deref(),
            )?;
            sim = next;
            report
        };
        step += 1;

        // Per-step conservation enforcement.
        if report.mean_eta_dot.abs() > 1e-12 {
            return Err(Error::ConstraintViolation {
                what: "volume constraint (mean beam velocity)".into(),
                residual: report.mean_eta_dot.abs(),
                tolerance: 1e-12,
            });
        }
        cum_f += report.dissipation_fluid;
        cum_b += report.dissipation_beam;
        stats.steps += 1;
        stats.max_abs_mean_eta_dot = stats.max_abs_mean_eta_dot.max(report.mean_eta_dot.abs());
        stats.max_div_residual = stats.max_div_residual.max(report.fluid.div_residual);
        stats.max_kinematic_mismatch =
            stats.max_kinematic_mismatch.max(report.kinematic_mismatch);
        stats.max_coupling_iters = stats.max_coupling_iters.max(report.coupling_iters);
        stats.max_cfl = stats.max_cfl.max(report.fluid.cfl);
        stats.min_height = stats.min_height.min(sim.beam.min_height());

        let is_last = sim.time() >= t_end - 1e-12;
        if step % config.grid.snapshot_every == 0 || is_last {
            samples.push(Sample {
                time: sim.time(),
                beam: sim.beam.clone(),
                fluid: sim.fluid.clone(),
                cum_dissipation_fluid: cum_f,
                cum_dissipation_beam: cum_b,
                min_height: sim.beam.min_height(),
            });
        }
    }

    let trajectory = Trajectory {
        config: config.clone(),
        config_hash: config.hash(),
        lambda: data.lambda,
        container_height: data.container_height,
        initial_energy: data.energy,
        raw_energy,
        samples,
        events,
        stats,
    };
    Ok(RunOutcome {
        trajectory,
        contact: contact_halt,
    })
}

/// Assemble, smooth (for damped runs), validate and integrate a full run.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let tols = FluidTols::default();
    let raw = assemble_initial_data(config, &tols)?;
    let raw_energy = raw.energy;
    let data = if config.regularization.enabled && config.params.gamma > 0.0 {
        regularize_initial_data(&raw, config.params.gamma, config, &tols)?
    } else {
        raw
    };
    let start = data.sim.clone();
    run_loop(config, &data, raw_energy, start, (0.0, 0.0), &tols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn config(extra: &str) -> RunConfig {
        let text = format!(
            r#"
[params]
rho_f = 1.0
rho_s = 1.0
mu = 0.1
alpha = 0.02
beta = 0.5
gamma = 0.05
length = 1.0

[grid]
nx = 24
nz = 12
dt = 2e-3
t_end = 0.02

[initial]
profile = "rest"
{extra}
"#
        );
        RunConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn rest_run_is_constant() {
        let out = run(&config("")).unwrap();
        assert!(out.contact.is_none());
        let t = &out.trajectory;
        assert_eq!(t.stats.steps, 10);
        for s in &t.samples {
            assert_eq!(s.fluid.max_speed(), 0.0);
            assert!(s.beam.eta.iter().all(|v| *v == 0.0));
        }
        assert_eq!(t.stats.max_div_residual, 0.0);
    }

    #[test]
    fn bump_run_conserves_invariants() {
        let mut cfg = config("");
        cfg.initial.profile = "bump".into();
        cfg.initial.amplitude = -0.1;
        cfg.grid.t_end = 0.02;
        let out = run(&cfg).unwrap();
        let t = &out.trajectory;
        assert!(t.stats.max_abs_mean_eta_dot <= 1e-12);
        assert!(t.stats.max_div_residual <= 1e-10);
        assert!(t.stats.min_height > 0.0);
        // Volume conservation over the whole run.
        let v0 = crate::grid::mean(&t.samples[0].beam.eta);
        let v1 = crate::grid::mean(&t.final_sample().beam.eta);
        assert!((v1 - v0).abs() <= 1e-12 * t.stats.steps as f64 + 1e-15);
    }

    #[test]
    fn contact_halts_with_event() {
        let mut cfg = config("");
        cfg.params.gamma = 0.0;
        cfg.regularization.enabled = false;
        cfg.initial.profile = "squeeze".into();
        cfg.initial.amplitude = 0.0;
        cfg.initial.velocity_amplitude = -2.0;
        cfg.params.rho_s = 4.0;
        cfg.params.mu = 0.05;
        cfg.params.alpha = 2e-3;
        cfg.params.beta = 0.0;
        cfg.grid.t_end = 2.0;
        cfg.grid.dt = 2e-3;
        cfg.contact.eps_c = Some(0.3);
        let out = run(&cfg).unwrap();
        let event = out.contact.expect("squeeze run must reach contact");
        assert!(event.min_height <= 0.3);
        assert_eq!(out.trajectory.events.len(), 1);
        // Trajectory stops at the event.
        assert!(out.trajectory.final_sample().time < 2.0);
    }
}
