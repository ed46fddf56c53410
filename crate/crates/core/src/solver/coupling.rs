//! Strongly coupled partitioned stepping with adaptive relaxation.
//!
//! Each step iterates fluid solve -> variational traction -> beam update on
//! the interface velocity until the fixed point is reached to the coupling
//! tolerance. The interface geometry follows the beam scheme's own
//! trapezoidal update, so the committed beam displacement and the fluid
//! metric agree up to the coupling tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::mean;

use super::beam::{beam_step, BeamState, BeamStepReport};
use super::fluid::{fluid_step, FluidState, FluidStepReport, FluidTols};
use super::{ContactEvent, ContactPolicy, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Relative interface-velocity residual for convergence.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial relaxation factor; adapted by the secant rule afterwards.
    pub relaxation: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            tol: 1e-8,
            max_iters: 80,
            relaxation: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub beam: BeamState,
    pub fluid: FluidState,
}

impl SimState {
    pub fn time(&self) -> f64 {
        self.beam.time
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub coupling_iters: usize,
    pub coupling_residual: f64,
    pub fluid: FluidStepReport,
    pub beam: BeamStepReport,
    pub traction_gauge: f64,
    /// Max mismatch between the committed interface row and the committed
    /// beam velocity.
    pub kinematic_mismatch: f64,
    pub mean_eta_dot: f64,
    /// `mu int |grad u|^2 dt` committed by the implicit fluid step.
    pub dissipation_fluid: f64,
    /// `gamma int |d_t d_x eta|^2 dt` committed by the beam step.
    pub dissipation_beam: f64,
    /// Work done on the beam by the fluid load.
    pub load_work: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Advance the coupled state by one step. `hint` seeds the interface
/// velocity iteration (an extrapolation from earlier steps cuts a couple of
/// sub-iterations); the converged result does not depend on it.
pub fn coupled_step_hinted(
    sim: &SimState,
    dt: f64,
    params: &Params,
    coupling: &CouplingConfig,
    fluid_tols: &FluidTols,
    forcing: Option<&dyn Fn(f64, f64) -> (f64, f64)>,
    hint: Option<&[f64]>,
) -> Result<(SimState, StepReport)> {
    let h_old = sim.beam.height();
    let nx = sim.beam.grid.n;

    let mut guess = match hint {
        Some(h) if h.len() == nx => h.to_vec(),
        _ => sim.beam.eta_dot.clone(),
    };
    let mut omega = coupling.relaxation;
    let mut prev_residual: Option<Vec<f64>> = None;
    let mut residual_history = Vec::new();

    let mut converged = None;
    for iter in 1..=coupling.max_iters {
        // Interface geometry from the beam scheme's trapezoidal update.
        let h_new: Vec<f64> = (0..nx)
            .map(|i| h_old[i] + 0.5 * dt * (sim.beam.eta_dot[i] + guess[i]))
            .collect();
        if h_new.iter().any(|&h| h <= 0.0) {
            return Err(Error::invalid(
                "interface reached the floor inside a coupling iteration",
            ));
        }
        let fluid_out = fluid_step(
            &sim.fluid,
            &h_old,
            &h_new,
            &guess,
            dt,
            params,
            fluid_tols,
            forcing,
        )?;
        let (beam_new, beam_report) = beam_step(&sim.beam, &fluid_out.traction, dt, params)?;

        let target = &beam_new.eta_dot;
        let r: Vec<f64> = target
            .iter()
            .zip(&guess)
            .map(|(t, g)| t - g)
            .collect();
        let scale = l2(target) + 1e-14 * (1.0 + l2(&sim.beam.eta_dot));
        let res = l2(&r) / scale;
        residual_history.push(res);

        if res <= coupling.tol {
            converged = Some((fluid_out, beam_new, beam_report, iter, res));
            break;
        }

        // Secant (Aitken) relaxation on the interface velocity.
        if let Some(rp) = &prev_residual {
            let mut num = 0.0;
            let mut den = 0.0;
            for (a, b) in rp.iter().zip(&r) {
                let d = b - a;
                num += a * d;
                den += d * d;
            }
            if den > 0.0 {
                omega = (-omega * num / den).clamp(0.05, 2.0);
            }
        }
        for (g, ri) in guess.iter_mut().zip(&r) {
            *g += omega * ri;
        }
        prev_residual = Some(r);
    }

    let (fluid_out, beam_new, beam_report, iters, res) = converged.ok_or_else(|| {
        Error::CouplingDiverged {
            iterations: coupling.max_iters,
            residual: *residual_history.last().unwrap_or(&f64::NAN),
        }
    })?;

    // Committed kinematic mismatch: interface row vs committed beam velocity.
    let mut kin = 0.0f64;
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let target_c = 0.5 * (beam_new.eta_dot[i] + beam_new.eta_dot[ip]);
        kin = kin.max((fluid_out.state.w[[i, sim.fluid.grid.nz]] - target_c).abs());
    }

    let report = StepReport {
        coupling_iters: iters,
        coupling_residual: res,
        dissipation_fluid: params.mu * fluid_out.report.gradient_energy * dt,
        dissipation_beam: beam_report.dissipation,
        load_work: beam_report.load_work,
        fluid: fluid_out.report,
        beam: beam_report,
        traction_gauge: fluid_out.traction_gauge,
        kinematic_mismatch: kin,
        mean_eta_dot: mean(&beam_new.eta_dot),
    };
    Ok((
        SimState {
            beam: beam_new,
            fluid: fluid_out.state,
        },
        report,
    ))
}

/// Advance the coupled state by one step.
pub fn coupled_step(
    sim: &SimState,
    dt: f64,
    params: &Params,
    coupling: &CouplingConfig,
    fluid_tols: &FluidTols,
    forcing: Option<&dyn Fn(f64, f64) -> (f64, f64)>,
) -> Result<(SimState, StepReport)> {
    coupled_step_hinted(sim, dt, params, coupling, fluid_tols, forcing, None)
}

/// Detect contact: event if and only if the minimal interface height is at
/// or below the tolerance.
pub fn detect_contact(beam: &BeamState, eps_c: f64, policy: ContactPolicy) -> Option<ContactEvent> {
    let mut node = 0;
    let mut min_h = f64::INFINITY;
    for (i, &e) in beam.eta.iter().enumerate() {
        let h = 1.0 + e;
        if h < min_h {
            min_h = h;
            node = i;
        }
    }
    if min_h <= eps_c {
        Some(ContactEvent {
            time: beam.time,
            node,
            min_height: min_h,
            policy,
        })
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1;
    use crate::solver::fluid::MacGrid;
    use std::f64::consts::PI;

    fn params() -> Params {
        Params {
            rho_f: 1.0,
            rho_s: 1.0,
            mu: 0.1,
            alpha: 0.02,
            beta: 0.5,
            gamma: 0.05,
            length: 1.0,
        }
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let grid = MacGrid::new(16, 8, 1.0);
        let sim = SimState {
            beam: BeamState::rest(grid.beam_grid()),
            fluid: FluidState::rest(grid),
        };
        let (next, report) = coupled_step(
            &sim,
            1e-3,
            &params(),
            &CouplingConfig::default(),
            &FluidTols::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.coupling_iters, 1);
        assert_eq!(next.beam.eta, sim.beam.eta);
        assert!(next.fluid.max_speed() == 0.0);
    }

    #[test]
    fn perturbed_step_converges_and_preserves_constraints() {
        let grid = MacGrid::new(24, 12, 1.0);
        let g1 = grid.beam_grid();
        let eta = g1.sample(|x| -0.05 * (2.0 * PI * x).cos());
        let beam = BeamState::new(g1, eta, vec![0.0; 24], 0.0).unwrap();
        let sim = SimState {
            beam,
            fluid: FluidState::rest(grid),
        };
        let (next, report) = coupled_step(
            &sim,
            1e-3,
            &params(),
            &CouplingConfig::default(),
            &FluidTols::default(),
            None,
        )
        .unwrap();
        assert!(report.coupling_residual <= 1e-8);
        assert!(report.mean_eta_dot.abs() < 1e-12);
        assert!(report.fluid.div_residual < 1e-10);
        assert!(report.kinematic_mismatch < 1e-6 * (1.0 + next.fluid.max_speed()));
        // The beam was released from a bent state; it must start moving.
        assert!(next.beam.eta_dot.iter().any(|v| v.abs() > 1e-6));
    }

    /// Reflection symmetry: an even initial bump evolves into even eta and
    /// odd u1 about x = L/2; the scheme must not break the mirror.
    #[test]
    fn mirror_symmetry_is_preserved() {
        let grid = MacGrid::new(32, 16, 1.0);
        let g1 = grid.beam_grid();
        let eta = g1.sample(|x| -0.08 * (2.0 * PI * x).cos());
        let beam = BeamState::new(g1, eta, vec![0.0; 32], 0.0).unwrap();
        let mut sim = SimState {
            beam,
            fluid: FluidState::rest(grid),
        };
        let p = params();
        for _ in 0..5 {
            sim = coupled_step(
                &sim,
                1e-3,
                &p,
                &CouplingConfig::default(),
                &FluidTols::default(),
                None,
            )
            .unwrap()
            .0;
        }
        let nx = 32;
        let mut worst = 0.0f64;
        for i in 0..nx {
            // eta(i) corresponds to x_i = i dx; mirror x -> L - x maps node i
            // to node nx - i (mod nx).
            let mi = (nx - i) % nx;
            worst = worst.max((sim.beam.eta[i] - sim.beam.eta[mi]).abs());
        }
        assert!(worst < 1e-9, "mirror defect {worst}");
    }

    #[test]
    fn contact_detection_trivial_cases() {
        let g1 = Grid1::new(16, 1.0);
        let rest = BeamState::rest(g1);
        assert!(detect_contact(&rest, 1e-6, ContactPolicy::Halt).is_none());
        let eta = g1.sample(|x| if x < 0.5 { -1.0 } else { 0.0 });
        let touching = BeamState::new(g1, eta, vec![0.0; 16], 0.3).unwrap();
        let ev = detect_contact(&touching, 1e-6, ContactPolicy::Halt).unwrap();
        assert_eq!(ev.node, 0);
        assert_eq!(ev.time, 0.3);
        assert!(ev.min_height <= 1e-6);
    }
}
