//! Energy accounting and the numerical studies attached to the damped
//! approximation scheme.

pub mod projector;
pub mod sweep;

pub use projector::{projector_error_study, ProjectorStudyRow};
pub use sweep::{gamma_sweep, SweepConfig, SweepMember, SweepReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{extend, ContainerGrid, CouplePair};
use crate::grid::{mean, Grid1};
use crate::solver::fluid::{
    kinetic_energy, sample_physical, velocity_gradient_centers, FluidState, Metric,
};
use crate::solver::{beam_energies, Params, Trajectory};

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    pub fluid_kinetic: f64,
    pub beam_kinetic: f64,
    /// Tension plus bending energy.
    pub elastic: f64,
    /// Cumulative `mu int int |grad u|^2`.
    pub dissipation_fluid: f64,
    /// Cumulative `gamma int int |d_t d_x eta|^2`.
    pub dissipation_beam: f64,
    pub total: f64,
    /// `(total + cumulative dissipation) - initial total`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
    pub initial_total: f64,
}

impl EnergyLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.residual.abs()))
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.residual))
    }

    /// True when the residual never becomes positive beyond the tolerance,
    /// i.e. the scheme only loses energy.
    pub fn is_dissipative(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.residual <= tol)
    }
}

/// Recompute the energy ledger of a trajectory from its snapshots: the
/// instantaneous terms by quadrature on the mapped grids, the dissipation
/// integrals from the per-step accumulation stored with the samples.
pub fn energy_ledger(traj: &Trajectory, params: &Params) -> Result<EnergyLedger> {
    let mut rows = Vec::with_capacity(traj.samples.len());
    let mut initial_total = 0.0;
    for (idx, s) in traj.samples.iter().enumerate() {
        let h = s.beam.height();
        let metric = Metric::frozen(s.fluid.grid, &h)?;
        let fk = kinetic_energy(&s.fluid, &metric, params);
        let (bk, bt, bb) = beam_energies(&s.beam, params);
        let total = fk + bk + bt + bb;
        if idx == 0 {
            initial_total = total;
        }
        rows.push(LedgerRow {
            time: s.time,
            fluid_kinetic: fk,
            beam_kinetic: bk,
            elastic: bt + bb,
            dissipation_fluid: s.cum_dissipation_fluid,
            dissipation_beam: s.cum_dissipation_beam,
            total,
            residual: total + s.cum_dissipation_fluid + s.cum_dissipation_beam - initial_total,
        });
    }
    Ok(EnergyLedger {
        rows,
        initial_total,
    })
}

/// Relative defect of the identity
/// `int |grad u + grad u^T|^2 = 2 int |grad u|^2`
/// for divergence-free fields with transverse-only interface values,
/// quadratured at cell centers of the mapped grid.
pub fn korn_residual(state: &FluidState, h: &[f64]) -> Result<f64> {
    let m = Metric::frozen(state.grid, h)?;
    let (g11, g12, g21, g22) = velocity_gradient_centers(state, &m);
    let dv = m.grid.dx() * m.grid.dz();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..m.grid.nx {
        for j in 0..m.grid.nz {
            let w = m.h_center[i] * dv;
            let (a, b, c, d) = (g11[[i, j]], g12[[i, j]], g21[[i, j]], g22[[i, j]]);
            lhs += w * ((2.0 * a).powi(2) + 2.0 * (b + c).powi(2) + (2.0 * d).powi(2));
            rhs += w * 2.0 * (a * a + b * b + c * c + d * d);
        }
    }
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / rhs)
}

/// Bar-extension of one solver sample onto a container grid.
pub fn extend_sample(
    fluid: &FluidState,
    beam_velocity: &[f64],
    h: &[f64],
    cgrid: ContainerGrid,
) -> Result<CouplePair> {
    let sampler = |x: f64, y: f64| sample_physical(fluid, h, x, y);
    extend(&sampler, beam_velocity, h, cgrid, f64::INFINITY)
}

/// Space-time `L^4` norm of the extended velocity over a trajectory, with
/// the largest interpolation-inequality ratio
/// `||u||_{L^4}^2 / (||u||_{L^2} ||grad u||_{L^2})` observed along the way.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct L4Report {
    pub space_time_l4: f64,
    pub max_interpolation_ratio: f64,
}

pub fn l4_bound_check(traj: &Trajectory, cgrid: ContainerGrid) -> Result<L4Report> {
    let mut acc = 0.0;
    let mut max_ratio = 0.0f64;
    let n = traj.samples.len();
    for (idx, s) in traj.samples.iter().enumerate() {
        let h = s.beam.height();
        let pair = extend_sample(&s.fluid, &s.beam.eta_dot, &h, cgrid)?;
        let l4 = pair.field.l4_norm();
        let l2 = pair.field.l2_norm();
        let h1sq = pair.field.h1_norm_lower_sq();
        let grad = (h1sq - l2 * l2).max(0.0).sqrt();
        if l2 > 0.0 && grad > 0.0 {
            max_ratio = max_ratio.max(l4 * l4 / (l2 * grad));
        }
        // Trapezoid weight in time.
        let wt = if n == 1 {
            1.0
        } else if idx == 0 {
            0.5 * (traj.samples[1].time - s.time)
        } else if idx == n - 1 {
            0.5 * (s.time - traj.samples[idx - 1].time)
        } else {
            0.5 * (traj.samples[idx + 1].time - traj.samples[idx - 1].time)
        };
        acc += wt * l4.powi(4);
    }
    Ok(L4Report {
        space_time_l4: acc.powf(0.25),
        max_interpolation_ratio: max_ratio,
    })
}

/// Volume rate of one connected component of `{h > eps_c}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentFlux {
    /// Node range `[start, end)` in periodic indexing.
    pub start: usize,
    pub len: usize,
    pub flux: f64,
}

/// Integrate the beam velocity over every connected component of the open
/// film. The component fluxes sum to the global flux exactly, because the
/// quadrature is the plain nodal sum restricted to each component.
pub fn component_flux_report(
    eta_dot: &[f64],
    h: &[f64],
    grid: Grid1,
    eps_c: f64,
) -> Vec<ComponentFlux> {
    let n = grid.n;
    let dx = grid.dx();
    let open: Vec<bool> = h.iter().map(|&v| v > eps_c).collect();
    if open.iter().all(|&o| o) {
        return vec![ComponentFlux {
            start: 0,
            len: n,
            flux: mean(eta_dot) * grid.length,
        }];
    }
    // Anchor the scan at a closed node so wrap-around components stay whole.
    let anchor = open.iter().position(|&o| !o).unwrap();
    let mut components = Vec::new();
    let mut k = 0;
    while k < n {
        let idx = (anchor + k) % n;
        if open[idx] {
            let start = idx;
            let mut len = 0;
            let mut flux = 0.0;
            while k < n && open[(anchor + k) % n] {
                flux += eta_dot[(anchor + k) % n] * dx;
                len += 1;
                k += 1;
            }
            components.push(ComponentFlux { start, len, flux });
        } else {
            k += 1;
        }
    }
    components.sort_by_key(|c| c.start);
    components
}
