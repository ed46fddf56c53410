//! Damping sweeps: run the same benchmark over a decreasing sequence of
//! damping values and measure how fast the extended velocities and beam
//! velocities become a Cauchy sequence, which is the computable shadow of
//! the strong compactness driving the vanishing-damping limit.
//!
//! All members share the raw initial data; each member smooths it with its
//! own damping before running. Cross-member comparisons happen on the fixed
//! container so the moving domains never enter the norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fields::ContainerGrid;
use crate::geometry::{build_lower_envelope, LowerEnvelope};
use crate::grid::Grid1;
use crate::solver::{run, Trajectory};

use super::{energy_ledger, extend_sample, l4_bound_check, L4Report};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Strictly decreasing damping values.
    pub gammas: Vec<f64>,
    /// Target gap of the envelope built from the finest member.
    pub delta: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_theta() -> f64 {
    0.2
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMember {
    pub gamma: f64,
    pub config_hash: String,
    /// Minimum interface height over the whole run.
    pub min_height: f64,
    pub initial_energy: f64,
    pub raw_energy: f64,
    pub ledger_max_abs_residual: f64,
    /// Residual never positive beyond round-off scale.
    pub dissipative: bool,
    /// `E(t) + D(t) <= E_raw(0)` up to the stated slack, the inequality the
    /// limit candidate must satisfy.
    pub bounded_by_raw_energy: bool,
    pub l4: L4Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub base_config_hash: String,
    pub gammas: Vec<f64>,
    pub members: Vec<SweepMember>,
    /// Successive space-time differences of extended velocities (density
    /// weighted).
    pub cauchy_velocity: Vec<f64>,
    /// Successive space-time differences of beam velocities.
    pub cauchy_beam: Vec<f64>,
    pub envelope: LowerEnvelope,
}

fn time_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else if i == 0 {
                0.5 * (times[1] - times[0])
            } else if i == n - 1 {
                0.5 * (times[n - 1] - times[n - 2])
            } else {
                0.5 * (times[i + 1] - times[i - 1])
            }
        })
        .collect()
}

/// Space-time `X^0`-type distance between two trajectories on the container.
fn trajectory_distances(
    a: &Trajectory,
    b: &Trajectory,
    cgrid: ContainerGrid,
    rho_f: f64,
    rho_s: f64,
) -> Result<(f64, f64)> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::invalid(
            "sweep members sampled at different cadences; align dt and snapshots",
        ));
    }
    let times: Vec<f64> = a.samples.iter().map(|s| s.time).collect();
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        if (sa.time - sb.time).abs() > 1e-10 {
            return Err(Error::invalid("sweep members drifted off the shared time grid"));
        }
    }
    let wt = time_weights(&times);
    let dx = cgrid.x.dx();
    let mut vel2 = 0.0;
    let mut beam2 = 0.0;
    for ((sa, sb), w) in a.samples.iter().zip(&b.samples).zip(&wt) {
        let ea = extend_sample(&sa.fluid, &sa.beam.eta_dot, &sa.beam.height(), cgrid)?;
        let eb = extend_sample(&sb.fluid, &sb.beam.eta_dot, &sb.beam.height(), cgrid)?;
        let diff = ea.field.sub(&eb.field)?;
        vel2 += w * rho_f * diff.l2_norm_sq();
        let mut d2 = 0.0;
        for (x, y) in sa.beam.eta_dot.iter().zip(&sb.beam.eta_dot) {
            d2 += (x - y) * (x - y) * dx;
        }
        beam2 += w * rho_s * d2;
    }
    Ok((vel2.sqrt(), beam2.sqrt()))
}

/// Run the sweep. Returns the report together with the member trajectories
/// (finest last) for persistence.
pub fn gamma_sweep(
    base: &RunConfig,
    sweep: &SweepConfig,
) -> Result<(SweepReport, Vec<Trajectory>)> {
    if sweep.gammas.is_empty() {
        return Err(Error::invalid("sweep needs at least one damping value"));
    }
    if sweep
        .gammas
        .windows(2)
        .any(|w| !(w[1] < w[0]) || w[1] <= 0.0)
        || sweep.gammas[0] <= 0.0
    {
        return Err(Error::invalid(
            "damping values must be strictly decreasing and positive",
        ));
    }

    let configs: Vec<RunConfig> = sweep
        .gammas
        .iter()
        .map(|&g| {
            let mut c = base.clone();
            c.params.gamma = g;
            c
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<Trajectory>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| run(c).map(|o| o.trajectory))
            .collect()
    });
    let mut trajectories = Vec::with_capacity(outcomes.len());
    for (o, &g) in outcomes.into_iter().zip(&sweep.gammas) {
        trajectories.push(o.map_err(|e| Error::invalid(format!("member gamma = {g}: {e}")))?);
    }

    // Shared container for all comparisons.
    let m_shared = trajectories
        .iter()
        .map(|t| t.container_height)
        .fold(1.0f64, f64::max);
    let x = Grid1::new(base.grid.nx, base.params.length);
    let cgrid = ContainerGrid::new(x, m_shared, base.grid.nz.max(8))?;

    let mut members = Vec::new();
    for t in &trajectories {
        let ledger = energy_ledger(t, &t.config.params)?;
        let scale = ledger.initial_total.max(1e-30);
        let l4 = l4_bound_check(t, cgrid)?;
        members.push(SweepMember {
            gamma: t.config.params.gamma,
            config_hash: t.config_hash.clone(),
            min_height: t.stats.min_height,
            initial_energy: t.initial_energy,
            raw_energy: t.raw_energy,
            ledger_max_abs_residual: ledger.max_abs_residual(),
            dissipative: ledger.is_dissipative(1e-9 * scale),
            bounded_by_raw_energy: ledger
                .rows
                .iter()
                .all(|r| r.total + r.dissipation_fluid + r.dissipation_beam
                    <= t.raw_energy * (1.0 + 1e-6) + 1e-12),
            l4,
        });
    }

    let mut cauchy_velocity = Vec::new();
    let mut cauchy_beam = Vec::new();
    for pair in trajectories.windows(2) {
        let (v, b) = trajectory_distances(
            &pair[0],
            &pair[1],
            cgrid,
            base.params.rho_f,
            base.params.rho_s,
        )?;
        cauchy_velocity.push(v);
        cauchy_beam.push(b);
    }

    let finest = trajectories.last().expect("nonempty sweep");
    let mut envelope = build_lower_envelope(&finest.height_trajectory()?, sweep.delta, sweep.theta)?;
    envelope.gamma0 = Some(finest.config.params.gamma);

    Ok((
        SweepReport {
            base_config_hash: base.hash(),
            gammas: sweep.gammas.clone(),
            members,
            cauchy_velocity,
            cauchy_beam,
            envelope,
        },
        trajectories,
    ))
}
