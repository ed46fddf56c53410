//! Interface geometry: periodic deformations `h = 1 + eta`, the graded
//! vertical stretch between two deformations, and piecewise-constant-in-time
//! lower envelopes of a deformation trajectory.
//!
//! Derivative bookkeeping in this module uses forward differences
//! `(f_{i+1} - f_i) / dx`. An edge derivative is counted in a sublevel set as
//! soon as one of its endpoints lies in it; with that convention the clipping
//! bound `|| [h - mu]_+ - h ||_{W^{1,inf}} <= mu + slope_sup(h, mu)` holds
//! node by node for arbitrary data, not just asymptotically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::h2_norm;
use crate::grid::{forward_diff, sup_diff, sup_norm, Grid1};

/// Transverse beam deformation on a uniform periodic grid.
///
/// Stores the displacement `eta`; the interface height is `h = 1 + eta`,
/// constrained to `0 <= h <= M` where `M` is the container height bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    eta: Vec<f64>,
    pub grid: Grid1,
    pub container_height: f64,
}

impl Deformation {
    pub fn new(eta: Vec<f64>, grid: Grid1, container_height: f64) -> Result<Self> {
        if eta.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "eta has {} samples, grid expects {}",
                eta.len(),
                grid.n
            )));
        }
        for (i, &e) in eta.iter().enumerate() {
            let h = 1.0 + e;
            if !(0.0..=container_height).contains(&h) || !h.is_finite() {
                return Err(Error::invalid(format!(
                    "height {h:.6} out of [0, {container_height}] at node {i}"
                )));
            }
        }
        Ok(Deformation {
            eta,
            grid,
            container_height,
        })
    }

    pub fn from_height(h: &[f64], grid: Grid1, container_height: f64) -> Result<Self> {
        Deformation::new(h.iter().map(|v| v - 1.0).collect(), grid, container_height)
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn height(&self) -> Vec<f64> {
        self.eta.iter().map(|e| 1.0 + e).collect()
    }

    pub fn min_height(&self) -> f64 {
        self.eta.iter().fold(f64::INFINITY, |m, e| m.min(1.0 + e))
    }
}

/// Nodewise positive-part shift `[h - mu]_+`.
pub fn positive_part_shift(h: &[f64], mu: f64) -> Result<Vec<f64>> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::invalid(format!("shift must be nonnegative, got {mu}")));
    }
    Ok(h.iter().map(|&v| (v - mu).max(0.0)).collect())
}

/// `sup |h'|` over the part of the grid where `h <= mu`, with forward-difference
/// derivatives. An edge counts as soon as one endpoint satisfies `h <= mu`;
/// returns 0 for an empty sublevel set.
pub fn sublevel_slope_sup(h: &[f64], dx: f64, mu: f64) -> Result<f64> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::invalid(format!("level must be nonnegative, got {mu}")));
    }
    let n = h.len();
    let mut sup = 0.0f64;
    for i in 0..n {
        let j = (i + 1) % n;
        if h[i] <= mu || h[j] <= mu {
            sup = sup.max(((h[j] - h[i]) / dx).abs());
        }
    }
    Ok(sup)
}

/// Discrete `W^{1,inf}` distance: `sup |h1 - h2| + sup |h1' - h2'|`.
pub fn w1inf_distance(h1: &[f64], h2: &[f64], dx: f64) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::GridMismatch(format!(
            "arrays of length {} and {}",
            h1.len(),
            h2.len()
        )));
    }
    let d1 = forward_diff(h1, dx);
    let d2 = forward_diff(h2, dx);
    Ok(sup_diff(h1, h2) + sup_diff(&d1, &d2))
}

pub fn w1inf_norm(h: &[f64], dx: f64) -> f64 {
    sup_norm(h) + sup_norm(&forward_diff(h, dx))
}

/// Graded vertical stretch between the subgraph domains of two deformations:
/// `chi(x, y) = (x, m(x)(y+1) - 1)` with `m = (h + 1) / (hb + 1)`, mapping the
/// region below `hb` onto the region below `h`. The transposed cofactor of
/// its gradient is the multiplier that keeps transported fields
/// divergence free.
#[derive(Debug, Clone)]
pub struct AleMap {
    pub grid: Grid1,
    /// Target height (upper deformation).
    pub h: Vec<f64>,
    /// Source height (lower deformation).
    pub hb: Vec<f64>,
    pub m: Vec<f64>,
    pub dm: Vec<f64>,
}

pub fn ale_map(h: &[f64], hb: &[f64], grid: Grid1) -> Result<AleMap> {
    if h.len() != grid.n || hb.len() != grid.n {
        return Err(Error::GridMismatch("height arrays must match the grid".into()));
    }
    for i in 0..grid.n {
        if hb[i] > h[i] + 1e-14 {
            return Err(Error::invalid(format!(
                "lower height exceeds upper height at node {i}: {} > {}",
                hb[i], h[i]
            )));
        }
        if hb[i] < -1e-14 {
            return Err(Error::invalid(format!("negative height at node {i}")));
        }
    }
    let m: Vec<f64> = h
        .iter()
        .zip(hb)
        .map(|(&hv, &hbv)| (hv + 1.0) / (hbv + 1.0))
        .collect();
    let dm = crate::grid::centered_diff(&m, grid.dx());
    Ok(AleMap {
        grid,
        h: h.to_vec(),
        hb: hb.to_vec(),
        m,
        dm,
    })
}

impl AleMap {
    pub fn m_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.m, x)
    }

    pub fn dm_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.dm, x)
    }

    /// `chi(x, y)`.
    pub fn map_point(&self, x: f64, y: f64) -> (f64, f64) {
        (x, self.m_at(x) * (y + 1.0) - 1.0)
    }

    /// Inverse vertical stretch.
    pub fn unmap_point(&self, x: f64, y: f64) -> (f64, f64) {
        (x, (y + 1.0) / self.m_at(x) - 1.0)
    }

    /// Transposed cofactor of `grad chi` at a point, row major:
    /// `[[m, 0], [-m'(x)(y+1), 1]]`.
    pub fn cofactor_at(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let m = self.m_at(x);
        let dm = self.dm_at(x);
        [[m, 0.0], [-dm * (y + 1.0), 1.0]]
    }

    /// Determinant of the cofactor matrix; equals `m` identically.
    pub fn det_cofactor_at(&self, x: f64) -> f64 {
        self.m_at(x)
    }
}

/// A deformation trajectory sampled in time, the input of the envelope
/// construction.
#[derive(Debug, Clone)]
pub struct HeightTrajectory {
    pub grid: Grid1,
    pub container_height: f64,
    pub times: Vec<f64>,
    pub heights: Vec<Vec<f64>>,
}

impl HeightTrajectory {
    pub fn new(
        grid: Grid1,
        container_height: f64,
        times: Vec<f64>,
        heights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != heights.len() || times.is_empty() {
            return Err(Error::invalid("trajectory needs matching, nonempty samples"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trajectory times must increase"));
        }
        for h in &heights {
            if h.len() != grid.n {
                return Err(Error::GridMismatch("trajectory sample off the grid".into()));
            }
        }
        Ok(HeightTrajectory {
            grid,
            container_height,
            times,
            heights,
        })
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }
}

/// Piecewise-constant-in-time deformation lying below a whole trajectory:
/// on each time slab the value is `[h(t_k) - 2 eps]_+` for a well-chosen
/// sample `t_k`, with `eps` and the slab count selected so that the envelope
/// stays below the trajectory and within `delta` of it in `W^{1,inf}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerEnvelope {
    pub grid: Grid1,
    pub container_height: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    /// Number of time slabs.
    pub num_intervals: usize,
    pub t_start: f64,
    pub slab_duration: f64,
    /// Chosen sample time per slab.
    pub sample_times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    /// Fitted Hoelder-in-time constant of the trajectory in `C^1`.
    pub holder_constant: f64,
    /// Largest `W^{1,inf}` distance between envelope and trajectory.
    pub max_gap: f64,
    /// Discrete `W^{1,inf}` norm of each row.
    pub row_w1inf: Vec<f64>,
    /// Damping value of the producing run when known.
    pub gamma0: Option<f64>,
}

impl LowerEnvelope {
    pub fn row_for_time(&self, t: f64) -> &[f64] {
        let k = if self.slab_duration > 0.0 {
            (((t - self.t_start) / self.slab_duration).floor() as isize)
                .clamp(0, self.num_intervals as isize - 1) as usize
        } else {
            0
        };
        &self.rows[k]
    }
}

// Serialize Grid1 through a mirror so geometry stays the owner of the type.
impl Serialize for Grid1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.n, self.length).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid1 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (n, length) = <(usize, f64)>::deserialize(d)?;
        Ok(Grid1::new(n, length))
    }
}

/// Build the lower envelope of a trajectory for a target gap `delta`.
///
/// `eps` is selected by bisection as the largest value such that
/// `4 eps + slope_sup(h(t), 2 eps) <= delta` over all trajectory samples,
/// with a floor of `2 dx max |h'|` below which the sublevel set is not grid
/// resolvable. The slab count is the smallest one making the fitted
/// Hoelder increment `C (T/N)^theta` fall strictly below `eps`.
pub fn build_lower_envelope(
    traj: &HeightTrajectory,
    delta: f64,
    theta: f64,
) -> Result<LowerEnvelope> {
    if delta <= 0.0 {
        return Err(Error::invalid("delta must be positive"));
    }
    if !(0.0 < theta && theta < 0.25) {
        return Err(Error::invalid("theta must lie in (0, 1/4)"));
    }
    let dx = traj.grid.dx();
    let max_slope = traj
        .heights
        .iter()
        .map(|h| sup_norm(&forward_diff(h, dx)))
        .fold(0.0f64, f64::max);
    let floor = 2.0 * dx * max_slope;
    let cap = delta / 4.0;

    let feasible = |eps: f64| -> Result<bool> {
        let mut worst = 0.0f64;
        for h in &traj.heights {
            worst = worst.max(sublevel_slope_sup(h, dx, 2.0 * eps)?);
        }
        Ok(4.0 * eps + worst <= delta)
    };

    if floor > cap || !feasible(floor.max(1e-300))? {
        let mut worst = 0.0f64;
        for h in &traj.heights {
            worst = worst.max(sublevel_slope_sup(h, dx, 2.0 * floor)?);
        }
        return Err(Error::Envelope(format!(
            "no eps above the grid floor {floor:.3e} satisfies the slope condition \
             for delta = {delta:.3e} (residual sup {:.3e})",
            4.0 * floor + worst
        )));
    }

    let mut lo = floor.max(1e-300);
    let mut hi = cap;
    if feasible(hi)? {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let eps = lo;

    // Hoelder constant of the trajectory in C^1 at a given separation scale.
    // Fitting at the slab scale instead of globally matters: for a
    // Lipschitz-in-time trajectory the global quotient is attained at the
    // largest separation and would force absurd slab counts, while the bound
    // is only ever used for separations below one slab.
    let fit_holder = |scale: f64| -> Result<f64> {
        let mut holder = 0.0f64;
        for i in 0..traj.times.len() {
            for j in (i + 1)..traj.times.len() {
                let dt = traj.times[j] - traj.times[i];
                if dt > scale {
                    break;
                }
                let dist = w1inf_distance(&traj.heights[i], &traj.heights[j], dx)?;
                holder = holder.max(dist / dt.powf(theta));
            }
        }
        Ok(holder)
    };

    let span = traj.span();
    let cap = (traj.times.len() / 2).max(1);
    let mut num_intervals = 1usize;
    let mut holder = fit_holder(span)?;
    if span > 0.0 {
        loop {
            let slab = span / num_intervals as f64;
            holder = fit_holder(slab)?;
            if holder * slab.powf(theta) < eps || num_intervals >= cap {
                break;
            }
            num_intervals *= 2;
        }
        if holder * (span / num_intervals as f64).powf(theta) >= eps {
            return Err(Error::Envelope(format!(
                "slab refinement exhausted the trajectory sampling before the \
                 time-increment bound fell below eps = {eps:.3e}; sample the \
                 run more densely"
            )));
        }
    }
    let slab = span / num_intervals as f64;

    // Per slab, take the sample minimizing the discrete H^2 norm.
    let t0 = traj.times[0];
    let mut sample_idx = vec![usize::MAX; num_intervals];
    let mut sample_h2 = vec![f64::INFINITY; num_intervals];
    for (i, &t) in traj.times.iter().enumerate() {
        let mut k = if slab > 0.0 {
            ((t - t0) / slab).floor() as usize
        } else {
            0
        };
        if k >= num_intervals {
            k = num_intervals - 1;
        }
        let norm = h2_norm(&traj.heights[i], traj.grid.length);
        if norm < sample_h2[k] {
            sample_h2[k] = norm;
            sample_idx[k] = i;
        }
    }
    if sample_idx.iter().any(|&i| i == usize::MAX) {
        return Err(Error::Envelope(
            "a time slab contains no trajectory sample; sample the run more densely".into(),
        ));
    }

    let mut rows = Vec::with_capacity(num_intervals);
    let mut sample_times = Vec::with_capacity(num_intervals);
    for &i in &sample_idx {
        rows.push(positive_part_shift(&traj.heights[i], 2.0 * eps)?);
        sample_times.push(traj.times[i]);
    }

    let row_w1inf: Vec<f64> = rows.iter().map(|r| w1inf_norm(r, dx)).collect();

    let mut envelope = LowerEnvelope {
        grid: traj.grid,
        container_height: traj.container_height,
        delta,
        epsilon: eps,
        theta,
        num_intervals,
        t_start: t0,
        slab_duration: slab,
        sample_times,
        rows,
        holder_constant: holder,
        max_gap: 0.0,
        row_w1inf,
        gamma0: None,
    };

    // Verify the two envelope inequalities over the whole trajectory.
    let mut max_gap = 0.0f64;
    for (i, &t) in traj.times.iter().enumerate() {
        let row = envelope.row_for_time(t);
        for (x, (&lo, &h)) in row.iter().zip(&traj.heights[i]).enumerate() {
            if lo > h + 1e-12 {
                return Err(Error::Envelope(format!(
                    "envelope exceeds trajectory at t = {t:.6}, node {x}: {lo:.6} > {h:.6}"
                )));
            }
        }
        max_gap = max_gap.max(w1inf_distance(row, &traj.heights[i], dx)?);
    }
    if max_gap > delta + 1e-12 {
        return Err(Error::Envelope(format!(
            "envelope gap {max_gap:.6} exceeds delta = {delta:.6}"
        )));
    }
    envelope.max_gap = max_gap;
    Ok(envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> Grid1 {
        Grid1::new(128, 1.0)
    }

    #[test]
    fn positive_part_inactive_when_h_large() {
        let g = grid();
        let h = g.sample(|x| 1.0 + 0.5 * (2.0 * PI * x).sin());
        let shifted = positive_part_shift(&h, 0.2).unwrap();
        for (s, v) in shifted.iter().zip(&h) {
            assert_relative_eq!(*s, v - 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = grid();
        let h = g.sample(|x| 0.7 + x * 0.0);
        assert_eq!(positive_part_shift(&h, 0.0).unwrap(), h);
    }

    #[test]
    fn negative_shift_rejected() {
        assert!(positive_part_shift(&[1.0, 1.0, 1.0, 1.0], -0.1).is_err());
    }

    /// Brute-force nodewise check of the clipping bound on a profile that
    /// actually touches zero.
    #[test]
    fn clipping_bound_holds_nodewise() {
        let g = grid();
        let h = g.sample(|x| 0.5 * (1.0 - (2.0 * PI * x).cos()));
        let mu = 0.1;
        let clipped = positive_part_shift(&h, mu).unwrap();
        let lhs = w1inf_distance(&clipped, &h, g.dx()).unwrap();
        let rhs = mu + sublevel_slope_sup(&h, g.dx(), mu).unwrap();
        assert!(lhs <= rhs + 1e-13, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn sublevel_sup_empty_set_is_zero() {
        let g = grid();
        let h = g.sample(|_| 1.0);
        assert_eq!(sublevel_slope_sup(&h, g.dx(), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn sublevel_sup_full_set_is_global_max() {
        let g = grid();
        let h = g.sample(|x| 0.5 * (1.0 - (2.0 * PI * x).cos()));
        let full = sublevel_slope_sup(&h, g.dx(), 2.0).unwrap();
        let global = sup_norm(&forward_diff(&h, g.dx()));
        assert_relative_eq!(full, global, epsilon = 1e-15);
    }

    #[test]
    fn sublevel_sup_decreases_to_zero() {
        let g = Grid1::new(1024, 1.0);
        let h = g.sample(|x| 0.5 * (1.0 - (2.0 * PI * x).cos()));
        let s1 = sublevel_slope_sup(&h, g.dx(), 0.1).unwrap();
        let s2 = sublevel_slope_sup(&h, g.dx(), 0.05).unwrap();
        let s3 = sublevel_slope_sup(&h, g.dx(), 0.025).unwrap();
        assert!(s1 >= s2 && s2 >= s3);
        // Near a quadratic touchdown the sup scales like sqrt(mu).
        assert!(s3 < 0.6 * s1, "expected a decay trend: {s1} {s2} {s3}");
    }

    #[test]
    fn ale_identity_when_heights_match() {
        let g = grid();
        let h = g.sample(|x| 1.0 + 0.2 * (2.0 * PI * x).sin());
        let map = ale_map(&h, &h, g).unwrap();
        for i in 0..g.n {
            assert_relative_eq!(map.m[i], 1.0, epsilon = 1e-14);
        }
        let (x, y) = map.map_point(0.3, 0.4);
        assert_relative_eq!(x, 0.3);
        assert_relative_eq!(y, 0.4, epsilon = 1e-12);
        let cof = map.cofactor_at(0.3, 0.4);
        assert_relative_eq!(cof[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(cof[1][0], 0.0, epsilon = 1e-10);
    }

    /// Constant stretch: flat unit height over a flat zero height doubles the
    /// vertical coordinate and the cofactor is diag(2, 1).
    #[test]
    fn ale_constant_stretch() {
        let g = grid();
        let h = vec![1.0; g.n];
        let hb = vec![0.0; g.n];
        let map = ale_map(&h, &hb, g).unwrap();
        let (_, y) = map.map_point(0.25, 0.1);
        // 2(y+1) - 1 = 2y + 1
        assert_relative_eq!(y, 2.0 * 0.1 + 1.0, epsilon = 1e-12);
        let cof = map.cofactor_at(0.25, 0.1);
        assert_eq!(cof, [[2.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn ale_det_cofactor_equals_m() {
        let g = grid();
        let h = g.sample(|x| 1.0 + 0.3 * (2.0 * PI * x).sin());
        let hb = positive_part_shift(&h, 0.2).unwrap();
        let map = ale_map(&h, &hb, g).unwrap();
        for i in 0..g.n {
            let x = g.node(i);
            let cof = map.cofactor_at(x, 0.4);
            let det = cof[0][0] * cof[1][1] - cof[0][1] * cof[1][0];
            assert_relative_eq!(det, map.m[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn ale_round_trip_is_identity() {
        let g = grid();
        let h = g.sample(|x| 1.0 + 0.3 * (2.0 * PI * x).sin());
        let hb = positive_part_shift(&h, 0.15).unwrap();
        let map = ale_map(&h, &hb, g).unwrap();
        for &y in &[-0.9, -0.2, 0.3, 0.7] {
            let (x1, y1) = map.map_point(g.node(17), y);
            let (_, y2) = map.unmap_point(x1, y1);
            assert_relative_eq!(y2, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn ale_rejects_crossing_heights() {
        let g = grid();
        let h = vec![1.0; g.n];
        let mut hb = vec![0.5; g.n];
        hb[3] = 1.2;
        assert!(ale_map(&h, &hb, g).is_err());
    }

    #[test]
    fn w1inf_distance_constant_offset() {
        let g = grid();
        let h1 = g.sample(|x| 1.0 + 0.2 * (2.0 * PI * x).sin());
        let h2: Vec<f64> = h1.iter().map(|v| v + 0.3).collect();
        assert_relative_eq!(
            w1inf_distance(&h1, &h2, g.dx()).unwrap(),
            0.3,
            epsilon = 1e-13
        );
        assert_eq!(w1inf_distance(&h1, &h1, g.dx()).unwrap(), 0.0);
    }

    fn constant_trajectory(g: Grid1, h: Vec<f64>, m: f64) -> HeightTrajectory {
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let heights = vec![h; times.len()];
        HeightTrajectory::new(g, m, times, heights).unwrap()
    }

    #[test]
    fn envelope_of_constant_trajectory_is_uniform_shift() {
        let g = grid();
        let h = g.sample(|x| 1.0 + 0.1 * (2.0 * PI * x).sin());
        let traj = constant_trajectory(g, h.clone(), 2.0);
        let delta = 0.2;
        let env = build_lower_envelope(&traj, delta, 0.2).unwrap();
        assert_eq!(env.num_intervals, 1);
        // min h = 0.9 > 2 eps, so the positive part is inactive and eps sits
        // at its cap delta / 4.
        assert_relative_eq!(env.epsilon, delta / 4.0, epsilon = 1e-9);
        for (r, v) in env.rows[0].iter().zip(&h) {
            assert_relative_eq!(*r, v - 2.0 * env.epsilon, epsilon = 1e-9);
        }
    }

    #[test]
    fn envelope_of_moving_trajectory_stays_below() {
        let g = grid();
        let times: Vec<f64> = (0..160).map(|i| i as f64 * 0.00625).collect();
        let heights: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| g.sample(|x| 1.0 + 0.2 * (2.0 * PI * x).sin() * (1.0 + 0.3 * (3.0 * t).sin())))
            .collect();
        let traj = HeightTrajectory::new(g, 2.0, times, heights).unwrap();
        let env = build_lower_envelope(&traj, 0.25, 0.2).unwrap();
        assert!(env.max_gap <= 0.25);
        for (i, &t) in traj.times.iter().enumerate() {
            let row = env.row_for_time(t);
            for (a, b) in row.iter().zip(&traj.heights[i]) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn envelope_rejects_unresolvable_delta() {
        let g = Grid1::new(8, 1.0);
        let h = g.sample(|x| 0.5 * (1.0 - (2.0 * PI * x).cos()));
        let traj = constant_trajectory(g, h, 2.0);
        assert!(build_lower_envelope(&traj, 1e-6, 0.2).is_err());
    }
}
