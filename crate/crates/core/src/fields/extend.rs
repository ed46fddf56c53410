//! Bar-extension of fluid velocities to the container, its one-sided inverse,
//! interface traces and the vertical contraction.

use ndarray::Array2;

use super::{ContainerGrid, CouplePair, ExtendedField, RegionTag};
use crate::error::{Error, Result};
use crate::fourier::sobolev_norm;
use crate::grid::centered_diff;

/// Extend a fluid velocity, sampled through `v(x, y)` on the film
/// `0 < y < h(x)`, to the whole container: beam velocity `d e_2` above the
/// graph, zero on the substrate.
///
/// The sampler must match `d e_2` on the graph; the maximal mismatch beyond
/// `trace_tol` is rejected.
pub fn extend(
    v: &dyn Fn(f64, f64) -> (f64, f64),
    d: &[f64],
    height: &[f64],
    grid: ContainerGrid,
    trace_tol: f64,
) -> Result<CouplePair> {
    if d.len() != grid.x.n || height.len() != grid.x.n {
        return Err(Error::GridMismatch("arrays off the container grid".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..grid.x.n {
        if height[i] > grid.dy() {
            let (t1, t2) = v(grid.x.node(i), height[i]);
            worst = worst.max(t1.abs()).max((t2 - d[i]).abs());
        }
    }
    if worst > trace_tol {
        return Err(Error::ConstraintViolation {
            what: "fluid trace at the graph must equal the beam velocity".into(),
            residual: worst,
            tolerance: trace_tol,
        });
    }

    let mut field = ExtendedField::zeros(grid, height.to_vec())?;
    for i in 0..grid.x.n {
        let x = grid.x.node(i);
        for j in 0..grid.rows() {
            match field.tag(i, j) {
                RegionTag::Substrate => {}
                RegionTag::Fluid => {
                    let (a, b) = v(x, grid.y(j));
                    field.u1[[i, j]] = a;
                    field.u2[[i, j]] = b;
                }
                RegionTag::Medium => {
                    field.u2[[i, j]] = d[i];
                }
            }
        }
    }
    CouplePair::new(field, d.to_vec(), trace_tol.max(1e-12))
}

/// Fluid-region restriction of an extended field: the film samples plus the
/// medium velocity. `extend_restricted` reproduces the original bit for bit
/// on region-conforming fields.
#[derive(Debug, Clone)]
pub struct Restricted {
    pub grid: ContainerGrid,
    pub height: Vec<f64>,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
    pub d: Vec<f64>,
}

pub fn restrict(pair: &CouplePair) -> Restricted {
    let f = &pair.field;
    let mut u1 = Array2::zeros(f.u1.raw_dim());
    let mut u2 = Array2::zeros(f.u2.raw_dim());
    for i in 0..f.grid.x.n {
        for j in 0..f.grid.rows() {
            if f.tag(i, j) == RegionTag::Fluid {
                u1[[i, j]] = f.u1[[i, j]];
                u2[[i, j]] = f.u2[[i, j]];
            }
        }
    }
    Restricted {
        grid: f.grid,
        height: f.height.clone(),
        u1,
        u2,
        d: pair.d.clone(),
    }
}

pub fn extend_restricted(r: &Restricted) -> Result<CouplePair> {
    let mut field = ExtendedField::zeros(r.grid, r.height.clone())?;
    for i in 0..r.grid.x.n {
        for j in 0..r.grid.rows() {
            match field.tag(i, j) {
                RegionTag::Substrate => {}
                RegionTag::Fluid => {
                    field.u1[[i, j]] = r.u1[[i, j]];
                    field.u2[[i, j]] = r.u2[[i, j]];
                }
                RegionTag::Medium => {
                    field.u2[[i, j]] = r.d[i];
                }
            }
        }
    }
    CouplePair::new(field, r.d.clone(), f64::INFINITY)
}

/// Both velocity components sampled along the graph `y = h(x)`.
#[derive(Debug, Clone)]
pub struct TracePair {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl TracePair {
    /// Fourier-multiplier `H^{1/2}` norm of the trace vector.
    pub fn h_half_norm(&self, length: f64) -> f64 {
        (sobolev_norm(&self.u1, length, 0.5).powi(2) + sobolev_norm(&self.u2, length, 0.5).powi(2))
            .sqrt()
    }
}

/// Sample a container field along the graph of `h` (linear in `y`, exact in
/// `x` on nodes).
pub fn trace_at_interface(field: &ExtendedField, height: &[f64]) -> Result<TracePair> {
    if height.len() != field.grid.x.n {
        return Err(Error::GridMismatch("height array off the grid".into()));
    }
    let top = 2.0 * field.grid.m;
    if height.iter().any(|&h| h > top + 1e-12) {
        return Err(Error::invalid("deformation exceeds the container"));
    }
    let mut u1 = Vec::with_capacity(field.grid.x.n);
    let mut u2 = Vec::with_capacity(field.grid.x.n);
    for (i, &h) in height.iter().enumerate() {
        let (a, b) = field.sample_column(i, h);
        u1.push(a);
        u2.push(b);
    }
    Ok(TracePair { u1, u2 })
}

/// Gluing quality of an extension: normal-trace jumps across the graph and
/// the floor, and the interior divergence residual.
#[derive(Debug, Clone)]
pub struct GluingReport {
    pub normal_jump_interface: f64,
    pub normal_jump_floor: f64,
    pub interior_divergence: f64,
}

pub fn gluing_report(pair: &CouplePair) -> Result<GluingReport> {
    let f = &pair.field;
    let dx = f.grid.x.dx();
    let hx = centered_diff(&f.height, dx);
    let trace = trace_at_interface(f, &f.height)?;
    let mut jump_top = 0.0f64;
    for i in 0..f.grid.x.n {
        // (v - d e_2) . n along the graph, n ~ (-h', 1).
        let scale = (1.0 + hx[i] * hx[i]).sqrt();
        let jn = (-trace.u1[i] * hx[i] + (trace.u2[i] - pair.d[i])) / scale;
        jump_top = jump_top.max(jn.abs());
    }
    // Normal component extrapolated to the floor from the fluid side; the
    // substrate side is identically zero.
    let j0 = f.grid.row_zero();
    let mut jump_floor = 0.0f64;
    for i in 0..f.grid.x.n {
        let e = 2.0 * f.u2[[i, j0 + 1]] - f.u2[[i, j0 + 2]];
        jump_floor = jump_floor.max(e.abs());
    }
    Ok(GluingReport {
        normal_jump_interface: jump_top,
        normal_jump_floor: jump_floor,
        interior_divergence: f.divergence_interior_max(),
    })
}

/// Vertical contraction `(sigma u1(x, sigma y), u2(x, sigma y))`, which
/// squeezes the support of a subgraph field below `h / sigma` and preserves
/// the divergence-free constraint. Samples beyond the container are zero.
pub fn vertical_contraction(field: &ExtendedField, sigma: f64) -> Result<ExtendedField> {
    if sigma < 1.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "contraction factor must be >= 1, got {sigma}"
        )));
    }
    let grid = field.grid;
    let height: Vec<f64> = field.height.iter().map(|h| (h / sigma).max(0.0)).collect();
    let mut out = ExtendedField::zeros(grid, height)?;
    let top = 2.0 * grid.m;
    for i in 0..grid.x.n {
        for j in 0..grid.rows() {
            let y = grid.y(j);
            let ys = sigma * y;
            if ys > top {
                continue;
            }
            let (a, b) = field.sample_column(i, ys);
            out.u1[[i, j]] = sigma * a;
            out.u2[[i, j]] = b;
        }
    }
    Ok(out)
}
