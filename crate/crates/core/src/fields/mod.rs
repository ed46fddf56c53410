//! Discrete function spaces on the fixed container
//! `Omega = (0, L) x (-1, 2M)` and the constructive operators acting on them:
//! bar-extension of fluid velocities, divergence-free lifting of beam
//! velocities, stream functions, vertical contraction, fractional Sobolev
//! norms, the competitor construction for projection errors, and the smooth
//! cutoff used near contact points.
//!
//! Fields are collocated on container nodes: `x_i = i dx` periodic,
//! `y_j = -1 + j dy`. The substrate occupies `y <= 0`, the fluid film the
//! nodes with `0 < y < h(x)`, and the virtual medium everything above.

mod competitor;
mod cutoff;
mod extend;
mod lift;
mod mollify;
mod sobolev;
mod stream;

pub use competitor::projector_competitor;
pub use cutoff::{contact_cutoff, CutoffResult, StripCheck};
pub use extend::{extend, extend_restricted, gluing_report, restrict, trace_at_interface,
                 vertical_contraction, GluingReport, Restricted, TracePair};
pub use lift::{lift, smooth_step, smooth_step_deriv};
pub use mollify::{convolve_periodic, mollify_periodic};
pub use sobolev::{h2s_norm_1d, hs_norm, pair_xs_distance, xs_norm, SobolevConfig};
pub use stream::{stream_function, StreamFunction};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mean, Grid1};

/// Node classification inside the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    /// `y <= 0`; velocities vanish here.
    Substrate,
    /// `0 < y < h(x)`.
    Fluid,
    /// `y >= h(x)`; velocities are vertical and constant in `y` here.
    Medium,
}

/// Uniform node grid on the container `(0, L) x (-1, 2M)`.
///
/// The vertical spacing is `1/q` for an integer `q`, so that `y = 0` and
/// `y = M` land exactly on node rows; `M` is rounded up to the next multiple
/// of `1/q` if needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainerGrid {
    pub x: Grid1,
    /// Nodes per unit height.
    pub q: usize,
    /// Container height bound `M` (grid aligned).
    pub m: f64,
    /// Number of vertical cells; there are `ny + 1` node rows.
    pub ny: usize,
}

impl ContainerGrid {
    pub fn new(x: Grid1, m_target: f64, q: usize) -> Result<Self> {
        if m_target < 1.0 {
            return Err(Error::invalid("container height must be at least 1"));
        }
        if q < 4 {
            return Err(Error::invalid("need at least 4 nodes per unit height"));
        }
        let mq = (m_target * q as f64).ceil() as usize;
        let m = mq as f64 / q as f64;
        // y runs from -1 to 2M.
        let ny = q + 2 * mq;
        Ok(ContainerGrid { x, q, m, ny })
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        1.0 / self.q as f64
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dy()
    }

    /// Row index of `y = 0`.
    #[inline]
    pub fn row_zero(&self) -> usize {
        self.q
    }

    /// Row index of `y = M`.
    #[inline]
    pub fn row_m(&self) -> usize {
        self.q + (self.m * self.q as f64).round() as usize
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.ny + 1
    }

    /// Trapezoid weight of row `j` for vertical quadrature.
    #[inline]
    pub fn y_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.dy()
        } else {
            self.dy()
        }
    }

    pub fn tag(&self, h: &[f64], i: usize, j: usize) -> RegionTag {
        let y = self.y(j);
        if y <= 0.0 {
            RegionTag::Substrate
        } else if y < h[i] {
            RegionTag::Fluid
        } else {
            RegionTag::Medium
        }
    }
}

/// Velocity field on the container, tagged by the deformation that produced
/// it. Substrate nodes carry zero velocity, medium nodes a purely vertical
/// velocity constant along each column.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField {
    pub grid: ContainerGrid,
    /// Interface height per column.
    pub height: Vec<f64>,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
}

impl ExtendedField {
    pub fn zeros(grid: ContainerGrid, height: Vec<f64>) -> Result<Self> {
        if height.len() != grid.x.n {
            return Err(Error::GridMismatch("height array off the container grid".into()));
        }
        let shape = (grid.x.n, grid.rows());
        Ok(ExtendedField {
            grid,
            height,
            u1: Array2::zeros(shape),
            u2: Array2::zeros(shape),
        })
    }

    pub fn tag(&self, i: usize, j: usize) -> RegionTag {
        self.grid.tag(&self.height, i, j)
    }

    /// Bilinear sample, periodic in `x`, clamped in `y`.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let nx = self.grid.x.n;
        let dx = self.grid.x.dx();
        let sx = (x / dx).rem_euclid(nx as f64);
        let i0 = sx.floor() as usize % nx;
        let fx = sx - sx.floor();
        let i1 = (i0 + 1) % nx;

        let dy = self.grid.dy();
        let sy = ((y + 1.0) / dy).clamp(0.0, self.grid.ny as f64);
        let j0 = (sy.floor() as usize).min(self.grid.ny - 1);
        let fy = sy - j0 as f64;
        let j1 = j0 + 1;

        let lerp = |f: &Array2<f64>| {
            let a = f[[i0, j0]] * (1.0 - fx) + f[[i1, j0]] * fx;
            let b = f[[i0, j1]] * (1.0 - fx) + f[[i1, j1]] * fx;
            a * (1.0 - fy) + b * fy
        };
        (lerp(&self.u1), lerp(&self.u2))
    }

    /// Linear sample along a single column (exact in `x` on nodes).
    pub fn sample_column(&self, i: usize, y: f64) -> (f64, f64) {
        let dy = self.grid.dy();
        let sy = ((y + 1.0) / dy).clamp(0.0, self.grid.ny as f64);
        let j0 = (sy.floor() as usize).min(self.grid.ny - 1);
        let fy = sy - j0 as f64;
        let j1 = j0 + 1;
        (
            self.u1[[i, j0]] * (1.0 - fy) + self.u1[[i, j1]] * fy,
            self.u2[[i, j0]] * (1.0 - fy) + self.u2[[i, j1]] * fy,
        )
    }

    /// Centered-difference divergence at an interior node.
    pub fn divergence_at(&self, i: usize, j: usize) -> f64 {
        let nx = self.grid.x.n;
        let dx = self.grid.x.dx();
        let dy = self.grid.dy();
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        (self.u1[[ip, j]] - self.u1[[im, j]]) / (2.0 * dx)
            + (self.u2[[i, j + 1]] - self.u2[[i, j - 1]]) / (2.0 * dy)
    }

    /// Max divergence over interior nodes whose centered stencil stays in a
    /// single region (the glue seams carry the jump in the continuum object
    /// and are checked through normal traces instead).
    pub fn divergence_interior_max(&self) -> f64 {
        let nx = self.grid.x.n;
        let mut worst = 0.0f64;
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            for j in 1..self.grid.ny {
                let t = self.tag(i, j);
                if self.tag(ip, j) == t
                    && self.tag(im, j) == t
                    && self.tag(i, j + 1) == t
                    && self.tag(i, j - 1) == t
                {
                    worst = worst.max(self.divergence_at(i, j).abs());
                }
            }
        }
        worst
    }

    /// Squared `L^2(Omega)` norm (trapezoid in `y`).
    pub fn l2_norm_sq(&self) -> f64 {
        let dx = self.grid.x.dx();
        let mut sum = 0.0;
        for i in 0..self.grid.x.n {
            for j in 0..self.grid.rows() {
                let w = self.grid.y_weight(j) * dx;
                sum += w * (self.u1[[i, j]].powi(2) + self.u2[[i, j]].powi(2));
            }
        }
        sum
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Space `L^4(Omega)` norm.
    pub fn l4_norm(&self) -> f64 {
        let dx = self.grid.x.dx();
        let mut sum = 0.0;
        for i in 0..self.grid.x.n {
            for j in 0..self.grid.rows() {
                let w = self.grid.y_weight(j) * dx;
                let sq = self.u1[[i, j]].powi(2) + self.u2[[i, j]].powi(2);
                sum += w * sq * sq;
            }
        }
        sum.powf(0.25)
    }

    /// Squared discrete `H^1` norm over the subgraph region `y < h` (plus
    /// substrate), skipping gradient stencils that straddle the interface.
    pub fn h1_norm_lower_sq(&self) -> f64 {
        let nx = self.grid.x.n;
        let dx = self.grid.x.dx();
        let dy = self.grid.dy();
        let mut sum = 0.0;
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            for j in 1..self.grid.ny {
                if self.grid.y(j + 1) >= self.height[i] {
                    continue;
                }
                let w = dy * dx;
                let g = |f: &Array2<f64>| {
                    let gx = (f[[ip, j]] - f[[im, j]]) / (2.0 * dx);
                    let gy = (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * dy);
                    gx * gx + gy * gy + f[[i, j]] * f[[i, j]]
                };
                sum += w * (g(&self.u1) + g(&self.u2));
            }
        }
        sum
    }

    /// Difference field on a shared grid.
    pub fn sub(&self, other: &ExtendedField) -> Result<ExtendedField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("container grids differ".into()));
        }
        let mut out = self.clone();
        out.u1 -= &other.u1;
        out.u2 -= &other.u2;
        Ok(out)
    }
}

/// A coupled velocity pair: an extended field together with the beam-velocity
/// proxy it matches on the top boundary `y = M`.
#[derive(Debug, Clone)]
pub struct CouplePair {
    pub field: ExtendedField,
    pub d: Vec<f64>,
}

impl CouplePair {
    /// Validates the matching condition at `y = M` and the mean-free
    /// constraint on `d` against the given tolerance.
    pub fn new(field: ExtendedField, d: Vec<f64>, tol: f64) -> Result<Self> {
        if d.len() != field.grid.x.n {
            return Err(Error::GridMismatch("beam array off the container grid".into()));
        }
        let md = mean(&d).abs();
        if md > tol {
            return Err(Error::ConstraintViolation {
                what: "mean-free beam velocity".into(),
                residual: md,
                tolerance: tol,
            });
        }
        let jm = field.grid.row_m();
        let mut worst = 0.0f64;
        for (i, &di) in d.iter().enumerate() {
            worst = worst.max((field.u2[[i, jm]] - di).abs());
        }
        if worst > tol {
            return Err(Error::ConstraintViolation {
                what: "top-boundary trace must match the beam velocity".into(),
                residual: worst,
                tolerance: tol,
            });
        }
        Ok(CouplePair { field, d })
    }
}
