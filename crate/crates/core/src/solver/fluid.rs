//! Incompressible flow on the mapped reference rectangle.
//!
//! The film `0 < y < h(x, t)` is pulled back to `(0, L) x (0, 1)` by
//! `y = h(x, t) z`. Velocities keep their physical components but live on a
//! staggered reference grid:
//!
//! * `u` (horizontal) on x-faces `(i dx, (j + 1/2) dz)`, shape `(nx, nz)`;
//! * `w` (vertical) on z-faces `((i + 1/2) dx, j dz)`, shape `(nx, nz + 1)`,
//!   with row `0` the floor (no slip) and row `nz` the interface trace;
//! * `p` at cell centers, shape `(nx, nz)`.
//!
//! With `U = h u` and `W = w - z h_x ubar`, the scaled incompressibility
//! reads `dU/dx + dW/dz = 0` cell by cell, and the discrete pressure
//! gradient is defined as the exact negative transpose of that divergence,
//! so the projection operator is symmetric positive definite. The viscous
//! term is assembled from a quadrature of `int h |grad_mapped f|^2`, making
//! the implicit operator symmetric and its dissipation identical to the
//! quadrature the energy ledger uses. Transport is explicit, in conservative
//! flux form with the mesh flux `z h_t` subtracted.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1;

use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacGrid {
    pub nx: usize,
    pub nz: usize,
    pub length: f64,
}

impl MacGrid {
    pub fn new(nx: usize, nz: usize, length: f64) -> Self {
        assert!(nx >= 4 && nz >= 4);
        MacGrid { nx, nz, length }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        1.0 / self.nz as f64
    }

    pub fn beam_grid(&self) -> Grid1 {
        Grid1::new(self.nx, self.length)
    }
}

/// Fluid state on the mapped grid. The top row of `w` carries the interface
/// velocity; `u` is zero on both walls by the no-slip and pure-transverse
/// interface conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub grid: MacGrid,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub p: Array2<f64>,
    pub time: f64,
}

impl FluidState {
    pub fn rest(grid: MacGrid) -> Self {
        FluidState {
            grid,
            u: Array2::zeros((grid.nx, grid.nz)),
            w: Array2::zeros((grid.nx, grid.nz + 1)),
            p: Array2::zeros((grid.nx, grid.nz)),
            time: 0.0,
        }
    }

    pub fn max_speed(&self) -> f64 {
        let mu = self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mw = self.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        mu.max(mw)
    }
}

/// Geometry of one time slab: interface heights at both ends of the step and
/// the derived metric arrays (all metric terms evaluated on the new
/// geometry, mesh velocity from the difference quotient).
#[derive(Debug, Clone)]
pub struct Metric {
    pub grid: MacGrid,
    /// New height at u-face abscissae `i dx`.
    pub h_face: Vec<f64>,
    /// New height at cell-center abscissae.
    pub h_center: Vec<f64>,
    /// Old height at faces / centers.
    pub h_face_old: Vec<f64>,
    pub h_center_old: Vec<f64>,
    /// Slope of the new height at centers (exact face difference) and faces.
    pub hx_center: Vec<f64>,
    pub hx_face: Vec<f64>,
    /// Mesh velocity `(h_new - h_old) / dt` at centers.
    pub ht_center: Vec<f64>,
    pub dt: f64,
}

impl Metric {
    pub fn build(grid: MacGrid, h_old: &[f64], h_new: &[f64], dt: f64) -> Result<Metric> {
        if h_old.len() != grid.nx || h_new.len() != grid.nx {
            return Err(Error::GridMismatch("height arrays off the fluid grid".into()));
        }
        if h_new.iter().any(|&h| h <= 0.0) {
            return Err(Error::invalid(
                "interface height must stay positive inside the fluid solve",
            ));
        }
        let nx = grid.nx;
        let dx = grid.dx();
        let mut h_center = vec![0.0; nx];
        let mut h_center_old = vec![0.0; nx];
        let mut hx_center = vec![0.0; nx];
        let mut hx_face = vec![0.0; nx];
        let mut ht_center = vec![0.0; nx];
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            h_center[i] = 0.5 * (h_new[i] + h_new[ip]);
            h_center_old[i] = 0.5 * (h_old[i] + h_old[ip]);
            hx_center[i] = (h_new[ip] - h_new[i]) / dx;
            hx_face[i] = (h_new[ip] - h_new[im]) / (2.0 * dx);
            ht_center[i] = (h_center[i] - h_center_old[i]) / dt;
        }
        Ok(Metric {
            grid,
            h_face: h_new.to_vec(),
            h_center,
            h_face_old: h_old.to_vec(),
            h_center_old,
            hx_center,
            hx_face,
            ht_center,
            dt,
        })
    }

    /// Static geometry (for diagnostics on a frozen interface).
    pub fn frozen(grid: MacGrid, h: &[f64]) -> Result<Metric> {
        Metric::build(grid, h, h, 1.0)
    }
}

/// Horizontal velocity averaged to the z-face `(i + 1/2, j)`; wall rows use
/// the no-slip / pure-transverse values.
#[inline]
fn ubar(u: &Array2<f64>, nx: usize, nz: usize, i: usize, j: usize) -> f64 {
    if j == 0 || j == nz {
        0.0
    } else {
        let ip = (i + 1) % nx;
        0.25 * (u[[i, j - 1]] + u[[ip, j - 1]] + u[[i, j]] + u[[ip, j]])
    }
}

/// Contravariant vertical flux `W = w - z h_x ubar` at z-faces.
fn vertical_flux(u: &Array2<f64>, w: &Array2<f64>, m: &Metric) -> Array2<f64> {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dz = m.grid.dz();
    let mut out = Array2::zeros((nx, nz + 1));
    for i in 0..nx {
        for j in 0..=nz {
            let z = j as f64 * dz;
            out[[i, j]] = w[[i, j]] - z * m.hx_center[i] * ubar(u, nx, nz, i, j);
        }
    }
    out
}

/// Scaled divergence `dU/dx + dW/dz` per cell (this is `h div u`).
pub fn divergence(u: &Array2<f64>, w: &Array2<f64>, m: &Metric) -> Array2<f64> {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let mut div = Array2::zeros((nx, nz));
    divergence_into(u, w, m, div.as_slice_mut().unwrap());
    div
}

/// Allocation-free divergence; `out` is row-major `(nx, nz)`.
fn divergence_into(u: &Array2<f64>, w: &Array2<f64>, m: &Metric, out: &mut [f64]) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let mut w_lo = w[[i, 0]]; // z = 0 face: metric term vanishes
        for j in 0..nz {
            let z_hi = (j + 1) as f64 * dz;
            let w_hi = w[[i, j + 1]] - z_hi * m.hx_center[i] * ubar(u, nx, nz, i, j + 1);
            out[i * nz + j] = (m.h_face[ip] * u[[ip, j]] - m.h_face[i] * u[[i, j]]) / dx
                + (w_hi - w_lo) / dz;
            w_lo = w_hi;
        }
    }
}

/// Exact negative transpose of [`divergence`] in the plain-sum pairing:
/// `sum_cells div(v) p = - sum_faces v . gradient(p)`, with Dirichlet rows of
/// `w` excluded. Consistent with the scaled pressure gradient
/// `(h p_x - z h_x p_z, p_z)`.
pub fn gradient(p: &Array2<f64>, m: &Metric) -> (Array2<f64>, Array2<f64>) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let mut gu = Array2::zeros((nx, nz));
    let mut gw = Array2::zeros((nx, nz + 1));
    gradient_into(
        p.as_slice().unwrap(),
        m,
        gu.as_slice_mut().unwrap(),
        gw.as_slice_mut().unwrap(),
    );
    (gu, gw)
}

/// Allocation-free gradient; `p` is row-major `(nx, nz)`, `gw` has `nz + 1`
/// rows with the Dirichlet rows zeroed.
fn gradient_into(p: &[f64], m: &Metric, gu: &mut [f64], gw: &mut [f64]) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let pv = |i: usize, j: usize| p[i * nz + j];
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        for j in 0..nz {
            // Transpose of the U-part.
            let mut a = m.h_face[i] * (pv(im, j) - pv(i, j)) / dx;
            // Transpose of the metric coupling inside W.
            for &ic in &[im, i] {
                for b in [j, j + 1] {
                    if b >= 1 && b <= nz - 1 {
                        let z = b as f64 * dz;
                        a -= 0.25 * z * m.hx_center[ic] * (pv(ic, b - 1) - pv(ic, b)) / dz;
                    }
                }
            }
            gu[i * nz + j] = -a;
        }
        let wcols = nz + 1;
        gw[i * wcols] = 0.0;
        gw[i * wcols + nz] = 0.0;
        for j in 1..nz {
            gw[i * wcols + j] = -(pv(i, j - 1) - pv(i, j)) / dz;
        }
    }
}

/// Shared projection kernel: solve `A phi = scale * div(u, w)` with
/// `A = -D M^{-1} G` and correct the velocities in place. Returns the
/// pressure field, the CG iteration count and the removed mean of the
/// right-hand side.
fn project_kernel(
    u: &mut Array2<f64>,
    w: &mut Array2<f64>,
    m: &Metric,
    scale: f64,
    warm: Option<&Array2<f64>>,
    tols: &FluidTols,
) -> Result<(Array2<f64>, usize, f64)> {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let div = divergence(u, w, m);
    let mut b: Vec<f64> = div.iter().map(|v| -scale * v).collect();
    let compat = b.iter().sum::<f64>() / b.len() as f64;
    for v in &mut b {
        *v -= compat;
    }

    // Preallocated scratch for the operator application.
    let mut gu = vec![0.0; nx * nz];
    let mut gw = vec![0.0; nx * (nz + 1)];
    let mut ua = Array2::<f64>::zeros((nx, nz));
    let mut wa = Array2::<f64>::zeros((nx, nz + 1));
    let mut apply = |x: &[f64], out: &mut [f64]| {
        gradient_into(x, m, &mut gu, &mut gw);
        for i in 0..nx {
            for j in 0..nz {
                ua[[i, j]] = gu[i * nz + j] / m.h_face[i];
            }
            for j in 1..nz {
                wa[[i, j]] = gw[i * (nz + 1) + j] / m.h_center[i];
            }
        }
        divergence_into(&ua, &wa, m, out);
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        for v in out.iter_mut() {
            *v = -(*v - mean);
        }
    };
    let mut xp: Vec<f64> = match warm {
        Some(p0) => p0.iter().copied().collect(),
        None => vec![0.0; nx * nz],
    };
    let mean_xp = xp.iter().sum::<f64>() / xp.len() as f64;
    for v in &mut xp {
        *v -= mean_xp;
    }
    let mut flat = FlatProjectionInverse::new(m);
    let mut precond = |r: &[f64], z: &mut [f64]| flat.solve(r, z);
    let iters = pcg(
        &mut apply,
        Some(&mut precond),
        &b,
        &mut xp,
        tols.cg_rtol,
        tols.cg_atol,
        tols.cg_max_iters,
    )?;
    let p = Array2::from_shape_vec((nx, nz), xp).unwrap();

    let (mut cu, mut cw) = gradient(&p, m);
    for i in 0..nx {
        for j in 0..nz {
            cu[[i, j]] /= m.h_face[i];
            u[[i, j]] -= cu[[i, j]] / scale;
        }
        for j in 1..nz {
            cw[[i, j]] /= m.h_center[i];
            w[[i, j]] -= cw[[i, j]] / scale;
        }
    }
    Ok((p, iters, compat))
}

/// Quadrature-point gradients of the horizontal component: the mapped
/// x-derivative at cell centers and the raw z-derivative at x-face corner
/// rows (half-cell one-sided at the walls, where the component vanishes).
fn grad_u1(u: &Array2<f64>, m: &Metric) -> (Array2<f64>, Array2<f64>) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let mut dzu = Array2::zeros((nx, nz + 1));
    for i in 0..nx {
        dzu[[i, 0]] = 2.0 * u[[i, 0]] / dz;
        dzu[[i, nz]] = -2.0 * u[[i, nz - 1]] / dz;
        for j in 1..nz {
            dzu[[i, j]] = (u[[i, j]] - u[[i, j - 1]]) / dz;
        }
    }
    let mut ga = Array2::zeros((nx, nz));
    for i in 0..nx {
        let ip = (i + 1) % nx;
        for j in 0..nz {
            let zc = (j as f64 + 0.5) * dz;
            let dzbar = 0.25
                * (dzu[[i, j]] + dzu[[ip, j]] + dzu[[i, j + 1]] + dzu[[ip, j + 1]]);
            ga[[i, j]] = (u[[ip, j]] - u[[i, j]]) / dx
                - zc * m.hx_center[i] / m.h_center[i] * dzbar;
        }
    }
    (ga, dzu)
}

/// Scratch space for the weak viscous applications.
struct ViscWorkspace {
    ga: Array2<f64>,
    dz_scratch: Array2<f64>,
    s: Array2<f64>,
}

impl ViscWorkspace {
    fn for_u1(grid: MacGrid) -> Self {
        ViscWorkspace {
            ga: Array2::zeros((grid.nx, grid.nz)),
            dz_scratch: Array2::zeros((grid.nx, grid.nz + 1)),
            s: Array2::zeros((grid.nx, grid.nz + 1)),
        }
    }

    fn for_u2(grid: MacGrid) -> Self {
        ViscWorkspace {
            ga: Array2::zeros((grid.nx, grid.nz + 1)),
            dz_scratch: Array2::zeros((grid.nx, grid.nz)),
            s: Array2::zeros((grid.nx, grid.nz)),
        }
    }
}

/// Weak viscous action on the horizontal component: `out` satisfies
/// `sum out[i,j] f[i,j] = int h |grad_mapped f|^2` for the quadrature used
/// here (so `out` is symmetric positive semidefinite as an operator).
fn visc_weak_u1(u: &Array2<f64>, m: &Metric) -> Array2<f64> {
    let mut ws = ViscWorkspace::for_u1(m.grid);
    let mut out = Array2::zeros((m.grid.nx, m.grid.nz));
    visc_weak_u1_into(u, m, &mut ws, &mut out);
    out
}

fn visc_weak_u1_into(
    u: &Array2<f64>,
    m: &Metric,
    ws: &mut ViscWorkspace,
    out: &mut Array2<f64>,
) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let dv = dx * dz;

    let dzu = &mut ws.dz_scratch;
    for i in 0..nx {
        dzu[[i, 0]] = 2.0 * u[[i, 0]] / dz;
        dzu[[i, nz]] = -2.0 * u[[i, nz - 1]] / dz;
        for j in 1..nz {
            dzu[[i, j]] = (u[[i, j]] - u[[i, j - 1]]) / dz;
        }
    }
    // ra = weighted mapped x-derivative at centers.
    let ra = &mut ws.ga;
    for i in 0..nx {
        let ip = (i + 1) % nx;
        for j in 0..nz {
            let zc = (j as f64 + 0.5) * dz;
            let dzbar =
                0.25 * (dzu[[i, j]] + dzu[[ip, j]] + dzu[[i, j + 1]] + dzu[[ip, j + 1]]);
            let ga = (u[[ip, j]] - u[[i, j]]) / dx
                - zc * m.hx_center[i] / m.h_center[i] * dzbar;
            ra[[i, j]] = m.h_center[i] * ga * dv;
        }
    }
    // s = corner accumulators: z-derivative weights plus the metric scatter.
    let s = &mut ws.s;
    for i in 0..nx {
        for j in 0..=nz {
            let wz = if j == 0 || j == nz { 0.5 * dz } else { dz };
            s[[i, j]] = dzu[[i, j]] / m.h_face[i] * dx * wz;
        }
    }
    for i in 0..nx {
        let ip = (i + 1) % nx;
        for j in 0..nz {
            let zc = (j as f64 + 0.5) * dz;
            let coeff = -0.25 * zc * m.hx_center[i] / m.h_center[i] * ra[[i, j]];
            s[[i, j]] += coeff;
            s[[ip, j]] += coeff;
            s[[i, j + 1]] += coeff;
            s[[ip, j + 1]] += coeff;
        }
    }
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        for j in 0..nz {
            // Transpose of the x-difference, then of the z-differences (wall
            // rows are one-sided, half-cell).
            let lower = if j == 0 { 2.0 / dz } else { 1.0 / dz };
            let upper = if j + 1 == nz { 2.0 / dz } else { 1.0 / dz };
            out[[i, j]] = (ra[[im, j]] - ra[[i, j]]) / dx + s[[i, j]] * lower
                - s[[i, j + 1]] * upper;
        }
    }
}

/// Weak viscous action on the vertical component, over all rows including
/// the Dirichlet ones (the solve masks those; the traction functional needs
/// them).
fn visc_weak_u2(w: &Array2<f64>, m: &Metric) -> Array2<f64> {
    let mut ws = ViscWorkspace::for_u2(m.grid);
    let mut out = Array2::zeros((m.grid.nx, m.grid.nz + 1));
    visc_weak_u2_into(w, m, &mut ws, &mut out);
    out
}

fn visc_weak_u2_into(
    w: &Array2<f64>,
    m: &Metric,
    ws: &mut ViscWorkspace,
    out: &mut Array2<f64>,
) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();

    let dzw = &mut ws.dz_scratch;
    for i in 0..nx {
        for j in 0..nz {
            dzw[[i, j]] = (w[[i, j + 1]] - w[[i, j]]) / dz;
        }
    }
    // ra = full quadrature weight h * ga * dx * wz at corner rows.
    let ra = &mut ws.ga;
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        for j in 0..=nz {
            let z = j as f64 * dz;
            let dzbar = if j == 0 {
                0.5 * (dzw[[im, 0]] + dzw[[i, 0]])
            } else if j == nz {
                0.5 * (dzw[[im, nz - 1]] + dzw[[i, nz - 1]])
            } else {
                0.25 * (dzw[[im, j - 1]] + dzw[[i, j - 1]] + dzw[[im, j]] + dzw[[i, j]])
            };
            let ga = (w[[i, j]] - w[[im, j]]) / dx - z * m.hx_face[i] / m.h_face[i] * dzbar;
            let wz = if j == 0 || j == nz { 0.5 * dz } else { dz };
            ra[[i, j]] = m.h_face[i] * ga * dx * wz;
        }
    }
    // s = center accumulators: z-derivative weights plus the metric scatter.
    let s = &mut ws.s;
    for i in 0..nx {
        for j in 0..nz {
            s[[i, j]] = dzw[[i, j]] / m.h_center[i] * dx * dz;
        }
    }
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        for j in 0..=nz {
            let z = j as f64 * dz;
            let coeff = -z * m.hx_face[i] / m.h_face[i] * ra[[i, j]];
            if j == 0 {
                s[[im, 0]] += 0.5 * coeff;
                s[[i, 0]] += 0.5 * coeff;
            } else if j == nz {
                s[[im, nz - 1]] += 0.5 * coeff;
                s[[i, nz - 1]] += 0.5 * coeff;
            } else {
                s[[im, j - 1]] += 0.25 * coeff;
                s[[i, j - 1]] += 0.25 * coeff;
                s[[im, j]] += 0.25 * coeff;
                s[[i, j]] += 0.25 * coeff;
            }
        }
    }
    for i in 0..nx {
        let ip = (i + 1) % nx;
        for j in 0..=nz {
            out[[i, j]] = (ra[[i, j]] - ra[[ip, j]]) / dx;
        }
        for j in 0..nz {
            out[[i, j]] -= s[[i, j]] / dz;
            out[[i, j + 1]] += s[[i, j]] / dz;
        }
    }
}

/// Viscous quadrature of `int h |grad_mapped velocity|^2` matching the
/// implicit operator exactly.
pub fn gradient_energy(u: &Array2<f64>, w: &Array2<f64>, m: &Metric) -> f64 {
    let a1 = visc_weak_u1(u, m);
    let a2 = visc_weak_u2(w, m);
    let mut sum = 0.0;
    for (a, f) in a1.iter().zip(u.iter()) {
        sum += a * f;
    }
    for (a, f) in a2.iter().zip(w.iter()) {
        sum += a * f;
    }
    sum
}

/// Explicit transport terms in conservative flux form (volume-scaled), with
/// the mesh flux removed. Returns the u-part on all faces and the w-part on
/// interior rows.
fn convection(state: &FluidState, m: &Metric) -> (Array2<f64>, Array2<f64>) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let dv = dx * dz;
    let u = &state.u;
    let w = &state.w;

    // Advecting fluxes from the current state on the new geometry.
    let mut wrel = vertical_flux(u, w, m);
    for i in 0..nx {
        for j in 0..=nz {
            let z = j as f64 * dz;
            wrel[[i, j]] -= z * m.ht_center[i];
        }
    }
    // U at faces.
    let mut uflux = Array2::zeros((nx, nz));
    for i in 0..nx {
        for j in 0..nz {
            uflux[[i, j]] = m.h_face[i] * u[[i, j]];
        }
    }

    // u-component control volumes. The skew correction subtracts half of
    // the flux divergence times the advected value, which makes the
    // transport exactly energy neutral for these arithmetic interpolations
    // (the flux divergence itself equals minus the mesh velocity once the
    // state is divergence free).
    let mut cu = Array2::zeros((nx, nz));
    {
        // East/west fluxes at centers, north/south at corners.
        let mut fe = Array2::zeros((nx, nz)); // flux at center i
        let mut fe_val = Array2::zeros((nx, nz));
        for i in 0..nx {
            let ip = (i + 1) % nx;
            for j in 0..nz {
                let flux = 0.5 * (uflux[[i, j]] + uflux[[ip, j]]);
                let val = 0.5 * (u[[i, j]] + u[[ip, j]]);
                fe[[i, j]] = flux;
                fe_val[[i, j]] = flux * val;
            }
        }
        let mut gn = Array2::zeros((nx, nz + 1)); // flux at corner rows
        let mut gn_val = Array2::zeros((nx, nz + 1));
        for i in 0..nx {
            let im = (i + nx - 1) % nx;
            for j in 0..=nz {
                let flux = 0.5 * (wrel[[im, j]] + wrel[[i, j]]);
                let val = if j == 0 || j == nz {
                    0.0
                } else {
                    0.5 * (u[[i, j - 1]] + u[[i, j]])
                };
                gn[[i, j]] = flux;
                gn_val[[i, j]] = flux * val;
            }
        }
        for i in 0..nx {
            let im = (i + nx - 1) % nx;
            for j in 0..nz {
                let divform = (fe_val[[i, j]] - fe_val[[im, j]]) / dx
                    + (gn_val[[i, j + 1]] - gn_val[[i, j]]) / dz;
                let fluxdiv =
                    (fe[[i, j]] - fe[[im, j]]) / dx + (gn[[i, j + 1]] - gn[[i, j]]) / dz;
                cu[[i, j]] = dv * (divform - 0.5 * u[[i, j]] * fluxdiv);
            }
        }
    }

    // w-component control volumes (interior rows).
    let mut cw = Array2::zeros((nx, nz + 1));
    {
        let mut fcorner = Array2::zeros((nx, nz + 1));
        let mut fcorner_val = Array2::zeros((nx, nz + 1));
        for i in 0..nx {
            let im = (i + nx - 1) % nx;
            for j in 1..nz {
                let flux = 0.5 * (uflux[[i, j - 1]] + uflux[[i, j]]);
                let val = 0.5 * (w[[im, j]] + w[[i, j]]);
                fcorner[[i, j]] = flux;
                fcorner_val[[i, j]] = flux * val;
            }
        }
        let mut gcenter = Array2::zeros((nx, nz));
        let mut gcenter_val = Array2::zeros((nx, nz));
        for i in 0..nx {
            for j in 0..nz {
                let flux = 0.5 * (wrel[[i, j]] + wrel[[i, j + 1]]);
                let val = 0.5 * (w[[i, j]] + w[[i, j + 1]]);
                gcenter[[i, j]] = flux;
                gcenter_val[[i, j]] = flux * val;
            }
        }
        for i in 0..nx {
            let ip = (i + 1) % nx;
            for j in 1..nz {
                let divform = (fcorner_val[[ip, j]] - fcorner_val[[i, j]]) / dx
                    + (gcenter_val[[i, j]] - gcenter_val[[i, j - 1]]) / dz;
                let fluxdiv = (fcorner[[ip, j]] - fcorner[[i, j]]) / dx
                    + (gcenter[[i, j]] - gcenter[[i, j - 1]]) / dz;
                cw[[i, j]] = dv * (divform - 0.5 * w[[i, j]] * fluxdiv);
            }
        }
    }
    (cu, cw)
}

/// Conjugate gradients on flat slices, matrix free, with an optional
/// symmetric positive preconditioner.
fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: Option<&mut dyn FnMut(&[f64], &mut [f64])>,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    atol: f64,
    max_iters: usize,
) -> Result<usize> {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = (rtol * nb).max(atol);
    let mut rnorm2: f64 = r.iter().map(|v| v * v).sum();
    if rnorm2.sqrt() <= target {
        return Ok(0);
    }
    let mut precond = precond;
    let mut z = vec![0.0; n];
    let mut apply_precond = |r: &[f64], z: &mut [f64], precond: &mut Option<&mut dyn FnMut(&[f64], &mut [f64])>| {
        match precond {
            Some(m) => m(r, z),
            None => z.copy_from_slice(r),
        }
    };
    apply_precond(&r, &mut z, &mut precond);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iters {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::LinearSolve(format!(
                "lost positive definiteness (p.Ap = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm2 = r.iter().map(|v| v * v).sum();
        if rnorm2.sqrt() <= target {
            return Ok(it);
        }
        apply_precond(&r, &mut z, &mut precond);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradients stalled after {max_iters} iterations (residual {:.3e}, target {:.3e})",
        rnorm2.sqrt(),
        target
    )))
}

fn cg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    atol: f64,
    max_iters: usize,
) -> Result<usize> {
    pcg(apply, None, b, x, rtol, atol, max_iters)
}

/// Exact inverse of the flat-interface projection operator
/// `h (-Lap_x) + (1/h) (-Lap_z^Neumann)`, used as a preconditioner for the
/// variable-metric one: Fourier transform in the periodic direction, Thomas
/// solve per mode in the wall-normal direction.
struct FlatProjectionInverse {
    nx: usize,
    nz: usize,
    h_bar: f64,
    dx: f64,
    dz: f64,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    spectrum: Vec<rustfft::num_complex::Complex64>,
    rows: Vec<rustfft::num_complex::Complex64>,
}

impl FlatProjectionInverse {
    fn new(m: &Metric) -> Self {
        let nx = m.grid.nx;
        let nz = m.grid.nz;
        let h_bar = m.h_face.iter().sum::<f64>() / nx as f64;
        let mut planner = rustfft::FftPlanner::new();
        FlatProjectionInverse {
            nx,
            nz,
            h_bar,
            dx: m.grid.dx(),
            dz: m.grid.dz(),
            fft: planner.plan_fft_forward(nx),
            ifft: planner.plan_fft_inverse(nx),
            spectrum: vec![rustfft::num_complex::Complex64::default(); nx * nz],
            rows: vec![rustfft::num_complex::Complex64::default(); nx],
        }
    }

    fn solve(&mut self, r: &[f64], z: &mut [f64]) {
        use rustfft::num_complex::Complex64;
        let (nx, nz) = (self.nx, self.nz);
        // Forward transform per z-row (input is (nx, nz) row major).
        for j in 0..nz {
            for i in 0..nx {
                self.rows[i] = Complex64::new(r[i * nz + j], 0.0);
            }
            self.fft.process(&mut self.rows);
            for i in 0..nx {
                self.spectrum[i * nz + j] = self.rows[i];
            }
        }
        // Per-mode Neumann tridiagonal solve via the Thomas algorithm.
        let czz = 1.0 / (self.h_bar * self.dz * self.dz);
        let mut diag = vec![0.0; nz];
        let mut rhs = vec![Complex64::default(); nz];
        let mut scratch = vec![0.0; nz];
        for k in 0..nx {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / nx as f64;
            let kx2 = self.h_bar * (2.0 - 2.0 * theta.cos()) / (self.dx * self.dx);
            for j in 0..nz {
                let nbrs = if j == 0 || j == nz - 1 { 1.0 } else { 2.0 };
                diag[j] = kx2 + czz * nbrs;
                rhs[j] = self.spectrum[k * nz + j];
            }
            if k == 0 {
                // Singular mode: pin the last value to fix the constant.
                diag[nz - 1] += czz;
            }
            // Thomas forward sweep (off-diagonals are all -czz).
            scratch[0] = -czz / diag[0];
            rhs[0] /= diag[0];
            for j in 1..nz {
                let m = 1.0 / (diag[j] + czz * scratch[j - 1]);
                scratch[j] = -czz * m;
                rhs[j] = (rhs[j] + czz * rhs[j - 1]) * m;
            }
            for j in (0..nz - 1).rev() {
                let upper = rhs[j + 1];
                rhs[j] -= scratch[j] * upper;
            }
            for j in 0..nz {
                self.spectrum[k * nz + j] = rhs[j];
            }
        }
        // Inverse transform per row.
        let scale = 1.0 / nx as f64;
        for j in 0..nz {
            for i in 0..nx {
                self.rows[i] = self.spectrum[i * nz + j];
            }
            self.ifft.process(&mut self.rows);
            for i in 0..nx {
                z[i * nz + j] = self.rows[i].re * scale;
            }
        }
        // Project onto the mean-zero subspace the outer iteration lives in.
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        for v in z.iter_mut() {
            *v -= mean;
        }
    }
}

/// Numerical controls of the fluid step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FluidTols {
    pub cg_rtol: f64,
    pub cg_atol: f64,
    pub cg_max_iters: usize,
    /// Bound on the per-cell physical divergence after projection.
    pub div_tol: f64,
    pub cfl_limit: f64,
}

impl Default for FluidTols {
    fn default() -> Self {
        FluidTols {
            cg_rtol: 1e-11,
            cg_atol: 1e-15,
            cg_max_iters: 20_000,
            div_tol: 1e-10,
            cfl_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FluidStepReport {
    pub cg_iters_u: usize,
    pub cg_iters_w: usize,
    pub cg_iters_p: usize,
    /// Max per-cell physical divergence after projection.
    pub div_residual: f64,
    pub cfl: f64,
    /// Mean removed from the projection right-hand side.
    pub compatibility_defect: f64,
    /// Viscous quadrature `int h |grad u|^2` of the tentative field, the
    /// dissipation the implicit step actually commits.
    pub gradient_energy: f64,
}

pub struct FluidStepOutput {
    pub state: FluidState,
    pub report: FluidStepReport,
    /// Mean-free beam load from the variational residual, and its gauge.
    pub traction: Vec<f64>,
    pub traction_gauge: f64,
}

/// Advective CFL number of a state on a metric.
pub fn cfl_number(state: &FluidState, m: &Metric, dt: f64) -> f64 {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let mut worst = 0.0f64;
    for i in 0..nx {
        for j in 0..nz {
            worst = worst.max(state.u[[i, j]].abs() / dx);
        }
        for j in 0..=nz {
            worst = worst.max(state.w[[i, j]].abs() / (m.h_center[i] * dz));
        }
    }
    worst * dt
}

/// One semi-implicit step: explicit conservative transport, implicit
/// viscosity, exact projection. Dirichlet data: no slip at the floor,
/// `(0, eta_dot_new)` on the interface row.
///
/// `forcing` is an optional body force sampled at physical points of the new
/// geometry (used by manufactured-solution verification).
#[allow(clippy::too_many_arguments)]
pub fn fluid_step(
    state: &FluidState,
    h_old: &[f64],
    h_new: &[f64],
    eta_dot_new: &[f64],
    dt: f64,
    params: &Params,
    tols: &FluidTols,
    forcing: Option<&dyn Fn(f64, f64) -> (f64, f64)>,
) -> Result<FluidStepOutput> {
    let grid = state.grid;
    let (nx, nz) = (grid.nx, grid.nz);
    let dx = grid.dx();
    let dz = grid.dz();
    let dv = dx * dz;
    let m = Metric::build(grid, h_old, h_new, dt)?;

    let cfl = cfl_number(state, &m, dt);
    if cfl > tols.cfl_limit {
        return Err(Error::CflViolation {
            cfl,
            limit: tols.cfl_limit,
            time: state.time,
        });
    }

    let (cu, cw) = convection(state, &m);

    // Forcing sampled on the new geometry, volume scaled by h.
    let mut fu = Array2::zeros((nx, nz));
    let mut fw = Array2::zeros((nx, nz + 1));
    if let Some(f) = forcing {
        for i in 0..nx {
            let x = i as f64 * dx;
            for j in 0..nz {
                let y = m.h_face[i] * (j as f64 + 0.5) * dz;
                fu[[i, j]] = f(x, y).0 * m.h_face[i] * dv;
            }
        }
        for i in 0..nx {
            let xc = (i as f64 + 0.5) * dx;
            for j in 0..=nz {
                let y = m.h_center[i] * j as f64 * dz;
                let wz = if j == 0 || j == nz { 0.5 * dz } else { dz };
                fw[[i, j]] = f(xc, y).1 * m.h_center[i] * dx * wz;
            }
        }
    }

    // ---- tentative horizontal component -------------------------------
    // Incremental pressure correction: the tentative step sees the previous
    // pressure gradient and the projection solves for the increment, whose
    // kinetic-energy cost is higher order in dt.
    let rho = params.rho_f;
    let (gp_u, gp_w) = gradient(&state.p, &m);
    let mut bu = vec![0.0; nx * nz];
    for i in 0..nx {
        for j in 0..nz {
            bu[i * nz + j] = rho * dv * m.h_face_old[i] * state.u[[i, j]] / dt
                - cu[[i, j]]
                + fu[[i, j]]
                - dv * gp_u[[i, j]];
        }
    }
    let mut ws_u = ViscWorkspace::for_u1(grid);
    let mut xa_u = Array2::<f64>::zeros((nx, nz));
    let mut visc_out_u = Array2::<f64>::zeros((nx, nz));
    let mut apply_u = |x: &[f64], out: &mut [f64]| {
        xa_u.as_slice_mut().unwrap().copy_from_slice(x);
        visc_weak_u1_into(&xa_u, &m, &mut ws_u, &mut visc_out_u);
        for i in 0..nx {
            for j in 0..nz {
                out[i * nz + j] = rho * dv * m.h_face[i] * xa_u[[i, j]] / dt
                    + params.mu * visc_out_u[[i, j]];
            }
        }
    };
    let mut xu: Vec<f64> = state.u.iter().copied().collect();
    let iters_u = cg(&mut apply_u, &bu, &mut xu, tols.cg_rtol, tols.cg_atol, tols.cg_max_iters)?;
    let u_star = Array2::from_shape_vec((nx, nz), xu).unwrap();

    // ---- tentative vertical component ----------------------------------
    // Dirichlet rows: 0 at the floor, the new interface velocity on top.
    let mut w_data = Array2::zeros((nx, nz + 1));
    for i in 0..nx {
        let ip = (i + 1) % nx;
        w_data[[i, nz]] = 0.5 * (eta_dot_new[i] + eta_dot_new[ip]);
    }
    let visc_data = visc_weak_u2(&w_data, &m);
    let mut bw = vec![0.0; nx * (nz - 1)];
    for i in 0..nx {
        for j in 1..nz {
            bw[i * (nz - 1) + (j - 1)] = rho * dv * m.h_center_old[i] * state.w[[i, j]] / dt
                - cw[[i, j]]
                + fw[[i, j]]
                - params.mu * visc_data[[i, j]]
                - dv * gp_w[[i, j]];
        }
    }
    let mut ws_w = ViscWorkspace::for_u2(grid);
    let mut xa_w = Array2::<f64>::zeros((nx, nz + 1));
    let mut visc_out_w = Array2::<f64>::zeros((nx, nz + 1));
    let mut apply_w = |x: &[f64], out: &mut [f64]| {
        for i in 0..nx {
            for j in 1..nz {
                xa_w[[i, j]] = x[i * (nz - 1) + (j - 1)];
            }
        }
        visc_weak_u2_into(&xa_w, &m, &mut ws_w, &mut visc_out_w);
        for i in 0..nx {
            for j in 1..nz {
                out[i * (nz - 1) + (j - 1)] = rho * dv * m.h_center[i] * xa_w[[i, j]] / dt
                    + params.mu * visc_out_w[[i, j]];
            }
        }
    };
    let mut xw: Vec<f64> = Vec::with_capacity(nx * (nz - 1));
    for i in 0..nx {
        for j in 1..nz {
            xw.push(state.w[[i, j]]);
        }
    }
    let iters_w = cg(&mut apply_w, &bw, &mut xw, tols.cg_rtol, tols.cg_atol, tols.cg_max_iters)?;
    let mut w_star = w_data;
    for i in 0..nx {
        for j in 1..nz {
            w_star[[i, j]] = xw[i * (nz - 1) + (j - 1)];
        }
    }

    // Dissipation committed by the implicit step.
    let grad_energy = gradient_energy(&u_star, &w_star, &m);

    // ---- projection -----------------------------------------------------
    let mut u_new = u_star.clone();
    let mut w_new = w_star.clone();
    let (dp, iters_p, compat) =
        project_kernel(&mut u_new, &mut w_new, &m, rho / dt, None, tols)?;
    let mut p = state.p.clone();
    p += &dp;
    let p_mean = p.iter().sum::<f64>() / p.len() as f64;
    p.mapv_inplace(|v| v - p_mean);

    let div_new = divergence(&u_new, &w_new, &m);
    let mut div_residual = 0.0f64;
    for i in 0..nx {
        for j in 0..nz {
            div_residual = div_residual.max((div_new[[i, j]] / m.h_center[i]).abs());
        }
    }
    if div_residual > tols.div_tol {
        return Err(Error::ConstraintViolation {
            what: "post-projection divergence".into(),
            residual: div_residual,
            tolerance: tols.div_tol,
        });
    }

    let next = FluidState {
        grid,
        u: u_new,
        w: w_new,
        p: p.clone(),
        time: state.time + dt,
    };

    // ---- variational traction ------------------------------------------
    let (traction, traction_gauge) = traction_from_parts(
        state, &next, &u_star, &w_star, &cu, &cw, &p, &m, params, &fu, &fw,
    );

    Ok(FluidStepOutput {
        state: next,
        report: FluidStepReport {
            cg_iters_u: iters_u,
            cg_iters_w: iters_w,
            cg_iters_p: iters_p,
            div_residual,
            cfl,
            compatibility_defect: compat,
            gradient_energy: grad_energy,
        },
        traction,
        traction_gauge,
    })
}

/// Project a velocity field onto the divergence-free constraint of a frozen
/// metric (used when assembling initial data).
pub fn project_once(
    u: &mut Array2<f64>,
    w: &mut Array2<f64>,
    m: &Metric,
    tols: &FluidTols,
) -> Result<usize> {
    let (_, iters, _) = project_kernel(u, w, m, 1.0, None, tols)?;
    Ok(iters)
}

/// Bilinear physical-point sample of a mapped state (used to extend the
/// fluid velocity onto the container). Points outside the film clamp to the
/// wall data.
pub fn sample_physical(state: &FluidState, h: &[f64], x: f64, y: f64) -> (f64, f64) {
    let grid = state.grid;
    let (nx, nz) = (grid.nx, grid.nz);
    let dx = grid.dx();
    let dz = grid.dz();
    // Height at x by periodic linear interpolation.
    let sx = (x / dx).rem_euclid(nx as f64);
    let i0 = sx.floor() as usize % nx;
    let fx = sx - sx.floor();
    let i1 = (i0 + 1) % nx;
    let hx = h[i0] * (1.0 - fx) + h[i1] * fx;
    let z = (y / hx).clamp(0.0, 1.0);

    // u1 lives at (i dx, (j + 1/2) dz), zero on both walls.
    let u1 = {
        let zz = z / dz - 0.5;
        let sample_col = |i: usize| -> f64 {
            if zz <= -0.5 || zz >= nz as f64 - 0.5 {
                0.0
            } else if zz < 0.0 {
                // between the wall value 0 at z = 0 and the first center
                let t = (zz + 0.5) / 0.5;
                state.u[[i, 0]] * t
            } else if zz > nz as f64 - 1.0 {
                let t = (nz as f64 - 0.5 - zz) / 0.5;
                state.u[[i, nz - 1]] * t
            } else {
                let j0 = zz.floor() as usize;
                let fz = zz - j0 as f64;
                state.u[[i, j0]] * (1.0 - fz) + state.u[[i, j0 + 1]] * fz
            }
        };
        sample_col(i0) * (1.0 - fx) + sample_col(i1) * fx
    };

    // u2 lives at ((i + 1/2) dx, j dz).
    let u2 = {
        let sxc = (x / dx - 0.5).rem_euclid(nx as f64);
        let c0 = sxc.floor() as usize % nx;
        let fxc = sxc - sxc.floor();
        let c1 = (c0 + 1) % nx;
        let zz = (z / dz).clamp(0.0, nz as f64);
        let j0 = (zz.floor() as usize).min(nz - 1);
        let fz = zz - j0 as f64;
        let col = |i: usize| state.w[[i, j0]] * (1.0 - fz) + state.w[[i, j0 + 1]] * fz;
        col(c0) * (1.0 - fxc) + col(c1) * fxc
    };
    (u1, u2)
}

/// Beam load from the variational residual of the discrete momentum balance
/// tested against the lift `(0, d(x) z)`. Testing the scheme's own residual
/// (rather than sampling the stress pointwise) gives discrete action and
/// reaction, so the power the beam receives is the power the fluid loses.
#[allow(clippy::too_many_arguments)]
fn traction_from_parts(
    prev: &FluidState,
    next: &FluidState,
    u_star: &Array2<f64>,
    w_star: &Array2<f64>,
    cu: &Array2<f64>,
    cw: &Array2<f64>,
    p: &Array2<f64>,
    m: &Metric,
    params: &Params,
    fu: &Array2<f64>,
    fw: &Array2<f64>,
) -> (Vec<f64>, f64) {
    let _ = (cu, fu, u_star);
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let rho = params.rho_f;

    // J(d) = sum over the w-grid of R[i,j] * d_c(i) * z_j
    //        - sum over cells of p * d_c * dV  (pressure term, D w_d = d_c)
    //        with R = mass + transport + viscous - forcing rows.
    let visc_rows = visc_weak_u2(w_star, m);
    let mut g = vec![0.0; nx];
    for i in 0..nx {
        let mut acc = 0.0;
        for j in 0..=nz {
            let z = j as f64 * dz;
            let wz = if j == 0 || j == nz { 0.5 * dz } else { dz };
            let mass = rho
                * dx
                * wz
                * (m.h_center[i] * next.w[[i, j]] - m.h_center_old[i] * prev.w[[i, j]])
                / m.dt;
            let r = mass + cw[[i, j]] + params.mu * visc_rows[[i, j]] - fw[[i, j]];
            acc += r * z;
        }
        for j in 0..nz {
            acc -= p[[i, j]] * dx * dz;
        }
        g[i] = acc;
    }

    // phi . d = -J(d); undo the centering d_c = (d_i + d_{i+1}) / 2 and the
    // L^2 pairing weight dx.
    let mut phi = vec![0.0; nx];
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        phi[i] = -(0.5 * (g[im] + g[i])) / dx;
    }
    let gauge = crate::grid::mean(&phi);
    for v in &mut phi {
        *v -= gauge;
    }
    (phi, gauge)
}

/// Standalone variational beam load between two consecutive states, using
/// the committed fields (for diagnostics and cross-checks against the direct
/// stress quadrature; inside the step the tentative field version is used).
pub fn traction_on_beam(
    prev: &FluidState,
    next: &FluidState,
    h_old: &[f64],
    h_new: &[f64],
    params: &Params,
    forcing: Option<&dyn Fn(f64, f64) -> (f64, f64)>,
) -> Result<(Vec<f64>, f64)> {
    let grid = next.grid;
    let dt = next.time - prev.time;
    if dt <= 0.0 {
        return Err(Error::invalid("states must be consecutive in time"));
    }
    let m = Metric::build(grid, h_old, h_new, dt)?;
    let (cu, cw) = convection(prev, &m);
    let (nx, nz) = (grid.nx, grid.nz);
    let mut fu = Array2::zeros((nx, nz));
    let mut fw = Array2::zeros((nx, nz + 1));
    if let Some(f) = forcing {
        let dx = grid.dx();
        let dz = grid.dz();
        for i in 0..nx {
            let xc = (i as f64 + 0.5) * dx;
            for j in 0..=nz {
                let y = m.h_center[i] * j as f64 * dz;
                let wz = if j == 0 || j == nz { 0.5 * dz } else { dz };
                fw[[i, j]] = f(xc, y).1 * m.h_center[i] * dx * wz;
            }
            let x = i as f64 * dx;
            for j in 0..nz {
                let y = m.h_face[i] * (j as f64 + 0.5) * dz;
                fu[[i, j]] = f(x, y).0 * m.h_face[i] * dx * dz;
            }
        }
    }
    Ok(traction_from_parts(
        prev, next, &next.u, &next.w, &cu, &cw, &next.p, &m, params, &fu, &fw,
    ))
}

/// Mapped velocity-gradient tensor sampled at cell centers:
/// `(Dx u1, Dy u1, Dx u2, Dy u2)`.
pub fn velocity_gradient_centers(
    state: &FluidState,
    m: &Metric,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dx = m.grid.dx();
    let dz = m.grid.dz();
    let (ga1, dzu) = grad_u1(&state.u, m);

    let g11 = ga1;
    let mut g12 = Array2::zeros((nx, nz));
    let mut g21 = Array2::zeros((nx, nz));
    let mut g22 = Array2::zeros((nx, nz));

    // x-derivative of w at corners, averaged to centers.
    let mut dxw = Array2::zeros((nx, nz + 1));
    for i in 0..nx {
        let im = (i + nx - 1) % nx;
        for j in 0..=nz {
            dxw[[i, j]] = (state.w[[i, j]] - state.w[[im, j]]) / dx;
        }
    }
    for i in 0..nx {
        let ip = (i + 1) % nx;
        for j in 0..nz {
            let zc = (j as f64 + 0.5) * dz;
            let dzu_bar = 0.25
                * (dzu[[i, j]] + dzu[[ip, j]] + dzu[[i, j + 1]] + dzu[[ip, j + 1]]);
            g12[[i, j]] = dzu_bar / m.h_center[i];
            let dzw = (state.w[[i, j + 1]] - state.w[[i, j]]) / dz;
            let dxw_bar = 0.25
                * (dxw[[i, j]] + dxw[[ip, j]] + dxw[[i, j + 1]] + dxw[[ip, j + 1]]);
            g21[[i, j]] = dxw_bar - zc * m.hx_center[i] / m.h_center[i] * dzw;
            g22[[i, j]] = dzw / m.h_center[i];
        }
    }
    (g11, g12, g21, g22)
}

/// Kinetic energy `1/2 rho int |u|^2` on the mapped grid.
pub fn kinetic_energy(state: &FluidState, m: &Metric, params: &Params) -> f64 {
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    let dv = m.grid.dx() * m.grid.dz();
    let mut sum = 0.0;
    for i in 0..nx {
        for j in 0..nz {
            sum += m.h_face[i] * state.u[[i, j]] * state.u[[i, j]] * dv;
        }
        for j in 0..=nz {
            let wz = if j == 0 || j == nz { 0.5 } else { 1.0 };
            sum += m.h_center[i] * state.w[[i, j]] * state.w[[i, j]] * dv * wz;
        }
    }
    0.5 * params.rho_f * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
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

    fn wavy_metric(grid: MacGrid) -> Metric {
        let g1 = grid.beam_grid();
        let h: Vec<f64> = g1.sample(|x| 1.0 + 0.2 * (2.0 * PI * x).sin());
        let h_old: Vec<f64> = g1.sample(|x| 1.0 + 0.18 * (2.0 * PI * x).sin());
        Metric::build(grid, &h_old, &h, 1e-2).unwrap()
    }

    fn seeded_fields(grid: MacGrid) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let (nx, nz) = (grid.nx, grid.nz);
        let mut u = Array2::zeros((nx, nz));
        let mut w = Array2::zeros((nx, nz + 1));
        let mut p = Array2::zeros((nx, nz));
        // Deterministic pseudo-random fill.
        let mut s = 123456789u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for v in u.iter_mut() {
            *v = next();
        }
        for i in 0..nx {
            for j in 1..nz {
                w[[i, j]] = next();
            }
        }
        for v in p.iter_mut() {
            *v = next();
        }
        (u, w, p)
    }

    /// The pressure gradient must be the exact negative transpose of the
    /// divergence, interior degrees of freedom only.
    #[test]
    fn gradient_is_negative_transpose_of_divergence() {
        let grid = MacGrid::new(12, 8, 1.0);
        let m = wavy_metric(grid);
        let (u, w, p) = seeded_fields(grid);
        let div = divergence(&u, &w, &m);
        let (gu, gw) = gradient(&p, &m);
        let lhs: f64 = div.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        let mut rhs = 0.0;
        for i in 0..grid.nx {
            for j in 0..grid.nz {
                rhs -= u[[i, j]] * gu[[i, j]];
            }
            for j in 1..grid.nz {
                rhs -= w[[i, j]] * gw[[i, j]];
            }
        }
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    /// The viscous weak action is symmetric and its quadratic form is
    /// nonnegative (it is a sum of weighted squares).
    #[test]
    fn viscous_form_is_symmetric_and_nonnegative() {
        let grid = MacGrid::new(12, 8, 1.0);
        let m = wavy_metric(grid);
        let (u, w, _) = seeded_fields(grid);
        let (u2, w2, _) = {
            let mut tmp = seeded_fields(grid);
            tmp.0.mapv_inplace(|v| 0.7 * v + 0.1);
            tmp.1.mapv_inplace(|v| -0.3 * v);
            for i in 0..grid.nx {
                tmp.1[[i, 0]] = 0.0;
                tmp.1[[i, grid.nz]] = 0.0;
            }
            tmp
        };

        let a_u = visc_weak_u1(&u, &m);
        let a_u2 = visc_weak_u1(&u2, &m);
        let lhs: f64 = a_u.iter().zip(u2.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = a_u2.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
        let quad: f64 = a_u.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        assert!(quad >= 0.0);

        let a_w = visc_weak_u2(&w, &m);
        let a_w2 = visc_weak_u2(&w2, &m);
        let lhs2: f64 = a_w.iter().zip(w2.iter()).map(|(a, b)| a * b).sum();
        let rhs2: f64 = a_w2.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs2, rhs2, max_relative = 1e-11);
        let quad2: f64 = a_w.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        assert!(quad2 >= 0.0);
    }

    /// On a flat static geometry the viscous weak action applied to a smooth
    /// field is a consistent discretization of `-laplace` (weak scaled).
    #[test]
    fn viscous_action_consistent_on_flat_geometry() {
        let grid = MacGrid::new(64, 64, 1.0);
        let h = vec![1.0; 64];
        let m = Metric::frozen(grid, &h).unwrap();
        let (nx, nz) = (grid.nx, grid.nz);
        let dx = grid.dx();
        let dz = grid.dz();
        let mut u = Array2::zeros((nx, nz));
        for i in 0..nx {
            let x = i as f64 * dx;
            for j in 0..nz {
                let z = (j as f64 + 0.5) * dz;
                // zero at both walls
                u[[i, j]] = (2.0 * PI * x).sin() * (PI * z).sin();
            }
        }
        let a = visc_weak_u1(&u, &m);
        // Expected: (4 pi^2 + pi^2) u * dV weakly.
        let mut worst = 0.0f64;
        for i in 0..nx {
            let x = i as f64 * dx;
            for j in 2..nz - 2 {
                let z = (j as f64 + 0.5) * dz;
                let expect = (4.0 * PI * PI + PI * PI)
                    * (2.0 * PI * x).sin()
                    * (PI * z).sin()
                    * dx
                    * dz;
                worst = worst.max((a[[i, j]] - expect).abs() / (dx * dz));
            }
        }
        assert!(worst < 0.15, "interior consistency error {worst}");
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let grid = MacGrid::new(16, 8, 1.0);
        let state = FluidState::rest(grid);
        let h = vec![1.0; 16];
        let eta_dot = vec![0.0; 16];
        let out = fluid_step(
            &state,
            &h,
            &h,
            &eta_dot,
            1e-3,
            &params(),
            &FluidTols::default(),
            None,
        )
        .unwrap();
        assert_eq!(out.state.u.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(out.state.w.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert!(out.traction.iter().all(|v| v.abs() < 1e-14));
    }

    /// Constant pressure exerts no mean-free load; the gauge picks it up.
    #[test]
    fn constant_pressure_is_pure_gauge() {
        let grid = MacGrid::new(16, 8, 1.0);
        let mut prev = FluidState::rest(grid);
        let mut next = FluidState::rest(grid);
        next.time = 1e-3;
        let pval = 2.5;
        prev.p.fill(pval);
        next.p.fill(pval);
        let h = vec![1.0; 16];
        let (phi, gauge) = traction_on_beam(&prev, &next, &h, &h, &params(), None).unwrap();
        assert!(phi.iter().all(|v| v.abs() < 1e-12), "{phi:?}");
        assert_relative_eq!(gauge, pval, epsilon = 1e-12);
    }

    /// Horizontal body force on a flat channel: steady profile
    /// `u(z) = F z (1 - z) / (2 mu)`, no vertical throughflow.
    #[test]
    fn poiseuille_steady_profile() {
        let grid = MacGrid::new(8, 32, 1.0);
        let p = params();
        let h = vec![1.0; 8];
        let eta_dot = vec![0.0; 8];
        let force = 1.0;
        let forcing = move |_x: f64, _y: f64| (force, 0.0);
        let mut state = FluidState::rest(grid);
        let tols = FluidTols::default();
        // March to steady state.
        for _ in 0..400 {
            state = fluid_step(
                &state,
                &h,
                &h,
                &eta_dot,
                0.05,
                &p,
                &tols,
                Some(&forcing),
            )
            .unwrap()
            .state;
        }
        let dz = grid.dz();
        let mut worst = 0.0f64;
        for j in 0..grid.nz {
            let z = (j as f64 + 0.5) * dz;
            let expect = force * z * (1.0 - z) / (2.0 * p.mu);
            worst = worst.max((state.u[[0, j]] - expect).abs());
        }
        let scale = force / (8.0 * p.mu);
        assert!(worst < 0.01 * scale, "profile error {worst}");
        // Symmetry about mid-channel and zero vertical flow.
        for j in 0..grid.nz / 2 {
            let a = state.u[[3, j]];
            let b = state.u[[3, grid.nz - 1 - j]];
            assert_relative_eq!(a, b, max_relative = 1e-8, epsilon = 1e-10);
        }
        assert!(state.w.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn divergence_stays_below_tolerance_on_moving_mesh() {
        let grid = MacGrid::new(24, 12, 1.0);
        let g1 = grid.beam_grid();
        let p = params();
        let tols = FluidTols::default();
        let mut state = FluidState::rest(grid);
        let mut h: Vec<f64> = g1.sample(|_| 1.0);
        let dt = 1e-3;
        for n in 0..20 {
            let t = n as f64 * dt;
            let eta_dot: Vec<f64> =
                g1.sample(|x| 0.3 * (2.0 * PI * x).cos() * (10.0 * t).cos());
            let h_new: Vec<f64> = h.iter().zip(&eta_dot).map(|(a, b)| a + dt * b).collect();
            let out = fluid_step(&state, &h, &h_new, &eta_dot, dt, &p, &tols, None).unwrap();
            assert!(out.report.div_residual <= tols.div_tol);
            state = out.state;
            h = h_new;
        }
    }
}
