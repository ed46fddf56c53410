//! Smooth cutoff of a stream function to a single positivity component of
//! the deformation, with the Poincare strip bookkeeping that controls the
//! boundary terms near contact points.

use super::{CouplePair, StreamFunction};
use crate::error::{Error, Result};

/// Smooth ramp, 0 at `t <= 0`, 1 at `t >= 1`, `C^3` across the junctions
/// (normalized integral of the bump `140 t^3 (1-t)^3`).
fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * t * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

/// Discrete Poincare inequality on one boundary strip: with the quantity
/// vanishing on the contact column, the strip mass is controlled by
/// `eps (eps + dx) / 2` times the strip energy of the forward difference.
#[derive(Debug, Clone)]
pub struct StripCheck {
    /// Strip mass and derivative energy of the stream function.
    pub psi_mass: f64,
    pub psi_energy: f64,
    /// Strip mass and derivative energy of the top-band antiderivative.
    pub b_mass: f64,
    pub b_energy: f64,
    /// Full-gradient strip energy (upper bounds the x-derivative energy).
    pub grad_energy: f64,
    /// Discrete Poincare constant `eps (eps + dx) / 2`.
    pub constant: f64,
    pub psi_ok: bool,
    pub b_ok: bool,
}

#[derive(Debug, Clone)]
pub struct CutoffResult {
    pub pair: CouplePair,
    pub chi: Vec<f64>,
    /// Effective (grid-snapped) strip width.
    pub eps: f64,
    pub left: StripCheck,
    pub right: StripCheck,
    /// Measured sup norms of the cutoff derivatives.
    pub chi_d1_sup: f64,
    pub chi_d2_sup: f64,
}

fn strip_check(s: &StreamFunction, start: usize, n_eps: usize, rising: bool) -> StripCheck {
    let grid = s.grid;
    let dx = grid.x.dx();
    let eps = n_eps as f64 * dx;
    // Column order from the contact column into the fluid.
    let cols: Vec<usize> = if rising {
        (start..=start + n_eps).collect()
    } else {
        (start - n_eps..=start).rev().collect()
    };
    let mut psi_mass = 0.0;
    let mut psi_energy = 0.0;
    let mut grad_energy = 0.0;
    let mut b_mass = 0.0;
    let mut b_energy = 0.0;
    let dy = grid.dy();
    for w in cols.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        for j in 0..grid.rows() {
            let wy = grid.y_weight(j);
            let val = s.psi[[cur, j]];
            let diff = (s.psi[[cur, j]] - s.psi[[prev, j]]) / dx;
            psi_mass += val * val * dx * wy;
            psi_energy += diff * diff * dx * wy;
            let gy = if j == 0 {
                (s.psi[[cur, 1]] - s.psi[[cur, 0]]) / dy
            } else if j == grid.rows() - 1 {
                (s.psi[[cur, j]] - s.psi[[cur, j - 1]]) / dy
            } else {
                (s.psi[[cur, j + 1]] - s.psi[[cur, j - 1]]) / (2.0 * dy)
            };
            grad_energy += (diff * diff + gy * gy) * dx * wy;
        }
        let bv = s.b[cur];
        let bd = (s.b[cur] - s.b[prev]) / dx;
        b_mass += bv * bv * dx;
        b_energy += bd * bd * dx;
    }
    let constant = eps * (eps + dx) / 2.0;
    let slack = 1e-13 * (1.0 + psi_mass.max(b_mass));
    StripCheck {
        psi_mass,
        psi_energy,
        b_mass,
        b_energy,
        grad_energy,
        constant,
        psi_ok: psi_mass <= constant * psi_energy + slack,
        b_ok: b_mass <= constant * b_energy + slack,
    }
}

/// Cut a stream function off to the positivity component `(a, b)` of its
/// deformation. Returns the velocity pair of the truncated stream function,
/// supported strictly inside `(a + eps/2, b - eps/2)`, together with the
/// Poincare strip checks on both boundary strips.
pub fn contact_cutoff(
    s: &StreamFunction,
    interval: (f64, f64),
    eps: f64,
    contact_tol: f64,
) -> Result<CutoffResult> {
    let grid = s.grid;
    let dx = grid.x.dx();
    let (a, b) = interval;
    if !(a < b) || a < 0.0 || b > grid.x.length {
        return Err(Error::invalid("interval must satisfy 0 <= a < b <= L"));
    }
    if eps >= (b - a) / 4.0 {
        return Err(Error::invalid("eps must be below a quarter of the interval"));
    }
    let ia = (a / dx).round() as usize;
    let ib = (b / dx).round() as usize;
    if ib <= ia + 4 || ib >= grid.x.n {
        return Err(Error::invalid("interval too narrow or off the grid"));
    }
    // The interval must be a positivity component: contact at both ends,
    // open film strictly inside.
    if s.height[ia] > contact_tol || s.height[ib] > contact_tol {
        return Err(Error::invalid(
            "interval endpoints are not contact columns of the deformation",
        ));
    }
    if ((ia + 1)..ib).any(|i| s.height[i] <= contact_tol) {
        return Err(Error::invalid(
            "interval is not a single positivity component",
        ));
    }
    let psi_scale = s.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &col in &[ia, ib] {
        for j in 0..grid.rows() {
            if s.psi[[col, j]].abs() > 1e-12 * (1.0 + psi_scale) {
                return Err(Error::ConstraintViolation {
                    what: "stream function must vanish on the contact columns".into(),
                    residual: s.psi[[col, j]].abs(),
                    tolerance: 1e-12 * (1.0 + psi_scale),
                });
            }
        }
    }

    let n_eps = (eps / dx).round().max(1.0) as usize;
    if n_eps < 8 {
        return Err(Error::invalid(
            "eps below eight grid cells; the ramp is not resolvable",
        ));
    }
    let eps_eff = n_eps as f64 * dx;
    let xa = grid.x.node(ia);
    let xb = grid.x.node(ib);
    // Ramps live on (a + eps/2 + dx, a + eps); one node of margin keeps the
    // discrete derivative support inside (a + eps/2, b - eps/2).
    let up0 = xa + 0.5 * eps_eff + dx;
    let up1 = xa + eps_eff;
    let dn0 = xb - eps_eff;
    let dn1 = xb - 0.5 * eps_eff - dx;
    let chi: Vec<f64> = (0..grid.x.n)
        .map(|i| {
            let x = grid.x.node(i);
            if x <= up0 || x >= dn1 {
                0.0
            } else if x < up1 {
                ramp((x - up0) / (up1 - up0))
            } else if x <= dn0 {
                1.0
            } else {
                ramp((dn1 - x) / (dn1 - dn0))
            }
        })
        .collect();

    // Velocity pair of the truncated stream function.
    let mut cut = StreamFunction {
        grid,
        height: s.height.clone(),
        psi: s.psi.clone(),
        b: s.b.clone(),
        contact_columns: s.contact_columns.clone(),
    };
    for i in 0..grid.x.n {
        for j in 0..grid.rows() {
            cut.psi[[i, j]] *= chi[i];
        }
        cut.b[i] *= chi[i];
    }
    let field = cut.curl()?;
    let d = crate::grid::centered_diff(&cut.b, dx);
    let pair = CouplePair::new(field, d, 1e-10 * (1.0 + psi_scale))?;

    let left = strip_check(s, ia, n_eps, true);
    let right = strip_check(s, ib, n_eps, false);

    // Measured cutoff derivative bounds (fine auxiliary sampling).
    let fine = 64 * n_eps;
    let mut d1 = 0.0f64;
    let mut prev = 0.0;
    let mut prev_d = 0.0;
    let mut d2 = 0.0f64;
    let hstep = (up1 - up0) / fine as f64;
    for k in 0..=fine {
        let x = up0 + k as f64 * hstep;
        let v = ramp((x - up0) / (up1 - up0));
        if k > 0 {
            let dv = (v - prev) / hstep;
            d1 = d1.max(dv.abs());
            if k > 1 {
                d2 = d2.max(((dv - prev_d) / hstep).abs());
            }
            prev_d = dv;
        }
        prev = v;
    }

    Ok(CutoffResult {
        pair,
        chi,
        eps: eps_eff,
        left,
        right,
        chi_d1_sup: d1,
        chi_d2_sup: d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{stream_function, ContainerGrid, ExtendedField, RegionTag};
    use crate::grid::Grid1;
    use std::f64::consts::PI;

    /// A deformation with one positivity component spanning (0.125, 0.875)
    /// and a stream function vanishing on its contact columns.
    fn setup(nx: usize, q: usize) -> (ContainerGrid, StreamFunction) {
        let x = Grid1::new(nx, 1.0);
        let grid = ContainerGrid::new(x, 1.0, q).unwrap();
        let h: Vec<f64> = x.sample(|xx| {
            let s = ((xx - 0.5).abs() / 0.375).min(1.0);
            (1.0 - s * s) * 0.8
        });
        let mut f = ExtendedField::zeros(grid, h.clone()).unwrap();
        for i in 0..nx {
            let xx = x.node(i);
            let active = xx > 0.125 && xx < 0.875;
            for j in 0..grid.rows() {
                if f.tag(i, j) == RegionTag::Fluid && active {
                    let y = grid.y(j);
                    // A bubble with nonzero column integral, so the top band
                    // of the stream function is nontrivial.
                    let t = (xx - 0.125) / 0.75;
                    let z = y / h[i];
                    f.u1[[i, j]] = (PI * t).sin().powi(2) * (PI * z).sin();
                }
            }
        }
        let s = stream_function(&f, f64::INFINITY, 1e-9).unwrap();
        (grid, s)
    }

    #[test]
    fn output_supported_in_prescribed_interval() {
        let (grid, s) = setup(128, 16);
        let eps = 0.1;
        let out = contact_cutoff(&s, (0.125, 0.875), eps, 1e-9).unwrap();
        for i in 0..grid.x.n {
            let x = grid.x.node(i);
            let inside = x > 0.125 + 0.5 * out.eps && x < 0.875 - 0.5 * out.eps;
            if !inside {
                for j in 0..grid.rows() {
                    assert_eq!(out.pair.field.u1[[i, j]], 0.0, "u1 leaks at x={x}");
                    assert_eq!(out.pair.field.u2[[i, j]], 0.0, "u2 leaks at x={x}");
                }
                assert_eq!(out.pair.d[i], 0.0);
            }
        }
    }

    #[test]
    fn zero_stream_gives_zero_pair() {
        let (grid, s) = setup(128, 16);
        let mut zero = s;
        zero.psi.fill(0.0);
        zero.b.iter_mut().for_each(|v| *v = 0.0);
        let out = contact_cutoff(&zero, (0.125, 0.875), 0.1, 1e-9).unwrap();
        assert_eq!(out.pair.field.l2_norm(), 0.0);
        let _ = grid;
    }

    #[test]
    fn chi_is_one_on_the_core() {
        let (grid, s) = setup(128, 16);
        let out = contact_cutoff(&s, (0.125, 0.875), 0.1, 1e-9).unwrap();
        for i in 0..grid.x.n {
            let x = grid.x.node(i);
            if x >= 0.125 + out.eps && x <= 0.875 - out.eps {
                assert_eq!(out.chi[i], 1.0);
            }
        }
    }

    #[test]
    fn strip_inequalities_hold() {
        let (_, s) = setup(256, 16);
        let out = contact_cutoff(&s, (0.125, 0.875), 0.08, 1e-9).unwrap();
        assert!(out.left.psi_ok && out.left.b_ok, "{:?}", out.left);
        assert!(out.right.psi_ok && out.right.b_ok, "{:?}", out.right);
        // The x-derivative energy never exceeds the full gradient energy.
        assert!(out.left.psi_energy <= out.left.grad_energy + 1e-12);
    }

    #[test]
    fn rejects_interval_with_interior_contact() {
        let (_, mut s) = setup(128, 16);
        s.height[64] = 0.0;
        assert!(contact_cutoff(&s, (0.125, 0.875), 0.1, 1e-9).is_err());
    }

    #[test]
    fn rejects_wide_eps() {
        let (_, s) = setup(128, 16);
        assert!(contact_cutoff(&s, (0.125, 0.875), 0.3, 1e-9).is_err());
    }
}
