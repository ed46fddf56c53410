//! Stream functions of divergence-free container fields.
//!
//! The free constant is pinned by `Psi = 0` on the substrate; above the
//! graph the stream function depends on `x` only, and it vanishes on every
//! contact column, which is what decouples the fluid film across contact
//! points.

use ndarray::Array2;

use super::{ContainerGrid, ExtendedField, RegionTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub grid: ContainerGrid,
    pub height: Vec<f64>,
    pub psi: Array2<f64>,
    /// Top-band value `b(x)`.
    pub b: Vec<f64>,
    /// Columns where the deformation is below the contact tolerance.
    pub contact_columns: Vec<usize>,
}

/// Integrate a divergence-free field into its stream function.
///
/// `div_tol` guards the path consistency of the column integration: a field
/// with a larger interior divergence residual has no single-valued discrete
/// stream function and is rejected. `contact_tol` classifies contact columns.
pub fn stream_function(
    field: &ExtendedField,
    div_tol: f64,
    contact_tol: f64,
) -> Result<StreamFunction> {
    let grid = field.grid;
    let mut worst_substrate = 0.0f64;
    for i in 0..grid.x.n {
        for j in 0..grid.rows() {
            if field.tag(i, j) == RegionTag::Substrate {
                worst_substrate = worst_substrate
                    .max(field.u1[[i, j]].abs())
                    .max(field.u2[[i, j]].abs());
            }
        }
    }
    if worst_substrate > 0.0 {
        return Err(Error::ConstraintViolation {
            what: "field must vanish on the substrate".into(),
            residual: worst_substrate,
            tolerance: 0.0,
        });
    }
    let div = field.divergence_interior_max();
    if div > div_tol {
        return Err(Error::ConstraintViolation {
            what: "integration path inconsistency: field is not divergence free".into(),
            residual: div,
            tolerance: div_tol,
        });
    }

    // u1 = -d(psi)/dy, so psi is the downward cumulative integral of u1,
    // pinned to zero at the container floor.
    let dy = grid.dy();
    let mut psi = Array2::zeros((grid.x.n, grid.rows()));
    for i in 0..grid.x.n {
        let mut acc = 0.0;
        for j in 1..grid.rows() {
            acc -= 0.5 * (field.u1[[i, j - 1]] + field.u1[[i, j]]) * dy;
            psi[[i, j]] = acc;
        }
    }

    let b: Vec<f64> = (0..grid.x.n).map(|i| psi[[i, grid.rows() - 1]]).collect();
    let contact_columns: Vec<usize> = field
        .height
        .iter()
        .enumerate()
        .filter(|(_, &h)| h <= contact_tol)
        .map(|(i, _)| i)
        .collect();

    Ok(StreamFunction {
        grid,
        height: field.height.clone(),
        psi,
        b,
        contact_columns,
    })
}

impl StreamFunction {
    /// Discrete rotated gradient, recovering the velocity field.
    pub fn curl(&self) -> Result<ExtendedField> {
        let grid = self.grid;
        let nx = grid.x.n;
        let dx = grid.x.dx();
        let dy = grid.dy();
        let mut field = ExtendedField::zeros(grid, self.height.clone())?;
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            for j in 0..grid.rows() {
                let dpsi_dy = if j == 0 {
                    (self.psi[[i, 1]] - self.psi[[i, 0]]) / dy
                } else if j == grid.rows() - 1 {
                    (self.psi[[i, j]] - self.psi[[i, j - 1]]) / dy
                } else {
                    (self.psi[[i, j + 1]] - self.psi[[i, j - 1]]) / (2.0 * dy)
                };
                field.u1[[i, j]] = -dpsi_dy;
                field.u2[[i, j]] = (self.psi[[ip, j]] - self.psi[[im, j]]) / (2.0 * dx);
            }
        }
        Ok(field)
    }

    /// Largest deviation of `psi` from column constancy over medium nodes.
    pub fn medium_constancy_residual(&self) -> f64 {
        let grid = self.grid;
        let mut worst = 0.0f64;
        for i in 0..grid.x.n {
            for j in 0..grid.rows() {
                if grid.tag(&self.height, i, j) == RegionTag::Medium {
                    worst = worst.max((self.psi[[i, j]] - self.b[i]).abs());
                }
            }
        }
        worst
    }

    /// Largest value of `|psi|` over the contact columns.
    pub fn contact_column_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for &i in &self.contact_columns {
            for j in 0..self.grid.rows() {
                worst = worst.max(self.psi[[i, j]].abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lift;
    use crate::grid::Grid1;
    use std::f64::consts::PI;

    fn grid(nx: usize, q: usize) -> ContainerGrid {
        ContainerGrid::new(Grid1::new(nx, 1.0), 1.5, q).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_stream() {
        let g = grid(16, 8);
        let f = ExtendedField::zeros(g, vec![1.0; 16]).unwrap();
        let s = stream_function(&f, 1e-12, 1e-6).unwrap();
        assert_eq!(s.psi.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert!(s.contact_columns.is_empty());
    }

    /// The stream function of a lifted field is `b(x) zeta(y / lambda)` up to
    /// quadrature error, so its top value recovers the antiderivative.
    #[test]
    fn stream_of_lift_recovers_antiderivative() {
        let g = grid(64, 32);
        let d = g.x.sample(|xx| (2.0 * PI * xx).cos());
        let h = vec![1.0; 64];
        let pair = lift(&d, 0.25, &h, g).unwrap();
        let s = stream_function(&pair.field, f64::INFINITY, 1e-6).unwrap();
        let mut worst = 0.0f64;
        for i in 0..64 {
            let b = (2.0 * PI * g.x.node(i)).sin() / (2.0 * PI);
            worst = worst.max((s.b[i] - b).abs());
        }
        assert!(worst < 2e-3, "top trace error {worst}");
        assert!(s.medium_constancy_residual() < 1e-14);
    }

    #[test]
    fn stream_vanishes_on_contact_columns() {
        let g = grid(64, 16);
        // Height touching zero near x = 0.5.
        let h: Vec<f64> = g.x.sample(|xx| {
            let bump = (-((xx - 0.5) / 0.08).powi(2)).exp();
            (1.0 - 1.05 * bump).max(0.0)
        });
        let mut f = ExtendedField::zeros(g, h.clone()).unwrap();
        // Any admissible field: medium nodes carry a d supported away from
        // the contact region; fluid w = 0 is fine for this check as long as
        // d = 0 on contact columns.
        let d: Vec<f64> = g
            .x
            .sample(|xx| if (xx - 0.5).abs() > 0.2 { (4.0 * PI * xx).sin() } else { 0.0 });
        for i in 0..g.x.n {
            for j in 0..g.rows() {
                if f.tag(i, j) == RegionTag::Medium && h[i] > 0.0 {
                    f.u2[[i, j]] = d[i];
                }
            }
        }
        let s = stream_function(&f, 1.0, 1e-9).unwrap();
        assert!(!s.contact_columns.is_empty());
        assert_eq!(s.contact_column_residual(), 0.0);
    }

    #[test]
    fn curl_round_trip_decays_at_fd_order() {
        let mut errors = Vec::new();
        for &(nx, q) in &[(64usize, 32usize), (128, 64), (256, 128), (512, 256)] {
            let g = grid(nx, q);
            let d = g.x.sample(|xx| (2.0 * PI * xx).cos());
            let h = vec![1.0; nx];
            let pair = lift(&d, 0.25, &h, g).unwrap();
            let s = stream_function(&pair.field, f64::INFINITY, 1e-6).unwrap();
            let back = s.curl().unwrap();
            let mut worst = 0.0f64;
            for i in 0..nx {
                for j in 1..g.rows() - 1 {
                    worst = worst
                        .max((back.u1[[i, j]] - pair.field.u1[[i, j]]).abs())
                        .max((back.u2[[i, j]] - pair.field.u2[[i, j]]).abs());
                }
            }
            errors.push(worst);
        }
        // Three refinements, expect roughly 4x decay each.
        assert!(
            errors[3] < errors[0] / 20.0,
            "round-trip errors did not decay at FD order: {errors:?}"
        );
    }

    #[test]
    fn rejects_non_divergence_free_field() {
        let g = grid(16, 8);
        let mut f = ExtendedField::zeros(g, vec![1.0; 16]).unwrap();
        for i in 0..16 {
            for j in 0..g.rows() {
                if f.tag(i, j) == RegionTag::Fluid {
                    f.u1[[i, j]] = g.x.node(i).sin();
                }
            }
        }
        assert!(stream_function(&f, 1e-10, 1e-6).is_err());
    }
}
