//! Divergence-free lifting of a mean-free beam velocity into the container.
//!
//! The lift is the rotated gradient of `b(x) zeta(y / lambda)` where `b` is
//! the mean-free antiderivative of `d` and `zeta` a smooth step that vanishes
//! below 1/2 and equals one above 1. Components are sampled from the analytic
//! formula, so the field is exactly `(0, d)` above `y = lambda` and exactly
//! zero below `lambda / 2`; the discrete divergence is pure truncation error.

use super::{ContainerGrid, CouplePair, ExtendedField};
use crate::error::{Error, Result};
use crate::fourier::mean_free_antiderivative;

/// Smooth step with `step = 0` on `(-inf, 1/2]` and `step = 1` on `[1, inf)`:
/// the normalized integral of the bump `140 t^3 (1-t)^3` over the transition.
/// `C^3` across the junctions, with moderate derivative bounds, which keeps
/// finite-difference truncation of lifted fields in the asymptotic regime on
/// coarse grids.
pub fn smooth_step(s: f64) -> f64 {
    let t = 2.0 * (s - 0.5);
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        // int_0^t 140 r^3 (1-r)^3 dr
        t * t * t * t * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

pub fn smooth_step_deriv(s: f64) -> f64 {
    let t = 2.0 * (s - 0.5);
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let u = t * (1.0 - t);
        2.0 * 140.0 * u * u * u
    }
}

/// Lift a mean-free beam velocity `d` into a divergence-free container field
/// supported above `y = lambda / 2`. Requires `h >= lambda` so the lifted
/// field is admissible for the deformation `h`.
pub fn lift(d: &[f64], lambda: f64, height: &[f64], grid: ContainerGrid) -> Result<CouplePair> {
    if lambda <= 0.0 {
        return Err(Error::invalid("lifting layer height must be positive"));
    }
    if d.len() != grid.x.n || height.len() != grid.x.n {
        return Err(Error::GridMismatch("lift arrays off the container grid".into()));
    }
    if let Some((i, &h)) = height
        .iter()
        .enumerate()
        .find(|(_, &h)| h < lambda - 1e-14)
    {
        return Err(Error::invalid(format!(
            "deformation {h:.6} below the lifting layer {lambda:.6} at node {i}"
        )));
    }
    let b = mean_free_antiderivative(d, grid.x.length, 1e-10 * (1.0 + crate::grid::sup_norm(d)))?;

    let mut field = ExtendedField::zeros(grid, height.to_vec())?;
    for i in 0..grid.x.n {
        for j in 0..grid.rows() {
            let y = grid.y(j);
            let s = y / lambda;
            let z = smooth_step(s);
            let dz = smooth_step_deriv(s) / lambda;
            field.u1[[i, j]] = -b[i] * dz;
            field.u2[[i, j]] = d[i] * z;
        }
    }
    CouplePair::new(field, d.to_vec(), 1e-9 * (1.0 + crate::grid::sup_norm(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(nx: usize, q: usize) -> (ContainerGrid, Vec<f64>, Vec<f64>) {
        let x = Grid1::new(nx, 1.0);
        let grid = ContainerGrid::new(x, 1.5, q).unwrap();
        let d = x.sample(|xx| (2.0 * PI * xx).cos());
        let h = vec![1.0; nx];
        (grid, d, h)
    }

    #[test]
    fn step_satisfies_indicator_bounds() {
        for i in 0..=100 {
            let s = i as f64 * 0.02;
            let z = smooth_step(s);
            assert!((0.0..=1.0).contains(&z));
            if s <= 0.5 {
                assert_eq!(z, 0.0);
            }
            if s >= 1.0 {
                assert_eq!(z, 1.0);
            }
        }
    }

    #[test]
    fn lift_is_exactly_d_above_lambda_and_zero_below_half() {
        let (grid, d, h) = setup(32, 16);
        let lambda = 0.25;
        let pair = lift(&d, lambda, &h, grid).unwrap();
        for i in 0..grid.x.n {
            for j in 0..grid.rows() {
                let y = grid.y(j);
                if y >= lambda {
                    assert_eq!(pair.field.u1[[i, j]], 0.0);
                    assert_eq!(pair.field.u2[[i, j]], d[i]);
                }
                if y <= lambda / 2.0 {
                    assert_eq!(pair.field.u1[[i, j]], 0.0);
                    assert_eq!(pair.field.u2[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn lift_antiderivative_matches_single_mode() {
        let (grid, d, h) = setup(64, 16);
        let pair = lift(&d, 0.25, &h, grid).unwrap();
        // b = sin(2 pi x) / (2 pi); check u1 = -b zeta' / lambda at one node.
        let x = grid.x.node(5);
        let j = ((0.15 + 1.0) / grid.dy()).round() as usize;
        let y = grid.y(j);
        let b = (2.0 * PI * x).sin() / (2.0 * PI);
        let expect = -b * smooth_step_deriv(y / 0.25) / 0.25;
        assert_relative_eq!(pair.field.u1[[5, j]], expect, epsilon = 1e-10);
    }

    #[test]
    fn lift_divergence_decays_at_fd_order() {
        let mut residuals = Vec::new();
        for &(nx, q) in &[(64usize, 32usize), (128, 64), (256, 128)] {
            let (grid, d, h) = setup(nx, q);
            let pair = lift(&d, 0.25, &h, grid).unwrap();
            residuals.push(pair.field.divergence_interior_max());
        }
        assert!(
            residuals[2] < residuals[0] / 8.0,
            "divergence residuals did not decay at second order: {residuals:?}"
        );
    }

    #[test]
    fn lift_rejects_nonzero_mean() {
        let (grid, _, h) = setup(16, 8);
        let d = vec![1.0; 16];
        assert!(lift(&d, 0.25, &h, grid).is_err());
    }

    #[test]
    fn lift_rejects_low_deformation() {
        let (grid, d, _) = setup(16, 8);
        let h = vec![0.2; 16];
        assert!(lift(&d, 0.5, &h, grid).is_err());
    }
}
