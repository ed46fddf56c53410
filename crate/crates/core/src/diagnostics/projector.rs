//! Empirical decay study of the projection error between the coupled spaces
//! of nested deformations: for a family of lower deformations approaching
//! `h`, the competitor construction upper-bounds the projection error, and
//! the study tabulates that bound against the interface gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{pair_xs_distance, projector_competitor, CouplePair, SobolevConfig};
use crate::geometry::w1inf_distance;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProjectorStudyRow {
    /// `W^{1,inf}` gap between `h` and the family member.
    pub gap: f64,
    /// Coupled-space distance of the competitor to the input pair.
    pub xs_error: f64,
}

/// Compute the error table over a family of deformations below `h`,
/// in the given order.
pub fn projector_error_study(
    pair: &CouplePair,
    h: &[f64],
    family: &[Vec<f64>],
    cfg: &SobolevConfig,
) -> Result<Vec<ProjectorStudyRow>> {
    if family.is_empty() {
        return Err(Error::invalid("empty deformation family"));
    }
    let dx = pair.field.grid.x.dx();
    let mut rows = Vec::with_capacity(family.len());
    for hb in family {
        let out = projector_competitor(pair, h, hb, cfg)?;
        rows.push(ProjectorStudyRow {
            gap: w1inf_distance(h, hb, dx)?,
            xs_error: pair_xs_distance(&out, pair, cfg)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lift, ContainerGrid};
    use crate::geometry::positive_part_shift;
    use crate::grid::Grid1;
    use std::f64::consts::PI;

    #[test]
    fn matching_deformation_gives_zero_row() {
        let x = Grid1::new(48, 1.0);
        let grid = ContainerGrid::new(x, 1.5, 24).unwrap();
        let h: Vec<f64> = x.sample(|xx| 1.0 + 0.2 * (2.0 * PI * xx).sin());
        let d = x.sample(|xx| 0.4 * (2.0 * PI * xx).cos());
        let pair = lift(&d, 0.5, &h, grid).unwrap();
        let cfg = SobolevConfig::default();
        let rows = projector_error_study(&pair, &h, &[h.clone()], &cfg).unwrap();
        assert!(rows[0].gap == 0.0);
        assert!(rows[0].xs_error < 1e-9, "error {}", rows[0].xs_error);
    }

    #[test]
    fn errors_decay_with_the_gap() {
        let x = Grid1::new(48, 1.0);
        let grid = ContainerGrid::new(x, 1.5, 24).unwrap();
        let h: Vec<f64> = x.sample(|xx| 1.0 + 0.2 * (2.0 * PI * xx).sin());
        let d = x.sample(|xx| 0.4 * (2.0 * PI * xx).cos());
        let pair = lift(&d, 0.5, &h, grid).unwrap();
        let cfg = SobolevConfig::default();
        let family: Vec<Vec<f64>> = (2..=6)
            .map(|j| positive_part_shift(&h, 2f64.powi(-j)).unwrap())
            .collect();
        let rows = projector_error_study(&pair, &h, &family, &cfg).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].xs_error < w[0].xs_error, "{rows:?}");
            assert!(w[1].gap < w[0].gap);
        }
        // The coarsest gap dominates the table.
        let max = rows
            .iter()
            .map(|r| r.xs_error)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, rows[0].xs_error);
    }

    #[test]
    fn crossing_family_is_rejected() {
        let x = Grid1::new(48, 1.0);
        let grid = ContainerGrid::new(x, 1.5, 24).unwrap();
        let h: Vec<f64> = x.sample(|xx| 1.0 + 0.2 * (2.0 * PI * xx).sin());
        let d = x.sample(|xx| 0.4 * (2.0 * PI * xx).cos());
        let pair = lift(&d, 0.5, &h, grid).unwrap();
        let cfg = SobolevConfig::default();
        let mut bad = h.clone();
        bad[7] += 0.1;
        assert!(projector_error_study(&pair, &h, &[bad], &cfg).is_err());
    }
}
