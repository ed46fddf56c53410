//! Competitor construction bounding the projection error between the coupled
//! spaces of two nested deformations.
//!
//! A pair admissible for `h` is pulled back through the graded vertical
//! stretch onto the subgraph of `hb <= h`, multiplied by the transposed
//! cofactor to stay divergence free, and corrected by its own floor trace so
//! that it vanishes on the substrate again. The distance of the output to the
//! input is controlled by the `W^{1,inf}` gap between the two deformations,
//! which is the approximation property the compactness argument rests on.

use super::{ContainerGrid, CouplePair, ExtendedField, RegionTag, SobolevConfig};
use crate::error::{Error, Result};
use crate::geometry::ale_map;
use crate::grid::mean;

fn sample_extended(
    field: &ExtendedField,
    d: &[f64],
    i: usize,
    y: f64,
    top: f64,
) -> (f64, f64) {
    if y > top {
        (0.0, d[i])
    } else {
        field.sample_column(i, y)
    }
}

/// Map a pair admissible for `h` to a pair admissible for `hb`.
pub fn projector_competitor(
    pair: &CouplePair,
    h: &[f64],
    hb: &[f64],
    cfg: &SobolevConfig,
) -> Result<CouplePair> {
    cfg.validate()?;
    let grid: ContainerGrid = pair.field.grid;
    if h != pair.field.height.as_slice() {
        return Err(Error::GridMismatch(
            "pair is tagged with a different deformation than h".into(),
        ));
    }
    if !pair
        .field
        .u1
        .iter()
        .chain(pair.field.u2.iter())
        .all(|v| v.is_finite())
    {
        return Err(Error::invalid("pair field carries non-finite samples"));
    }
    let map = ale_map(h, hb, grid.x)?;
    let top = 2.0 * grid.m;

    // Floor trace of the transported field: the image of y = 0 is
    // y = m - 1, where (y + 1) = 1.
    let mut correction = Vec::with_capacity(grid.x.n);
    for i in 0..grid.x.n {
        let yc = map.m[i] - 1.0;
        let (w1, w2) = sample_extended(&pair.field, &pair.d, i, yc, top);
        correction.push(-map.dm[i] * w1 + w2);
    }
    // Discrete gauge: the continuum correction is mean free by the
    // divergence identity; enforce it exactly so the output pair satisfies
    // the volume constraint to round-off.
    let gauge = mean(&correction);
    for c in &mut correction {
        *c -= gauge;
    }

    let d_out: Vec<f64> = pair
        .d
        .iter()
        .zip(&correction)
        .map(|(d, c)| d - c)
        .collect();

    let mut out = ExtendedField::zeros(grid, hb.to_vec())?;
    for i in 0..grid.x.n {
        let m = map.m[i];
        let dm = map.dm[i];
        for j in 0..grid.rows() {
            match out.tag(i, j) {
                RegionTag::Substrate => {}
                RegionTag::Medium => {
                    out.u2[[i, j]] = d_out[i];
                }
                RegionTag::Fluid => {
                    let y = grid.y(j);
                    let yi = m * (y + 1.0) - 1.0;
                    let (w1, w2) = sample_extended(&pair.field, &pair.d, i, yi, top);
                    out.u1[[i, j]] = m * w1;
                    out.u2[[i, j]] = -dm * (y + 1.0) * w1 + w2 - correction[i];
                }
            }
        }
    }

    CouplePair::new(out, d_out, cfg.pair_tolerance)
}
