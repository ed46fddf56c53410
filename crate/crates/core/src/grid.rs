//! Small helpers for uniform periodic 1-D grids.
//!
//! All beam-side quantities live on the nodes `x_i = i * L / n`,
//! `i = 0..n`. Discrete first derivatives come in two flavours:
//! centered differences for smooth fields and forward differences for the
//! `W^{1,inf}` bookkeeping, where the forward-difference convention makes the
//! clipping inequalities of the envelope construction exact node by node.

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1 {
    pub n: usize,
    pub length: f64,
}

impl Grid1 {
    pub fn new(n: usize, length: f64) -> Self {
        assert!(n >= 4, "grid too small");
        assert!(length > 0.0);
        Grid1 { n, length }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Sample a function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.node(i))).collect()
    }

    /// Periodic linear interpolation at an arbitrary abscissa.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let dx = self.dx();
        let s = (x / dx).rem_euclid(self.n as f64);
        let i = s.floor() as usize % self.n;
        let frac = s - s.floor();
        let j = (i + 1) % self.n;
        values[i] * (1.0 - frac) + values[j] * frac
    }
}

/// Centered periodic difference `(f_{i+1} - f_{i-1}) / (2 dx)`.
pub fn centered_diff(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * dx))
        .collect()
}

/// Forward periodic difference `(f_{i+1} - f_i) / dx`.
pub fn forward_diff(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[i]) / dx)
        .collect()
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Periodic rectangle rule, exact for trigonometric polynomials.
pub fn integrate(values: &[f64], dx: f64) -> f64 {
    values.iter().sum::<f64>() * dx
}

pub fn l2_norm(values: &[f64], dx: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centered_diff_of_sine_is_cosine() {
        let g = Grid1::new(128, 2.0);
        let k = 2.0 * std::f64::consts::PI / g.length;
        let f = g.sample(|x| (k * x).sin());
        let d = centered_diff(&f, g.dx());
        let exact = g.sample(|x| k * (k * x).cos());
        assert!(sup_diff(&d, &exact) < 1e-2 * k * k);
    }

    #[test]
    fn periodic_interp_wraps() {
        let g = Grid1::new(8, 1.0);
        let f = g.sample(|x| x);
        // Between the last node and the wrap-around image of node 0.
        let v = g.interp(&f, 1.0 - 0.5 * g.dx());
        assert_relative_eq!(v, 0.5 * (g.node(7) + 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rectangle_rule_integrates_cosine_to_zero() {
        let g = Grid1::new(64, 3.0);
        let f = g.sample(|x| (2.0 * std::f64::consts::PI * x / 3.0).cos());
        assert!(integrate(&f, g.dx()).abs() < 1e-13);
    }
}
