//! Periodic spectral helpers built on top of `rustfft`.
//!
//! Coefficients are normalised so that `f_i = sum_k coeff[k] exp(2 pi i k x_i / L)`
//! and Parseval reads `sum_i |f_i|^2 dx = L * sum_k |coeff[k]|^2`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Normalised Fourier coefficients of a real sample vector.
    pub fn coeffs(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Real synthesis from normalised coefficients.
    pub fn synth(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n);
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Signed angular wavenumber `2 pi k / L` of bin `k`.
#[inline]
pub fn wavenumber(k: usize, n: usize, length: f64) -> f64 {
    let signed = if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    };
    2.0 * std::f64::consts::PI * signed as f64 / length
}

/// Spectral derivative of given order.
pub fn spectral_derivative(values: &[f64], length: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let dft = Dft::new(n);
    let mut coeffs = dft.coeffs(values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        let ik = Complex64::new(0.0, wavenumber(k, n, length));
        *c *= ik.powu(order);
    }
    // The Nyquist bin of odd-order derivatives has no real counterpart.
    if n % 2 == 0 && order % 2 == 1 {
        coeffs[n / 2] = Complex64::new(0.0, 0.0);
    }
    dft.synth(&coeffs)
}

/// `sqrt( L * sum_k (1 + k'^2)^s |f_k|^2 )`, the Fourier-multiplier Sobolev norm.
pub fn sobolev_norm(values: &[f64], length: f64, s: f64) -> f64 {
    let n = values.len();
    let dft = Dft::new(n);
    let coeffs = dft.coeffs(values);
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let kp = wavenumber(k, n, length);
            (1.0 + kp * kp).powf(s) * c.norm_sqr()
        })
        .sum();
    (length * sum).sqrt()
}

/// Discrete `H^2` norm (spectral), used for mollifier bounds and envelope
/// sample selection.
pub fn h2_norm(values: &[f64], length: f64) -> f64 {
    sobolev_norm(values, length, 2.0)
}

/// Mean-free antiderivative: `b` with `b' = d` and `int b = 0`.
/// Fails when `d` has a nonzero mean, in which case no periodic
/// antiderivative exists.
pub fn mean_free_antiderivative(d: &[f64], length: f64, tol: f64) -> Result<Vec<f64>> {
    let n = d.len();
    let dft = Dft::new(n);
    let mut coeffs = dft.coeffs(d);
    let mean = coeffs[0].re;
    if mean.abs() > tol {
        return Err(Error::ConstraintViolation {
            what: "antiderivative of a non-mean-free array".into(),
            residual: mean.abs(),
            tolerance: tol,
        });
    }
    coeffs[0] = Complex64::new(0.0, 0.0);
    for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
        let kp = wavenumber(k, n, length);
        *c /= Complex64::new(0.0, kp);
    }
    Ok(dft.synth(&coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sup_diff, Grid1};
    use approx::assert_relative_eq;

    #[test]
    fn parseval_for_cosine() {
        let g = Grid1::new(64, 2.0);
        let k = 2.0 * std::f64::consts::PI / g.length;
        let f = g.sample(|x| (k * x).cos());
        // int cos^2 over a period = L / 2.
        let l2sq = sobolev_norm(&f, g.length, 0.0).powi(2);
        assert_relative_eq!(l2sq, g.length / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_derivative_is_exact_for_band_limited_data() {
        let g = Grid1::new(32, 1.0);
        let k = 2.0 * std::f64::consts::PI;
        let f = g.sample(|x| (k * x).sin() + 0.3 * (3.0 * k * x).cos());
        let d = spectral_derivative(&f, g.length, 1);
        let exact = g.sample(|x| k * (k * x).cos() - 0.9 * k * (3.0 * k * x).sin());
        assert!(sup_diff(&d, &exact) < 1e-10);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let g = Grid1::new(48, 2.5);
        let k = 2.0 * std::f64::consts::PI / g.length;
        let d = g.sample(|x| (k * x).cos());
        let b = mean_free_antiderivative(&d, g.length, 1e-12).unwrap();
        let exact = g.sample(|x| (k * x).sin() / k);
        assert!(sup_diff(&b, &exact) < 1e-10);
    }

    #[test]
    fn antiderivative_rejects_nonzero_mean() {
        let g = Grid1::new(16, 1.0);
        let d = g.sample(|_| 1.0);
        assert!(mean_free_antiderivative(&d, g.length, 1e-12).is_err());
    }
}
