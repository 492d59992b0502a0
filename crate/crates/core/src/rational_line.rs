//! Rational spectral basis on the whole line.
//!
//! Functions are expanded as `u = Σ a_m ρ_m` with
//! `ρ_m(x) = z^m/(L−ix)`, `z = (L+ix)/(L−ix) = e^{iθ}`, `x = L·tan(θ/2)`.
//! The `ρ_m` are orthogonal in `L²(ℝ)` (`‖ρ_m‖² = π/L`), the Hilbert transform
//! is diagonal and `d/dx` is tridiagonal, so `|D| = H∂` splits into two
//! identical symmetric tridiagonal blocks (`m ≥ 0` and `m < 0`). Algebraic
//! tails are resolved spectrally, which the periodic model cannot do.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::pairwise_sum;

#[derive(Clone)]
pub struct RationalLine {
    n: usize,
    scale: f64,
    theta: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RationalLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RationalLine").field("n", &self.n).field("scale", &self.scale).finish()
    }
}

impl RationalLine {
    /// `n` even nodes `θ_j = −π + 2πj/n`; node 0 is the point at infinity.
    pub fn new(n: usize, scale: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!("rational line needs an even node count >= 4, got {n}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("map scale must be positive, got {scale}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            scale,
            theta: (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Nodes `x_j = L·tan(θ_j/2)`; `x_0 = −∞`.
    pub fn nodes(&self) -> Vec<f64> {
        self.theta
            .iter()
            .enumerate()
            .map(|(j, &t)| if j == 0 { f64::NEG_INFINITY } else { self.scale * (t / 2.0).tan() })
            .collect()
    }

    /// Trapezoid weights in θ for `∫ g dx`; zero at infinity.
    pub fn weights(&self) -> Vec<f64> {
        let h = 2.0 * PI / self.n as f64;
        self.theta
            .iter()
            .enumerate()
            .map(|(j, &t)| if j == 0 { 0.0 } else { h * 0.5 * self.scale / (t / 2.0).cos().powi(2) })
            .collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes().into_iter().map(|x| if x.is_finite() { f(x) } else { 0.0 }).collect()
    }

    fn mode(&self, slot: usize) -> i64 {
        if slot < self.n / 2 {
            slot as i64
        } else {
            slot as i64 - self.n as i64
        }
    }

    fn slot(&self, mode: i64) -> usize {
        if mode >= 0 {
            mode as usize
        } else {
            (mode + self.n as i64) as usize
        }
    }

    /// Coefficients `a_m` (FFT slot order) of a function sampled at the nodes.
    /// The value at infinity is ignored.
    pub fn coefficients(&self, u: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(u.len(), self.n);
        let mut buf: Vec<Complex<f64>> = self
            .theta
            .iter()
            .zip(u)
            .enumerate()
            .map(|(j, (&t, &v))| {
                if j == 0 {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(self.scale, -self.scale * (t / 2.0).tan()) * v
                }
            })
            .collect();
        self.forward.process(&mut buf);
        let inv = 1.0 / self.n as f64;
        for (k, c) in buf.iter_mut().enumerate() {
            let sign = if self.mode(k) % 2 == 0 { 1.0 } else { -1.0 };
            *c *= sign * inv;
        }
        buf
    }

    /// Real part of `Σ a_m ρ_m` at the nodes.
    pub fn samples(&self, a: &[Complex<f64>]) -> Vec<f64> {
        assert_eq!(a.len(), self.n);
        let mut buf: Vec<Complex<f64>> = a
            .iter()
            .enumerate()
            .map(|(k, &c)| if self.mode(k) % 2 == 0 { c } else { -c })
            .collect();
        self.inverse.process(&mut buf);
        let l2 = 2.0 * self.scale;
        self.theta
            .iter()
            .zip(&buf)
            .map(|(&t, f)| (Complex::from_polar(1.0, t) + 1.0) / l2 * f)
            .map(|c| c.re)
            .collect()
    }

    /// `L²(ℝ)` inner product from coefficients.
    pub fn inner(&self, a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).collect();
        PI / self.scale * pairwise_sum(&terms)
    }

    pub fn integrate(&self, g: &[f64]) -> f64 {
        let terms: Vec<f64> = self.weights().iter().zip(g).map(|(w, v)| w * v).collect();
        pairwise_sum(&terms)
    }

    /// Folded block index: `m ≥ 0 ↦ m`, `m < 0 ↦ −m−1`.
    fn folded(&self, slot: usize) -> (usize, bool) {
        let m = self.mode(slot);
        if m >= 0 {
            (m as usize, true)
        } else {
            ((-m - 1) as usize, false)
        }
    }

    fn unfold(&self, k: usize, positive: bool) -> usize {
        if positive {
            self.slot(k as i64)
        } else {
            self.slot(-(k as i64) - 1)
        }
    }

    /// `|D| = (−Δ)^{1/2}` in coefficient space, truncated to the resolved modes.
    pub fn abs_derivative(&self, a: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let half = self.n / 2;
        let c = 1.0 / (2.0 * self.scale);
        let mut out = vec![Complex::new(0.0, 0.0); self.n];
        for slot in 0..self.n {
            let (k, pos) = self.folded(slot);
            let kf = k as f64;
            let mut v = a[slot] * (2.0 * kf + 1.0);
            if k + 1 < half {
                v += a[self.unfold(k + 1, pos)] * (kf + 1.0);
            }
            if k > 0 {
                v += a[self.unfold(k - 1, pos)] * kf;
            }
            out[slot] = v * c;
        }
        out
    }

    /// Solves `(|D| + σ)v = w` by the Thomas algorithm on each block.
    pub fn solve_shifted(&self, w: &[Complex<f64>], sigma: f64) -> Result<Vec<Complex<f64>>> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("shift must be positive, got {sigma}")));
        }
        let half = self.n / 2;
        let c = 1.0 / (2.0 * self.scale);
        let diag = |k: usize| (2.0 * k as f64 + 1.0) * c + sigma;
        let off = |k: usize| (k as f64 + 1.0) * c;
        let mut out = vec![Complex::new(0.0, 0.0); self.n];
        for pos in [true, false] {
            let mut cp = vec![0.0; half];
            let mut dp = vec![Complex::new(0.0, 0.0); half];
            cp[0] = off(0) / diag(0);
            dp[0] = w[self.unfold(0, pos)] / diag(0);
            for k in 1..half {
                let den = diag(k) - off(k - 1) * cp[k - 1];
                cp[k] = if k + 1 < half { off(k) / den } else { 0.0 };
                dp[k] = (w[self.unfold(k, pos)] - dp[k - 1] * off(k - 1)) / den;
            }
            let mut next = dp[half - 1];
            out[self.unfold(half - 1, pos)] = next;
            for k in (0..half - 1).rev() {
                next = dp[k] - next * cp[k];
                out[self.unfold(k, pos)] = next;
            }
        }
        Ok(out)
    }
}
