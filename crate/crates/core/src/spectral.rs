//! Fourier-multiplier model of `R = -Δ` (ν = 2) on a periodic grid: real
//! powers, Riesz potentials, spectral cutoffs and Sobolev norms.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::discretization::{Field, PeriodicGrid};
use crate::error::{Error, Result};
use crate::scalar::{tree_sum_map, Real};

/// Grids smaller than this are transformed on one thread.
const PARALLEL_THRESHOLD: usize = 1 << 16;

/// Relative mean tolerance for negative powers.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-12;

/// What happened to the zero frequency under `apply_power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMode {
    Kept,
    Annihilated,
    /// Negative power: the mean is outside the domain and was dropped.
    Dropped,
}

#[derive(Clone)]
pub struct SpectralOperator<T: Real> {
    grid: PeriodicGrid<T>,
    symbol: Vec<T>,
    nu: T,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> std::fmt::Debug for SpectralOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOperator").field("grid", &self.grid).field("nu", &self.nu).finish()
    }
}

/// Signed integer frequency of DFT index `j` on an axis of `n` points.
pub fn frequency_index(j: usize, n: usize) -> isize {
    if j < n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub ratio: f64,
    pub theta: f64,
    /// Whether `ratio <= 1 + 1e-12` is a contract (only for p = 2).
    pub contract: bool,
}

impl<T: Real> SpectralOperator<T> {
    /// `-Δ` on `grid`: symbol `Σ (2π k_i / L_i)²`.
    pub fn laplacian(grid: &PeriodicGrid<T>) -> Self {
        let dim = grid.dim();
        let two_pi = T::PI() + T::PI();
        let omegas: Vec<Vec<T>> = (0..dim)
            .map(|a| {
                let n = grid.points()[a];
                let l = grid.lengths()[a];
                (0..n)
                    .map(|j| {
                        let k = frequency_index(j, n) as f64;
                        let w = two_pi * T::lit(k) / l;
                        w * w
                    })
                    .collect()
            })
            .collect();
        let mut multi = vec![0usize; dim];
        let symbol = (0..grid.len())
            .map(|flat| {
                grid.unravel(flat, &mut multi);
                multi.iter().enumerate().fold(T::zero(), |acc, (a, &j)| acc + omegas[a][j])
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = grid.points().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { grid: grid.clone(), symbol, nu: T::lit(2.0), forward, inverse }
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn symbol(&self) -> &[T] {
        &self.symbol
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    fn check_grid(&self, f: &Field<T>) {
        assert_eq!(f.grid(), &self.grid, "field grid differs from operator grid");
    }

    /// Unnormalised forward DFT of the samples.
    pub fn forward(&self, f: &Field<T>) -> Vec<Complex<T>> {
        self.check_grid(f);
        let mut buf: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Inverse DFT (scaled by `1/len`) keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Field<T> {
        self.transform(&mut buf, &self.inverse);
        let scale = T::from_usize_lossy(self.grid.len()).recip();
        let values = buf.into_iter().map(|c| c.re * scale).collect();
        Field::from_parts(self.grid.clone(), values)
    }

    fn transform(&self, buf: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        let parallel = buf.len() >= PARALLEL_THRESHOLD;
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.grid.points()[axis];
            let stride = self.grid.stride(axis);
            let block = n * stride;
            let run = |chunk: &mut [Complex<T>]| {
                let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
                if stride == 1 {
                    plan.process_with_scratch(chunk, &mut scratch);
                    return;
                }
                let mut line = vec![Complex::new(T::zero(), T::zero()); n];
                for inner in 0..stride {
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = chunk[inner + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, c) in line.iter().enumerate() {
                        chunk[inner + j * stride] = *c;
                    }
                }
            };
            if stride == 1 && parallel {
                // Rows of the last axis: split into groups of whole rows.
                let rows_per_task = (PARALLEL_THRESHOLD / n).max(1);
                buf.par_chunks_mut(rows_per_task * n).for_each(run);
            } else if parallel && buf.len() / block > 1 {
                buf.par_chunks_mut(block).for_each(run);
            } else {
                buf.chunks_mut(block).for_each(run);
            }
        }
    }

    /// Applies the Fourier multiplier `m(symbol)` to `f`.
    pub fn apply_multiplier<F>(&self, f: &Field<T>, m: F) -> Field<T>
    where
        F: Fn(T) -> T + Sync,
    {
        let mut hat = self.forward(f);
        hat.par_iter_mut().zip(&self.symbol).for_each(|(c, &s)| *c = *c * m(s));
        self.inverse_real(hat)
    }

    /// `R^s f`, together with the zero-mode treatment.
    pub fn apply_power_flagged(&self, f: &Field<T>, s: T) -> Result<(Field<T>, ZeroMode)> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("operator power must be finite, got {s}")));
        }
        if s == T::zero() {
            return Ok((f.clone(), ZeroMode::Kept));
        }
        let mode = if s < T::zero() {
            let mean = f.mean().abs();
            let l2 = f.lp_norm(T::lit(2.0))?;
            if mean > T::lit(MEAN_ZERO_TOLERANCE) * l2 {
                return Err(Error::Precondition(format!(
                    "negative power {s} needs a mean-zero field, |mean| = {mean:e} vs ‖f‖₂ = {l2:e}"
                )));
            }
            ZeroMode::Dropped
        } else {
            ZeroMode::Annihilated
        };
        let out = self.apply_multiplier(f, |sym| if sym == T::zero() { T::zero() } else { sym.powf(s) });
        Ok((out, mode))
    }

    pub fn apply_power(&self, f: &Field<T>, s: T) -> Result<Field<T>> {
        self.apply_power_flagged(f, s).map(|(g, _)| g)
    }

    /// Riesz potential `R^{-λ/ν} f` on a mean-zero field.
    pub fn riesz_potential(&self, f: &Field<T>, lambda: T) -> Result<Field<T>> {
        self.apply_power(f, -lambda / self.nu)
    }

    /// `‖f‖_p + ‖R^{a/ν} f‖_p` (sum convention).
    pub fn sobolev_norm(&self, f: &Field<T>, a: T, p: T) -> Result<T> {
        if !(a >= T::zero()) {
            return Err(Error::Domain(format!("smoothness index must be >= 0, got {a}")));
        }
        if !(p > T::one()) {
            return Err(Error::Domain(format!("integrability exponent must exceed 1, got {p}")));
        }
        let f = f.clone().localized()?;
        let base = f.lp_norm(p)?;
        let top = if a == T::zero() { base } else { self.apply_power(&f, a / self.nu)?.lp_norm(p)? };
        Ok(base + top)
    }

    /// `‖R^{e/ν} f‖₂²` evaluated directly in frequency space (Parseval).
    fn l2_power_sq_from_hat(&self, hat: &[Complex<T>], e: T) -> T {
        let weights: Vec<T> = hat
            .iter()
            .zip(&self.symbol)
            .map(|(c, &sym)| if sym == T::zero() { T::zero() } else { c.norm_sqr() * sym.powf(e / self.nu) })
            .collect();
        let n = T::from_usize_lossy(self.grid.len());
        tree_sum_map(&weights, |v| v) * self.grid.cell_volume() / n
    }

    /// Ratio `‖R^{c/ν}f‖_p / (‖R^{a/ν}f‖_p^{1-θ} ‖R^{b/ν}f‖_p^θ)` with
    /// `θ = (c-a)/(b-a)`. For p = 2 the norms are evaluated by Parseval and
    /// log-convexity makes `ratio <= 1` up to rounding.
    pub fn interpolation_check(&self, f: &Field<T>, a: T, b: T, c: T, p: T) -> Result<InterpolationReport> {
        if !(a < c && c < b) {
            return Err(Error::Domain(format!("interpolation needs a < c < b, got a={a}, c={c}, b={b}")));
        }
        if !(p > T::one()) {
            return Err(Error::Domain(format!("integrability exponent must exceed 1, got {p}")));
        }
        if f.max_abs() == T::zero() {
            return Err(Error::Domain("interpolation check needs a nonzero field".into()));
        }
        let theta = (c - a) / (b - a);
        let two = T::lit(2.0);
        if p == two {
            let hat = self.forward(f);
            let mean = hat[0].norm() / T::from_usize_lossy(self.grid.len());
            let l2 = f.lp_norm(two)?;
            if mean > T::lit(MEAN_ZERO_TOLERANCE) * l2 {
                return Err(Error::Precondition("interpolation check needs a mean-zero field".into()));
            }
            let na = self.l2_power_sq_from_hat(&hat, a).ln();
            let nb = self.l2_power_sq_from_hat(&hat, b).ln();
            let nc = self.l2_power_sq_from_hat(&hat, c).ln();
            let log_ratio = (nc - (T::one() - theta) * na - theta * nb) / two;
            return Ok(InterpolationReport { ratio: log_ratio.exp().as_f64(), theta: theta.as_f64(), contract: true });
        }
        let norm = |e: T| -> Result<T> { self.apply_power(f, e / self.nu)?.lp_norm(p) };
        let (na, nb, nc) = (norm(a)?, norm(b)?, norm(c)?);
        let ratio = nc / (na.powf(T::one() - theta) * nb.powf(theta));
        Ok(InterpolationReport { ratio: ratio.as_f64(), theta: theta.as_f64(), contract: false })
    }

    /// Projection onto modes with `symbol <= lambda`.
    ///
    /// When the discarded modes carry only rounding-level energy the input is
    /// returned unchanged, which makes the projection idempotent bit for bit.
    pub fn spectral_cutoff(&self, f: &Field<T>, lambda: T) -> Field<T> {
        self.check_grid(f);
        if lambda.is_infinite() && lambda > T::zero() {
            return f.clone();
        }
        let mut hat = self.forward(f);
        let total: Vec<T> = hat.iter().map(|c| c.norm_sqr()).collect();
        let masked: Vec<T> = hat
            .iter()
            .zip(&self.symbol)
            .map(|(c, &s)| if s > lambda { c.norm_sqr() } else { T::zero() })
            .collect();
        let total = tree_sum_map(&total, |v| v);
        let masked = tree_sum_map(&masked, |v| v);
        let eps = T::lit(64.0) * T::epsilon();
        if masked <= eps * eps * total {
            return f.clone();
        }
        hat.par_iter_mut().zip(&self.symbol).for_each(|(c, &s)| {
            if s > lambda {
                *c = Complex::new(T::zero(), T::zero());
            }
        });
        self.inverse_real(hat)
    }

    /// Number of retained modes for cutoff `lambda`.
    pub fn mode_count(&self, lambda: T) -> usize {
        self.symbol.iter().filter(|&&s| s <= lambda).count()
    }

    /// Discrete Nikolskii constant for p = 2: `‖χ_Λ f‖_∞ <= sqrt(#modes / V) ‖f‖₂`.
    pub fn nikolskii_constant(&self, lambda: T) -> T {
        (T::from_usize_lossy(self.mode_count(lambda)) / self.grid.volume()).sqrt()
    }
}
