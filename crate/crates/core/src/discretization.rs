//! Periodic-box grids, sampled fields and rectangle-rule quadrature.
//!
//! Points sit at `x = -L/2 + j h`, `j = 0..N`, on every axis, so a localized
//! field is centred in the box. Reductions go through
//! [`crate::scalar::tree_sum_map`] and are bit-stable across worker counts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tree_sum_map, Real};

/// Upper bound on the number of grid points held by one field.
pub const MAX_GRID_POINTS: usize = 1 << 25;

/// Boundary-shell to peak ratio below which a field counts as localized.
pub const LOCALIZATION_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid<T: Real> {
    lengths: Vec<T>,
    points: Vec<usize>,
}

impl<T: Real> PeriodicGrid<T> {
    /// Cube `[-L/2, L/2)^n` with `N` points per axis.
    pub fn cube(dim: usize, length: T, points: usize) -> Result<Self> {
        Self::new(vec![length; dim], vec![points; dim])
    }

    pub fn new(lengths: Vec<T>, points: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() != points.len() {
            return Err(Error::Config("grid needs one length and one point count per axis".into()));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > T::zero()) || !l.is_finite()) {
            return Err(Error::Config(format!("box length must be positive, got {l}")));
        }
        if let Some(n) = points.iter().find(|n| **n < 8 || !n.is_power_of_two()) {
            return Err(Error::Config(format!("points per axis must be a power of two >= 8, got {n}")));
        }
        let total = points.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= MAX_GRID_POINTS => {}
            _ => {
                return Err(Error::Config(format!(
                    "grid {points:?} exceeds the memory budget of {MAX_GRID_POINTS} points"
                )))
            }
        }
        Ok(Self { lengths, points })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.lengths[axis] / T::from_usize_lossy(self.points[axis])
    }

    pub fn cell_volume(&self) -> T {
        (0..self.dim()).fold(T::one(), |acc, a| acc * self.spacing(a))
    }

    pub fn volume(&self) -> T {
        self.lengths.iter().fold(T::one(), |acc, &l| acc * l)
    }

    pub fn is_cubic(&self) -> bool {
        self.lengths.windows(2).all(|w| w[0] == w[1]) && self.points.windows(2).all(|w| w[0] == w[1])
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> T {
        T::from_usize_lossy(index) * self.spacing(axis) - self.lengths[axis] * T::lit(0.5)
    }

    /// Row-major (last axis fastest) multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            out[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.points).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Row-major stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn point(&self, flat: usize, out: &mut [T]) {
        let mut multi = vec![0usize; self.dim()];
        self.unravel(flat, &mut multi);
        for axis in 0..self.dim() {
            out[axis] = self.coordinate(axis, multi[axis]);
        }
    }

    pub fn sidecar(&self) -> GridSidecar {
        let as_f64: Vec<f64> = self.lengths.iter().map(|l| l.as_f64()).collect();
        if self.is_cubic() {
            GridSidecar { n: self.dim(), length: Axes::Uniform(as_f64[0]), points: Axes::Uniform(self.points[0]) }
        } else {
            GridSidecar { n: self.dim(), length: Axes::PerAxis(as_f64), points: Axes::PerAxis(self.points.clone()) }
        }
    }

    pub fn from_sidecar(side: &GridSidecar) -> Result<Self> {
        let lengths = side.length.expand(side.n)?.into_iter().map(T::lit).collect();
        let points = side.points.expand(side.n)?;
        Self::new(lengths, points)
    }
}

/// JSON sidecar `{n, L, N}` written next to binary field dumps. `L` and `N`
/// are scalars for cubic grids and per-axis arrays otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: Axes<f64>,
    #[serde(rename = "N")]
    pub points: Axes<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axes<V> {
    Uniform(V),
    PerAxis(Vec<V>),
}

impl<V: Copy> Axes<V> {
    fn expand(&self, n: usize) -> Result<Vec<V>> {
        match self {
            Axes::Uniform(v) => Ok(vec![*v; n]),
            Axes::PerAxis(v) if v.len() == n => Ok(v.clone()),
            Axes::PerAxis(v) => Err(Error::Config(format!("sidecar lists {} axes, expected {n}", v.len()))),
        }
    }
}

/// Result of integrating over a grid-selected set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetIntegral {
    pub integral: f64,
    pub measure: f64,
    /// True when no grid point was selected.
    pub empty: bool,
}

/// Real samples on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real> {
    grid: PeriodicGrid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: PeriodicGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_parts(grid: PeriodicGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite field sample");
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid<T>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![T::zero(); n] }
    }

    pub fn constant(grid: PeriodicGrid<T>, c: T) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: PeriodicGrid<T>, f: F) -> Result<Self>
    where
        F: Fn(&[T]) -> T + Sync,
    {
        let dim = grid.dim();
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![T::zero(); dim],
                |x, flat| {
                    grid.point(flat, x);
                    f(x)
                },
            )
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F: Fn(T) -> T + Sync>(&self, f: F) -> Self {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        Self::from_parts(self.grid.clone(), values)
    }

    pub fn zip_with<F: Fn(T, T) -> T + Sync>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_parts(self.grid.clone(), values)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `∫ f g dx` by the rectangle rule.
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let prod: Vec<T> = self.values.par_iter().zip(&other.values).map(|(&a, &b)| a * b).collect();
        tree_sum_map(&prod, |v| v) * self.grid.cell_volume()
    }

    pub fn integral(&self) -> T {
        tree_sum_map(&self.values, |v| v) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> T {
        tree_sum_map(&self.values, |v| v) / T::from_usize_lossy(self.len())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `∫ |f|^p dx`, the p-th power of the Lebesgue norm.
    pub fn lp_power(&self, p: T) -> Result<T> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::Domain(format!("integrability exponent must be finite and >= 1, got {p}")));
        }
        let two = T::lit(2.0);
        let s = if p == two {
            tree_sum_map(&self.values, |v| v * v)
        } else if p == T::one() {
            tree_sum_map(&self.values, |v| v.abs())
        } else {
            tree_sum_map(&self.values, |v| v.abs().powf(p))
        };
        Ok(s * self.grid.cell_volume())
    }

    /// `‖f‖_p`; pass `T::infinity()` for the sup norm.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        if p.is_infinite() && p > T::zero() {
            return Ok(self.max_abs());
        }
        if p.is_nan() || p < T::one() {
            return Err(Error::Domain(format!("integrability exponent must be >= 1, got {p}")));
        }
        Ok(self.lp_power(p)?.powf(p.recip()))
    }

    /// Integral over the grid points selected by `omega`, and the measure of
    /// the selected cells.
    pub fn set_integral<F>(&self, omega: F) -> SetIntegral
    where
        F: Fn(&[T]) -> bool + Sync,
    {
        let dim = self.grid.dim();
        let selected: Vec<(T, T)> = (0..self.len())
            .into_par_iter()
            .map_init(
                || vec![T::zero(); dim],
                |x, flat| {
                    self.grid.point(flat, x);
                    if omega(x) {
                        (self.values[flat], T::one())
                    } else {
                        (T::zero(), T::zero())
                    }
                },
            )
            .collect();
        let vals: Vec<T> = selected.iter().map(|s| s.0).collect();
        let counts: Vec<T> = selected.iter().map(|s| s.1).collect();
        let cell = self.grid.cell_volume();
        let count = tree_sum_map(&counts, |v| v);
        SetIntegral {
            integral: (tree_sum_map(&vals, |v| v) * cell).as_f64(),
            measure: (count * cell).as_f64(),
            empty: count == T::zero(),
        }
    }

    /// Largest magnitude on the outermost layer of cells relative to the peak.
    pub fn boundary_ratio(&self) -> T {
        let peak = self.max_abs();
        if peak == T::zero() {
            return T::zero();
        }
        let dim = self.grid.dim();
        let points = self.grid.points().to_vec();
        let mut multi = vec![0usize; dim];
        let mut shell = T::zero();
        for (flat, &v) in self.values.iter().enumerate() {
            self.grid.unravel(flat, &mut multi);
            if multi.iter().zip(&points).any(|(&i, &n)| i == 0 || i == n - 1) {
                shell = shell.max(v.abs());
            }
        }
        shell / peak
    }

    pub fn is_localized(&self) -> bool {
        self.boundary_ratio() <= T::lit(LOCALIZATION_THRESHOLD)
    }

    /// Returns the field unchanged when it passes the domain-truncation guard.
    pub fn localized(self) -> Result<Self> {
        let ratio = self.boundary_ratio();
        if ratio > T::lit(LOCALIZATION_THRESHOLD) {
            return Err(Error::Precondition(format!(
                "field is not localized: boundary/peak ratio {ratio:e} exceeds {LOCALIZATION_THRESHOLD:e}"
            )));
        }
        Ok(self)
    }

    /// Periodic translation by whole grid steps: `out[i] = f[i + offset]`.
    pub fn shift(&self, offsets: &[isize]) -> Self {
        assert_eq!(offsets.len(), self.grid.dim());
        let dim = self.grid.dim();
        let points = self.grid.points().to_vec();
        let mut multi = vec![0usize; dim];
        let mut src = vec![0usize; dim];
        let mut values = Vec::with_capacity(self.len());
        for flat in 0..self.len() {
            self.grid.unravel(flat, &mut multi);
            for a in 0..dim {
                let n = points[a] as isize;
                src[a] = (multi[a] as isize + offsets[a]).rem_euclid(n) as usize;
            }
            values.push(self.values[self.grid.flat_index(&src)]);
        }
        Self::from_parts(self.grid.clone(), values)
    }

    /// Writes little-endian `f64` samples to `path` and the `{n, L, N}` sidecar
    /// to `path` with a `.json` extension.
    pub fn write_binary(&self, path: &Path) -> Result<PathBuf> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for v in &self.values {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        out.flush()?;
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(&self.grid.sidecar())?)?;
        Ok(side)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let side: GridSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let grid = PeriodicGrid::from_sidecar(&side)?;
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::Config(format!(
                "{} bytes of samples for a grid of {} points",
                bytes.len(),
                grid.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("chunk of 8"))))
            .collect();
        Self::new(grid, values)
    }

    /// CSV of a 1D field, or of the 2D slice through the box centre along the
    /// first two axes. Columns: coordinates then value.
    pub fn write_csv_slice(&self, path: &Path) -> Result<()> {
        let dim = self.grid.dim();
        let mut out = BufWriter::new(fs::File::create(path)?);
        let points = self.grid.points();
        let mut multi: Vec<usize> = points.iter().map(|n| n / 2).collect();
        match dim {
            1 => {
                writeln!(out, "x,value")?;
                for i in 0..points[0] {
                    writeln!(out, "{},{}", self.grid.coordinate(0, i).as_f64(), self.values[i].as_f64())?;
                }
            }
            _ => {
                writeln!(out, "x,y,value")?;
                for i in 0..points[0] {
                    for j in 0..points[1] {
                        multi[0] = i;
                        multi[1] = j;
                        let v = self.values[self.grid.flat_index(&multi)];
                        writeln!(
                            out,
                            "{},{},{}",
                            self.grid.coordinate(0, i).as_f64(),
                            self.grid.coordinate(1, j).as_f64(),
                            v.as_f64()
                        )?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}
