//! The first Heisenberg group H¹ (Q = 4) on a periodic box: centred-difference
//! horizontal fields, the positive sub-Laplacian, its powers and critical GN
//! ratios for p = 2.
//!
//! Convention: `X = ∂x − (y/2)∂t`, `Y = ∂y + (x/2)∂t`, left invariant for the
//! law in [`GroupDescriptor::multiply`](crate::group_model::GroupDescriptor::multiply).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::discretization::{Field, PeriodicGrid};
use crate::error::{Error, Result};
use crate::verifier::{gn_ratio_from_norms, FamilySample, FamilyKind, Schedule, TestFamily, VerificationReport, PLATEAU_FACTOR};

pub const VECTOR_FIELD_CONVENTION: &str = "X = d/dx - (y/2) d/dt, Y = d/dy + (x/2) d/dt";
pub const HOMOGENEOUS_DIMENSION: f64 = 4.0;

/// Box `[−Lx, Lx) × [−Ly, Ly) × [−Lt, Lt)` with periodic wrap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergGrid {
    pub half_widths: [f64; 3],
    pub points: [usize; 3],
    #[serde(skip)]
    grid: Option<PeriodicGrid<f64>>,
}

impl HeisenbergGrid {
    pub fn new(half_widths: [f64; 3], points: [usize; 3]) -> Result<Self> {
        let lengths: Vec<f64> = half_widths.iter().map(|h| 2.0 * h).collect();
        let grid = PeriodicGrid::new(lengths, points.to_vec())?;
        Ok(Self { half_widths, points, grid: Some(grid) })
    }

    /// Cube in (x, y) with the t half-width scaled by `t_ratio`.
    pub fn uniform(half_width: f64, t_ratio: f64, n: usize) -> Result<Self> {
        Self::new([half_width, half_width, t_ratio * half_width], [n; 3])
    }

    pub fn grid(&self) -> &PeriodicGrid<f64> {
        self.grid.as_ref().expect("grid is rebuilt on construction")
    }

    pub fn spacing(&self) -> [f64; 3] {
        let g = self.grid();
        [g.spacing(0), g.spacing(1), g.spacing(2)]
    }

    fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|j| self.grid().coordinate(axis, j)).collect()
    }

    pub fn field_from_fn<F: Fn(f64, f64, f64) -> f64 + Sync>(&self, f: F) -> Result<Field<f64>> {
        Field::from_fn(self.grid().clone(), |z| f(z[0], z[1], z[2]))
    }

    fn check(&self, u: &Field<f64>) -> Result<()> {
        if u.grid() != self.grid() {
            return Err(Error::Domain("field lives on a different grid".into()));
        }
        Ok(())
    }

    /// Horizontal derivative along X (`axis_sign = +1`, uses y) or Y (uses x).
    fn horizontal(&self, u: &[f64], which: Horizontal) -> Vec<f64> {
        let [nx, ny, nt] = self.points;
        let [hx, hy, ht] = self.spacing();
        let xs = self.coords(0);
        let ys = self.coords(1);
        let mut out = vec![0.0; u.len()];
        let at = |i: usize, j: usize, k: usize| u[(i * ny + j) * nt + k];
        out.par_chunks_mut(ny * nt).enumerate().for_each(|(i, slab)| {
            let (ip, im) = ((i + 1) % nx, (i + nx - 1) % nx);
            for j in 0..ny {
                let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
                for k in 0..nt {
                    let (kp, km) = ((k + 1) % nt, (k + nt - 1) % nt);
                    let dt = (at(i, j, kp) - at(i, j, km)) / (2.0 * ht);
                    slab[j * nt + k] = match which {
                        Horizontal::X => (at(ip, j, k) - at(im, j, k)) / (2.0 * hx) - 0.5 * ys[j] * dt,
                        Horizontal::Y => (at(i, jp, k) - at(i, jm, k)) / (2.0 * hy) + 0.5 * xs[i] * dt,
                    };
                }
            }
        });
        out
    }

    pub fn x_field(&self, u: &Field<f64>) -> Result<Field<f64>> {
        self.check(u)?;
        Field::new(self.grid().clone(), self.horizontal(u.values(), Horizontal::X))
    }

    pub fn y_field(&self, u: &Field<f64>) -> Result<Field<f64>> {
        self.check(u)?;
        Field::new(self.grid().clone(), self.horizontal(u.values(), Horizontal::Y))
    }

    fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let xu = self.horizontal(u, Horizontal::X);
        let yu = self.horizontal(u, Horizontal::Y);
        let xxu = self.horizontal(&xu, Horizontal::X);
        let yyu = self.horizontal(&yu, Horizontal::Y);
        xxu.iter().zip(&yyu).map(|(a, b)| -(a + b)).collect()
    }

    /// `𝓛u = −(X² + Y²)u`. The centred differences are antisymmetric and the
    /// coefficients do not depend on the differentiated variable, so `Xᵀ = −X`
    /// and `𝓛 = XᵀX + YᵀY` is symmetric and nonnegative.
    pub fn sublaplacian_apply(&self, u: &Field<f64>) -> Result<Field<f64>> {
        self.check(u)?;
        Field::new(self.grid().clone(), self.apply_raw(u.values()))
    }

    /// `𝓛^s u` for `s ∈ [0, 2]`: integer powers directly, otherwise by
    /// Lanczos with full reorthogonalisation.
    pub fn sublaplacian_power(&self, u: &Field<f64>, s: f64, cfg: &LanczosConfig) -> Result<Field<f64>> {
        self.check(u)?;
        if !(0.0..=2.0).contains(&s) {
            return Err(Error::Domain(format!("power must lie in [0, 2], got {s}")));
        }
        if s == 0.0 {
            return Ok(u.clone());
        }
        if s == 1.0 {
            return self.sublaplacian_apply(u);
        }
        if s == 2.0 {
            return self.sublaplacian_apply(&self.sublaplacian_apply(u)?);
        }
        let values = lanczos_function(|v| self.apply_raw(v), u.values(), |lam| lam.max(0.0).powf(s), cfg)?;
        Field::new(self.grid().clone(), values)
    }

    /// Dense matrix of 𝓛 (small grids only).
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.grid().len();
        if n > 4096 {
            return Err(Error::Config(format!("dense sub-Laplacian limited to 4096 points, grid has {n}")));
        }
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.apply_raw(&e);
            e[c] = 0.0;
            m.set_column(c, &DVector::from_vec(col));
        }
        Ok(m)
    }

    /// Left translation by the grid point with index offsets `shift`:
    /// `(τu)(z) = u(g·z)`. The induced t-shift `(a·y − b·x)/2` must be a whole
    /// number of t-cells at every grid point.
    pub fn left_translate(&self, u: &Field<f64>, shift: [isize; 3]) -> Result<Field<f64>> {
        self.check(u)?;
        let [nx, ny, nt] = self.points;
        let [hx, hy, ht] = self.spacing();
        let a = shift[0] as f64 * hx;
        let b = shift[1] as f64 * hy;
        // t-offset in cells per unit step in y and in x.
        let per_y = a * hy / (2.0 * ht);
        let per_x = -b * hx / (2.0 * ht);
        let aligned = |v: f64| (v - v.round()).abs() < 1e-9;
        if !aligned(per_y) || !aligned(per_x) {
            return Err(Error::Config(format!(
                "translation is not grid aligned: t-shift per cell is ({per_x}, {per_y}) cells"
            )));
        }
        let (per_y, per_x) = (per_y.round() as isize, per_x.round() as isize);
        // Offsets of (x, y) relative to the centre index, where the coordinate is 0.
        let (cx, cy) = ((nx / 2) as isize, (ny / 2) as isize);
        let wrap = |v: isize, n: usize| v.rem_euclid(n as isize) as usize;
        let src = u.values();
        let mut out = vec![0.0; src.len()];
        out.par_chunks_mut(ny * nt).enumerate().for_each(|(i, slab)| {
            for j in 0..ny {
                let dk = shift[2] + per_y * (j as isize - cy) + per_x * (i as isize - cx);
                let si = wrap(i as isize + shift[0], nx);
                let sj = wrap(j as isize + shift[1], ny);
                for k in 0..nt {
                    slab[j * nt + k] = src[(si * ny + sj) * nt + wrap(k as isize + dk, nt)];
                }
            }
        });
        Field::new(self.grid().clone(), out)
    }

    /// `‖𝓛τu − τ𝓛u‖₂ / ‖𝓛u‖₂` for a grid-aligned left translation.
    pub fn left_invariance_defect(&self, u: &Field<f64>, shift: [isize; 3]) -> Result<f64> {
        let lu = self.sublaplacian_apply(u)?;
        let a = self.sublaplacian_apply(&self.left_translate(u, shift)?)?;
        let b = self.left_translate(&lu, shift)?;
        Ok(a.sub(&b).lp_norm(2.0)? / lu.lp_norm(2.0)?)
    }
}

#[derive(Clone, Copy)]
enum Horizontal {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Convergence is checked every `check_every` steps.
    pub check_every: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 400, check_every: 10 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::scalar::tree_sum_by(a.len(), |i| a[i] * b[i])
}

/// `f(A) u` for symmetric `A` given as a matvec, via the Lanczos
/// approximation `‖u‖ V f(T) e₁`. Converged when successive approximations
/// differ by less than `cfg.tol` relative.
pub fn lanczos_function<A, F>(apply: A, u: &[f64], f: F, cfg: &LanczosConfig) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
    F: Fn(f64) -> f64,
{
    let beta0 = dot(u, u).sqrt();
    if beta0 == 0.0 {
        return Ok(vec![0.0; u.len()]);
    }
    let mut basis: Vec<Vec<f64>> = vec![u.iter().map(|v| v / beta0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    let mut change = f64::INFINITY;
    loop {
        let k = basis.len();
        let mut w = apply(&basis[k - 1]);
        let alpha = dot(&w, &basis[k - 1]);
        alphas.push(alpha);
        // Full reorthogonalisation, twice for stability.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let breakdown = beta <= 1e-13 * alpha.abs().max(1.0);
        if breakdown || k % cfg.check_every == 0 || k >= cfg.max_iter {
            let approx = lanczos_combine(&basis, &alphas, &betas, beta0, &f);
            if let Some(prev) = &previous {
                let diff = prev.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let norm = approx.iter().map(|a| a * a).sum::<f64>().sqrt();
                change = if norm > 0.0 { diff / norm } else { diff };
            }
            if breakdown || change < cfg.tol {
                return Ok(approx);
            }
            if k >= cfg.max_iter {
                return Err(Error::NonConvergence { iterations: k, residual: change });
            }
            previous = Some(approx);
        }
        betas.push(beta);
        basis.push(w.into_iter().map(|v| v / beta).collect());
    }
}

fn lanczos_combine<F: Fn(f64) -> f64>(basis: &[Vec<f64>], alphas: &[f64], betas: &[f64], beta0: f64, f: &F) -> Vec<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let eigenvalues = snap_null(eig.eigenvalues.as_slice());
    // c = Q f(Λ) Qᵀ e₁
    let coeffs: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| eig.eigenvectors[(i, j)] * f(eigenvalues[j]) * eig.eigenvectors[(0, j)]).sum::<f64>())
        .collect();
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (v, c) in basis.iter().zip(&coeffs) {
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += beta0 * c * vi);
    }
    out
}

/// Eigenvalues below `1e-12·max|λ|` are rounding noise on the null space;
/// `λ^s` would amplify them, so they are set to zero.
fn snap_null(values: &[f64]) -> Vec<f64> {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.iter().map(|&v| if v.abs() <= 1e-12 * top { 0.0 } else { v }).collect()
}

/// `f(A) u` from a full eigendecomposition; the reference for small grids.
pub fn dense_function<F: Fn(f64) -> f64>(a: &DMatrix<f64>, u: &[f64], f: F) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let q = &eig.eigenvectors;
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), snap_null(eig.eigenvalues.as_slice()).into_iter().map(f));
    let coeff = q.transpose() * DVector::from_column_slice(u);
    (q * coeff.component_mul(&mapped)).iter().cloned().collect()
}

/// `exp(−(x²+y²)/w² − t²/w⁴)`: one profile under the group dilations.
pub fn gaussian_profile(grid: &HeisenbergGrid, width: f64) -> Result<Field<f64>> {
    let (w2, w4) = (width * width, width.powi(4));
    grid.field_from_fn(|x, y, t| (-(x * x + y * y) / w2 - t * t / w4).exp())
}

/// `count` log-spaced widths in `[w_min, w_max]`.
pub fn gaussian_family(grid: &HeisenbergGrid, count: usize, w_min: f64, w_max: f64) -> Result<FamilySample> {
    if count == 0 {
        return Err(Error::Config("family must have at least one member".into()));
    }
    let widths: Vec<f64> = (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (w_min.ln() + t * (w_max.ln() - w_min.ln())).exp()
        })
        .collect();
    let fields = widths.iter().map(|&w| gaussian_profile(grid, w)).collect::<Result<Vec<_>>>()?;
    let meta = TestFamily {
        kind: FamilyKind::Gaussians,
        seed: 0,
        count,
        scale_min: w_min,
        scale_max: w_max,
        schedule: Schedule::Random,
        decay: 0.0,
        coherent: true,
        mean_zero: false,
    };
    Ok(FamilySample { meta, fields })
}

/// `ρ(f,q) = ‖f‖_q/(q^{1/2}‖𝓛f‖₂^{1−2/q}‖f‖₂^{2/q})` over the family with
/// the plateau rule: maximum within 10% of the maximum over the half with
/// smaller `‖𝓛f‖₂`.
pub fn empirical_gn_ratio_h1(grid: &HeisenbergGrid, family: &FamilySample, q: f64) -> Result<VerificationReport> {
    if family.is_empty() {
        return Err(Error::Config("empty family".into()));
    }
    if !(q > 2.0) {
        return Err(Error::Domain(format!("q must exceed p = 2, got {q}")));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (i, f) in family.fields.iter().enumerate() {
        if f.max_abs() == 0.0 {
            warnings.push(format!("member {i} is zero and was skipped"));
            continue;
        }
        if !f.is_localized() {
            warnings.push(format!("member {i} is not localized (boundary ratio {:e})", f.boundary_ratio()));
        }
        let top = grid.sublaplacian_apply(f)?.lp_norm(2.0)?;
        rows.push((top, gn_ratio_from_norms(f.lp_norm(q)?, top, f.lp_norm(2.0)?, 2.0, q)));
    }
    if rows.len() < 2 {
        return Err(Error::Config("the plateau rule needs at least two nonzero members".into()));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].0.partial_cmp(&rows[b].0).expect("finite norms"));
    let lower = order[..order.len() / 2].iter().map(|&i| rows[i].1).fold(f64::NEG_INFINITY, f64::max);
    let ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let params = json!({
        "p": 2.0, "Q": HOMOGENEOUS_DIMENSION, "q": q, "group": "heisenberg1",
        "half_widths": grid.half_widths, "points": grid.points, "convention": VECTOR_FIELD_CONVENTION,
    });
    let mut report = VerificationReport::new_public("heisenberg_gn", &family.meta, params, ratios, PLATEAU_FACTOR * lower, 0.0);
    report.pass = report.pass && report.ratios.iter().all(|r| r.is_finite());
    report.warnings = warnings;
    report.diagnostics.insert("lower_half_max".into(), json!(lower));
    report.diagnostics.insert("operator_norms".into(), json!(rows.iter().map(|r| r.0).collect::<Vec<_>>()));
    Ok(report)
}
