//! Empirical checks of the critical GN, Trudinger, BGW and set-estimate
//! inequalities and of the Hölder-seminorm lemma over reproducible families.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::constants::{conjugate, series_start, trudinger_alpha_threshold, trudinger_constant, TRUDINGER_TOL};
use crate::discretization::{Field, PeriodicGrid};
use crate::error::{Error, Result};
use crate::scalar::tree_sum_by;
use crate::spectral::{frequency_index, SpectralOperator};

/// Relative slack of the GN pass rule.
pub const GN_TOLERANCE: f64 = 1e-10;
/// Plateau rule: high-norm half may exceed the low-norm half by at most 10%.
pub const PLATEAU_FACTOR: f64 = 1.1;
/// Minimum number of pairs for a meaningful Hölder estimate.
pub const MIN_HOLDER_PAIRS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    BandLimitedNoise,
    Gaussians,
    ConcentratingBumps,
    DilatedGroundStates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Scale drawn log-uniformly from the range.
    Random,
    /// Member `j` uses `scale_min · 2^j`.
    Doubling,
}

/// Reproducible description of a function family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub seed: u64,
    pub count: usize,
    /// Cutoff frequency index (band-limited), width (Gaussians), radius (bumps).
    pub scale_min: f64,
    pub scale_max: f64,
    pub schedule: Schedule,
    /// Fourier amplitudes `(1+|k|)^{-decay}` for band-limited noise.
    pub decay: f64,
    /// Phases aligned so that every mode peaks at the origin.
    pub coherent: bool,
    pub mean_zero: bool,
}

impl TestFamily {
    pub fn band_limited(seed: u64, count: usize, k_min: f64, k_max: f64) -> Self {
        Self {
            kind: FamilyKind::BandLimitedNoise,
            seed,
            count,
            scale_min: k_min,
            scale_max: k_max,
            schedule: Schedule::Random,
            decay: 0.0,
            coherent: false,
            mean_zero: false,
        }
    }

    /// Band-limited members with cutoffs `k0·2^j`.
    pub fn frequency_doubling(seed: u64, count: usize, k0: f64) -> Self {
        Self { schedule: Schedule::Doubling, scale_max: k0 * 2f64.powi(count as i32 - 1), ..Self::band_limited(seed, count, k0, k0) }
    }

    pub fn gaussians(seed: u64, count: usize, w_min: f64, w_max: f64) -> Self {
        Self { kind: FamilyKind::Gaussians, ..Self::band_limited(seed, count, w_min, w_max) }
    }

    pub fn bumps(seed: u64, count: usize, r_min: f64, r_max: f64) -> Self {
        Self { kind: FamilyKind::ConcentratingBumps, ..Self::band_limited(seed, count, r_min, r_max) }
    }

    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = decay;
        self
    }

    pub fn coherent(mut self, coherent: bool) -> Self {
        self.coherent = coherent;
        self
    }

    pub fn mean_zero(mut self, mean_zero: bool) -> Self {
        self.mean_zero = mean_zero;
        self
    }

    fn member_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn member_scale(&self, index: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self.schedule {
            Schedule::Doubling => self.scale_min * 2f64.powi(index as i32),
            Schedule::Random => {
                let (lo, hi) = (self.scale_min.ln(), self.scale_max.ln());
                if hi > lo {
                    rng.gen_range(lo..=hi).exp()
                } else {
                    self.scale_min
                }
            }
        }
    }

    /// Builds every member on the operator's grid. Member `i` only depends on
    /// `(seed, i)`, so families with a common prefix share their fields.
    pub fn generate(&self, op: &SpectralOperator<f64>) -> Result<FamilySample> {
        if self.count == 0 {
            return Err(Error::Config("family must have at least one member".into()));
        }
        if !(self.scale_min > 0.0 && self.scale_max >= self.scale_min) {
            return Err(Error::Config(format!(
                "scale range must satisfy 0 < min <= max, got [{}, {}]",
                self.scale_min, self.scale_max
            )));
        }
        let fields = match self.kind {
            FamilyKind::DilatedGroundStates => {
                return Err(Error::Config("dilated ground states are built with FamilySample::dilated_ground_states".into()))
            }
            // FFT plans are shared; members are built one after another.
            FamilyKind::BandLimitedNoise => {
                let grid = op.grid();
                let sigma = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min) / 16.0;
                let window = Field::from_fn(grid.clone(), |x| {
                    (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma * sigma)).exp()
                })?;
                (0..self.count).map(|i| self.band_limited_member(op, &window, i)).collect::<Result<Vec<_>>>()?
            }
            _ => (0..self.count).into_par_iter().map(|i| self.profile_member(op.grid(), i)).collect::<Result<Vec<_>>>()?,
        };
        Ok(FamilySample { meta: self.clone(), fields })
    }

    fn band_limited_member(&self, op: &SpectralOperator<f64>, window: &Field<f64>, index: usize) -> Result<Field<f64>> {
        let grid = op.grid();
        let mut rng = self.member_rng(index);
        let cutoff = self.member_scale(index, &mut rng);
        let dim = grid.dim();
        let mut multi = vec![0usize; dim];
        let mut ks = vec![0.0f64; dim];
        let mut hat = vec![Complex::new(0.0, 0.0); grid.len()];
        for (flat, c) in hat.iter_mut().enumerate() {
            grid.unravel(flat, &mut multi);
            for a in 0..dim {
                ks[a] = frequency_index(multi[a], grid.points()[a]) as f64;
            }
            if ks.iter().any(|k| k.abs() > cutoff) {
                continue;
            }
            let norm = ks.iter().map(|k| k * k).sum::<f64>().sqrt();
            let amp = (1.0 + norm).powf(-self.decay);
            // Index j sits at x = −L/2 + jh, so (−1)^k puts the coherent peak at the origin.
            let phase = if self.coherent { std::f64::consts::PI * ks.iter().sum::<f64>() } else { rng.gen_range(0.0..std::f64::consts::TAU) };
            let radius = if self.coherent { 1.0 } else { rng.gen_range(0.5..1.5) };
            *c = Complex::from_polar(amp * radius, phase);
        }
        let raw = op.inverse_real(hat);
        let mut f = raw.zip_with(window, |a, b| a * b);
        if self.mean_zero {
            let m = f.mean();
            f = f.map(|v| v - m);
        }
        let peak = f.max_abs();
        if peak > 0.0 {
            f = f.scale(1.0 / peak);
        }
        Ok(f)
    }

    fn profile_member(&self, grid: &PeriodicGrid<f64>, index: usize) -> Result<Field<f64>> {
        let mut rng = self.member_rng(index);
        let scale = self.member_scale(index, &mut rng);
        let lmin = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
        let dim = grid.dim();
        let shift_range = (lmin / 40.0).max(1e-12);
        let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-shift_range..shift_range)).collect();
        let amp = rng.gen_range(0.5..2.0);
        let kind = self.kind;
        let f = Field::from_fn(grid.clone(), move |x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (scale * scale);
            match kind {
                FamilyKind::Gaussians => amp * (-r2).exp(),
                _ => {
                    if r2 < 1.0 {
                        amp * (1.0 - 1.0 / (1.0 - r2)).exp()
                    } else {
                        0.0
                    }
                }
            }
        })?;
        if self.mean_zero {
            let m = f.mean();
            return Ok(f.map(|v| v - m));
        }
        Ok(f)
    }
}

/// Generated members together with their description.
#[derive(Clone, Debug)]
pub struct FamilySample {
    pub meta: TestFamily,
    pub fields: Vec<Field<f64>>,
}

impl FamilySample {
    /// `a·φ(m x)` for integer factors `m`, sampled exactly from grid values
    /// (index `m·j` about the box centre, zero outside the box).
    pub fn dilated_ground_states(phi: &Field<f64>, factors: &[usize], seed: u64) -> Result<Self> {
        let grid = phi.grid().clone();
        let dim = grid.dim();
        let points = grid.points().to_vec();
        let mut fields = Vec::with_capacity(factors.len());
        for (i, &m) in factors.iter().enumerate() {
            if m == 0 {
                return Err(Error::Config("dilation factors must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let amp = rng.gen_range(0.5..2.0);
            let mut multi = vec![0usize; dim];
            let mut src = vec![0usize; dim];
            let values = (0..grid.len())
                .map(|flat| {
                    grid.unravel(flat, &mut multi);
                    for a in 0..dim {
                        let n = points[a] as isize;
                        let j = (multi[a] as isize - n / 2) * m as isize;
                        if j < -n / 2 || j >= n / 2 {
                            return 0.0;
                        }
                        src[a] = (j + n / 2) as usize;
                    }
                    amp * phi.values()[grid.flat_index(&src)]
                })
                .collect();
            fields.push(Field::new(grid.clone(), values)?);
        }
        let meta = TestFamily {
            kind: FamilyKind::DilatedGroundStates,
            seed,
            count: factors.len(),
            scale_min: *factors.iter().min().unwrap_or(&1) as f64,
            scale_max: *factors.iter().max().unwrap_or(&1) as f64,
            schedule: Schedule::Random,
            decay: 0.0,
            coherent: false,
            mean_zero: false,
        };
        Ok(Self { meta, fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The first `n` members.
    pub fn prefix(&self, n: usize) -> Self {
        let mut meta = self.meta.clone();
        meta.count = n.min(self.fields.len());
        let fields = self.fields[..meta.count].to_vec();
        Self { meta, fields }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub family: TestFamily,
    pub params: Value,
    pub ratios: Vec<f64>,
    pub max: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
    pub diagnostics: Map<String, Value>,
}

impl VerificationReport {
    pub fn new_public(check: &str, family: &TestFamily, params: Value, ratios: Vec<f64>, reference: f64, tolerance: f64) -> Self {
        Self::new(check, family, params, ratios, reference, tolerance)
    }

    fn new(check: &str, family: &TestFamily, params: Value, ratios: Vec<f64>, reference: f64, tolerance: f64) -> Self {
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            check: check.into(),
            family: family.clone(),
            params,
            pass: max <= reference * (1.0 + tolerance),
            ratios,
            max,
            reference,
            tolerance,
            warnings: Vec::new(),
            diagnostics: Map::new(),
        }
    }

    /// Number of samples above the reference.
    pub fn violations(&self) -> usize {
        self.ratios.iter().filter(|&&r| r > self.reference * (1.0 + self.tolerance)).count()
    }
}

/// `‖f‖_q / (q^{1−1/p}·‖R^s f‖_p^{1−p/q}·‖f‖_p^{p/q})` from the three norms.
pub fn gn_ratio_from_norms(f_q: f64, top_p: f64, f_p: f64, p: f64, q: f64) -> f64 {
    f_q / (q.powf(1.0 - 1.0 / p) * top_p.powf(1.0 - p / q) * f_p.powf(p / q))
}

/// Default q-grid for GN ratios: `q = p` and 59 log-spaced points up to 10³.
pub fn gn_q_grid(p: f64) -> Vec<f64> {
    let mut grid = vec![p];
    grid.extend(crate::constants::log_q_grid(p, 1e-3 * p, 1e3, 59));
    grid
}

/// Largest q-grid values used for the empirical B (top decade).
fn top_decade(q_grid: &[f64]) -> f64 {
    q_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / 10.0
}

/// Per-field GN ratios over `q_grid`; `None` for the zero field.
fn gn_ratios(op: &SpectralOperator<f64>, f: &Field<f64>, p: f64, big_q: f64, q_grid: &[f64]) -> Result<Option<Vec<f64>>> {
    let peak = f.max_abs();
    if peak == 0.0 {
        return Ok(None);
    }
    let g = f.scale(1.0 / peak);
    let top = op.apply_power(&g, big_q / (op.nu() * p))?.lp_norm(p)?;
    let fp = g.lp_norm(p)?;
    q_grid
        .iter()
        .map(|&q| Ok(gn_ratio_from_norms(g.lp_norm(q)?, top, fp, p, q)))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Critical GN check against reference `c1`. The per-sample ratio is the
/// maximum over `q_grid`; the diagnostics carry the empirical B.
pub fn verify_gn(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    family: &FamilySample,
    c1: f64,
    q_grid: &[f64],
) -> Result<VerificationReport> {
    if family.is_empty() {
        return Err(Error::Config("empty family".into()));
    }
    if q_grid.iter().any(|&q| q < p) {
        return Err(Error::Domain("q-grid must lie in [p, ∞)".into()));
    }
    let per: Vec<Option<Vec<f64>>> =
        family.fields.iter().map(|f| gn_ratios(op, f, p, big_q, q_grid)).collect::<Result<_>>()?;
    let cut = top_decade(q_grid);
    let mut ratios = Vec::new();
    let mut warnings = Vec::new();
    let mut b_estimate = 0.0f64;
    let mut argmax_q = Vec::new();
    for (i, r) in per.iter().enumerate() {
        match r {
            None => warnings.push(format!("member {i} is zero and was skipped")),
            Some(r) => {
                let (k, m) = r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
                ratios.push(m);
                argmax_q.push(q_grid[k]);
                for (&q, &v) in q_grid.iter().zip(r) {
                    if q >= cut {
                        b_estimate = b_estimate.max(v);
                    }
                }
            }
        }
    }
    let params = json!({ "p": p, "Q": big_q, "q_grid_min": q_grid.first(), "q_grid_max": q_grid.last(), "q_points": q_grid.len() });
    let mut report = VerificationReport::new("gn", &family.meta, params, ratios, c1, GN_TOLERANCE);
    report.warnings = warnings;
    report.diagnostics.insert("b_estimate".into(), json!(b_estimate));
    report.diagnostics.insert("b_estimate_q_min".into(), json!(cut));
    report.diagnostics.insert("argmax_q".into(), json!(argmax_q));
    Ok(report)
}

/// `Σ_{k ≥ k0} y^k/k!` to relative accuracy `TRUDINGER_TOL`.
pub fn exp_tail(y: f64, k0: usize) -> f64 {
    if y == 0.0 {
        return if k0 == 0 { 1.0 } else { 0.0 };
    }
    if y > 1.0 {
        let mut head = 0.0;
        let mut term = 1.0;
        for k in 0..k0 {
            head += term;
            term *= y / (k + 1) as f64;
        }
        return y.exp() - head;
    }
    let mut term = (1..=k0).fold(1.0, |t, k| t * y / k as f64);
    let mut sum = 0.0;
    let mut k = k0;
    loop {
        sum += term;
        if term < TRUDINGER_TOL * sum {
            return sum;
        }
        k += 1;
        term *= y / k as f64;
    }
}

/// `∫ (exp(α|f|^{p′}) − Σ_{k<p−1} (α|f|^{p′})^k/k!) dx`.
pub fn trudinger_lhs(f: &Field<f64>, alpha: f64, p: f64) -> f64 {
    let pp = conjugate(p);
    let k0 = series_start(p);
    let v = f.values();
    tree_sum_by(v.len(), |i| exp_tail(alpha * v[i].abs().powf(pp), k0)) * f.grid().cell_volume()
}

/// Trudinger check at `alpha` with `C₂ = trudinger_constant(alpha, c1)`, each
/// member normalised to `‖R^{Q/(νp)} f‖_p = 1`.
pub fn verify_trudinger(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    family: &FamilySample,
    alpha: f64,
    c1: f64,
) -> Result<VerificationReport> {
    let threshold = trudinger_alpha_threshold(c1, p);
    if !(alpha > 0.0) || alpha >= threshold {
        return Err(Error::Config(format!(
            "α = {alpha} is outside (0, {threshold}) where the C₂ series converges"
        )));
    }
    let c2 = trudinger_constant(alpha, c1, p, TRUDINGER_TOL)?;
    let normalized = normalized_members(op, p, big_q, family)?;
    let mut ratios = Vec::new();
    let mut warnings = Vec::new();
    for (i, g) in normalized.iter().enumerate() {
        match g {
            None => warnings.push(format!("member {i} has ‖R^(Q/νp) f‖_p = 0 and was skipped")),
            Some(g) => ratios.push(trudinger_lhs(g, alpha, p) / g.lp_power(p)?),
        }
    }
    let params = json!({ "p": p, "Q": big_q, "alpha": alpha, "c1": c1, "alpha_threshold": threshold });
    let mut report = VerificationReport::new("trudinger", &family.meta, params, ratios, c2, 0.0);
    report.warnings = warnings;
    report.diagnostics.insert("slack".into(), json!(c2 / report.max));
    Ok(report)
}

fn normalized_members(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    family: &FamilySample,
) -> Result<Vec<Option<Field<f64>>>> {
    family
        .fields
        .iter()
        .map(|f| {
            let top = op.apply_power(f, big_q / (op.nu() * p))?.lp_norm(p)?;
            Ok(if top > 0.0 { Some(f.scale(1.0 / top)) } else { None })
        })
        .collect()
}

/// Largest α in `(0, threshold)` for which [`verify_trudinger`] passes, by
/// bisection to relative width `rel_tol`.
pub fn max_passing_alpha(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    family: &FamilySample,
    c1: f64,
    rel_tol: f64,
) -> Result<f64> {
    let threshold = trudinger_alpha_threshold(c1, p);
    let normalized: Vec<Field<f64>> = normalized_members(op, p, big_q, family)?.into_iter().flatten().collect();
    let masses: Vec<f64> = normalized.iter().map(|g| g.lp_power(p)).collect::<Result<_>>()?;
    // Near the threshold the C₂ series hits its term cap; such α cannot be
    // certified and count as failing.
    let passes = |alpha: f64| -> Result<bool> {
        let Ok(c2) = trudinger_constant(alpha, c1, p, TRUDINGER_TOL) else {
            return Ok(false);
        };
        Ok(normalized.iter().zip(&masses).all(|(g, &m)| trudinger_lhs(g, alpha, p) <= c2 * m))
    };
    let (mut lo, mut hi) = (0.0, threshold);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// BGW check: each member scaled to `‖f‖_{L^p_{Q/p}} = 1`, ratio
/// `‖f‖_∞/(1+log(1+‖R^{a/ν}f‖_q))^{1/p′}`, pass iff the maximum over the
/// higher-norm half is within 10% of the lower-norm half.
pub fn verify_bgw(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    a: f64,
    q_param: f64,
    family: &FamilySample,
) -> Result<VerificationReport> {
    if a <= big_q / q_param {
        return Err(Error::Hypothesis(format!("requires a > Q/q, got a = {a}, Q/q = {}", big_q / q_param)));
    }
    if family.len() < 2 {
        return Err(Error::Config("the plateau rule needs at least two members".into()));
    }
    let pp = conjugate(p);
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(family.len());
    let mut warnings = Vec::new();
    for (i, f) in family.fields.iter().enumerate() {
        let x = op.sobolev_norm(f, big_q / p, p)?;
        if x == 0.0 {
            warnings.push(format!("member {i} is zero and was skipped"));
            continue;
        }
        let g = f.scale(1.0 / x);
        let top = op.apply_power(&g, a / op.nu())?.lp_norm(q_param)?;
        let r = g.max_abs() / (1.0 + (1.0 + top).ln()).powf(1.0 / pp);
        rows.push((top, r));
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| rows[i].0.partial_cmp(&rows[j].0).expect("finite norms"));
    let half = order.len() / 2;
    let lower_max = order[..half].iter().map(|&i| rows[i].1).fold(f64::NEG_INFINITY, f64::max);
    let upper_max = order[half..].iter().map(|&i| rows[i].1).fold(f64::NEG_INFINITY, f64::max);
    let norms: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let params = json!({ "p": p, "Q": big_q, "a": a, "q": q_param, "branch": if a - big_q / q_param < 1.0 { "holder" } else { "cutoff" } });
    let mut report = VerificationReport::new("bgw", &family.meta, params, ratios, PLATEAU_FACTOR * lower_max, 0.0);
    report.warnings = warnings;
    report.diagnostics.insert("lower_half_max".into(), json!(lower_max));
    report.diagnostics.insert("upper_half_max".into(), json!(upper_max));
    report.diagnostics.insert("operator_norms".into(), json!(norms));
    report.diagnostics.insert("max_operator_norm".into(), json!(norms.iter().cloned().fold(0.0, f64::max)));
    report.diagnostics.insert("plateau_rule".into(), json!("max over the higher-norm half <= 1.1 * max over the lower-norm half"));
    Ok(report)
}

/// `C₄ = e·max(1, C₁)`: the q = p branch costs e, the q = log(1/|Ω|) branch e·C₁.
pub fn bw_constant(c1: f64) -> f64 {
    std::f64::consts::E * c1.max(1.0)
}

/// Set estimate `∫_Ω|f| ≤ C₄‖f‖_{L^p_{Q/p}}|Ω|(1+|log|Ω||)^{1/p′}` over
/// Euclidean balls centred at the origin.
pub fn verify_bw_set(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    c1: f64,
    f: &Field<f64>,
    radii: &[f64],
    family: &TestFamily,
) -> Result<VerificationReport> {
    let x_norm = op.sobolev_norm(f, big_q / p, p)?;
    let lp = f.lp_norm(p)?;
    let c4 = bw_constant(c1);
    let pp = conjugate(p);
    let grid = f.grid();
    let dim = grid.dim();
    // Squared distance to the origin per point, computed once.
    let r2: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(|| vec![0.0; dim], |x, i| {
            grid.point(i, x);
            x.iter().map(|v| v * v).sum()
        })
        .collect();
    let vals = f.values();
    let cell = grid.cell_volume();
    let mut ratios = Vec::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let seam = (-p).exp();
    for &r in radii {
        let rr = r * r;
        let count = tree_sum_by(r2.len(), |i| if r2[i] <= rr { 1.0 } else { 0.0 });
        if count == 0.0 {
            warnings.push(format!("radius {r} selects no grid point and was skipped"));
            continue;
        }
        let integral = tree_sum_by(r2.len(), |i| if r2[i] <= rr { vals[i].abs() } else { 0.0 }) * cell;
        let measure = count * cell;
        let log = measure.ln().abs();
        let ratio = integral / (x_norm * measure * (1.0 + log).powf(1.0 / pp));
        // Branch bounds of the proof; both at the seam.
        let small = std::f64::consts::E * c1 * measure * log.powf(1.0 / pp) * x_norm;
        let large = std::f64::consts::E * measure * lp;
        let branch = if measure > seam { large } else if measure < seam { small } else { small.max(large) };
        ratios.push(ratio);
        rows.push(json!({ "radius": r, "measure": measure, "integral": integral, "ratio": ratio, "branch_bound": branch }));
    }
    let params = json!({ "p": p, "Q": big_q, "c1": c1, "sobolev_norm": x_norm, "sobolev_norm_convention": "sum" });
    let mut report = VerificationReport::new("bw", family, params, ratios, c4, 0.0);
    report.warnings = warnings;
    report.diagnostics.insert("rows".into(), Value::Array(rows));
    Ok(report)
}

/// A sampled pair `(x, y)`: flat index of `x` and the grid offset of `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderPair {
    pub x: usize,
    pub offset: Vec<isize>,
    pub length: f64,
}

/// `count` pairs with `x` uniform on the grid and `|y|` log-uniform in
/// `[2h, L/4]`, `y` grid aligned. The stream is sequential, so a longer
/// request extends a shorter one.
pub fn holder_pairs(grid: &PeriodicGrid<f64>, count: usize, seed: u64) -> Vec<HolderPair> {
    let dim = grid.dim();
    let h: Vec<f64> = (0..dim).map(|a| grid.spacing(a)).collect();
    let hmax = h.iter().cloned().fold(0.0, f64::max);
    let lmin = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo, hi) = ((2.0 * hmax).ln(), (lmin / 4.0).ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = rng.gen_range(0..grid.len());
        let m = rng.gen_range(lo..=hi).exp();
        // Uniform direction from a normalised Gaussian vector.
        let dir: Vec<f64> = (0..dim)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen_range(0.0..1.0));
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let offset: Vec<isize> = dir.iter().zip(&h).map(|(d, hh)| (m * d / (dn * hh)).round() as isize).collect();
        let length = offset.iter().zip(&h).map(|(&o, hh)| (o as f64 * hh).powi(2)).sum::<f64>().sqrt();
        if length < 2.0 * hmax * (1.0 - 1e-12) {
            continue;
        }
        out.push(HolderPair { x, offset, length });
    }
    out
}

fn shifted_index(grid: &PeriodicGrid<f64>, flat: usize, offset: &[isize], sign: isize) -> usize {
    let dim = grid.dim();
    let mut multi = vec![0usize; dim];
    grid.unravel(flat, &mut multi);
    for a in 0..dim {
        let n = grid.points()[a] as isize;
        multi[a] = (multi[a] as isize + sign * offset[a]).rem_euclid(n) as usize;
    }
    grid.flat_index(&multi)
}

/// Hölder quotient of one pair: first difference over `|y|^α` for α < 1,
/// second difference over `|y|` for α = 1.
pub fn holder_quotient(f: &Field<f64>, pair: &HolderPair, alpha: f64) -> f64 {
    let v = f.values();
    let fx = v[pair.x];
    let fp = v[shifted_index(f.grid(), pair.x, &pair.offset, 1)];
    if alpha == 1.0 {
        let fm = v[shifted_index(f.grid(), pair.x, &pair.offset, -1)];
        (fp + fm - 2.0 * fx).abs() / pair.length
    } else {
        (fp - fx).abs() / pair.length.powf(alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub value: f64,
    pub pairs: usize,
    pub warning: Option<String>,
}

pub fn holder_seminorm(f: &Field<f64>, alpha: f64, pair_count: usize, seed: u64) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("Hölder exponent must be in (0, 1], got {alpha}")));
    }
    let pairs = holder_pairs(f.grid(), pair_count, seed);
    let value = pairs.iter().map(|pr| holder_quotient(f, pr, alpha)).fold(0.0, f64::max);
    let warning = (pair_count < MIN_HOLDER_PAIRS)
        .then(|| format!("only {pair_count} pairs sampled; at least {MIN_HOLDER_PAIRS} are needed for a meaningful estimate"));
    Ok(HolderEstimate { value, pairs: pair_count, warning })
}

/// Hölder lemma: ratios `|R^{−λ/ν} f|_α / ‖f‖_p` with `α = λ − Q/p`, at
/// `pair_count` and `2·pair_count` pairs. Passes when the family maximum
/// moves by at most `stability` under the doubling.
pub fn verify_holder(
    op: &SpectralOperator<f64>,
    p: f64,
    big_q: f64,
    lambda: f64,
    family: &FamilySample,
    pair_count: usize,
    seed: u64,
    stability: f64,
) -> Result<VerificationReport> {
    let alpha = lambda - big_q / p;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("α = λ − Q/p must be in (0, 1], got {alpha}")));
    }
    let pairs = holder_pairs(op.grid(), 2 * pair_count, seed);
    let rows: Vec<(f64, f64)> = family
        .fields
        .iter()
        .map(|f| {
            let tf = op.riesz_potential(f, lambda)?;
            let norm = f.lp_norm(p)?;
            let q: Vec<f64> = pairs.iter().map(|pr| holder_quotient(&tf, pr, alpha)).collect();
            let half = q[..pair_count].iter().cloned().fold(0.0, f64::max);
            let full = q.iter().cloned().fold(0.0, f64::max);
            Ok((half / norm, full / norm))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let doubled: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let max_n = ratios.iter().cloned().fold(0.0, f64::max);
    let max_2n = doubled.iter().cloned().fold(0.0, f64::max);
    let params = json!({ "p": p, "Q": big_q, "lambda": lambda, "alpha": alpha, "pair_count": pair_count, "seed": seed });
    let mut report = VerificationReport::new("holder", &family.meta, params, doubled, max_n, stability);
    if pair_count < MIN_HOLDER_PAIRS {
        report.warnings.push(format!("only {pair_count} pairs; at least {MIN_HOLDER_PAIRS} recommended"));
    }
    report.diagnostics.insert("max_at_pair_count".into(), json!(max_n));
    report.diagnostics.insert("max_at_double_pair_count".into(), json!(max_2n));
    report.diagnostics.insert("family_constant".into(), json!(max_2n));
    report.diagnostics.insert("ratios_at_pair_count".into(), json!(ratios));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::PeriodicGrid;
    use std::f64::consts::{PI, TAU};

    fn op2(l: f64, n: usize) -> SpectralOperator<f64> {
        SpectralOperator::laplacian(&PeriodicGrid::cube(2, l, n).unwrap())
    }

    #[test]
    fn families_are_reproducible_and_localized() {
        let op = op2(20.0, 64);
        let fam = TestFamily::band_limited(7, 6, 2.0, 10.0);
        let a = fam.generate(&op).unwrap();
        let b = fam.generate(&op).unwrap();
        assert_eq!(a.fields, b.fields);
        assert!(a.fields.iter().all(|f| f.is_localized()));
        // Prefix property.
        let longer = TestFamily { count: 9, ..fam.clone() }.generate(&op).unwrap();
        assert_eq!(&longer.fields[..6], &a.fields[..]);
        let g = TestFamily::gaussians(3, 4, 0.5, 2.0).generate(&op).unwrap();
        assert!(g.fields.iter().all(|f| f.is_localized()));
        let bump = TestFamily::bumps(3, 4, 0.2, 1.0).mean_zero(false).generate(&op).unwrap();
        assert!(bump.fields.iter().all(|f| f.max_abs() > 0.0));
    }

    #[test]
    fn gn_ratio_at_q_equal_p_and_amplitude_invariance() {
        let op = op2(20.0, 64);
        let fam = TestFamily::gaussians(1, 3, 0.7, 1.5).generate(&op).unwrap();
        let r = verify_gn(&op, 2.0, 2.0, &fam, 1.0, &[2.0]).unwrap();
        for v in &r.ratios {
            assert!((v - 2f64.powf(-0.5)).abs() < 1e-14);
        }
        let f = &fam.fields[0];
        let q = [2.0, 3.0, 4.0, 10.0];
        let a = gn_ratios(&op, f, 2.0, 2.0, &q).unwrap().unwrap();
        let b = gn_ratios(&op, &f.scale(7.3), 2.0, 2.0, &q).unwrap().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x);
        }
    }

    #[test]
    fn gn_ratio_is_dilation_invariant_on_exact_grids() {
        // f(2x) sampled on the half box with the same N equals f on the full box.
        let (l, n) = (20.0, 64);
        let big = op2(l, n);
        let small = op2(l / 2.0, n);
        let f = TestFamily::band_limited(5, 1, 3.0, 3.0).generate(&big).unwrap().fields.remove(0);
        let g = Field::new(small.grid().clone(), f.values().to_vec()).unwrap();
        let q = [3.0, 4.0, 8.0];
        let a = gn_ratios(&big, &f, 2.0, 2.0, &q).unwrap().unwrap();
        let b = gn_ratios(&small, &g, 2.0, 2.0, &q).unwrap().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn zero_member_is_skipped() {
        let op = op2(20.0, 32);
        let mut fam = TestFamily::gaussians(1, 2, 1.0, 1.0).generate(&op).unwrap();
        fam.fields.push(Field::zeros(op.grid().clone()));
        let r = verify_gn(&op, 2.0, 2.0, &fam, 10.0, &gn_q_grid(2.0)).unwrap();
        assert_eq!(r.ratios.len(), 2);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn monotone_under_nested_families() {
        let op = op2(20.0, 64);
        let fam = TestFamily::band_limited(11, 12, 1.0, 8.0).generate(&op).unwrap();
        let grid = gn_q_grid(2.0);
        let small = verify_gn(&op, 2.0, 2.0, &fam.prefix(5), 10.0, &grid).unwrap();
        let large = verify_gn(&op, 2.0, 2.0, &fam, 10.0, &grid).unwrap();
        assert!(large.max >= small.max);
    }

    #[test]
    fn exp_tail_matches_expm1() {
        for y in [0.0, 1e-12, 0.3, 0.99, 1.5, 20.0] {
            let a = exp_tail(y, 1);
            let b = f64::exp_m1(y);
            assert!((a - b).abs() <= 1e-12 * b.max(f64::MIN_POSITIVE), "y={y}");
        }
        assert!((exp_tail(0.5, 2) - (0.5f64.exp() - 1.5)).abs() < 1e-15);
    }

    #[test]
    fn trudinger_lhs_two_paths() {
        let op = op2(20.0, 64);
        let f = TestFamily::gaussians(2, 1, 1.0, 1.0).generate(&op).unwrap().fields.remove(0);
        let alpha = 0.3;
        let series = trudinger_lhs(&f, alpha, 2.0);
        let direct: f64 = f.values().iter().map(|v| (alpha * v * v).exp() - 1.0).sum::<f64>() * f.grid().cell_volume();
        assert!((series - direct).abs() <= 1e-10 * direct);
        assert_eq!(trudinger_lhs(&Field::zeros(op.grid().clone()), alpha, 2.0), 0.0);
    }

    #[test]
    fn trudinger_rejects_alpha_beyond_threshold() {
        let op = op2(20.0, 32);
        let fam = TestFamily::gaussians(2, 2, 1.0, 1.5).generate(&op).unwrap();
        let thr = trudinger_alpha_threshold(3.0, 2.0);
        assert!(matches!(verify_trudinger(&op, 2.0, 2.0, &fam, thr * 1.01, 3.0), Err(Error::Config(_))));
        let r = verify_trudinger(&op, 2.0, 2.0, &fam, 0.5 * thr, 3.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn bgw_rejects_subcritical_a() {
        let op = op2(20.0, 32);
        let fam = TestFamily::gaussians(2, 3, 1.0, 1.5).generate(&op).unwrap();
        assert!(matches!(verify_bgw(&op, 2.0, 2.0, 1.0, 2.0, &fam), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn bgw_constant_multiples_are_finite() {
        let op = op2(20.0, 64);
        let base = TestFamily::gaussians(2, 1, 1.0, 1.0).generate(&op).unwrap();
        let f = &base.fields[0];
        let fam = FamilySample { meta: base.meta.clone(), fields: vec![f.clone(), f.scale(2.0), f.scale(4.0)] };
        let r = verify_bgw(&op, 2.0, 2.0, 1.5, 2.0, &fam).unwrap();
        assert!(r.ratios.iter().all(|v| v.is_finite() && *v > 0.0));
        // After normalisation the three members coincide.
        assert!((r.ratios[0] - r.ratios[2]).abs() < 1e-12 * r.ratios[0]);
    }

    #[test]
    fn bw_seam_and_empty_radius() {
        let op = SpectralOperator::laplacian(&PeriodicGrid::cube(1, 16.0, 4096).unwrap());
        let f = Field::from_fn(op.grid().clone(), |x: &[f64]| (-x[0] * x[0]).exp()).unwrap();
        let seam_radius = 0.5 * (-2.0f64).exp();
        let fam = TestFamily::gaussians(0, 1, 1.0, 1.0);
        let r = verify_bw_set(&op, 2.0, 1.0, 10.0, &f, &[1e-9, seam_radius, 1.0, 4.0], &fam).unwrap();
        assert_eq!(r.ratios.len(), 4); // x = 0 is always selected
        assert!(r.pass);
        let empty = Field::from_fn(op.grid().clone(), |x| (-(x[0] - 0.3).powi(2)).exp()).unwrap();
        let shifted = verify_bw_set(&op, 2.0, 1.0, 10.0, &empty.shift(&[1]), &[1e-9], &fam).unwrap();
        assert!(shifted.pass);
    }

    #[test]
    fn holder_plane_wave_and_constant() {
        let l = 8.0;
        let grid = PeriodicGrid::cube(2, l, 64).unwrap();
        let c = Field::constant(grid.clone(), 3.0);
        assert_eq!(holder_seminorm(&c, 0.5, 500, 1).unwrap().value, 0.0);
        let k = [2.0 * TAU / l, -TAU / l];
        let wave = Field::from_fn(grid.clone(), |x| (k[0] * x[0] + k[1] * x[1]).cos()).unwrap();
        let pairs = holder_pairs(&grid, 400, 9);
        let mut x = vec![0.0; 2];
        let expected = pairs
            .iter()
            .map(|pr| {
                grid.point(pr.x, &mut x);
                let y: Vec<f64> = pr.offset.iter().enumerate().map(|(a, &o)| o as f64 * grid.spacing(a)).collect();
                let kx = k[0] * x[0] + k[1] * x[1];
                let ky = k[0] * y[0] + k[1] * y[1];
                (2.0 * kx.cos() * (ky.cos() - 1.0)).abs() / pr.length
            })
            .fold(0.0, f64::max);
        let got = holder_seminorm(&wave, 1.0, 400, 9).unwrap();
        assert!((got.value - expected).abs() <= 1e-8 * expected);
        assert!(holder_seminorm(&wave, 1.0, 50, 9).unwrap().warning.is_some());
        assert!(holder_seminorm(&wave, 1.5, 500, 9).is_err());
        // Longer streams extend shorter ones.
        assert_eq!(&holder_pairs(&grid, 800, 9)[..400], &pairs[..]);
        assert!(pairs.iter().all(|p| p.length >= 2.0 * grid.spacing(0) * (1.0 - 1e-12) && p.length <= l / 4.0 * 1.05));
        let _ = PI;
    }

    #[test]
    fn dilated_ground_state_sampling_is_exact() {
        let grid = PeriodicGrid::cube(1, 16.0, 64).unwrap();
        let phi = Field::from_fn(grid.clone(), |x: &[f64]| (-x[0] * x[0]).exp()).unwrap();
        let fam = FamilySample::dilated_ground_states(&phi, &[1, 2], 4).unwrap();
        let amp = fam.fields[1].max_abs();
        let expected = Field::from_fn(grid, |x| amp * (-(4.0 * x[0] * x[0])).exp()).unwrap();
        assert!(fam.fields[1].sub(&expected).max_abs() < 1e-14);
    }
}
