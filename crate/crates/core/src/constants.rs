//! Closed-form constants of the critical Gagliardo–Nirenberg, Trudinger and
//! sharp-constant statements, with convergence diagnostics.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative truncation tolerance for the C₂ series.
pub const TRUDINGER_TOL: f64 = 1e-12;
/// Hard cap on the number of C₂ series terms.
pub const TRUDINGER_MAX_TERMS: usize = 100_000;
/// Default number of points of the logarithmic q-grid.
pub const Q_GRID_POINTS: usize = 400;
/// Offset of the first q-grid point from p.
pub const Q_GRID_OFFSET: f64 = 1e-3;
/// Last q-grid point.
pub const Q_GRID_MAX: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GNParams<T: Real> {
    pub p: T,
    pub q: T,
    #[serde(rename = "Q")]
    pub big_q: T,
    pub sphere: T,
}

impl<T: Real> GNParams<T> {
    pub fn new(p: T, q: T, big_q: T, sphere: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::Domain(format!("requires 1 < p < ∞, got p = {p}")));
        }
        if !(q >= p) || !q.is_finite() {
            return Err(Error::Domain(format!("requires p <= q < ∞, got p = {p}, q = {q}")));
        }
        if !(big_q > T::zero()) {
            return Err(Error::Domain(format!("requires Q > 0, got {big_q}")));
        }
        if !(sphere > T::zero()) || !sphere.is_finite() {
            return Err(Error::Domain(format!("requires |℘| > 0, got {sphere}")));
        }
        Ok(Self { p, q, big_q, sphere })
    }

    pub fn with_q(&self, q: T) -> Result<Self> {
        Self::new(self.p, q, self.big_q, self.sphere)
    }

    pub fn p_prime(&self) -> T {
        conjugate(self.p)
    }

    /// λ = Q(1/p − 1/q).
    pub fn lambda(&self) -> T {
        self.big_q * (self.p.recip() - self.q.recip())
    }

    fn require_q_above_p(&self) -> Result<()> {
        if self.q <= self.p {
            return Err(Error::Domain(format!("requires q > p, got p = {}, q = {}", self.p, self.q)));
        }
        Ok(())
    }
}

/// Hölder conjugate `p/(p−1)`; infinite for p = 1.
pub fn conjugate<T: Real>(p: T) -> T {
    if p == T::one() {
        T::infinity()
    } else {
        p / (p - T::one())
    }
}

/// `(‖K¹‖₁, ‖K²‖_{p̃′})` for the split of `|x|^{λ−Q}` at radius `s`.
pub fn kernel_split_norms<T: Real>(lambda: T, s: T, p_tilde: T, big_q: T, sphere: T) -> Result<(T, T)> {
    if !(lambda > T::zero() && lambda < big_q) {
        return Err(Error::Domain(format!("requires 0 < λ < Q, got λ = {lambda}, Q = {big_q}")));
    }
    if !(s > T::zero()) {
        return Err(Error::Domain(format!("split radius must be positive, got {s}")));
    }
    if !(p_tilde >= T::one()) {
        return Err(Error::Domain(format!("requires p̃ >= 1, got {p_tilde}")));
    }
    let inv_q = p_tilde.recip() - lambda / big_q;
    if !(inv_q > T::zero()) {
        return Err(Error::Domain(format!(
            "|x|^(λ−Q) is not p̃′-integrable at infinity: need λ < Q/p̃, got λ = {lambda}, Q/p̃ = {}",
            big_q / p_tilde
        )));
    }
    let q_tilde = inv_q.recip();
    let k1 = sphere * s.powf(lambda) / lambda;
    let tail = s.powf(lambda - big_q / p_tilde);
    let k2 = if p_tilde == T::one() {
        tail
    } else {
        let pp = conjugate(p_tilde);
        (sphere * q_tilde / (big_q * pp)).powf(pp.recip()) * tail
    };
    Ok((k1, k2))
}

/// Reciprocal weak-type exponents and θ, in any field (exact for rationals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeExponents<N> {
    pub inv_p1: N,
    pub inv_q1: N,
    pub inv_p2: N,
    pub inv_q2: N,
    pub theta: N,
}

/// Exponents from `1/p` and `1/q`:
/// `(1/p₁,1/q₁) = (1, 1−1/p+1/q)`, `(1/p₂,1/q₂) = (1/p−1/q+1/(q+1), 1/(q+1))`,
/// `θ = (1−1/p)/(1−1/p+1/q−1/(q+1))`.
pub fn weak_type_exponents<N: Num + Clone>(inv_p: N, inv_q: N) -> WeakTypeExponents<N> {
    let one = N::one();
    let inv_q_plus_1 = inv_q.clone() / (one.clone() + inv_q.clone());
    let one_minus_inv_p = one.clone() - inv_p.clone();
    WeakTypeExponents {
        inv_p1: one.clone(),
        inv_q1: one_minus_inv_p.clone() + inv_q.clone(),
        inv_p2: inv_p - inv_q.clone() + inv_q_plus_1.clone(),
        inv_q2: inv_q_plus_1.clone(),
        theta: one_minus_inv_p.clone() / (one_minus_inv_p + inv_q - inv_q_plus_1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeConstants<T: Real> {
    pub m1: T,
    pub m2: T,
    pub theta: T,
    pub q1: T,
    pub p2: T,
    pub q2: T,
}

pub fn weak_type_constants<T: Real>(params: &GNParams<T>) -> Result<WeakTypeConstants<T>> {
    params.require_q_above_p()?;
    let one = T::one();
    let e = weak_type_exponents(params.p.recip(), params.q.recip());
    let (q1, p2, q2) = (e.inv_q1.recip(), e.inv_p2.recip(), e.inv_q2.recip());
    let (s, big_q) = (params.sphere, params.big_q);
    let m1 = (s * q1 / (big_q * (q1 - one))).powf(q1.recip());
    let lead = (s * q2 / big_q).powf(one - e.inv_p2 + e.inv_q2);
    let num = (p2 - one).powf((p2 - one) * (q2 - p2) / (p2 * q2));
    let den = p2.powf(one - e.inv_p2 - (p2 + p2 - one) / q2) * (q2 - p2).powf(p2 / q2);
    let m2 = lead * num / den;
    Ok(WeakTypeConstants { m1, m2, theta: e.theta, q1, p2, q2 })
}

/// `4·(q + (pq−q+p)/(q(p−1)))^{1/q}·M₁^{1−θ}·M₂^θ`.
pub fn marcinkiewicz_gn_bound<T: Real>(params: &GNParams<T>) -> Result<T> {
    let w = weak_type_constants(params)?;
    let (p, q) = (params.p, params.q);
    let one = T::one();
    let inner = q + (p * q - q + p) / (q * (p - one));
    Ok(T::lit(4.0) * inner.powf(q.recip()) * w.m1.powf(one - w.theta) * w.m2.powf(w.theta))
}

/// `bound(q)/q^{1−1/p}`, the quantity whose supremum over q is a C₁.
pub fn normalized_bound<T: Real>(params: &GNParams<T>) -> Result<T> {
    let one = T::one();
    Ok(marcinkiewicz_gn_bound(params)? / params.q.powf(one - params.p.recip()))
}

/// q → ∞ limits `(M₁, q^{1/p−1}M₂, bound/q^{1−1/p})`.
pub fn asymptotic_limits<T: Real>(p: T, big_q: T, sphere: T) -> (T, T, T) {
    let e = T::one() - p.recip();
    let m1 = (sphere * p / big_q).powf(e);
    let m2 = (sphere * (p - T::one()) / (big_q * p)).powf(e);
    (m1, m2, T::lit(4.0) * m2)
}

/// Logarithmic grid of `points` values on `[p + offset, q_max]`.
pub fn log_q_grid<T: Real>(p: T, offset: T, q_max: T, points: usize) -> Vec<T> {
    let lo = (p + offset).ln();
    let hi = q_max.ln();
    let last = T::from_usize_lossy(points.max(2) - 1);
    (0..points)
        .map(|i| {
            if i + 1 == points {
                q_max
            } else {
                (lo + (hi - lo) * T::from_usize_lossy(i) / last).exp()
            }
        })
        .collect()
}

pub fn default_q_grid<T: Real>(p: T) -> Vec<T> {
    log_q_grid(p, T::lit(Q_GRID_OFFSET), T::lit(Q_GRID_MAX), Q_GRID_POINTS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub value: f64,
    pub argmax_q: f64,
    /// The supremum sits on the first or last grid point, so the grid does not
    /// certify it.
    pub endpoint_warning: bool,
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_max: f64,
}

/// Supremum of `bound(q)/q^{1−1/p}` over `q_grid`.
pub fn c1_envelope<T: Real>(p: T, big_q: T, sphere: T, q_grid: &[T]) -> Result<Envelope> {
    if q_grid.is_empty() {
        return Err(Error::Domain("empty q-grid".into()));
    }
    let mut best = (T::neg_infinity(), 0usize);
    for (i, &q) in q_grid.iter().enumerate() {
        if !(q > p) || !q.is_finite() {
            return Err(Error::Domain(format!("q-grid point {q} is not in (p, ∞)")));
        }
        let g = normalized_bound(&GNParams::new(p, q, big_q, sphere)?)?;
        if g > best.0 {
            best = (g, i);
        }
    }
    let (lo, hi) = q_grid.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &q| (a.min(q), b.max(q)));
    let argmax = q_grid[best.1];
    Ok(Envelope {
        value: best.0.as_f64(),
        argmax_q: argmax.as_f64(),
        endpoint_warning: argmax == lo || argmax == hi,
        grid_points: q_grid.len(),
        grid_min: lo.as_f64(),
        grid_max: hi.as_f64(),
    })
}

/// C₁ valid for every q in (p, ∞).
///
/// `bound(q)/q^{1−1/p}` blows up as q → p, so the envelope alone cannot
/// certify the whole range. Below a split point `q_min` the constant instead
/// comes from `‖f‖_q ≤ ‖f‖_p^{1−t}‖f‖_{q_min}^t`, which costs
/// `max(1, g(q_min))·(q_min/p)^{1−1/p}`. Above `q_min` the sup of the grid
/// values and of the q → ∞ limit is used. The split is chosen to minimise the
/// larger of the two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedC1 {
    pub value: f64,
    pub q_min: f64,
    pub tail_sup: f64,
    pub interpolation_branch: f64,
    pub limit: f64,
}

pub fn certified_c1<T: Real>(p: T, big_q: T, sphere: T, q_grid: &[T]) -> Result<CertifiedC1> {
    if q_grid.is_empty() {
        return Err(Error::Domain("empty q-grid".into()));
    }
    let mut qs = q_grid.to_vec();
    qs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let g: Vec<T> = qs
        .iter()
        .map(|&q| normalized_bound(&GNParams::new(p, q, big_q, sphere)?))
        .collect::<Result<_>>()?;
    let limit = asymptotic_limits(p, big_q, sphere).2;
    let exponent = T::one() - p.recip();
    // Suffix maxima of g, including the limit.
    let mut tail = vec![limit; g.len()];
    let mut running = limit;
    for i in (0..g.len()).rev() {
        running = running.max(g[i]);
        tail[i] = running;
    }
    let mut best: Option<CertifiedC1> = None;
    for i in 0..qs.len() {
        let interp = g[i].max(T::one()) * (qs[i] / p).powf(exponent);
        let value = tail[i].max(interp);
        if best.map_or(true, |b| value.as_f64() < b.value) {
            best = Some(CertifiedC1 {
                value: value.as_f64(),
                q_min: qs[i].as_f64(),
                tail_sup: tail[i].as_f64(),
                interpolation_branch: interp.as_f64(),
                limit: limit.as_f64(),
            });
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Partial sums of `Σ_{k ≥ ⌈p−1⌉} (k^k/k!) x^k`.
pub fn trudinger_series<T: Real>(x: T, p: T, tol: T) -> Result<T> {
    let threshold = (-T::one()).exp();
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("series argument must be positive, got {x}")));
    }
    if x >= threshold {
        return Err(Error::Divergence { x: x.as_f64(), threshold: threshold.as_f64() });
    }
    let k0 = series_start(p);
    // ln(k0^k0 / k0! · x^k0)
    let kf = T::from_usize_lossy(k0);
    let ln_fact = (1..=k0).fold(T::zero(), |acc, j| acc + T::from_usize_lossy(j).ln());
    let mut term = (kf * kf.ln() - ln_fact + kf * x.ln()).exp();
    let mut sum = T::zero();
    let mut k = k0;
    for _ in 0..TRUDINGER_MAX_TERMS {
        sum = sum + term;
        if term < tol * sum {
            return Ok(sum);
        }
        let kt = T::from_usize_lossy(k);
        term = term * x * (T::one() + kt.recip()).powf(kt);
        k += 1;
    }
    Err(Error::NonConvergence { iterations: TRUDINGER_MAX_TERMS, residual: (term / sum).as_f64() })
}

/// First series index `⌈p−1⌉` (at least 1).
pub fn series_start<T: Real>(p: T) -> usize {
    (p - T::one()).ceil().to_usize().unwrap_or(1).max(1)
}

/// `x = p′·C₁^{p′}·α`.
pub fn trudinger_argument<T: Real>(alpha: T, c1: T, p: T) -> T {
    let pp = conjugate(p);
    pp * c1.powf(pp) * alpha
}

/// Largest α for which the C₂ series converges: `1/(e·p′·C₁^{p′})`.
pub fn trudinger_alpha_threshold<T: Real>(c1: T, p: T) -> T {
    let pp = conjugate(p);
    (T::one().exp() * pp * c1.powf(pp)).recip()
}

/// `C₂(α) = Σ_{k ≥ p−1} (k^k/k!)·(p′C₁^{p′}α)^k`.
pub fn trudinger_constant<T: Real>(alpha: T, c1: T, p: T, tol: T) -> Result<T> {
    if !(alpha > T::zero()) || !(c1 > T::zero()) || !(p > T::one()) {
        return Err(Error::Domain(format!("requires α > 0, C₁ > 0, p > 1; got {alpha}, {c1}, {p}")));
    }
    trudinger_series(trudinger_argument(alpha, c1, p), p, tol)
}

/// `α̃ = 1/(e·p′·A^{p′})`.
pub fn equivalence_alpha<T: Real>(a: T, p: T) -> Result<T> {
    if !(a > T::zero()) || !(p > T::one()) {
        return Err(Error::Domain(format!("requires A > 0 and p > 1, got A = {a}, p = {p}")));
    }
    let pp = conjugate(p);
    Ok((T::one().exp() * pp * a.powf(pp)).recip())
}

/// Inverse of [`equivalence_alpha`]: `A = (1/(e·p′·α̃))^{1/p′}`.
pub fn equivalence_a<T: Real>(alpha: T, p: T) -> Result<T> {
    if !(alpha > T::zero()) || !(p > T::one()) {
        return Err(Error::Domain(format!("requires α̃ > 0 and p > 1, got α̃ = {alpha}, p = {p}")));
    }
    let pp = conjugate(p);
    Ok((T::one().exp() * pp * alpha).recip().powf(pp.recip()))
}

fn check_pq<T: Real>(p: T, q: T) -> Result<()> {
    if !(p > T::one()) {
        return Err(Error::Domain(format!("requires p > 1, got {p}")));
    }
    if !(q > p) {
        return Err(Error::Domain(format!("requires q > p, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// Sharp constant from the ground-state mass `‖φ‖_p^p`:
/// `q^{−q+q/p}·(q/p)·((q−p)/p)^{(p−q)/p}·mass^{(p−q)/p}`.
pub fn best_constant_from_mass<T: Real>(p: T, q: T, mass: T) -> Result<T> {
    check_pq(p, q)?;
    if !(mass > T::zero()) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    let e = (p - q) / p;
    Ok(q.powf(q / p - q) * (q / p) * ((q - p) / p).powf(e) * mass.powf(e))
}

/// `mass = p²d/(q−p)`.
pub fn mass_from_energy<T: Real>(p: T, q: T, d: T) -> T {
    p * p * d / (q - p)
}

/// Sharp constant from the least energy `d`.
pub fn best_constant_from_energy<T: Real>(p: T, q: T, d: T) -> Result<T> {
    check_pq(p, q)?;
    if !(d > T::zero()) {
        return Err(Error::Domain(format!("least energy must be positive, got {d}")));
    }
    best_constant_from_mass(p, q, mass_from_energy(p, q, d))
}

/// Samples of α ↦ C₂(α) together with the convergence threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrudingerTable {
    pub c1: f64,
    pub alpha_threshold: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Every closed-form constant for one (p, q, Q, |℘|).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
    pub sphere: f64,
    pub quasi_norm: String,
    pub lambda: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    pub theta: f64,
    pub marcinkiewicz_bound: f64,
    pub c1_envelope: Envelope,
    pub c1_certified: CertifiedC1,
    pub c2_of_alpha: TrudingerTable,
    /// α̃ from A = certified C₁.
    pub alpha_tilde: f64,
    /// `C_GN` for a given mass, when a ground state is supplied.
    pub sobolev_norm_convention: String,
}

impl ConstantsReport {
    pub fn compute(params: &GNParams<f64>, quasi_norm: &str, q_grid: &[f64]) -> Result<Self> {
        let w = weak_type_constants(params)?;
        let envelope = c1_envelope(params.p, params.big_q, params.sphere, q_grid)?;
        let cert = certified_c1(params.p, params.big_q, params.sphere, q_grid)?;
        let threshold = trudinger_alpha_threshold(cert.value, params.p);
        let samples = [0.05, 0.1, 0.2, 0.3]
            .iter()
            .map(|&frac| {
                let alpha = frac * std::f64::consts::E * threshold;
                trudinger_constant(alpha, cert.value, params.p, TRUDINGER_TOL).map(|c2| (alpha, c2))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p: params.p,
            q: params.q,
            big_q: params.big_q,
            sphere: params.sphere,
            quasi_norm: quasi_norm.to_string(),
            lambda: params.lambda(),
            m1: w.m1,
            m2: w.m2,
            theta: w.theta,
            marcinkiewicz_bound: marcinkiewicz_gn_bound(params)?,
            c1_envelope: envelope,
            c1_certified: cert,
            c2_of_alpha: TrudingerTable { c1: cert.value, alpha_threshold: threshold, samples },
            alpha_tilde: equivalence_alpha(cert.value, params.p)?,
            sobolev_norm_convention: "sum".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn params(p: f64, q: f64, big_q: f64, sphere: f64) -> GNParams<f64> {
        GNParams::new(p, q, big_q, sphere).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(GNParams::new(1.0, 2.0, 2.0, 1.0).is_err());
        assert!(GNParams::new(2.0, 1.5, 2.0, 1.0).is_err());
        assert!(GNParams::new(2.0, 3.0, 0.0, 1.0).is_err());
        let g = params(2.0, 4.0, 2.0, 2.0 * PI);
        assert_eq!(g.lambda(), 0.5);
        assert_eq!(g.p_prime(), 2.0);
    }

    #[test]
    fn kernel_split_examples() {
        let (k1, _) = kernel_split_norms(1.0, 1.0, 1.5, 2.0, 2.0 * PI).unwrap();
        assert!((k1 - 2.0 * PI).abs() < 1e-14);
        let (k1b, _) = kernel_split_norms(1.0, 2.0, 1.5, 2.0, 2.0 * PI).unwrap();
        assert!((k1b / k1 - 2.0).abs() < 1e-14);
        assert!(matches!(kernel_split_norms(2.0, 1.0, 1.5, 2.0, 1.0), Err(Error::Domain(_))));
        // λ ≥ Q/p̃ leaves K² outside L^{p̃′}.
        assert!(matches!(kernel_split_norms(1.5, 1.0, 2.0, 2.0, 1.0), Err(Error::Domain(_))));
        let (_, k2) = kernel_split_norms(0.5, 3.0, 1.0, 2.0, 1.0).unwrap();
        assert!((k2 - 3.0f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn weak_type_example_values() {
        let w = weak_type_constants(&params(2.0, 4.0, 2.0, 2.0 * PI)).unwrap();
        assert!((w.q1 - 4.0 / 3.0).abs() < 1e-15);
        assert!((w.m1 - (4.0 * PI).powf(0.75)).abs() < 1e-12);
        assert!((w.theta - 10.0 / 11.0).abs() < 1e-15);
        assert!(weak_type_constants(&params(2.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn theta_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let p: f64 = rng.gen_range(1.01..10.0);
            let q: f64 = p + rng.gen_range(1e-3..1e3);
            let e = weak_type_exponents(1.0 / p, 1.0 / q);
            assert!(e.theta > 0.0 && e.theta < 1.0);
            // θ interpolates both exponent pairs.
            assert!(((1.0 - e.theta) * e.inv_p1 + e.theta * e.inv_p2 - 1.0 / p).abs() < 1e-12);
            assert!(((1.0 - e.theta) * e.inv_q1 + e.theta * e.inv_q2 - 1.0 / q).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_finite_on_default_grid() {
        for (p, big_q, s) in [(2.0, 2.0, 2.0 * PI), (3.0, 3.0, 4.0 * PI), (1.5, 2.0, 2.0 * PI)] {
            for q in log_q_grid(p, 0.1, 1e4, 200) {
                let b = marcinkiewicz_gn_bound(&params(p, q, big_q, s)).unwrap();
                assert!(b.is_finite() && b > 0.0);
            }
        }
    }

    #[test]
    fn envelope_behaviour() {
        let (p, big_q, s) = (2.0, 2.0, 2.0 * PI);
        let coarse = log_q_grid(p, 0.1, 1e4, 50);
        let mut fine = coarse.clone();
        fine.extend(log_q_grid(p, 0.05, 1e4, 173));
        let a = c1_envelope(p, big_q, s, &coarse).unwrap();
        let b = c1_envelope(p, big_q, s, &fine).unwrap();
        assert!(b.value >= a.value);
        let tiny = c1_envelope(p, big_q, s, &[p + 0.1, p + 0.2]).unwrap();
        assert!(tiny.endpoint_warning);
        for &q in &coarse {
            assert!(normalized_bound(&params(p, q, big_q, s)).unwrap() <= a.value);
        }
        assert!(c1_envelope(p, big_q, s, &[1.5]).is_err());
    }

    #[test]
    fn certified_c1_dominates_tail() {
        let (p, big_q, s) = (2.0, 2.0, 2.0 * PI);
        let grid = default_q_grid(p);
        let c = certified_c1(p, big_q, s, &grid).unwrap();
        assert!(c.value >= c.tail_sup && c.value >= c.interpolation_branch);
        for &q in grid.iter().filter(|&&q| q >= c.q_min) {
            assert!(normalized_bound(&params(p, q, big_q, s)).unwrap() <= c.value);
        }
        assert!(c.value < c1_envelope(p, big_q, s, &grid).unwrap().value);
    }

    #[test]
    fn trudinger_examples() {
        let x = 1e-15;
        let v = trudinger_series(x, 2.0, TRUDINGER_TOL).unwrap();
        assert!((v - x).abs() <= 1e-14 * x);
        assert!(matches!(trudinger_series(0.5, 2.0, 1e-12), Err(Error::Divergence { .. })));
        assert!(matches!(trudinger_series(0.37, 2.0, 1e-12), Err(Error::Divergence { .. })));
        assert_eq!(series_start(2.0), 1);
        assert_eq!(series_start(1.5), 1);
        assert_eq!(series_start(3.0), 2);
        assert_eq!(series_start(3.2), 3);
        // p = 3 drops the k = 1 term.
        let a = trudinger_series(0.1f64, 2.0, 1e-14).unwrap();
        let b = trudinger_series(0.1, 3.0, 1e-14).unwrap();
        assert!((a - b - 0.1).abs() < 1e-15);
    }

    #[test]
    fn trudinger_increasing_and_convex_in_alpha() {
        let (c1, p) = (3.0, 2.0);
        let amax = trudinger_alpha_threshold(c1, p);
        let vals: Vec<f64> = (1..=50)
            .map(|i| trudinger_constant(amax * 0.95 * i as f64 / 50.0, c1, p, 1e-13).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] > 0.0));
        assert!(trudinger_constant(amax * 1.01, c1, p, 1e-12).is_err());
    }

    #[test]
    fn equivalence_identity() {
        assert!((equivalence_alpha(1.0, 2.0).unwrap() - 1.0 / (2.0 * E)).abs() < 1e-16);
        for a in [0.3f64, 1.0, 2.5, 17.0] {
            for p in [1.5, 2.0, 3.0] {
                let alpha = equivalence_alpha(a, p).unwrap();
                let back = equivalence_a(alpha, p).unwrap();
                assert!((back - a).abs() <= 4.0 * f64::EPSILON * a);
            }
        }
        assert!(equivalence_alpha(2.0, 2.0).unwrap() < equivalence_alpha(1.0, 2.0).unwrap());
    }

    #[test]
    fn best_constant_routes() {
        let c = best_constant_from_mass(2.0f64, 4.0, 11.7009).unwrap();
        assert!((c - 1.0 / (8.0 * 11.7009)).abs() < 1e-15);
        assert!((16.0 * c - 2.0 / 11.7009).abs() < 1e-15);
        for (p, q, mass) in [(2.0f64, 4.0, 11.7), (1.5, 3.0, 2.2), (3.0, 7.5, 40.0)] {
            let d = mass * (q - p) / (p * p);
            let a = best_constant_from_mass(p, q, mass).unwrap();
            let b = best_constant_from_energy(p, q, d).unwrap();
            assert!((a - b).abs() <= 1e-14 * a);
        }
        assert!(best_constant_from_mass(2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn report_is_finite_and_serializes() {
        let r = ConstantsReport::compute(&params(2.0, 4.0, 2.0, 2.0 * PI), "euclidean", &default_q_grid(2.0)).unwrap();
        assert!(r.theta > 0.0 && r.theta < 1.0);
        for v in [r.m1, r.m2, r.marcinkiewicz_bound, r.c1_envelope.value, r.c1_certified.value, r.alpha_tilde] {
            assert!(v.is_finite() && v > 0.0);
        }
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"M1\"") && text.contains("\"c1_certified\""));
    }
}
