//! Model homogeneous groups: dilation weights, homogeneous dimension, the
//! stratification parameter γ, quasi-norms and the sphere measure |℘|.
//!
//! Two models are provided: Euclidean ℝⁿ (all weights 1, abelian and
//! stratified) and the first Heisenberg group H¹ with weights (1, 1, 2).
//! A general `graded` descriptor with arbitrary non-decreasing weights on an
//! abelian ℝⁿ is available for dilation and quasi-norm bookkeeping.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::TanhSinh;
use crate::scalar::pairwise_sum;

/// Default Korányi constant `c` in `((x²+y²)² + c t²)^{1/4}`.
pub const KORANYI_CONSTANT: f64 = 16.0;

/// Default tanh-sinh level for [`GroupDescriptor::sphere_measure`].
pub const DEFAULT_SPHERE_LEVEL: u32 = 5;

/// Relative agreement required between consecutive quadrature levels.
const SPHERE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupName {
    Euclidean(usize),
    Heisenberg1,
    /// Abelian ℝⁿ with user supplied (possibly non-unit) dilation weights.
    Graded(usize),
}

impl GroupName {
    pub fn topological_dimension(&self) -> usize {
        match *self {
            GroupName::Euclidean(n) | GroupName::Graded(n) => n,
            GroupName::Heisenberg1 => 3,
        }
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupName::Euclidean(n) => write!(f, "euclidean{n}"),
            GroupName::Heisenberg1 => write!(f, "heisenberg1"),
            GroupName::Graded(n) => write!(f, "graded{n}"),
        }
    }
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "heisenberg1" || s == "h1" {
            return Ok(GroupName::Heisenberg1);
        }
        let parse_dim = |rest: &str| -> Result<usize> {
            let rest = rest.trim_start_matches('(').trim_end_matches(')');
            let n: usize = rest
                .parse()
                .map_err(|_| Error::InvalidDescriptor(format!("cannot parse dimension in {s:?}")))?;
            if n == 0 {
                return Err(Error::InvalidDescriptor("dimension must be positive".into()));
            }
            Ok(n)
        };
        if let Some(rest) = s.strip_prefix("euclidean") {
            return Ok(GroupName::Euclidean(parse_dim(rest)?));
        }
        if let Some(rest) = s.strip_prefix("graded") {
            return Ok(GroupName::Graded(parse_dim(rest)?));
        }
        Err(Error::InvalidDescriptor(format!("unknown group {s:?}")))
    }
}

impl Serialize for GroupName {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GroupName {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasiNorm {
    /// `sqrt(Σ xᵢ²)`; only homogeneous when every weight is 1.
    Euclidean,
    /// `(Σ |xᵢ|^{2M/νᵢ})^{1/(2M)}` with `M = max νᵢ`.
    Anisotropic,
    /// `((x²+y²)² + c t²)^{1/4}` on H¹.
    Koranyi,
}

/// Immutable description of a model homogeneous group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub name: GroupName,
    pub weights: Vec<f64>,
    #[serde(rename = "Q")]
    pub homogeneous_dimension: f64,
    pub gamma: f64,
    pub quasi_norm: QuasiNorm,
    pub koranyi_constant: f64,
}

/// Sum of the dilation weights.
pub fn homogeneous_dimension(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::InvalidDescriptor("empty weight list".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidDescriptor(format!("non-positive weight {w}")));
    }
    Ok(weights.iter().sum())
}

/// γ = 1 for stratified groups, the largest weight otherwise.
fn gamma_for(name: GroupName, weights: &[f64]) -> f64 {
    match name {
        GroupName::Heisenberg1 | GroupName::Euclidean(_) => 1.0,
        GroupName::Graded(_) => {
            if weights.iter().all(|&w| w == 1.0) {
                1.0
            } else {
                *weights.last().expect("validated non-empty")
            }
        }
    }
}

/// Result of the polar-decomposition sphere measure computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereMeasure {
    pub value: f64,
    pub error_estimate: f64,
    pub level: u32,
    pub quasi_norm: QuasiNorm,
}

impl GroupDescriptor {
    pub fn euclidean(n: usize) -> Self {
        assert!(n > 0, "euclidean dimension must be positive");
        Self {
            name: GroupName::Euclidean(n),
            weights: vec![1.0; n],
            homogeneous_dimension: n as f64,
            gamma: 1.0,
            quasi_norm: QuasiNorm::Euclidean,
            koranyi_constant: KORANYI_CONSTANT,
        }
    }

    pub fn heisenberg1() -> Self {
        Self {
            name: GroupName::Heisenberg1,
            weights: vec![1.0, 1.0, 2.0],
            homogeneous_dimension: 4.0,
            gamma: 1.0,
            quasi_norm: QuasiNorm::Koranyi,
            koranyi_constant: KORANYI_CONSTANT,
        }
    }

    /// Abelian ℝⁿ with arbitrary non-decreasing weights and the anisotropic quasi-norm.
    pub fn graded(weights: Vec<f64>) -> Result<Self> {
        let q = homogeneous_dimension(&weights)?;
        let name = GroupName::Graded(weights.len());
        let desc = Self {
            gamma: gamma_for(name, &weights),
            name,
            weights,
            homogeneous_dimension: q,
            quasi_norm: QuasiNorm::Anisotropic,
            koranyi_constant: KORANYI_CONSTANT,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn from_name(name: GroupName) -> Self {
        match name {
            GroupName::Euclidean(n) => Self::euclidean(n),
            GroupName::Heisenberg1 => Self::heisenberg1(),
            GroupName::Graded(n) => Self::euclidean(n).with_name(GroupName::Graded(n)),
        }
    }

    fn with_name(mut self, name: GroupName) -> Self {
        self.name = name;
        self
    }

    pub fn with_quasi_norm(mut self, norm: QuasiNorm) -> Result<Self> {
        self.quasi_norm = norm;
        self.validate()?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// Checks every descriptor invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let q = homogeneous_dimension(&self.weights)?;
        if self.weights.len() != self.name.topological_dimension() {
            return Err(Error::InvalidDescriptor(format!(
                "{} needs {} weights, got {}",
                self.name,
                self.name.topological_dimension(),
                self.weights.len()
            )));
        }
        if self.weights.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidDescriptor("weights must be non-decreasing".into()));
        }
        match self.name {
            GroupName::Euclidean(_) if self.weights.iter().any(|&w| w != 1.0) => {
                return Err(Error::InvalidDescriptor("euclidean weights must all be 1".into()));
            }
            GroupName::Heisenberg1 if self.weights != [1.0, 1.0, 2.0] => {
                return Err(Error::InvalidDescriptor("heisenberg1 weights must be (1, 1, 2)".into()));
            }
            _ => {}
        }
        if (self.homogeneous_dimension - q).abs() > 1e-12 * q {
            return Err(Error::InvalidDescriptor(format!(
                "Q = {} differs from the weight sum {q}",
                self.homogeneous_dimension
            )));
        }
        let gamma = gamma_for(self.name, &self.weights);
        if self.gamma != gamma {
            return Err(Error::InvalidDescriptor(format!("gamma = {} but expected {gamma}", self.gamma)));
        }
        match self.quasi_norm {
            QuasiNorm::Koranyi if self.name != GroupName::Heisenberg1 => {
                return Err(Error::InvalidDescriptor("the Korányi norm is defined on heisenberg1 only".into()));
            }
            QuasiNorm::Euclidean if self.weights.iter().any(|&w| w != 1.0) => {
                return Err(Error::InvalidDescriptor(
                    "the Euclidean norm is not homogeneous for non-unit weights".into(),
                ));
            }
            _ => {}
        }
        if !(self.koranyi_constant > 0.0) {
            return Err(Error::InvalidDescriptor("koranyi_constant must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let desc: Self = serde_json::from_str(text)?;
        desc.validate()?;
        Ok(desc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `D_r(x)`: component `i` scaled by `r^{νᵢ}`.
    pub fn dilate(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {r}")));
        }
        self.check_point(x)?;
        Ok(x.iter().zip(&self.weights).map(|(&xi, &w)| r.powf(w) * xi).collect())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, group has dimension {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// Homogeneous quasi-norm `|x|`, with `|D_r x| = r |x|`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension());
        match self.quasi_norm {
            QuasiNorm::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            QuasiNorm::Anisotropic => {
                let m = self.max_weight();
                let acc: f64 = x
                    .iter()
                    .zip(&self.weights)
                    .map(|(&xi, &w)| xi.abs().powf(2.0 * m / w))
                    .sum();
                acc.powf(1.0 / (2.0 * m))
            }
            QuasiNorm::Koranyi => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                (r2 * r2 + self.koranyi_constant * x[2] * x[2]).powf(0.25)
            }
        }
    }

    fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Group inverse. In exponential coordinates this is negation for every model here.
    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }

    /// Group law. H¹ uses `(x,y,t)(x',y',t') = (x+x', y+y', t+t' + (xy' - yx')/2)`,
    /// matching the left-invariant fields `X = ∂x - (y/2)∂t`, `Y = ∂y + (x/2)∂t`.
    pub fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + v).collect();
        if self.name == GroupName::Heisenberg1 {
            out[2] += 0.5 * (a[0] * b[1] - a[1] * b[0]);
        }
        out
    }

    /// Half-width of the unit quasi-ball along axis `prefix.len()` given the
    /// preceding coordinates; zero when the prefix is outside the projection.
    fn axis_halfwidth(&self, prefix: &[f64]) -> f64 {
        let axis = prefix.len();
        match self.quasi_norm {
            QuasiNorm::Euclidean => {
                let used: f64 = prefix.iter().map(|v| v * v).sum();
                (1.0 - used).max(0.0).sqrt()
            }
            QuasiNorm::Anisotropic => {
                let m = self.max_weight();
                let used: f64 = prefix
                    .iter()
                    .zip(&self.weights)
                    .map(|(&xi, &w)| xi.abs().powf(2.0 * m / w))
                    .sum();
                (1.0 - used).max(0.0).powf(self.weights[axis] / (2.0 * m))
            }
            QuasiNorm::Koranyi => match axis {
                0 => 1.0,
                1 => (1.0 - prefix[0] * prefix[0]).max(0.0).sqrt(),
                _ => {
                    let r2 = prefix[0] * prefix[0] + prefix[1] * prefix[1];
                    ((1.0 - r2 * r2).max(0.0) / self.koranyi_constant).sqrt()
                }
            },
        }
    }

    /// Volume of the unit quasi-ball by nested tanh-sinh quadrature.
    pub fn unit_ball_volume(&self, level: u32) -> f64 {
        let rule = TanhSinh::new(level);
        let n = self.dimension();
        if n == 1 {
            return 2.0 * self.axis_halfwidth(&[]);
        }
        let h0 = self.axis_halfwidth(&[]);
        let outer: Vec<(f64, f64)> = rule.mapped(-h0, h0).collect();
        let parts: Vec<f64> = outer
            .par_iter()
            .map(|&(x, w)| {
                let mut prefix = Vec::with_capacity(n);
                prefix.push(x);
                w * self.nested_volume(&rule, &mut prefix)
            })
            .collect();
        pairwise_sum(&parts)
    }

    fn nested_volume(&self, rule: &TanhSinh, prefix: &mut Vec<f64>) -> f64 {
        let h = self.axis_halfwidth(prefix);
        if prefix.len() + 1 == self.dimension() {
            return 2.0 * h;
        }
        if h == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (x, w) in rule.mapped(-h, h) {
            prefix.push(x);
            acc += w * self.nested_volume(rule, prefix);
            prefix.pop();
        }
        acc
    }

    /// |℘| = Q · vol{|x| ≤ 1}. The error estimate is the change from the
    /// previous quadrature level.
    pub fn sphere_measure(&self, level: u32) -> Result<SphereMeasure> {
        if level < 2 {
            return Err(Error::Accuracy { estimate: f64::INFINITY, target: SPHERE_TOLERANCE });
        }
        let q = self.homogeneous_dimension;
        let fine = q * self.unit_ball_volume(level);
        let coarse = q * self.unit_ball_volume(level - 1);
        let error_estimate = (fine - coarse).abs();
        if error_estimate > SPHERE_TOLERANCE * fine {
            return Err(Error::Accuracy { estimate: error_estimate / fine, target: SPHERE_TOLERANCE });
        }
        Ok(SphereMeasure { value: fine, error_estimate, level, quasi_norm: self.quasi_norm })
    }

    pub fn default_sphere_measure(&self) -> Result<SphereMeasure> {
        self.sphere_measure(DEFAULT_SPHERE_LEVEL)
    }
}
