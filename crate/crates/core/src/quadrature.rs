//! Double-exponential (tanh-sinh) quadrature.
//!
//! Endpoint singularities of the form `(b - x)^β` are integrated with
//! exponential convergence in the level, which is what the quasi-ball volume
//! integrals need.

use std::f64::consts::FRAC_PI_2;

/// Abscissa cut-off in the transformed variable. Beyond it `1 - |x|` underflows.
const T_MAX: f64 = 3.2;

/// Nodes and weights on `(-1, 1)` for step `2^-level`.
#[derive(Clone, Debug)]
pub struct TanhSinh {
    nodes: Vec<(f64, f64)>,
}

impl TanhSinh {
    pub fn new(level: u32) -> Self {
        let step = 0.5f64.powi(level as i32);
        let count = (T_MAX / step).ceil() as i64;
        let mut nodes = Vec::with_capacity((2 * count + 1) as usize);
        for k in -count..=count {
            let t = k as f64 * step;
            let u = FRAC_PI_2 * t.sinh();
            let x = u.tanh();
            let cu = u.cosh();
            let w = step * FRAC_PI_2 * t.cosh() / (cu * cu);
            if w > 0.0 && x.abs() < 1.0 {
                nodes.push((x, w));
            }
        }
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes mapped to `(a, b)` with weights scaled by the Jacobian.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x);
        }
        acc
    }
}
