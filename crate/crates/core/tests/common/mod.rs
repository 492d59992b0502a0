#![allow(dead_code)]

use critineq::quadrature::TanhSinh;

/// Radial Townes profile `u'' + u'/r − u + u³ = 0`, `u'(0) = 0`, by RK4
/// shooting with bisection on `u(0)`. Returns `(u(0), 2π∫u² r dr)`.
pub fn townes_shooting() -> (f64, f64) {
    const H: f64 = 1e-3;
    const R_MAX: f64 = 25.0;
    let rhs = |r: f64, u: f64, v: f64| (v, -v / r + u - u * u * u);
    // +1: crossed zero (too high), −1: turned back up (too low). Also
    // returns the mass accumulated before the solution left the profile.
    let shoot = |u0: f64| -> (i32, f64) {
        let r0 = 1e-4;
        let c = (u0 - u0.powi(3)) / 4.0;
        let (mut r, mut u, mut v) = (r0, u0 + c * r0 * r0, 2.0 * c * r0);
        let mut mass = 0.0;
        while r < R_MAX {
            let (k1u, k1v) = rhs(r, u, v);
            let (k2u, k2v) = rhs(r + H / 2.0, u + H / 2.0 * k1u, v + H / 2.0 * k1v);
            let (k3u, k3v) = rhs(r + H / 2.0, u + H / 2.0 * k2u, v + H / 2.0 * k2v);
            let (k4u, k4v) = rhs(r + H, u + H * k3u, v + H * k3v);
            let (un, vn) = (u + H / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u), v + H / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v));
            // Trapezoid on 2π u² r.
            mass += std::f64::consts::PI * H * (u * u * r + un * un * (r + H));
            r += H;
            u = un;
            v = vn;
            if u < 0.0 {
                return (1, mass);
            }
            if v > 0.0 {
                return (-1, mass);
            }
        }
        (0, mass)
    };
    let (mut lo, mut hi) = (1.5, 3.0);
    let mut mass = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (side, m) = shoot(mid);
        mass = m;
        if side > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi), mass)
}

/// `|℘|∫_0^b r^{β+Q−1} dr` through `r = b·u^m`, bounded at `u = 0`.
pub fn radial_inner(sphere: f64, big_q: f64, b: f64, beta: f64) -> f64 {
    let m = (2.0 / (beta + big_q)).ceil().max(1.0);
    sphere
        * TanhSinh::new(7).integrate(0.0, 1.0, |u| {
            let r = b * u.powf(m);
            r.powf(beta + big_q - 1.0) * b * m * u.powf(m - 1.0)
        })
}

/// `|℘|∫_a^∞ r^{β+Q−1} dr` through `r = a·u^{−m}`.
pub fn radial_outer(sphere: f64, big_q: f64, a: f64, beta: f64) -> f64 {
    let m = (2.0 / -(beta + big_q)).ceil().max(1.0);
    sphere
        * TanhSinh::new(7).integrate(0.0, 1.0, |u| {
            let r = a * u.powf(-m);
            r.powf(beta + big_q - 1.0) * a * m * u.powf(-m - 1.0)
        })
}
