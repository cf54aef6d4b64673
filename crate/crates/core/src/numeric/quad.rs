//! Quadrature.
//!
//! The workhorse is tanh-sinh (double-exponential) quadrature with level
//! doubling. Its nodes cluster exponentially at both interval endpoints,
//! which covers the two hard shapes in this crate: integrable algebraic
//! endpoint singularities such as (1-x)^(beta-1), and mass concentrated at
//! the unit root such as x^t with t of order 10^4. Integrands are given the
//! distances to both endpoints, computed without cancellation, so factors
//! like (1-x) stay accurate down to the underflow threshold.
//!
//! Fixed-order Gauss-Legendre rules are provided for smooth inner integrals
//! that are assembled from many panels.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Abscissa cap in the transformed variable. At |t| = 6.11 the endpoint
/// distance factor exp(-pi*sinh(t)) is ~6e-308, still a normal float; beyond
/// it the node positions are indistinguishable from the endpoints in f64.
const T_CAP: f64 = 6.11;

/// Finest refinement level (step 2^-MAX_LEVEL in the transformed variable).
const MAX_LEVEL: usize = 12;

/// One precomputed node for the unit interval [0, 1].
#[derive(Clone, Copy)]
struct Node {
    /// Distance to 0, i.e. x itself, in (0, 1).
    da: f64,
    /// Distance to 1, computed as exp(-2u)/(1+exp(-2u)) to avoid cancellation.
    db: f64,
    /// Jacobian weight (step size not included).
    w: f64,
}

fn node_at(t: f64) -> Node {
    let u = std::f64::consts::FRAC_PI_2 * t.sinh();
    let e = (-2.0 * u.abs()).exp();
    let near = e / (1.0 + e);
    let far = 1.0 / (1.0 + e);
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    let w = std::f64::consts::FRAC_PI_4 * t.cosh() * sech2;
    if u >= 0.0 {
        Node {
            da: far,
            db: near,
            w,
        }
    } else {
        Node {
            da: near,
            db: far,
            w,
        }
    }
}

/// Node tables per refinement level, shared by all integrations.
/// Level 0 holds t = k for |k| <= T_CAP; level L > 0 holds the odd multiples
/// of 2^-L in (-T_CAP, T_CAP).
fn node_tables() -> &'static Vec<Vec<Node>> {
    static TABLES: OnceLock<Vec<Vec<Node>>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut tables = Vec::with_capacity(MAX_LEVEL + 1);
        let level0: Vec<Node> = {
            let kmax = T_CAP.floor() as i64;
            (-kmax..=kmax).map(|k| node_at(k as f64)).collect()
        };
        tables.push(level0);
        for level in 1..=MAX_LEVEL {
            let h = 0.5f64.powi(level as i32);
            let kmax = (T_CAP / h).floor() as i64;
            let nodes = (-kmax..=kmax)
                .filter(|k| k % 2 != 0)
                .map(|k| node_at(k as f64 * h))
                .collect();
            tables.push(nodes);
        }
        tables
    })
}

/// Integrates `f` over `(a, b)` by tanh-sinh refinement.
///
/// `f(x, da, db)` receives the abscissa together with its distances
/// `da = x - a` and `db = b - x`, each computed free of cancellation, so an
/// integrand with an endpoint singularity should be written in terms of the
/// distances rather than re-deriving them from `x`.
///
/// Refinement stops once two successive levels agree within
/// `rel_tol * |I| + abs_tol`; running out of levels first is a numerical
/// failure, as is any non-finite integrand value.
pub fn tanh_sinh_sing<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid(format!(
            "quadrature interval must be finite with a < b, got ({a}, {b})"
        )));
    }
    let scale = b - a;
    let eval = |node: &Node| -> Result<f64> {
        let da = scale * node.da;
        let db = scale * node.db;
        // Take x from the nearer endpoint to keep it consistent with the
        // distance that is about to dominate the integrand.
        let x = if node.db < 0.5 { b - db } else { a + da };
        let v = f(x, da, db) * scale * node.w;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numerical(format!(
                "integrand not finite at x = {x} (interval ({a}, {b}))"
            )))
        }
    };

    let tables = node_tables();
    let mut sum0 = 0.0;
    for node in &tables[0] {
        sum0 += eval(node)?;
    }
    let mut value = sum0; // h = 1 at level 0
    for (level, nodes) in tables.iter().enumerate().skip(1) {
        let h = 0.5f64.powi(level as i32);
        let mut new_sum = 0.0;
        for node in nodes {
            new_sum += eval(node)?;
        }
        let refined = 0.5 * value + h * new_sum;
        let delta = (refined - value).abs();
        value = refined;
        if level >= 3 && delta <= rel_tol * value.abs() + abs_tol {
            return Ok(value);
        }
    }
    Err(Error::numerical(format!(
        "tanh-sinh did not reach tolerance {rel_tol:.1e} rel / {abs_tol:.1e} abs on ({a}, {b})"
    )))
}

/// Integrates a plain integrand over `(a, b)`; see [`tanh_sinh_sing`].
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tanh_sinh_sing(|x, _, _| f(x), a, b, rel_tol, abs_tol)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Roots of the Legendre polynomial by Newton iteration from the Chebyshev
/// initial guess; exact for polynomials of degree 2n - 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Bonnet recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates `f` over `(a, b)` with a fixed `n`-point Gauss-Legendre rule.
pub fn gl_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let s = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(c + s * x);
    }
    s * acc
}

/// Integrates `f` over consecutive panels `[breaks[0], breaks[1]], ...` with
/// a fixed-order rule per panel. Panels let the caller isolate kinks.
pub fn gl_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mut acc = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let c = 0.5 * (a + b);
        let s = 0.5 * (b - a);
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            panel += w * f(c + s * x);
        }
        acc += s * panel;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    #[test]
    fn polynomial_is_exact() {
        let v = tanh_sinh(|x| x * x, 0.0, 1.0, 1e-13, 0.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sine_over_full_period() {
        let v = tanh_sinh(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_singularity_at_right_endpoint() {
        let v = tanh_sinh_sing(|_, _, db| db.powf(-0.5), 0.0, 1.0, 1e-12, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn beta_integral_with_large_power() {
        // B(10001, 1/2) = int_0^1 x^10000 (1-x)^(-1/2) dx; the mass sits in a
        // width-1e-4 layer at the right endpoint on top of a singularity.
        let v = tanh_sinh_sing(
            |_, da, db| (10_000.0 * da.ln()).exp() * db.powf(-0.5),
            0.0,
            1.0,
            1e-12,
            0.0,
        )
        .unwrap();
        let exact = (ln_gamma(10_001.0) + ln_gamma(0.5) - ln_gamma(10_001.5)).exp();
        assert!(
            ((v - exact) / exact).abs() < 1e-10,
            "rel err {}",
            ((v - exact) / exact).abs()
        );
    }

    #[test]
    fn semi_infinite_split_recovers_arctan_kernel_moment() {
        // int_0^inf w^b / (1 + w^2) dw = (pi/2) / cos(pi b / 2) at b = 1/2.
        let b = 0.5;
        let near =
            tanh_sinh_sing(|x, da, _| da.powf(b) / (1.0 + x * x), 0.0, 1.0, 1e-12, 0.0).unwrap();
        let far = tanh_sinh_sing(
            |_, du, _| du.powf(-b) / (du * du + 1.0),
            0.0,
            1.0,
            1e-12,
            0.0,
        )
        .unwrap();
        let v = near + far;
        let exact = std::f64::consts::FRAC_PI_2 / (std::f64::consts::PI * b / 2.0).cos();
        assert!((v - exact).abs() < 1e-11, "got {v}, want {exact}");
    }

    #[test]
    fn non_integrable_singularity_fails() {
        let r = tanh_sinh_sing(|_, da, _| 1.0 / da, 0.0, 1.0, 1e-12, 1e-12);
        assert!(r.is_err());
    }

    #[test]
    fn gauss_legendre_degree_exactness() {
        // 16-point rule integrates degree-31 monomials exactly.
        let (nodes, weights) = gauss_legendre(16);
        for deg in [0usize, 5, 17, 31] {
            let num: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!(
                (num - exact).abs() < 1e-13,
                "degree {deg}: {num} vs {exact}"
            );
        }
    }

    #[test]
    fn gl_panels_add_up() {
        let whole = gl_fixed(|x| x.exp(), 0.0, 2.0, 32);
        let split = gl_panels(|x| x.exp(), &[0.0, 0.7, 1.1, 2.0], 32);
        assert!((whole - split).abs() < 1e-12);
        assert!((whole - (2.0f64.exp() - 1.0)).abs() < 1e-12);
    }
}
