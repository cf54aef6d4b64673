//! Dense BFGS minimizer with Armijo backtracking.
//!
//! The likelihood surfaces in this crate are smooth, low-dimensional (two
//! parameters), and come with analytic gradients, which is exactly the
//! setting where plain BFGS with a backtracking line search is reliable.

/// Outcome of a minimization run.
#[derive(Clone, Debug)]
pub struct OptimResult {
    /// Final iterate.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub f: f64,
    /// Euclidean norm of the gradient at `x`.
    pub grad_norm: f64,
    /// Iterations consumed.
    pub iterations: usize,
    /// Whether the gradient tolerance was met.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` starting from `x0`, stopping when the gradient norm drops
/// below `g_tol` or after `max_iter` iterations.
///
/// `f` returns the objective and its gradient in one call. Non-finite
/// objective values along the line search are treated as out-of-bounds and
/// the step is shrunk.
pub fn bfgs<F>(f: F, x0: &[f64], max_iter: usize, g_tol: f64) -> OptimResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = f(&x);
    // Inverse Hessian estimate, started at the identity.
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut iterations = 0;
    while iterations < max_iter {
        let gnorm = norm(&gx);
        if gnorm <= g_tol {
            return OptimResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        // Search direction d = -H g.
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = -dot(&h[i], &gx);
        }
        if dot(&d, &gx) >= 0.0 {
            // Curvature information went bad; restart from steepest descent.
            for i in 0..n {
                h[i].iter_mut()
                    .enumerate()
                    .for_each(|(j, v)| *v = f64::from(u8::from(i == j)));
                d[i] = -gx[i];
            }
        }

        // Backtracking Armijo line search.
        let slope = dot(&d, &gx);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            // No acceptable step along d: the iterate is as good as the
            // line search can certify.
            return OptimResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: gnorm <= g_tol,
            };
        };

        // BFGS inverse update with the curvature guard.
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            let rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += rho * rho * yhy * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * s[i] * s[j];
                }
            }
        }
        x = xt;
        fx = ft;
        gx = gt;
    }
    let gnorm = norm(&gx);
    OptimResult {
        x,
        f: fx,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= g_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| {
            let v = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
        };
        let r = bfgs(f, &[0.0, 0.0], 100, 1e-10);
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-7);
        assert!((r.x[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let r = bfgs(f, &[-1.2, 1.0], 500, 1e-8);
        assert!(r.converged, "grad norm {}", r.grad_norm);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
        assert!((r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_nonfinite_barrier() {
        // Objective is +inf left of x = 0; the search must stay inside.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                (f64::INFINITY, vec![0.0])
            } else {
                let v = x[0] - x[0].ln();
                (v, vec![1.0 - 1.0 / x[0]])
            }
        };
        let r = bfgs(f, &[3.0], 100, 1e-10);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }
}
