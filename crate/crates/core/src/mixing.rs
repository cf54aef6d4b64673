//! Mixing distributions of the random AR(1) coefficient.
//!
//! A mixing law lives on [0, 1) and is described by a [`MixingSpec`]. The
//! density's shape at the unit root, phi(x) ~ c_phi (1-x)^beta as x -> 1,
//! is what controls the memory of the aggregated process, so every variant
//! exposes its tail pair (c_phi, beta) alongside exact moments, density and
//! CDF evaluation, and a sampler.
//!
//! Moments use closed forms where the variant admits one (Beta-type and the
//! canonical regularly-varying family reduce to Beta integrals, the
//! long-memory mixture to a pair of them); the quadrature definition is kept
//! as a cross-check in the test suite.

use crate::error::{require, Error, Result};
use crate::numeric::quad::{gauss_legendre, tanh_sinh_sing};
use crate::numeric::special::{beta as beta_fn, ln_beta};
use crate::rng::Stream;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

/// Number of cells in cached inverse-CDF sampling grids.
const INV_CDF_CELLS: usize = 4096;

/// Specification of a mixing distribution on [0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MixingSpec {
    /// Density (2/B(p,q)) x^(2p-1) (1-x^2)^(q-1); requires p > 0, q > 1.
    /// The square of the coefficient is Beta(p, q) distributed.
    BetaType { p: f64, q: f64 },
    /// Density (1+beta)(1-x)^beta; requires beta > -1. The canonical
    /// representative of regular variation at the unit root: the tail shape
    /// is the whole density.
    CanonicalRegVar { beta: f64 },
    /// Density C(d) x^(d-1) (1-x)^(1-2d) (1+x); requires 0 < d < 1/2. The
    /// aggregate of this mixture reproduces a fractionally integrated noise
    /// spectrum; see `analytics::farima_matched_sigma2`.
    Farima { d: f64 },
    /// Piecewise-linear density from a user table. `xs` strictly increasing
    /// in [0, 1); values are renormalized to integrate to exactly 1.
    /// `declared_tail` supplies (c_phi, beta) when known; tail parameters
    /// cannot be inferred from a finite table.
    Tabulated {
        xs: Vec<f64>,
        phis: Vec<f64>,
        declared_tail: Option<(f64, f64)>,
    },
}

impl MixingSpec {
    pub fn beta_type(p: f64, q: f64) -> Result<Self> {
        let spec = MixingSpec::BetaType { p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn canonical_reg_var(beta: f64) -> Result<Self> {
        let spec = MixingSpec::CanonicalRegVar { beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn farima(d: f64) -> Result<Self> {
        let spec = MixingSpec::Farima { d };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a tabulated density, renormalizing the values so the
    /// piecewise-linear interpolant integrates to 1.
    pub fn tabulated(
        xs: Vec<f64>,
        phis: Vec<f64>,
        declared_tail: Option<(f64, f64)>,
    ) -> Result<Self> {
        let mut spec = MixingSpec::Tabulated {
            xs,
            phis,
            declared_tail,
        };
        if let MixingSpec::Tabulated { xs, phis, .. } = &mut spec {
            require(xs.len() >= 2, "tabulated density needs at least two points")?;
            require(
                xs.len() == phis.len(),
                "tabulated density needs matching x and value columns",
            )?;
            require(
                xs.windows(2).all(|w| w[0] < w[1]),
                "tabulated x grid must be strictly increasing",
            )?;
            require(
                xs.iter().all(|&x| (0.0..1.0).contains(&x)),
                "tabulated x grid must lie in [0, 1)",
            )?;
            require(
                phis.iter().all(|&v| v.is_finite() && v >= 0.0),
                "tabulated density values must be finite and nonnegative",
            )?;
            let mass = trapezoid_mass(xs, phis);
            require(mass > 0.0, "tabulated density must have positive mass")?;
            for v in phis.iter_mut() {
                *v /= mass;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a tabulated density from a two-column CSV file (x, phi(x)).
    pub fn tabulated_from_csv(
        path: &std::path::Path,
        declared_tail: Option<(f64, f64)>,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Format(format!("cannot read density table: {e}")))?;
        let mut xs = Vec::new();
        let mut phis = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Format(format!("bad table row: {e}")))?;
            if record.len() != 2 {
                return Err(Error::Format(format!(
                    "density table rows need 2 columns, got {}",
                    record.len()
                )));
            }
            let x: f64 = record[0]
                .parse()
                .map_err(|e| Error::Format(format!("bad x value {:?}: {e}", &record[0])))?;
            let v: f64 = record[1]
                .parse()
                .map_err(|e| Error::Format(format!("bad density value {:?}: {e}", &record[1])))?;
            xs.push(x);
            phis.push(v);
        }
        Self::tabulated(xs, phis, declared_tail)
    }

    /// Checks the variant's parameter domain.
    pub fn validate(&self) -> Result<()> {
        match *self {
            MixingSpec::BetaType { p, q } => {
                require(
                    p > 0.0 && p.is_finite(),
                    format!("p must be positive, got {p}"),
                )?;
                require(
                    q > 1.0 && q.is_finite(),
                    format!("q must exceed 1, got {q}"),
                )
            }
            MixingSpec::CanonicalRegVar { beta } => require(
                beta > -1.0 && beta.is_finite(),
                format!("tail exponent must exceed -1, got {beta}"),
            ),
            MixingSpec::Farima { d } => require(
                d > 0.0 && d < 0.5,
                format!("memory parameter must lie in (0, 1/2), got {d}"),
            ),
            MixingSpec::Tabulated {
                ref xs, ref phis, ..
            } => require(
                xs.len() >= 2 && xs.len() == phis.len(),
                "malformed density table",
            ),
        }
    }

    /// Density phi(x) at a coefficient value x in [0, 1).
    pub fn density(&self, x: f64) -> Result<f64> {
        require(
            (0.0..1.0).contains(&x),
            format!("coefficient must lie in [0, 1), got {x}"),
        )?;
        Ok(match *self {
            MixingSpec::BetaType { p, q } => {
                let norm = 2.0 / beta_fn(p, q);
                norm * x.powf(2.0 * p - 1.0) * (1.0 - x * x).powf(q - 1.0)
            }
            MixingSpec::CanonicalRegVar { beta } => (1.0 + beta) * (1.0 - x).powf(beta),
            MixingSpec::Farima { d } => {
                farima_norm(d) * x.powf(d - 1.0) * (1.0 - x).powf(1.0 - 2.0 * d) * (1.0 + x)
            }
            MixingSpec::Tabulated {
                ref xs, ref phis, ..
            } => interp_linear(xs, phis, x),
        })
    }

    /// Unit-root tail parameters (c_phi, beta) with
    /// phi(x) ~ c_phi (1-x)^beta as x -> 1.
    pub fn tail_params(&self) -> Result<(f64, f64)> {
        match *self {
            MixingSpec::BetaType { p, q } => {
                Ok(((2.0 / beta_fn(p, q)) * 2f64.powf(q - 1.0), q - 1.0))
            }
            MixingSpec::CanonicalRegVar { beta } => Ok((1.0 + beta, beta)),
            MixingSpec::Farima { d } => Ok((2.0 * farima_norm(d), 1.0 - 2.0 * d)),
            MixingSpec::Tabulated { declared_tail, .. } => declared_tail
                .ok_or_else(|| Error::invalid("tabulated density has no declared tail parameters")),
        }
    }

    /// Tail exponent beta alone.
    pub fn tail_exponent(&self) -> Result<f64> {
        self.tail_params().map(|(_, beta)| beta)
    }

    /// k-th moment mu_k = E a^k of the coefficient.
    ///
    /// Beta-type, canonical, and mixture variants reduce to exact Beta
    /// integrals (substitute u = x^2 for Beta-type); the table variant is
    /// integrated cell by cell.
    pub fn moment(&self, k: u32) -> Result<f64> {
        let kf = f64::from(k);
        Ok(match *self {
            MixingSpec::BetaType { p, q } => (ln_beta(p + kf / 2.0, q) - ln_beta(p, q)).exp(),
            MixingSpec::CanonicalRegVar { beta } => {
                (1.0 + beta)
                    * (ln_gamma(kf + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(kf + beta + 2.0)).exp()
            }
            MixingSpec::Farima { d } => {
                let c = farima_norm(d);
                c * (ln_beta(kf + d, 2.0 - 2.0 * d).exp()
                    + ln_beta(kf + d + 1.0, 2.0 - 2.0 * d).exp())
            }
            MixingSpec::Tabulated {
                ref xs, ref phis, ..
            } => integrate_cells_with_power(xs, phis, k),
        })
    }

    /// Distribution function P(a <= x) for x in [0, 1).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        require(
            (0.0..1.0).contains(&x),
            format!("coefficient must lie in [0, 1), got {x}"),
        )?;
        match *self {
            MixingSpec::BetaType { p, q } => {
                if x == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(beta_reg(p, q, x * x))
                }
            }
            MixingSpec::CanonicalRegVar { beta } => Ok(1.0 - (1.0 - x).powf(1.0 + beta)),
            MixingSpec::Farima { d } => {
                if x == 0.0 {
                    return Ok(0.0);
                }
                // Substitute x = t^(1/d): the transformed integrand is
                // bounded, so plain tanh-sinh reaches the 1e-10 target.
                let c = farima_norm(d);
                tanh_sinh_sing(
                    |t, _, _| {
                        let xv = t.powf(1.0 / d);
                        (c / d) * (1.0 - xv).powf(1.0 - 2.0 * d) * (1.0 + xv)
                    },
                    0.0,
                    x.powf(d),
                    1e-11,
                    1e-12,
                )
            }
            MixingSpec::Tabulated {
                ref xs, ref phis, ..
            } => Ok(tabulated_cdf(xs, phis, x)),
        }
    }

    /// Draws `n` i.i.d. coefficients from the mixing law.
    ///
    /// Beta-type draws a = sqrt(u) with u ~ Beta(p, q); the canonical family
    /// inverts its closed-form CDF; the mixture and table variants invert a
    /// cached CDF grid. All draws land strictly inside [0, 1).
    pub fn sample_coeff(&self, n: usize, stream: Stream) -> Result<Vec<f64>> {
        require(n >= 1, "sample count must be at least 1")?;
        let mut rng = stream.rng();
        let cap = 1.0 - 1e-16;
        match *self {
            MixingSpec::BetaType { p, q } => {
                let dist = rand_distr::Beta::new(p, q)
                    .map_err(|e| Error::invalid(format!("beta sampler rejected (p, q): {e}")))?;
                Ok((0..n)
                    .map(|_| {
                        let u: f64 = dist.sample(&mut rng);
                        u.sqrt().min(cap)
                    })
                    .collect())
            }
            MixingSpec::CanonicalRegVar { beta } => Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    (1.0 - u.powf(1.0 / (1.0 + beta))).min(cap)
                })
                .collect()),
            MixingSpec::Farima { d } => {
                let grid = farima_inverse_grid(d);
                Ok((0..n)
                    .map(|_| {
                        let u: f64 = rng.sample(Open01);
                        grid.invert(u).min(cap)
                    })
                    .collect())
            }
            MixingSpec::Tabulated {
                ref xs, ref phis, ..
            } => {
                let sampler = TabulatedSampler::new(xs, phis);
                Ok((0..n)
                    .map(|_| {
                        let u: f64 = rng.sample(Open01);
                        sampler.invert(u).min(cap)
                    })
                    .collect())
            }
        }
    }
}

/// Normalization constant of the long-memory mixture density, fixed by
/// integrating the unnormalized density to 1. Computed once per parameter
/// value and memoized.
pub fn farima_norm(d: f64) -> f64 {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: Mutex<Option<HashMap<u64, f64>>> = Mutex::new(None);
    let key = d.to_bits();
    let mut guard = CACHE.lock().expect("farima norm cache poisoned");
    let cache = guard.get_or_insert_with(HashMap::new);
    if let Some(&v) = cache.get(&key) {
        return v;
    }
    // int_0^1 x^(d-1) (1-x)^(1-2d) (1+x) dx, singular at 0, vanishing at 1.
    let raw = tanh_sinh_sing(
        |_, da, db| da.powf(d - 1.0) * db.powf(1.0 - 2.0 * d) * (2.0 - db),
        0.0,
        1.0,
        1e-12,
        0.0,
    )
    .expect("mixture normalization integral converges for d in (0, 1/2)");
    let v = 1.0 / raw;
    cache.insert(key, v);
    v
}

fn trapezoid_mass(xs: &[f64], phis: &[f64]) -> f64 {
    xs.windows(2)
        .zip(phis.windows(2))
        .map(|(x, p)| 0.5 * (p[0] + p[1]) * (x[1] - x[0]))
        .sum()
}

fn interp_linear(xs: &[f64], phis: &[f64], x: f64) -> f64 {
    if x <= xs[0] || x >= *xs.last().expect("nonempty table") {
        if x == xs[0] {
            return phis[0];
        }
        if x == *xs.last().expect("nonempty table") {
            return *phis.last().expect("nonempty table");
        }
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    phis[i] + t * (phis[i + 1] - phis[i])
}

fn tabulated_cdf(xs: &[f64], phis: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        if x >= xs[i + 1] {
            acc += 0.5 * (phis[i] + phis[i + 1]) * (xs[i + 1] - xs[i]);
        } else if x > xs[i] {
            let t = x - xs[i];
            let slope = (phis[i + 1] - phis[i]) / (xs[i + 1] - xs[i]);
            acc += phis[i] * t + 0.5 * slope * t * t;
            break;
        } else {
            break;
        }
    }
    acc.min(1.0)
}

/// int x^k times the piecewise-linear table density, subdividing cells so the
/// power factor is well resolved.
fn integrate_cells_with_power(xs: &[f64], phis: &[f64], k: u32) -> f64 {
    let (nodes, weights) = gauss_legendre(8);
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let width = b - a;
        if width <= 0.0 {
            continue;
        }
        let sub = 1 + (f64::from(k) * width) as usize;
        for j in 0..sub {
            let lo = a + width * j as f64 / sub as f64;
            let hi = a + width * (j + 1) as f64 / sub as f64;
            let c = 0.5 * (lo + hi);
            let s = 0.5 * (hi - lo);
            for (t, w) in nodes.iter().zip(&weights) {
                let x = c + s * t;
                acc += s * w * x.powi(k as i32) * interp_linear(xs, phis, x);
            }
        }
    }
    acc
}

/// Cached inverse-CDF grid: exact anchor pairs (F_i, x_i), linear in between.
/// The Kolmogorov error of the induced law is at most the largest CDF
/// increment per cell.
struct InverseCdfGrid {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl InverseCdfGrid {
    fn invert(&self, u: f64) -> f64 {
        let i = (self.fs.partition_point(|&f| f < u)).clamp(1, self.fs.len() - 1);
        let (f0, f1) = (self.fs[i - 1], self.fs[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        if f1 <= f0 {
            return x0;
        }
        x0 + (u - f0) / (f1 - f0) * (x1 - x0)
    }
}

/// Builds the mixture variant's inverse-CDF grid on a uniform mesh in
/// t = x^d, where the transformed CDF derivative is bounded; cell increments
/// are then O(1/cells) uniformly in d, which bounds the sampler's Kolmogorov
/// error by the same amount.
fn farima_inverse_grid(d: f64) -> InverseCdfGrid {
    let c = farima_norm(d);
    let (nodes, weights) = gauss_legendre(16);
    let m = INV_CDF_CELLS;
    let mut xs = Vec::with_capacity(m + 1);
    let mut fs = Vec::with_capacity(m + 1);
    xs.push(0.0);
    fs.push(0.0);
    let mut acc = 0.0;
    for j in 0..m {
        let t0 = j as f64 / m as f64;
        let t1 = (j + 1) as f64 / m as f64;
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        let mut cell = 0.0;
        for (t, w) in nodes.iter().zip(&weights) {
            let tv = mid + half * t;
            let xv = tv.powf(1.0 / d);
            cell += w * (c / d) * (1.0 - xv).powf(1.0 - 2.0 * d) * (1.0 + xv);
        }
        acc += cell * half;
        xs.push(t1.powf(1.0 / d));
        fs.push(acc);
    }
    // Kill quadrature drift so inversion covers all of (0, 1).
    let total = *fs.last().expect("grid nonempty");
    for f in fs.iter_mut() {
        *f /= total;
    }
    InverseCdfGrid { xs, fs }
}

/// Exact sampler for the piecewise-linear table density: cell by inverse
/// cumulative mass, then the quadratic within-cell CDF inverted in closed
/// form.
struct TabulatedSampler {
    xs: Vec<f64>,
    phis: Vec<f64>,
    cum: Vec<f64>,
}

impl TabulatedSampler {
    fn new(xs: &[f64], phis: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..xs.len() - 1 {
            acc += 0.5 * (phis[i] + phis[i + 1]) * (xs[i + 1] - xs[i]);
            cum.push(acc);
        }
        let total = acc;
        for c in cum.iter_mut() {
            *c /= total;
        }
        TabulatedSampler {
            xs: xs.to_vec(),
            phis: phis.to_vec(),
            cum,
        }
    }

    fn invert(&self, u: f64) -> f64 {
        let i = (self.cum.partition_point(|&f| f < u)).clamp(1, self.cum.len() - 1) - 1;
        let width = self.xs[i + 1] - self.xs[i];
        let mass = self.cum[i + 1] - self.cum[i];
        if mass <= 0.0 {
            return self.xs[i];
        }
        let rem = (u - self.cum[i]) / mass; // in [0, 1]
        let f0 = self.phis[i];
        let f1 = self.phis[i + 1];
        let avg = 0.5 * (f0 + f1);
        // Solve f0 s + (f1-f0)/2 s^2 = rem * avg for s in [0, 1] (s scaled
        // by cell width). Linear cell when the slope vanishes.
        let slope = f1 - f0;
        let s = if slope.abs() < 1e-12 * avg.max(1e-300) {
            rem
        } else {
            let disc = (f0 * f0 + slope * (2.0 * rem * avg)).max(0.0);
            (disc.sqrt() - f0) / slope
        };
        self.xs[i] + s.clamp(0.0, 1.0) * width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::tanh_sinh_sing;
    use statrs::function::gamma::gamma;

    fn quadrature_moment(spec: &MixingSpec, k: u32) -> f64 {
        // Independent of the closed forms: integrate x^k phi(x) directly,
        // writing the integrand in endpoint distances.
        match *spec {
            MixingSpec::BetaType { p, q } => tanh_sinh_sing(
                |x, da, db| {
                    let base = (2.0 / beta_fn(p, q))
                        * da.powf(2.0 * p - 1.0)
                        * (db * (1.0 + x)).powf(q - 1.0);
                    base * da.powi(k as i32)
                },
                0.0,
                1.0,
                1e-12,
                0.0,
            )
            .unwrap(),
            MixingSpec::CanonicalRegVar { beta } => tanh_sinh_sing(
                |_, da, db| (1.0 + beta) * db.powf(beta) * da.powi(k as i32),
                0.0,
                1.0,
                1e-12,
                0.0,
            )
            .unwrap(),
            MixingSpec::Farima { d } => tanh_sinh_sing(
                |x, da, db| {
                    farima_norm(d)
                        * da.powf(d - 1.0)
                        * db.powf(1.0 - 2.0 * d)
                        * (1.0 + x)
                        * da.powi(k as i32)
                },
                0.0,
                1.0,
                1e-12,
                0.0,
            )
            .unwrap(),
            MixingSpec::Tabulated { .. } => spec.moment(k).unwrap(),
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let specs = [
            MixingSpec::beta_type(1.0, 1.5).unwrap(),
            MixingSpec::beta_type(2.0, 3.0).unwrap(),
            MixingSpec::canonical_reg_var(-0.5).unwrap(),
            MixingSpec::canonical_reg_var(0.5).unwrap(),
            MixingSpec::canonical_reg_var(1.0).unwrap(),
            MixingSpec::farima(0.1).unwrap(),
            MixingSpec::farima(0.25).unwrap(),
            MixingSpec::farima(0.4).unwrap(),
        ];
        for spec in &specs {
            let mass = quadrature_moment(spec, 0);
            assert!((mass - 1.0).abs() < 1e-8, "{spec:?} integrates to {mass}");
        }
    }

    #[test]
    fn canonical_density_value_at_origin() {
        let spec = MixingSpec::canonical_reg_var(1.0).unwrap();
        assert_eq!(spec.density(0.0).unwrap(), 2.0);
    }

    #[test]
    fn density_rejects_out_of_range() {
        let spec = MixingSpec::canonical_reg_var(0.5).unwrap();
        assert!(spec.density(1.0).is_err());
        assert!(spec.density(-0.2).is_err());
    }

    #[test]
    fn tail_params_match_unit_root_limit() {
        let spec = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let (c_phi, beta) = spec.tail_params().unwrap();
        assert!((beta - 0.5).abs() < 1e-15);
        assert!((c_phi - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        // Numerical limit check at x = 1 - 1e-6.
        let x = 1.0 - 1e-6;
        let ratio = spec.density(x).unwrap() / (1.0 - x).powf(beta);
        assert!(
            (ratio / c_phi - 1.0).abs() < 1e-5,
            "ratio {ratio} vs {c_phi}"
        );

        let crv = MixingSpec::canonical_reg_var(0.5).unwrap();
        assert_eq!(crv.tail_params().unwrap(), (1.5, 0.5));

        let fm = MixingSpec::farima(0.25).unwrap();
        let (c_fm, beta_fm) = fm.tail_params().unwrap();
        assert!((beta_fm - 0.5).abs() < 1e-15);
        assert!((c_fm - 2.0 * farima_norm(0.25)).abs() < 1e-13);
    }

    #[test]
    fn mixture_normalization_matches_gamma_expression() {
        // Independent oracle: 1 / int = Gamma(3-d) / (2 Gamma(d) Gamma(2-2d)).
        for &d in &[0.1, 0.25, 0.4] {
            let oracle = gamma(3.0 - d) / (2.0 * gamma(d) * gamma(2.0 - 2.0 * d));
            let got = farima_norm(d);
            assert!(
                ((got - oracle) / oracle).abs() < 1e-10,
                "d={d}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn moments_closed_forms_match_quadrature() {
        let specs = [
            MixingSpec::beta_type(1.0, 1.5).unwrap(),
            MixingSpec::beta_type(2.0, 3.0).unwrap(),
            MixingSpec::canonical_reg_var(0.5).unwrap(),
            MixingSpec::farima(0.25).unwrap(),
        ];
        for spec in &specs {
            for k in [0u32, 1, 2, 3, 7, 20, 51] {
                let exact = spec.moment(k).unwrap();
                let quad = quadrature_moment(spec, k);
                assert!(
                    (exact - quad).abs() < 1e-10 * exact.max(1e-10),
                    "{spec:?} k={k}: {exact} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn moment_simple_values() {
        for spec in [
            MixingSpec::beta_type(1.7, 2.2).unwrap(),
            MixingSpec::canonical_reg_var(0.3).unwrap(),
            MixingSpec::farima(0.3).unwrap(),
        ] {
            assert!((spec.moment(0).unwrap() - 1.0).abs() < 1e-12);
        }
        // (1+beta)=2: int 2x(1-x) dx = 1/3.
        let crv = MixingSpec::canonical_reg_var(1.0).unwrap();
        assert!((crv.moment(1).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        // Beta-type closed form, odd order included.
        let bt = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let oracle = beta_fn(1.0 + 1.5, 1.5) / beta_fn(1.0, 1.5);
        assert!((bt.moment(3).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn moments_are_monotone_and_bounded() {
        let specs = [
            MixingSpec::beta_type(0.7, 1.2).unwrap(),
            MixingSpec::beta_type(3.0, 2.5).unwrap(),
            MixingSpec::canonical_reg_var(-0.4).unwrap(),
            MixingSpec::canonical_reg_var(2.0).unwrap(),
            MixingSpec::farima(0.45).unwrap(),
        ];
        for spec in &specs {
            let mut prev = 1.0f64;
            for k in 0..=60 {
                let m = spec.moment(k).unwrap();
                assert!(m <= prev + 1e-12, "{spec:?} k={k}");
                assert!((0.0..=1.0 + 1e-12).contains(&m));
                prev = m;
            }
        }
    }

    #[test]
    fn scaled_moments_stabilize_at_large_order() {
        // E a^k ~ const k^-(beta+1): the compensated sequence k^(beta+1) mu_k
        // settles, so values at k = 2000 and 4000 agree within 5%.
        let specs = [
            MixingSpec::beta_type(1.0, 1.5).unwrap(),
            MixingSpec::canonical_reg_var(0.2).unwrap(),
            MixingSpec::canonical_reg_var(0.8).unwrap(),
            MixingSpec::farima(0.25).unwrap(),
        ];
        for spec in &specs {
            let beta = spec.tail_exponent().unwrap();
            let at = |k: u32| (f64::from(k)).powf(beta + 1.0) * spec.moment(k).unwrap();
            let (a, b) = (at(2000), at(4000));
            assert!(((a - b) / b).abs() <= 0.05, "{spec:?}: {a} vs {b}");
        }
    }

    #[test]
    fn beta_type_sampler_mean_matches_beta_law() {
        let spec = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let draws = spec.sample_coeff(100_000, Stream::new(7)).unwrap();
        let mean_sq: f64 = draws.iter().map(|a| a * a).sum::<f64>() / draws.len() as f64;
        assert!((mean_sq - 0.4).abs() < 0.01 * 0.4 * 3.0, "mean {mean_sq}");
        assert!(draws.iter().all(|&a| (0.0..1.0).contains(&a)));
    }

    #[test]
    fn canonical_sampler_tail_frequency() {
        let spec = MixingSpec::canonical_reg_var(0.5).unwrap();
        let draws = spec.sample_coeff(1_000_000, Stream::new(11)).unwrap();
        let t = 0.05;
        let frac = draws.iter().filter(|&&a| a > 1.0 - t).count() as f64 / draws.len() as f64;
        let ratio = frac / t.powf(1.5);
        assert!((ratio - 1.0).abs() < 0.10, "tail ratio {ratio}");
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let spec = MixingSpec::farima(0.25).unwrap();
        let a = spec.sample_coeff(64, Stream::new(3).replicate(5)).unwrap();
        let b = spec.sample_coeff(64, Stream::new(3).replicate(5)).unwrap();
        let c = spec.sample_coeff(64, Stream::new(3).replicate(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn ks_distance(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        let mut worst = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            worst = worst.max((f - lo).abs()).max((f - hi).abs());
        }
        worst
    }

    #[test]
    fn sampler_cdf_agreement_kolmogorov() {
        let specs = [
            MixingSpec::beta_type(1.0, 1.5).unwrap(),
            MixingSpec::canonical_reg_var(0.5).unwrap(),
            MixingSpec::farima(0.25).unwrap(),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let mut draws = spec
                .sample_coeff(1_000_000, Stream::new(100 + i as u64))
                .unwrap();
            let d = ks_distance(&mut draws, |x| spec.cdf(x).unwrap());
            assert!(d <= 0.01, "{spec:?}: Kolmogorov distance {d}");
        }
    }

    #[test]
    fn tabulated_uniform_behaves_uniformly() {
        let xs: Vec<f64> = (0..=512).map(|i| i as f64 / 512.0 * 0.998).collect();
        let phis = vec![1.0; xs.len()];
        let spec = MixingSpec::tabulated(xs, phis, Some((1.0, 0.0))).unwrap();
        // Renormalized to the [0, 0.998] support.
        let d0 = spec.density(0.1).unwrap();
        assert!((d0 - 1.0 / 0.998).abs() < 1e-9);
        let mut draws = spec.sample_coeff(200_000, Stream::new(21)).unwrap();
        let d = ks_distance(&mut draws, |x| (x / 0.998).clamp(0.0, 1.0));
        assert!(d < 0.005, "Kolmogorov distance {d}");
        assert_eq!(spec.tail_params().unwrap(), (1.0, 0.0));
    }

    #[test]
    fn tabulated_requires_declared_tail() {
        let spec = MixingSpec::tabulated(vec![0.0, 0.5, 0.9], vec![1.0, 1.2, 0.3], None).unwrap();
        assert!(spec.tail_params().is_err());
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(MixingSpec::tabulated(vec![0.0, 0.0], vec![1.0, 1.0], None).is_err());
        assert!(MixingSpec::tabulated(vec![0.0, 1.0], vec![1.0, 1.0], None).is_err());
        assert!(MixingSpec::tabulated(vec![0.0, 0.5], vec![-1.0, 1.0], None).is_err());
        assert!(MixingSpec::tabulated(vec![0.0, 0.5], vec![0.0, 0.0], None).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(MixingSpec::beta_type(0.0, 1.5).is_err());
        assert!(MixingSpec::beta_type(1.0, 1.0).is_err());
        assert!(MixingSpec::canonical_reg_var(-1.0).is_err());
        assert!(MixingSpec::farima(0.5).is_err());
        assert!(MixingSpec::farima(0.0).is_err());
    }

    #[test]
    fn farima_cdf_anchors_inverse_grid() {
        let d = 0.25;
        let spec = MixingSpec::farima(d).unwrap();
        let grid = farima_inverse_grid(d);
        for &u in &[0.001, 0.1, 0.37, 0.5, 0.9, 0.999] {
            let x = grid.invert(u);
            let f = spec.cdf(x).unwrap();
            assert!((f - u).abs() < 1e-3, "u={u}: round trip {f}");
        }
    }
}
