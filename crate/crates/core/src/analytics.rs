//! Second-order theory of the aggregated process, asymptotic constants,
//! limit-process functionals, regime classifiers, and scaling diagnostics.
//!
//! The autocovariance of the contemporaneous aggregate is
//! `gamma(t) = sigma^2 int_0^1 x^t / (1 - x^2) phi(x) dx` and its spectral
//! density is `f(y) = (sigma^2 / 2pi) int_0^1 phi(x) / ((1-x)^2 +
//! 4 x sin^2(y/2)) dx`; both integrals concentrate at the unit root
//! precisely in the long-memory regime, so every integrand here is written
//! in terms of the endpoint distances `(da, db)` handed over by the
//! quadrature, with powers combined algebraically before evaluation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::ar1sim::{GrowthRegime, Panel};
use crate::error::{require, Error, Result};
use crate::mixing::{farima_norm, MixingSpec};
use crate::numeric::quad::{gl_fixed, tanh_sinh_sing};
use crate::numeric::special::ln_beta;
use crate::numeric::Kahan;
use crate::rng::{parallel_map, Stream};

/// Relative tolerance for the quadratures in this module; comfortably
/// tighter than any acceptance tolerance built on top of them.
const QUAD_REL: f64 = 1e-11;
const QUAD_ABS: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Covariance and spectral density
// ---------------------------------------------------------------------------

/// `x^t` evaluated from whichever endpoint distance is more accurate.
fn pow_xt(t: f64, da: f64, db: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let ln_x = if da < db { da.ln() } else { (-db).ln_1p() };
    (t * ln_x).exp()
}

/// Autocovariance `gamma(t)` of the aggregated process.
///
/// Beta-type mixing has the closed form
/// `sigma^2 B(p + t/2, q - 1) / B(p, q)`; all other mixing families are
/// integrated with singularity-aware quadrature. Requires a mixing tail
/// exponent `beta > 0`, otherwise the aggregate variance is infinite.
pub fn theoretical_cov(mixing: &MixingSpec, sigma2: f64, t: u32) -> Result<f64> {
    validate_cov_inputs(mixing, sigma2)?;
    if let MixingSpec::BetaType { p, q } = *mixing {
        let th = t as f64 / 2.0;
        return Ok(sigma2 * (ln_beta(p + th, q - 1.0) - ln_beta(p, q)).exp());
    }
    cov_quadrature(mixing, sigma2, t)
}

/// The covariance integral evaluated by quadrature for every family,
/// including beta-type; cross-checks the closed form in [`theoretical_cov`].
pub fn theoretical_cov_by_quadrature(mixing: &MixingSpec, sigma2: f64, t: u32) -> Result<f64> {
    validate_cov_inputs(mixing, sigma2)?;
    cov_quadrature(mixing, sigma2, t)
}

fn validate_cov_inputs(mixing: &MixingSpec, sigma2: f64) -> Result<()> {
    mixing.validate()?;
    require(
        sigma2 > 0.0 && sigma2.is_finite(),
        format!("innovation variance must be positive, got {sigma2}"),
    )?;
    let beta = mixing.tail_exponent()?;
    require(
        beta > 0.0,
        format!("aggregate variance is infinite for mixing tail exponent {beta}"),
    )
}

fn cov_quadrature(mixing: &MixingSpec, sigma2: f64, t: u32) -> Result<f64> {
    let tf = t as f64;
    let v = match *mixing {
        MixingSpec::BetaType { p, q } => {
            // phi(x)/(1-x^2) = (2/B(p,q)) x^(2p-1) (1-x^2)^(q-2)
            let norm = 2.0 * (-ln_beta(p, q)).exp();
            tanh_sinh_sing(
                |_, da, db| {
                    norm * da.powf(2.0 * p - 1.0)
                        * (db * (2.0 - db)).powf(q - 2.0)
                        * pow_xt(tf, da, db)
                },
                0.0,
                1.0,
                QUAD_REL,
                QUAD_ABS,
            )?
        }
        MixingSpec::CanonicalRegVar { beta } => tanh_sinh_sing(
            |_, da, db| (1.0 + beta) * db.powf(beta - 1.0) / (2.0 - db) * pow_xt(tf, da, db),
            0.0,
            1.0,
            QUAD_REL,
            QUAD_ABS,
        )?,
        MixingSpec::Farima { d } => {
            // phi(x)/(1-x^2) = C(d) x^(d-1) (1-x)^(-2d)
            let c = farima_norm(d);
            tanh_sinh_sing(
                |_, da, db| c * da.powf(d - 1.0) * db.powf(-2.0 * d) * pow_xt(tf, da, db),
                0.0,
                1.0,
                QUAD_REL,
                QUAD_ABS,
            )?
        }
        MixingSpec::Tabulated { .. } => {
            tabulated_quadrature(mixing, |x| x.powf(tf) / (1.0 - x * x))?
        }
    };
    Ok(sigma2 * v)
}

/// Spectral density `f(y)` of the aggregated process.
///
/// `y = 0` is allowed only when the mixing tail exponent exceeds 1; below
/// that the density has an integrable power singularity at zero frequency.
pub fn spectral_density(mixing: &MixingSpec, sigma2: f64, y: f64) -> Result<f64> {
    mixing.validate()?;
    require(
        sigma2 > 0.0 && sigma2.is_finite(),
        format!("innovation variance must be positive, got {sigma2}"),
    )?;
    require(
        y.is_finite() && y.abs() <= std::f64::consts::PI,
        format!("frequency must lie in [-pi, pi], got {y}"),
    )?;
    if y == 0.0 {
        let beta = mixing.tail_exponent()?;
        require(
            beta > 1.0,
            format!("spectral density diverges at frequency 0 for tail exponent {beta}"),
        )?;
    }
    let s2 = (y / 2.0).sin().powi(2);
    let v = match *mixing {
        // At s2 = 0 the kernel reduces to 1/(1-x)^2 and the surviving power
        // of db must be combined with the density's before evaluation.
        MixingSpec::BetaType { p, q } => {
            let norm = 2.0 * (-ln_beta(p, q)).exp();
            if s2 == 0.0 {
                tanh_sinh_sing(
                    |_, da, db| {
                        norm * da.powf(2.0 * p - 1.0) * db.powf(q - 3.0) * (2.0 - db).powf(q - 1.0)
                    },
                    0.0,
                    1.0,
                    QUAD_REL,
                    QUAD_ABS,
                )?
            } else {
                tanh_sinh_sing(
                    |x, da, db| {
                        norm * da.powf(2.0 * p - 1.0) * (db * (2.0 - db)).powf(q - 1.0)
                            / (db * db + 4.0 * x * s2)
                    },
                    0.0,
                    1.0,
                    QUAD_REL,
                    QUAD_ABS,
                )?
            }
        }
        MixingSpec::CanonicalRegVar { beta } if s2 == 0.0 => tanh_sinh_sing(
            |_, _, db| (1.0 + beta) * db.powf(beta - 2.0),
            0.0,
            1.0,
            QUAD_REL,
            QUAD_ABS,
        )?,
        MixingSpec::CanonicalRegVar { beta } => tanh_sinh_sing(
            |x, _, db| (1.0 + beta) * db.powf(beta) / (db * db + 4.0 * x * s2),
            0.0,
            1.0,
            QUAD_REL,
            QUAD_ABS,
        )?,
        MixingSpec::Farima { d } => {
            let c = farima_norm(d);
            tanh_sinh_sing(
                |x, da, db| {
                    c * da.powf(d - 1.0) * db.powf(1.0 - 2.0 * d) * (2.0 - db)
                        / (db * db + 4.0 * x * s2)
                },
                0.0,
                1.0,
                QUAD_REL,
                QUAD_ABS,
            )?
        }
        MixingSpec::Tabulated { .. } => tabulated_quadrature(mixing, |x| {
            let u = 1.0 - x;
            1.0 / (u * u + 4.0 * x * s2)
        })?,
    };
    Ok(sigma2 / (2.0 * std::f64::consts::PI) * v)
}

/// Integrates `density(x) * g(x)` over the support of a tabulated mixing
/// density, cell by cell; the grid stays away from the unit root so no
/// singularity handling is needed.
pub(crate) fn tabulated_quadrature(mixing: &MixingSpec, g: impl Fn(f64) -> f64) -> Result<f64> {
    let MixingSpec::Tabulated { xs, .. } = mixing else {
        unreachable!("caller matched the tabulated variant");
    };
    // Renormalized node densities; linear interpolation between them matches
    // the sampler and the cdf.
    let fs: Vec<f64> = xs
        .iter()
        .map(|&x| mixing.density(x))
        .collect::<Result<_>>()?;
    let mut acc = Kahan::default();
    for w in xs.windows(2).zip(fs.windows(2)) {
        let (&[x0, x1], &[f0, f1]) = w else {
            unreachable!()
        };
        if x1 <= x0 {
            continue;
        }
        let cell = gl_fixed(
            |x| {
                let lam = (x - x0) / (x1 - x0);
                (f0 + lam * (f1 - f0)) * g(x)
            },
            x0,
            x1,
            16,
        );
        acc.add(cell);
    }
    Ok(acc.value())
}

/// Amplitudes of the power asymptotics `gamma(t) ~ c t^(-beta)` and
/// `f(y) ~ c_f |y|^(beta-1)`:
/// `c = sigma^2 (c_phi / 2) Gamma(beta)` and
/// `c_f = sigma^2 (c_phi / 2 pi) int_0^inf w^beta / (1 + w^2) dw`.
///
/// Defined for tail exponents `beta` in (0, 1). The integral is folded onto
/// the unit interval by `w -> 1/w` before quadrature.
pub fn asymptotic_constants(mixing: &MixingSpec, sigma2: f64) -> Result<(f64, f64)> {
    mixing.validate()?;
    require(
        sigma2 > 0.0 && sigma2.is_finite(),
        format!("innovation variance must be positive, got {sigma2}"),
    )?;
    let (c_phi, beta) = mixing.tail_params()?;
    require(
        beta > 0.0 && beta < 1.0,
        format!("power asymptotics hold for tail exponents in (0, 1), got {beta}"),
    )?;
    let c = sigma2 * c_phi / 2.0 * gamma(beta);
    let integral = tanh_sinh_sing(
        |w, da, _| (w.powf(beta) + da.powf(-beta)) / (1.0 + w * w),
        0.0,
        1.0,
        QUAD_REL,
        QUAD_ABS,
    )?;
    let c_f = sigma2 * c_phi / (2.0 * std::f64::consts::PI) * integral;
    Ok((c, c_f))
}

/// Innovation variance under which the long-memory mixture with parameter
/// `d` makes the aggregated spectral density equal to the standard
/// long-memory form `(2 pi)^(-1) |2 sin(y/2)|^(-2d)`.
pub fn farima_matching_variance(d: f64) -> Result<f64> {
    require(
        d > 0.0 && d < 0.5,
        format!("memory parameter must lie in (0, 1/2), got {d}"),
    )?;
    Ok(2.0 * gamma(2.0 - 2.0 * d) / (gamma(1.0 - d) * gamma(3.0 - d)))
}

// ---------------------------------------------------------------------------
// Empirical second-order estimators
// ---------------------------------------------------------------------------

/// Mean-removed sample autocovariance with divisor `n`.
pub fn sample_cov(series: &[f64], k: usize) -> Result<f64> {
    let n = series.len();
    require(n >= 1, "series must not be empty")?;
    require(
        k < n,
        format!("lag {k} out of range for series of length {n}"),
    )?;
    let mut mean = Kahan::default();
    for v in series {
        mean.add(*v);
    }
    let mean = mean.value() / n as f64;
    let mut acc = Kahan::default();
    for t in 0..n - k {
        acc.add((series[t] - mean) * (series[t + k] - mean));
    }
    Ok(acc.value() / n as f64)
}

/// Pooled panel autocovariance
/// `(1 / ((n - k + 1) N)) sum_{t=1}^{n-k} sum_j X_j(t) X_j(t+k)`,
/// without mean removal, exactly in the printed form (the sum has `n - k`
/// terms against the divisor's `n - k + 1`).
pub fn panel_cov(panel: &Panel, k: usize) -> Result<f64> {
    let n = panel.cols;
    require(
        k < n,
        format!("lag {k} out of range for paths of length {n}"),
    )?;
    let mut acc = Kahan::default();
    for row in panel.values.chunks_exact(n) {
        for t in 0..n - k {
            acc.add(row[t] * row[t + k]);
        }
    }
    Ok(acc.value() / ((n - k + 1) as f64 * panel.rows as f64))
}

/// Hill tail-index estimate with an asymptotic 95% confidence interval.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailIndex {
    pub alpha: f64,
    /// `alpha * (1 -+ 1.96 / sqrt(k))`.
    pub ci: (f64, f64),
    /// Number of upper order statistics used, `ceil(n^0.6)`.
    pub k: usize,
}

/// Hill estimator of the tail index of `|values|`.
pub fn tail_index(series: &[f64]) -> Result<TailIndex> {
    let n = series.len();
    require(
        n >= 1000,
        format!("tail estimation needs at least 1000 points, got {n}"),
    )?;
    require(
        series.iter().all(|v| v.is_finite()),
        "series contains non-finite values",
    )?;
    let mut abs: Vec<f64> = series.iter().map(|v| v.abs()).collect();
    abs.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let k = (n as f64).powf(0.6).ceil() as usize;
    let threshold = abs[k];
    if threshold <= 0.0 {
        return Err(Error::Estimation(
            "series is too sparse for tail estimation (zero threshold order statistic)".into(),
        ));
    }
    let mut acc = Kahan::default();
    for v in &abs[..k] {
        acc.add((v / threshold).ln());
    }
    let mean_log = acc.value() / k as f64;
    if mean_log <= 0.0 {
        return Err(Error::Estimation(
            "degenerate upper order statistics (all ties); tail index undefined".into(),
        ));
    }
    let alpha = 1.0 / mean_log;
    let half = 1.96 * alpha / (k as f64).sqrt();
    Ok(TailIndex {
        alpha,
        ci: (alpha - half, alpha + half),
        k,
    })
}

// ---------------------------------------------------------------------------
// Regime classifiers
// ---------------------------------------------------------------------------

/// Memory classification of the aggregated process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryClass {
    /// Partial-sum limit has dependent increments.
    Long,
    /// Partial-sum limit has independent increments.
    Short,
    /// The aggregate itself collapses to a time-constant random variable.
    Degenerate,
    /// On a theorem boundary; not classified.
    Boundary,
}

/// Parameter region of the triangular-array partial-sum limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    I,
    II,
    III,
    IV,
    NotApplicable,
    Boundary,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Region::I => "i",
            Region::II => "ii",
            Region::III => "iii",
            Region::IV => "iv",
            Region::NotApplicable => "n/a",
            Region::Boundary => "boundary",
        };
        f.write_str(s)
    }
}

/// Classification of the scaling behavior at one parameter point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeReport {
    pub memory: MemoryClass,
    pub region: Region,
    /// Growth case of `N` versus `n`, when one was supplied.
    pub growth: Option<GrowthRegime>,
    /// Self-similarity index of the partial-sum limit.
    pub h: Option<f64>,
    /// For memory classification of a degenerate aggregate, the exponent of
    /// `N` in the aggregation normalization; for region classification, the
    /// printed exponent of `n` multiplying the partial sum (equals `-h`).
    pub normalization_exponent: Option<f64>,
    /// Name of the limit process.
    pub limit_process: String,
}

/// Classifies the memory of the aggregate of AR(1) paths with stable index
/// `alpha` innovations and mixing tail exponent `beta`.
///
/// Long memory for `0 < beta < alpha - 1` (partial sums scale as
/// `n^(1 - beta/alpha)` with a self-similar dependent-increment limit),
/// short memory for `beta > alpha - 1` (stable Levy limit), and a
/// degenerate time-constant aggregate for `-1 < beta < 0` under the
/// `N^(1/(alpha (1+beta)))` normalization. The exact boundaries
/// `beta = 0` and `beta = alpha - 1` are flagged, not classified.
pub fn classify_memory(alpha: f64, beta: f64) -> Result<RegimeReport> {
    require(
        alpha > 1.0 && alpha <= 2.0,
        format!("stable index must lie in (1, 2], got {alpha}"),
    )?;
    require(
        beta > -1.0 && beta.is_finite(),
        format!("tail exponent must lie in (-1, inf), got {beta}"),
    )?;
    if beta == 0.0 || beta == alpha - 1.0 {
        return Ok(RegimeReport {
            memory: MemoryClass::Boundary,
            region: Region::NotApplicable,
            growth: None,
            h: None,
            normalization_exponent: None,
            limit_process: "boundary case, not classified".into(),
        });
    }
    let report = if beta < 0.0 {
        RegimeReport {
            memory: MemoryClass::Degenerate,
            region: Region::NotApplicable,
            growth: None,
            h: None,
            normalization_exponent: Some(1.0 / (alpha * (1.0 + beta))),
            limit_process: "random constant".into(),
        }
    } else if beta < alpha - 1.0 {
        let h = 1.0 - beta / alpha;
        RegimeReport {
            memory: MemoryClass::Long,
            region: Region::NotApplicable,
            growth: None,
            h: Some(h),
            normalization_exponent: Some(h),
            limit_process: if alpha == 2.0 {
                "fractional Brownian motion".into()
            } else {
                "stable self-similar process".into()
            },
        }
    } else {
        RegimeReport {
            memory: MemoryClass::Short,
            region: Region::NotApplicable,
            growth: None,
            h: Some(1.0 / alpha),
            normalization_exponent: Some(1.0 / alpha),
            limit_process: if alpha == 2.0 {
                "Brownian motion".into()
            } else {
                "stable Levy process".into()
            },
        }
    };
    Ok(report)
}

/// Classifies the partial-sum limit of the triangular-array aggregate by
/// `(beta, sigma, alpha0)`: mixing tail exponent, Gaussian part of the
/// innovation triplet, and small-jump intensity exponent.
///
/// Regions: (i) `0 < beta < 1`, `sigma > 0` — fractional Brownian motion;
/// (ii) `sigma = 0`, `1 + beta < alpha0 < 2` — stable self-similar process;
/// (iii) `sigma = 0`, `alpha0 < 1 + beta` — stable Levy process;
/// (iv) `beta > 1` — Brownian motion. Boundaries `beta = 1` and
/// `alpha0 = 1 + beta` are flagged, not classified.
pub fn classify_region(beta: f64, sigma: f64, alpha0: f64) -> Result<RegimeReport> {
    require(
        beta > 0.0 && beta.is_finite(),
        format!("tail exponent must be positive, got {beta}"),
    )?;
    require(
        sigma >= 0.0 && sigma.is_finite(),
        format!("Gaussian part must be nonnegative, got {sigma}"),
    )?;
    require(
        alpha0 > 0.0 && alpha0 < 2.0,
        format!("small-jump exponent must lie in (0, 2), got {alpha0}"),
    )?;
    if beta == 1.0 || (sigma == 0.0 && alpha0 == 1.0 + beta) {
        return Ok(RegimeReport {
            memory: MemoryClass::Boundary,
            region: Region::Boundary,
            growth: None,
            h: None,
            normalization_exponent: None,
            limit_process: "boundary case, not classified".into(),
        });
    }
    let report = if beta > 1.0 {
        RegimeReport {
            memory: MemoryClass::Short,
            region: Region::IV,
            growth: None,
            h: Some(0.5),
            normalization_exponent: Some(-0.5),
            limit_process: "Brownian motion".into(),
        }
    } else if sigma > 0.0 {
        let h = 1.0 - beta / 2.0;
        RegimeReport {
            memory: MemoryClass::Long,
            region: Region::I,
            growth: None,
            h: Some(h),
            normalization_exponent: Some(beta / 2.0 - 1.0),
            limit_process: "fractional Brownian motion".into(),
        }
    } else if alpha0 > 1.0 + beta {
        let h = 1.0 - beta / alpha0;
        RegimeReport {
            memory: MemoryClass::Long,
            region: Region::II,
            growth: None,
            h: Some(h),
            normalization_exponent: Some(beta / alpha0 - 1.0),
            limit_process: "stable self-similar process".into(),
        }
    } else {
        let h = 1.0 / (1.0 + beta);
        RegimeReport {
            memory: MemoryClass::Short,
            region: Region::III,
            growth: None,
            h: Some(h),
            normalization_exponent: Some(-h),
            limit_process: "stable Levy process".into(),
        }
    };
    Ok(report)
}

// ---------------------------------------------------------------------------
// Partial-sum variance scaling
// ---------------------------------------------------------------------------

/// Least-squares slope of `log Var` against `log n`.
///
/// Points must be positive with strictly increasing `n`; a geometric grid
/// gives each decade equal weight in the fit.
pub fn partial_sum_slope(var_points: &[(f64, f64)]) -> Result<f64> {
    require(var_points.len() >= 4, "slope fit needs at least 4 points")?;
    for w in var_points.windows(2) {
        require(w[1].0 > w[0].0, "sample sizes must be strictly increasing")?;
    }
    let mut logs = Vec::with_capacity(var_points.len());
    for (n, v) in var_points {
        require(
            *n > 0.0 && n.is_finite(),
            format!("sample sizes must be positive, got {n}"),
        )?;
        require(
            *v > 0.0 && v.is_finite(),
            format!("variance estimates must be positive, got {v}"),
        )?;
        logs.push((n.ln(), v.ln()));
    }
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Ok(sxy / sxx)
}

/// Exact variance of the partial sum `S_n = sum_{t<=n} X(t)` of the
/// aggregate, `Var(S_n) = n gamma(0) + 2 sum_{t=1}^{n-1} (n - t) gamma(t)`,
/// evaluated for every requested `n` from one covariance table.
pub fn theoretical_partial_sum_variances(
    mixing: &MixingSpec,
    sigma2: f64,
    ns: &[usize],
) -> Result<Vec<f64>> {
    require(!ns.is_empty(), "sample-size grid must not be empty")?;
    for n in ns {
        require(*n >= 1, "sample sizes must be at least 1")?;
    }
    let n_max = *ns.iter().max().expect("non-empty");
    let gammas: Vec<f64> = parallel_map(n_max, |t| theoretical_cov(mixing, sigma2, t as u32))
        .into_iter()
        .collect::<Result<_>>()?;
    // prefix[m] = sum_{t<m} gamma(t); weighted[m] = sum_{t<m} t gamma(t)
    let mut prefix = Vec::with_capacity(n_max + 1);
    let mut weighted = Vec::with_capacity(n_max + 1);
    let mut acc_p = Kahan::default();
    let mut acc_w = Kahan::default();
    prefix.push(0.0);
    weighted.push(0.0);
    for (t, g) in gammas.iter().enumerate() {
        acc_p.add(*g);
        acc_w.add(t as f64 * g);
        prefix.push(acc_p.value());
        weighted.push(acc_w.value());
    }
    Ok(ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            nf * gammas[0] + 2.0 * (nf * (prefix[n] - gammas[0]) - weighted[n])
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Limit-process functionals
// ---------------------------------------------------------------------------

/// `int_0^m e^(-x (a - s)) ds` for `0 <= m <= a`, stable at both ends of
/// the `x` range.
fn exp_integral(x: f64, a: f64, m: f64) -> f64 {
    if x * m > 1.0 {
        ((-x * (a - m)).exp() - (-x * a).exp()) / x
    } else {
        (-x * a).exp() * (x * m).exp_m1() / x
    }
}

/// The inner `s`-integral of the limit-process covariance kernel at
/// coordinate `x`, multiplied by `x^beta`:
/// `x^beta int_R (f(x, t1 - s) - f(x, -s)) (f(x, t2 - s) - f(x, -s)) ds`
/// with `f(x, t) = (1 - e^(-x t)) / x`.
///
/// The `s < 0` tail is geometric and integrates in closed form; the
/// `s in (0, min(t1, t2))` part is closed via `expm1`, with a Taylor branch
/// where the closed form would cancel catastrophically.
fn cov_kernel_weighted(x: f64, t1: f64, t2: f64, beta: f64) -> f64 {
    let m = t1.min(t2);
    let v1 = -(-x * t1).exp_m1() / x;
    let v2 = -(-x * t2).exp_m1() / x;
    let negative_part = v1 * v2 * x.powf(beta - 1.0) * 0.5;
    let positive_part = if x * m < 1e-6 {
        // leading term of int_0^m (t1 - s)(t2 - s) ds, relative error O(x m)
        x.powf(beta) * (t1 * t2 * m - (t1 + t2) * m * m / 2.0 + m * m * m / 3.0)
    } else {
        let bracket = m - exp_integral(x, t1, m) - exp_integral(x, t2, m)
            + exp_integral(x, t1 + t2, 2.0 * m) / 2.0;
        bracket * x.powf(beta - 2.0)
    };
    negative_part + positive_part
}

/// Covariance of the Gaussian long-memory partial-sum limit at times
/// `(tau1, tau2)`, with unit mixing tail amplitude.
///
/// This is the double integral of the moving-average kernel products
/// against `x^beta dx ds`; at `tau1 = tau2 = tau` it is proportional to
/// `tau^(2H)` with `H = 1 - beta/2`. Scale externally by `c_phi` (and the
/// innovation variance) for a specific mixing law.
pub fn limit_process_cov(beta: f64, tau1: f64, tau2: f64) -> Result<f64> {
    require(
        beta > 0.0 && beta < 1.0,
        format!("tail exponent must lie in (0, 1), got {beta}"),
    )?;
    require(
        tau1 >= 0.0 && tau2 >= 0.0 && tau1.is_finite() && tau2.is_finite(),
        format!("times must be nonnegative, got ({tau1}, {tau2})"),
    )?;
    if tau1 == 0.0 || tau2 == 0.0 {
        return Ok(0.0);
    }
    let near = tanh_sinh_sing(
        |_, da, _| cov_kernel_weighted(da, tau1, tau2, beta),
        0.0,
        1.0,
        QUAD_REL,
        QUAD_ABS,
    )?;
    // x > 1 folded by x -> 1/u; the kernel pieces are rebuilt in u to keep
    // the exponents combined.
    let m = tau1.min(tau2);
    let far = tanh_sinh_sing(
        |_, u, _| {
            let x = 1.0 / u;
            let bracket = m - exp_integral(x, tau1, m) - exp_integral(x, tau2, m)
                + exp_integral(x, tau1 + tau2, 2.0 * m) / 2.0;
            let neg = (-x * tau1).exp_m1() * (-x * tau2).exp_m1() * u.powf(1.0 - beta) * 0.5;
            bracket * u.powf(-beta) + neg
        },
        0.0,
        1.0,
        QUAD_REL,
        QUAD_ABS,
    )?;
    Ok(near + far)
}

/// Characteristic function of the intermediate-regime limit process at a
/// finite-dimensional point: `E exp(i sum_j theta_j Z(tau_j))`, with unit
/// mixing tail amplitude.
///
/// The process is a mixture of centered Gaussians, so the value is real
/// and positive; conjugate symmetry in `theta` is exact. The outer
/// integral over the coefficient coordinate is split at 1 and folded by
/// `x -> 1/x`; the inner squared-kernel `s`-integral uses the closed
/// geometric form for `s < 0` and Gauss-Legendre panels between the
/// distinct `tau_j` for `s > 0`.
pub fn intermediate_cf(beta: f64, sigma2: f64, thetas: &[f64], taus: &[f64]) -> Result<Complex64> {
    require(
        beta > -1.0 && beta < 1.0,
        format!("the outer integral diverges unless the tail exponent is in (-1, 1), got {beta}"),
    )?;
    require(
        sigma2 > 0.0 && sigma2.is_finite(),
        format!("Gaussian variance must be positive, got {sigma2}"),
    )?;
    require(
        !thetas.is_empty() && thetas.len() == taus.len(),
        "angle and time grids must have equal, positive length",
    )?;
    for (th, tau) in thetas.iter().zip(taus) {
        require(th.is_finite(), format!("angles must be finite, got {th}"))?;
        require(
            *tau >= 0.0 && tau.is_finite(),
            format!("times must be nonnegative, got {tau}"),
        )?;
    }

    // Panel breaks: 0 and the distinct positive taus, sorted.
    let mut breaks: Vec<f64> = taus.iter().copied().filter(|t| *t > 0.0).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    breaks.dedup();
    breaks.insert(0, 0.0);

    // sum_j theta_j (1 - e^(-x (tau_j - s))) / x over the active j, with the
    // 1/x kept inside so the x -> 0 limit is finite.
    let kernel_sum = |x: f64, s: f64| -> f64 {
        let mut h = 0.0;
        for (th, tau) in thetas.iter().zip(taus) {
            if *tau > s {
                h += th * (-(-x * (tau - s)).exp_m1()) / x;
            }
        }
        h
    };
    // G(x) = int_R (sum_j theta_j (f(x, tau_j - s) - f(x, -s)))^2 ds.
    let squared_kernel = |x: f64| -> f64 {
        let mut v = 0.0;
        for w in breaks.windows(2) {
            v += gl_fixed(|s| kernel_sum(x, s).powi(2), w[0], w[1], 16);
        }
        let w: f64 = thetas
            .iter()
            .zip(taus)
            .map(|(th, tau)| th * (-(-x * tau).exp_m1()) / x)
            .sum();
        v + w * w / (2.0 * x)
    };

    let near = tanh_sinh_sing(
        |_, da, _| (-0.5 * sigma2 * squared_kernel(da)).exp_m1() * da.powf(beta),
        0.0,
        1.0,
        QUAD_REL,
        QUAD_ABS,
    )?;
    let far = tanh_sinh_sing(
        |_, u, _| {
            // x = 1/u; G(1/u) = u^2 R(u) with R bounded, so expand the
            // integrand when the argument would underflow.
            let scaled_kernel = {
                let mut v = 0.0;
                for w in breaks.windows(2) {
                    v += gl_fixed(
                        |s| {
                            let mut h = 0.0;
                            for (th, tau) in thetas.iter().zip(taus) {
                                if *tau > s {
                                    h += th * (-(-(tau - s) / u).exp_m1());
                                }
                            }
                            h * h
                        },
                        w[0],
                        w[1],
                        16,
                    );
                }
                let w: f64 = thetas
                    .iter()
                    .zip(taus)
                    .map(|(th, tau)| th * (-(-tau / u).exp_m1()))
                    .sum();
                v + w * w * u / 2.0
            };
            let arg = 0.5 * sigma2 * u * u * scaled_kernel;
            if arg < 1e-8 {
                let lead = 0.5 * sigma2 * scaled_kernel;
                (-lead + 0.5 * arg * lead) * u.powf(-beta)
            } else {
                (-arg).exp_m1() * u.powf(-beta - 2.0)
            }
        },
        0.0,
        1.0,
        QUAD_REL,
        QUAD_ABS,
    )?;
    Ok(Complex64::new((near + far).exp(), 0.0))
}

// ---------------------------------------------------------------------------
// Exact Gaussian sampling from a covariance sequence
// ---------------------------------------------------------------------------

/// Draws one exact sample path of a stationary centered Gaussian process
/// with autocovariances `cov[k] = gamma(k)`, `k < n`, by the
/// Durbin-Levinson recursion (O(n^2)).
///
/// Fails if the covariance sequence is not numerically positive definite.
pub fn sample_gaussian_process(cov: &[f64], stream: Stream) -> Result<Vec<f64>> {
    let n = cov.len();
    require(n >= 1, "covariance sequence must not be empty")?;
    require(
        cov.iter().all(|v| v.is_finite()),
        "covariance sequence contains non-finite values",
    )?;
    require(
        cov[0] > 0.0,
        format!("variance must be positive, got {}", cov[0]),
    )?;
    let mut rng = stream.rng();
    let mut x = Vec::with_capacity(n);
    let z: f64 = rng.sample(StandardNormal);
    x.push(cov[0].sqrt() * z);
    let mut phi = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut v = cov[0];
    for t in 1..n {
        let mut acc = cov[t];
        for j in 1..t {
            acc -= prev[j] * cov[t - j];
        }
        let kappa = acc / v;
        if !(kappa.is_finite() && kappa.abs() < 1.0) {
            return Err(Error::numerical(format!(
                "covariance sequence is not positive definite at lag {t} (reflection {kappa})"
            )));
        }
        phi[t] = kappa;
        for j in 1..t {
            phi[j] = prev[j] - kappa * prev[t - j];
        }
        v *= 1.0 - kappa * kappa;
        if v <= 0.0 {
            return Err(Error::numerical(format!(
                "prediction variance collapsed at lag {t}"
            )));
        }
        let mut mean = Kahan::default();
        for j in 1..=t {
            mean.add(phi[j] * x[t - j]);
        }
        let z: f64 = rng.sample(StandardNormal);
        x.push(mean.value() + v.sqrt() * z);
        prev[..=t].copy_from_slice(&phi[..=t]);
    }
    Ok(x)
}
