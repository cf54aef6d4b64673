//! Panels of random-coefficient AR(1) paths and their aggregates.
//!
//! Each of the `N` units follows `X_i(t) = a_i X_i(t-1) + z_i(t)` with its
//! own coefficient `a_i` drawn once from a [`MixingSpec`] and innovations
//! `z_i(t)` drawn from an [`InnovationSpec`]. Contemporaneous aggregation
//! sums the panel across units at each time point under a normalization
//! `N^exponent` chosen by the [`AggregationScheme`]; [`joint_sum`] also
//! accumulates over time. Paths start in the stationary regime: exactly
//! where the stationary law has a closed form (Gaussian, symmetric stable),
//! through a geometric burn-in otherwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{require, Error, Result};
use crate::innovations::{stable_draw, InnovationSpec};
use crate::mixing::MixingSpec;
use crate::numeric::Kahan;
use crate::rng::{parallel_map, Stream};

/// Sampled coefficients are clipped to this value so the burn-in and the
/// stationary variance stay finite in floating point.
pub const COEFF_CAP: f64 = 1.0 - 1e-12;

/// Path lane reserved for the coefficient draws of a panel. Row lanes are
/// `0..N` and `N` is bounded by the cell cap, so the lanes never collide.
const COEFF_LANE: u64 = u64::MAX;

/// Default ceiling on `N * n` cells for a single panel (1 GiB of values).
const DEFAULT_CELL_CAP: u64 = 1 << 27;

static CELL_CAP: AtomicU64 = AtomicU64::new(DEFAULT_CELL_CAP);

/// Overrides the ceiling on `N * n` cells for a single panel.
pub fn set_cell_cap(cells: u64) {
    CELL_CAP.store(cells.max(1), Ordering::Relaxed);
}

/// Current ceiling on `N * n` cells for a single panel.
pub fn cell_cap() -> u64 {
    CELL_CAP.load(Ordering::Relaxed)
}

/// A simulated panel of `rows` AR(1) paths of length `cols`.
#[derive(Clone, Debug)]
pub struct Panel {
    /// Row-major `rows x cols` matrix; row `i` is the path of unit `i`.
    pub values: Vec<f64>,
    /// Number of units `N`.
    pub rows: usize,
    /// Path length `n`.
    pub cols: usize,
    /// Sampled autoregressive coefficients, one per unit, all in `[0, 1)`.
    pub coeffs: Vec<f64>,
    pub innovation: InnovationSpec,
    pub mixing: MixingSpec,
    /// Seed lineage `(master, replicate)` the panel was generated under.
    pub master_seed: u64,
    pub replicate: u64,
    /// How many sampled coefficients were clipped to [`COEFF_CAP`].
    pub clipped: usize,
}

impl Panel {
    /// Path of unit `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Cross-sectional sums, one per time point.
    fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![Kahan::default(); self.cols];
        for row in self.values.chunks_exact(self.cols) {
            for (s, x) in sums.iter_mut().zip(row) {
                s.add(*x);
            }
        }
        sums.into_iter().map(|s| s.value()).collect()
    }
}

/// Normalization rule for contemporaneous aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationScheme {
    /// `N^(1/2)`, for innovations with a finite variance.
    FiniteVariance,
    /// `N^(1/alpha)`, for stable and heavy-tailed innovations.
    Stable,
    /// `N^(1/(alpha (1+beta)))`, the scaling under which the aggregate of a
    /// short panel degenerates to a time-constant random variable when the
    /// mixing density is summable near 1 (beta <= 0).
    DegenerateCheck,
}

/// A contemporaneously aggregated panel.
#[derive(Clone, Debug)]
pub struct AggregatedSeries {
    /// `values[t] = N^(-exponent) * sum_i X_i(t)`.
    pub values: Vec<f64>,
    /// Exponent of the normalization `A_N = N^exponent`.
    pub exponent: f64,
    pub scheme: AggregationScheme,
}

/// Growth regime of `N` relative to `n` in the joint aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthRegime {
    /// `N^(1/(1+beta)) / n` large: cross-section dominates.
    Fast,
    /// The ratio is of order one.
    Intermediate,
    /// `N^(1/(1+beta)) / n` small: the time direction dominates.
    Slow,
}

/// Classification of a panel geometry for the joint temporal and
/// contemporaneous aggregate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthCase {
    pub regime: GrowthRegime,
    /// Finite-sample value of `N^(1/(1+beta)) / n`, whose limit separates
    /// the regimes.
    pub mu: f64,
    /// Normalization of the joint sum in this regime, for reports.
    pub normalization: String,
}

/// Burn-in length that contracts a unit start below 1e-12, capped at 1e6.
fn burn_in_length(a: f64) -> usize {
    if a <= 0.0 {
        return 0;
    }
    let steps = (1e-12f64.ln() / a.ln()).ceil();
    if steps.is_finite() && steps <= 1e6 {
        steps as usize
    } else {
        1_000_000
    }
}

/// Draws from the stationary law of the path when it has a closed form:
/// Gaussian innovations give N(0, sigma^2 / (1 - a^2)), symmetric stable
/// innovations give the same stable law with scale inflated by
/// (1 - a^alpha)^(-1/alpha).
fn stationary_start(a: f64, innovation: &InnovationSpec, rng: &mut ChaCha8Rng) -> Option<f64> {
    match innovation {
        InnovationSpec::Gaussian { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            Some(sigma / (1.0 - a * a).sqrt() * z)
        }
        InnovationSpec::Stable { alpha, skew, scale } if *skew == 0.0 => {
            let s = scale * (1.0 - a.powf(*alpha)).powf(-1.0 / alpha);
            Some(stable_draw(*alpha, 0.0, s, rng))
        }
        _ => None,
    }
}

/// One stationary-regime path; innovations for a panel of `array_size`
/// units are drawn in a single batch so triangular-array samplers are
/// constructed once.
fn simulate_path_into(
    a: f64,
    innovation: &InnovationSpec,
    n: usize,
    array_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if a == 0.0 {
        // No memory: the path is the innovation sequence itself.
        return innovation.sample_for_panel(n, array_size, rng);
    }
    if let Some(start) = stationary_start(a, innovation, rng) {
        let eps = innovation.sample_for_panel(n, array_size, rng);
        let mut path = Vec::with_capacity(n);
        let mut prev = start;
        for e in eps {
            prev = a * prev + e;
            path.push(prev);
        }
        return path;
    }
    let burn = burn_in_length(a);
    let eps = innovation.sample_for_panel(n + burn, array_size, rng);
    let mut prev = 0.0;
    let mut path = Vec::with_capacity(n);
    for (t, e) in eps.into_iter().enumerate() {
        prev = a * prev + e;
        if t >= burn {
            path.push(prev);
        }
    }
    path
}

/// Simulates one stationary AR(1) path `X(t) = a X(t-1) + z(t)`.
///
/// The start is drawn exactly from the stationary law for Gaussian and
/// symmetric stable innovations; other innovations get a geometric burn-in
/// of length `ceil(log(1e-12) / log(a))`, capped at 1e6 steps.
pub fn simulate_ar1(
    a: f64,
    innovation: &InnovationSpec,
    n: usize,
    stream: Stream,
) -> Result<Vec<f64>> {
    innovation.validate()?;
    require(
        (0.0..1.0).contains(&a),
        format!("autoregressive coefficient must lie in [0, 1), got {a}"),
    )?;
    require(n >= 1, "path length must be at least 1")?;
    let mut rng = stream.rng();
    Ok(simulate_path_into(a, innovation, n, 1, &mut rng))
}

/// Simulates `n_units` independent AR(1) paths of length `n`, drawing one
/// coefficient per unit from the mixing law.
///
/// Unit `i` consumes the sub-stream `stream.path(i)` and the coefficients a
/// reserved lane, so the panel is reproducible from `(master, replicate)`
/// alone and invariant to worker count.
pub fn simulate_panel(
    mixing: &MixingSpec,
    innovation: &InnovationSpec,
    n_units: usize,
    n: usize,
    stream: Stream,
) -> Result<Panel> {
    mixing.validate()?;
    innovation.validate()?;
    require(
        n_units >= 1 && n >= 1,
        "panel dimensions must be at least 1",
    )?;
    let cells = (n_units as u64)
        .checked_mul(n as u64)
        .filter(|c| *c <= cell_cap())
        .ok_or_else(|| {
            Error::ResourceCap(format!(
                "panel of {n_units} x {n} cells exceeds the configured cap of {} cells",
                cell_cap()
            ))
        })?;
    let mut coeffs = mixing.sample_coeff(n_units, stream.path(COEFF_LANE))?;
    let mut clipped = 0usize;
    for a in &mut coeffs {
        if *a > COEFF_CAP {
            *a = COEFF_CAP;
            clipped += 1;
        }
    }
    let paths = parallel_map(n_units, |i| {
        let mut rng = stream.path(i as u64).rng();
        simulate_path_into(coeffs[i], innovation, n, n_units, &mut rng)
    });
    let mut values = Vec::with_capacity(cells as usize);
    for path in paths {
        values.extend_from_slice(&path);
    }
    Ok(Panel {
        values,
        rows: n_units,
        cols: n,
        coeffs,
        innovation: innovation.clone(),
        mixing: mixing.clone(),
        master_seed: stream.master,
        replicate: stream.replicate,
        clipped,
    })
}

/// Contemporaneously aggregates a panel: `N^(-exponent) * sum_i X_i(t)`.
///
/// The scheme must match the innovation family: `FiniteVariance` needs a
/// finite innovation variance, `Stable` needs a stable or heavy-tailed
/// innovation, and `DegenerateCheck` additionally reads the mixing tail
/// exponent beta.
pub fn aggregate(panel: &Panel, scheme: AggregationScheme) -> Result<AggregatedSeries> {
    let exponent = match scheme {
        AggregationScheme::FiniteVariance => {
            require(
                panel.innovation.variance().is_some(),
                "finite-variance aggregation requires an innovation with a finite variance",
            )?;
            0.5
        }
        AggregationScheme::Stable => match panel.innovation {
            InnovationSpec::Stable { alpha, .. }
            | InnovationSpec::DomainAttraction { alpha, .. } => 1.0 / alpha,
            _ => {
                return Err(Error::invalid(
                    "stable aggregation requires a stable or heavy-tailed innovation",
                ))
            }
        },
        AggregationScheme::DegenerateCheck => {
            let alpha = panel.innovation.stable_index().ok_or_else(|| {
                Error::invalid(
                    "degenerate-check aggregation requires an innovation with a stability index",
                )
            })?;
            let beta = panel.mixing.tail_exponent()?;
            1.0 / (alpha * (1.0 + beta))
        }
    };
    let norm = (panel.rows as f64).powf(exponent);
    let values = panel.column_sums().into_iter().map(|s| s / norm).collect();
    Ok(AggregatedSeries {
        values,
        exponent,
        scheme,
    })
}

/// Joint temporal and contemporaneous sums `S(tau) = sum_i sum_{t <= [n tau]}
/// X_i(t)`, unnormalized, one per requested fraction.
///
/// The caller applies the regime-specific normalization from [`growth_case`].
pub fn joint_sum(panel: &Panel, tau_grid: &[f64]) -> Result<Vec<f64>> {
    require(!tau_grid.is_empty(), "fraction grid must not be empty")?;
    for tau in tau_grid {
        require(
            *tau > 0.0 && *tau <= 1.0,
            format!("fractions must lie in (0, 1], got {tau}"),
        )?;
    }
    let col_sums = panel.column_sums();
    // prefix[m] = sum of the first m cross-sectional sums.
    let mut prefix = Vec::with_capacity(panel.cols + 1);
    let mut acc = Kahan::default();
    prefix.push(0.0);
    for s in &col_sums {
        acc.add(*s);
        prefix.push(acc.value());
    }
    Ok(tau_grid
        .iter()
        .map(|tau| {
            let exact = tau * panel.cols as f64;
            // [n tau] is a mathematical floor; round when n*tau sits within
            // fp noise of an integer so representable fractions land exactly.
            let m = if (exact - exact.round()).abs() < 1e-9 * panel.cols as f64 {
                exact.round() as usize
            } else {
                exact.floor() as usize
            };
            prefix[m.min(panel.cols)]
        })
        .collect())
}

/// Classifies the relative growth of `N` and `n` via the finite-sample ratio
/// `mu = N^(1/(1+beta)) / n` and reports the matching normalization of the
/// joint sum.
///
/// The limit statement separates regimes at 0 and infinity; a finite sample
/// needs declared cutoffs, and the ratio is classified as fast when
/// `mu >= 100`, slow when `mu <= 0.01`, and intermediate otherwise.
pub fn growth_case(n_units: usize, n: usize, beta: f64) -> Result<GrowthCase> {
    require(
        n_units >= 1 && n >= 1,
        "panel dimensions must be at least 1",
    )?;
    require(
        beta > -1.0 && beta <= 1.0,
        format!("memory parameter must lie in (-1, 1], got {beta}"),
    )?;
    let mu = (n_units as f64).powf(1.0 / (1.0 + beta)) / n as f64;
    let (regime, normalization) = if mu >= 1e2 {
        (GrowthRegime::Fast, "N^(1/2) n^(1 - beta/2)")
    } else if mu <= 1e-2 {
        (GrowthRegime::Slow, "N^(1/(1+beta)) n^(1/2)")
    } else {
        (
            GrowthRegime::Intermediate,
            "N^(1/(1+beta)) n^(1/2), mu retained in the limit",
        )
    };
    Ok(GrowthCase {
        regime,
        mu,
        normalization: normalization.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::stable_cf;
    use crate::rng::set_workers;

    fn gaussian() -> InnovationSpec {
        InnovationSpec::Gaussian { sigma: 1.0 }
    }

    #[test]
    fn zero_coefficient_path_is_the_innovation_sequence() {
        let stream = Stream::new(11).replicate(0).path(0);
        let path = simulate_ar1(0.0, &gaussian(), 257, stream).unwrap();
        let inno = gaussian().sample(257, stream).unwrap();
        assert_eq!(path, inno);
    }

    #[test]
    fn lag_one_autocorrelation_matches_coefficient() {
        let n = 100_000;
        let x = simulate_ar1(0.9, &gaussian(), n, Stream::new(3)).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let rho = c1 / c0;
        assert!((rho - 0.9).abs() < 0.01, "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn stationary_variance_matches_closed_form() {
        let n = 100_000;
        let x = simulate_ar1(0.5, &gaussian(), n, Stream::new(5)).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let target = 4.0 / 3.0;
        assert!(
            (var - target).abs() < 0.02 * target,
            "variance {var} vs {target}"
        );
    }

    #[test]
    fn symmetric_stable_path_has_the_stationary_marginal() {
        // Exact stationary start: the marginal of every X(t) is symmetric
        // stable with scale (1 - a^alpha)^(-1/alpha). Check the empirical
        // characteristic function of one long path against the closed form.
        let (alpha, a, n) = (1.5, 0.6, 200_000);
        let spec = InnovationSpec::Stable {
            alpha,
            skew: 0.0,
            scale: 1.0,
        };
        let x = simulate_ar1(a, &spec, n, Stream::new(7)).unwrap();
        let scale = (1.0 - a.powf(alpha)).powf(-1.0 / alpha);
        for theta in [0.3, 0.7, 1.2] {
            let mut re = Kahan::default();
            for v in &x {
                re.add((theta * v).cos());
            }
            let ecf = re.value() / n as f64;
            let target = stable_cf(theta, alpha, 0.0, scale).unwrap().re;
            assert!(
                (ecf - target).abs() < 0.05,
                "ecf {ecf} vs {target} at theta {theta}"
            );
        }
    }

    #[test]
    fn rejects_bad_coefficient_and_length() {
        assert!(simulate_ar1(1.0, &gaussian(), 10, Stream::new(0)).is_err());
        assert!(simulate_ar1(-0.1, &gaussian(), 10, Stream::new(0)).is_err());
        assert!(simulate_ar1(0.5, &gaussian(), 0, Stream::new(0)).is_err());
    }

    #[test]
    fn burn_in_length_is_geometric_and_capped() {
        assert_eq!(burn_in_length(0.0), 0);
        assert_eq!(burn_in_length(0.5), 40);
        assert_eq!(burn_in_length(COEFF_CAP), 1_000_000);
    }

    #[test]
    fn burn_in_families_produce_stationary_looking_paths() {
        // Heavy-tailed innovations take the burn-in route; the path must be
        // finite and deterministic.
        let spec = InnovationSpec::DomainAttraction {
            alpha: 1.8,
            tail_const: 1.0,
        };
        let a = simulate_ar1(0.9, &spec, 500, Stream::new(9)).unwrap();
        let b = simulate_ar1(0.9, &spec, 500, Stream::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_unit_panel_reduces_to_one_path() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let stream = Stream::new(21);
        let panel = simulate_panel(&mixing, &gaussian(), 1, 64, stream).unwrap();
        let path = simulate_ar1(panel.coeffs[0], &gaussian(), 64, stream.path(0)).unwrap();
        assert_eq!(panel.row(0), &path[..]);
    }

    #[test]
    fn panel_is_worker_count_invariant() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let stream = Stream::new(22);
        set_workers(1);
        let a = simulate_panel(&mixing, &gaussian(), 64, 32, stream).unwrap();
        set_workers(8);
        let b = simulate_panel(&mixing, &gaussian(), 64, 32, stream).unwrap();
        set_workers(0);
        assert_eq!(a.values, b.values);
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn oversized_panel_hits_the_resource_cap() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let err =
            simulate_panel(&mixing, &gaussian(), 1 << 20, 1 << 20, Stream::new(0)).unwrap_err();
        assert!(matches!(err, Error::ResourceCap(_)), "{err}");
    }

    #[test]
    fn aggregate_of_single_unit_is_the_path() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let panel = simulate_panel(&mixing, &gaussian(), 1, 50, Stream::new(23)).unwrap();
        let agg = aggregate(&panel, AggregationScheme::FiniteVariance).unwrap();
        assert_eq!(agg.exponent, 0.5);
        assert_eq!(agg.values, panel.row(0).to_vec());
    }

    #[test]
    fn aggregate_rejects_scheme_innovation_mismatch() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let gauss_panel = simulate_panel(&mixing, &gaussian(), 4, 8, Stream::new(24)).unwrap();
        assert!(aggregate(&gauss_panel, AggregationScheme::Stable).is_err());

        let stable = InnovationSpec::Stable {
            alpha: 1.5,
            skew: 0.0,
            scale: 1.0,
        };
        let stable_panel = simulate_panel(&mixing, &stable, 4, 8, Stream::new(24)).unwrap();
        assert!(aggregate(&stable_panel, AggregationScheme::FiniteVariance).is_err());
        let agg = aggregate(&stable_panel, AggregationScheme::Stable).unwrap();
        assert!((agg.exponent - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn aggregation_is_linear() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let pa = simulate_panel(&mixing, &gaussian(), 32, 40, Stream::new(25)).unwrap();
        let pb = simulate_panel(&mixing, &gaussian(), 32, 40, Stream::new(26)).unwrap();
        let mut sum_panel = pa.clone();
        for (v, w) in sum_panel.values.iter_mut().zip(&pb.values) {
            *v += w;
        }
        let agg_sum = aggregate(&sum_panel, AggregationScheme::FiniteVariance).unwrap();
        let aa = aggregate(&pa, AggregationScheme::FiniteVariance).unwrap();
        let ab = aggregate(&pb, AggregationScheme::FiniteVariance).unwrap();
        for t in 0..40 {
            assert!((agg_sum.values[t] - (aa.values[t] + ab.values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_check_aggregate_is_nearly_time_constant() {
        // Summable mixing density near 1 (beta = -0.5) with symmetric stable
        // innovations: under N^(1/(alpha(1+beta))) the aggregate converges
        // to a random variable constant in t, so values 10 lags apart are
        // almost perfectly correlated across replicates.
        let mixing = MixingSpec::canonical_reg_var(-0.5).unwrap();
        let spec = InnovationSpec::Stable {
            alpha: 1.5,
            skew: 0.0,
            scale: 1.0,
        };
        let reps = 200;
        let pairs: Vec<(f64, f64)> = parallel_map(reps, |r| {
            let stream = Stream::new(27).replicate(r as u64);
            let panel = simulate_panel(&mixing, &spec, 4000, 16, stream).unwrap();
            let agg = aggregate(&panel, AggregationScheme::DegenerateCheck).unwrap();
            assert!((agg.exponent - 4.0 / 3.0).abs() < 1e-15);
            (agg.values[2], agg.values[12])
        });
        let n = reps as f64;
        let (mx, my) = pairs
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
        let (mx, my) = (mx / n, my / n);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (x, y) in &pairs {
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
            sxy += (x - mx) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr >= 0.9, "correlation across replicates {corr}");
    }

    #[test]
    fn joint_sum_of_single_unit_is_the_partial_sum() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let panel = simulate_panel(&mixing, &gaussian(), 1, 100, Stream::new(28)).unwrap();
        let s = joint_sum(&panel, &[1.0]).unwrap();
        let direct: f64 = panel.row(0).iter().sum();
        assert!((s[0] - direct).abs() < 1e-10);
    }

    #[test]
    fn joint_sum_increments_are_block_sums() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let panel = simulate_panel(&mixing, &gaussian(), 16, 100, Stream::new(29)).unwrap();
        let s = joint_sum(&panel, &[0.3, 0.8]).unwrap();
        let mut block = 0.0;
        for i in 0..16 {
            for t in 30..80 {
                block += panel.row(i)[t];
            }
        }
        assert!(
            (s[1] - s[0] - block).abs() < 1e-9,
            "{} vs {block}",
            s[1] - s[0]
        );
    }

    #[test]
    fn joint_sum_rejects_bad_fractions() {
        let mixing = MixingSpec::beta_type(1.0, 1.5).unwrap();
        let panel = simulate_panel(&mixing, &gaussian(), 2, 10, Stream::new(30)).unwrap();
        assert!(joint_sum(&panel, &[]).is_err());
        assert!(joint_sum(&panel, &[0.0]).is_err());
        assert!(joint_sum(&panel, &[1.1]).is_err());
    }

    #[test]
    fn growth_case_classifies_the_reference_geometries() {
        let c = growth_case(10_000, 100, 1.0).unwrap();
        assert_eq!(c.regime, GrowthRegime::Intermediate);
        assert!((c.mu - 1.0).abs() < 1e-12);

        let c = growth_case(100_000_000, 10, 0.0).unwrap();
        assert_eq!(c.regime, GrowthRegime::Fast);
        assert!((c.mu - 1e7).abs() / 1e7 < 1e-12);

        let c = growth_case(10, 1_000_000, 0.0).unwrap();
        assert_eq!(c.regime, GrowthRegime::Slow);

        assert!(growth_case(10, 10, 1.5).is_err());
        assert!(growth_case(10, 10, -1.0).is_err());
    }

    #[test]
    fn coefficient_clipping_is_counted() {
        // A mixing table concentrated at the right edge forces clips.
        let xs = vec![0.0, 1.0 - 5e-13, 1.0 - 1e-13];
        let phis = vec![0.0, 0.0, 5e12];
        let mixing = MixingSpec::tabulated(xs, phis, Some((1.0, 0.5))).unwrap();
        let panel = simulate_panel(&mixing, &gaussian(), 64, 4, Stream::new(31)).unwrap();
        assert!(panel.clipped > 0);
        assert!(panel.coeffs.iter().all(|a| *a <= COEFF_CAP));
    }
}
