//! Innovation samplers and their characteristic functions.
//!
//! Four families drive the simulations: Gaussian noise, alpha-stable noise,
//! a symmetrized Pareto law lying in a stable domain of attraction, and
//! infinitely divisible triangular arrays built from a Levy triplet. The
//! stable characteristic function is exposed exactly so Monte Carlo output
//! can be tested against it.
//!
//! Everything is pure given a [`Stream`]; identical keys give bit-identical
//! vectors regardless of worker count.

use crate::error::{require, Result};
use crate::rng::{parallel_map, Stream};
use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Default small-jump threshold for the triangular-array construction:
/// jumps below this size are folded into the Gaussian part with matched
/// variance.
pub const DEFAULT_SMALL_JUMP_EPS: f64 = 1e-3;

/// Jump measure of an infinitely divisible law: a two-sided power density
/// near the origin plus an optional finite set of atoms beyond the cutoff.
///
/// The power part is pi(dx) = c_plus alpha0 x^(-alpha0-1) dx on (0, cutoff)
/// and its mirror image with c_minus on (-cutoff, 0), which realizes the
/// small-jump tail limits x^alpha0 pi(x, inf) -> c_plus and
/// x^alpha0 pi(-inf, -x) -> c_minus exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevySmallJumpSpec {
    /// Small-jump exponent in (0, 2).
    pub alpha0: f64,
    /// Right-tail amplitude, >= 0.
    pub c_plus: f64,
    /// Left-tail amplitude, >= 0.
    pub c_minus: f64,
    /// Upper bound of the power part, in (0, 1].
    pub cutoff: f64,
    /// Atoms (position, mass) with |position| >= cutoff; may be empty.
    #[serde(default)]
    pub big_jump_tail: Vec<(f64, f64)>,
}

impl LevySmallJumpSpec {
    pub fn validate(&self) -> Result<()> {
        require(
            self.alpha0 > 0.0 && self.alpha0 < 2.0,
            format!(
                "small-jump exponent must lie in (0, 2), got {}",
                self.alpha0
            ),
        )?;
        require(
            self.c_plus >= 0.0 && self.c_minus >= 0.0,
            "tail amplitudes must be nonnegative",
        )?;
        // A measure with no power part must still carry some mass: allow
        // c_plus = c_minus = 0 only when atoms are present.
        require(
            self.c_plus + self.c_minus > 0.0 || !self.big_jump_tail.is_empty(),
            "jump measure is empty: needs a power part or atoms",
        )?;
        require(
            self.cutoff > 0.0 && self.cutoff <= 1.0,
            format!("cutoff must lie in (0, 1], got {}", self.cutoff),
        )?;
        for &(x, m) in &self.big_jump_tail {
            require(
                x.is_finite() && x.abs() >= self.cutoff,
                format!(
                    "atom position {x} must lie beyond the cutoff {}",
                    self.cutoff
                ),
            )?;
            require(
                m > 0.0 && m.is_finite(),
                format!("atom mass must be positive, got {m}"),
            )?;
        }
        Ok(())
    }

    /// Total second moment int x^2 pi(dx); finite for every valid spec.
    pub fn second_moment(&self) -> f64 {
        let power =
            (self.c_plus + self.c_minus) * self.alpha0 * self.cutoff.powf(2.0 - self.alpha0)
                / (2.0 - self.alpha0);
        let atoms: f64 = self.big_jump_tail.iter().map(|&(x, m)| x * x * m).sum();
        power + atoms
    }

    /// Mass pi(|x| >= eps) kept as explicit compound-Poisson jumps.
    pub fn intensity_beyond(&self, eps: f64) -> f64 {
        let e = eps.min(self.cutoff);
        let power =
            (self.c_plus + self.c_minus) * (e.powf(-self.alpha0) - self.cutoff.powf(-self.alpha0));
        let atoms: f64 = self
            .big_jump_tail
            .iter()
            .filter(|&&(x, _)| x.abs() >= eps)
            .map(|&(_, m)| m)
            .sum();
        power + atoms
    }

    /// Variance substituted for the removed small jumps,
    /// int_{|x| < eps} x^2 pi(dx).
    pub fn small_jump_variance(&self, eps: f64) -> f64 {
        let e = eps.min(self.cutoff);
        (self.c_plus + self.c_minus) * self.alpha0 * e.powf(2.0 - self.alpha0) / (2.0 - self.alpha0)
    }

    /// Compensator mean int_{eps <= |x| <= 1} x pi(dx). Jumps beyond 1 are
    /// uncompensated, matching the usual truncation convention in the
    /// characteristic exponent.
    pub fn compensator_mean(&self, eps: f64) -> f64 {
        let e = eps.min(self.cutoff);
        let power = if e < self.cutoff {
            let diff = if (self.alpha0 - 1.0).abs() < 1e-12 {
                (self.cutoff / e).ln()
            } else {
                (self.cutoff.powf(1.0 - self.alpha0) - e.powf(1.0 - self.alpha0))
                    / (1.0 - self.alpha0)
            };
            (self.c_plus - self.c_minus) * self.alpha0 * diff
        } else {
            0.0
        };
        let atoms: f64 = self
            .big_jump_tail
            .iter()
            .filter(|&&(x, _)| x.abs() >= eps && x.abs() <= 1.0)
            .map(|&(x, m)| x * m)
            .sum();
        power + atoms
    }
}

/// Precomputed sampler for the restriction of a jump measure to
/// |x| >= eps, normalized to a probability law.
struct JumpSampler {
    alpha0: f64,
    eps_pow: f64,
    cutoff_pow: f64,
    lam_plus: f64,
    lam_minus: f64,
    /// (position, cumulative mass) of eligible atoms.
    atom_cum: Vec<(f64, f64)>,
    total: f64,
}

impl JumpSampler {
    fn new(levy: &LevySmallJumpSpec, eps: f64) -> Self {
        let e = eps.min(levy.cutoff);
        let eps_pow = e.powf(-levy.alpha0);
        let cutoff_pow = levy.cutoff.powf(-levy.alpha0);
        let tail = eps_pow - cutoff_pow;
        let lam_plus = levy.c_plus * tail;
        let lam_minus = levy.c_minus * tail;
        let mut atom_cum = Vec::new();
        let mut acc = 0.0;
        for &(x, m) in levy.big_jump_tail.iter().filter(|&&(x, _)| x.abs() >= eps) {
            acc += m;
            atom_cum.push((x, acc));
        }
        let total = lam_plus + lam_minus + acc;
        JumpSampler {
            alpha0: levy.alpha0,
            eps_pow,
            cutoff_pow,
            lam_plus,
            lam_minus,
            atom_cum,
            total,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.sample::<f64, _>(Open01) * self.total;
        if u < self.lam_plus + self.lam_minus {
            let sign = if u < self.lam_plus { 1.0 } else { -1.0 };
            // Inverse of the truncated power tail on (eps, cutoff).
            let v: f64 = rng.sample(Open01);
            let inv = v * self.eps_pow + (1.0 - v) * self.cutoff_pow;
            sign * inv.powf(-1.0 / self.alpha0)
        } else {
            let rest = u - self.lam_plus - self.lam_minus;
            self.atom_cum
                .iter()
                .find(|&&(_, cum)| rest < cum)
                .or(self.atom_cum.last())
                .map_or(0.0, |&(x, _)| x)
        }
    }
}

/// Levy triplet (drift, Gaussian standard deviation, jump measure) of an
/// infinitely divisible innovation law. A missing jump part means a purely
/// Gaussian law with drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdTriplet {
    pub mu: f64,
    pub sigma: f64,
    #[serde(default)]
    pub levy: Option<LevySmallJumpSpec>,
}

impl IdTriplet {
    pub fn validate(&self) -> Result<()> {
        require(self.mu.is_finite(), "drift must be finite")?;
        require(
            self.sigma >= 0.0 && self.sigma.is_finite(),
            format!(
                "Gaussian part must be a nonnegative stddev, got {}",
                self.sigma
            ),
        )?;
        if let Some(levy) = &self.levy {
            levy.validate()?;
        }
        Ok(())
    }

    /// Variance of the full law W: sigma^2 + int x^2 pi(dx).
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.levy.as_ref().map_or(0.0, |l| l.second_moment())
    }
}

/// Innovation distribution of the micro-level AR(1) equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InnovationSpec {
    /// Centered Gaussian noise with standard deviation `sigma` > 0.
    Gaussian { sigma: f64 },
    /// Alpha-stable law; `alpha` = 2 degenerates to a Gaussian with
    /// variance 2 scale^2. Characteristic function in [`stable_cf`].
    Stable { alpha: f64, skew: f64, scale: f64 },
    /// Symmetrized Pareto with P(|x| > t) = tail_const * t^(-alpha) for
    /// t >= tail_const^(1/alpha); lies in the domain of attraction of the
    /// symmetric alpha-stable law with scale [`stable_domain_scale`].
    DomainAttraction { alpha: f64, tail_const: f64 },
    /// Triangular-array innovations: each draw is the N-th convolution root
    /// of the infinitely divisible law given by the triplet.
    IdTriplet(IdTriplet),
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InnovationSpec::Gaussian { sigma } => require(
                *sigma > 0.0 && sigma.is_finite(),
                format!("stddev must be positive, got {sigma}"),
            ),
            InnovationSpec::Stable { alpha, skew, scale } => {
                require(
                    *alpha > 0.0 && *alpha <= 2.0,
                    format!("stable index must lie in (0, 2], got {alpha}"),
                )?;
                require(
                    skew.abs() <= 1.0,
                    format!("skewness must lie in [-1, 1], got {skew}"),
                )?;
                require(
                    *scale > 0.0 && scale.is_finite(),
                    format!("scale must be positive, got {scale}"),
                )
            }
            InnovationSpec::DomainAttraction { alpha, tail_const } => {
                require(
                    *alpha > 0.0 && *alpha < 2.0,
                    format!("tail index must lie in (0, 2), got {alpha}"),
                )?;
                require(
                    *tail_const > 0.0 && tail_const.is_finite(),
                    format!("tail constant must be positive, got {tail_const}"),
                )
            }
            InnovationSpec::IdTriplet(t) => t.validate(),
        }
    }

    /// Variance of one innovation, when finite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            InnovationSpec::Gaussian { sigma } => Some(sigma * sigma),
            InnovationSpec::Stable { alpha, scale, .. } => {
                (*alpha == 2.0).then(|| 2.0 * scale * scale)
            }
            InnovationSpec::DomainAttraction { .. } => None,
            InnovationSpec::IdTriplet(t) => Some(t.variance()),
        }
    }

    /// Stability index relevant for aggregation normalization: 2 for
    /// Gaussian, alpha for the stable and domain-of-attraction families,
    /// none for triangular arrays (their scaling is chosen by the caller).
    pub fn stable_index(&self) -> Option<f64> {
        match self {
            InnovationSpec::Gaussian { .. } => Some(2.0),
            InnovationSpec::Stable { alpha, .. } => Some(*alpha),
            InnovationSpec::DomainAttraction { alpha, .. } => Some(*alpha),
            InnovationSpec::IdTriplet(_) => None,
        }
    }

    /// Draws `n` i.i.d. innovations. Triangular-array specs are sampled at
    /// array size 1, i.e. from the full infinitely divisible law (small
    /// jumps Gaussian-substituted below [`DEFAULT_SMALL_JUMP_EPS`]).
    pub fn sample(&self, n: usize, stream: Stream) -> Result<Vec<f64>> {
        self.validate()?;
        require(n >= 1, "sample count must be at least 1")?;
        let mut rng = stream.rng();
        Ok(self.sample_into(n, 1, &mut rng))
    }

    /// Draws `n` innovations for one series of a panel with `array_size`
    /// series. Only triangular arrays depend on the panel size.
    pub(crate) fn sample_for_panel(
        &self,
        n: usize,
        array_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        self.sample_into(n, array_size, rng)
    }

    fn sample_into(&self, n: usize, array_size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            InnovationSpec::Gaussian { sigma } => (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    sigma * z
                })
                .collect(),
            InnovationSpec::Stable { alpha, skew, scale } => (0..n)
                .map(|_| stable_draw(*alpha, *skew, *scale, rng))
                .collect(),
            InnovationSpec::DomainAttraction { alpha, tail_const } => {
                let s = tail_const.powf(1.0 / alpha);
                (0..n)
                    .map(|_| s * pareto_symmetric_draw(*alpha, rng))
                    .collect()
            }
            InnovationSpec::IdTriplet(t) => {
                let sampler = IdRootSampler::new(t, array_size);
                (0..n).map(|_| sampler.draw(rng)).collect()
            }
        }
    }
}

/// `n` i.i.d. N(0, sigma^2) draws.
pub fn sample_gaussian(sigma: f64, n: usize, stream: Stream) -> Result<Vec<f64>> {
    require(
        sigma > 0.0 && sigma.is_finite(),
        format!("stddev must be positive, got {sigma}"),
    )?;
    require(n >= 1, "sample count must be at least 1")?;
    InnovationSpec::Gaussian { sigma }.sample(n, stream)
}

/// `n` i.i.d. draws of the alpha-stable law whose characteristic function is
/// [`stable_cf`], via the Chambers-Mallows-Stuck transformation.
pub fn sample_stable(
    alpha: f64,
    skew: f64,
    scale: f64,
    n: usize,
    stream: Stream,
) -> Result<Vec<f64>> {
    let spec = InnovationSpec::Stable { alpha, skew, scale };
    spec.validate()?;
    require(n >= 1, "sample count must be at least 1")?;
    spec.sample(n, stream)
}

/// Characteristic function of the alpha-stable law at frequency `theta`.
///
/// For alpha != 1 the exponent is
///   -(scale |theta|)^alpha (1 - i skew sign(theta) tan(pi alpha / 2)),
/// and at alpha = 1
///   -scale |theta| (1 + i skew (2/pi) sign(theta) ln |theta|).
/// These are the laws produced by [`sample_stable`].
pub fn stable_cf(theta: f64, alpha: f64, skew: f64, scale: f64) -> Result<Complex64> {
    InnovationSpec::Stable { alpha, skew, scale }.validate()?;
    if theta == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let sign = theta.signum();
    let at = (scale * theta.abs()).powf(alpha);
    let exponent = if alpha == 1.0 {
        let re = -scale * theta.abs();
        Complex64::new(
            re,
            re * skew * std::f64::consts::FRAC_2_PI * sign * theta.abs().ln(),
        )
    } else {
        Complex64::new(-at, at * skew * sign * tan_half_pi(alpha))
    };
    Ok(exponent.exp())
}

/// tan(pi alpha / 2) with the alpha = 2 case pinned to exactly zero (the
/// Gaussian boundary has no skewness term).
fn tan_half_pi(alpha: f64) -> f64 {
    if alpha == 2.0 {
        0.0
    } else {
        (std::f64::consts::FRAC_PI_2 * alpha).tan()
    }
}

/// One standard stable draw (unit scale) by the Chambers-Mallows-Stuck
/// transformation of a uniform angle and an exponential variate.
pub(crate) fn stable_draw(alpha: f64, skew: f64, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.sample(Open01);
    let u = (v - 0.5) * std::f64::consts::PI; // uniform on (-pi/2, pi/2)
    let e: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let x = ((half_pi + skew * u) * u.tan()
            - skew * ((half_pi * e * u.cos()) / (half_pi + skew * u)).ln())
            / half_pi;
        scale * x + skew * scale * scale.ln() * std::f64::consts::FRAC_2_PI
    } else {
        let t = skew * tan_half_pi(alpha);
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(0.5 / alpha);
        let x = s * (alpha * (u + b)).sin() / u.cos().powf(1.0 / alpha)
            * ((u - alpha * (u + b)).cos() / e).powf((1.0 - alpha) / alpha);
        scale * x
    }
}

/// `n` i.i.d. symmetrized unit-Pareto draws: P(|x| > t) = t^(-alpha) for
/// t >= 1, symmetric signs. Partial sums normalized by N^(1/alpha) converge
/// to the symmetric stable law with scale [`stable_domain_scale`].
pub fn sample_domain_attraction(alpha: f64, n: usize, stream: Stream) -> Result<Vec<f64>> {
    require(
        alpha > 0.0 && alpha < 2.0,
        format!("tail index must lie in (0, 2), got {alpha}"),
    )?;
    require(n >= 1, "sample count must be at least 1")?;
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| pareto_symmetric_draw(alpha, &mut rng))
        .collect())
}

fn pareto_symmetric_draw(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.sample(Open01);
    let mag = u.powf(-1.0 / alpha);
    let sign: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    sign * mag
}

/// Scale of the symmetric alpha-stable limit of N^(-1/alpha) partial sums of
/// i.i.d. symmetric draws with tail P(|x| > t) ~ tail_const * t^(-alpha):
/// scale^alpha = tail_const * Gamma(2 - alpha) cos(pi alpha / 2) / (1 - alpha),
/// continuously extended by tail_const * pi / 2 at alpha = 1.
pub fn stable_domain_scale(alpha: f64, tail_const: f64) -> Result<f64> {
    require(
        alpha > 0.0 && alpha < 2.0,
        format!("tail index must lie in (0, 2), got {alpha}"),
    )?;
    require(tail_const > 0.0, "tail constant must be positive")?;
    let c_alpha = if (alpha - 1.0).abs() < 1e-9 {
        std::f64::consts::FRAC_PI_2
    } else {
        statrs::function::gamma::gamma(2.0 - alpha) * (std::f64::consts::FRAC_PI_2 * alpha).cos()
            / (1.0 - alpha)
    };
    Ok((tail_const * c_alpha).powf(1.0 / alpha))
}

/// Sampler for the N-th convolution root of a triplet's law: scaled drift
/// and Gaussian parts plus a thinned compound-Poisson jump part, with jumps
/// below the threshold replaced by extra Gaussian variance. Built once per
/// generation run; drawing is then constant work plus one jump loop.
struct IdRootSampler {
    shift: f64,
    sd: f64,
    poisson: Option<(rand_distr::Poisson<f64>, JumpSampler)>,
}

impl IdRootSampler {
    fn new(t: &IdTriplet, array_size: usize) -> Self {
        let nf = array_size as f64;
        let eps = DEFAULT_SMALL_JUMP_EPS;
        let (v_eps, m_eps, lambda) = t.levy.as_ref().map_or((0.0, 0.0, 0.0), |l| {
            (
                l.small_jump_variance(eps),
                l.compensator_mean(eps),
                l.intensity_beyond(eps),
            )
        });
        let shift = (t.mu - m_eps) / nf;
        let sd = ((t.sigma * t.sigma + v_eps) / nf).sqrt();
        let poisson = t.levy.as_ref().filter(|_| lambda > 0.0).map(|levy| {
            (
                rand_distr::Poisson::new(lambda / nf).expect("positive intensity"),
                JumpSampler::new(levy, eps),
            )
        });
        IdRootSampler { shift, sd, poisson }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let mut x = self.shift;
        if self.sd > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            x += self.sd * z;
        }
        if let Some((pois, jumps)) = &self.poisson {
            let k = pois.sample(rng) as u64;
            for _ in 0..k {
                x += jumps.draw(rng);
            }
        }
        x
    }
}

/// Matrix of triangular-array innovations: `n` rows, each holding the
/// `array_size` i.i.d. draws of the convolution root used at one time step.
/// Rows are generated on independent derived streams, so output does not
/// depend on worker count.
pub fn sample_id_array(
    spec: &IdTriplet,
    array_size: usize,
    n: usize,
    stream: Stream,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    require(array_size >= 1, "array size must be at least 1")?;
    require(n >= 1, "length must be at least 1")?;
    let sampler = IdRootSampler::new(spec, array_size);
    Ok(parallel_map(n, |row| {
        let mut rng = stream.path(row as u64).rng();
        (0..array_size).map(|_| sampler.draw(&mut rng)).collect()
    }))
}
