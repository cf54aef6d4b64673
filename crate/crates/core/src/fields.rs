//! Nearest-neighbor autoregressive random fields on the planar lattice.
//!
//! Three stencils are supported: a two-neighbor quarter-plane scheme (`2n`),
//! a three-neighbor half-plane scheme (`3n`), and the balanced four-neighbor
//! scheme (`4n`). Each field solves
//!
//! ```text
//! X(t, s) = A * sum_steps p(u, v) X((t, s) - (u, v)) + zeta(t, s)
//! ```
//!
//! with a random radial coefficient `A` drawn once per unit from a mixing
//! density on [0, 1). The stationary solution is the moving average of the
//! innovations against the Green function of the killed nearest-neighbor
//! walk, `g(t, s, a) = sum_k a^k p_k(t, s)`, and panels aggregate `N` units
//! with the `N^(-1/alpha)` normalization matching the innovations' stable
//! index. Green tables, walk probabilities, the spectral density of the
//! aggregated field, and the anisotropic scaling exponents are computed
//! here; everything is deterministic given a [`Stream`] key.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::innovations::InnovationSpec;
use crate::mixing::{farima_norm, MixingSpec};
use crate::numeric::quad::tanh_sinh_sing;
use crate::numeric::special::ln_beta;
use crate::numeric::Kahan;
use crate::rng::{parallel_map, Stream};
use statrs::function::gamma::ln_gamma;

/// Coefficients at or above this value are clipped before simulation and the
/// clip count is reported on the panel. The halo a unit needs grows like
/// log(tol) / log(a), which is unbounded as a -> 1; the cap trades a bias of
/// at most the mixing mass above 1 - 1e-3 for a bounded window.
pub const FIELD_COEFF_CAP: f64 = 1.0 - 1e-3;

/// Hard cap on the number of Green series terms a table may request.
pub const MAX_GREEN_TERMS: usize = 65_536;

/// Soft cap on series terms in simulation. Unlike tables, a simulated unit
/// truncates here and reports the shortfall through `mass_deficit` instead
/// of failing, so panels with clipped near-unit-root units stay usable.
pub const MAX_SIM_TERMS: usize = 4_096;

/// Cell cap for any single lattice window (tables and padded field buffers).
const MAX_WINDOW_CELLS: usize = 1 << 24;

/// Cap on cells x series terms x stencil size for one operation.
const WORK_CAP: u128 = 1 << 37;

/// Reserved stream lane for coefficient draws; unit lanes count from 0.
const COEFF_LANE: u64 = u64::MAX;

const QUAD_REL: f64 = 1e-11;
const QUAD_ABS: f64 = 1e-14;

/// Which nearest-neighbor stencil drives the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldVariant {
    /// X(t-1, s) and X(t, s-1), weight 1/2 each.
    #[serde(rename = "2n")]
    TwoN,
    /// X(t-1, s), X(t, s+1), X(t, s-1), weight 1/3 each.
    #[serde(rename = "3n")]
    ThreeN,
    /// All four axis neighbors, weight 1/4 each.
    #[serde(rename = "4n")]
    FourN,
}

impl FieldVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldVariant::TwoN => "2n",
            FieldVariant::ThreeN => "3n",
            FieldVariant::FourN => "4n",
        }
    }
}

const HALF: f64 = 0.5;
const THIRD: f64 = 1.0 / 3.0;
const QUARTER: f64 = 0.25;

static STEPS_2N: [((i64, i64), f64); 2] = [((1, 0), HALF), ((0, 1), HALF)];
static STEPS_3N: [((i64, i64), f64); 3] = [((1, 0), THIRD), ((0, 1), THIRD), ((0, -1), THIRD)];
static STEPS_4N: [((i64, i64), f64); 4] = [
    ((1, 0), QUARTER),
    ((-1, 0), QUARTER),
    ((0, 1), QUARTER),
    ((0, -1), QUARTER),
];

/// Step distribution of the variant's nearest-neighbor walk, as
/// `((dt, ds), probability)` pairs.
pub fn step_probs(variant: FieldVariant) -> &'static [((i64, i64), f64)] {
    match variant {
        FieldVariant::TwoN => &STEPS_2N,
        FieldVariant::ThreeN => &STEPS_3N,
        FieldVariant::FourN => &STEPS_4N,
    }
}

/// Square window of values indexed by signed offsets `|t|, |s| <= radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    radius: usize,
    values: Vec<f64>,
}

impl LatticeWindow {
    fn zeros(radius: usize) -> Self {
        let side = 2 * radius + 1;
        LatticeWindow {
            radius,
            values: vec![0.0; side * side],
        }
    }

    fn delta(radius: usize) -> Self {
        let mut w = LatticeWindow::zeros(radius);
        let c = radius * (2 * radius + 1) + radius;
        w.values[c] = 1.0;
        w
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Value at signed offset `(t, s)`; zero outside the window.
    pub fn get(&self, t: i64, s: i64) -> f64 {
        let r = self.radius as i64;
        if t.abs() > r || s.abs() > r {
            return 0.0;
        }
        let side = 2 * self.radius + 1;
        self.values[(t + r) as usize * side + (s + r) as usize]
    }

    fn set(&mut self, t: i64, s: i64, v: f64) {
        let r = self.radius as i64;
        let side = 2 * self.radius + 1;
        self.values[(t + r) as usize * side + (s + r) as usize] = v;
    }

    /// Compensated sum of all entries.
    pub fn sum(&self) -> f64 {
        let mut acc = Kahan::new();
        for &v in &self.values {
            acc.add(v);
        }
        acc.value()
    }

    /// Row-major backing slice, rows ordered t = -radius ..= radius.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn axpy(&mut self, c: f64, other: &LatticeWindow) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }
}

/// One convolution of the window with the step distribution, mass outside
/// the window absorbed.
fn convolve_step(win: &LatticeWindow, steps: &[((i64, i64), f64)]) -> LatticeWindow {
    let r = win.radius as i64;
    let mut out = LatticeWindow::zeros(win.radius);
    for t in -r..=r {
        for s in -r..=r {
            let mut acc = 0.0;
            for &((u, v), w) in steps {
                acc += w * win.get(t - u, s - v);
            }
            out.set(t, s, acc);
        }
    }
    out
}

fn window_caps(radius: usize, terms: usize, stencil: usize) -> Result<()> {
    let side = 2 * radius + 1;
    let cells = side * side;
    if cells > MAX_WINDOW_CELLS {
        return Err(Error::ResourceCap(format!(
            "window radius {radius} needs {cells} cells; cap is {MAX_WINDOW_CELLS}"
        )));
    }
    let work = cells as u128 * (terms as u128 + 1) * stencil as u128;
    if work > WORK_CAP {
        return Err(Error::ResourceCap(format!(
            "window radius {radius} with {terms} series terms needs {work} cell updates; cap is {WORK_CAP}"
        )));
    }
    Ok(())
}

/// k-step transition probabilities `p_k(t, s)` for k = 0..=k_max.
///
/// The window must be large enough to hold every reachable site, so the
/// returned arrays conserve mass exactly (up to accumulation error).
pub fn walk_probs(
    variant: FieldVariant,
    k_max: usize,
    radius: usize,
) -> Result<Vec<LatticeWindow>> {
    require(
        radius >= k_max,
        format!("window radius {radius} cannot hold {k_max} walk steps without leaking mass"),
    )?;
    let steps = step_probs(variant);
    window_caps(radius, k_max, steps.len())?;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(LatticeWindow::delta(radius));
    for _ in 1..=k_max {
        let next = convolve_step(out.last().expect("non-empty"), steps);
        out.push(next);
    }
    Ok(out)
}

/// Smallest K with a^(K+1) / (1 - a) <= tol, no cap applied. Saturates for
/// coefficients so close to 1 that K does not fit the callers' caps.
fn series_terms(a: f64, tol: f64) -> usize {
    debug_assert!((0.0..1.0).contains(&a) && tol > 0.0);
    if a == 0.0 {
        return 0;
    }
    let target = tol * (1.0 - a);
    if a <= target {
        return 0;
    }
    let est = (target.ln() / a.ln() - 1.0).ceil().max(0.0);
    if est > 1e9 {
        return usize::MAX;
    }
    let mut k = est as usize;
    // Nudge against rounding in the log estimate: k must be minimal with
    // a^(k+1) <= target.
    while k > 0 && a.powi(k as i32) <= target {
        k -= 1;
    }
    while a.powi(k as i32 + 1) > target {
        k += 1;
    }
    k
}

/// Number of Green series terms needed to reach truncation error `tol`.
pub fn green_series_terms(a: f64, tol: f64) -> Result<usize> {
    require(
        (0.0..1.0).contains(&a),
        format!("coefficient must lie in [0, 1), got {a}"),
    )?;
    require(
        tol > 0.0 && tol.is_finite(),
        format!("tolerance must be positive, got {tol}"),
    )?;
    let k = series_terms(a, tol);
    if k > MAX_GREEN_TERMS {
        return Err(Error::ResourceCap(format!(
            "coefficient {a} needs more than {MAX_GREEN_TERMS} Green series terms at tolerance {tol}"
        )));
    }
    Ok(k)
}

/// Truncated Green function of the killed nearest-neighbor walk on a square
/// window, with a certified bound on the total mass it is missing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenTable {
    pub variant: FieldVariant,
    pub a: f64,
    window: LatticeWindow,
    /// Bound on series tail plus mass convolved out of the window, so that
    /// |sum of table - 1/(1-a)| <= truncation_bound.
    pub truncation_bound: f64,
    /// Series terms included (k = 0..=terms).
    pub terms: usize,
}

impl GreenTable {
    pub fn radius(&self) -> usize {
        self.window.radius()
    }

    /// g(t, s); zero outside the window.
    pub fn get(&self, t: i64, s: i64) -> f64 {
        self.window.get(t, s)
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    /// Compensated sum of the whole table; equals 1/(1-a) within
    /// `truncation_bound`.
    pub fn total_mass(&self) -> f64 {
        self.window.sum()
    }
}

/// Tabulates g(t, s, a) = sum_k a^k p_k(t, s) on the window `|t|, |s| <=
/// radius`, keeping enough terms for a series tail below `tol`.
///
/// Mass that random-walk convolution pushes beyond the window is absorbed;
/// the table tracks it per term and folds it into `truncation_bound`, so the
/// bound is honest for any window size.
pub fn green(variant: FieldVariant, a: f64, radius: usize, tol: f64) -> Result<GreenTable> {
    let terms = green_series_terms(a, tol)?;
    let steps = step_probs(variant);
    window_caps(radius, terms, steps.len())?;
    let mut p = LatticeWindow::delta(radius);
    let mut table = p.clone();
    let mut leaked = Kahan::new();
    let mut ak = 1.0;
    for _ in 1..=terms {
        p = convolve_step(&p, steps);
        ak *= a;
        table.axpy(ak, &p);
        leaked.add(ak * (1.0 - p.sum()).max(0.0));
    }
    let tail = if a == 0.0 {
        0.0
    } else {
        a.powi(terms as i32 + 1) / (1.0 - a)
    };
    Ok(GreenTable {
        variant,
        a,
        window: table,
        truncation_bound: tail + leaked.value(),
        terms,
    })
}

/// Closed-form Green function of the two-neighbor scheme:
/// g(t, s, a) = a^(t+s) C(t+s, t) 2^(-(t+s)) on the quarter plane.
pub fn green_closed_two_n(t: i64, s: i64, a: f64) -> f64 {
    if t < 0 || s < 0 {
        return 0.0;
    }
    if a == 0.0 {
        return if t == 0 && s == 0 { 1.0 } else { 0.0 };
    }
    let (tf, sf) = (t as f64, s as f64);
    let ln_choose = ln_gamma(tf + sf + 1.0) - ln_gamma(tf + 1.0) - ln_gamma(sf + 1.0);
    (ln_choose + (tf + sf) * (a / 2.0).ln()).exp()
}

/// A nearest-neighbor field specification: stencil, coefficient mixing law,
/// innovation law.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldModel {
    pub variant: FieldVariant,
    pub mixing: MixingSpec,
    pub innovation: InnovationSpec,
}

impl FieldModel {
    pub fn new(
        variant: FieldVariant,
        mixing: MixingSpec,
        innovation: InnovationSpec,
    ) -> Result<Self> {
        let model = FieldModel {
            variant,
            mixing,
            innovation,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.mixing.validate()?;
        self.innovation.validate()?;
        let alpha = self.innovation.stable_index().ok_or_else(|| {
            Error::invalid("field aggregation needs an innovation law with a definite stable index")
        })?;
        require(
            alpha > 1.0 && alpha <= 2.0,
            format!(
                "innovation stable index must lie in (1, 2] for field aggregation, got {alpha}"
            ),
        )
    }
}

/// One simulated unit field over its observation window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSample {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` observation window.
    pub values: Vec<f64>,
    /// Radial coefficient the unit was simulated with.
    pub coeff: f64,
    /// Halo padding that surrounded the window during simulation.
    pub halo: usize,
    /// Green series terms applied.
    pub terms: usize,
    /// Worst relative kernel-mass shortfall over the observation window:
    /// series tail plus anything lost over the padded boundary, relative to
    /// the full kernel mass 1/(1-a).
    pub mass_deficit: f64,
}

impl FieldSample {
    /// Sum of the field over the half-open box `[lo, hi)`.
    pub fn rectangle_sum(&self, lo: (usize, usize), hi: (usize, usize)) -> Result<f64> {
        rectangle_sum(&self.values, self.rows, self.cols, lo, hi)
    }
}

/// Halo width that confines the kernel mass the unit needs.
fn sim_halo(variant: FieldVariant, a: f64, terms: usize) -> usize {
    match variant {
        // Every step moves exactly one site, so K terms cannot escape a
        // K-wide halo: confinement is exact.
        FieldVariant::TwoN | FieldVariant::ThreeN => terms,
        // The balanced stencil spreads diffusively: mass at taxicab radius
        // rho enters the Green series with weight about exp(-sqrt(2(1-a)) rho),
        // so a few e-folds of halo suffice; whatever still escapes is
        // reported in mass_deficit rather than assumed away.
        FieldVariant::FourN => {
            let efolds = (4.0 / (1.0 - a).sqrt()).ceil() as usize + 16;
            efolds.min(terms)
        }
    }
}

/// One Jacobi update on a padded row-major buffer: out = a P cur, with mass
/// leaving the buffer absorbed. Written as per-step shifted-slab adds so the
/// inner loop stays branch-free.
fn stencil_apply(
    cur: &[f64],
    out: &mut [f64],
    rows: usize,
    cols: usize,
    steps: &[((i64, i64), f64)],
    a: f64,
) {
    out.fill(0.0);
    for &((u, v), p) in steps {
        let w = a * p;
        let t0 = u.max(0) as usize;
        let t1 = (rows as i64 + u.min(0)).max(0) as usize;
        let s0 = v.max(0) as usize;
        let s1 = (cols as i64 + v.min(0)).max(0) as usize;
        if s0 >= s1 {
            continue;
        }
        for t in t0..t1 {
            let srow = (t as i64 - u) as usize * cols;
            let drow = t * cols;
            let sc0 = (s0 as i64 - v) as usize;
            let sc1 = (s1 as i64 - v) as usize;
            let src = &cur[srow + sc0..srow + sc1];
            let dst = &mut out[drow + s0..drow + s1];
            for (d, &x) in dst.iter_mut().zip(src) {
                *d += w * x;
            }
        }
    }
}

fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Simulates one stationary unit field by resumming the Green series
/// against freshly sampled innovations on a halo-padded window.
///
/// The series is truncated after [`MAX_SIM_TERMS`] terms even if `tol` asks
/// for more; the resulting shortfall shows up in `mass_deficit`, which also
/// accounts for mass convolved over the padded boundary.
pub fn simulate_field(
    variant: FieldVariant,
    a: f64,
    innovation: &InnovationSpec,
    rows: usize,
    cols: usize,
    tol: f64,
    stream: Stream,
) -> Result<FieldSample> {
    innovation.validate()?;
    require(
        (0.0..1.0).contains(&a),
        format!("coefficient must lie in [0, 1), got {a}"),
    )?;
    require(
        rows >= 1 && cols >= 1,
        "observation window must be non-empty",
    )?;
    require(
        tol > 0.0 && tol.is_finite(),
        format!("tolerance must be positive, got {tol}"),
    )?;
    let terms = series_terms(a, tol).min(MAX_SIM_TERMS);
    let halo = sim_halo(variant, a, terms);
    let steps = step_probs(variant);
    let ph = rows + 2 * halo;
    let pw = cols + 2 * halo;
    let cells = ph.checked_mul(pw).ok_or_else(|| {
        Error::ResourceCap(format!(
            "padded window {ph} x {pw} overflows the cell count"
        ))
    })?;
    if cells > MAX_WINDOW_CELLS {
        return Err(Error::ResourceCap(format!(
            "padded window {ph} x {pw} (observation {rows} x {cols}, halo {halo}) needs {cells} cells; cap is {MAX_WINDOW_CELLS}"
        )));
    }
    let work = cells as u128 * (terms as u128 + 1) * steps.len() as u128 * 2;
    if work > WORK_CAP {
        return Err(Error::ResourceCap(format!(
            "simulating coefficient {a} on a {rows} x {cols} window needs {work} cell updates; cap is {WORK_CAP}"
        )));
    }

    // Kernel-mass audit. With an exactly confining halo the captured mass is
    // the full series head and the shortfall is the analytic tail; otherwise
    // run the same recursion on a field of ones and take the worst
    // observation site.
    let mass_deficit = if halo >= terms {
        if a == 0.0 {
            0.0
        } else {
            a.powi(terms as i32 + 1)
        }
    } else {
        let mut cur = vec![1.0; cells];
        let mut nxt = vec![0.0; cells];
        let mut acc = cur.clone();
        for _ in 0..terms {
            stencil_apply(&cur, &mut nxt, ph, pw, steps, a);
            std::mem::swap(&mut cur, &mut nxt);
            add_assign(&mut acc, &cur);
        }
        let mut worst = 0.0f64;
        for t in halo..halo + rows {
            for s in halo..halo + cols {
                worst = worst.max(1.0 - (1.0 - a) * acc[t * pw + s]);
            }
        }
        worst.max(0.0)
    };

    let zeta = innovation.sample(cells, stream)?;
    let mut acc = zeta.clone();
    let mut cur = zeta;
    let mut nxt = vec![0.0; cells];
    for _ in 0..terms {
        stencil_apply(&cur, &mut nxt, ph, pw, steps, a);
        std::mem::swap(&mut cur, &mut nxt);
        add_assign(&mut acc, &cur);
    }
    let mut values = Vec::with_capacity(rows * cols);
    for t in halo..halo + rows {
        values.extend_from_slice(&acc[t * pw + halo..t * pw + halo + cols]);
    }
    Ok(FieldSample {
        rows,
        cols,
        values,
        coeff: a,
        halo,
        terms,
        mass_deficit,
    })
}

fn clip_coeffs(coeffs: &mut [f64]) -> usize {
    let mut clipped = 0;
    for c in coeffs.iter_mut() {
        if *c > FIELD_COEFF_CAP {
            *c = FIELD_COEFF_CAP;
            clipped += 1;
        }
    }
    clipped
}

/// An aggregated panel of unit fields sharing one observation window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldPanel {
    pub variant: FieldVariant,
    pub rows: usize,
    pub cols: usize,
    /// Row-major N^(-1/alpha)-normalized sum of the unit fields.
    pub aggregate: Vec<f64>,
    /// Coefficients actually simulated, after clipping.
    pub coeffs: Vec<f64>,
    pub innovation: InnovationSpec,
    pub mixing: MixingSpec,
    /// Seed lineage `(master, replicate)` the panel was generated under.
    pub master_seed: u64,
    pub replicate: u64,
    /// How many sampled coefficients were clipped to [`FIELD_COEFF_CAP`].
    pub clipped: usize,
    /// Worst unit kernel-mass shortfall; see [`FieldSample::mass_deficit`].
    pub mass_deficit: f64,
    /// Stable index used for the aggregation normalization.
    pub alpha: f64,
}

impl FieldPanel {
    pub fn n_units(&self) -> usize {
        self.coeffs.len()
    }

    /// Sum of the aggregate over the half-open box `[lo, hi)`.
    pub fn rectangle_sum(&self, lo: (usize, usize), hi: (usize, usize)) -> Result<f64> {
        rectangle_sum(&self.aggregate, self.rows, self.cols, lo, hi)
    }
}

/// Simulates `n_units` independent unit fields and their normalized
/// aggregate. Coefficients come from the model's mixing law on a reserved
/// stream lane; unit `i` draws its innovations from `stream.path(i)`, so the
/// panel is reproducible from `(master, replicate)` alone and byte-identical
/// at any worker count.
pub fn simulate_field_panel(
    model: &FieldModel,
    rows: usize,
    cols: usize,
    n_units: usize,
    tol: f64,
    stream: Stream,
) -> Result<FieldPanel> {
    model.validate()?;
    require(n_units >= 1, "panel needs at least one unit")?;
    require(
        rows >= 1 && cols >= 1,
        "observation window must be non-empty",
    )?;
    require(
        tol > 0.0 && tol.is_finite(),
        format!("tolerance must be positive, got {tol}"),
    )?;
    let alpha = self_stable_index(model);
    let mut coeffs = model
        .mixing
        .sample_coeff(n_units, stream.path(COEFF_LANE))?;
    let clipped = clip_coeffs(&mut coeffs);
    let sims = parallel_map(n_units, |i| {
        simulate_field(
            model.variant,
            coeffs[i],
            &model.innovation,
            rows,
            cols,
            tol,
            stream.path(i as u64),
        )
    });
    let mut aggregate = vec![0.0; rows * cols];
    let mut mass_deficit = 0.0f64;
    for sim in sims {
        let sim = sim?;
        mass_deficit = mass_deficit.max(sim.mass_deficit);
        add_assign(&mut aggregate, &sim.values);
    }
    let scale = (n_units as f64).powf(-1.0 / alpha);
    for v in &mut aggregate {
        *v *= scale;
    }
    Ok(FieldPanel {
        variant: model.variant,
        rows,
        cols,
        aggregate,
        coeffs,
        innovation: model.innovation.clone(),
        mixing: model.mixing.clone(),
        master_seed: stream.master,
        replicate: stream.replicate,
        clipped,
        mass_deficit,
        alpha,
    })
}

fn self_stable_index(model: &FieldModel) -> f64 {
    model
        .innovation
        .stable_index()
        .expect("validated to carry a stable index")
}

/// Cancellation-free real and imaginary parts of 1 - S(x, y), where S is
/// the stencil's step symbol: 1 - a S = (1 - a) + a (c1 - i c2).
fn one_minus_symbol(variant: FieldVariant, x: f64, y: f64) -> (f64, f64) {
    let sx2 = (x / 2.0).sin().powi(2);
    let sy2 = (y / 2.0).sin().powi(2);
    match variant {
        FieldVariant::TwoN => (sx2 + sy2, (x.sin() + y.sin()) / 2.0),
        FieldVariant::ThreeN => ((2.0 * sx2 + 4.0 * sy2) / 3.0, x.sin() / 3.0),
        FieldVariant::FourN => (sx2 + sy2, 0.0),
    }
}

/// Spectral density of the aggregated field at frequency `(x, y)`:
/// sigma^2 / (2 pi)^2 times the mixing expectation of |1 - A S(x, y)|^(-2).
///
/// The frequency origin is allowed only when the mixing tail exponent
/// exceeds 1, mirroring the one-dimensional spectral density.
pub fn field_spectral_density(
    variant: FieldVariant,
    mixing: &MixingSpec,
    sigma2: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    mixing.validate()?;
    require(
        sigma2 > 0.0 && sigma2.is_finite(),
        format!("innovation variance must be positive, got {sigma2}"),
    )?;
    let pi = std::f64::consts::PI;
    require(
        x.is_finite() && y.is_finite() && x.abs() <= pi && y.abs() <= pi,
        format!("frequency must lie in [-pi, pi]^2, got ({x}, {y})"),
    )?;
    let (c1, c2) = one_minus_symbol(variant, x, y);
    let origin = c1 == 0.0 && c2 == 0.0;
    if origin {
        let beta = mixing.tail_exponent()?;
        require(
            beta > 1.0,
            format!("spectral density diverges at the frequency origin for tail exponent {beta}"),
        )?;
    }
    let denom = move |av: f64, db: f64| {
        let re = db + av * c1;
        let im = av * c2;
        re * re + im * im
    };
    let v = match *mixing {
        // At the origin the kernel is 1/db^2 and the surviving power of db
        // must be combined with the density's before evaluation.
        MixingSpec::BetaType { p, q } => {
            let norm = 2.0 * (-ln_beta(p, q)).exp();
            if origin {
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
                    |av, da, db| {
                        let num = norm * da.powf(2.0 * p - 1.0) * (db * (2.0 - db)).powf(q - 1.0);
                        if num == 0.0 {
                            0.0
                        } else {
                            num / denom(av, db)
                        }
                    },
                    0.0,
                    1.0,
                    QUAD_REL,
                    QUAD_ABS,
                )?
            }
        }
        MixingSpec::CanonicalRegVar { beta } => {
            if origin {
                tanh_sinh_sing(
                    |_, _, db| (1.0 + beta) * db.powf(beta - 2.0),
                    0.0,
                    1.0,
                    QUAD_REL,
                    QUAD_ABS,
                )?
            } else {
                tanh_sinh_sing(
                    |av, _, db| {
                        let num = (1.0 + beta) * db.powf(beta);
                        if num == 0.0 {
                            0.0
                        } else {
                            num / denom(av, db)
                        }
                    },
                    0.0,
                    1.0,
                    QUAD_REL,
                    QUAD_ABS,
                )?
            }
        }
        // The mixture tail exponent 1 - 2d < 1 never admits the origin.
        MixingSpec::Farima { d } => tanh_sinh_sing(
            |av, da, db| {
                let num = farima_norm(d) * da.powf(d - 1.0) * db.powf(1.0 - 2.0 * d) * (1.0 + av);
                if num == 0.0 {
                    0.0
                } else {
                    num / denom(av, db)
                }
            },
            0.0,
            1.0,
            QUAD_REL,
            QUAD_ABS,
        )?,
        // Knot-by-knot quadrature sidesteps the interpolation kinks that
        // stall a global rule; the grid stays away from the unit root.
        MixingSpec::Tabulated { .. } => {
            crate::analytics::tabulated_quadrature(mixing, |av| 1.0 / denom(av, 1.0 - av))?
        }
    };
    Ok(sigma2 / (4.0 * pi * pi) * v)
}

/// Rectangular partial-sum scaling exponents `(H1, H2)` of the aggregated
/// field, plus whether the limit is isotropic.
///
/// The quarter-plane and half-plane stencils scale anisotropically with
/// H2 = 2 H1; the balanced stencil scales isotropically.
pub fn scaling_exponents(variant: FieldVariant, alpha: f64, beta: f64) -> Result<(f64, f64, bool)> {
    require(
        alpha > 1.0 && alpha <= 2.0,
        format!("stable index must lie in (1, 2], got {alpha}"),
    )?;
    require(
        beta > 0.0 && beta < alpha - 1.0,
        format!("tail exponent must lie in (0, alpha - 1), got {beta} with alpha {alpha}"),
    )?;
    Ok(match variant {
        FieldVariant::TwoN | FieldVariant::ThreeN => {
            let h1 = (0.5 + alpha - beta) / alpha;
            (h1, 2.0 * h1, false)
        }
        FieldVariant::FourN => {
            let h = 2.0 * (alpha - beta) / alpha;
            (h, h, true)
        }
    })
}

/// Sum of a row-major `rows x cols` lattice over the half-open box
/// `[lo.0, hi.0) x [lo.1, hi.1)`. Degenerate boxes sum to zero; increments
/// over nested corners follow by double differencing.
pub fn rectangle_sum(
    values: &[f64],
    rows: usize,
    cols: usize,
    lo: (usize, usize),
    hi: (usize, usize),
) -> Result<f64> {
    require(
        values.len() == rows * cols,
        format!(
            "value buffer holds {} cells, stated shape is {rows} x {cols}",
            values.len()
        ),
    )?;
    require(
        lo.0 <= hi.0 && lo.1 <= hi.1,
        format!("rectangle corners must be ordered, got {lo:?} and {hi:?}"),
    )?;
    require(
        hi.0 <= rows && hi.1 <= cols,
        format!("rectangle corner {hi:?} exceeds the {rows} x {cols} lattice"),
    )?;
    let mut acc = Kahan::new();
    for t in lo.0..hi.0 {
        for s in lo.1..hi.1 {
            acc.add(values[t * cols + s]);
        }
    }
    Ok(acc.value())
}
