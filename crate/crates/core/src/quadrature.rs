//! Arc length of one branch interval of a level curve.
//!
//! The integrand `sqrt(1 + (dp/dq)²)` diverges like `(q* - q)^(-1/2)` at a
//! turning point `q*`. Nodes are never placed on an endpoint: every node is
//! addressed as an offset from the nearer endpoint, and the model evaluates
//! the branch relative to that endpoint so no precision is lost next to it.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::model::{Anchor, DomainInterval, EndpointKind, HamiltonianModel, ModelError};

/// Half-range of the tanh-sinh abscissa; node distances to the endpoints
/// reach ~1e-37 of the interval width there.
const TANH_SINH_T_MAX: f64 = 4.0;
/// Levels always computed before the convergence test is trusted.
const TANH_SINH_MIN_LEVELS: usize = 4;
const POLYLINE_START: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// tanh-sinh with a turning-point endpoint, adaptive Gauss-Kronrod otherwise.
    #[default]
    Auto,
    TanhSinh,
    AdaptiveGk,
    /// Graded chord sums with Richardson extrapolation.
    Polyline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Doubling levels for tanh-sinh and polyline; adaptive GK may use
    /// up to `2^max_levels` panels.
    pub max_levels: usize,
    pub scheme: Scheme,
    /// Accept the best estimate instead of failing with `NoConvergence`.
    pub best_effort: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_levels: 12,
            scheme: Scheme::Auto,
            best_effort: false,
        }
    }
}

impl QuadratureConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_levels < 4 {
            return Err(QuadratureError::InvalidConfig);
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.rel_tol * value.abs() + self.abs_tol
    }
}

/// Length of one interval's branch with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntervalLength {
    pub value: f64,
    pub est_error: f64,
    pub evaluations: usize,
}

impl IntervalLength {
    fn add(&mut self, other: IntervalLength) {
        self.value += other.value;
        self.est_error += other.est_error;
        self.evaluations += other.evaluations;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance (best {:.17e} +/- {:.3e})", best.value, best.est_error)]
    NoConvergence { best: IntervalLength },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("tolerances must be positive and max_levels >= 4")]
    InvalidConfig,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Integrand addressed from both ends of a panel.
struct Panel<'a> {
    model: &'a HamiltonianModel,
    lo: Anchor,
    hi: Anchor,
    width: f64,
    lo_turning: bool,
    hi_turning: bool,
}

impl<'a> Panel<'a> {
    fn new(model: &'a HamiltonianModel, e: f64, iv: &DomainInterval) -> Self {
        let lo_turning = iv.lo_kind.is_turning();
        let hi_turning = iv.hi_kind.is_turning();
        Self {
            model,
            lo: model.anchor(iv.lo, e, lo_turning),
            hi: model.anchor(iv.hi, e, hi_turning),
            width: iv.hi - iv.lo,
            lo_turning,
            hi_turning,
        }
    }

    fn singular(&self) -> bool {
        self.lo_turning || self.hi_turning
    }

    /// Integrand at distance `d` from the low end (`from_hi = false`) or the high end.
    fn eval(&self, from_hi: bool, d: f64) -> f64 {
        let value = if from_hi {
            self.model.local_integrand(&self.hi, -d)
        } else {
            self.model.local_integrand(&self.lo, d)
        };
        // A non-positive radicand only appears within rounding of a turning point.
        value.unwrap_or(0.0)
    }

    fn branch(&self, from_hi: bool, d: f64) -> f64 {
        if from_hi {
            self.model.local_branch(&self.hi, -d)
        } else {
            self.model.local_branch(&self.lo, d)
        }
    }
}

/// Cuts an interval at saddle coordinates strictly inside it so that the
/// near-corner of a level curve passing close to a saddle sits at a panel end.
fn panels(model: &HamiltonianModel, e: f64, iv: &DomainInterval) -> Vec<DomainInterval> {
    let mut cuts: Vec<f64> = model
        .saddle_coordinates()
        .into_iter()
        .filter(|&s| s - iv.lo > 1e-9 && iv.hi - s > 1e-9)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let (mut start, mut start_kind) = (iv.lo, iv.lo_kind);
    for cut in cuts {
        // A saddle inside a merged interval lies on the level curve itself.
        let kind = if e - model.potential(cut) <= 0.0 {
            EndpointKind::TurningPoint
        } else {
            EndpointKind::Regular
        };
        out.push(DomainInterval::new(start, cut, start_kind, kind));
        start = cut;
        start_kind = kind;
    }
    out.push(DomainInterval::new(start, iv.hi, start_kind, iv.hi_kind));
    out
}

/// `∫ sqrt(1 + (dp/dq)²) dq` over one domain interval of the level curve `H = e`.
///
/// The interval's endpoint flags decide where the integrand is singular;
/// they are taken as given and not re-derived here.
pub fn arclength_interval(
    model: &HamiltonianModel,
    e: f64,
    interval: &DomainInterval,
    cfg: &QuadratureConfig,
) -> Result<IntervalLength, QuadratureError> {
    cfg.validate()?;
    if !(interval.lo < interval.hi) {
        return Err(QuadratureError::InvalidInterval { lo: interval.lo, hi: interval.hi });
    }
    let mut total = IntervalLength::default();
    let mut converged = true;
    for piece in panels(model, e, interval) {
        let panel = Panel::new(model, e, &piece);
        let scheme = match cfg.scheme {
            Scheme::Auto if panel.singular() => Scheme::TanhSinh,
            Scheme::Auto => Scheme::AdaptiveGk,
            s => s,
        };
        let (part, ok) = match scheme {
            Scheme::TanhSinh => {
                let r = tanh_sinh(&panel, cfg, None, TANH_SINH_T_MAX);
                (r.length, r.converged)
            }
            Scheme::AdaptiveGk => gauss_kronrod(&panel, cfg),
            Scheme::Polyline => polyline_richardson(&panel, cfg),
            Scheme::Auto => unreachable!(),
        };
        converged &= ok;
        total.add(part);
    }
    if converged || cfg.best_effort {
        Ok(total)
    } else {
        Err(QuadratureError::NoConvergence { best: total })
    }
}

/// Tanh-sinh levels used per panel of an interval; see [`arclength_frozen`].
pub(crate) fn tanh_sinh_levels(
    model: &HamiltonianModel,
    e: f64,
    interval: &DomainInterval,
    cfg: &QuadratureConfig,
) -> Vec<usize> {
    panels(model, e, interval)
        .iter()
        .map(|piece| tanh_sinh(&Panel::new(model, e, piece), cfg, None, TANH_SINH_T_MAX).level)
        .collect()
}

/// Tanh-sinh evaluation with the per-panel level fixed in advance.
///
/// Used for differences in `E`: with the node set frozen the discretisation
/// error varies smoothly with `E` and cancels in the difference.
/// Returns `None` if the panel structure differs from `levels`.
pub(crate) fn arclength_frozen(
    model: &HamiltonianModel,
    e: f64,
    interval: &DomainInterval,
    levels: &[usize],
) -> Option<f64> {
    let pieces = panels(model, e, interval);
    if pieces.len() != levels.len() {
        return None;
    }
    let cfg = QuadratureConfig::default();
    Some(
        pieces
            .iter()
            .zip(levels)
            .map(|(piece, &level)| {
                tanh_sinh(&Panel::new(model, e, piece), &cfg, Some(level), TANH_SINH_T_MAX)
                    .length
                    .value
            })
            .sum(),
    )
}

struct TanhSinhResult {
    length: IntervalLength,
    level: usize,
    converged: bool,
}

/// Node of the tanh-sinh rule at abscissa `t`: distance from the nearer end
/// as a fraction of the half-width, and the weight `dx/dt`.
#[inline]
fn tanh_sinh_node(t: f64) -> (f64, f64) {
    let u = FRAC_PI_2 * t.sinh();
    let ex = (-2.0 * u.abs()).exp();
    let complement = 2.0 * ex / (1.0 + ex);
    let weight = FRAC_PI_2 * t.cosh() * 4.0 * ex / ((1.0 + ex) * (1.0 + ex));
    (complement, weight)
}

fn tanh_sinh(
    panel: &Panel<'_>,
    cfg: &QuadratureConfig,
    fixed_level: Option<usize>,
    t_max: f64,
) -> TanhSinhResult {
    let half = 0.5 * panel.width;
    let term = |t: f64| -> f64 {
        let (c, w) = tanh_sinh_node(t);
        let d = half * c;
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        w * panel.eval(t > 0.0, d)
    };

    let max_level = fixed_level.unwrap_or(cfg.max_levels);
    let mut h = 1.0;
    let n0 = (t_max / h).round() as i64;
    let mut sum: f64 = (-n0..=n0).map(|k| term(k as f64 * h)).sum();
    let mut evaluations = (2 * n0 + 1) as usize;
    let mut estimate = h * half * sum;
    let mut est_error = f64::INFINITY;
    let mut level = 0;
    while level < max_level {
        level += 1;
        h *= 0.5;
        let n = (t_max / h).round() as i64;
        // Only odd multiples of the new step are new nodes.
        let added: f64 = (-n..=n).filter(|k| k % 2 != 0).map(|k| term(k as f64 * h)).sum();
        evaluations += n as usize + 1;
        sum += added;
        let next = h * half * sum;
        est_error = (next - estimate).abs();
        estimate = next;
        if fixed_level.is_none() && level >= TANH_SINH_MIN_LEVELS && est_error <= cfg.target(next) {
            break;
        }
    }
    let converged = fixed_level.is_some() || est_error <= cfg.target(estimate);
    TanhSinhResult {
        length: IntervalLength { value: estimate, est_error, evaluations },
        level,
        converged,
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct GkPanel {
    // offsets from the low end of the full panel
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15(panel: &Panel<'_>, a: f64, b: f64) -> GkPanel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mid_full = 0.5 * panel.width;
    // evaluate at offset x from the low end, addressing the nearer endpoint
    let f = |x: f64| {
        if x <= mid_full {
            panel.eval(false, x)
        } else {
            panel.eval(true, panel.width - x)
        }
    };
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    GkPanel { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

fn gauss_kronrod(panel: &Panel<'_>, cfg: &QuadratureConfig) -> (IntervalLength, bool) {
    let max_panels = 1usize << cfg.max_levels;
    let mut parts = vec![gk15(panel, 0.0, panel.width)];
    let mut evaluations = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.value).sum();
        let error: f64 = parts.iter().map(|p| p.error).sum();
        if error <= cfg.target(value) || parts.len() >= max_panels {
            let ok = error <= cfg.target(value);
            return (IntervalLength { value, est_error: error, evaluations }, ok);
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = parts.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // cannot split further in floating point
            let value: f64 = parts.iter().map(|q| q.value).sum::<f64>() + p.value;
            let error: f64 = parts.iter().map(|q| q.error).sum::<f64>() + p.error;
            return (IntervalLength { value, est_error: error, evaluations }, false);
        }
        parts.push(gk15(panel, p.a, m));
        parts.push(gk15(panel, m, p.b));
        evaluations += 30;
    }
}

/// Chord sum over `n` segments with nodes graded towards both ends,
/// `q_k = lo + W sin²(kπ / 2n)`.
fn chord_sum(panel: &Panel<'_>, n: usize) -> f64 {
    let w = panel.width;
    let step = std::f64::consts::PI / (2.0 * n as f64);
    let sin_step = step.sin();
    let point = |k: usize| -> f64 {
        if 2 * k <= n {
            let s = (k as f64 * step).sin();
            panel.branch(false, w * s * s)
        } else {
            let s = ((n - k) as f64 * step).sin();
            panel.branch(true, w * s * s)
        }
    };
    let mut total = 0.0;
    let mut p_prev = point(0);
    for k in 0..n {
        let p_next = point(k + 1);
        // q_{k+1} - q_k = W sin((2k+1)·step) sin(step)
        let dq = w * ((2 * k + 1) as f64 * step).sin() * sin_step;
        total += dq.hypot(p_next - p_prev);
        p_prev = p_next;
    }
    total
}

fn polyline_richardson(panel: &Panel<'_>, cfg: &QuadratureConfig) -> (IntervalLength, bool) {
    let mut n = POLYLINE_START;
    let mut coarse = chord_sum(panel, n);
    let mut evaluations = n + 1;
    let mut best = IntervalLength { value: coarse, est_error: f64::INFINITY, evaluations };
    for _ in 0..cfg.max_levels {
        n *= 2;
        let fine = chord_sum(panel, n);
        evaluations += n + 1;
        // chord sums converge like n^-2
        let extrapolated = fine + (fine - coarse) / 3.0;
        best = IntervalLength {
            value: extrapolated,
            est_error: (fine - coarse).abs() / 3.0,
            evaluations,
        };
        if best.est_error <= cfg.target(extrapolated) {
            return (best, true);
        }
        coarse = fine;
    }
    (best, false)
}

/// Sum of chord lengths between `n_segments + 1` branch samples.
///
/// Samples are cosine-graded towards both ends so vertical tangents at turning
/// points are resolved. Chords underestimate the arc, and nested refinements
/// (`n → 2n`) never decrease the sum.
pub fn polyline_oracle(
    model: &HamiltonianModel,
    e: f64,
    interval: &DomainInterval,
    n_segments: usize,
) -> Result<f64, QuadratureError> {
    assert!(n_segments >= 2, "polyline oracle needs at least two segments");
    if interval.hi <= interval.lo {
        return Ok(0.0);
    }
    // Surface OutsideDomain for intervals that do not belong to this level.
    let mid = 0.5 * (interval.lo + interval.hi);
    model.branch(mid, e)?;
    for (q, kind) in [(interval.lo, interval.lo_kind), (interval.hi, interval.hi_kind)] {
        if !kind.is_turning() {
            model.branch(q, e)?;
        }
    }
    Ok(chord_sum(&Panel::new(model, e, interval), n_segments))
}
