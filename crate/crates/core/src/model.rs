//! Hamiltonian models, their momentum branches and the energy domains
//! over which a level curve is traced.
//!
//! Every built-in model has the separable form `H(q, p) = k·p² + V(q)`, with
//! `k = 1/2` except for the fish-tail model (`k = 1`). The nonnegative branch
//! of the level curve `H = E` is `p(q; E) = sqrt((E - V(q)) / k)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::roots::{brent, cubic_roots, ROOT_MERGE_TOL};

/// Radicands down to this negative value are clamped to zero.
pub const RADICAND_CLAMP: f64 = 1e-12;

/// Branch values below this are treated as a turning point.
pub const TURNING_BRANCH_TOL: f64 = 1e-12;

const FISHTAIL_SADDLE: f64 = -4.0;
const CUSTOM_SCAN_CELLS: usize = 4096;
const CUSTOM_ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("q = {q} lies outside the level curve of E = {energy} (radicand {radicand:e})")]
    OutsideDomain { q: f64, energy: f64, radicand: f64 },
    #[error("q = {q} is a turning point of E = {energy}; the branch slope is unbounded there")]
    TurningPoint { q: f64, energy: f64 },
    #[error("energy {energy} is below the minimum {e_min}")]
    BelowMinimum { energy: f64, e_min: f64 },
    #[error("model `{model}` has unbounded level curves and needs a truncation")]
    TruncationRequired { model: &'static str },
    #[error("truncation a = {a} cuts into the level curve of E = {energy} (needed endpoint {endpoint})")]
    TruncationInsideDomain { a: f64, energy: f64, endpoint: f64 },
    #[error("energy {energy} lies above the bounded librations of `{model}`")]
    AboveLibrations { energy: f64, model: &'static str },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied potential `V(q)` for `H = p²/2 + V(q)`.
///
/// Level-curve endpoints are located by Brent bracketing of `E - V(q) = 0`
/// on the search interval; the ends of that interval act as truncations.
#[derive(Clone)]
pub struct MechanicalSystem {
    potential: ScalarFn,
    potential_slope: ScalarFn,
    search: (f64, f64),
    e_sx: f64,
    saddles: Vec<f64>,
}

impl MechanicalSystem {
    pub fn new<V, DV>(potential: V, potential_slope: DV, search_lo: f64, search_hi: f64) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        DV: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(search_lo < search_hi, "empty search interval");
        Self {
            potential: Arc::new(potential),
            potential_slope: Arc::new(potential_slope),
            search: (search_lo, search_hi),
            e_sx: f64::INFINITY,
            saddles: Vec::new(),
        }
    }

    /// Declare the separatrix energy and the saddle coordinates it passes through.
    pub fn with_separatrix(mut self, e_sx: f64, saddles: Vec<f64>) -> Self {
        self.e_sx = e_sx;
        self.saddles = saddles;
        self
    }

    pub fn potential(&self, q: f64) -> f64 {
        (self.potential)(q)
    }

    pub fn potential_slope(&self, q: f64) -> f64 {
        (self.potential_slope)(q)
    }

    pub fn search_interval(&self) -> (f64, f64) {
        self.search
    }

    fn minimum(&self) -> f64 {
        let (lo, hi) = self.search;
        let step = (hi - lo) / CUSTOM_SCAN_CELLS as f64;
        let node = |k: usize| if k == CUSTOM_SCAN_CELLS { hi } else { lo + k as f64 * step };
        let (best_k, mut best) = (0..=CUSTOM_SCAN_CELLS)
            .map(|k| (k, self.potential(node(k))))
            .fold((0, f64::INFINITY), |acc, kv| if kv.1 < acc.1 { kv } else { acc });
        let a = node(best_k.saturating_sub(1));
        let b = node((best_k + 1).min(CUSTOM_SCAN_CELLS));
        if let Some(q) = brent(|q| self.potential_slope(q), a, b, CUSTOM_ROOT_TOL, 200) {
            best = best.min(self.potential(q));
        }
        best
    }
}

impl fmt::Debug for MechanicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanicalSystem")
            .field("search", &self.search)
            .field("e_sx", &self.e_sx)
            .field("saddles", &self.saddles)
            .finish_non_exhaustive()
    }
}

/// Which Hamiltonian a [`HamiltonianModel`] represents.
#[derive(Debug, Clone)]
pub enum ModelId {
    /// `H = p²/2 - cos q - 1`, separatrix at `E = 0`.
    Pendulum,
    /// `H = p²/2 - q²/2 + q⁴/4`, eight-shaped separatrix at `E = 0`.
    Duffing,
    /// `H = p² + q³ + 6q² - 32`, fish-tail separatrix at `E = 0`.
    ///
    /// With `bounded_librations` only the closed loops with `q >= -4` and
    /// `E <= 0` are traced and no truncation is needed.
    Fishtail { bounded_librations: bool },
    /// `H = (p² + q²)/2`.
    HarmonicOscillator,
    /// `H = (p² - q²)/2`, with the hyperbolae cut at hyperbolic angle `t_star`.
    HarmonicRepulsor { t_star: f64 },
    CustomMechanical(MechanicalSystem),
}

/// Endpoint classification of a domain interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointKind {
    /// The branch vanishes: the arc-length integrand has an inverse square-root singularity.
    TurningPoint,
    Regular,
    /// Artificial cut of an unbounded branch.
    Truncation,
}

impl EndpointKind {
    pub fn is_turning(self) -> bool {
        self == EndpointKind::TurningPoint
    }
}

/// One closed interval of the curve parameter with its endpoint flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_kind: EndpointKind,
    pub hi_kind: EndpointKind,
}

impl DomainInterval {
    pub fn new(lo: f64, hi: f64, lo_kind: EndpointKind, hi_kind: EndpointKind) -> Self {
        Self { lo, hi, lo_kind, hi_kind }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn has_turning_point(&self) -> bool {
        self.lo_kind.is_turning() || self.hi_kind.is_turning()
    }
}

/// Sorted, pairwise disjoint intervals on which the nonnegative branch is real.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyDomain {
    pub intervals: Vec<DomainInterval>,
}

impl EnergyDomain {
    fn from_pieces(pieces: Vec<DomainInterval>) -> Self {
        let mut intervals: Vec<DomainInterval> = Vec::with_capacity(pieces.len());
        for piece in pieces {
            if let Some(last) = intervals.last_mut() {
                if piece.lo - last.hi < ROOT_MERGE_TOL {
                    last.hi = last.hi.max(piece.hi);
                    last.hi_kind = piece.hi_kind;
                    continue;
                }
            }
            intervals.push(piece);
        }
        intervals.retain(|iv| iv.width() >= ROOT_MERGE_TOL);
        Self { intervals }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(DomainInterval::width).sum()
    }
}

/// Lower coordinate cut for models whose level curves are unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub a: f64,
}

impl Truncation {
    pub fn new(a: f64) -> Self {
        Self { a }
    }
}

/// Local expansion point for evaluating the branch at `q + offset` without
/// cancellation near turning points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Anchor {
    pub q: f64,
    /// `E - V(q)`, forced to zero at turning points.
    gap: f64,
    /// Coordinate relative to the model's expansion centre.
    local: f64,
    cos: f64,
    sin: f64,
}

/// A Hamiltonian model together with its critical energies.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    id: ModelId,
    e_min: f64,
    e_sx: f64,
}

impl HamiltonianModel {
    pub fn new(id: ModelId) -> Self {
        let (e_min, e_sx) = match &id {
            ModelId::Pendulum => (-2.0, 0.0),
            ModelId::Duffing => (-0.25, 0.0),
            ModelId::Fishtail { .. } => (-32.0, 0.0),
            ModelId::HarmonicOscillator => (0.0, f64::INFINITY),
            ModelId::HarmonicRepulsor { t_star } => {
                assert!(*t_star > 0.0, "t_star must be positive");
                (f64::NEG_INFINITY, 0.0)
            }
            ModelId::CustomMechanical(sys) => (sys.minimum(), sys.e_sx),
        };
        Self { id, e_min, e_sx }
    }

    pub fn pendulum() -> Self {
        Self::new(ModelId::Pendulum)
    }

    pub fn duffing() -> Self {
        Self::new(ModelId::Duffing)
    }

    pub fn fishtail() -> Self {
        Self::new(ModelId::Fishtail { bounded_librations: false })
    }

    pub fn fishtail_bounded_librations() -> Self {
        Self::new(ModelId::Fishtail { bounded_librations: true })
    }

    pub fn harmonic_oscillator() -> Self {
        Self::new(ModelId::HarmonicOscillator)
    }

    pub fn harmonic_repulsor(t_star: f64) -> Self {
        Self::new(ModelId::HarmonicRepulsor { t_star })
    }

    pub fn custom(system: MechanicalSystem) -> Self {
        Self::new(ModelId::CustomMechanical(system))
    }

    pub fn id(&self) -> &ModelId {
        &self.id
    }

    pub fn name(&self) -> &'static str {
        match self.id {
            ModelId::Pendulum => "pendulum",
            ModelId::Duffing => "duffing",
            ModelId::Fishtail { bounded_librations: false } => "fishtail",
            ModelId::Fishtail { bounded_librations: true } => "fishtail-bounded",
            ModelId::HarmonicOscillator => "harmonic-oscillator",
            ModelId::HarmonicRepulsor { .. } => "harmonic-repulsor",
            ModelId::CustomMechanical(_) => "custom-mechanical",
        }
    }

    /// Coefficient `k` of the kinetic term `k·p²`.
    pub fn kinetic(&self) -> f64 {
        match self.id {
            ModelId::Fishtail { .. } => 1.0,
            _ => 0.5,
        }
    }

    /// `m` such that the full level-curve length is `m` times the summed branch integrals.
    pub fn multiplier(&self) -> u32 {
        match self.id {
            ModelId::Duffing => 4,
            ModelId::HarmonicRepulsor { .. } => 1,
            _ => 2,
        }
    }

    /// `(e_min, e_sx)`: the elliptic and separatrix energies. Missing ones are infinite.
    pub fn critical_energies(&self) -> (f64, f64) {
        (self.e_min, self.e_sx)
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn e_sx(&self) -> f64 {
        self.e_sx
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(
            self.id,
            ModelId::Fishtail { bounded_librations: false } | ModelId::HarmonicRepulsor { .. }
        )
    }

    /// Coordinates of the hyperbolic equilibria (all at `p = 0`).
    pub fn saddle_coordinates(&self) -> Vec<f64> {
        match &self.id {
            ModelId::Pendulum => vec![-PI, PI],
            ModelId::Duffing | ModelId::HarmonicRepulsor { .. } => vec![0.0],
            ModelId::Fishtail { .. } => vec![FISHTAIL_SADDLE],
            ModelId::HarmonicOscillator => Vec::new(),
            ModelId::CustomMechanical(sys) => sys.saddles.clone(),
        }
    }

    pub fn potential(&self, q: f64) -> f64 {
        match &self.id {
            ModelId::Pendulum => -q.cos() - 1.0,
            ModelId::Duffing => {
                let q2 = q * q;
                -0.5 * q2 + 0.25 * q2 * q2
            }
            ModelId::Fishtail { .. } => {
                let u = q - FISHTAIL_SADDLE;
                u * u * (u - 6.0)
            }
            ModelId::HarmonicOscillator => 0.5 * q * q,
            ModelId::HarmonicRepulsor { .. } => -0.5 * q * q,
            ModelId::CustomMechanical(sys) => sys.potential(q),
        }
    }

    pub fn potential_slope(&self, q: f64) -> f64 {
        match &self.id {
            ModelId::Pendulum => q.sin(),
            ModelId::Duffing => q * (q * q - 1.0),
            ModelId::Fishtail { .. } => 3.0 * q * (q + 4.0),
            ModelId::HarmonicOscillator => q,
            ModelId::HarmonicRepulsor { .. } => -q,
            ModelId::CustomMechanical(sys) => sys.potential_slope(q),
        }
    }

    pub fn energy(&self, q: f64, p: f64) -> f64 {
        self.kinetic() * p * p + self.potential(q)
    }

    fn radicand(&self, q: f64, e: f64) -> f64 {
        let gap = e - self.potential(q);
        // Differences at the rounding level of E and V(q) are indistinguishable from zero.
        if gap.abs() <= 4.0 * f64::EPSILON * (e.abs() + self.potential_magnitude(q)) {
            return 0.0;
        }
        gap / self.kinetic()
    }

    /// Sum of the magnitudes of the terms of `V(q)`, which bounds its rounding error.
    fn potential_magnitude(&self, q: f64) -> f64 {
        match &self.id {
            ModelId::Pendulum => q.cos().abs() + 1.0,
            ModelId::Duffing => {
                let q2 = q * q;
                0.5 * q2 + 0.25 * q2 * q2
            }
            ModelId::Fishtail { .. } => {
                let u = q - FISHTAIL_SADDLE;
                u * u * (u.abs() + 6.0)
            }
            ModelId::HarmonicOscillator | ModelId::HarmonicRepulsor { .. } => 0.5 * q * q,
            ModelId::CustomMechanical(sys) => sys.potential(q).abs(),
        }
    }

    /// Nonnegative momentum on the level curve `H = e` above coordinate `q`.
    pub fn branch(&self, q: f64, e: f64) -> Result<f64, ModelError> {
        let radicand = self.radicand(q, e);
        if radicand < -RADICAND_CLAMP || radicand.is_nan() {
            return Err(ModelError::OutsideDomain { q, energy: e, radicand });
        }
        Ok(radicand.max(0.0).sqrt())
    }

    /// `dp/dq` along the nonnegative branch, `-V'(q) / (2k·p)`.
    pub fn branch_slope(&self, q: f64, e: f64) -> Result<f64, ModelError> {
        let p = self.branch(q, e)?;
        if p < TURNING_BRANCH_TOL {
            return Err(ModelError::TurningPoint { q, energy: e });
        }
        Ok(-self.potential_slope(q) / (2.0 * self.kinetic() * p))
    }

    /// Intervals of `q` on which the level curve `H = e` has a real branch.
    ///
    /// `trunc` is required for the truncated fish-tail model and ignored otherwise
    /// (the repulsor carries its own cut in [`ModelId::HarmonicRepulsor`]).
    pub fn domain(&self, e: f64, trunc: Option<Truncation>) -> Result<EnergyDomain, ModelError> {
        use EndpointKind::*;
        if e < self.e_min || e.is_nan() {
            return Err(ModelError::BelowMinimum { energy: e, e_min: self.e_min });
        }
        let pieces = match &self.id {
            ModelId::Pendulum => {
                if e < 0.0 {
                    let theta = pendulum_turning_angle(e);
                    vec![DomainInterval::new(-theta, theta, TurningPoint, TurningPoint)]
                } else {
                    let kind = if e == 0.0 { TurningPoint } else { Regular };
                    vec![DomainInterval::new(-PI, PI, kind, kind)]
                }
            }
            ModelId::Duffing => {
                let r = (1.0 + 4.0 * e).sqrt();
                let x2 = (1.0 + r).sqrt();
                if e < 0.0 {
                    let x1 = (-4.0 * e / (1.0 + r)).sqrt();
                    vec![DomainInterval::new(x1, x2, TurningPoint, TurningPoint)]
                } else {
                    let kind = if e == 0.0 { TurningPoint } else { Regular };
                    vec![DomainInterval::new(0.0, x2, kind, TurningPoint)]
                }
            }
            ModelId::Fishtail { bounded_librations } => {
                self.fishtail_pieces(e, trunc, *bounded_librations)?
            }
            ModelId::HarmonicOscillator => {
                let r = (2.0 * e).sqrt();
                vec![DomainInterval::new(-r, r, TurningPoint, TurningPoint)]
            }
            ModelId::HarmonicRepulsor { t_star } => {
                let r = (2.0 * e.abs()).sqrt();
                if e > 0.0 {
                    vec![DomainInterval::new(0.0, r * t_star.sinh(), Regular, Truncation)]
                } else if e < 0.0 {
                    vec![DomainInterval::new(r, r * t_star.cosh(), TurningPoint, Truncation)]
                } else {
                    Vec::new()
                }
            }
            ModelId::CustomMechanical(sys) => self.custom_pieces(sys, e),
        };
        Ok(EnergyDomain::from_pieces(pieces))
    }

    fn fishtail_pieces(
        &self,
        e: f64,
        trunc: Option<Truncation>,
        bounded_librations: bool,
    ) -> Result<Vec<DomainInterval>, ModelError> {
        use EndpointKind::*;
        // Roots of P_E in u = x + 4, where P_E = -u³ + 6u² + E.
        let roots: Vec<f64> = cubic_roots(-1.0, 6.0, 0.0, e)
            .into_iter()
            .map(|u| u + FISHTAIL_SADDLE)
            .collect();
        let largest = *roots.last().expect("a real cubic has a real root");

        if bounded_librations {
            if e > 0.0 {
                return Err(ModelError::AboveLibrations { energy: e, model: self.name() });
            }
            // The loop spans [x3, x4]; at E = 0 x3 is the saddle itself.
            let x3 = roots
                .iter()
                .copied()
                .filter(|&x| x >= FISHTAIL_SADDLE - ROOT_MERGE_TOL)
                .fold(f64::INFINITY, f64::min)
                .max(FISHTAIL_SADDLE);
            return Ok(vec![DomainInterval::new(x3, largest, TurningPoint, TurningPoint)]);
        }

        let a = trunc
            .ok_or(ModelError::TruncationRequired { model: self.name() })?
            .a;
        if e >= 0.0 || roots.len() < 3 {
            // Circulation, or a merged pair of turning points near E = 0 or E = -32.
            if roots.len() == 2 && e < -16.0 {
                // Loop degenerated to the elliptic point; keep the unbounded branch only.
                let x2 = roots[0];
                return Ok(if a < x2 {
                    vec![DomainInterval::new(a, x2, Truncation, TurningPoint)]
                } else {
                    Vec::new()
                });
            }
            let x2 = if e > 0.0 { fishtail_circulation_root(e) } else { largest };
            if a >= x2 {
                return Err(ModelError::TruncationInsideDomain { a, energy: e, endpoint: x2 });
            }
            return Ok(vec![DomainInterval::new(a, x2, Truncation, TurningPoint)]);
        }
        let (x2, x3, x4) = (roots[0], roots[1], roots[2]);
        if a > x3 {
            return Err(ModelError::TruncationInsideDomain { a, energy: e, endpoint: x3 });
        }
        let mut pieces = Vec::with_capacity(2);
        if a < x2 {
            pieces.push(DomainInterval::new(a, x2, Truncation, TurningPoint));
        }
        pieces.push(DomainInterval::new(x3, x4, TurningPoint, TurningPoint));
        Ok(pieces)
    }

    fn custom_pieces(&self, sys: &MechanicalSystem, e: f64) -> Vec<DomainInterval> {
        use EndpointKind::*;
        let (lo, hi) = sys.search;
        let gap = |q: f64| e - sys.potential(q);
        let step = (hi - lo) / CUSTOM_SCAN_CELLS as f64;
        let node = |k: usize| if k == CUSTOM_SCAN_CELLS { hi } else { lo + k as f64 * step };

        let mut pieces = Vec::new();
        let mut open: Option<(f64, EndpointKind)> = (gap(lo) >= 0.0).then_some((lo, Truncation));
        let mut prev = gap(lo);
        for k in 1..=CUSTOM_SCAN_CELLS {
            let cur = gap(node(k));
            let inside_prev = prev >= 0.0;
            let inside_cur = cur >= 0.0;
            if inside_prev != inside_cur {
                let root = brent(gap, node(k - 1), node(k), CUSTOM_ROOT_TOL, 200)
                    .unwrap_or(node(k));
                match open.take() {
                    Some((start, kind)) => {
                        pieces.push(DomainInterval::new(start, root, kind, TurningPoint))
                    }
                    None => open = Some((root, TurningPoint)),
                }
            }
            prev = cur;
        }
        if let Some((start, kind)) = open {
            pieces.push(DomainInterval::new(start, hi, kind, Truncation));
        }
        pieces
    }

    pub(crate) fn anchor(&self, q: f64, e: f64, turning: bool) -> Anchor {
        let gap = if turning { 0.0 } else { e - self.potential(q) };
        let mut anchor = Anchor { q, gap, local: q, cos: 0.0, sin: 0.0 };
        match self.id {
            ModelId::Pendulum => {
                let (cos, sin) = if q.abs() == PI {
                    (-1.0, 0.0)
                } else if turning {
                    // cos q* = -(E + 1) on the level curve.
                    ((-(e + 1.0)).clamp(-1.0, 1.0), q.signum() * (-e * (e + 2.0)).max(0.0).sqrt())
                } else {
                    (q.cos(), q.sin())
                };
                anchor.cos = cos;
                anchor.sin = sin;
            }
            ModelId::Fishtail { .. } => anchor.local = q - FISHTAIL_SADDLE,
            _ => {}
        }
        anchor
    }

    /// `V(a + d) - V(a)` evaluated without cancellation for small `d`.
    fn potential_increment(&self, a: &Anchor, d: f64) -> f64 {
        match &self.id {
            ModelId::Pendulum => {
                let half = (0.5 * d).sin();
                2.0 * a.cos * half * half + a.sin * d.sin()
            }
            ModelId::Duffing => {
                let x = a.local;
                let c1 = x * (x * x - 1.0);
                let c2 = 1.5 * x * x - 0.5;
                ((((0.25 * d) + x) * d + c2) * d + c1) * d
            }
            ModelId::Fishtail { .. } => {
                let u = a.local;
                let c1 = 3.0 * u * (u - 4.0);
                let c2 = 3.0 * u - 6.0;
                ((d + c2) * d + c1) * d
            }
            ModelId::HarmonicOscillator => (a.local + 0.5 * d) * d,
            ModelId::HarmonicRepulsor { .. } => -(a.local + 0.5 * d) * d,
            ModelId::CustomMechanical(sys) => {
                if d.abs() <= 1e-2 * (1.0 + a.q.abs()) {
                    // Simpson on V' is exact to O(d⁵) and avoids subtracting V values.
                    let s0 = sys.potential_slope(a.q);
                    let s1 = sys.potential_slope(a.q + 0.5 * d);
                    let s2 = sys.potential_slope(a.q + d);
                    d * (s0 + 4.0 * s1 + s2) / 6.0
                } else {
                    sys.potential(a.q + d) - sys.potential(a.q)
                }
            }
        }
    }

    /// `V'(a + d)`.
    fn slope_at(&self, a: &Anchor, d: f64) -> f64 {
        match &self.id {
            ModelId::Pendulum => a.sin * d.cos() + a.cos * d.sin(),
            ModelId::Duffing => {
                let x = a.local + d;
                x * (x * x - 1.0)
            }
            ModelId::Fishtail { .. } => {
                let u = a.local + d;
                3.0 * u * (u - 4.0)
            }
            ModelId::HarmonicOscillator => a.local + d,
            ModelId::HarmonicRepulsor { .. } => -(a.local + d),
            ModelId::CustomMechanical(sys) => sys.potential_slope(a.q + d),
        }
    }

    /// `p²` at `a + d`.
    pub(crate) fn local_radicand(&self, a: &Anchor, d: f64) -> f64 {
        (a.gap - self.potential_increment(a, d)) / self.kinetic()
    }

    /// Arc-length integrand `sqrt(1 + (dp/dq)²)` at `a + d`.
    ///
    /// Returns `None` where the radicand is not positive (only possible
    /// within rounding of a turning point).
    pub(crate) fn local_integrand(&self, a: &Anchor, d: f64) -> Option<f64> {
        let s = self.local_radicand(a, d);
        if !(s > 0.0) {
            return None;
        }
        let k = self.kinetic();
        let v = self.slope_at(a, d);
        Some((1.0 + v * v / (4.0 * k * k * s)).sqrt())
    }

    /// Nonnegative branch at `a + d`, clamping rounding-level negatives.
    pub(crate) fn local_branch(&self, a: &Anchor, d: f64) -> f64 {
        self.local_radicand(a, d).max(0.0).sqrt()
    }
}

/// Half-width `θ*` of the librational pendulum domain, `arccos(-E - 1)`,
/// computed from half-angle forms that stay accurate near both ends.
fn pendulum_turning_angle(e: f64) -> f64 {
    if e <= -1.0 {
        2.0 * (0.5 * (e + 2.0)).max(0.0).sqrt().asin()
    } else {
        PI - 2.0 * (-0.5 * e).max(0.0).sqrt().asin()
    }
}

/// Real root of the fish-tail radicand for circulating orbits (`E > 0`).
pub fn fishtail_circulation_root(e: f64) -> f64 {
    let p = 0.5 * (e * (e + 32.0)).sqrt() + 0.5 * (e + 32.0) - 8.0;
    let c = p.cbrt();
    let x = c + 4.0 / c - 2.0;
    // One Newton step on -x³ - 6x² + E + 32 cleans up the cube-root rounding.
    let f = -x * x * x - 6.0 * x * x + e + 32.0;
    let df = -3.0 * x * x - 12.0 * x;
    if df != 0.0 {
        x - f / df
    } else {
        x
    }
}
