//! Temporal Lagrangian descriptors: arc length of trajectories over `[-t, t]`.
//!
//! The arc length is integrated as a third state component with
//! `ds/dt = |f(q, p)|`, so the step-size control of the Runge-Kutta pair
//! also bounds the error of the descriptor itself.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::HamiltonianModel;

/// Phase-space norm beyond which a trajectory is declared escaped.
pub const BLOW_UP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: f64::INFINITY, max_steps: 10_000_000 }
    }
}

/// State of the augmented flow: phase point plus accumulated arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub q: f64,
    pub p: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TemporalLd {
    pub total: f64,
    pub plus: f64,
    pub minus: f64,
    /// Sum of the accepted local error estimates of the arc-length component.
    pub est_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Complete,
    BlowUp,
    StepLimit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemporalError {
    #[error("trajectory escaped (|x| > 1e12) at t = {time}")]
    BlowUp { time: f64, partial: TemporalLd },
    #[error("step limit reached at t = {time}")]
    StepLimit { time: f64, partial: TemporalLd },
    #[error("horizon must be positive and the initial point finite")]
    InvalidInput,
    #[error("integrator tolerances must be positive")]
    InvalidConfig,
}

impl TemporalError {
    pub fn status(&self) -> FlowStatus {
        match self {
            TemporalError::BlowUp { .. } => FlowStatus::BlowUp,
            _ => FlowStatus::StepLimit,
        }
    }

    /// Values accumulated before the integration stopped.
    pub fn partial(&self) -> TemporalLd {
        match self {
            TemporalError::BlowUp { partial, .. } | TemporalError::StepLimit { partial, .. } => *partial,
            _ => TemporalLd::default(),
        }
    }
}

/// Hamiltonian vector field `(∂H/∂p, -∂H/∂q)`.
pub fn vector_field(model: &HamiltonianModel, q: f64, p: f64) -> (f64, f64) {
    (2.0 * model.kinetic() * p, -model.potential_slope(q))
}

type State = [f64; 3];

#[derive(Debug)]
enum Stop {
    BlowUp,
    StepLimit,
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri<'a> {
    model: &'a HamiltonianModel,
    sign: f64,
    cfg: IntegratorConfig,
}

impl Dopri<'_> {
    fn rhs(&self, y: &State) -> State {
        let (dq, dp) = vector_field(self.model, y[0], y[1]);
        [self.sign * dq, self.sign * dp, dq.hypot(dp)]
    }

    fn err_norm(&self, err: &State, y0: &State, y1: &State) -> f64 {
        let sum: f64 = (0..3)
            .map(|i| {
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y0[i].abs().max(y1[i].abs());
                (err[i] / sc).powi(2)
            })
            .sum();
        (sum / 3.0).sqrt()
    }

    fn initial_step(&self, y0: &State, f0: &State, t_end: f64) -> f64 {
        let norm = |v: &State| {
            let sum: f64 = (0..3)
                .map(|i| (v[i] / (self.cfg.abs_tol + self.cfg.rel_tol * y0[i].abs())).powi(2))
                .sum();
            (sum / 3.0).sqrt()
        };
        let d0 = norm(y0);
        let d1 = norm(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = add(y0, f0, h0);
        let f1 = self.rhs(&y1);
        let diff = [f1[0] - f0[0], f1[1] - f0[1], f1[2] - f0[2]];
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(t_end).min(self.cfg.max_step)
    }

    /// Integrates from `y0` over `[0, t_end]`; on early stop returns the state reached.
    fn run(&self, y0: State, t_end: f64) -> (FlowState, f64, Option<Stop>) {
        let mut y = y0;
        let mut t = 0.0;
        let mut k1 = self.rhs(&y);
        let mut h = self.initial_step(&y, &k1, t_end);
        let mut s_err = 0.0;
        let mut steps = 0usize;
        let mut reject = false;
        let state = |y: &State, t: f64| FlowState { q: y[0], p: y[1], s: y[2], t };
        while t < t_end {
            if steps >= self.cfg.max_steps || !(h > 0.0) || t + h == t {
                return (state(&y, t), s_err, Some(Stop::StepLimit));
            }
            steps += 1;
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            let k2 = self.rhs(&lin(&y, h, &[(A21, &k1)]));
            let k3 = self.rhs(&lin(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = self.rhs(&lin(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = self.rhs(&lin(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 =
                self.rhs(&lin(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y5 = lin(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = self.rhs(&y5);
            let mut err = [0.0; 3];
            for i in 0..3 {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let finite = y5.iter().chain(&k7).all(|v| v.is_finite());
            let en = if finite { self.err_norm(&err, &y, &y5) } else { f64::INFINITY };
            if en <= 1.0 {
                t = if last { t_end } else { t + h };
                y = y5;
                k1 = k7;
                s_err += err[2].abs();
                if y[0].hypot(y[1]) > BLOW_UP_NORM {
                    return (state(&y, t), s_err, Some(Stop::BlowUp));
                }
                let fac = if en == 0.0 { 10.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 10.0) };
                h *= if reject { fac.min(1.0) } else { fac };
                reject = false;
            } else {
                let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                h *= fac;
                reject = true;
            }
            h = h.min(self.cfg.max_step);
        }
        (state(&y, t), s_err, None)
    }
}

fn add(y: &State, k: &State, h: f64) -> State {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

fn lin(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for i in 0..3 {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn check(x0: (f64, f64), t: f64, cfg: &IntegratorConfig) -> Result<(), TemporalError> {
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 && cfg.max_step > 0.0) {
        return Err(TemporalError::InvalidConfig);
    }
    if !(t > 0.0 && t.is_finite() && x0.0.is_finite() && x0.1.is_finite()) {
        return Err(TemporalError::InvalidInput);
    }
    Ok(())
}

/// Integrates the flow (or the time-reversed flow when `backward`) from `x0`
/// over a time span `t`, returning the final augmented state.
pub fn flow(
    model: &HamiltonianModel,
    x0: (f64, f64),
    t: f64,
    backward: bool,
    cfg: &IntegratorConfig,
) -> Result<FlowState, TemporalError> {
    check(x0, t, cfg)?;
    let dopri = Dopri { model, sign: if backward { -1.0 } else { 1.0 }, cfg: *cfg };
    let (state, s_err, stop) = dopri.run([x0.0, x0.1, 0.0], t);
    let partial = TemporalLd { total: state.s, plus: state.s, minus: 0.0, est_error: s_err };
    match stop {
        None => Ok(state),
        Some(Stop::BlowUp) => Err(TemporalError::BlowUp { time: state.t, partial }),
        Some(Stop::StepLimit) => Err(TemporalError::StepLimit { time: state.t, partial }),
    }
}

/// `LD⁺ = ∫₀ᵗ |ẋ| dt`, `LD⁻` the same along the reversed flow, and their sum.
///
/// On blow-up or step exhaustion the error carries the lengths accumulated so far.
pub fn temporal_ld(
    model: &HamiltonianModel,
    x0: (f64, f64),
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TemporalLd, TemporalError> {
    check(x0, t, cfg)?;
    let run = |sign: f64| {
        let dopri = Dopri { model, sign, cfg: *cfg };
        dopri.run([x0.0, x0.1, 0.0], t)
    };
    let (fwd, err_fwd, stop_fwd) = run(1.0);
    let (bwd, err_bwd, stop_bwd) = run(-1.0);
    let ld = TemporalLd {
        total: fwd.s + bwd.s,
        plus: fwd.s,
        minus: bwd.s,
        est_error: err_fwd + err_bwd,
    };
    let time = fwd.t.min(bwd.t);
    match (stop_fwd, stop_bwd) {
        (None, None) => Ok(ld),
        (Some(Stop::BlowUp), _) | (_, Some(Stop::BlowUp)) => {
            Err(TemporalError::BlowUp { time, partial: ld })
        }
        _ => Err(TemporalError::StepLimit { time, partial: ld }),
    }
}

/// Which coordinate stays fixed along a sampling line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Q,
    P,
}

/// Initial conditions `(fixed = value, other ∈ [lo, hi])` with `n` uniform samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSpec {
    pub fixed: Axis,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LineSpec {
    pub fn coordinate(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / (self.n - 1) as f64)
        }
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        let c = self.coordinate(i);
        match self.fixed {
            Axis::Q => (self.value, c),
            Axis::P => (c, self.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePoint {
    pub coordinate: f64,
    pub ld_total: f64,
    pub status: FlowStatus,
}

/// Temporal LD along a line of initial conditions, in sample order.
pub fn ld_landscape_line(
    model: &HamiltonianModel,
    line: &LineSpec,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<LinePoint>, TemporalError> {
    if line.n < 2 {
        return Err(TemporalError::InvalidInput);
    }
    check(line.point(0), t, cfg)?;
    Ok((0..line.n)
        .into_par_iter()
        .map(|i| {
            let x0 = line.point(i);
            let (ld_total, status) = match temporal_ld(model, x0, t, cfg) {
                Ok(ld) => (ld.total, FlowStatus::Complete),
                Err(e) => (e.partial().total, e.status()),
            };
            LinePoint { coordinate: line.coordinate(i), ld_total, status }
        })
        .collect())
}
