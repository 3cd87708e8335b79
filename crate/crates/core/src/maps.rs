//! Phase-space meshes of `E`, `ℓ(E(q, p))`, its gradient norm `B`, and temporal LDs.

use rayon::prelude::*;
use thiserror::Error;

use crate::ell::{ell, LdError};
use crate::model::{HamiltonianModel, Truncation};
use crate::quadrature::QuadratureConfig;
use crate::temporal::{temporal_ld, IntegratorConfig};

/// Energy samples of the interpolation table used by [`EllMode::Table`].
pub const TABLE_SIZE: usize = 4096;
/// Node energies closer than this share one `ℓ` evaluation.
pub const ENERGY_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("grid needs lo < hi on both axes and at least 2 nodes per axis")]
    InvalidSpec,
    #[error("expected a grid of {expected:?}, got {got:?}")]
    WrongQuantity { expected: Quantity, got: Quantity },
    #[error("no node has a valid energy")]
    EmptyTable,
    #[error(transparent)]
    Ld(#[from] LdError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_lo: f64,
    pub q_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), MapError> {
        if self.q_lo < self.q_hi && self.p_lo < self.p_hi && self.nq >= 2 && self.np >= 2 {
            Ok(())
        } else {
            Err(MapError::InvalidSpec)
        }
    }

    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dq(&self) -> f64 {
        (self.q_hi - self.q_lo) / (self.nq - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_hi - self.p_lo) / (self.np - 1) as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        axis(self.q_lo, self.q_hi, self.nq, i)
    }

    pub fn p(&self, j: usize) -> f64 {
        axis(self.p_lo, self.p_hi, self.np, j)
    }

    /// Row-major index: `p` outer, `q` inner.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nq + i
    }

    /// `(q, p)` of the node at a row-major index.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.q(k % self.nq), self.p(k / self.nq))
    }
}

fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Energy,
    Ell,
    BNorm,
    Temporal,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Energy => "energy",
            Quantity::Ell => "ell",
            Quantity::BNorm => "bnorm",
            Quantity::Temporal => "temporal",
        }
    }
}

/// Scalar field on a [`GridSpec`] with a per-node validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub spec: GridSpec,
    pub quantity: Quantity,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GridMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.spec.index(i, j);
        self.mask[k].then_some(self.values[k])
    }
}

/// How [`ell_map`] evaluates `ℓ` per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EllMode {
    /// Quadrature at every distinct node energy.
    #[default]
    Exact,
    /// Monotone cubic interpolation in a dense table of `ℓ(E)`.
    Table,
}

pub fn energy_map(model: &HamiltonianModel, spec: &GridSpec) -> Result<GridMap, MapError> {
    spec.validate()?;
    let values: Vec<f64> = (0..spec.len())
        .map(|k| {
            let (q, p) = spec.node(k);
            model.energy(q, p)
        })
        .collect();
    let mask = values.iter().map(|v| v.is_finite()).collect();
    Ok(GridMap { spec: *spec, quantity: Quantity::Energy, values, mask })
}

/// `ℓ(E(q, p))` at every node.
///
/// Nodes below the minimum energy or whose quadrature fails are masked.
/// Nodes on the same level set share one evaluation.
pub fn ell_map(
    model: &HamiltonianModel,
    spec: &GridSpec,
    trunc: Option<Truncation>,
    cfg: &QuadratureConfig,
    mode: EllMode,
) -> Result<GridMap, MapError> {
    let energies = energy_map(model, spec)?.values;
    let e_min = model.e_min();
    let valid = |e: f64| e.is_finite() && e >= e_min;

    let mut distinct: Vec<f64> = energies.iter().copied().filter(|&e| valid(e)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let lookup: Box<dyn Fn(f64) -> Option<f64> + Sync> = match mode {
        EllMode::Exact => {
            // Each cluster of energies within the merge tolerance uses its smallest member.
            let mut reps = Vec::new();
            let mut rep_of = Vec::with_capacity(distinct.len());
            for &e in &distinct {
                match reps.last() {
                    Some(&r) if e - r <= ENERGY_MERGE_TOL => {}
                    _ => reps.push(e),
                }
                rep_of.push(reps.len() - 1);
            }
            let lengths: Vec<Option<f64>> =
                reps.par_iter().map(|&e| ell(model, e, trunc, cfg).ok()).collect();
            let distinct = distinct.clone();
            Box::new(move |e: f64| {
                let k = distinct.binary_search_by(|x| x.total_cmp(&e)).ok()?;
                lengths[rep_of[k]]
            })
        }
        EllMode::Table => {
            let (Some(&lo), Some(&hi)) = (distinct.first(), distinct.last()) else {
                return Err(MapError::EmptyTable);
            };
            let table = EllTable::build(model, lo, hi, trunc, cfg);
            Box::new(move |e: f64| table.eval(e))
        }
    };

    let (values, mask): (Vec<f64>, Vec<bool>) = energies
        .par_iter()
        .map(|&e| match valid(e).then(|| lookup(e)).flatten() {
            Some(v) if v.is_finite() => (v, true),
            _ => (f64::NAN, false),
        })
        .unzip();
    Ok(GridMap { spec: *spec, quantity: Quantity::Ell, values, mask })
}

/// Dense `ℓ(E)` samples with monotone piecewise-cubic (Fritsch-Carlson) interpolation.
struct EllTable {
    energies: Vec<f64>,
    lengths: Vec<f64>,
    slopes: Vec<f64>,
}

impl EllTable {
    fn build(
        model: &HamiltonianModel,
        lo: f64,
        hi: f64,
        trunc: Option<Truncation>,
        cfg: &QuadratureConfig,
    ) -> Self {
        let mut energies: Vec<f64> = if lo < hi {
            (0..TABLE_SIZE).map(|i| axis(lo, hi, TABLE_SIZE, i)).collect()
        } else {
            vec![lo]
        };
        let e_sx = model.e_sx();
        if e_sx > lo && e_sx < hi && !energies.contains(&e_sx) {
            let at = energies.partition_point(|&x| x < e_sx);
            energies.insert(at, e_sx);
        }
        let raw: Vec<Option<f64>> =
            energies.par_iter().map(|&e| ell(model, e, trunc, cfg).ok()).collect();
        let (energies, lengths): (Vec<f64>, Vec<f64>) =
            energies.into_iter().zip(raw).filter_map(|(e, l)| Some((e, l?))).unzip();
        let slopes = pchip_slopes(&energies, &lengths);
        Self { energies, lengths, slopes }
    }

    fn eval(&self, e: f64) -> Option<f64> {
        let n = self.energies.len();
        if n == 0 || e < self.energies[0] || e > self.energies[n - 1] {
            return None;
        }
        if n == 1 {
            return Some(self.lengths[0]);
        }
        let k = self.energies.partition_point(|&x| x <= e).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.energies[k], self.energies[k + 1]);
        let h = x1 - x0;
        let t = (e - x0) / h;
        let (y0, y1) = (self.lengths[k], self.lengths[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * h * d0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * h * d1,
        )
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// `B = |∇ℓ|` by finite differences on the same mesh as `ell_grid`.
///
/// Central differences inside, one-sided on the edges. A node is masked if
/// any value its stencil touches is masked.
pub fn b_map(ell_grid: &GridMap) -> Result<GridMap, MapError> {
    if ell_grid.quantity != Quantity::Ell {
        return Err(MapError::WrongQuantity { expected: Quantity::Ell, got: ell_grid.quantity });
    }
    let spec = ell_grid.spec;
    spec.validate()?;
    let (dq, dp) = (spec.dq(), spec.dp());
    let diff = |a: Option<f64>, b: Option<f64>, step: f64| Some((b? - a?) / step);
    let (values, mask): (Vec<f64>, Vec<bool>) = (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % spec.nq, k / spec.nq);
            let g = |i, j| ell_grid.get(i, j);
            let gq = match i {
                0 => diff(g(0, j), g(1, j), dq),
                _ if i + 1 == spec.nq => diff(g(i - 1, j), g(i, j), dq),
                _ => diff(g(i - 1, j), g(i + 1, j), 2.0 * dq),
            };
            let gp = match j {
                0 => diff(g(i, 0), g(i, 1), dp),
                _ if j + 1 == spec.np => diff(g(i, j - 1), g(i, j), dp),
                _ => diff(g(i, j - 1), g(i, j + 1), 2.0 * dp),
            };
            match (g(i, j), gq, gp) {
                (Some(_), Some(a), Some(b)) => (a.hypot(b), true),
                _ => (f64::NAN, false),
            }
        })
        .unzip();
    Ok(GridMap { spec, quantity: Quantity::BNorm, values, mask })
}

/// Temporal LD over `[-t, t]` at every node; escaped or stalled trajectories are masked.
pub fn temporal_map(
    model: &HamiltonianModel,
    spec: &GridSpec,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<GridMap, MapError> {
    spec.validate()?;
    let (values, mask): (Vec<f64>, Vec<bool>) = (0..spec.len())
        .into_par_iter()
        .map(|k| match temporal_ld(model, spec.node(k), t, cfg) {
            Ok(ld) => (ld.total, true),
            Err(_) => (f64::NAN, false),
        })
        .unzip();
    Ok(GridMap { spec: *spec, quantity: Quantity::Temporal, values, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(nq: usize, np: usize) -> GridSpec {
        GridSpec { q_lo: -PI, q_hi: PI, p_lo: -2.5, p_hi: 2.5, nq, np }
    }

    fn synthetic(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> GridMap {
        let values: Vec<f64> = (0..spec.len()).map(|k| {
            let (q, p) = spec.node(k);
            f(q, p)
        }).collect();
        GridMap { spec, quantity: Quantity::Ell, mask: vec![true; values.len()], values }
    }

    #[test]
    fn spec_validation_and_axes() {
        assert!(spec(1, 5).validate().is_err());
        let s = GridSpec { q_lo: 1.0, q_hi: 0.0, ..spec(3, 3) };
        assert_eq!(s.validate(), Err(MapError::InvalidSpec));
        let s = spec(5, 3);
        assert_eq!(s.q(0), -PI);
        assert_eq!(s.q(4), PI);
        assert_eq!(s.node(s.index(2, 1)), (s.q(2), 0.0));
    }

    #[test]
    fn tiny_grid_matches_pointwise_ell() {
        let pend = HamiltonianModel::pendulum();
        let cfg = QuadratureConfig::default();
        let s = GridSpec { q_lo: -1.0, q_hi: 2.0, p_lo: 0.5, p_hi: 1.5, nq: 2, np: 2 };
        let m = ell_map(&pend, &s, None, &cfg, EllMode::Exact).unwrap();
        assert_eq!(m.values.len(), 4);
        for k in 0..4 {
            let (q, p) = s.node(k);
            assert_eq!(m.values[k], ell(&pend, pend.energy(q, p), None, &cfg).unwrap());
        }
    }

    #[test]
    fn reflected_nodes_agree() {
        let pend = HamiltonianModel::pendulum();
        let s = spec(9, 11);
        let m = ell_map(&pend, &s, None, &QuadratureConfig::default(), EllMode::Exact).unwrap();
        for j in 0..s.np {
            for i in 0..s.nq {
                assert_eq!(m.get(i, j), m.get(i, s.np - 1 - j));
            }
        }
    }

    #[test]
    fn table_mode_close_to_exact() {
        let pend = HamiltonianModel::pendulum();
        let s = spec(21, 21);
        let cfg = QuadratureConfig::default();
        let exact = ell_map(&pend, &s, None, &cfg, EllMode::Exact).unwrap();
        let table = ell_map(&pend, &s, None, &cfg, EllMode::Table).unwrap();
        for k in 0..s.len() {
            let (a, b) = (exact.values[k], table.values[k]);
            assert!((a - b).abs() < 1e-3 * a.max(1.0), "node {k}: {a} vs {b}");
        }
    }

    #[test]
    fn custom_model_masks_low_energies() {
        use crate::model::MechanicalSystem;
        // The search interval starts at q = 0.5, so the minimum seen by the
        // model is V(0.5) and nodes with smaller energy have no level curve.
        let sys = MechanicalSystem::new(|q| 0.5 * q * q, |q| q, 0.5, 3.0);
        let model = HamiltonianModel::custom(sys);
        let s = GridSpec { q_lo: 0.0, q_hi: 1.0, p_lo: 0.0, p_hi: 1.0, nq: 3, np: 3 };
        let m = ell_map(&model, &s, None, &QuadratureConfig::default(), EllMode::Exact).unwrap();
        assert_eq!(m.get(0, 0), None);
        assert_eq!(m.get(1, 0), Some(0.0));
        assert!(m.get(2, 2).unwrap() > 0.0);
    }

    #[test]
    fn b_of_constant_and_linear_fields() {
        let s = spec(7, 5);
        let c = b_map(&synthetic(s, |_, _| 3.0)).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        let lin = b_map(&synthetic(s, |q, _| q)).unwrap();
        for j in 1..s.np - 1 {
            for i in 1..s.nq - 1 {
                assert!((lin.get(i, j).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        let wrong = GridMap { quantity: Quantity::Energy, ..synthetic(s, |_, _| 0.0) };
        assert!(matches!(b_map(&wrong), Err(MapError::WrongQuantity { .. })));
    }

    #[test]
    fn b_masks_neighbours_of_masked_nodes() {
        let s = spec(5, 5);
        let mut g = synthetic(s, |q, p| q + p);
        let k = s.index(2, 2);
        g.mask[k] = false;
        let b = b_map(&g).unwrap();
        for (i, j) in [(1, 2), (3, 2), (2, 1), (2, 3), (2, 2)] {
            assert_eq!(b.get(i, j), None);
        }
        assert!(b.get(0, 0).is_some());
        assert!(b.get(1, 1).is_some());
    }

    #[test]
    fn b_converges_under_refinement_away_from_ridge() {
        let osc = HamiltonianModel::harmonic_oscillator();
        let cfg = QuadratureConfig::default();
        let coarse = GridSpec { q_lo: 0.5, q_hi: 1.5, p_lo: 0.5, p_hi: 1.5, nq: 11, np: 11 };
        let fine = GridSpec { nq: 21, np: 21, ..coarse };
        let bc = b_map(&ell_map(&osc, &coarse, None, &cfg, EllMode::Exact).unwrap()).unwrap();
        let bf = b_map(&ell_map(&osc, &fine, None, &cfg, EllMode::Exact).unwrap()).unwrap();
        for j in 1..coarse.np - 1 {
            for i in 1..coarse.nq - 1 {
                let a = bc.get(i, j).unwrap();
                let b = bf.get(2 * i, 2 * j).unwrap();
                assert!((a / b - 1.0).abs() < 0.01);
                // |∇ 2π sqrt(q² + p²)| = 2π
                assert!((b / (2.0 * PI) - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn temporal_map_equilibria_and_oscillator() {
        let osc = HamiltonianModel::harmonic_oscillator();
        let s = GridSpec { q_lo: -1.0, q_hi: 1.0, p_lo: -1.0, p_hi: 1.0, nq: 5, np: 5 };
        let m = temporal_map(&osc, &s, 20.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(m.get(2, 2), Some(0.0));
        for k in 0..s.len() {
            let (q, p) = s.node(k);
            let want = 2.0 * 20.0 * q.hypot(p);
            assert!((m.values[k] - want).abs() <= 1e-6 * want.max(1e-300));
        }
    }

    #[test]
    fn pchip_reproduces_linear_data() {
        let x = [0.0, 1.0, 2.5, 4.0];
        let y = [1.0, 3.0, 6.0, 9.0];
        let d = pchip_slopes(&x, &y);
        assert!(d.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }
}
