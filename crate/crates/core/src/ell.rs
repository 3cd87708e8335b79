//! The geometric descriptor `ℓ(E)`: total length of the level curve `H = E`.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{HamiltonianModel, ModelError, Truncation};
use crate::quadrature::{
    arclength_frozen, arclength_interval, tanh_sinh_levels, QuadratureConfig, QuadratureError,
};

/// Relative derivative step, scaled by the distance to the nearest critical energy.
const DERIV_STEP_FACTOR: f64 = 1e-6;
const DERIV_STEP_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("difference stencil E = {energy} +/- {step} reaches the critical energy {critical}")]
    StraddlesCritical { energy: f64, step: f64, critical: f64 },
    #[error("landscape needs e_lo < e_hi and at least two samples")]
    InvalidRange,
}

/// `ℓ(E) = m · Σ` branch lengths over the domain of `E`.
pub fn ell(
    model: &HamiltonianModel,
    e: f64,
    trunc: Option<Truncation>,
    cfg: &QuadratureConfig,
) -> Result<f64, LdError> {
    let domain = model.domain(e, trunc)?;
    let mut sum = 0.0;
    for iv in &domain.intervals {
        sum += arclength_interval(model, e, iv, cfg)?.value;
    }
    Ok(model.multiplier() as f64 * sum)
}

/// Distance from `e` to the nearest finite critical energy.
fn critical_distance(model: &HamiltonianModel, e: f64) -> f64 {
    let (e_min, e_sx) = model.critical_energies();
    [e - e_min, (e - e_sx).abs()]
        .into_iter()
        .filter(|d| d.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// Default step used by [`dell_de`].
pub fn default_step(model: &HamiltonianModel, e: f64) -> f64 {
    let d = critical_distance(model, e);
    if d.is_finite() {
        (DERIV_STEP_FACTOR * d).max(DERIV_STEP_FLOOR)
    } else {
        DERIV_STEP_FACTOR * e.abs().max(1.0)
    }
}

/// `dℓ/dE` by a central difference with step `h` (default [`default_step`]).
///
/// The three evaluations share one tanh-sinh node set, chosen where the
/// quadrature converges at `E`, so discretisation error cancels in the
/// difference instead of being amplified by `1/h`.
pub fn dell_de(
    model: &HamiltonianModel,
    e: f64,
    trunc: Option<Truncation>,
    h: Option<f64>,
    cfg: &QuadratureConfig,
) -> Result<f64, LdError> {
    let h = h.unwrap_or_else(|| default_step(model, e));
    let (e_min, e_sx) = model.critical_energies();
    if e - h < e_min {
        return Err(LdError::StraddlesCritical { energy: e, step: h, critical: e_min });
    }
    if e_sx.is_finite() && (e - h - e_sx) * (e + h - e_sx) <= 0.0 {
        return Err(LdError::StraddlesCritical { energy: e, step: h, critical: e_sx });
    }
    let (lo, hi) = (e - h, e + h);
    let width = hi - lo;

    let domain = model.domain(e, trunc)?;
    let levels: Vec<Vec<usize>> = domain
        .intervals
        .iter()
        .map(|iv| tanh_sinh_levels(model, e, iv, cfg))
        .collect();
    let frozen = |x: f64| -> Result<Option<f64>, LdError> {
        let dom = model.domain(x, trunc)?;
        if dom.intervals.len() != levels.len() {
            return Ok(None);
        }
        let mut sum = 0.0;
        for (iv, lv) in dom.intervals.iter().zip(&levels) {
            match arclength_frozen(model, x, iv, lv) {
                Some(v) => sum += v,
                None => return Ok(None),
            }
        }
        Ok(Some(model.multiplier() as f64 * sum))
    };
    match (frozen(hi)?, frozen(lo)?) {
        (Some(up), Some(down)) => Ok((up - down) / width),
        _ => Ok((ell(model, hi, trunc, cfg)? - ell(model, lo, trunc, cfg)?) / width),
    }
}

/// Sampled `ℓ(E)` over an energy range.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub energies: Vec<f64>,
    pub lengths: Vec<f64>,
    /// `dℓ/dE` per sample when requested; `None` where the stencil would
    /// touch a critical energy.
    pub derivs: Option<Vec<Option<f64>>>,
}

/// `n` uniform samples of `[e_lo, e_hi]`, plus `e_sx` when it falls strictly
/// inside and is not already a sample.
pub fn landscape(
    model: &HamiltonianModel,
    e_lo: f64,
    e_hi: f64,
    n: usize,
    trunc: Option<Truncation>,
    with_derivs: bool,
    cfg: &QuadratureConfig,
) -> Result<Landscape, LdError> {
    if !(e_lo < e_hi) || n < 2 {
        return Err(LdError::InvalidRange);
    }
    let span = e_hi - e_lo;
    let mut energies: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                e_hi
            } else {
                e_lo + span * (i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let e_sx = model.e_sx();
    if e_sx > e_lo && e_sx < e_hi && !energies.contains(&e_sx) {
        let at = energies.partition_point(|&x| x < e_sx);
        energies.insert(at, e_sx);
    }

    let lengths = energies
        .par_iter()
        .map(|&e| ell(model, e, trunc, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let derivs = if with_derivs {
        let d = energies
            .par_iter()
            .map(|&e| match dell_de(model, e, trunc, None, cfg) {
                Ok(v) => Ok(Some(v)),
                Err(LdError::StraddlesCritical { .. }) => Ok(None),
                Err(err) => Err(err),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(d)
    } else {
        None
    };
    Ok(Landscape { energies, lengths, derivs })
}

/// `F_λ(q) = q·sqrt(q²λ² + sin²q) / (λ²q + sin q)`, with `F_λ(0) = 0`.
pub fn f_lambda(lambda: f64, q: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    let s = q.sin();
    q * (q * q * lambda * lambda + s * s).sqrt() / (lambda * lambda * q + s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DomainInterval, EndpointKind};
    use crate::quadrature::polyline_oracle;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn qc() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn point_level_set_has_zero_length() {
        assert_eq!(ell(&HamiltonianModel::pendulum(), -2.0, None, &qc()).unwrap(), 0.0);
        assert_eq!(ell(&HamiltonianModel::duffing(), -0.25, None, &qc()).unwrap(), 0.0);
        assert!(matches!(
            ell(&HamiltonianModel::pendulum(), -2.5, None, &qc()),
            Err(LdError::Model(ModelError::BelowMinimum { .. }))
        ));
    }

    #[test]
    fn oscillator_circumference() {
        let osc = HamiltonianModel::harmonic_oscillator();
        assert_relative_eq!(ell(&osc, 2.0, None, &qc()).unwrap(), 4.0 * PI, max_relative = 1e-12);
        let d = dell_de(&osc, 1.0, None, None, &qc()).unwrap();
        assert_relative_eq!(d, PI * 2f64.sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn pendulum_separatrix_length() {
        let pend = HamiltonianModel::pendulum();
        let l0 = ell(&pend, 0.0, None, &qc()).unwrap();
        let iv = pend.domain(0.0, None).unwrap().intervals[0];
        let chords = 2.0 * polyline_oracle(&pend, 0.0, &iv, 1_000_000).unwrap();
        assert_relative_eq!(l0, chords, max_relative = 1e-9);
        assert!((l0 - 15.2808).abs() < 1e-4);
    }

    #[test]
    fn pendulum_elliptic_derivative() {
        let pend = HamiltonianModel::pendulum();
        let eps = 1e-4;
        let d = dell_de(&pend, -2.0 + eps, None, None, &qc()).unwrap();
        let want = 2.0 * PI / (2.0 * eps).sqrt();
        assert!((d / want - 1.0).abs() < 0.01, "{d} vs {want}");
    }

    #[test]
    fn repulsor_derivative() {
        let t_star = 1.0;
        let rep = HamiltonianModel::harmonic_repulsor(t_star);
        // κ(t⋆) = ∫₀^{t⋆} sqrt(sinh² t + cosh² t) dt by composite Simpson.
        let n = 10_000;
        let h = t_star / n as f64;
        let g = |t: f64| (2.0 * t.sinh().powi(2) + 1.0).sqrt();
        let kappa: f64 = (0..n)
            .map(|k| {
                let a = k as f64 * h;
                h / 6.0 * (g(a) + 4.0 * g(a + 0.5 * h) + g(a + h))
            })
            .sum();
        for e in [1e-3, 0.5, 2.0, -0.7] {
            let l = ell(&rep, e, None, &qc()).unwrap();
            assert_relative_eq!(l, (2.0 * e.abs()).sqrt() * kappa, max_relative = 1e-10);
            let d = dell_de(&rep, e, None, None, &qc()).unwrap();
            let want = e.signum() * kappa / (2.0 * e.abs()).sqrt();
            assert_relative_eq!(d, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn straddling_steps_rejected() {
        let pend = HamiltonianModel::pendulum();
        assert!(matches!(
            dell_de(&pend, 0.0, None, None, &qc()),
            Err(LdError::StraddlesCritical { critical, .. }) if critical == 0.0
        ));
        assert!(matches!(
            dell_de(&pend, 1e-3, None, Some(2e-3), &qc()),
            Err(LdError::StraddlesCritical { .. })
        ));
        assert!(matches!(
            dell_de(&pend, -1.9, None, Some(0.2), &qc()),
            Err(LdError::StraddlesCritical { critical, .. }) if critical == -2.0
        ));
    }

    #[test]
    fn pendulum_maximal_on_separatrix() {
        let pend = HamiltonianModel::pendulum();
        let land = landscape(&pend, -2.0, 1.0, 601, None, false, &qc()).unwrap();
        assert_eq!(land.energies.len(), 601);
        let imax = land
            .lengths
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(land.energies[imax], 0.0);
    }

    #[test]
    fn separatrix_inserted_once() {
        let duff = HamiltonianModel::duffing();
        // 0 is already the fourth of ten samples
        let land = landscape(&duff, -0.25, 0.5, 10, None, false, &qc()).unwrap();
        assert_eq!(land.energies.len(), 10);
        let land = landscape(&duff, -0.25, 0.5, 8, None, true, &qc()).unwrap();
        assert_eq!(land.energies.len(), 9);
        assert!(land.energies.windows(2).all(|w| w[0] < w[1]));
        let derivs = land.derivs.unwrap();
        let isx = land.energies.iter().position(|&e| e == 0.0).unwrap();
        assert_eq!(derivs[isx], None);
        assert_eq!(derivs[0], None);
        assert!(derivs[1].unwrap() > 0.0);
        assert!(matches!(
            landscape(&duff, 0.1, 0.1, 10, None, false, &qc()),
            Err(LdError::InvalidRange)
        ));
    }

    #[test]
    fn duffing_landscape_local_max_at_separatrix() {
        // Outer circulating curves keep growing with E, so the maximum at E = 0 is local.
        let duff = HamiltonianModel::duffing();
        let land = landscape(&duff, -0.25, 0.5, 301, None, false, &qc()).unwrap();
        let isx = land.energies.iter().position(|&e| e == 0.0).unwrap();
        let l = &land.lengths;
        assert!(l[isx] > l[isx - 1] && l[isx] > l[isx + 1]);
        assert!(l[..isx].iter().all(|&v| v < l[isx]));
        let (imax, _) = l.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(imax, l.len() - 1);
    }

    #[test]
    fn fishtail_cusp_at_separatrix() {
        let fish = HamiltonianModel::fishtail();
        let trunc = Some(Truncation::new(-5.0));
        let land = landscape(&fish, -32.0, 10.0, 301, trunc, false, &qc()).unwrap();
        let isx = land.energies.iter().position(|&e| e == 0.0).unwrap();
        let l = &land.lengths;
        assert!(l[isx] > l[isx - 1] && l[isx] > l[isx + 1]);
        // a cusp: one-sided slopes have opposite signs and both are steep
        let left = dell_de(&fish, -1e-6, trunc, None, &qc()).unwrap();
        let right = dell_de(&fish, 1e-6, trunc, None, &qc()).unwrap();
        assert!(left > 100.0 && right < -100.0, "{left} {right}");
    }

    #[test]
    fn pendulum_symmetry_consistency() {
        let pend = HamiltonianModel::pendulum();
        for e in [-1.5, -0.5, -1e-3] {
            let full = pend.domain(e, None).unwrap().intervals[0];
            let half = DomainInterval::new(0.0, full.hi, EndpointKind::Regular, full.hi_kind);
            let a = arclength_interval(&pend, e, &full, &qc()).unwrap().value;
            let b = arclength_interval(&pend, e, &half, &qc()).unwrap().value;
            assert_relative_eq!(a, 2.0 * b, max_relative = 1e-10);
        }
    }

    #[test]
    fn ell_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pend = HamiltonianModel::pendulum();
        for _ in 0..20 {
            let e: f64 = rng.gen_range(-1.9..0.9);
            if e.abs() < 0.05 {
                continue;
            }
            let l = ell(&pend, e, None, &qc()).unwrap();
            let mut prev = f64::INFINITY;
            for delta in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
                let change = (ell(&pend, e + delta, None, &qc()).unwrap() - l).abs();
                assert!(change < 100.0 * delta);
                assert!(change <= prev);
                prev = change;
            }
        }
    }

    #[test]
    fn f_lambda_values() {
        assert_eq!(f_lambda(2.0, 0.0), 0.0);
        assert_relative_eq!(f_lambda(1.0, PI), PI, max_relative = 1e-12);
        assert_relative_eq!(f_lambda(10.0, PI), PI / 10.0, max_relative = 1e-12);
        assert!(f_lambda(0.5, 1e-9) < 1e-8);
    }
}
